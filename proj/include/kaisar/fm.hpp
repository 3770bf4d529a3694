#pragma once

// Exact linear feasibility over Q: Gaussian elimination for equalities, then
// Fourier-Motzkin elimination for inequalities, with reconstruction of a
// sample point when the system is feasible.
//
// Constraints are rows `sum coeffs[i]*x_i + constant REL 0`. The engine is
// complete for linear systems; a work budget guards against the worst-case
// doubling so callers can fall back to "unknown" instead of hanging.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "rational.hpp"

namespace kaisar {

enum class LinRel { Eq, Ge, Gt };

struct LinearConstraint {
  std::vector<Rational> coeffs;
  Rational constant;
  LinRel rel = LinRel::Ge;
};

struct FmResult {
  enum class Kind { Infeasible, Feasible, Unknown };
  Kind kind = Kind::Unknown;
  std::vector<Rational> sample;  // filled for Feasible when requested
};

class FourierMotzkin {
 public:
  explicit FourierMotzkin(size_t dims, size_t budget = 200000)
      : dims_(dims), budget_(budget) {}

  FmResult solve(std::vector<LinearConstraint> rows, bool wantSample) {
    // --- Stage 1: eliminate equalities by substitution.
    std::vector<std::pair<size_t, LinearConstraint>> solved;  // var -> defining row
    std::vector<bool> eliminated(dims_, false);
    while (true) {
      int pick = -1;
      size_t pivot = 0;
      for (size_t i = 0; i < rows.size() && pick < 0; ++i) {
        if (rows[i].rel != LinRel::Eq) continue;
        for (size_t j = 0; j < dims_; ++j) {
          if (rows[i].coeffs[j] != 0) {
            pick = static_cast<int>(i);
            pivot = j;
            break;
          }
        }
      }
      if (pick < 0) break;
      LinearConstraint def = rows[pick];
      rows.erase(rows.begin() + pick);
      // def: c*x_p + rest = 0  =>  x_p = -(rest)/c
      Rational c = def.coeffs[pivot];
      for (auto& row : rows) {
        Rational k = row.coeffs[pivot];
        if (k == 0) continue;
        Rational f = k / c;
        for (size_t j = 0; j < dims_; ++j) row.coeffs[j] -= f * def.coeffs[j];
        row.constant -= f * def.constant;
        row.coeffs[pivot] = Rational(0);
      }
      eliminated[pivot] = true;
      solved.emplace_back(pivot, std::move(def));
    }
    // Degenerate equalities 0 = c.
    for (auto it = rows.begin(); it != rows.end();) {
      if (it->rel == LinRel::Eq) {
        if (it->constant != 0) return {FmResult::Kind::Infeasible, {}};
        it = rows.erase(it);
      } else {
        ++it;
      }
    }

    // --- Stage 2: Fourier-Motzkin on the inequalities.
    std::vector<size_t> order;  // elimination order, for sample reconstruction
    std::vector<std::vector<LinearConstraint>> snapshots;
    size_t work = rows.size();
    while (true) {
      // Active variables remaining in the rows.
      int best = -1;
      size_t bestCost = 0;
      for (size_t j = 0; j < dims_; ++j) {
        if (eliminated[j]) continue;
        size_t lo = 0, hi = 0, seen = 0;
        for (auto& r : rows) {
          if (r.coeffs[j] > 0) ++lo;
          else if (r.coeffs[j] < 0) ++hi;
          if (r.coeffs[j] != 0) ++seen;
        }
        if (seen == 0) continue;
        size_t cost = lo * hi;
        if (best < 0 || cost < bestCost) {
          best = static_cast<int>(j);
          bestCost = cost;
        }
      }
      if (best < 0) break;
      size_t j = static_cast<size_t>(best);
      snapshots.push_back(rows);
      order.push_back(j);

      std::vector<LinearConstraint> lowers, uppers, rest;
      for (auto& r : rows) {
        if (r.coeffs[j] > 0) lowers.push_back(r);        // x_j >= -rest/c
        else if (r.coeffs[j] < 0) uppers.push_back(r);   // x_j <= -rest/c
        else rest.push_back(r);
      }
      rows = std::move(rest);
      for (auto& lo : lowers) {
        for (auto& up : uppers) {
          work += 1;
          if (work > budget_) return {FmResult::Kind::Unknown, {}};
          // lo: cl*x + rl >= 0 (cl>0); up: cu*x + ru >= 0 (cu<0)
          // combine: cl*ru - cu*rl (rel) 0 with strictness if either strict
          LinearConstraint comb;
          comb.coeffs.assign(dims_, Rational(0));
          Rational cl = lo.coeffs[j];
          Rational cu = -up.coeffs[j];  // positive
          for (size_t k = 0; k < dims_; ++k) {
            comb.coeffs[k] = cl * up.coeffs[k] + cu * lo.coeffs[k];
          }
          comb.coeffs[j] = Rational(0);
          comb.constant = cl * up.constant + cu * lo.constant;
          comb.rel = (lo.rel == LinRel::Gt || up.rel == LinRel::Gt) ? LinRel::Gt : LinRel::Ge;
          bool allZero = true;
          for (auto& cf : comb.coeffs) {
            if (cf != 0) {
              allZero = false;
              break;
            }
          }
          if (allZero) {
            if (comb.rel == LinRel::Ge ? comb.constant < 0 : comb.constant <= 0) {
              return {FmResult::Kind::Infeasible, {}};
            }
            continue;  // trivially true, drop
          }
          rows.push_back(std::move(comb));
        }
      }
      eliminated[j] = true;
    }

    // --- Stage 3: only constant rows remain.
    for (auto& r : rows) {
      bool allZero = true;
      for (auto& cf : r.coeffs) {
        if (cf != 0) {
          allZero = false;
          break;
        }
      }
      if (!allZero) continue;  // row over never-bounded vars? cannot happen
      if (r.rel == LinRel::Ge ? r.constant < 0 : r.constant <= 0) {
        return {FmResult::Kind::Infeasible, {}};
      }
    }

    FmResult res;
    res.kind = FmResult::Kind::Feasible;
    if (!wantSample) return res;

    // --- Sample reconstruction, reversing the eliminations.
    std::vector<Rational> point(dims_, Rational(0));
    std::vector<bool> assigned(dims_, false);
    for (size_t step = order.size(); step-- > 0;) {
      size_t j = order[step];
      const auto& snap = snapshots[step];
      // Interval for x_j given already-assigned later vars (vars eliminated
      // after this step are assigned; vars never eliminated default to 0).
      std::optional<Rational> lo, hi;
      bool loStrict = false, hiStrict = false;
      for (const auto& r : snap) {
        Rational c = r.coeffs[j];
        if (c == 0) continue;
        Rational rest = r.constant;
        for (size_t k = 0; k < dims_; ++k) {
          if (k != j) rest += r.coeffs[k] * point[k];
        }
        Rational bound = -rest / c;
        bool strict = r.rel == LinRel::Gt;
        if (c > 0) {
          if (!lo || bound > *lo || (bound == *lo && strict)) {
            lo = bound;
            loStrict = strict;
          }
        } else {
          if (!hi || bound < *hi || (bound == *hi && strict)) {
            hi = bound;
            hiStrict = strict;
          }
        }
      }
      Rational v(0);
      if (lo && hi) {
        v = (*lo + *hi) / 2;
        if (*lo == *hi) v = *lo;  // only consistent if both non-strict
      } else if (lo) {
        v = loStrict ? *lo + 1 : *lo;
      } else if (hi) {
        v = hiStrict ? *hi - 1 : *hi;
      }
      point[j] = v;
      assigned[j] = true;
    }
    // Equality back-substitution (reverse order of solving).
    for (size_t step = solved.size(); step-- > 0;) {
      size_t j = solved[step].first;
      const auto& def = solved[step].second;
      Rational rest = def.constant;
      for (size_t k = 0; k < dims_; ++k) {
        if (k != j) rest += def.coeffs[k] * point[k];
      }
      point[j] = -rest / def.coeffs[j];
      assigned[j] = true;
    }
    res.sample = std::move(point);
    return res;
  }

 private:
  size_t dims_;
  size_t budget_;
};

// Convenience: check whether every constraint holds at a given point.
inline bool satisfiesAll(const std::vector<LinearConstraint>& rows,
                         const std::vector<Rational>& point) {
  for (auto& r : rows) {
    Rational v = r.constant;
    for (size_t i = 0; i < r.coeffs.size() && i < point.size(); ++i) {
      v += r.coeffs[i] * point[i];
    }
    switch (r.rel) {
      case LinRel::Eq:
        if (v != 0) return false;
        break;
      case LinRel::Ge:
        if (v < 0) return false;
        break;
      case LinRel::Gt:
        if (v <= 0) return false;
        break;
    }
  }
  return true;
}

}  // namespace kaisar
