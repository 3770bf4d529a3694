#pragma once

// Symbolic differential-equation support: closed-form solutions of
// nilpotent/triangular polynomial systems by iterated integration (verified
// exactly afterwards, so non-solvable systems are detected rather than
// mis-solved), Lie derivatives for differential induction, clock detection
// for time-parameterized labels, and the linearity check for differential
// ghosts.
//
// Conventions: each dimension has an entry variable (value when the flow
// starts) and a flow variable (the evolving value, which is also the value
// at exit). Right-hand sides are elaborated over flow variables. Solutions
// are polynomials over entry variables and the duration symbol tau.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ast.hpp"
#include "poly.hpp"

namespace kaisar {

struct OdeDimension {
  std::string base;
  Var entryVar;
  Var flowVar;
  TermPtr rhsTerm;  // over flow variables
  std::string eqName;
  bool forwardGhost = false;
  bool inverseGhost = false;
  SourceSpan span;
};

struct OdeSystem {
  std::vector<OdeDimension> dims;

  const OdeDimension* byBase(const std::string& base) const {
    for (auto& d : dims) {
      if (d.base == base) return &d;
    }
    return nullptr;
  }
  const OdeDimension* byFlowVar(const Var& v) const {
    for (auto& d : dims) {
      if (d.flowVar == v) return &d;
    }
    return nullptr;
  }
};

struct SolutionTable {
  Var tau;
  std::map<Var, Polynomial> solution;   // flowVar -> poly over entry vars + tau
  std::map<Var, Rational> clockSlope;   // flowVar -> nonzero constant slope

  bool has(const Var& flowVar) const { return solution.count(flowVar) != 0; }
};

// Antiderivative in tau with zero constant term.
inline Polynomial integrate(const Polynomial& p, const Var& tau) {
  Polynomial r;
  for (auto& [m, c] : p.terms) {
    Monomial m2 = m;
    int k = 0;
    auto it = m2.find(tau);
    if (it != m2.end()) k = it->second;
    m2[tau] = k + 1;
    r.terms[m2] = c / Rational(k + 1);
  }
  return r;
}

// Right-hand side as a rational function over flow variables; nullopt when
// the term falls outside the fragment (labels, uninterpreted applications).
inline std::optional<RatFunc> dimensionRhs(const OdeDimension& d) {
  try {
    return termToRatFunc(d.rhsTerm);
  } catch (PolyError&) {
    return std::nullopt;
  }
}

// Solve what is solvable: Picard iteration converges in n+1 steps exactly
// when a dimension's dependency chain is nilpotent; every candidate is then
// verified symbolically (d/dtau sol == rhs∘sol and sol|tau=0 == entry), so
// dimensions like x' = -x simply end up unsolved.
inline SolutionTable solveOde(const OdeSystem& sys, const Var& tau) {
  SolutionTable table;
  table.tau = tau;

  struct Cand {
    const OdeDimension* dim;
    Polynomial rhsPoly;  // over flow variables
  };
  std::vector<Cand> cands;
  for (auto& d : sys.dims) {
    if (d.inverseGhost) continue;
    auto rf = dimensionRhs(d);
    if (!rf) continue;
    if (!rf->den.isConstant()) continue;
    Polynomial rhs = rf->num * (Rational(1) / rf->den.constantValue());
    if (rhs.isConstant() && !(rhs.constantValue() == 0)) {
      table.clockSlope[d.flowVar] = rhs.constantValue();
    }
    cands.push_back({&d, std::move(rhs)});
  }
  if (cands.empty()) return table;

  std::map<Var, Polynomial> state;  // flowVar -> current iterate
  for (auto& c : cands) state[c.dim->flowVar] = Polynomial::variable(c.dim->flowVar);

  for (size_t iter = 0; iter < cands.size() + 1; ++iter) {
    std::map<Var, Polynomial> next;
    for (auto& c : cands) {
      Polynomial composed = substitute(c.rhsPoly, state);
      next[c.dim->flowVar] =
          Polynomial::variable(c.dim->entryVar) + integrate(composed, tau);
    }
    state = std::move(next);
  }

  // exact verification, dimension by dimension
  for (auto& c : cands) {
    const Polynomial& sol = state[c.dim->flowVar];
    Polynomial lhs = differentiate(sol, tau);
    Polynomial rhs = substitute(c.rhsPoly, state);
    if (!(lhs == rhs)) continue;
    std::map<Var, Polynomial> atZero{{tau, Polynomial{}}};
    if (!(substitute(sol, atZero) == Polynomial::variable(c.dim->entryVar))) continue;
    table.solution[c.dim->flowVar] = sol;
  }
  return table;
}

// Lie derivative of p along the flow (inverse-ghost dimensions are erased
// from proofs and do not contribute). Result is a rational function; nullopt
// when some needed right-hand side is not one.
inline std::optional<RatFunc> lieDerivative(const Polynomial& p, const OdeSystem& sys) {
  RatFunc acc = RatFunc::fromPoly(Polynomial{});
  for (auto& d : sys.dims) {
    if (d.inverseGhost) continue;
    Polynomial dp = differentiate(p, d.flowVar);
    if (dp.isZero()) continue;
    auto rhs = dimensionRhs(d);
    if (!rhs) return std::nullopt;
    acc = acc + RatFunc::fromPoly(dp) * *rhs;
  }
  return acc;
}

// Differential-ghost admissibility: each forward-ghost equation must be
// linear in its own variable with coefficients free of every ghost variable,
// so the ghost flow cannot escape to infinity before the main flow does.
struct GhostCheckError {
  std::string message;
  SourceSpan span;
};

inline std::optional<GhostCheckError> checkDifferentialGhost(const OdeSystem& sys) {
  std::set<Var> ghostVars;
  for (auto& d : sys.dims) {
    if (d.forwardGhost) ghostVars.insert(d.flowVar);
  }
  for (auto& d : sys.dims) {
    if (!d.forwardGhost) continue;
    auto rf = dimensionRhs(d);
    if (!rf || !rf->den.isConstant()) {
      return GhostCheckError{"ghost equation for " + d.base +
                                 " has a non-polynomial right-hand side",
                             d.span};
    }
    Polynomial rhs = rf->num;
    if (rhs.degreeIn(d.flowVar) > 1) {
      return GhostCheckError{"ghost equation for " + d.base +
                                 " is not linear in " + d.base,
                             d.span};
    }
    // coefficients a, b of  rhs = a*y + b  must not mention ghost variables
    Polynomial a = differentiate(rhs, d.flowVar);
    Polynomial b = substitute(rhs, {{d.flowVar, Polynomial{}}});
    for (auto& g : ghostVars) {
      if (a.degreeIn(g) > 0 || b.degreeIn(g) > 0) {
        return GhostCheckError{"ghost equation for " + d.base +
                                   " has a coefficient mentioning ghost variable " + g.base,
                               d.span};
      }
    }
  }
  return std::nullopt;
}

// Render a solution polynomial back into a term (used when substituting
// solutions into label references).
inline TermPtr polynomialToTerm(const Polynomial& p, SourceSpan span = {}) {
  if (p.terms.empty()) return mkNum(Rational(0), span);
  TermPtr acc;
  for (auto& [m, c] : p.terms) {
    TermPtr t;
    if (m.empty()) {
      t = mkNum(c, span);
    } else {
      for (auto& [v, e] : m) {
        TermPtr f = mkVar(v, span);
        if (e > 1) f = mkBin(TermKind::Power, f, mkNum(Rational(e), span), span);
        t = t ? mkBin(TermKind::Times, t, f, span) : f;
      }
      if (!(c == 1)) {
        t = mkBin(TermKind::Times, mkNum(c, span), t, span);
      }
    }
    acc = acc ? mkBin(TermKind::Plus, acc, t, span) : t;
  }
  return acc;
}

}  // namespace kaisar
