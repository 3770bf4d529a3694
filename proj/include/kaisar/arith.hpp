#pragma once

// The arithmetic/validity backend.
//
// A Goal is a list of named assumption formulas plus one conclusion, already
// elaborated (no labels, no definitions). Proving runs in two layers:
//
//   * a contraction-free intuitionistic sequent search (Dyckhoff's LJT)
//     decomposes the propositional structure — this is what makes
//     disjunctive assumption lookups and implication facts work;
//   * stuck sequents fall through to an exact nonlinear-arithmetic leaf:
//     substitute variable equalities at the term level, normalize every atom
//     to a rational-function difference, split on denominator signs, negate
//     the conclusion, saturate with one round of pairwise products and
//     even-power positivity facts, linearize monomials, and run
//     Gaussian/Fourier-Motzkin refutation.
//
// Counterexamples are reported only when the failing leaf is genuinely
// linear and the sample checks out by exact evaluation of the original goal;
// anything else is "unknown" and is exported as an SMT-LIB query so an
// external solver can take over.

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ast.hpp"
#include "ast_ops.hpp"
#include "fm.hpp"
#include "poly.hpp"
#include "print.hpp"

namespace kaisar {

struct Goal {
  std::vector<std::pair<std::string, FormulaPtr>> assumptions;
  FormulaPtr conclusion;
  Method method = Method::Auto;
  SourceSpan span;
  std::string factName;  // used for SMT file naming and messages

  // Every fact visible at the proof site (not just the selected
  // assumptions).  Only used to certify the sign of denominators, so that a
  // goal like `x <= d` with `v = (d-x)/T` stays provable when `T > 0` was
  // established earlier but not named in the `using` clause.
  std::vector<FormulaPtr> denFacts;
};

enum class Verdict { Valid, Invalid, Unknown };

struct VerdictCertificate {
  Verdict verdict = Verdict::Unknown;
  std::string detail;
  std::map<Var, Rational> counterexample;
  bool hasCounterexample = false;
  std::string smtFile;
};

struct ArithConfig {
  std::string solverPath;  // empty: no external solver configured
  std::string smtStem = "goal";
  bool exportSmt = true;
  size_t fmBudget = 400000;
};

// ---------------------------------------------------------------------------
// Exact evaluation of terms/formulas at rational points (used to verify
// counterexample candidates and for random soundness sampling).

inline std::optional<Rational> evalTerm(const TermPtr& t, const std::map<Var, Rational>& env) {
  switch (t->kind) {
    case TermKind::Number: return t->value;
    case TermKind::Variable: {
      auto it = env.find(t->var);
      return it != env.end() ? it->second : Rational(0);
    }
    case TermKind::Plus: {
      auto a = evalTerm(t->lhs, env), b = evalTerm(t->rhs, env);
      if (!a || !b) return std::nullopt;
      return *a + *b;
    }
    case TermKind::Minus: {
      auto a = evalTerm(t->lhs, env), b = evalTerm(t->rhs, env);
      if (!a || !b) return std::nullopt;
      return *a - *b;
    }
    case TermKind::Times: {
      auto a = evalTerm(t->lhs, env), b = evalTerm(t->rhs, env);
      if (!a || !b) return std::nullopt;
      return *a * *b;
    }
    case TermKind::Divide: {
      auto a = evalTerm(t->lhs, env), b = evalTerm(t->rhs, env);
      if (!a || !b || *b == 0) return std::nullopt;
      return *a / *b;
    }
    case TermKind::Power: {
      auto a = evalTerm(t->lhs, env), b = evalTerm(t->rhs, env);
      if (!a || !b) return std::nullopt;
      if (isInteger(*b)) {
        long long n = static_cast<long long>(numerator(*b));
        if (n < 0 && *a == 0) return std::nullopt;
        return ipow(*a, n);
      }
      return exactPow(*a, *b);
    }
    case TermKind::Neg: {
      auto a = evalTerm(t->lhs, env);
      if (!a) return std::nullopt;
      return -*a;
    }
    case TermKind::Apply: {
      if (t->args.empty()) {
        auto it = env.find(Var{t->name, -1});
        return it != env.end() ? it->second : Rational(0);
      }
      if ((t->name == "min" || t->name == "max") && t->args.size() == 2) {
        auto a = evalTerm(t->args[0], env), b = evalTerm(t->args[1], env);
        if (!a || !b) return std::nullopt;
        if (t->name == "min") return *a <= *b ? *a : *b;
        return *a >= *b ? *a : *b;
      }
      return std::nullopt;
    }
    case TermKind::Located: return std::nullopt;
  }
  return std::nullopt;
}

inline std::optional<bool> evalFormula(const FormulaPtr& f, const std::map<Var, Rational>& env) {
  switch (f->kind) {
    case FormulaKind::True: return true;
    case FormulaKind::False: return false;
    case FormulaKind::Cmp: {
      auto a = evalTerm(f->left, env), b = evalTerm(f->right, env);
      if (!a || !b) return std::nullopt;
      switch (f->op) {
        case CmpOp::Eq: return *a == *b;
        case CmpOp::Ne: return *a != *b;
        case CmpOp::Le: return *a <= *b;
        case CmpOp::Lt: return *a < *b;
        case CmpOp::Ge: return *a >= *b;
        case CmpOp::Gt: return *a > *b;
      }
      return std::nullopt;
    }
    case FormulaKind::Not: {
      auto a = evalFormula(f->child, env);
      if (!a) return std::nullopt;
      return !*a;
    }
    case FormulaKind::And: {
      auto a = evalFormula(f->child, env), b = evalFormula(f->child2, env);
      if (!a || !b) return std::nullopt;
      return *a && *b;
    }
    case FormulaKind::Or: {
      auto a = evalFormula(f->child, env), b = evalFormula(f->child2, env);
      if (!a || !b) return std::nullopt;
      return *a || *b;
    }
    case FormulaKind::Imply: {
      auto a = evalFormula(f->child, env), b = evalFormula(f->child2, env);
      if (!a || !b) return std::nullopt;
      return !*a || *b;
    }
    case FormulaKind::Iff: {
      auto a = evalFormula(f->child, env), b = evalFormula(f->child2, env);
      if (!a || !b) return std::nullopt;
      return *a == *b;
    }
    default: return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Hereditary Harrop polarity check: no disjunction may appear in conclusion
// position; positions flip every time we pass to the left of an implication.

inline bool harropOk(const FormulaPtr& f, bool conclusionPos) {
  switch (f->kind) {
    case FormulaKind::True:
    case FormulaKind::False:
    case FormulaKind::Cmp:
    case FormulaKind::PredApply: return true;
    case FormulaKind::Or:
      if (conclusionPos) return false;
      return harropOk(f->child, conclusionPos) && harropOk(f->child2, conclusionPos);
    case FormulaKind::And:
      return harropOk(f->child, conclusionPos) && harropOk(f->child2, conclusionPos);
    case FormulaKind::Imply:
      return harropOk(f->child, !conclusionPos) && harropOk(f->child2, conclusionPos);
    case FormulaKind::Not: return harropOk(f->child, !conclusionPos);
    case FormulaKind::Iff:
      // both directions are implied; be conservative
      return harropOk(f->child, true) && harropOk(f->child, false) &&
             harropOk(f->child2, true) && harropOk(f->child2, false);
    default: return false;
  }
}

inline bool checkHereditaryHarrop(const FormulaPtr& conclusion) {
  return harropOk(conclusion, true);
}

// ---------------------------------------------------------------------------
// Preprocessing: remove Iff and Not so the prover deals with a small calculus.

inline FormulaPtr desugarConnectives(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::Not:
      return mkBinary(FormulaKind::Imply, desugarConnectives(f->child), mkFalse(f->span),
                      f->span);
    case FormulaKind::Iff: {
      auto a = desugarConnectives(f->child);
      auto b = desugarConnectives(f->child2);
      return mkBinary(FormulaKind::And, mkBinary(FormulaKind::Imply, a, b, f->span),
                      mkBinary(FormulaKind::Imply, b, a, f->span), f->span);
    }
    case FormulaKind::And:
    case FormulaKind::Or:
    case FormulaKind::Imply: {
      auto a = desugarConnectives(f->child);
      auto b = desugarConnectives(f->child2);
      if (a == f->child && b == f->child2) return f;
      return mkBinary(f->kind, a, b, f->span);
    }
    default: return f;
  }
}

// ---------------------------------------------------------------------------
// min/max elimination by case splitting.

inline TermPtr findMinMax(const TermPtr& t) {
  if (!t) return nullptr;
  if (t->kind == TermKind::Apply && (t->name == "min" || t->name == "max") &&
      t->args.size() == 2) {
    // prefer innermost occurrences: search args first
    for (auto& a : t->args) {
      if (TermPtr r = findMinMax(a)) return r;
    }
    return t;
  }
  switch (t->kind) {
    case TermKind::Number:
    case TermKind::Variable: return nullptr;
    case TermKind::Apply:
    case TermKind::Located: {
      for (auto& a : t->args) {
        if (TermPtr r = findMinMax(a)) return r;
      }
      if (t->kind == TermKind::Located) return findMinMax(t->lhs);
      return nullptr;
    }
    case TermKind::Neg: return findMinMax(t->lhs);
    default: {
      if (TermPtr r = findMinMax(t->lhs)) return r;
      return findMinMax(t->rhs);
    }
  }
}

inline TermPtr findMinMax(const FormulaPtr& f) {
  if (!f) return nullptr;
  switch (f->kind) {
    case FormulaKind::Cmp: {
      if (TermPtr r = findMinMax(f->left)) return r;
      return findMinMax(f->right);
    }
    case FormulaKind::PredApply: {
      for (auto& a : f->args) {
        if (TermPtr r = findMinMax(a)) return r;
      }
      return nullptr;
    }
    case FormulaKind::Not: return findMinMax(f->child);
    case FormulaKind::And:
    case FormulaKind::Or:
    case FormulaKind::Imply:
    case FormulaKind::Iff: {
      if (TermPtr r = findMinMax(f->child)) return r;
      return findMinMax(f->child2);
    }
    default: return nullptr;
  }
}

// Replace structurally identical occurrences of `what` by `with`.
inline TermPtr replaceTerm(const TermPtr& t, const TermPtr& what, const TermPtr& with) {
  return rewriteTerm(t, [&](const TermPtr& n) -> TermPtr {
    if (equalTerm(n, what)) return with;
    return nullptr;
  });
}
inline FormulaPtr replaceTerm(const FormulaPtr& f, const TermPtr& what, const TermPtr& with) {
  return rewriteFormulaTerms(f, [&](const TermPtr& n) -> TermPtr {
    if (equalTerm(n, what)) return with;
    return nullptr;
  });
}

// ---------------------------------------------------------------------------
// The goal checker.

class GoalChecker {
 public:
  explicit GoalChecker(ArithConfig cfg = {}) : cfg_(std::move(cfg)) {}

  VerdictCertificate check(const Goal& goal) {
    lastSample_.reset();
    smtNeeded_ = false;
    denFacts_ = goal.denFacts;

    if (goal.method == Method::Rcf && !checkHereditaryHarrop(goal.conclusion)) {
      VerdictCertificate cert;
      cert.verdict = Verdict::Invalid;
      cert.detail = "conclusion is not hereditary Harrop (disjunction in conclusion position)";
      return cert;
    }

    // min/max case splits on the whole goal.
    std::vector<Goal> cases{goal};
    for (size_t i = 0; i < cases.size();) {
      if (cases.size() > 64) {
        return unknownCert(goal, "too many min/max case splits");
      }
      TermPtr mm = findMinMax(cases[i].conclusion);
      for (size_t j = 0; !mm && j < cases[i].assumptions.size(); ++j) {
        mm = findMinMax(cases[i].assumptions[j].second);
      }
      if (!mm) {
        ++i;
        continue;
      }
      const TermPtr& a = mm->args[0];
      const TermPtr& b = mm->args[1];
      bool isMin = mm->name == "min";
      Goal lo = cases[i];  // a <= b: min->a, max->b
      Goal hi = cases[i];  // a >= b: min->b, max->a
      auto retarget = [&](Goal& g, const TermPtr& with, FormulaPtr extra) {
        for (auto& [n, f] : g.assumptions) f = replaceTerm(f, mm, with);
        g.conclusion = replaceTerm(g.conclusion, mm, with);
        g.assumptions.emplace_back("", extra);
      };
      retarget(lo, isMin ? a : b, mkCmp(CmpOp::Le, a, b, mm->span));
      retarget(hi, isMin ? b : a, mkCmp(CmpOp::Ge, a, b, mm->span));
      cases[i] = lo;
      cases.insert(cases.begin() + static_cast<long>(i) + 1, hi);
    }

    // Prove every case.
    Verdict overall = Verdict::Valid;
    for (auto& c : cases) {
      std::vector<FormulaPtr> gamma;
      for (auto& [n, f] : c.assumptions) gamma.push_back(desugarConnectives(f));
      FormulaPtr g = desugarConnectives(c.conclusion);
      steps_ = 0;
      Verdict v = prove(gamma, g, c.method != Method::Prop);
      if (v == Verdict::Invalid && c.method != Method::Prop) {
        // only a verified sample justifies "invalid" for arithmetic methods
        if (lastSample_ && verifyCounterexample(goal, *lastSample_)) {
          VerdictCertificate cert;
          cert.verdict = Verdict::Invalid;
          cert.detail = "counterexample found";
          cert.counterexample = *lastSample_;
          cert.hasCounterexample = true;
          return cert;
        }
        v = Verdict::Unknown;
      }
      if (v == Verdict::Invalid) {
        VerdictCertificate cert;
        cert.verdict = Verdict::Invalid;
        cert.detail = "not provable propositionally";
        return cert;
      }
      if (v == Verdict::Unknown) overall = Verdict::Unknown;
    }

    if (overall == Verdict::Valid) {
      VerdictCertificate cert;
      cert.verdict = Verdict::Valid;
      return cert;
    }
    return unknownCert(goal, "beyond the internal decision procedure");
  }

 private:
  ArithConfig cfg_;
  std::optional<std::map<Var, Rational>> lastSample_;
  std::vector<FormulaPtr> denFacts_;
  bool smtNeeded_ = false;
  size_t steps_ = 0;

  VerdictCertificate unknownCert(const Goal& goal, const std::string& why) {
    VerdictCertificate cert;
    cert.verdict = Verdict::Unknown;
    cert.detail = why;
    if (cfg_.exportSmt) {
      std::string path = cfg_.smtStem + "_" +
                         (goal.factName.empty() ? std::string("goal") : goal.factName) +
                         ".smt2";
      if (writeSmt(goal, path)) {
        cert.smtFile = path;
        if (!cfg_.solverPath.empty()) {
          std::string out = runSolver(path);
          if (out == "unsat") {
            cert.verdict = Verdict::Valid;
            cert.detail = "discharged by external solver";
          } else if (out == "sat") {
            cert.verdict = Verdict::Invalid;
            cert.detail = "external solver found the query satisfiable";
          } else {
            cert.detail = "external solver returned '" + out + "'";
          }
        }
      }
    }
    return cert;
  }

  // ------------------------------------------------------------ the prover

  static bool isAtomic(const FormulaPtr& f) {
    return f->kind == FormulaKind::True || f->kind == FormulaKind::False ||
           f->kind == FormulaKind::Cmp || f->kind == FormulaKind::PredApply;
  }

  // Canonicalized comparison: op in {Eq, Ne, Ge, Gt} with operands oriented.
  static void orient(CmpOp& op, TermPtr& l, TermPtr& r) {
    if (op == CmpOp::Lt) {
      op = CmpOp::Gt;
      std::swap(l, r);
    } else if (op == CmpOp::Le) {
      op = CmpOp::Ge;
      std::swap(l, r);
    }
  }

  static bool atomEq(const FormulaPtr& a, const FormulaPtr& b) {
    if (a->kind != b->kind) return false;
    if (a->kind == FormulaKind::True || a->kind == FormulaKind::False) return true;
    if (a->kind == FormulaKind::PredApply) {
      if (a->name != b->name || a->args.size() != b->args.size()) return false;
      for (size_t i = 0; i < a->args.size(); ++i) {
        if (!equalTerm(a->args[i], b->args[i])) return false;
      }
      return true;
    }
    if (a->kind != FormulaKind::Cmp) return false;
    CmpOp oa = a->op, ob = b->op;
    TermPtr la = a->left, ra = a->right, lb = b->left, rb = b->right;
    orient(oa, la, ra);
    orient(ob, lb, rb);
    if (oa != ob) return false;
    // cheap screens before polynomial normalization
    try {
      RatFunc da = termToRatFunc(la) - termToRatFunc(ra);
      RatFunc db = termToRatFunc(lb) - termToRatFunc(rb);
      if (ratFuncEqual(da, db)) return true;
      if (oa == CmpOp::Eq || oa == CmpOp::Ne) return ratFuncEqual(da, -db);
      return false;
    } catch (PolyError&) {
      return equalTerm(la, lb) && equalTerm(ra, rb);
    }
  }

  Verdict allOf(Verdict a, Verdict b) {
    if (a == Verdict::Invalid || b == Verdict::Invalid) return Verdict::Invalid;
    if (a == Verdict::Unknown || b == Verdict::Unknown) return Verdict::Unknown;
    return Verdict::Valid;
  }

  Verdict prove(std::vector<FormulaPtr> gamma, FormulaPtr goal, bool arithmeticLeaves) {
    if (++steps_ > 20000) return Verdict::Unknown;

    // Right invertible rules.
    if (goal->kind == FormulaKind::True) return Verdict::Valid;
    if (goal->kind == FormulaKind::And) {
      Verdict a = prove(gamma, goal->child, arithmeticLeaves);
      if (a == Verdict::Invalid) return a;
      return allOf(a, prove(gamma, goal->child2, arithmeticLeaves));
    }
    if (goal->kind == FormulaKind::Imply) {
      gamma.push_back(goal->child);
      return prove(std::move(gamma), goal->child2, arithmeticLeaves);
    }

    // Left invertible rules.
    for (size_t i = 0; i < gamma.size(); ++i) {
      const FormulaPtr& h = gamma[i];
      if (h->kind == FormulaKind::False) return Verdict::Valid;
      if (h->kind == FormulaKind::True) {
        gamma.erase(gamma.begin() + static_cast<long>(i));
        return prove(std::move(gamma), goal, arithmeticLeaves);
      }
      if (h->kind == FormulaKind::And) {
        FormulaPtr a = h->child, b = h->child2;
        gamma.erase(gamma.begin() + static_cast<long>(i));
        gamma.push_back(a);
        gamma.push_back(b);
        return prove(std::move(gamma), goal, arithmeticLeaves);
      }
      if (h->kind == FormulaKind::Or) {
        FormulaPtr a = h->child, b = h->child2;
        std::vector<FormulaPtr> g1 = gamma, g2 = gamma;
        g1[i] = a;
        g2[i] = b;
        Verdict va = prove(std::move(g1), goal, arithmeticLeaves);
        if (va == Verdict::Invalid) return va;
        return allOf(va, prove(std::move(g2), goal, arithmeticLeaves));
      }
      if (h->kind == FormulaKind::Imply) {
        const FormulaPtr& ant = h->child;
        if (ant->kind == FormulaKind::And) {
          // (C∧D)→B  ==>  C→(D→B)
          std::vector<FormulaPtr> g = gamma;
          g[i] = mkBinary(FormulaKind::Imply, ant->child,
                          mkBinary(FormulaKind::Imply, ant->child2, h->child2, h->span),
                          h->span);
          return prove(std::move(g), goal, arithmeticLeaves);
        }
        if (ant->kind == FormulaKind::Or) {
          // (C∨D)→B  ==>  C→B, D→B
          std::vector<FormulaPtr> g = gamma;
          g[i] = mkBinary(FormulaKind::Imply, ant->child, h->child2, h->span);
          g.push_back(mkBinary(FormulaKind::Imply, ant->child2, h->child2, h->span));
          return prove(std::move(g), goal, arithmeticLeaves);
        }
        if (ant->kind == FormulaKind::True) {
          std::vector<FormulaPtr> g = gamma;
          g[i] = h->child2;
          return prove(std::move(g), goal, arithmeticLeaves);
        }
        if (ant->kind == FormulaKind::False) {
          std::vector<FormulaPtr> g = gamma;
          g.erase(g.begin() + static_cast<long>(i));
          return prove(std::move(g), goal, arithmeticLeaves);
        }
        if (isAtomic(ant)) {
          for (const auto& other : gamma) {
            if (isAtomic(other) && other->kind != FormulaKind::True &&
                other->kind != FormulaKind::False && atomEq(other, ant)) {
              std::vector<FormulaPtr> g = gamma;
              g[i] = h->child2;
              return prove(std::move(g), goal, arithmeticLeaves);
            }
          }
        }
      }
    }

    // Non-invertible: disjunction on the right (try each side).
    if (goal->kind == FormulaKind::Or) {
      Verdict va = prove(gamma, goal->child, arithmeticLeaves);
      if (va == Verdict::Valid) return va;
      Verdict vb = prove(gamma, goal->child2, arithmeticLeaves);
      if (vb == Verdict::Valid) return vb;
      if (va == Verdict::Unknown || vb == Verdict::Unknown) return Verdict::Unknown;
      return Verdict::Invalid;
    }

    // Axiom.
    if (isAtomic(goal) && goal->kind != FormulaKind::False) {
      for (const auto& h : gamma) {
        if (isAtomic(h) && atomEq(h, goal)) return Verdict::Valid;
      }
    }

    // Nested implications on the left: ((C→D)→B).
    for (size_t i = 0; i < gamma.size(); ++i) {
      const FormulaPtr& h = gamma[i];
      if (h->kind != FormulaKind::Imply || h->child->kind != FormulaKind::Imply) continue;
      FormulaPtr c = h->child->child, d = h->child->child2, b = h->child2;
      std::vector<FormulaPtr> g1 = gamma;
      g1[i] = mkBinary(FormulaKind::Imply, d, b, h->span);
      Verdict va = prove(std::move(g1), h->child, arithmeticLeaves);
      if (va == Verdict::Valid) {
        std::vector<FormulaPtr> g2 = gamma;
        g2[i] = b;
        Verdict vb = prove(std::move(g2), goal, arithmeticLeaves);
        if (vb == Verdict::Valid) return vb;
      }
    }

    // Stuck: arithmetic leaf (or propositional failure).
    if (!arithmeticLeaves) return Verdict::Invalid;
    return arithLeaf(gamma, goal);
  }

  // ------------------------------------------------------- arithmetic leaf

  struct PolyAtom {
    Polynomial poly;
    LinRel rel;  // poly REL 0
  };

  Verdict arithLeaf(const std::vector<FormulaPtr>& gamma, const FormulaPtr& goal) {
    // Collect comparison atoms; anything else in gamma is unusable here.
    std::vector<FormulaPtr> atoms;
    for (auto& h : gamma) {
      if (h->kind == FormulaKind::Cmp) atoms.push_back(h);
    }
    FormulaPtr concl = goal;
    if (goal->kind == FormulaKind::PredApply) return Verdict::Unknown;
    bool goalFalse = goal->kind == FormulaKind::False;
    if (!goalFalse && goal->kind != FormulaKind::Cmp) return Verdict::Unknown;

    // ---- term-level equality substitution closure
    std::map<Var, TermPtr> subst = equalityClosure(atoms);
    auto applySub = [&](const FormulaPtr& f) { return substituteFixpoint(f, subst); };
    std::vector<FormulaPtr> satoms;
    for (auto& a : atoms) satoms.push_back(applySub(a));
    if (!goalFalse) concl = applySub(concl);

    // ---- convert to rational-function differences
    struct RfAtom {
      CmpOp op;
      RatFunc diff;
    };
    std::vector<RfAtom> rfAssumps;
    for (auto& a : satoms) {
      CmpOp op = a->op;
      TermPtr l = a->left, r = a->right;
      orient(op, l, r);
      try {
        rfAssumps.push_back({op, termToRatFunc(l) - termToRatFunc(r)});
      } catch (PolyError&) {
        // assumption not representable: drop it (sound)
      }
    }
    std::optional<RfAtom> rfGoal;
    if (!goalFalse) {
      CmpOp op = concl->op;
      TermPtr l = concl->left, r = concl->right;
      orient(op, l, r);
      try {
        rfGoal = RfAtom{op, termToRatFunc(l) - termToRatFunc(r)};
      } catch (PolyError&) {
        return Verdict::Unknown;  // cannot normalize the conclusion
      }
    }

    // ---- denominator analysis
    std::vector<Polynomial> dens;
    auto noteDen = [&](const Polynomial& d) {
      if (d.isConstant()) return;
      for (auto& e : dens) {
        if (e == d) return;
      }
      dens.push_back(d);
    };
    for (auto& a : rfAssumps) noteDen(a.diff.den);
    if (rfGoal) noteDen(rfGoal->diff.den);

    // Polynomial-only assumption atoms, used to certify denominators nonzero.
    std::vector<PolyAtom> polyBase;
    for (auto& a : rfAssumps) {
      if (!a.diff.den.isConstant()) continue;
      appendAtom(polyBase, a.op, a.diff.num * signNorm(a.diff.den.constantValue()));
    }

    // Widen the certification pool with every visible fact: a denominator's
    // sign may be justified by context that was not selected for the goal
    // itself (e.g. a global `T > 0` while dividing by T).
    std::vector<PolyAtom> denPool = polyBase;
    std::vector<Polynomial> nePolys;
    for (auto& a : rfAssumps) {
      if (a.op == CmpOp::Ne && a.diff.den.isConstant()) nePolys.push_back(a.diff.num);
    }
    {
      std::vector<FormulaPtr> flat;
      std::function<void(const FormulaPtr&)> flatten = [&](const FormulaPtr& f) {
        if (!f) return;
        if (f->kind == FormulaKind::And) {
          flatten(f->child);
          flatten(f->child2);
          return;
        }
        if (f->kind == FormulaKind::Cmp) flat.push_back(f);
      };
      for (auto& f : denFacts_) flatten(f);
      for (auto& f : flat) {
        FormulaPtr s = applySub(f);
        CmpOp op = s->op;
        TermPtr l = s->left, r = s->right;
        orient(op, l, r);
        try {
          RatFunc d = termToRatFunc(l) - termToRatFunc(r);
          if (!d.den.isConstant()) continue;
          Polynomial p = d.num * signNorm(d.den.constantValue());
          if (op == CmpOp::Ne) {
            nePolys.push_back(std::move(p));
          } else {
            appendAtom(denPool, op, std::move(p));
          }
        } catch (PolyError&) {
          // not polynomial; useless for certification
        }
      }
    }

    // Classify each denominator: provably positive or negative denominators
    // are multiplied through directly; provably-nonzero ones get a sign
    // split; anything else is unusable.
    enum DenKind { DenPos, DenNeg, DenNonzero, DenUnusable };
    auto neMatches = [&](const Polynomial& d) {
      for (auto& p : nePolys) {
        if (p == d) return true;
        Polynomial m = -p;
        if (m == d) return true;
      }
      return false;
    };
    std::vector<int> denKind(dens.size(), DenUnusable);
    for (size_t i = 0; i < dens.size(); ++i) {
      std::vector<PolyAtom> sys = denPool;
      sys.push_back({-dens[i], LinRel::Ge});
      if (refuteSystem(sys)) {
        denKind[i] = DenPos;
        continue;
      }
      sys.back() = {dens[i], LinRel::Ge};
      if (refuteSystem(sys)) {
        denKind[i] = DenNeg;
        continue;
      }
      sys.back() = {dens[i], LinRel::Eq};
      if (refuteSystem(sys) || neMatches(dens[i])) denKind[i] = DenNonzero;
    }
    if (rfGoal && !rfGoal->diff.den.isConstant()) {
      for (size_t i = 0; i < dens.size(); ++i) {
        if (dens[i] == rfGoal->diff.den && denKind[i] == DenUnusable)
          return Verdict::Unknown;  // conclusion denominator may vanish
      }
    }

    std::vector<size_t> splitDens;
    for (size_t i = 0; i < dens.size(); ++i) {
      if (denKind[i] == DenNonzero) splitDens.push_back(i);
    }
    if (splitDens.size() > 6) return Verdict::Unknown;

    // ---- enumerate denominator sign branches
    size_t branchCount = size_t{1} << splitDens.size();
    bool sawUnknown = false;
    for (size_t mask = 0; mask < branchCount; ++mask) {
      std::vector<PolyAtom> sys;
      auto denSign = [&](const Polynomial& d) -> std::optional<bool> {
        if (d.isConstant()) return d.constantValue() > 0;
        for (size_t i = 0; i < dens.size(); ++i) {
          if (!(dens[i] == d)) continue;
          if (denKind[i] == DenPos) return true;
          if (denKind[i] == DenNeg) return false;
          if (denKind[i] == DenUnusable) return std::nullopt;
          for (size_t k = 0; k < splitDens.size(); ++k) {
            if (splitDens[k] == i) return (mask >> k & 1) == 0;
          }
        }
        return std::nullopt;  // unusable denominator
      };
      for (size_t k = 0; k < splitDens.size(); ++k) {
        bool pos = (mask >> k & 1) == 0;
        sys.push_back({pos ? dens[splitDens[k]] : -dens[splitDens[k]], LinRel::Gt});
      }
      for (size_t i = 0; i < dens.size(); ++i) {
        if (denKind[i] == DenPos) sys.push_back({dens[i], LinRel::Gt});
        if (denKind[i] == DenNeg) sys.push_back({-dens[i], LinRel::Gt});
      }
      for (auto& a : rfAssumps) {
        auto sgn = denSign(a.diff.den);
        if (!sgn) continue;  // dropped: denominator may vanish
        appendAtom(sys, a.op, *sgn ? a.diff.num : -a.diff.num);
      }

      // negated conclusion (possibly two sub-branches for an Eq conclusion)
      std::vector<std::vector<PolyAtom>> negs;
      if (goalFalse) {
        negs.push_back({});
      } else {
        auto sgn = denSign(rfGoal->diff.den);
        if (!sgn) return Verdict::Unknown;
        Polynomial p = *sgn ? rfGoal->diff.num : -rfGoal->diff.num;
        switch (rfGoal->op) {
          case CmpOp::Eq:
            negs.push_back({{p, LinRel::Gt}});
            negs.push_back({{-p, LinRel::Gt}});
            break;
          case CmpOp::Ne: negs.push_back({{p, LinRel::Eq}}); break;
          case CmpOp::Ge: negs.push_back({{-p, LinRel::Gt}}); break;
          case CmpOp::Gt: negs.push_back({{-p, LinRel::Ge}}); break;
          default: return Verdict::Unknown;  // unreachable after orient()
        }
      }

      for (auto& extra : negs) {
        std::vector<PolyAtom> full = sys;
        for (auto& e : extra) full.push_back(e);
        if (!refuteSystem(full)) {
          // try to extract a counterexample from the linear rerun
          tryCounterexample(full, subst);
          sawUnknown = true;
        }
        if (sawUnknown && lastSample_) return Verdict::Invalid;
        if (sawUnknown) return Verdict::Unknown;
      }
    }
    return Verdict::Valid;
  }

  static Rational signNorm(const Rational& c) { return c > 0 ? Rational(1) : Rational(-1); }

  // Append atom `p op 0` in {Eq,Ne,Ge,Gt} form; Ne is split by the caller
  // only in conclusions, as an assumption it is weakened away (dropped).
  static void appendAtom(std::vector<PolyAtom>& out, CmpOp op, Polynomial p) {
    switch (op) {
      case CmpOp::Eq: out.push_back({std::move(p), LinRel::Eq}); break;
      case CmpOp::Ge: out.push_back({std::move(p), LinRel::Ge}); break;
      case CmpOp::Gt: out.push_back({std::move(p), LinRel::Gt}); break;
      case CmpOp::Ne: break;  // disjunctive; dropping is sound
      default: break;         // Le/Lt eliminated by orient()
    }
  }

  // One round of product saturation + even-power facts, linearize, refute.
  bool refuteSystem(const std::vector<PolyAtom>& base) {
    std::vector<PolyAtom> sys = base;

    // even-exponent monomial positivity facts
    std::set<Monomial> universe;
    for (auto& a : sys) {
      for (auto& [m, c] : a.poly.terms) {
        if (!m.empty()) universe.insert(m);
      }
    }
    std::set<Monomial> evenFacts;
    for (auto& m : universe) {
      // all divisors with every exponent even
      std::vector<Monomial> divs{{}};
      for (auto& [v, e] : m) {
        std::vector<Monomial> next;
        for (int f = 0; f <= e; f += 2) {
          for (auto d : divs) {
            if (f > 0) d[v] = f;
            next.push_back(std::move(d));
          }
        }
        divs = std::move(next);
        if (divs.size() > 64) break;
      }
      for (auto& d : divs) {
        if (!d.empty()) evenFacts.insert(d);
      }
      if (evenFacts.size() > 64) break;
    }
    for (auto& m : evenFacts) {
      Polynomial p;
      p.terms[m] = Rational(1);
      sys.push_back({std::move(p), LinRel::Ge});
    }

    // one round of pairwise products over the inequalities
    std::vector<PolyAtom> ineqs;
    for (auto& a : sys) {
      if (a.rel != LinRel::Eq) ineqs.push_back(a);
    }
    size_t n = ineqs.size();
    if (n <= 40) {
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = i; j < n; ++j) {
          LinRel rel = (ineqs[i].rel == LinRel::Gt && ineqs[j].rel == LinRel::Gt)
                           ? LinRel::Gt
                           : LinRel::Ge;
          sys.push_back({ineqs[i].poly * ineqs[j].poly, rel});
        }
      }
    }

    return runFm(sys, false).kind == FmResult::Kind::Infeasible;
  }

  FmResult runFm(const std::vector<PolyAtom>& sys, bool wantSample,
                 std::vector<Monomial>* dimsOut = nullptr) {
    // linearize monomials
    std::map<Monomial, size_t> dim;
    std::vector<Monomial> dims;
    for (auto& a : sys) {
      for (auto& [m, c] : a.poly.terms) {
        if (m.empty()) continue;
        if (dim.emplace(m, dims.size()).second) dims.push_back(m);
      }
    }
    std::vector<LinearConstraint> rows;
    for (auto& a : sys) {
      LinearConstraint row;
      row.coeffs.assign(dims.size(), Rational(0));
      for (auto& [m, c] : a.poly.terms) {
        if (m.empty()) {
          row.constant = c;
        } else {
          row.coeffs[dim[m]] = c;
        }
      }
      row.rel = a.rel;
      rows.push_back(std::move(row));
    }
    if (dimsOut) *dimsOut = dims;
    return FourierMotzkin(dims.size(), cfg_.fmBudget).solve(std::move(rows), wantSample);
  }

  // The feasible system is a candidate refutation failure. If every atom is
  // linear, rerun without saturation products and read off a sample, then
  // reconstruct values for variables the equality closure substituted away.
  void tryCounterexample(const std::vector<PolyAtom>& base,
                         const std::map<Var, TermPtr>& subst) {
    for (auto& a : base) {
      if (a.poly.degree() > 1) return;
    }
    std::vector<Monomial> dims;
    FmResult r = runFm(base, true, &dims);
    if (r.kind != FmResult::Kind::Feasible || r.sample.size() != dims.size()) return;
    std::map<Var, Rational> sample;
    for (size_t i = 0; i < dims.size(); ++i) {
      if (dims[i].size() != 1 || dims[i].begin()->second != 1) return;  // not a plain var
      sample[dims[i].begin()->first] = r.sample[i];
    }
    for (auto& [v, t] : subst) {
      TermPtr full = t;
      for (size_t i = 0; i <= subst.size(); ++i) {
        TermPtr next = substitute(full, subst);
        if (next == full) break;
        full = next;
      }
      if (auto val = evalTerm(full, sample)) sample[v] = *val;
    }
    lastSample_ = std::move(sample);
  }

  bool verifyCounterexample(const Goal& goal, const std::map<Var, Rational>& sample) {
    for (auto& [n, f] : goal.assumptions) {
      auto v = evalFormula(f, sample);
      if (!v || !*v) return false;
    }
    auto c = evalFormula(goal.conclusion, sample);
    return c && !*c;
  }

  // ------------------------------------------- equality substitution closure

  static std::map<Var, TermPtr> equalityClosure(const std::vector<FormulaPtr>& atoms) {
    std::map<Var, TermPtr> subst;
    for (auto& a : atoms) {
      if (a->op != CmpOp::Eq) continue;
      Var v;
      TermPtr t;
      if (a->left->kind == TermKind::Variable) {
        v = a->left->var;
        t = a->right;
      } else if (a->right->kind == TermKind::Variable) {
        v = a->right->var;
        t = a->left;
      } else {
        continue;
      }
      if (subst.count(v)) continue;
      // acyclicity: expanding t under the current map must not reach v
      std::set<Var> reach;
      std::vector<TermPtr> work{t};
      bool cyclic = false;
      size_t guard = 0;
      while (!work.empty() && !cyclic && ++guard < 1000) {
        TermPtr cur = work.back();
        work.pop_back();
        for (auto& fv : freeVariables(cur)) {
          if (fv == v) {
            cyclic = true;
            break;
          }
          if (reach.insert(fv).second) {
            auto it = subst.find(fv);
            if (it != subst.end()) work.push_back(it->second);
          }
        }
      }
      if (!cyclic) subst.emplace(v, t);
    }
    return subst;
  }

  static FormulaPtr substituteFixpoint(const FormulaPtr& f, const std::map<Var, TermPtr>& s) {
    FormulaPtr cur = f;
    for (size_t i = 0; i <= s.size(); ++i) {
      FormulaPtr next = substitute(cur, s);
      if (next == cur) break;
      cur = next;
    }
    return cur;
  }

  // --------------------------------------------------------------- SMT-LIB

  static std::string smtName(const Var& v) {
    std::string s = v.base;
    if (v.index >= 0) s += "__" + std::to_string(v.index);
    return s;
  }

  static std::string smtTerm(const TermPtr& t) {
    switch (t->kind) {
      case TermKind::Number: {
        const Rational& r = t->value;
        std::string num = toString(numerator(r) < 0 ? -numerator(r) : numerator(r));
        std::string s = isInteger(r) ? num + ".0"
                                     : "(/ " + num + ".0 " + toString(denominator(r)) + ".0)";
        if (r < 0) s = "(- " + s + ")";
        return s;
      }
      case TermKind::Variable: return smtName(t->var);
      case TermKind::Plus: return "(+ " + smtTerm(t->lhs) + " " + smtTerm(t->rhs) + ")";
      case TermKind::Minus: return "(- " + smtTerm(t->lhs) + " " + smtTerm(t->rhs) + ")";
      case TermKind::Times: return "(* " + smtTerm(t->lhs) + " " + smtTerm(t->rhs) + ")";
      case TermKind::Divide: return "(/ " + smtTerm(t->lhs) + " " + smtTerm(t->rhs) + ")";
      case TermKind::Neg: return "(- " + smtTerm(t->lhs) + ")";
      case TermKind::Power: {
        if (t->rhs->kind == TermKind::Number && isInteger(t->rhs->value)) {
          long long n = static_cast<long long>(numerator(t->rhs->value));
          if (n == 0) return "1.0";
          bool inv = n < 0;
          if (inv) n = -n;
          if (n > 16) throw PolyError{"exponent too large for export", t->span};
          std::string base = smtTerm(t->lhs);
          std::string s = base;
          for (long long i = 1; i < n; ++i) s = "(* " + s + " " + base + ")";
          return inv ? "(/ 1.0 " + s + ")" : s;
        }
        throw PolyError{"non-integer exponent in export", t->span};
      }
      case TermKind::Apply: {
        if (t->args.empty()) return smtName(Var{t->name, -1});
        if ((t->name == "min" || t->name == "max") && t->args.size() == 2) {
          std::string a = smtTerm(t->args[0]), b = smtTerm(t->args[1]);
          std::string cond = t->name == "min" ? "(<= " + a + " " + b + ")"
                                              : "(>= " + a + " " + b + ")";
          return "(ite " + cond + " " + a + " " + b + ")";
        }
        throw PolyError{"uninterpreted function in export", t->span};
      }
      case TermKind::Located: throw PolyError{"labeled expression in export", t->span};
    }
    throw PolyError{"unsupported term in export", t->span};
  }

  static std::string smtFormula(const FormulaPtr& f) {
    switch (f->kind) {
      case FormulaKind::True: return "true";
      case FormulaKind::False: return "false";
      case FormulaKind::Cmp: {
        std::string l = smtTerm(f->left), r = smtTerm(f->right);
        switch (f->op) {
          case CmpOp::Eq: return "(= " + l + " " + r + ")";
          case CmpOp::Ne: return "(not (= " + l + " " + r + "))";
          case CmpOp::Le: return "(<= " + l + " " + r + ")";
          case CmpOp::Lt: return "(< " + l + " " + r + ")";
          case CmpOp::Ge: return "(>= " + l + " " + r + ")";
          case CmpOp::Gt: return "(> " + l + " " + r + ")";
        }
        return "false";
      }
      case FormulaKind::Not: return "(not " + smtFormula(f->child) + ")";
      case FormulaKind::And:
        return "(and " + smtFormula(f->child) + " " + smtFormula(f->child2) + ")";
      case FormulaKind::Or:
        return "(or " + smtFormula(f->child) + " " + smtFormula(f->child2) + ")";
      case FormulaKind::Imply:
        return "(=> " + smtFormula(f->child) + " " + smtFormula(f->child2) + ")";
      case FormulaKind::Iff:
        return "(= " + smtFormula(f->child) + " " + smtFormula(f->child2) + ")";
      default: throw PolyError{"unsupported formula in export", f->span};
    }
  }

  bool writeSmt(const Goal& goal, const std::string& path) {
    try {
      std::set<Var> vars;
      for (auto& [n, f] : goal.assumptions) collectVars(f, vars);
      collectVars(goal.conclusion, vars);
      std::ostringstream out;
      out << "(set-logic QF_NRA)\n";
      for (auto& v : vars) out << "(declare-const " << smtName(v) << " Real)\n";
      for (auto& [n, f] : goal.assumptions) {
        out << "(assert " << smtFormula(f) << ")";
        if (!n.empty()) out << " ; " << n;
        out << "\n";
      }
      out << "(assert (not " << smtFormula(goal.conclusion) << "))\n";
      out << "(check-sat)\n";
      std::ofstream file(path);
      if (!file) return false;
      file << out.str();
      return true;
    } catch (PolyError&) {
      return false;
    }
  }

  std::string runSolver(const std::string& path) {
    std::string cmd = cfg_.solverPath + " " + path + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return "";
    std::string out;
    char buf[256];
    while (fgets(buf, sizeof buf, pipe)) out += buf;
    pclose(pipe);
    // first whitespace-delimited token
    size_t b = out.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = out.find_first_of(" \t\r\n", b);
    return out.substr(b, e == std::string::npos ? std::string::npos : e - b);
  }
};

}  // namespace kaisar
