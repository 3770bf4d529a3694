#pragma once

// Structural operations on the AST: free variables, substitution, equality,
// and expansion of `let` definitions. Substitution is capture-free because
// the term language has no binders; `let` parameters are substituted away at
// expansion time.

#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ast.hpp"

namespace kaisar {

// ---------------------------------------------------------------------------
// Free variables

inline void collectVars(const TermPtr& t, std::set<Var>& out) {
  if (!t) return;
  switch (t->kind) {
    case TermKind::Number: return;
    case TermKind::Variable: out.insert(t->var); return;
    case TermKind::Neg: collectVars(t->lhs, out); return;
    case TermKind::Located:
      collectVars(t->lhs, out);
      for (auto& a : t->args) collectVars(a, out);
      return;
    case TermKind::Apply:
      for (auto& a : t->args) collectVars(a, out);
      return;
    default:
      collectVars(t->lhs, out);
      collectVars(t->rhs, out);
      return;
  }
}

inline void collectVars(const FormulaPtr& f, std::set<Var>& out);
inline void collectVars(const GamePtr& g, std::set<Var>& out) {
  if (!g) return;
  switch (g->kind) {
    case GameKind::Assign:
      out.insert(g->var);
      collectVars(g->term, out);
      return;
    case GameKind::RandomAssign: out.insert(g->var); return;
    case GameKind::Test: collectVars(g->fml, out); return;
    case GameKind::Ode:
      for (auto& eq : g->odes) {
        out.insert(eq.var);
        collectVars(eq.rhs, out);
      }
      collectVars(g->fml, out);
      return;
    default:
      for (auto& c : g->children) collectVars(c, out);
      return;
  }
}

inline void collectVars(const FormulaPtr& f, std::set<Var>& out) {
  if (!f) return;
  switch (f->kind) {
    case FormulaKind::True:
    case FormulaKind::False: return;
    case FormulaKind::Cmp:
      collectVars(f->left, out);
      collectVars(f->right, out);
      return;
    case FormulaKind::PredApply:
      for (auto& a : f->args) collectVars(a, out);
      return;
    case FormulaKind::Located:
      collectVars(f->child, out);
      for (auto& a : f->args) collectVars(a, out);
      return;
    case FormulaKind::Box:
    case FormulaKind::Diamond:
      collectVars(f->game, out);
      collectVars(f->child, out);
      return;
    default:
      collectVars(f->child, out);
      collectVars(f->child2, out);
      return;
  }
}

inline std::set<Var> freeVariables(const TermPtr& t) {
  std::set<Var> s;
  collectVars(t, s);
  return s;
}
inline std::set<Var> freeVariables(const FormulaPtr& f) {
  std::set<Var> s;
  collectVars(f, s);
  return s;
}
inline std::set<std::string> freeBaseNames(const FormulaPtr& f) {
  std::set<Var> s;
  collectVars(f, s);
  std::set<std::string> names;
  for (auto& v : s) names.insert(v.base);
  return names;
}

// ---------------------------------------------------------------------------
// Generic rebuilding walks

using TermRewriter = std::function<TermPtr(const TermPtr&)>;  // nullptr = recurse

inline TermPtr rewriteTerm(const TermPtr& t, const TermRewriter& rw) {
  if (!t) return t;
  if (TermPtr direct = rw(t)) return direct;
  switch (t->kind) {
    case TermKind::Number:
    case TermKind::Variable: return t;
    case TermKind::Neg: {
      TermPtr a = rewriteTerm(t->lhs, rw);
      if (a == t->lhs) return t;
      return mkNeg(a, t->span);
    }
    case TermKind::Apply: {
      std::vector<TermPtr> args;
      bool changed = false;
      for (auto& a : t->args) {
        args.push_back(rewriteTerm(a, rw));
        changed |= args.back() != a;
      }
      if (!changed) return t;
      return mkApply(t->name, std::move(args), t->span);
    }
    case TermKind::Located: {
      TermPtr subj = rewriteTerm(t->lhs, rw);
      std::vector<TermPtr> args;
      bool changed = subj != t->lhs;
      for (auto& a : t->args) {
        args.push_back(rewriteTerm(a, rw));
        changed |= args.back() != a;
      }
      if (!changed) return t;
      auto n = mkLocatedTerm(subj, t->name, std::move(args), t->span);
      const_cast<Term*>(n.get())->referrer = t->referrer;
      return n;
    }
    default: {
      TermPtr a = rewriteTerm(t->lhs, rw);
      TermPtr b = rewriteTerm(t->rhs, rw);
      if (a == t->lhs && b == t->rhs) return t;
      return mkBin(t->kind, a, b, t->span);
    }
  }
}

inline FormulaPtr rewriteFormulaTerms(const FormulaPtr& f, const TermRewriter& rw) {
  if (!f) return f;
  switch (f->kind) {
    case FormulaKind::True:
    case FormulaKind::False: return f;
    case FormulaKind::Cmp: {
      TermPtr l = rewriteTerm(f->left, rw);
      TermPtr r = rewriteTerm(f->right, rw);
      if (l == f->left && r == f->right) return f;
      return mkCmp(f->op, l, r, f->span);
    }
    case FormulaKind::PredApply: {
      std::vector<TermPtr> args;
      bool changed = false;
      for (auto& a : f->args) {
        args.push_back(rewriteTerm(a, rw));
        changed |= args.back() != a;
      }
      if (!changed) return f;
      return mkPredApply(f->name, std::move(args), f->span);
    }
    case FormulaKind::Located: {
      FormulaPtr c = rewriteFormulaTerms(f->child, rw);
      std::vector<TermPtr> args;
      bool changed = c != f->child;
      for (auto& a : f->args) {
        args.push_back(rewriteTerm(a, rw));
        changed |= args.back() != a;
      }
      if (!changed) return f;
      auto n = mkLocatedFormula(c, f->name, std::move(args), f->span);
      const_cast<Formula*>(n.get())->referrer = f->referrer;
      return n;
    }
    case FormulaKind::Box:
    case FormulaKind::Diamond: {
      // Modal nodes never appear inside checked goals; leave games alone.
      FormulaPtr c = rewriteFormulaTerms(f->child, rw);
      if (c == f->child) return f;
      return mkModal(f->kind, f->game, c, f->span);
    }
    case FormulaKind::Not: {
      FormulaPtr c = rewriteFormulaTerms(f->child, rw);
      if (c == f->child) return f;
      return mkUnary(f->kind, c, f->span);
    }
    default: {
      FormulaPtr a = rewriteFormulaTerms(f->child, rw);
      FormulaPtr b = rewriteFormulaTerms(f->child2, rw);
      if (a == f->child && b == f->child2) return f;
      return mkBinary(f->kind, a, b, f->span);
    }
  }
}

// ---------------------------------------------------------------------------
// Substitution

inline TermPtr substitute(const TermPtr& t, const std::map<Var, TermPtr>& bind) {
  return rewriteTerm(t, [&](const TermPtr& n) -> TermPtr {
    if (n->kind == TermKind::Variable) {
      auto it = bind.find(n->var);
      if (it != bind.end()) return it->second;
    }
    return nullptr;
  });
}
inline FormulaPtr substitute(const FormulaPtr& f, const std::map<Var, TermPtr>& bind) {
  return rewriteFormulaTerms(f, [&](const TermPtr& n) -> TermPtr {
    if (n->kind == TermKind::Variable) {
      auto it = bind.find(n->var);
      if (it != bind.end()) return it->second;
    }
    return nullptr;
  });
}

// Remap variant indices per base name (used when rebinding facts at joins).
inline TermPtr remapVariants(const TermPtr& t, const std::map<Var, Var>& remap) {
  return rewriteTerm(t, [&](const TermPtr& n) -> TermPtr {
    if (n->kind == TermKind::Variable) {
      auto it = remap.find(n->var);
      if (it != remap.end()) return mkVar(it->second, n->span);
    }
    return nullptr;
  });
}
inline FormulaPtr remapVariants(const FormulaPtr& f, const std::map<Var, Var>& remap) {
  return rewriteFormulaTerms(f, [&](const TermPtr& n) -> TermPtr {
    if (n->kind == TermKind::Variable) {
      auto it = remap.find(n->var);
      if (it != remap.end()) return mkVar(it->second, n->span);
    }
    return nullptr;
  });
}

// ---------------------------------------------------------------------------
// Structural equality (spans ignored)

inline bool equalTerm(const TermPtr& a, const TermPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case TermKind::Number: return a->value == b->value;
    case TermKind::Variable: return a->var == b->var;
    case TermKind::Neg: return equalTerm(a->lhs, b->lhs);
    case TermKind::Apply:
    case TermKind::Located: {
      if (a->name != b->name || a->args.size() != b->args.size()) return false;
      if (a->kind == TermKind::Located && !equalTerm(a->lhs, b->lhs)) return false;
      for (size_t i = 0; i < a->args.size(); ++i) {
        if (!equalTerm(a->args[i], b->args[i])) return false;
      }
      return true;
    }
    default: return equalTerm(a->lhs, b->lhs) && equalTerm(a->rhs, b->rhs);
  }
}

inline bool equalGame(const GamePtr& a, const GamePtr& b);

inline bool equalFormula(const FormulaPtr& a, const FormulaPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case FormulaKind::True:
    case FormulaKind::False: return true;
    case FormulaKind::Cmp:
      return a->op == b->op && equalTerm(a->left, b->left) && equalTerm(a->right, b->right);
    case FormulaKind::PredApply: {
      if (a->name != b->name || a->args.size() != b->args.size()) return false;
      for (size_t i = 0; i < a->args.size(); ++i) {
        if (!equalTerm(a->args[i], b->args[i])) return false;
      }
      return true;
    }
    case FormulaKind::Located: {
      if (a->name != b->name || a->args.size() != b->args.size()) return false;
      if (!equalFormula(a->child, b->child)) return false;
      for (size_t i = 0; i < a->args.size(); ++i) {
        if (!equalTerm(a->args[i], b->args[i])) return false;
      }
      return true;
    }
    case FormulaKind::Box:
    case FormulaKind::Diamond:
      return equalGame(a->game, b->game) && equalFormula(a->child, b->child);
    case FormulaKind::Not: return equalFormula(a->child, b->child);
    default: return equalFormula(a->child, b->child) && equalFormula(a->child2, b->child2);
  }
}

inline bool equalGame(const GamePtr& a, const GamePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case GameKind::Assign: return a->var == b->var && equalTerm(a->term, b->term);
    case GameKind::RandomAssign: return a->var == b->var;
    case GameKind::Test: return equalFormula(a->fml, b->fml);
    case GameKind::Ode: {
      if (a->odes.size() != b->odes.size()) return false;
      for (size_t i = 0; i < a->odes.size(); ++i) {
        if (a->odes[i].var != b->odes[i].var || !equalTerm(a->odes[i].rhs, b->odes[i].rhs) ||
            a->odes[i].invGhost != b->odes[i].invGhost ||
            a->odes[i].fwdGhost != b->odes[i].fwdGhost) {
          return false;
        }
      }
      return equalFormula(a->fml, b->fml);
    }
    default: {
      if (a->children.size() != b->children.size()) return false;
      for (size_t i = 0; i < a->children.size(); ++i) {
        if (!equalGame(a->children[i], b->children[i])) return false;
      }
      return true;
    }
  }
}

// ---------------------------------------------------------------------------
// Statement-level structural equality (for roundtrip tests). Compares the
// surface-relevant fields; SSA metadata and spans are ignored.

inline bool equalStmt(const StmtPtr& a, const StmtPtr& b);
inline bool equalStmts(const std::vector<StmtPtr>& a, const std::vector<StmtPtr>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!equalStmt(a[i], b[i])) return false;
  }
  return true;
}
inline bool equalProofTerm(const ProofTermPtr& a, const ProofTermPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->head != b->head || a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i) {
    if (!equalProofTerm(a->args[i], b->args[i])) return false;
  }
  return true;
}

inline bool equalStmt(const StmtPtr& a, const StmtPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->name != b->name) return false;
  if (!equalFormula(a->fml, b->fml)) return false;
  if (a->var != b->var || !equalTerm(a->rhs, b->rhs)) return false;
  if (!equalStmts(a->body, b->body)) return false;
  if (a->cases.size() != b->cases.size()) return false;
  for (size_t i = 0; i < a->cases.size(); ++i) {
    if (a->cases[i].name != b->cases[i].name) return false;
    if (!equalFormula(a->cases[i].guard, b->cases[i].guard)) return false;
    if (!equalStmts(a->cases[i].body, b->cases[i].body)) return false;
  }
  if (!equalProofTerm(a->scrutinee, b->scrutinee)) return false;
  if (a->usingSpec.given != b->usingSpec.given ||
      a->usingSpec.ellipsis != b->usingSpec.ellipsis ||
      a->usingSpec.names != b->usingSpec.names) {
    return false;
  }
  if (a->methodSpec.given != b->methodSpec.given) return false;
  if (a->methodSpec.given && a->methodSpec.method != b->methodSpec.method) return false;
  if (!equalTerm(a->methodSpec.delta, b->methodSpec.delta)) return false;
  if (!equalStmt(a->forInit, b->forInit) || !equalStmt(a->forInvariant, b->forInvariant) ||
      !equalStmt(a->forGuard, b->forGuard) || !equalStmt(a->forIncrement, b->forIncrement)) {
    return false;
  }
  if (a->odes.size() != b->odes.size()) return false;
  for (size_t i = 0; i < a->odes.size(); ++i) {
    if (a->odes[i].var != b->odes[i].var || !equalTerm(a->odes[i].rhs, b->odes[i].rhs) ||
        a->odes[i].eqName != b->odes[i].eqName ||
        a->odes[i].fwdGhost != b->odes[i].fwdGhost ||
        a->odes[i].invGhost != b->odes[i].invGhost) {
      return false;
    }
  }
  if (a->domain.size() != b->domain.size()) return false;
  for (size_t i = 0; i < a->domain.size(); ++i) {
    const auto& x = a->domain[i];
    const auto& y = b->domain[i];
    if (x.kind != y.kind || x.name != y.name) return false;
    if (!equalFormula(x.fml, y.fml)) return false;
    if (x.var != y.var || !equalTerm(x.rhs, y.rhs)) return false;
    if (x.usingSpec.given != y.usingSpec.given || x.usingSpec.ellipsis != y.usingSpec.ellipsis ||
        x.usingSpec.names != y.usingSpec.names) {
      return false;
    }
    if (x.methodSpec.given != y.methodSpec.given) return false;
    if (x.methodSpec.given && x.methodSpec.method != y.methodSpec.method) return false;
    if (!equalTerm(x.methodSpec.delta, y.methodSpec.delta)) return false;
  }
  if (a->labelParams != b->labelParams || a->params != b->params) return false;
  if (!equalTerm(a->letTerm, b->letTerm) || !equalFormula(a->letFml, b->letFml) ||
      !equalGame(a->letGame, b->letGame)) {
    return false;
  }
  if (a->withNames != b->withNames || a->targetText != b->targetText) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Definition expansion (`let` registry)

struct Definitions {
  struct FuncDef {
    std::vector<std::string> params;
    TermPtr body;
  };
  struct PredDef {
    std::vector<std::string> params;
    FormulaPtr body;
  };
  std::map<std::string, FuncDef> funcs;
  std::map<std::string, PredDef> preds;
  std::map<std::string, GamePtr> games;
};

inline TermPtr expandDefinitions(const TermPtr& t, const Definitions& defs, int depth = 0);
inline FormulaPtr expandDefinitions(const FormulaPtr& f, const Definitions& defs, int depth = 0);
inline GamePtr expandDefinitions(const GamePtr& g, const Definitions& defs, int depth = 0);

inline TermPtr expandDefinitions(const TermPtr& t, const Definitions& defs, int depth) {
  if (depth > 64) throw std::runtime_error("definition expansion too deep (cyclic let?)");
  return rewriteTerm(t, [&](const TermPtr& n) -> TermPtr {
    if (n->kind == TermKind::Apply) {
      auto it = defs.funcs.find(n->name);
      if (it == defs.funcs.end()) return nullptr;  // builtin (min/max) or unknown
      const auto& def = it->second;
      if (def.params.size() != n->args.size()) {
        throw std::runtime_error("function " + n->name + " applied to wrong arity");
      }
      std::map<Var, TermPtr> bind;
      for (size_t i = 0; i < def.params.size(); ++i) {
        bind[Var{def.params[i], -1}] = expandDefinitions(n->args[i], defs, depth + 1);
      }
      return expandDefinitions(substitute(def.body, bind), defs, depth + 1);
    }
    return nullptr;
  });
}

inline FormulaPtr expandDefinitions(const FormulaPtr& f, const Definitions& defs, int depth) {
  if (depth > 64) throw std::runtime_error("definition expansion too deep (cyclic let?)");
  if (!f) return f;
  if (f->kind == FormulaKind::PredApply) {
    auto it = defs.preds.find(f->name);
    if (it != defs.preds.end()) {
      const auto& def = it->second;
      if (def.params.size() != f->args.size()) {
        throw std::runtime_error("predicate " + f->name + " applied to wrong arity");
      }
      std::map<Var, TermPtr> bind;
      for (size_t i = 0; i < def.params.size(); ++i) {
        bind[Var{def.params[i], -1}] = expandDefinitions(f->args[i], defs, depth + 1);
      }
      return expandDefinitions(substitute(def.body, bind), defs, depth + 1);
    }
    throw std::runtime_error("unknown predicate " + f->name);
  }
  // Expand terms first, then recurse into subformulas.
  FormulaPtr withTerms = rewriteFormulaTerms(f, [&](const TermPtr& n) -> TermPtr {
    if (n->kind == TermKind::Apply && defs.funcs.count(n->name)) {
      return expandDefinitions(n, defs, depth + 1);
    }
    return nullptr;
  });
  switch (withTerms->kind) {
    case FormulaKind::Not: {
      auto c = expandDefinitions(withTerms->child, defs, depth + 1);
      return c == withTerms->child ? withTerms : mkUnary(FormulaKind::Not, c, withTerms->span);
    }
    case FormulaKind::And:
    case FormulaKind::Or:
    case FormulaKind::Imply:
    case FormulaKind::Iff: {
      auto a = expandDefinitions(withTerms->child, defs, depth + 1);
      auto b = expandDefinitions(withTerms->child2, defs, depth + 1);
      if (a == withTerms->child && b == withTerms->child2) return withTerms;
      return mkBinary(withTerms->kind, a, b, withTerms->span);
    }
    case FormulaKind::Located: {
      auto c = expandDefinitions(withTerms->child, defs, depth + 1);
      if (c == withTerms->child) return withTerms;
      auto n = mkLocatedFormula(c, withTerms->name, withTerms->args, withTerms->span);
      const_cast<Formula*>(n.get())->referrer = withTerms->referrer;
      return n;
    }
    case FormulaKind::Box:
    case FormulaKind::Diamond: {
      auto g = expandDefinitions(withTerms->game, defs, depth + 1);
      auto c = expandDefinitions(withTerms->child, defs, depth + 1);
      if (g == withTerms->game && c == withTerms->child) return withTerms;
      return mkModal(withTerms->kind, g, c, withTerms->span);
    }
    default: return withTerms;
  }
}

inline GamePtr expandDefinitions(const GamePtr& g, const Definitions& defs, int depth) {
  if (!g) return g;
  if (depth > 64) throw std::runtime_error("definition expansion too deep (cyclic let?)");
  switch (g->kind) {
    case GameKind::Assign: {
      auto t = expandDefinitions(g->term, defs, depth + 1);
      if (t == g->term) return g;
      return mkAssignGame(g->var, t, g->span);
    }
    case GameKind::RandomAssign: return g;
    case GameKind::Test: {
      auto f = expandDefinitions(g->fml, defs, depth + 1);
      if (f == g->fml) return g;
      return mkTestGame(f, g->span);
    }
    case GameKind::Ode: {
      std::vector<OdeEquation> eqs = g->odes;
      bool changed = false;
      for (auto& eq : eqs) {
        auto r = expandDefinitions(eq.rhs, defs, depth + 1);
        changed |= r != eq.rhs;
        eq.rhs = r;
      }
      auto f = expandDefinitions(g->fml, defs, depth + 1);
      changed |= f != g->fml;
      if (!changed) return g;
      return mkOdeGame(std::move(eqs), f, g->span);
    }
    default: {
      std::vector<GamePtr> kids;
      bool changed = false;
      for (auto& c : g->children) {
        kids.push_back(expandDefinitions(c, defs, depth + 1));
        changed |= kids.back() != c;
      }
      if (!changed) return g;
      auto n = std::make_shared<Game>();
      n->kind = g->kind;
      n->span = g->span;
      n->children = std::move(kids);
      return n;
    }
  }
}

// Flatten a conjunction/disjunction into its leaves.
inline void flatten(const FormulaPtr& f, FormulaKind k, std::vector<FormulaPtr>& out) {
  if (f && f->kind == k) {
    flatten(f->child, k, out);
    flatten(f->child2, k, out);
  } else if (f) {
    out.push_back(f);
  }
}

}  // namespace kaisar
