#pragma once

// Abstract syntax for Kaisar documents and for the hybrid games they play.
//
// Variables are SSA-aware: a Var is a base name plus a variant index. Surface
// syntax parses with index -1 ("whatever the current variant is"); the
// elaborator replaces that with concrete indices. Located expressions
// (e@label(args)) survive parsing and SSA as explicit nodes and are resolved
// by the label-resolution pass.
//
// Nodes are immutable and shared via shared_ptr<const T>; there is no
// hash-consing, identity is structural (see equalTerm/equalFormula).

#include <memory>
#include <string>
#include <vector>

#include "rational.hpp"
#include "source.hpp"

namespace kaisar {

struct Var {
  std::string base;
  int index = -1;  // -1: unelaborated surface reference

  bool operator==(const Var& o) const { return base == o.base && index == o.index; }
  bool operator!=(const Var& o) const { return !(*this == o); }
  bool operator<(const Var& o) const {
    if (base != o.base) return base < o.base;
    return index < o.index;
  }
  std::string str() const {
    if (index < 0) return base;
    return base + "#" + std::to_string(index);
  }
};

// ---------------------------------------------------------------------------
// Terms

enum class TermKind {
  Number,
  Variable,
  Plus,
  Minus,
  Times,
  Divide,
  Power,   // lhs ^ rhs; rhs must normalize to a rational constant
  Neg,     // -lhs
  Apply,   // named function application: user `let` or builtin min/max
  Located  // lhs @ label(args)
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  TermKind kind;
  SourceSpan span;

  Rational value;             // Number
  Var var;                    // Variable
  TermPtr lhs, rhs;           // binary ops; Neg/Located use lhs
  std::string name;           // Apply: function name; Located: label name
  std::vector<TermPtr> args;  // Apply arguments; Located label arguments
  int referrer = -1;          // Located: elaboration point id (set by SSA pass)
};

inline TermPtr mkNum(Rational v, SourceSpan s = {}) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Number;
  t->value = std::move(v);
  t->span = s;
  return t;
}
inline TermPtr mkVar(Var v, SourceSpan s = {}) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Variable;
  t->var = std::move(v);
  t->span = s;
  return t;
}
inline TermPtr mkVar(const std::string& base, int index = -1, SourceSpan s = {}) {
  return mkVar(Var{base, index}, s);
}
inline TermPtr mkBin(TermKind k, TermPtr a, TermPtr b, SourceSpan s = {}) {
  auto t = std::make_shared<Term>();
  t->kind = k;
  t->lhs = std::move(a);
  t->rhs = std::move(b);
  t->span = s;
  return t;
}
inline TermPtr mkNeg(TermPtr a, SourceSpan s = {}) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Neg;
  t->lhs = std::move(a);
  t->span = s;
  return t;
}
inline TermPtr mkApply(std::string name, std::vector<TermPtr> args, SourceSpan s = {}) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Apply;
  t->name = std::move(name);
  t->args = std::move(args);
  t->span = s;
  return t;
}
inline TermPtr mkLocatedTerm(TermPtr subject, std::string label, std::vector<TermPtr> args,
                             SourceSpan s = {}) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Located;
  t->lhs = std::move(subject);
  t->name = std::move(label);
  t->args = std::move(args);
  t->span = s;
  return t;
}

// ---------------------------------------------------------------------------
// Formulas

enum class CmpOp { Eq, Ne, Le, Lt, Ge, Gt };

enum class FormulaKind {
  True,
  False,
  Cmp,
  Not,
  And,
  Or,
  Imply,
  Iff,
  PredApply,  // named predicate application (user `let p(...) <-> ...`)
  Located,    // child @ label(args)
  Box,        // [game] child   -- only in `proves` targets / rendered conclusions
  Diamond     // <game> child
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;
struct Game;
using GamePtr = std::shared_ptr<const Game>;

struct Formula {
  FormulaKind kind;
  SourceSpan span;

  CmpOp op = CmpOp::Eq;        // Cmp
  TermPtr left, right;         // Cmp
  FormulaPtr child, child2;    // unary/binary connectives
  std::string name;            // PredApply name; Located label name
  std::vector<TermPtr> args;   // PredApply / Located label arguments
  GamePtr game;                // Box / Diamond
  int referrer = -1;           // Located: elaboration point id
};

inline FormulaPtr mkTrue(SourceSpan s = {}) {
  auto f = std::make_shared<Formula>();
  f->kind = FormulaKind::True;
  f->span = s;
  return f;
}
inline FormulaPtr mkFalse(SourceSpan s = {}) {
  auto f = std::make_shared<Formula>();
  f->kind = FormulaKind::False;
  f->span = s;
  return f;
}
inline FormulaPtr mkCmp(CmpOp op, TermPtr l, TermPtr r, SourceSpan s = {}) {
  auto f = std::make_shared<Formula>();
  f->kind = FormulaKind::Cmp;
  f->op = op;
  f->left = std::move(l);
  f->right = std::move(r);
  f->span = s;
  return f;
}
inline FormulaPtr mkUnary(FormulaKind k, FormulaPtr c, SourceSpan s = {}) {
  auto f = std::make_shared<Formula>();
  f->kind = k;
  f->child = std::move(c);
  f->span = s;
  return f;
}
inline FormulaPtr mkBinary(FormulaKind k, FormulaPtr a, FormulaPtr b, SourceSpan s = {}) {
  auto f = std::make_shared<Formula>();
  f->kind = k;
  f->child = std::move(a);
  f->child2 = std::move(b);
  f->span = s;
  return f;
}
inline FormulaPtr mkPredApply(std::string name, std::vector<TermPtr> args, SourceSpan s = {}) {
  auto f = std::make_shared<Formula>();
  f->kind = FormulaKind::PredApply;
  f->name = std::move(name);
  f->args = std::move(args);
  f->span = s;
  return f;
}
inline FormulaPtr mkLocatedFormula(FormulaPtr subject, std::string label,
                                   std::vector<TermPtr> args, SourceSpan s = {}) {
  auto f = std::make_shared<Formula>();
  f->kind = FormulaKind::Located;
  f->child = std::move(subject);
  f->name = std::move(label);
  f->args = std::move(args);
  f->span = s;
  return f;
}
inline FormulaPtr mkModal(FormulaKind k, GamePtr g, FormulaPtr post, SourceSpan s = {}) {
  auto f = std::make_shared<Formula>();
  f->kind = k;
  f->game = std::move(g);
  f->child = std::move(post);
  f->span = s;
  return f;
}

inline FormulaPtr conjoin(const std::vector<FormulaPtr>& fs) {
  if (fs.empty()) return mkTrue();
  FormulaPtr acc = fs[0];
  for (size_t i = 1; i < fs.size(); ++i) acc = mkBinary(FormulaKind::And, acc, fs[i]);
  return acc;
}
inline FormulaPtr disjoin(const std::vector<FormulaPtr>& fs) {
  if (fs.empty()) return mkFalse();
  FormulaPtr acc = fs[0];
  for (size_t i = 1; i < fs.size(); ++i) acc = mkBinary(FormulaKind::Or, acc, fs[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// Games (reification output and `proves` targets)

enum class GameKind { Assign, RandomAssign, Test, Ode, Seq, Choice, Repeat, Dual };

struct OdeEquation {
  Var var;
  TermPtr rhs;
  std::string eqName;    // optional surface name on the equation
  bool fwdGhost = false; // inside /++ ++/ in the equation list
  bool invGhost = false; // inside /-- --/ in the equation list
  SourceSpan span;
};

struct Game {
  GameKind kind;
  SourceSpan span;

  Var var;            // Assign / RandomAssign
  TermPtr term;       // Assign rhs
  FormulaPtr fml;     // Test formula; Ode domain (True when absent)
  std::vector<OdeEquation> odes;
  std::vector<GamePtr> children;  // Seq / Choice members; Repeat/Dual use children[0]
};

inline GamePtr mkAssignGame(Var v, TermPtr rhs, SourceSpan s = {}) {
  auto g = std::make_shared<Game>();
  g->kind = GameKind::Assign;
  g->var = std::move(v);
  g->term = std::move(rhs);
  g->span = s;
  return g;
}
inline GamePtr mkRandomGame(Var v, SourceSpan s = {}) {
  auto g = std::make_shared<Game>();
  g->kind = GameKind::RandomAssign;
  g->var = std::move(v);
  g->span = s;
  return g;
}
inline GamePtr mkTestGame(FormulaPtr f, SourceSpan s = {}) {
  auto g = std::make_shared<Game>();
  g->kind = GameKind::Test;
  g->fml = std::move(f);
  g->span = s;
  return g;
}
inline GamePtr mkOdeGame(std::vector<OdeEquation> eqs, FormulaPtr domain, SourceSpan s = {}) {
  auto g = std::make_shared<Game>();
  g->kind = GameKind::Ode;
  g->odes = std::move(eqs);
  g->fml = domain ? std::move(domain) : mkTrue();
  g->span = s;
  return g;
}
inline GamePtr mkSeqGame(std::vector<GamePtr> parts, SourceSpan s = {}) {
  auto g = std::make_shared<Game>();
  g->kind = GameKind::Seq;
  g->children = std::move(parts);
  g->span = s;
  return g;
}
inline GamePtr mkChoiceGame(std::vector<GamePtr> parts, SourceSpan s = {}) {
  auto g = std::make_shared<Game>();
  g->kind = GameKind::Choice;
  g->children = std::move(parts);
  g->span = s;
  return g;
}
inline GamePtr mkRepeatGame(GamePtr body, SourceSpan s = {}) {
  auto g = std::make_shared<Game>();
  g->kind = GameKind::Repeat;
  g->children = {std::move(body)};
  g->span = s;
  return g;
}
inline GamePtr mkDualGame(GamePtr body, SourceSpan s = {}) {
  auto g = std::make_shared<Game>();
  g->kind = GameKind::Dual;
  g->children = {std::move(body)};
  g->span = s;
  return g;
}

// ---------------------------------------------------------------------------
// Proof terms (note statements, switch scrutinees)

struct ProofTerm;
using ProofTermPtr = std::shared_ptr<const ProofTerm>;

struct ProofTerm {
  std::string head;                 // fact name, or kernel rule name when args nonempty
  std::vector<ProofTermPtr> args;   // empty: plain fact reference
  SourceSpan span;
};

inline ProofTermPtr mkProofTerm(std::string head, std::vector<ProofTermPtr> args = {},
                                SourceSpan s = {}) {
  auto p = std::make_shared<ProofTerm>();
  p->head = std::move(head);
  p->args = std::move(args);
  p->span = s;
  return p;
}

// ---------------------------------------------------------------------------
// Statements

enum class Method { Auto, Prop, Rcf, Solution, Induction, Guard };

struct MethodSpec {
  bool given = false;          // false: no `by` clause (defaults to auto)
  Method method = Method::Auto;
  TermPtr delta;               // optional guard(δ)
};

struct UsingSpec {
  bool given = false;          // false: no `using` clause
  bool ellipsis = false;       // `...` entry: union with the default selection
  std::vector<std::string> names;
};

enum class StmtKind {
  Assume,        // ?name:(φ);          name optional
  Assert,        // !name:(φ) using ... by m;
  Assign,        // x := f;
  RandomAssign,  // x := *;
  EqAssign,      // ?name:(x := f);
  Block,         // { s* }
  Choice,        // { A ++ B ++ ... }
  Loop,          // { s* }*  (Demonic)
  For,           // for (init; !inv; ?guard; incr) { body }
  Switch,        // switch (pt?) { case [n:](g) => body ... }
  Ode,           // { eqs & domain-items }
  GhostFwd,      // /++ s* ++/
  GhostInv,      // /-- s* --/
  Label,         // name: | name(params):
  Note,          // note n = pt;
  LetFunc,       // let f(x,..) = term;
  LetPred,       // let p(x,..) <-> φ;
  LetGame,       // let g ::= game;
  Print,         // print(e);
  Conclusion,    // conclusion name [with (a,b,...)];
  Proves         // proves name "formula";
};

enum class DomItemKind { Assume, Assert, Duration };

struct Statement;
using StmtPtr = std::shared_ptr<const Statement>;

struct DomainItem {
  DomItemKind kind;
  std::string name;       // fact name; may be empty
  FormulaPtr fml;         // Assume/Assert
  Var var;                // Duration: t := e
  TermPtr rhs;            // Duration rhs
  UsingSpec usingSpec;    // Assert
  MethodSpec methodSpec;  // Assert
  SourceSpan span;
};

struct SwitchCase {
  std::string name;  // optional fact name for the guard
  FormulaPtr guard;
  std::vector<StmtPtr> body;
  SourceSpan span;
};

// SSA merge bookkeeping, filled by the elaborator.
struct VarMerge {
  std::string base;
  int mergedIndex = -1;            // variant current after the join
  std::vector<int> sourceIndices;  // per-branch exit variant (choice/switch),
                                   // or {preLoop, bodyEnd} for loops
};

struct Statement {
  StmtKind kind;
  SourceSpan span;

  std::string name;            // fact/label/note/let name (may be empty)
  FormulaPtr fml;              // assume/assert formula
  Var var;                     // assignment target
  TermPtr rhs;                 // assignment rhs
  std::vector<StmtPtr> body;   // block/loop/ghost statements; choice: branches as Blocks
  std::vector<SwitchCase> cases;
  ProofTermPtr scrutinee;      // switch; note proof term
  UsingSpec usingSpec;
  MethodSpec methodSpec;

  // For loop pieces
  StmtPtr forInit, forInvariant, forGuard, forIncrement;

  // ODE pieces
  std::vector<OdeEquation> odes;
  std::vector<DomainItem> domain;

  // Labels
  std::vector<std::string> labelParams;

  // let definitions
  std::vector<std::string> params;
  TermPtr letTerm;
  FormulaPtr letFml;
  GamePtr letGame;

  // commands
  std::vector<std::string> withNames;  // conclusion ... with (...)
  std::string targetText;              // proves: quoted formula text
  FormulaPtr targetFml;                // proves: parsed target

  // SSA metadata (elaborated AST only)
  std::vector<VarMerge> merges;   // choice/switch joins; loop entry merges
  int ssaPointBefore = -1;        // elaboration point ids for label resolution
  int ssaPointAfter = -1;
  int odeId = -1;                 // Ode: index into the elaborated ODE registry

  // Loop invariants re-read at the states where obligations arise: the entry
  // state (for-loop base case), the merged loop-head state, and the body-end
  // state (inductive step).
  FormulaPtr invEntry, invHead, invBodyEnd;
};

inline std::shared_ptr<Statement> mkStmt(StmtKind k, SourceSpan s = {}) {
  auto st = std::make_shared<Statement>();
  st->kind = k;
  st->span = s;
  return st;
}

using Document = std::vector<StmtPtr>;

}  // namespace kaisar
