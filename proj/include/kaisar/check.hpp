#pragma once
// Proof checking over the elaborated document.
//
// The checker walks the statement list once, maintaining the pool of visible
// facts, and discharges every obligation through the arithmetic backend:
// assertions, loop invariants (base case, inductive step, body re-assertion),
// switch coverage, differential cuts (by solution or by differential
// induction), ghost admissibility, and chosen-duration obligations.
//
// Variants are never reassigned, so facts persist once established; the only
// scoping rules concern branches (facts from one branch are only exported
// inside the branch disjunction), loops (facts about body-iteration variants
// are dropped at the exit), and ghost statements (see the mention rules on
// ghost variants below).

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "arith.hpp"
#include "ast.hpp"
#include "ast_ops.hpp"
#include "fm.hpp"
#include "ode.hpp"
#include "poly.hpp"
#include "print.hpp"
#include "ssa.hpp"

namespace kaisar {

struct Fact {
  std::string name;       // empty: anonymous
  FormulaPtr fml;         // elaborated, label-free
  bool fromAssert = false;
  bool ghost = false;     // established inside /++ ++/
  SourceSpan span;
};

struct ObligationRecord {
  std::string label;  // e.g. "assert 'step'", "invariant base case"
  SourceSpan span;
  Goal goal;
  VerdictCertificate cert;
  long long micros = 0;  // wall time spent in the arithmetic backend
};

struct CheckConfig {
  ArithConfig arith;
  TermPtr defaultGuardDelta;  // slack for `by guard` when none is written
};

struct CheckResult {
  std::vector<Fact> exitFacts;               // fact pool at the end of the document
  std::vector<ObligationRecord> obligations; // every goal sent to the backend
  std::vector<std::string> printed;          // rendered print(...) payloads, in order
};

// ---------------------------------------------------------------------------
// Formula utilities shared with the tests.

inline bool formulasPolyEqual(const FormulaPtr& a, const FormulaPtr& b) {
  if (!a || !b) return a == b;
  if (prettyPrint(a) == prettyPrint(b)) return true;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case FormulaKind::True:
    case FormulaKind::False:
      return true;
    case FormulaKind::Cmp: {
      if (a->op != b->op) return false;
      // compare left-right as the single polynomial difference of each side
      TermPtr da = mkBin(TermKind::Minus, a->left, a->right, a->span);
      TermPtr db = mkBin(TermKind::Minus, b->left, b->right, b->span);
      try {
        return termsPolyEqual(da, db);
      } catch (const PolyError&) {
        return false;
      }
    }
    case FormulaKind::Not:
      return formulasPolyEqual(a->child, b->child);
    case FormulaKind::And:
    case FormulaKind::Or:
    case FormulaKind::Imply:
    case FormulaKind::Iff:
      return formulasPolyEqual(a->child, b->child) && formulasPolyEqual(a->child2, b->child2);
    default:
      return false;  // PredApply/Located/modal: not expected after elaboration
  }
}

inline void orFlatten(const FormulaPtr& f, std::vector<FormulaPtr>& out) {
  if (f->kind == FormulaKind::Or) {
    orFlatten(f->child, out);
    orFlatten(f->child2, out);
  } else {
    out.push_back(f);
  }
}

inline void andFlatten(const FormulaPtr& f, std::vector<FormulaPtr>& out) {
  if (f->kind == FormulaKind::And) {
    andFlatten(f->child, out);
    andFlatten(f->child2, out);
  } else {
    out.push_back(f);
  }
}

// Classical negation with comparisons flipped, used for `by guard`.
inline FormulaPtr negateFormula(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::True: return mkFalse(f->span);
    case FormulaKind::False: return mkTrue(f->span);
    case FormulaKind::Not: return f->child;
    case FormulaKind::And:
      return mkBinary(FormulaKind::Or, negateFormula(f->child), negateFormula(f->child2),
                      f->span);
    case FormulaKind::Or:
      return mkBinary(FormulaKind::And, negateFormula(f->child), negateFormula(f->child2),
                      f->span);
    case FormulaKind::Imply:
      return mkBinary(FormulaKind::And, f->child, negateFormula(f->child2), f->span);
    case FormulaKind::Cmp: {
      CmpOp op;
      switch (f->op) {
        case CmpOp::Eq: op = CmpOp::Ne; break;
        case CmpOp::Ne: op = CmpOp::Eq; break;
        case CmpOp::Le: op = CmpOp::Gt; break;
        case CmpOp::Lt: op = CmpOp::Ge; break;
        case CmpOp::Ge: op = CmpOp::Lt; break;
        case CmpOp::Gt: op = CmpOp::Le; break;
        default: op = CmpOp::Ne; break;
      }
      return mkCmp(op, f->left, f->right, f->span);
    }
    default:
      return mkUnary(FormulaKind::Not, f, f->span);
  }
}

// Relax every inequality in a (negated-guard) formula by delta: the loop can
// only be observed to have exited once the guard fails by a margin, so the
// exit knowledge `x > b` is weakened to `x >= b - delta`.
inline FormulaPtr weakenByDelta(const FormulaPtr& f, const TermPtr& delta) {
  switch (f->kind) {
    case FormulaKind::And:
    case FormulaKind::Or:
    case FormulaKind::Imply:
      return mkBinary(f->kind, weakenByDelta(f->child, delta),
                      weakenByDelta(f->child2, delta), f->span);
    case FormulaKind::Cmp:
      switch (f->op) {
        case CmpOp::Gt:
        case CmpOp::Ge:
          return mkCmp(CmpOp::Ge, f->left,
                       mkBin(TermKind::Minus, f->right, delta, f->span), f->span);
        case CmpOp::Lt:
        case CmpOp::Le:
          return mkCmp(CmpOp::Le, f->left,
                       mkBin(TermKind::Plus, f->right, delta, f->span), f->span);
        default: return f;
      }
    default:
      return f;
  }
}

// ---------------------------------------------------------------------------
// Constructive case coverage.
//
// A switch without a scrutinee must cover every state in a way that can be
// decided by inspection: either one case guard is literally `true`, or the
// guards overlap with a uniform positive margin.  Exact complements like
// x >= 0 / x < 0 are rejected: deciding which side holds is not possible
// from approximate knowledge of x.  The margin check strengthens every
// comparison by a symbolic delta and asks whether some fixed delta > 0 makes
// the strengthened guards still exhaustive.

inline bool robustCoverage(const std::vector<FormulaPtr>& guards) {
  // Collect, per guard, the conjunction of comparison polynomials.
  struct Atom {
    Polynomial diff;  // left - right (den multiplied through; den constant only)
    CmpOp op;
  };
  std::vector<std::vector<Atom>> guardAtoms;
  for (const auto& g : guards) {
    std::vector<FormulaPtr> conjs;
    andFlatten(g, conjs);
    std::vector<Atom> atoms;
    for (const auto& c : conjs) {
      if (c->kind == FormulaKind::True) continue;
      if (c->kind != FormulaKind::Cmp) return false;  // unsupported shape
      try {
        RatFunc d = termToRatFunc(mkBin(TermKind::Minus, c->left, c->right, c->span));
        if (!d.den.isConstant()) return false;
        Rational dc = d.den.constantValue();
        Polynomial p = d.num;
        CmpOp op = c->op;
        if (dc < 0) {
          p = -p;
        }
        atoms.push_back({std::move(p), op});
      } catch (const PolyError&) {
        return false;
      }
    }
    guardAtoms.push_back(std::move(atoms));
  }

  // Monomial dimensions shared by all atoms; delta is the last dimension.
  std::map<Monomial, size_t> dim;
  for (auto& ga : guardAtoms)
    for (auto& a : ga)
      for (auto& [m, c] : a.diff.terms)
        if (!m.empty()) dim.emplace(m, dim.size());
  size_t deltaDim = dim.size();
  size_t dims = deltaDim + 1;

  auto rowFor = [&](const Atom& a, const Rational& q) -> std::optional<LinearConstraint> {
    // Negation of the delta-strengthened atom, with delta fixed to q.
    // p >= 0 strengthened to p >= delta; negation p < delta, i.e. q - p > 0.
    // p <= 0 strengthened to p <= -delta; negation p > -delta, i.e. p + q > 0.
    LinearConstraint row;
    row.coeffs.assign(dims, Rational(0));
    Rational sign;
    switch (a.op) {
      case CmpOp::Ge:
      case CmpOp::Gt: sign = Rational(-1); break;
      case CmpOp::Le:
      case CmpOp::Lt: sign = Rational(1); break;
      default: return std::nullopt;  // equalities can never cover robustly
    }
    row.rel = LinRel::Gt;
    row.constant = q;  // the strengthening margin moves to the constant side
    for (auto& [m, c] : a.diff.terms) {
      if (m.empty()) {
        row.constant = row.constant + sign * c;
      } else {
        row.coeffs[dim.at(m)] = row.coeffs[dim.at(m)] + sign * c;
      }
    }
    return row;
  };

  // One combination picks, for each guard, an atom it violates.  Coverage is
  // robust at margin q when every combination is infeasible.
  std::vector<size_t> pick(guardAtoms.size(), 0);
  auto allInfeasibleAt = [&](const Rational& q) -> bool {
    std::fill(pick.begin(), pick.end(), 0);
    for (;;) {
      std::vector<LinearConstraint> rows;
      bool comboImpossible = false;
      for (size_t i = 0; i < guardAtoms.size(); ++i) {
        if (guardAtoms[i].empty()) return false;  // guard `true` handled earlier
        auto row = rowFor(guardAtoms[i][pick[i]], q);
        if (!row) {
          comboImpossible = false;  // equality guard: negation unconstrained
          rows.clear();
          break;
        }
        rows.push_back(std::move(*row));
      }
      if (!rows.empty() || comboImpossible) {
        if (rows.empty()) return false;
        FourierMotzkin solver(dims);
        FmResult res = solver.solve(rows, false);
        if (res.kind != FmResult::Kind::Infeasible) return false;
      } else {
        return false;
      }
      // next combination
      size_t i = 0;
      for (; i < pick.size(); ++i) {
        if (++pick[i] < guardAtoms[i].size()) break;
        pick[i] = 0;
      }
      if (i == pick.size()) return true;
    }
  };

  Rational q(1);
  for (int step = 0; step < 20; ++step) {
    if (allInfeasibleAt(q)) return true;
    q = q / 2;
  }
  return false;
}

// ---------------------------------------------------------------------------
// The checker

class Checker {
 public:
  Checker(const ElabResult& elab, DiagnosticBag& diags, CheckConfig cfg = {})
      : elab_(elab), diags_(diags), cfg_(std::move(cfg)), arith_(cfg_.arith) {}

  CheckResult run() {
    facts_.clear();
    res_ = CheckResult{};
    walk(elab_.doc);
    res_.exitFacts = facts_;
    return std::move(res_);
  }

 private:
  const ElabResult& elab_;
  DiagnosticBag& diags_;
  CheckConfig cfg_;
  GoalChecker arith_;

  std::vector<Fact> facts_;
  std::map<const Statement*, FormulaPtr> noteFacts_;
  FormulaPtr lastForGuard_;  // set when a for-loop completes, consumed by `by guard`
  int ghostFwdDepth_ = 0;
  CheckResult res_;

  // -- fact pool ------------------------------------------------------------

  void addFact(std::string name, FormulaPtr fml, bool fromAssert, SourceSpan span,
               bool forceGhost = false) {
    Fact f;
    f.name = std::move(name);
    f.fml = std::move(fml);
    f.fromAssert = fromAssert;
    f.ghost = forceGhost || ghostFwdDepth_ > 0;
    f.span = span;
    facts_.push_back(std::move(f));
  }

  const Fact* findFact(const std::string& name) const {
    for (auto it = facts_.rbegin(); it != facts_.rend(); ++it)
      if (it->name == name) return &*it;
    return nullptr;
  }

  bool isProgramBase(const std::string& name) const {
    auto it = elab_.variants.lower_bound(Var{name, -1});
    return it != elab_.variants.end() && it->first.base == name;
  }

  // -- ghost mention rules ----------------------------------------------------
  //
  // Forward-ghost variants may appear in proof-only positions: inside
  // /++ ++/ statements, in differential cuts, and in assumption selections.
  // They may not appear in game-relevant positions (assumptions, assignment
  // right-hand sides, guards) or in non-ghost assertions, because erasing the
  // ghost would leave those statements referring to unassigned state.
  // Inverse-ghost variants may not appear outside /-- --/ at all.

  template <class Node>
  bool ghostMentionOk(const Node& n, bool allowFwd, SourceSpan span, const char* what) {
    if (!n) return true;
    std::set<Var> vs;
    collectVars(n, vs);
    for (const Var& v : vs) {
      auto it = elab_.variants.find(v);
      if (it == elab_.variants.end()) continue;
      if (it->second.inverseGhost) {
        diags_.error(span, std::string(what) + " mentions '" + v.base +
                               "', which is only assigned inside an inverse ghost");
        return false;
      }
      if (!allowFwd && it->second.forwardGhost) {
        diags_.error(span, std::string(what) + " mentions '" + v.base +
                               "', which is only assigned inside a forward ghost");
        return false;
      }
    }
    return true;
  }

  // -- assumption selection ---------------------------------------------------

  static void insertVars(const FormulaPtr& f, std::set<Var>& out) { collectVars(f, out); }

  // Definitional equalities: every deterministic assignment contributes
  // `x#k = rhs`; the closure chases variables mentioned by the right-hand
  // sides so chains of definitions resolve in one pass.
  void addDefinitionClosure(std::set<Var> want,
                            std::vector<std::pair<std::string, FormulaPtr>>& out) const {
    std::set<Var> done;
    std::vector<Var> queue(want.begin(), want.end());
    while (!queue.empty()) {
      Var v = queue.back();
      queue.pop_back();
      if (!done.insert(v).second) continue;
      auto it = elab_.variants.find(v);
      if (it == elab_.variants.end() || !it->second.def) continue;
      if (it->second.inverseGhost) continue;  // erased
      TermPtr def = it->second.def;
      out.emplace_back("", mkCmp(CmpOp::Eq, mkVar(v, it->second.span), def, it->second.span));
      std::set<Var> more;
      collectVars(def, more);
      for (const Var& m : more)
        if (!done.count(m)) queue.push_back(m);
    }
  }

  // Build the goal for one obligation.  `extra` assumptions are always
  // included (domain constraints, earlier cuts, negated guards).
  std::optional<Goal> makeGoal(const FormulaPtr& conclusion, const UsingSpec& us,
                               Method method, SourceSpan span, const std::string& factName,
                               std::vector<std::pair<std::string, FormulaPtr>> extra = {}) {
    Goal g;
    g.conclusion = conclusion;
    g.method = method;
    g.span = span;
    g.factName = factName.empty() ? "anonymous" : factName;

    std::set<Var> concVars;
    collectVars(conclusion, concVars);

    std::vector<const Fact*> selected;
    auto defaults = [&]() {
      for (const auto& f : facts_) {
        std::set<Var> fv;
        collectVars(f.fml, fv);
        bool shares = false;
        for (const Var& v : fv)
          if (concVars.count(v)) {
            shares = true;
            break;
          }
        if (shares) selected.push_back(&f);
      }
    };

    if (!us.given) {
      defaults();
    } else {
      if (us.ellipsis) defaults();
      for (const std::string& item : us.names) {
        if (const Fact* f = findFact(item)) {
          selected.push_back(f);
        } else if (isProgramBase(item)) {
          for (const auto& f : facts_) {
            std::set<Var> fv;
            collectVars(f.fml, fv);
            bool mentions = false;
            for (const Var& v : fv)
              if (v.base == item) {
                mentions = true;
                break;
              }
            if (mentions) selected.push_back(&f);
          }
        } else {
          diags_.error(span, "unknown fact or variable '" + item + "' in using clause");
          return std::nullopt;
        }
      }
    }

    // dedupe, preserving order
    std::set<const Fact*> seen;
    g.assumptions = extra;
    std::set<Var> want = concVars;
    for (const auto& [n, f] : extra) insertVars(f, want);
    for (const Fact* f : selected) {
      if (!seen.insert(f).second) continue;
      g.assumptions.emplace_back(f->name, f->fml);
      insertVars(f->fml, want);
    }
    addDefinitionClosure(std::move(want), g.assumptions);

    for (const auto& f : facts_) g.denFacts.push_back(f.fml);
    for (const auto& [n, f] : extra) g.denFacts.push_back(f);
    return g;
  }

  // Run the backend on a goal and report the outcome as a diagnostic.
  bool discharge(Goal goal, const std::string& label) {
    auto t0 = std::chrono::steady_clock::now();
    VerdictCertificate cert = arith_.check(goal);
    auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    res_.obligations.push_back({label, goal.span, goal, cert, elapsed});
    if (cert.verdict == Verdict::Valid) return true;
    std::ostringstream os;
    if (cert.verdict == Verdict::Invalid) {
      os << label << " does not hold";
      if (cert.hasCounterexample) {
        os << "; counterexample:";
        // fold variant indices away when the base is unambiguous
        std::map<std::string, int> perBase;
        for (auto& [v, r] : cert.counterexample) perBase[v.base]++;
        bool first = true;
        for (auto& [v, r] : cert.counterexample) {
          os << (first ? " " : ", ");
          first = false;
          os << (perBase[v.base] > 1 ? v.str() : v.base) << " = " << r;
        }
      }
    } else {
      os << "could not verify " << label;
      if (!cert.detail.empty()) os << " (" << cert.detail << ")";
      if (!cert.smtFile.empty()) os << "; goal exported to " << cert.smtFile;
    }
    diags_.error(goal.span, os.str());
    return false;
  }

  // -- statement walk ---------------------------------------------------------

  void walk(const std::vector<StmtPtr>& body) {
    for (const auto& st : body) checkStatement(st);
  }

  void checkStatement(const StmtPtr& st) {
    switch (st->kind) {
      case StmtKind::Assume: {
        if (!ghostMentionOk(st->fml, ghostFwdDepth_ > 0, st->span, "assumption")) return;
        addFact(st->name, st->fml, false, st->span);
        return;
      }
      case StmtKind::Assert: {
        checkAssert(st);
        return;
      }
      case StmtKind::Assign: {
        ghostMentionOk(st->rhs, ghostFwdDepth_ > 0, st->span, "assignment");
        return;
      }
      case StmtKind::RandomAssign:
        return;
      case StmtKind::EqAssign: {
        if (!ghostMentionOk(st->rhs, ghostFwdDepth_ > 0, st->span, "assignment")) return;
        addFact(st->name, mkCmp(CmpOp::Eq, mkVar(st->var, st->span), st->rhs, st->span), false,
                st->span);
        return;
      }
      case StmtKind::Block:
        walk(st->body);
        return;
      case StmtKind::Choice:
        checkBranches(st, /*isSwitch=*/false);
        return;
      case StmtKind::Switch:
        checkSwitch(st);
        return;
      case StmtKind::Loop:
        checkDemonicLoop(st);
        return;
      case StmtKind::For:
        checkForLoop(st);
        return;
      case StmtKind::Ode:
        checkOde(st);
        return;
      case StmtKind::GhostFwd: {
        ++ghostFwdDepth_;
        walk(st->body);
        --ghostFwdDepth_;
        return;
      }
      case StmtKind::GhostInv:
        return;  // erased from the proof: no obligations, no facts
      case StmtKind::Note:
        checkNote(st);
        return;
      case StmtKind::Label:
      case StmtKind::LetFunc:
      case StmtKind::LetPred:
      case StmtKind::LetGame:
        return;
      case StmtKind::Print: {
        res_.printed.push_back(st->fml ? prettyPrint(st->fml) : prettyPrint(st->rhs));
        return;
      }
      case StmtKind::Conclusion:
      case StmtKind::Proves:
        return;  // handled by the driver
    }
  }

  void checkAssert(const StmtPtr& st) {
    if (!ghostMentionOk(st->fml, ghostFwdDepth_ > 0, st->span, "assertion")) return;
    std::string label =
        st->name.empty() ? std::string("assertion") : "assertion '" + st->name + "'";
    Method m = st->methodSpec.given ? st->methodSpec.method : Method::Auto;
    std::vector<std::pair<std::string, FormulaPtr>> extra;
    if (m == Method::Guard) {
      if (!lastForGuard_) {
        diags_.error(st->span, "`by guard` needs a preceding for-loop");
        return;
      }
      FormulaPtr exitKnown = negateFormula(lastForGuard_);
      TermPtr slack = st->methodSpec.delta ? st->methodSpec.delta : cfg_.defaultGuardDelta;
      if (slack) {
        // The slack must be positive, or the weakened exit fact says nothing.
        FormulaPtr pos = mkCmp(CmpOp::Gt, slack, mkNum(Rational(0), st->span), st->span);
        if (auto g = makeGoal(pos, UsingSpec{}, Method::Auto, st->span, "guard slack")) {
          if (!discharge(*g, "guard slack positivity")) return;
        } else {
          return;
        }
        exitKnown = weakenByDelta(exitKnown, slack);
      }
      extra.emplace_back("", exitKnown);
      m = Method::Auto;
    } else if (m == Method::Solution || m == Method::Induction) {
      diags_.error(st->span,
                   "method applies only to assertions inside a differential equation");
      return;
    } else if (m == Method::Rcf) {
      if (!checkHereditaryHarrop(st->fml)) {
        diags_.error(st->span,
                     "conclusion is outside the hereditary Harrop fragment required by rcf");
        return;
      }
    }
    auto goal = makeGoal(st->fml, st->usingSpec, m, st->span, st->name, std::move(extra));
    if (!goal) return;
    if (discharge(*goal, label)) addFact(st->name, st->fml, true, st->span);
  }

  void checkNote(const StmtPtr& st) {
    FormulaPtr f = noteFormula(st->scrutinee);
    if (!f) return;
    noteFacts_[st.get()] = f;
    addFact(st->name, f, true, st->span);
  }

  FormulaPtr noteFormula(const ProofTermPtr& pt) {
    if (!pt) return nullptr;
    if (pt->args.empty()) {
      if (const Fact* f = findFact(pt->head)) return f->fml;
      diags_.error(pt->span, "unknown fact '" + pt->head + "'");
      return nullptr;
    }
    if (pt->head == "andI") {
      FormulaPtr acc;
      for (const auto& a : pt->args) {
        FormulaPtr f = noteFormula(a);
        if (!f) return nullptr;
        acc = acc ? mkBinary(FormulaKind::And, acc, f, pt->span) : f;
      }
      return acc;
    }
    diags_.error(pt->span, "unknown proof rule '" + pt->head + "'");
    return nullptr;
  }

  // -- branches ----------------------------------------------------------------

  struct BranchOut {
    std::vector<Fact> newFacts;
    FormulaPtr guard;  // null for choice branches
  };

  void mergeBranchFacts(const StmtPtr& st, std::vector<BranchOut> branches) {
    if (branches.empty()) return;
    auto mergeEqs = [&](size_t b) {
      std::vector<FormulaPtr> eqs;
      for (const auto& m : st->merges) {
        eqs.push_back(mkCmp(CmpOp::Eq, mkVar(Var{m.base, m.mergedIndex}, st->span),
                            mkVar(Var{m.base, m.sourceIndices[b]}, st->span), st->span));
      }
      return eqs;
    };
    auto conj = [&](std::vector<FormulaPtr> fs, SourceSpan sp) -> FormulaPtr {
      FormulaPtr acc;
      for (auto& f : fs) acc = acc ? mkBinary(FormulaKind::And, acc, f, sp) : f;
      return acc ? acc : mkTrue(sp);
    };

    // Names bound in every branch export as a disjunction over the branches,
    // with the branch guard and the merge equations recording which branch ran.
    std::set<std::string> namesAll;
    for (size_t b = 0; b < branches.size(); ++b) {
      std::set<std::string> names;
      for (const auto& f : branches[b].newFacts)
        if (!f.name.empty()) names.insert(f.name);
      if (b == 0) {
        namesAll = std::move(names);
      } else {
        std::set<std::string> keep;
        for (const auto& n : namesAll)
          if (names.count(n)) keep.insert(n);
        namesAll = std::move(keep);
      }
    }

    bool anyGhost = false;
    for (const auto& br : branches)
      for (const auto& f : br.newFacts) anyGhost |= f.ghost;

    for (const auto& n : namesAll) {
      FormulaPtr dis;
      for (size_t b = 0; b < branches.size(); ++b) {
        FormulaPtr bound;
        for (const auto& f : branches[b].newFacts)
          if (f.name == n) bound = f.fml;  // last binding wins
        std::vector<FormulaPtr> parts;
        if (branches[b].guard) parts.push_back(branches[b].guard);
        parts.push_back(bound);
        for (auto& e : mergeEqs(b)) parts.push_back(e);
        FormulaPtr c = conj(std::move(parts), st->span);
        dis = dis ? mkBinary(FormulaKind::Or, dis, c, st->span) : c;
      }
      addFact(n, dis, true, st->span, anyGhost);
    }

    // And one anonymous fact carrying everything each branch established.
    FormulaPtr dis;
    for (size_t b = 0; b < branches.size(); ++b) {
      std::vector<FormulaPtr> parts;
      if (branches[b].guard) parts.push_back(branches[b].guard);
      for (const auto& f : branches[b].newFacts) parts.push_back(f.fml);
      for (auto& e : mergeEqs(b)) parts.push_back(e);
      FormulaPtr c = conj(std::move(parts), st->span);
      dis = dis ? mkBinary(FormulaKind::Or, dis, c, st->span) : c;
    }
    addFact("", dis, true, st->span, anyGhost);
  }

  void checkBranches(const StmtPtr& st, bool /*isSwitch*/) {
    std::vector<BranchOut> outs;
    for (const auto& br : st->body) {
      size_t mark = facts_.size();
      checkStatement(br);
      BranchOut out;
      out.newFacts.assign(facts_.begin() + static_cast<long>(mark), facts_.end());
      facts_.resize(mark);
      outs.push_back(std::move(out));
    }
    mergeBranchFacts(st, std::move(outs));
  }

  void checkSwitch(const StmtPtr& st) {
    // Coverage: a scrutinee fact whose disjuncts each entail some guard, a
    // literal `true` case, or guards that overlap with a positive margin.
    bool covered = false;
    if (st->scrutinee) {
      covered = switchScrutineeCovers(st);
    } else {
      for (const auto& c : st->cases)
        if (c.guard->kind == FormulaKind::True) covered = true;
      if (!covered) {
        std::vector<FormulaPtr> guards;
        for (const auto& c : st->cases) guards.push_back(c.guard);
        covered = robustCoverage(guards);
      }
      if (!covered)
        diags_.error(st->span, "switch cases do not constructively cover all states");
    }

    std::vector<BranchOut> outs;
    for (const auto& c : st->cases) {
      size_t mark = facts_.size();
      ghostMentionOk(c.guard, ghostFwdDepth_ > 0, c.span, "case guard");
      addFact(c.name, c.guard, false, c.span);
      walk(c.body);
      BranchOut out;
      out.newFacts.assign(facts_.begin() + static_cast<long>(mark), facts_.end());
      out.guard = c.guard;
      facts_.resize(mark);
      outs.push_back(std::move(out));
    }
    mergeBranchFacts(st, std::move(outs));
  }

  bool switchScrutineeCovers(const StmtPtr& st) {
    FormulaPtr sf = noteFormula(st->scrutinee);
    if (!sf) return false;
    std::vector<FormulaPtr> disjuncts;
    orFlatten(sf, disjuncts);
    for (const auto& d : disjuncts) {
      bool matched = false;
      for (const auto& c : st->cases) {
        std::vector<std::pair<std::string, FormulaPtr>> extra;
        std::vector<FormulaPtr> conjs;
        andFlatten(d, conjs);
        for (auto& cj : conjs) extra.emplace_back("", cj);
        Goal g;
        g.conclusion = c.guard;
        g.method = Method::Auto;
        g.span = st->span;
        g.factName = "coverage";
        g.assumptions = extra;
        std::set<Var> want;
        collectVars(c.guard, want);
        for (auto& [n, f] : extra) insertVars(f, want);
        addDefinitionClosure(std::move(want), g.assumptions);
        for (const auto& f : facts_) g.denFacts.push_back(f.fml);
        VerdictCertificate cert = arith_.check(g);
        if (cert.verdict == Verdict::Valid) {
          matched = true;
          break;
        }
      }
      if (!matched) {
        diags_.error(st->span,
                     "switch cases do not cover the scrutinee: no case matches '" +
                         prettyPrint(d) + "'");
        return false;
      }
    }
    return true;
  }

  // -- loops -------------------------------------------------------------------

  // The fact established by the final statement of a loop body (descending
  // into trailing blocks and forward-ghost brackets), or null.
  FormulaPtr bodyEndFact(const std::vector<StmtPtr>& body) {
    if (body.empty()) return nullptr;
    const StmtPtr& last = body.back();
    switch (last->kind) {
      case StmtKind::Assert: return last->fml;
      case StmtKind::Note: {
        auto it = noteFacts_.find(last.get());
        return it == noteFacts_.end() ? nullptr : it->second;
      }
      case StmtKind::Block:
      case StmtKind::GhostFwd: return bodyEndFact(last->body);
      default: return nullptr;
    }
  }

  void checkDemonicLoop(const StmtPtr& st) {
    if (!st->invHead) {
      diags_.error(st->span,
                   "the statement before a loop must establish the invariant as a fact");
      return;
    }
    // The entry case holds definitionally: invEntry re-reads the preceding
    // fact in the very state where it was just established.
    std::string invName = facts_.empty() ? std::string() : facts_.back().name;

    size_t mark = facts_.size();
    addFact(invName, st->invHead, true, st->span);
    walk(st->body);
    FormulaPtr endFact = bodyEndFact(st->body);
    if (!endFact) {
      diags_.error(st->span, "loop body must end by re-establishing the invariant");
    } else if (!formulasPolyEqual(endFact, st->invBodyEnd)) {
      diags_.error(st->span,
                   "loop body ends with a different fact than the invariant it must "
                   "re-establish");
    }
    facts_.resize(mark);
    // The loop exits at the merged head state, where the invariant holds.
    addFact(invName, st->invHead, true, st->span);
  }

  void checkForLoop(const StmtPtr& st) {
    const Statement* inv = st->forInvariant.get();
    std::string invName = inv->name;
    std::string invLabel = invName.empty() ? std::string("loop invariant")
                                           : "loop invariant '" + invName + "'";

    // Base case: the invariant at the entry state, right after the init.
    if (auto g = makeGoal(st->invEntry, inv->usingSpec,
                          inv->methodSpec.given ? inv->methodSpec.method : Method::Auto,
                          inv->span, invName))
      discharge(*g, invLabel + " (base case)");

    checkForTermination(st);

    ghostMentionOk(st->forGuard->fml, ghostFwdDepth_ > 0, st->forGuard->span, "loop guard");

    // Body, under the invariant and the guard at the merged head state.
    size_t mark = facts_.size();
    addFact(invName, st->invHead, true, inv->span);
    addFact(st->forGuard->name, st->forGuard->fml, false, st->forGuard->span);
    walk(st->body);

    // Inductive step: the invariant at the body end, with the index advanced
    // by the increment.
    {
      std::map<Var, TermPtr> step{{bodyEndIndexVar(st), st->forIncrement->rhs}};
      FormulaPtr goalFml = substitute(st->invBodyEnd, step);
      if (auto g = makeGoal(goalFml, inv->usingSpec,
                            inv->methodSpec.given ? inv->methodSpec.method : Method::Auto,
                            inv->span, invName))
        discharge(*g, invLabel + " (inductive step)");
    }
    facts_.resize(mark);

    addFact(invName, st->invHead, true, inv->span);
    lastForGuard_ = st->forGuard->fml;
  }

  // The variant of the loop index read by the increment (its value at the
  // end of the body, before the increment runs).
  Var bodyEndIndexVar(const StmtPtr& st) const {
    const std::string& base = st->forIncrement->var.base;
    std::set<Var> vs;
    collectVars(st->forIncrement->rhs, vs);
    for (const Var& v : vs)
      if (v.base == base) return v;
    return st->forIncrement->var;  // index not read: substitution is a no-op
  }

  void checkForTermination(const StmtPtr& st) {
    const StmtPtr& incr = st->forIncrement;
    const std::string& base = incr->var.base;
    SourceSpan sp = incr->span;

    // Shape: i := i + c or i := i - c.
    TermPtr change;  // the signed step
    const TermPtr& rhs = incr->rhs;
    auto isIndexVar = [&](const TermPtr& t) {
      return t->kind == TermKind::Variable && t->var.base == base;
    };
    if (rhs->kind == TermKind::Plus && isIndexVar(rhs->lhs)) {
      change = rhs->rhs;
    } else if (rhs->kind == TermKind::Plus && isIndexVar(rhs->rhs)) {
      change = rhs->lhs;
    } else if (rhs->kind == TermKind::Minus && isIndexVar(rhs->lhs)) {
      change = mkBin(TermKind::Minus, mkNum(Rational(0), sp), rhs->rhs, sp);
    } else {
      diags_.error(sp, "for-loop increment must have the form i := i + c or i := i - c");
      return;
    }

    // The step must be fixed across iterations: no variable written by the
    // loop may appear in it.
    size_t loopStamp = minMergeStamp(st);
    std::set<Var> cv;
    collectVars(change, cv);
    for (const Var& v : cv) {
      auto it = elab_.variants.find(v);
      if (it != elab_.variants.end() && it->second.stamp >= loopStamp) {
        diags_.error(sp, "for-loop increment must add a quantity that is constant across "
                         "iterations; '" +
                             v.base + "' changes inside the loop");
        return;
      }
    }

    // Its sign decides the direction; it must be provable at entry.
    bool up;
    {
      Goal pos;
      pos.conclusion = mkCmp(CmpOp::Gt, change, mkNum(Rational(0), sp), sp);
      auto g = makeGoal(pos.conclusion, UsingSpec{}, Method::Auto, sp, "increment-sign");
      if (g && arith_.check(*g).verdict == Verdict::Valid) {
        up = true;
      } else {
        auto neg = makeGoal(mkCmp(CmpOp::Lt, change, mkNum(Rational(0), sp), sp), UsingSpec{},
                            Method::Auto, sp, "increment-sign");
        if (neg && arith_.check(*neg).verdict == Verdict::Valid) {
          up = false;
        } else {
          diags_.error(sp, "cannot determine the sign of the for-loop increment");
          return;
        }
      }
    }

    // The guard must bound the index from the side the increment moves it
    // toward, by a bound that is fixed across iterations.
    Var idxHead{base, -1};
    {
      std::set<Var> gv;
      collectVars(st->forGuard->fml, gv);
      for (const Var& v : gv)
        if (v.base == base) idxHead = v;
    }
    std::vector<FormulaPtr> conjs;
    andFlatten(st->forGuard->fml, conjs);
    for (const auto& c : conjs) {
      if (c->kind != FormulaKind::Cmp) continue;
      if (c->op == CmpOp::Eq || c->op == CmpOp::Ne) continue;
      RatFunc d;
      try {
        d = termToRatFunc(mkBin(TermKind::Minus, c->left, c->right, c->span));
      } catch (const PolyError&) {
        continue;
      }
      if (!d.den.isConstant()) continue;
      Polynomial p = d.num * (Rational(1) / d.den.constantValue());
      if (p.degreeIn(idxHead) != 1) continue;
      Polynomial coeff = differentiate(p, idxHead);
      if (!coeff.isConstant()) continue;
      Rational k = coeff.constantValue();
      // normalize to p <= 0 / p < 0
      Rational dir = k;
      if (c->op == CmpOp::Ge || c->op == CmpOp::Gt) dir = -dir;
      if ((up && dir <= 0) || (!up && dir >= 0)) continue;
      // remaining variables of the bound must be stable
      bool stable = true;
      std::set<Var> pv;
      for (auto& [m, cc] : p.terms)
        for (auto& [v, e] : m)
          if (v != idxHead) pv.insert(v);
      for (const Var& v : pv) {
        auto it = elab_.variants.find(v);
        if (it != elab_.variants.end() && it->second.stamp >= minMergeStamp(st)) stable = false;
      }
      if (stable) return;  // bounded: terminates
    }
    diags_.error(st->forGuard->span,
                 "for-loop guard does not bound the index in the direction of the increment");
  }

  size_t minMergeStamp(const StmtPtr& st) const {
    size_t s = static_cast<size_t>(-1);
    for (const auto& m : st->merges) {
      auto it = elab_.variants.find(Var{m.base, m.mergedIndex});
      if (it != elab_.variants.end()) s = std::min(s, it->second.stamp);
    }
    return s;
  }

  // -- differential equations ---------------------------------------------------

  void checkOde(const StmtPtr& st) {
    const OdeInfo& ode = elab_.odes[static_cast<size_t>(st->odeId)];
    const OdeSystem& sys = ode.system;
    bool inGhost = ghostFwdDepth_ > 0;

    if (auto gerr = checkDifferentialGhost(sys)) diags_.error(gerr->span, gerr->message);

    // Equations that survive ghost erasure must not read erased state; an
    // inverse-ghost subsystem is erased as a whole and may read itself.
    for (const auto& dim : sys.dims) {
      if (dim.inverseGhost) continue;
      ghostMentionOk(dim.rhsTerm, dim.forwardGhost || inGhost, dim.span,
                     "differential equation");
    }

    // Chosen-duration systems: find the duration item first.
    const DomainItem* duration = nullptr;
    for (const auto& item : st->domain)
      if (item.kind == DomItemKind::Duration) duration = &item;

    // Domain items in order.  Each sees the facts established by the earlier
    // ones, in flow form.
    std::vector<std::pair<std::string, FormulaPtr>> flowFacts;
    std::vector<const DomainItem*> exported;
    for (const auto& item : st->domain) {
      switch (item.kind) {
        case DomItemKind::Assume: {
          if (duration) {
            diags_.error(item.span,
                         "a domain assumption is not allowed when the duration is chosen; "
                         "prove it as an assertion");
          }
          if (!ghostMentionOk(item.fml, inGhost, item.span, "domain assumption")) break;
          flowFacts.emplace_back(item.name, item.fml);
          exported.push_back(&item);
          break;
        }
        case DomItemKind::Assert: {
          if (!ghostMentionOk(item.fml, true, item.span, "differential cut")) break;
          if (checkDifferentialCut(st, ode, item, flowFacts)) {
            flowFacts.emplace_back(item.name, item.fml);
            exported.push_back(&item);
          }
          break;
        }
        case DomItemKind::Duration: {
          checkAngelicDuration(ode, item);
          break;
        }
      }
    }

    exportOdeFacts(st, ode, exported, duration);
  }

  // Solve-or-induct for one differential cut.  Returns true when proved.
  bool checkDifferentialCut(const StmtPtr& st, const OdeInfo& ode, const DomainItem& item,
                            const std::vector<std::pair<std::string, FormulaPtr>>& flowFacts) {
    const OdeSystem& sys = ode.system;
    std::string label = item.name.empty() ? std::string("differential cut")
                                          : "differential cut '" + item.name + "'";
    Method m = item.methodSpec.given ? item.methodSpec.method : Method::Auto;
    if (m == Method::Auto) {
      // solution when every flow variable of the goal has a closed form
      std::set<Var> vs;
      collectVars(item.fml, vs);
      bool solvable = true;
      for (const Var& v : vs)
        if (sys.byFlowVar(v) && !ode.solution.has(v)) solvable = false;
      m = solvable ? Method::Solution : Method::Induction;
    }

    if (m == Method::Solution) {
      std::map<Var, TermPtr> sub;
      std::set<Var> vs;
      collectVars(item.fml, vs);
      for (const auto& [n, f] : flowFacts) collectVars(f, vs);
      for (const Var& v : vs) {
        if (!sys.byFlowVar(v)) continue;
        if (!ode.solution.has(v)) {
          diags_.error(item.span, "no closed-form solution for '" + v.base +
                                      "'; prove this cut by induction");
          return false;
        }
        sub[v] = polynomialToTerm(ode.solution.solution.at(v), item.span);
      }
      std::vector<std::pair<std::string, FormulaPtr>> extra;
      extra.emplace_back("", mkCmp(CmpOp::Ge, mkVar(ode.tau, item.span),
                                   mkNum(Rational(0), item.span), item.span));
      for (const auto& [n, f] : flowFacts) extra.emplace_back(n, substitute(f, sub));
      FormulaPtr goalFml = substitute(item.fml, sub);
      auto g = makeGoal(goalFml, item.usingSpec, Method::Auto, item.span, item.name,
                        std::move(extra));
      return g && discharge(*g, label);
    }

    if (m == Method::Induction) {
      if (item.fml->kind != FormulaKind::Cmp || item.fml->op == CmpOp::Ne) {
        diags_.error(item.span, "differential induction needs a comparison");
        return false;
      }
      RatFunc diff;
      try {
        diff = termToRatFunc(
            mkBin(TermKind::Minus, item.fml->left, item.fml->right, item.span));
      } catch (const PolyError& e) {
        diags_.error(item.span, e.message);
        return false;
      }
      auto p = diff.asPolynomial();
      if (!p) {
        diags_.error(item.span, "differential induction needs a polynomial comparison");
        return false;
      }

      // Base case: the cut at the entry state.
      std::map<Var, TermPtr> toEntry;
      for (const auto& dim : sys.dims)
        toEntry[dim.flowVar] = mkVar(dim.entryVar, item.span);
      {
        auto g = makeGoal(substitute(item.fml, toEntry), item.usingSpec, Method::Auto,
                          item.span, item.name);
        if (!g || !discharge(*g, label + " (initially)")) return false;
      }

      // Inductive step: the Lie derivative keeps the comparison's sign,
      // under the domain and the earlier cuts.
      auto lie = lieDerivative(*p, sys);
      if (!lie) {
        diags_.error(item.span, "cannot differentiate along this system");
        return false;
      }
      CmpOp op;
      switch (item.fml->op) {
        case CmpOp::Ge:
        case CmpOp::Gt: op = CmpOp::Ge; break;
        case CmpOp::Le:
        case CmpOp::Lt: op = CmpOp::Le; break;
        default: op = CmpOp::Eq; break;
      }
      TermPtr lt = polynomialToTerm(lie->num, item.span);
      if (!lie->den.isConstant())
        lt = mkBin(TermKind::Divide, lt, polynomialToTerm(lie->den, item.span), item.span);
      else if (lie->den.constantValue() != 1)
        lt = mkBin(TermKind::Divide, lt,
                      mkNum(lie->den.constantValue(), item.span), item.span);
      FormulaPtr stepFml = mkCmp(op, lt, mkNum(Rational(0), item.span), item.span);
      auto g = makeGoal(stepFml, item.usingSpec, Method::Auto, item.span, item.name,
                        flowFacts);
      return g && discharge(*g, label + " (derivative)");
    }

    diags_.error(item.span, "unsupported method for a differential cut");
    return false;
  }

  void checkAngelicDuration(const OdeInfo& ode, const DomainItem& item) {
    const OdeSystem& sys = ode.system;
    const OdeDimension* dim = sys.byFlowVar(item.var);
    if (!dim) dim = sys.byBase(item.var.base);
    if (!dim) {
      diags_.error(item.span, "duration must bind a variable of the system");
      return;
    }
    bool unitClock = dim->rhsTerm->kind == TermKind::Number && dim->rhsTerm->value == 1;
    if (!unitClock) {
      diags_.error(item.span,
                   "duration must be assigned through a clock variable with unit slope");
      return;
    }
    // The chosen duration must be reachable: rhs - entry >= 0.
    FormulaPtr need = mkCmp(CmpOp::Ge,
                            mkBin(TermKind::Minus, item.rhs,
                                     mkVar(dim->entryVar, item.span), item.span),
                            mkNum(Rational(0), item.span), item.span);
    if (auto g = makeGoal(need, UsingSpec{}, Method::Auto, item.span, item.name))
      discharge(*g, "duration choice");
  }

  void exportOdeFacts(const StmtPtr& st, const OdeInfo& ode,
                      const std::vector<const DomainItem*>& exported,
                      const DomainItem* duration) {
    const OdeSystem& sys = ode.system;

    // Eliminate the reserved duration symbol through a clock when one exists.
    TermPtr tauTerm;
    for (const auto& dim : sys.dims) {
      if (dim.inverseGhost || dim.forwardGhost) continue;
      auto it = ode.solution.clockSlope.find(dim.flowVar);
      if (it == ode.solution.clockSlope.end()) continue;
      TermPtr delta = mkBin(TermKind::Minus, mkVar(dim.flowVar, st->span),
                               mkVar(dim.entryVar, st->span), st->span);
      tauTerm = it->second == 1
                    ? delta
                    : mkBin(TermKind::Divide, delta, mkNum(it->second, st->span), st->span);
      break;
    }
    if (!tauTerm) tauTerm = mkVar(ode.tau, st->span);
    std::map<Var, TermPtr> tauSub{{ode.tau, tauTerm}};

    // Domain constraints and cuts hold at the exit state (their flow form).
    for (const DomainItem* item : exported)
      addFact(item->name, item->fml, item->kind == DomItemKind::Assert, item->span);

    FormulaPtr tauNonneg =
        mkCmp(CmpOp::Ge, tauTerm, mkNum(Rational(0), st->span), st->span);

    // Solutions: named equations individually, and everything together.
    FormulaPtr all;
    for (const auto& dim : sys.dims) {
      if (dim.inverseGhost || !ode.solution.has(dim.flowVar)) continue;
      FormulaPtr eq = mkCmp(
          CmpOp::Eq, mkVar(dim.flowVar, dim.span),
          substitute(polynomialToTerm(ode.solution.solution.at(dim.flowVar), dim.span), tauSub),
          dim.span);
      if (!dim.eqName.empty())
        addFact(dim.eqName, mkBinary(FormulaKind::And, eq, tauNonneg, dim.span), true,
                dim.span, dim.forwardGhost);
      all = all ? mkBinary(FormulaKind::And, all, eq, st->span) : eq;
    }
    all = all ? mkBinary(FormulaKind::And, all, tauNonneg, st->span) : tauNonneg;
    addFact("", all, true, st->span);

    if (duration) {
      const OdeDimension* dim = sys.byFlowVar(duration->var);
      if (!dim) dim = sys.byBase(duration->var.base);
      if (dim)
        addFact(duration->name,
                mkCmp(CmpOp::Eq, mkVar(dim->flowVar, duration->span), duration->rhs,
                      duration->span),
                false, duration->span);
    }
  }
};

inline CheckResult checkDocument(const ElabResult& elab, DiagnosticBag& diags,
                                 CheckConfig cfg = {}) {
  return Checker(elab, diags, std::move(cfg)).run();
}

}  // namespace kaisar
