#pragma once
// Structural refinement between games, implementing the `proves` command.
//
// refines(s, g) decides whether every winning strategy for [s]phi gives one
// for [g]phi, by structural recursion over normalized game trees.  The
// checker is deliberately incomplete: it admits exactly the bridges needed in
// practice and reports the first mismatch with its location.
//
// Admissions, in the order tried:
//   - sequence re-association (flattening) and double-dual cancellation,
//     both during normalization;
//   - identical node kinds matched child-by-child;
//   - test / ODE-domain formulas compared by polarity-directed implication:
//     at Demonic positions the game's formula must imply the strategy's (the
//     strategy may assume less), at Angelic positions the strategy's must
//     imply the game's (the strategy may promise more);
//   - choices matched branch-by-branch, and otherwise by cover: at Demonic
//     positions every game branch needs a refining strategy branch, at
//     Angelic positions every strategy branch needs a refined game branch;
//   - a deterministic assignment refines a dualized random assignment to the
//     same variable (Angel's choice, implemented by a concrete witness);
//   - distributing a leading choice over the rest of a sequence, within a
//     rewrite budget.
//
// Anything else fails; proof-only statements are expected to have been
// erased during reification rather than skipped here.

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arith.hpp"
#include "ast.hpp"
#include "ast_ops.hpp"
#include "poly.hpp"
#include "print.hpp"
#include "reify.hpp"

namespace kaisar {

struct RefinementStep {
  std::string rule;    // "structural-match", "test-strengthening", ...
  std::string detail;
  SourceSpan where;
};

struct RefinementTrace {
  bool ok = false;
  std::vector<RefinementStep> steps;
  std::string reason;  // on failure
  SourceSpan where;    // on failure: strategy-side location
};

class RefinementChecker {
 public:
  explicit RefinementChecker(ArithConfig arith = {}, size_t budget = 2000)
      : arith_(std::move(arith)), budget_(budget) {}

  RefinementTrace refines(const GamePtr& strategy, const GamePtr& target) {
    trace_ = RefinementTrace{};
    spent_ = 0;
    trace_.ok = go(normalize(strategy), normalize(target), 0);
    return std::move(trace_);
  }

  // Normal form: sequences flattened, duals pushed through sequences and
  // cancelled, self-dual assignments unwrapped.  Dual survives only directly
  // over Test, RandomAssign, Choice, Repeat, and Ode nodes.
  static GamePtr normalize(const GamePtr& g) {
    switch (g->kind) {
      case GameKind::Assign:
      case GameKind::RandomAssign:
      case GameKind::Test:
      case GameKind::Ode:
        return g;
      case GameKind::Seq: {
        std::vector<GamePtr> parts;
        for (const auto& c : g->children) {
          GamePtr n = normalize(c);
          if (n->kind == GameKind::Seq)
            parts.insert(parts.end(), n->children.begin(), n->children.end());
          else
            parts.push_back(std::move(n));
        }
        if (parts.size() == 1) return parts[0];
        return mkSeqGame(std::move(parts), g->span);
      }
      case GameKind::Choice: {
        std::vector<GamePtr> parts;
        for (const auto& c : g->children) parts.push_back(normalize(c));
        return mkChoiceGame(std::move(parts), g->span);
      }
      case GameKind::Repeat:
        return mkRepeatGame(normalize(g->children[0]), g->span);
      case GameKind::Dual: {
        GamePtr n = normalize(g->children[0]);
        if (n->kind == GameKind::Dual) return n->children[0];
        if (n->kind == GameKind::Assign) return n;  // self-dual
        if (n->kind == GameKind::Seq) {
          std::vector<GamePtr> parts;
          for (const auto& c : n->children)
            parts.push_back(normalize(mkDualGame(c, c->span)));
          return mkSeqGame(std::move(parts), g->span);
        }
        return mkDualGame(std::move(n), g->span);
      }
    }
    return g;
  }

 private:
  ArithConfig arith_;
  size_t budget_;
  size_t spent_ = 0;
  RefinementTrace trace_;

  bool fail(const GamePtr& s, const std::string& reason) {
    // keep the first (deepest) failure
    if (trace_.reason.empty()) {
      trace_.reason = reason;
      trace_.where = s->span;
    }
    return false;
  }

  void step(const char* rule, std::string detail, SourceSpan where) {
    trace_.steps.push_back({rule, std::move(detail), where});
  }

  bool budgetOk(const GamePtr& s) {
    if (++spent_ > budget_) return fail(s, "refinement budget exhausted");
    return true;
  }

  static std::vector<GamePtr> asList(const GamePtr& g) {
    if (g->kind == GameKind::Seq) return g->children;
    return {g};
  }

  bool implicationHolds(const FormulaPtr& from, const FormulaPtr& to) {
    if (formulasPolyEqual(from, to)) return true;
    if (to->kind == FormulaKind::True) return true;
    Goal goal;
    goal.conclusion = to;
    goal.assumptions.emplace_back("", from);
    goal.denFacts.push_back(from);
    goal.span = to->span;
    goal.factName = "refinement";
    GoalChecker checker(arith_);
    return checker.check(goal).verdict == Verdict::Valid;
  }

  // Polarity-directed comparison of a strategy-side and game-side formula.
  // parity 0 = Demonic position (assumption), 1 = Angelic (obligation).
  bool formulaDirected(const GamePtr& s, const FormulaPtr& sf, const FormulaPtr& gf,
                       int parity, const char* what) {
    const FormulaPtr& from = parity == 0 ? gf : sf;
    const FormulaPtr& to = parity == 0 ? sf : gf;
    if (formulasPolyEqual(sf, gf)) {
      step("structural-match", what, s->span);
      return true;
    }
    if (implicationHolds(from, to)) {
      step("test-strengthening", std::string(what) + ": " + prettyPrint(from) + "  ->  " +
                                     prettyPrint(to),
           s->span);
      return true;
    }
    return fail(s, std::string(what) + " mismatch: cannot derive " + prettyPrint(to) +
                       " from " + prettyPrint(from));
  }

  bool go(const GamePtr& s, const GamePtr& g, int parity) {
    if (!budgetOk(s)) return false;

    // sequences are compared as aligned lists
    if (s->kind == GameKind::Seq || g->kind == GameKind::Seq)
      return goSeq(asList(s), asList(g), parity, s);

    if (s->kind == GameKind::Dual && g->kind == GameKind::Dual)
      return go(s->children[0], g->children[0], 1 - parity);

    // a choice against a non-choice: treat the plain side as a one-branch
    // choice and use the cover rule
    if ((s->kind == GameKind::Choice) != (g->kind == GameKind::Choice) &&
        s->kind != GameKind::Dual && g->kind != GameKind::Dual) {
      GamePtr sw = s->kind == GameKind::Choice ? s : mkChoiceGame({s}, s->span);
      GamePtr gw = g->kind == GameKind::Choice ? g : mkChoiceGame({g}, g->span);
      return goChoice(sw, gw, parity);
    }

    // a concrete witness refines Angel's free choice
    if (parity == 0 && s->kind == GameKind::Assign && g->kind == GameKind::Dual &&
        g->children[0]->kind == GameKind::RandomAssign &&
        g->children[0]->var.base == s->var.base) {
      step("assign-refines-angelic-random", s->var.base + " := " + prettyPrint(s->term),
           s->span);
      return true;
    }

    if (s->kind != g->kind)
      return fail(s, std::string("game shapes differ: ") + kindName(s->kind) + " vs " +
                         kindName(g->kind));

    switch (s->kind) {
      case GameKind::Assign: {
        if (s->var.base != g->var.base)
          return fail(s, "assignments target different variables: " + s->var.base + " vs " +
                             g->var.base);
        bool eq;
        try {
          eq = termsPolyEqual(s->term, g->term);
        } catch (const PolyError&) {
          eq = prettyPrint(s->term) == prettyPrint(g->term);
        }
        if (!eq)
          return fail(s, "assignment right-hand sides differ for " + s->var.base);
        step("structural-match", "assign " + s->var.base, s->span);
        return true;
      }
      case GameKind::RandomAssign: {
        if (s->var.base != g->var.base)
          return fail(s, "random assignments target different variables");
        step("structural-match", s->var.base + " := *", s->span);
        return true;
      }
      case GameKind::Test:
        return formulaDirected(s, s->fml, g->fml, parity, "test");
      case GameKind::Ode: {
        if (s->odes.size() != g->odes.size())
          return fail(s, "differential equation systems have different dimensions");
        for (const auto& se : s->odes) {
          const OdeEquation* match = nullptr;
          for (const auto& ge : g->odes)
            if (ge.var.base == se.var.base) match = &ge;
          if (!match)
            return fail(s, "no equation for '" + se.var.base + "' in the target system");
          bool eq;
          try {
            eq = termsPolyEqual(se.rhs, match->rhs);
          } catch (const PolyError&) {
            eq = prettyPrint(se.rhs) == prettyPrint(match->rhs);
          }
          if (!eq)
            return fail(s, "right-hand sides for '" + se.var.base + "' differ");
        }
        step("structural-match", "ode", s->span);
        return formulaDirected(s, s->fml, g->fml, parity, "domain constraint");
      }
      case GameKind::Choice:
        return goChoice(s, g, parity);
      case GameKind::Repeat:
        return go(s->children[0], g->children[0], parity);
      case GameKind::Dual:
        return go(s->children[0], g->children[0], 1 - parity);
      case GameKind::Seq:
        break;  // handled above
    }
    return fail(s, "unsupported game shape");
  }

  bool goChoice(const GamePtr& s, const GamePtr& g, int parity) {
    const auto& sb = s->children;
    const auto& gb = g->children;
    // fast path: positional
    if (sb.size() == gb.size()) {
      RefinementTrace saved = trace_;
      size_t savedSpent = spent_;
      bool all = true;
      for (size_t i = 0; i < sb.size() && all; ++i) all = go(sb[i], gb[i], parity);
      if (all) {
        step("structural-match", "choice (positional)", s->span);
        return true;
      }
      trace_ = std::move(saved);
      spent_ = savedSpent;
    }
    // cover: Demon may face fewer strategy branches than it offers only if
    // each offered branch is handled; Angel may use a branch only if the
    // game offers it.
    auto covered = [&](const GamePtr& need, const std::vector<GamePtr>& pool,
                       bool needIsGame) -> bool {
      for (const auto& cand : pool) {
        RefinementTrace saved = trace_;
        size_t savedSpent = spent_;
        bool ok = needIsGame ? go(cand, need, parity) : go(need, cand, parity);
        if (ok) return true;
        trace_ = std::move(saved);
        spent_ = savedSpent;
      }
      return false;
    };
    if (parity == 0) {
      for (const auto& gbr : gb)
        if (!covered(gbr, sb, true))
          return fail(s, "a Demonic branch of the target has no refining strategy branch");
    } else {
      for (const auto& sbr : sb)
        if (!covered(sbr, gb, false))
          return fail(s, "an Angelic strategy branch has no matching branch in the target");
    }
    step("structural-match", "choice (cover)", s->span);
    return true;
  }

  bool goSeq(std::vector<GamePtr> ss, std::vector<GamePtr> gs, int parity,
             const GamePtr& loc) {
    if (!budgetOk(loc)) return false;
    if (ss.size() != gs.size()) {
      // try distributing a leading choice over the rest of the sequence
      if (distributeAndRetry(ss, gs, parity, loc)) return true;
      std::ostringstream os;
      os << "sequences have different lengths (" << ss.size() << " vs " << gs.size() << ")";
      return fail(loc, os.str());
    }
    for (size_t i = 0; i < ss.size(); ++i)
      if (!go(ss[i], gs[i], parity)) return false;
    return true;
  }

  // {A ++ B}; R  ~~>  {A; R ++ B; R}   (an equivalence for any A, B, R)
  static std::optional<GamePtr> distributeLeadingChoice(const std::vector<GamePtr>& list) {
    for (size_t i = 0; i < list.size(); ++i) {
      if (list[i]->kind != GameKind::Choice || i + 1 >= list.size()) continue;
      std::vector<GamePtr> branches;
      for (const auto& br : list[i]->children) {
        std::vector<GamePtr> seq(list.begin(), list.begin() + static_cast<long>(i));
        if (br->kind == GameKind::Seq)
          seq.insert(seq.end(), br->children.begin(), br->children.end());
        else
          seq.push_back(br);
        seq.insert(seq.end(), list.begin() + static_cast<long>(i) + 1, list.end());
        branches.push_back(seq.size() == 1 ? seq[0] : mkSeqGame(std::move(seq)));
      }
      return mkChoiceGame(std::move(branches), list[i]->span);
    }
    return std::nullopt;
  }

  bool distributeAndRetry(const std::vector<GamePtr>& ss, const std::vector<GamePtr>& gs,
                          int parity, const GamePtr& loc) {
    auto tryOne = [&](const GamePtr& s2, const GamePtr& g2) {
      RefinementTrace saved = trace_;
      size_t savedSpent = spent_;
      step("distributivity", "choice over sequence", loc->span);
      if (go(s2, g2, parity)) return true;
      trace_ = std::move(saved);
      spent_ = savedSpent;
      return false;
    };
    GamePtr sWhole = ss.size() == 1 ? ss[0] : mkSeqGame(ss);
    GamePtr gWhole = gs.size() == 1 ? gs[0] : mkSeqGame(gs);
    if (auto s2 = distributeLeadingChoice(ss))
      if (tryOne(*s2, gWhole)) return true;
    if (auto g2 = distributeLeadingChoice(gs))
      if (tryOne(sWhole, *g2)) return true;
    return false;
  }

  static const char* kindName(GameKind k) {
    switch (k) {
      case GameKind::Assign: return "assignment";
      case GameKind::RandomAssign: return "random assignment";
      case GameKind::Test: return "test";
      case GameKind::Ode: return "differential equation";
      case GameKind::Seq: return "sequence";
      case GameKind::Choice: return "choice";
      case GameKind::Repeat: return "repetition";
      case GameKind::Dual: return "dual";
    }
    return "?";
  }
};

inline RefinementTrace refines(const GamePtr& strategy, const GamePtr& target,
                               ArithConfig arith = {}) {
  return RefinementChecker(std::move(arith)).refines(strategy, target);
}

struct ProvesResult {
  bool ok = false;
  std::string reason;
  SourceSpan where;
  RefinementTrace trace;
};

// `proves doc "[alpha]phi"`: the reified game must refine alpha, and the
// proven postcondition must imply phi.
inline ProvesResult proves(const Conclusion& concl, const FormulaPtr& target,
                           ArithConfig arith = {}) {
  ProvesResult r;
  if (!target || target->kind != FormulaKind::Box) {
    r.reason = "proves target must be a box formula [game] formula";
    if (target) r.where = target->span;
    return r;
  }
  r.trace = refines(concl.game, target->game, arith);
  if (!r.trace.ok) {
    r.reason = "game refinement failed: " + r.trace.reason;
    r.where = r.trace.where;
    return r;
  }
  Goal goal;
  goal.conclusion = target->child;
  goal.assumptions.emplace_back("", concl.postcondition);
  goal.denFacts.push_back(concl.postcondition);
  goal.span = target->span;
  goal.factName = "postcondition";
  GoalChecker checker(arith);
  if (checker.check(goal).verdict != Verdict::Valid) {
    r.reason = "the proven postcondition does not imply the target postcondition";
    r.where = target->child ? target->child->span : target->span;
    return r;
  }
  r.ok = true;
  return r;
}

}  // namespace kaisar
