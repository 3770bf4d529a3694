#pragma once
// Game reification: compute the game a checked strategy plays and the
// theorem it proves.
//
// The game is read off the definition-expanded statement tree before SSA
// renaming, so it quantifies over program state under the original names.
// Assertions are proof text, not game moves: they are erased, and obligations
// surface in the game only through the constructs that carry them (switch
// guards, for-loop guards, angelic ODE domains).  Forward ghosts are erased;
// inverse ghosts are kept verbatim.
//
// Polarity bookkeeping: a statement nested under an odd number of duals
// writes the dualized form of its natural game, so that the net player
// assignment of every leaf matches the statement's meaning.  Double duals
// cancel at construction, and self-dual atoms (assignments) never wrap.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ast.hpp"
#include "ast_ops.hpp"
#include "check.hpp"
#include "print.hpp"
#include "ssa.hpp"

namespace kaisar {

struct Conclusion {
  GamePtr game;
  FormulaPtr postcondition;
};

namespace detail {

inline GamePtr dualWrap(GamePtr g) {
  if (g->kind == GameKind::Dual) return g->children[0];
  return mkDualGame(std::move(g));
}

inline FormulaPtr conjoin(FormulaPtr acc, FormulaPtr f, SourceSpan sp) {
  if (!acc) return f;
  return mkBinary(FormulaKind::And, std::move(acc), std::move(f), sp);
}

inline void spliceInto(std::vector<GamePtr>& parts, GamePtr g) {
  if (!g) return;
  if (g->kind == GameKind::Seq)
    parts.insert(parts.end(), g->children.begin(), g->children.end());
  else
    parts.push_back(std::move(g));
}

inline GamePtr seqOf(std::vector<GamePtr> parts, SourceSpan sp) {
  if (parts.empty()) return nullptr;
  if (parts.size() == 1) return parts[0];
  return mkSeqGame(std::move(parts), sp);
}

class Reifier {
 public:
  GamePtr reifyBody(const std::vector<StmtPtr>& body, int parity) {
    std::vector<GamePtr> parts;
    for (const auto& st : body) spliceInto(parts, reifyStmt(st, parity));
    return seqOf(std::move(parts), body.empty() ? SourceSpan{} : body.front()->span);
  }

  GamePtr reifyStmt(const StmtPtr& st, int parity) {
    switch (st->kind) {
      case StmtKind::Block:
        return reifyBody(st->body, parity);
      case StmtKind::GhostInv:
        return reifyBody(st->body, parity);  // belongs to the game
      case StmtKind::GhostFwd:                // belongs to the proof
      case StmtKind::Assert:                  // proof text
      case StmtKind::Label:
      case StmtKind::Note:
      case StmtKind::LetFunc:
      case StmtKind::LetPred:
      case StmtKind::LetGame:
      case StmtKind::Print:
      case StmtKind::Conclusion:
      case StmtKind::Proves:
        return nullptr;
      default:
        break;
    }
    GamePtr n = natural(st);
    if (!n) return nullptr;
    bool selfDual = st->kind == StmtKind::Assign || st->kind == StmtKind::EqAssign;
    return (parity && !selfDual) ? dualWrap(std::move(n)) : n;
  }

 private:
  // The statement's game as seen from the unswapped (Demonic) perspective.
  GamePtr natural(const StmtPtr& st) {
    switch (st->kind) {
      case StmtKind::Assume:
        return mkTestGame(st->fml, st->span);
      case StmtKind::Assign:
      case StmtKind::EqAssign:
        return mkAssignGame(st->var, st->rhs, st->span);
      case StmtKind::RandomAssign:
        return mkRandomGame(st->var, st->span);
      case StmtKind::Choice: {
        std::vector<GamePtr> branches;
        for (const auto& br : st->body) {
          GamePtr g = reifyStmt(br, 0);
          branches.push_back(g ? g : mkTestGame(mkTrue(br->span), br->span));
        }
        return mkChoiceGame(std::move(branches), st->span);
      }
      case StmtKind::Loop: {
        GamePtr body = reifyBody(st->body, 0);
        if (!body) body = mkTestGame(mkTrue(st->span), st->span);
        return mkRepeatGame(std::move(body), st->span);
      }
      case StmtKind::Switch: {
        // Angel picks the case and proves its guard.
        std::vector<GamePtr> branches;
        for (const auto& c : st->cases) {
          std::vector<GamePtr> parts;
          if (c.guard->kind != FormulaKind::True)
            parts.push_back(mkTestGame(c.guard, c.span));
          spliceInto(parts, reifyBody(c.body, 1));
          GamePtr b = seqOf(std::move(parts), c.span);
          branches.push_back(b ? b : mkTestGame(mkTrue(c.span), c.span));
        }
        return mkDualGame(mkChoiceGame(std::move(branches), st->span), st->span);
      }
      case StmtKind::For: {
        // init; {{?guard; body; incr}^@}*^@ — Angel controls the repetition,
        // each round replays the body with the original player assignment.
        std::vector<GamePtr> iter;
        iter.push_back(mkTestGame(st->forGuard->fml, st->forGuard->span));
        spliceInto(iter, reifyBody(st->body, 0));
        iter.push_back(
            mkAssignGame(st->forIncrement->var, st->forIncrement->rhs, st->forIncrement->span));
        GamePtr loop = mkDualGame(
            mkRepeatGame(mkDualGame(mkSeqGame(std::move(iter), st->span), st->span), st->span),
            st->span);
        GamePtr init = mkAssignGame(st->forInit->var, st->forInit->rhs, st->forInit->span);
        return mkSeqGame({std::move(init), std::move(loop)}, st->span);
      }
      case StmtKind::Ode: {
        std::vector<OdeEquation> eqs;
        for (const auto& eq : st->odes)
          if (!eq.fwdGhost) eqs.push_back(eq);
        bool angelic = false;
        for (const auto& item : st->domain)
          if (item.kind == DomItemKind::Duration) angelic = true;
        // Demon shows the domain of a Demonic ODE, so only assumptions appear
        // in it; Angel proves the domain of an Angelic one, so its assertions
        // do.  The other kind is proof text either way.
        FormulaPtr domain;
        for (const auto& item : st->domain) {
          if (angelic ? item.kind == DomItemKind::Assert
                      : item.kind == DomItemKind::Assume)
            domain = conjoin(std::move(domain), item.fml, st->span);
        }
        GamePtr ode = mkOdeGame(std::move(eqs), std::move(domain), st->span);
        return angelic ? mkDualGame(std::move(ode), st->span) : ode;
      }
      default:
        return nullptr;
    }
  }
};

// Fold SSA variants back to base names: games quantify over program state,
// not assignment history.
inline FormulaPtr foldToBaseNames(const FormulaPtr& f) {
  std::set<Var> vs;
  collectVars(f, vs);
  std::map<Var, TermPtr> sub;
  for (const Var& v : vs)
    if (v.index >= 0) sub[v] = mkVar(v.base, -1, f->span);
  return sub.empty() ? f : substitute(f, sub);
}

}  // namespace detail

// The theorem a checked document proves: its reified game boxed over the
// conjunction of the exported assertions that still speak about the exit
// state.  `withNames`, when nonempty, restricts the postcondition to the
// named facts (the `conclusion p with (names...)` form).
inline Conclusion reify(const Document& expanded, const ElabResult& elab,
                        const CheckResult& checked,
                        const std::vector<std::string>& withNames = {}) {
  Conclusion c;
  detail::Reifier r;
  c.game = r.reifyBody(expanded, 0);
  if (!c.game) c.game = mkTestGame(mkTrue());

  // Postcondition: assertion facts in the exit pool whose variables are all
  // current at exit.  Facts about superseded variants are history, not claims
  // about the final state.
  const auto& current = elab.snapshots[static_cast<size_t>(elab.exitSnapshot)].current;
  FormulaPtr post;
  for (const Fact& f : checked.exitFacts) {
    if (!f.fromAssert || f.ghost) continue;
    if (!withNames.empty() &&
        std::find(withNames.begin(), withNames.end(), f.name) == withNames.end())
      continue;
    std::set<Var> vs;
    collectVars(f.fml, vs);
    bool atExit = true;
    for (const Var& v : vs) {
      auto it = current.find(v.base);
      if (it == current.end() || it->second != v.index) atExit = false;
      // ghost state is erased from (forward) or unconstrained in (inverse)
      // the reified game, so facts about it are not theorems about the game
      auto vi = elab.variants.find(v);
      if (vi != elab.variants.end() &&
          (vi->second.forwardGhost || vi->second.inverseGhost))
        atExit = false;
    }
    if (!atExit) continue;
    post = detail::conjoin(std::move(post), detail::foldToBaseNames(f.fml), f.span);
  }
  c.postcondition = post ? post : mkTrue();
  return c;
}

inline std::string renderConclusion(const Conclusion& c) {
  return prettyPrint(mkModal(FormulaKind::Box, c.game, c.postcondition));
}

}  // namespace kaisar
