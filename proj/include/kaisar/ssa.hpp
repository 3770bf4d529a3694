#pragma once
// Elaboration: definition expansion followed by static-single-assignment
// renaming.  Every program variable `x` becomes a family of variants `x#k`;
// `x#0` is reserved for the initial value.  Each statement records the
// elaboration point (snapshot) before and after it, labels capture
// snapshots, and `expr @ label(args)` references are resolved against those
// snapshots once the whole document has been walked.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ast.hpp"
#include "ast_ops.hpp"
#include "ode.hpp"
#include "source.hpp"

namespace kaisar {

// ---------------------------------------------------------------------------
// Definition expansion.  `let` bodies are expanded against the definitions
// in scope at their own site, so chains of lets work; the namespace is flat
// and definitions accumulate in document order, including lets nested in
// blocks and branches.  The let statements themselves stay in the document
// (they are inert afterwards).

inline StmtPtr expandStatement(const StmtPtr& st, Definitions& defs, DiagnosticBag& diags);

inline std::vector<StmtPtr> expandStatements(const std::vector<StmtPtr>& sts, Definitions& defs,
                                             DiagnosticBag& diags) {
  std::vector<StmtPtr> out;
  out.reserve(sts.size());
  for (auto& s : sts) out.push_back(expandStatement(s, defs, diags));
  return out;
}

inline StmtPtr expandStatement(const StmtPtr& st, Definitions& defs, DiagnosticBag& diags) {
  try {
    switch (st->kind) {
      case StmtKind::LetFunc:
        defs.funcs[st->name] = {st->params, expandDefinitions(st->letTerm, defs)};
        return st;
      case StmtKind::LetPred:
        defs.preds[st->name] = {st->params, expandDefinitions(st->letFml, defs)};
        return st;
      case StmtKind::LetGame:
        defs.games[st->name] = expandDefinitions(st->letGame, defs);
        return st;
      default:
        break;
    }
    auto out = std::make_shared<Statement>(*st);
    if (st->fml) out->fml = expandDefinitions(st->fml, defs);
    if (st->rhs) out->rhs = expandDefinitions(st->rhs, defs);
    out->body = expandStatements(st->body, defs, diags);
    for (auto& c : out->cases) {
      c.guard = expandDefinitions(c.guard, defs);
      c.body = expandStatements(c.body, defs, diags);
    }
    if (st->forInit) out->forInit = expandStatement(st->forInit, defs, diags);
    if (st->forInvariant) out->forInvariant = expandStatement(st->forInvariant, defs, diags);
    if (st->forGuard) out->forGuard = expandStatement(st->forGuard, defs, diags);
    if (st->forIncrement) out->forIncrement = expandStatement(st->forIncrement, defs, diags);
    for (auto& eq : out->odes) eq.rhs = expandDefinitions(eq.rhs, defs);
    for (auto& d : out->domain) {
      if (d.fml) d.fml = expandDefinitions(d.fml, defs);
      if (d.rhs) d.rhs = expandDefinitions(d.rhs, defs);
    }
    return out;
  } catch (const std::runtime_error& e) {
    diags.error(st->span, e.what());
    throw CheckAbort{};
  }
}

// Expands a whole document, accumulating the definitions into `defs` so the
// caller can reuse them (e.g. to expand a refinement target later).
inline Document expandDocument(const Document& doc, Definitions& defs, DiagnosticBag& diags) {
  return expandStatements(doc, defs, diags);
}

// ---------------------------------------------------------------------------
// Elaboration results

// A snapshot of the renaming state at one elaboration point.  `path` is the
// stack of (choiceId, branchIndex) pairs of the branches enclosing the
// point; `stamp` orders the point against variant creation.
struct Snapshot {
  std::map<std::string, int> current;  // base -> current variant index
  std::vector<std::pair<int, int>> path;
  size_t stamp = 0;
};

struct VariantInfo {
  enum class Origin { Initial, Assign, Random, ChoiceMerge, LoopMerge, OdeExit };
  Origin origin = Origin::Initial;
  TermPtr def;              // Assign only (absent for erased ghost assignments)
  bool forwardGhost = false;
  bool inverseGhost = false;
  int odeId = -1;           // OdeExit: which system bound it
  int choiceId = -1;        // ChoiceMerge: which choice joined it
  std::vector<int> sources; // merge: per-branch variant (loops: {entry, bodyEnd})
  size_t stamp = 0;         // creation order; 0 = initial, always available
  SourceSpan span;
};

struct LabelInfo {
  int snapshot = -1;
  std::vector<std::string> params;
  SourceSpan span;
};

struct OdeInfo {
  OdeSystem system;
  Var tau;                 // reserved duration symbol %dur#odeId
  SolutionTable solution;  // filled after right-hand sides are resolved
  bool angelic = false;    // has a duration item
  SourceSpan span;
};

struct ElabResult {
  Document doc;  // fully renamed and label-resolved
  std::map<Var, VariantInfo> variants;
  std::vector<Snapshot> snapshots;
  std::map<std::string, LabelInfo> labels;
  std::vector<OdeInfo> odes;
  int exitSnapshot = -1;
};

// ---------------------------------------------------------------------------
// The elaborator

class Elaborator {
 public:
  explicit Elaborator(DiagnosticBag& diags) : diags_(diags) {}

  std::optional<ElabResult> run(const Document& doc) {
    res_ = ElabResult{};
    curr_.clear();
    counters_.clear();
    path_.clear();
    stamp_ = 1;
    choiceCounter_ = 0;
    ghostDepth_ = invGhostDepth_ = 0;
    resolvedTerms_.clear();
    resolvedFormulas_.clear();
    inProgress_.clear();
    try {
      Document elaborated = elabStatements(doc);
      res_.exitSnapshot = push();
      propagateMergeGhostFlags();
      // Solve systems in document order: a later system's right-hand side
      // may reference labels behind an earlier (already solved) one.
      for (auto& ode : res_.odes) {
        for (auto& dim : ode.system.dims) dim.rhsTerm = resolveTermDeep(dim.rhsTerm);
        ode.solution = solveOde(ode.system, ode.tau);
      }
      Document out;
      out.reserve(elaborated.size());
      for (auto& st : elaborated) out.push_back(rewriteResolved(st));
      for (auto& [v, vi] : res_.variants)
        if (vi.def) vi.def = resolveTermDeep(vi.def);
      res_.doc = std::move(out);
      return std::move(res_);
    } catch (const CheckAbort&) {
      return std::nullopt;
    }
  }

 private:
  DiagnosticBag& diags_;
  ElabResult res_;
  std::map<std::string, int> curr_;      // live renaming state
  std::map<std::string, int> counters_;  // next variant index per base
  std::vector<std::pair<int, int>> path_;
  size_t stamp_ = 1;
  int choiceCounter_ = 0;
  int ghostDepth_ = 0, invGhostDepth_ = 0;

  std::map<const Term*, TermPtr> resolvedTerms_;
  std::map<const Formula*, FormulaPtr> resolvedFormulas_;
  std::set<const void*> inProgress_;

  [[noreturn]] void err(SourceSpan sp, std::string msg) {
    diags_.error(sp, std::move(msg));
    throw CheckAbort{};
  }

  // ---- state primitives

  int push() {
    Snapshot s;
    s.current = curr_;
    s.path = path_;
    s.stamp = stamp_;
    res_.snapshots.push_back(std::move(s));
    return static_cast<int>(res_.snapshots.size()) - 1;
  }

  void ensureInitial(const std::string& base) {
    Var v{base, 0};
    if (res_.variants.count(v)) return;
    VariantInfo vi;
    vi.origin = VariantInfo::Origin::Initial;
    vi.stamp = 0;
    res_.variants.emplace(v, std::move(vi));
    if (counters_[base] < 1) counters_[base] = 1;
  }

  Var liveVar(const std::string& base) {
    auto it = curr_.find(base);
    if (it != curr_.end()) return Var{base, it->second};
    ensureInitial(base);
    curr_[base] = 0;
    return Var{base, 0};
  }

  Var snapshotVar(int snapId, const std::string& base) {
    const auto& m = res_.snapshots[static_cast<size_t>(snapId)].current;
    auto it = m.find(base);
    int idx = it == m.end() ? 0 : it->second;
    ensureInitial(base);
    return Var{base, idx};
  }

  Var freshVar(const std::string& base, VariantInfo vi) {
    ensureInitial(base);
    int& c = counters_[base];
    if (c < 1) c = 1;
    int k = c++;
    curr_[base] = k;
    vi.stamp = stamp_++;
    Var v{base, k};
    res_.variants[v] = std::move(vi);
    return v;
  }

  // ---- expression elaboration (snapId < 0 uses and extends the live state)

  Var lookupVar(const std::string& base, int snapId) {
    return snapId < 0 ? liveVar(base) : snapshotVar(snapId, base);
  }

  TermPtr elabTermG(const TermPtr& t, int referrer, int snapId) {
    if (!t) return t;
    switch (t->kind) {
      case TermKind::Number:
        return t;
      case TermKind::Variable: {
        Var v = lookupVar(t->var.base, snapId);
        if (v == t->var) return t;
        return mkVar(v, t->span);
      }
      case TermKind::Neg:
        return mkNeg(elabTermG(t->lhs, referrer, snapId), t->span);
      case TermKind::Apply: {
        std::vector<TermPtr> args;
        args.reserve(t->args.size());
        for (auto& a : t->args) args.push_back(elabTermG(a, referrer, snapId));
        return mkApply(t->name, std::move(args), t->span);
      }
      case TermKind::Located: {
        // The subject stays raw: it is re-read at the label's state when the
        // reference is resolved.  Arguments are read at the reference point.
        std::vector<TermPtr> args;
        args.reserve(t->args.size());
        for (auto& a : t->args) args.push_back(elabTermG(a, referrer, snapId));
        auto n = mkLocatedTerm(t->lhs, t->name, std::move(args), t->span);
        const_cast<Term*>(n.get())->referrer = referrer;
        return n;
      }
      default:
        return mkBin(t->kind, elabTermG(t->lhs, referrer, snapId),
                     elabTermG(t->rhs, referrer, snapId), t->span);
    }
  }

  FormulaPtr elabFormulaG(const FormulaPtr& f, int referrer, int snapId) {
    if (!f) return f;
    switch (f->kind) {
      case FormulaKind::True:
      case FormulaKind::False:
        return f;
      case FormulaKind::Cmp:
        return mkCmp(f->op, elabTermG(f->left, referrer, snapId),
                     elabTermG(f->right, referrer, snapId), f->span);
      case FormulaKind::PredApply: {
        std::vector<TermPtr> args;
        args.reserve(f->args.size());
        for (auto& a : f->args) args.push_back(elabTermG(a, referrer, snapId));
        return mkPredApply(f->name, std::move(args), f->span);
      }
      case FormulaKind::Located: {
        std::vector<TermPtr> args;
        args.reserve(f->args.size());
        for (auto& a : f->args) args.push_back(elabTermG(a, referrer, snapId));
        auto n = mkLocatedFormula(f->child, f->name, std::move(args), f->span);
        const_cast<Formula*>(n.get())->referrer = referrer;
        return n;
      }
      case FormulaKind::Not:
        return mkUnary(f->kind, elabFormulaG(f->child, referrer, snapId), f->span);
      case FormulaKind::Box:
      case FormulaKind::Diamond:
        err(f->span, "game modalities cannot appear inside proof statements");
      default:
        return mkBinary(f->kind, elabFormulaG(f->child, referrer, snapId),
                        elabFormulaG(f->child2, referrer, snapId), f->span);
    }
  }

  TermPtr elabLive(const TermPtr& t, int referrer) { return elabTermG(t, referrer, -1); }
  FormulaPtr elabLive(const FormulaPtr& f, int referrer) { return elabFormulaG(f, referrer, -1); }
  FormulaPtr elabAt(const FormulaPtr& f, int snapId) { return elabFormulaG(f, snapId, snapId); }

  // ---- statement walk

  struct PrevFact {
    bool isFact = false;
    FormulaPtr raw;    // surface formula; null for note facts
    StmtPtr elab;
  };

  PrevFact factOf(const StmtPtr& raw, const StmtPtr& elab) {
    switch (raw->kind) {
      case StmtKind::Assume:
      case StmtKind::Assert:
        return {true, raw->fml, elab};
      case StmtKind::EqAssign:
        return {true,
                mkCmp(CmpOp::Eq, mkVar(raw->var.base, -1, raw->span), raw->rhs, raw->span),
                elab};
      case StmtKind::Note:
        return {true, nullptr, elab};
      case StmtKind::GhostFwd:
        if (!raw->body.empty() && !elab->body.empty())
          return factOf(raw->body.back(), elab->body.back());
        return {};
      default:
        return {};
    }
  }

  std::vector<StmtPtr> elabStatements(const std::vector<StmtPtr>& sts) {
    std::vector<StmtPtr> out;
    out.reserve(sts.size());
    PrevFact prev;
    for (auto& st : sts) {
      int before = push();
      StmtPtr e = elabStatement(st, before, prev);
      out.push_back(e);
      prev = factOf(st, e);
    }
    return out;
  }

  StmtPtr elabStatement(const StmtPtr& st, int snapBefore, const PrevFact& prev) {
    auto out = std::make_shared<Statement>(*st);
    out->ssaPointBefore = snapBefore;
    if (out->methodSpec.delta)
      out->methodSpec.delta = elabLive(st->methodSpec.delta, snapBefore);
    switch (st->kind) {
      case StmtKind::Assume:
      case StmtKind::Assert:
        out->fml = elabLive(st->fml, snapBefore);
        break;
      case StmtKind::Assign:
      case StmtKind::EqAssign: {
        TermPtr rhs = elabLive(st->rhs, snapBefore);
        VariantInfo vi;
        vi.origin = VariantInfo::Origin::Assign;
        vi.span = st->span;
        vi.forwardGhost = ghostDepth_ > 0;
        vi.inverseGhost = invGhostDepth_ > 0;
        if (invGhostDepth_ == 0) vi.def = rhs;
        out->var = freshVar(st->var.base, std::move(vi));
        out->rhs = rhs;
        break;
      }
      case StmtKind::RandomAssign: {
        VariantInfo vi;
        vi.origin = VariantInfo::Origin::Random;
        vi.span = st->span;
        vi.forwardGhost = ghostDepth_ > 0;
        vi.inverseGhost = invGhostDepth_ > 0;
        out->var = freshVar(st->var.base, std::move(vi));
        break;
      }
      case StmtKind::Label: {
        if (res_.labels.count(st->name)) err(st->span, "duplicate label '" + st->name + "'");
        LabelInfo li;
        li.snapshot = snapBefore;
        li.params = st->labelParams;
        li.span = st->span;
        res_.labels.emplace(st->name, std::move(li));
        break;
      }
      case StmtKind::Block:
        out->body = elabStatements(st->body);
        break;
      case StmtKind::GhostFwd:
        ++ghostDepth_;
        out->body = elabStatements(st->body);
        --ghostDepth_;
        break;
      case StmtKind::GhostInv:
        ++invGhostDepth_;
        out->body = elabStatements(st->body);
        --invGhostDepth_;
        break;
      case StmtKind::Choice:
        elabChoice(st, out);
        break;
      case StmtKind::Switch:
        elabSwitch(st, out);
        break;
      case StmtKind::Loop:
        elabLoop(st, out, prev);
        break;
      case StmtKind::For:
        elabFor(st, out);
        break;
      case StmtKind::Ode:
        elabOde(st, out);
        break;
      case StmtKind::Print:
        if (st->fml) out->fml = elabLive(st->fml, snapBefore);
        if (st->rhs) out->rhs = elabLive(st->rhs, snapBefore);
        break;
      case StmtKind::Note:
      case StmtKind::LetFunc:
      case StmtKind::LetPred:
      case StmtKind::LetGame:
      case StmtKind::Conclusion:
      case StmtKind::Proves:
        break;  // note facts are built by the checker; lets are inert here
    }
    out->ssaPointAfter = push();
    return out;
  }

  void collectAssignedBases(const StmtPtr& st, std::set<std::string>& out) {
    if (!st) return;
    switch (st->kind) {
      case StmtKind::Assign:
      case StmtKind::RandomAssign:
      case StmtKind::EqAssign:
        out.insert(st->var.base);
        break;
      case StmtKind::Block:
      case StmtKind::GhostFwd:
      case StmtKind::GhostInv:
      case StmtKind::Loop:
      case StmtKind::Choice:
        for (auto& s : st->body) collectAssignedBases(s, out);
        break;
      case StmtKind::Switch:
        for (auto& c : st->cases)
          for (auto& s : c.body) collectAssignedBases(s, out);
        break;
      case StmtKind::For:
        collectAssignedBases(st->forInit, out);
        collectAssignedBases(st->forIncrement, out);
        for (auto& s : st->body) collectAssignedBases(s, out);
        break;
      case StmtKind::Ode:
        for (auto& eq : st->odes) out.insert(eq.var.base);
        break;
      default:
        break;
    }
  }

  // A merged variant is ghost-tainted whenever any of its sources is; sources
  // of loop merges are only complete after the body, so run to fixpoint.
  void propagateMergeGhostFlags() {
    for (bool changed = true; changed;) {
      changed = false;
      for (auto& [v, vi] : res_.variants) {
        if (vi.origin != VariantInfo::Origin::ChoiceMerge &&
            vi.origin != VariantInfo::Origin::LoopMerge)
          continue;
        for (int s : vi.sources) {
          const VariantInfo& sv = res_.variants.at(Var{v.base, s});
          if (sv.forwardGhost && !vi.forwardGhost) vi.forwardGhost = changed = true;
          if (sv.inverseGhost && !vi.inverseGhost) vi.inverseGhost = changed = true;
        }
      }
    }
  }

  void makeMerges(std::shared_ptr<Statement>& out,
                  const std::vector<std::map<std::string, int>>& ends, SourceSpan sp, int cid,
                  VariantInfo::Origin origin) {
    auto valOf = [](const std::map<std::string, int>& m, const std::string& b) {
      auto it = m.find(b);
      return it == m.end() ? 0 : it->second;
    };
    std::set<std::string> bases;
    for (auto& e : ends)
      for (auto& [b, idx] : e) bases.insert(b);
    for (const auto& b : bases) {
      int entryIdx = valOf(curr_, b);
      bool changed = false;
      std::vector<int> src;
      src.reserve(ends.size());
      for (auto& e : ends) {
        int v = valOf(e, b);
        src.push_back(v);
        changed |= v != entryIdx;
      }
      if (!changed) continue;
      ensureInitial(b);
      VariantInfo vi;
      vi.origin = origin;
      vi.span = sp;
      vi.forwardGhost = ghostDepth_ > 0;
      vi.inverseGhost = invGhostDepth_ > 0;
      vi.choiceId = cid;
      vi.sources = src;
      Var mv = freshVar(b, std::move(vi));
      out->merges.push_back(VarMerge{b, mv.index, src});
    }
  }

  void elabChoice(const StmtPtr& st, std::shared_ptr<Statement>& out) {
    int cid = choiceCounter_++;
    auto entry = curr_;
    std::vector<std::map<std::string, int>> ends;
    std::vector<StmtPtr> branches;
    PrevFact none;
    for (size_t i = 0; i < st->body.size(); ++i) {
      curr_ = entry;
      path_.emplace_back(cid, static_cast<int>(i));
      int bsnap = push();
      branches.push_back(elabStatement(st->body[i], bsnap, none));
      path_.pop_back();
      ends.push_back(curr_);
    }
    curr_ = entry;
    makeMerges(out, ends, st->span, cid, VariantInfo::Origin::ChoiceMerge);
    out->body = std::move(branches);
  }

  void elabSwitch(const StmtPtr& st, std::shared_ptr<Statement>& out) {
    int cid = choiceCounter_++;
    auto entry = curr_;
    std::vector<std::map<std::string, int>> ends;
    std::vector<SwitchCase> cases;
    for (size_t i = 0; i < st->cases.size(); ++i) {
      curr_ = entry;
      path_.emplace_back(cid, static_cast<int>(i));
      int bsnap = push();
      SwitchCase c = st->cases[i];
      c.guard = elabFormulaG(c.guard, bsnap, -1);
      c.body = elabStatements(c.body);
      path_.pop_back();
      ends.push_back(curr_);
      cases.push_back(std::move(c));
    }
    curr_ = entry;
    makeMerges(out, ends, st->span, cid, VariantInfo::Origin::ChoiceMerge);
    out->cases = std::move(cases);
  }

  void elabLoop(const StmtPtr& st, std::shared_ptr<Statement>& out, const PrevFact& prev) {
    if (!prev.isFact)
      err(st->span, "loop requires an invariant: the statement before the loop must "
                    "establish a fact");
    FormulaPtr raw = prev.raw;  // null when the invariant comes from a note
    int entrySnap = push();
    if (raw) out->invEntry = elabAt(raw, entrySnap);
    std::set<std::string> assigned;
    for (auto& s : st->body) collectAssignedBases(s, assigned);
    for (const auto& base : assigned) {
      Var ev = liveVar(base);
      VariantInfo vi;
      vi.origin = VariantInfo::Origin::LoopMerge;
      vi.span = st->span;
      vi.forwardGhost = ghostDepth_ > 0;
      vi.inverseGhost = invGhostDepth_ > 0;
      vi.sources = {ev.index};
      Var mv = freshVar(base, std::move(vi));
      out->merges.push_back(VarMerge{base, mv.index, {ev.index}});
    }
    int headSnap = push();
    if (raw) out->invHead = elabAt(raw, headSnap);
    out->body = elabStatements(st->body);
    int bodyEndSnap = push();
    if (raw) out->invBodyEnd = elabAt(raw, bodyEndSnap);
    (void)bodyEndSnap;
    for (auto& m : out->merges) {
      m.sourceIndices.push_back(curr_[m.base]);
      res_.variants[Var{m.base, m.mergedIndex}].sources = m.sourceIndices;
      curr_[m.base] = m.mergedIndex;  // loop exits at the head state
    }
  }

  void elabFor(const StmtPtr& st, std::shared_ptr<Statement>& out) {
    PrevFact none;
    out->forInit = elabStatement(st->forInit, push(), none);
    FormulaPtr raw = st->forInvariant->fml;
    int entrySnap = push();
    out->invEntry = elabAt(raw, entrySnap);
    std::set<std::string> assigned;
    for (auto& s : st->body) collectAssignedBases(s, assigned);
    collectAssignedBases(st->forIncrement, assigned);
    for (const auto& base : assigned) {
      Var ev = liveVar(base);
      VariantInfo vi;
      vi.origin = VariantInfo::Origin::LoopMerge;
      vi.span = st->span;
      vi.forwardGhost = ghostDepth_ > 0;
      vi.inverseGhost = invGhostDepth_ > 0;
      vi.sources = {ev.index};
      Var mv = freshVar(base, std::move(vi));
      out->merges.push_back(VarMerge{base, mv.index, {ev.index}});
    }
    int headSnap = push();
    out->invHead = elabAt(raw, headSnap);
    {
      auto inv = std::make_shared<Statement>(*st->forInvariant);
      inv->fml = out->invHead;
      inv->ssaPointBefore = headSnap;
      out->forInvariant = inv;
    }
    {
      auto g = std::make_shared<Statement>(*st->forGuard);
      g->fml = elabAt(st->forGuard->fml, headSnap);
      g->ssaPointBefore = headSnap;
      out->forGuard = g;
    }
    out->body = elabStatements(st->body);
    int bodyEndSnap = push();
    out->invBodyEnd = elabAt(raw, bodyEndSnap);
    out->forIncrement = elabStatement(st->forIncrement, push(), none);
    for (auto& m : out->merges) {
      m.sourceIndices.push_back(curr_[m.base]);
      res_.variants[Var{m.base, m.mergedIndex}].sources = m.sourceIndices;
      curr_[m.base] = m.mergedIndex;  // exit at the head state (guard failed)
    }
  }

  void elabOde(const StmtPtr& st, std::shared_ptr<Statement>& out) {
    int odeId = static_cast<int>(res_.odes.size());
    OdeInfo info;
    info.span = st->span;
    info.tau = Var{"%dur", odeId};
    std::set<std::string> seen;
    std::vector<Var> entries;
    entries.reserve(st->odes.size());
    for (auto& eq : st->odes) {
      if (!seen.insert(eq.var.base).second)
        err(eq.span, "variable '" + eq.var.base + "' is bound twice in the differential equation");
      entries.push_back(liveVar(eq.var.base));
    }
    std::vector<OdeEquation> eqs = st->odes;
    for (size_t i = 0; i < eqs.size(); ++i) {
      auto& eq = eqs[i];
      VariantInfo vi;
      vi.origin = VariantInfo::Origin::OdeExit;
      vi.span = eq.span;
      vi.forwardGhost = ghostDepth_ > 0 || eq.fwdGhost;
      vi.inverseGhost = invGhostDepth_ > 0 || eq.invGhost;
      vi.odeId = odeId;
      Var fv = freshVar(eq.var.base, std::move(vi));
      OdeDimension dim;
      dim.base = eq.var.base;
      dim.entryVar = entries[i];
      dim.flowVar = fv;
      dim.eqName = eq.eqName;
      dim.forwardGhost = ghostDepth_ > 0 || eq.fwdGhost;
      dim.inverseGhost = invGhostDepth_ > 0 || eq.invGhost;
      dim.span = eq.span;
      info.system.dims.push_back(std::move(dim));
      eq.var = fv;
    }
    // Right-hand sides and the domain are read in flow space: the bound
    // variables refer to the flowing values, every other variable to its
    // value at entry.
    for (size_t i = 0; i < eqs.size(); ++i) {
      eqs[i].rhs = elabLive(eqs[i].rhs, out->ssaPointBefore);
      info.system.dims[i].rhsTerm = eqs[i].rhs;
    }
    std::vector<DomainItem> dom = st->domain;
    for (auto& item : dom) {
      if (item.kind == DomItemKind::Duration) {
        info.angelic = true;
        const OdeDimension* dim = info.system.byBase(item.var.base);
        if (!dim)
          err(item.span, "duration variable '" + item.var.base +
                         "' is not bound by the differential equation");
        item.var = dim->flowVar;
        item.rhs = elabLive(item.rhs, out->ssaPointBefore);
      } else {
        item.fml = elabLive(item.fml, out->ssaPointBefore);
      }
    }
    out->odes = std::move(eqs);
    out->domain = std::move(dom);
    out->odeId = odeId;
    res_.odes.push_back(std::move(info));
  }

  // ---- label resolution (second phase)

  struct ChaseCtx {
    int labelSnap = -1;
    size_t referrerStamp = 0;
    const std::vector<std::pair<int, int>>* referrerPath = nullptr;
    std::map<Var, TermPtr> paramSub;
    std::map<int, TermPtr> odeTau;  // odeId -> elapsed-time term
    SourceSpan span;
  };

  ChaseCtx beginChase(const std::string& label, const std::vector<TermPtr>& args, int referrer,
                      SourceSpan span) {
    auto it = res_.labels.find(label);
    if (it == res_.labels.end()) err(span, "unknown label '" + label + "'");
    const LabelInfo& li = it->second;
    if (referrer < 0) err(span, "label reference outside of any statement");
    const Snapshot& rs = res_.snapshots[static_cast<size_t>(referrer)];
    const Snapshot& ls = res_.snapshots[static_cast<size_t>(li.snapshot)];
    size_t n = std::min(rs.path.size(), ls.path.size());
    for (size_t k = 0; k < n; ++k) {
      if (rs.path[k] == ls.path[k]) continue;
      if (rs.path[k].first == ls.path[k].first)
        err(span, "label '" + label + "' is declared in a sibling branch");
      break;
    }
    if (args.size() != li.params.size())
      err(span, "label '" + label + "' takes " + std::to_string(li.params.size()) +
                " argument(s), got " + std::to_string(args.size()));
    ChaseCtx cx;
    cx.labelSnap = li.snapshot;
    cx.referrerStamp = rs.stamp;
    cx.referrerPath = &rs.path;
    cx.span = span;
    for (size_t i = 0; i < args.size(); ++i) {
      TermPtr arg = resolveTermDeep(args[i]);
      const std::string& base = li.params[i];
      Var pv = snapshotVar(cx.labelSnap, base);
      const VariantInfo& vi = res_.variants.at(pv);
      if (vi.origin == VariantInfo::Origin::OdeExit) {
        OdeInfo& ode = res_.odes[static_cast<size_t>(vi.odeId)];
        auto cs = ode.solution.clockSlope.find(pv);
        if (cs == ode.solution.clockSlope.end())
          err(span, "label argument '" + base +
                    "' must be a clock of its differential equation");
        const OdeDimension* dim = ode.system.byFlowVar(pv);
        TermPtr tau = mkBin(TermKind::Minus, arg, mkVar(dim->entryVar, span), span);
        if (!(cs->second == Rational(1)))
          tau = mkBin(TermKind::Divide, tau, mkNum(cs->second, span), span);
        cx.odeTau.emplace(vi.odeId, tau);
      } else {
        cx.paramSub[pv] = arg;
      }
    }
    return cx;
  }

  // One batched pass rewriting the label-state exit variants of a clocked
  // system into their solutions at the label's elapsed time.  Batching
  // matters: the elapsed-time term itself may mention exit variants (read at
  // the reference point), which must stay untouched.
  template <class Node>
  Node familyRewrite(Node body, ChaseCtx& cx) {
    if (cx.odeTau.empty()) return body;
    std::set<Var> vs;
    collectVars(body, vs);
    std::map<Var, TermPtr> sub;
    for (const Var& v : vs) {
      auto it = res_.variants.find(v);
      if (it == res_.variants.end()) continue;
      const VariantInfo& vi = it->second;
      if (vi.origin != VariantInfo::Origin::OdeExit) continue;
      auto ot = cx.odeTau.find(vi.odeId);
      if (ot == cx.odeTau.end()) continue;
      OdeInfo& ode = res_.odes[static_cast<size_t>(vi.odeId)];
      if (!ode.solution.has(v))
        err(cx.span,
            "no closed-form solution for '" + v.base + "' along the differential equation");
      TermPtr sol = polynomialToTerm(ode.solution.solution.at(v), cx.span);
      std::map<Var, TermPtr> tauSub{{ode.tau, ot->second}};
      sol = substitute(sol, tauSub);
      sub[v] = substitute(sol, cx.paramSub);
    }
    if (sub.empty()) return body;
    return substitute(body, sub);
  }

  // Replacement for a variable that is not yet expressible at the reference
  // point, or nullptr if it can stay.
  TermPtr chaseVar(const Var& v, ChaseCtx& cx) {
    auto it = res_.variants.find(v);
    if (it == res_.variants.end()) return nullptr;  // uninterpreted symbol
    const VariantInfo& vi = it->second;
    if (vi.stamp < cx.referrerStamp) return nullptr;  // already determined here
    switch (vi.origin) {
      case VariantInfo::Origin::Initial:
        return nullptr;
      case VariantInfo::Origin::Assign:
        if (vi.def) return substitute(vi.def, cx.paramSub);
        err(cx.span, "forward reference to '" + v.base + "' assigned inside an erased ghost");
      case VariantInfo::Origin::Random:
        err(cx.span, "forward reference to '" + v.base +
                     "' bound by a nondeterministic assignment");
      case VariantInfo::Origin::ChoiceMerge: {
        for (auto& pr : *cx.referrerPath)
          if (pr.first == vi.choiceId)
            return mkVar(Var{v.base, vi.sources[static_cast<size_t>(pr.second)]}, cx.span);
        err(cx.span, "forward reference to '" + v.base + "' depends on a choice not yet made");
      }
      case VariantInfo::Origin::LoopMerge:
        err(cx.span, "forward reference to '" + v.base + "' crosses a loop");
      case VariantInfo::Origin::OdeExit:
        err(cx.span, "forward reference to '" + v.base +
                     "' crosses a differential equation; pass a clock argument to the label");
    }
    return nullptr;
  }

  TermPtr chaseTerm(TermPtr cur, ChaseCtx& cx) {
    for (int guard = 0;; ++guard) {
      if (guard > 4000) err(cx.span, "label reference expansion does not terminate");
      cur = resolveTermDeep(cur);
      std::set<Var> vs;
      collectVars(cur, vs);
      Var target;
      TermPtr rep;
      for (const Var& v : vs) {
        if (TermPtr r = chaseVar(v, cx)) {
          target = v;
          rep = r;
          break;
        }
      }
      if (!rep) return cur;
      std::map<Var, TermPtr> one{{target, rep}};
      cur = substitute(cur, one);
    }
  }

  FormulaPtr chaseFormula(FormulaPtr cur, ChaseCtx& cx) {
    for (int guard = 0;; ++guard) {
      if (guard > 4000) err(cx.span, "label reference expansion does not terminate");
      cur = resolveFormulaDeep(cur);
      std::set<Var> vs;
      collectVars(cur, vs);
      Var target;
      TermPtr rep;
      for (const Var& v : vs) {
        if (TermPtr r = chaseVar(v, cx)) {
          target = v;
          rep = r;
          break;
        }
      }
      if (!rep) return cur;
      std::map<Var, TermPtr> one{{target, rep}};
      cur = substitute(cur, one);
    }
  }

  TermPtr resolveLocatedTerm(const TermPtr& loc) {
    auto hit = resolvedTerms_.find(loc.get());
    if (hit != resolvedTerms_.end()) return hit->second;
    if (!inProgress_.insert(loc.get()).second)
      err(loc->span, "cyclic reference through label '" + loc->name + "'");
    ChaseCtx cx = beginChase(loc->name, loc->args, loc->referrer, loc->span);
    TermPtr body = elabTermG(loc->lhs, cx.labelSnap, cx.labelSnap);
    body = substitute(body, cx.paramSub);
    body = familyRewrite(body, cx);
    TermPtr out = chaseTerm(body, cx);
    inProgress_.erase(loc.get());
    resolvedTerms_[loc.get()] = out;
    return out;
  }

  FormulaPtr resolveLocatedFormula(const FormulaPtr& loc) {
    auto hit = resolvedFormulas_.find(loc.get());
    if (hit != resolvedFormulas_.end()) return hit->second;
    if (!inProgress_.insert(loc.get()).second)
      err(loc->span, "cyclic reference through label '" + loc->name + "'");
    ChaseCtx cx = beginChase(loc->name, loc->args, loc->referrer, loc->span);
    FormulaPtr body = elabFormulaG(loc->child, cx.labelSnap, cx.labelSnap);
    body = substitute(body, cx.paramSub);
    body = familyRewrite(body, cx);
    FormulaPtr out = chaseFormula(body, cx);
    inProgress_.erase(loc.get());
    resolvedFormulas_[loc.get()] = out;
    return out;
  }

  TermPtr resolveTermDeep(const TermPtr& t) {
    return rewriteTerm(t, [this](const TermPtr& n) -> TermPtr {
      if (n->kind == TermKind::Located) return resolveLocatedTerm(n);
      return nullptr;
    });
  }

  FormulaPtr resolveFormulaDeep(const FormulaPtr& f) {
    if (!f) return f;
    switch (f->kind) {
      case FormulaKind::True:
      case FormulaKind::False:
        return f;
      case FormulaKind::Cmp:
        return mkCmp(f->op, resolveTermDeep(f->left), resolveTermDeep(f->right), f->span);
      case FormulaKind::PredApply: {
        std::vector<TermPtr> args;
        args.reserve(f->args.size());
        for (auto& a : f->args) args.push_back(resolveTermDeep(a));
        return mkPredApply(f->name, std::move(args), f->span);
      }
      case FormulaKind::Located:
        return resolveLocatedFormula(f);
      case FormulaKind::Not:
        return mkUnary(f->kind, resolveFormulaDeep(f->child), f->span);
      case FormulaKind::Box:
      case FormulaKind::Diamond:
        return f;
      default:
        return mkBinary(f->kind, resolveFormulaDeep(f->child), resolveFormulaDeep(f->child2),
                        f->span);
    }
  }

  StmtPtr rewriteResolved(const StmtPtr& st) {
    if (!st) return st;
    auto out = std::make_shared<Statement>(*st);
    out->fml = resolveFormulaDeep(st->fml);
    out->rhs = resolveTermDeep(st->rhs);
    out->invEntry = resolveFormulaDeep(st->invEntry);
    out->invHead = resolveFormulaDeep(st->invHead);
    out->invBodyEnd = resolveFormulaDeep(st->invBodyEnd);
    for (auto& s : out->body) s = rewriteResolved(s);
    for (auto& c : out->cases) {
      c.guard = resolveFormulaDeep(c.guard);
      for (auto& s : c.body) s = rewriteResolved(s);
    }
    out->forInit = rewriteResolved(st->forInit);
    out->forInvariant = rewriteResolved(st->forInvariant);
    out->forGuard = rewriteResolved(st->forGuard);
    out->forIncrement = rewriteResolved(st->forIncrement);
    for (auto& eq : out->odes) eq.rhs = resolveTermDeep(eq.rhs);
    for (auto& d : out->domain) {
      d.fml = resolveFormulaDeep(d.fml);
      d.rhs = resolveTermDeep(d.rhs);
    }
    return out;
  }
};

// Convenience wrapper matching the rest of the pipeline's free-function style.
inline std::optional<ElabResult> ssaTransform(const Document& doc, DiagnosticBag& diags) {
  Elaborator e(diags);
  return e.run(doc);
}

}  // namespace kaisar
