#pragma once

// Shared plumbing for the test suite: corpus loading, pipeline runs, and
// span-insensitive structural comparison of syntax trees.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kaisar/check.hpp"
#include "kaisar/parse.hpp"
#include "kaisar/poly.hpp"
#include "kaisar/print.hpp"
#include "kaisar/ssa.hpp"

#ifndef KAISAR_CORPUS_DIR
#define KAISAR_CORPUS_DIR "corpus"
#endif

namespace kt {

using namespace kaisar;
namespace fs = std::filesystem;

inline std::string corpusDir() { return KAISAR_CORPUS_DIR; }

inline std::string corpusPath(const std::string& name) {
  return corpusDir() + "/" + name;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Sorted .kaisar paths under the corpus whose file name starts with `prefix`
// ("g" = valid, "m" = mutations, "x" = extras, "" = everything).
inline std::vector<std::string> corpusFiles(const std::string& prefix = "") {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(corpusDir())) {
    if (!e.is_regular_file() || e.path().extension() != ".kaisar") continue;
    std::string name = e.path().filename().string();
    if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
    out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Pipeline {
  Document parsed;
  Definitions defs;
  Document expanded;
  std::optional<ElabResult> elab;
  CheckResult checked;
  DiagnosticBag diags;
  bool parseOk = false;
  bool elabOk = false;
  bool checkOk = false;
};

inline Pipeline run(const std::string& text, const CheckConfig& cfg = {}) {
  Pipeline p;
  p.parsed = parseDocument(text, p.diags);
  if (p.diags.hasErrors()) return p;
  p.parseOk = true;
  p.expanded = expandDocument(p.parsed, p.defs, p.diags);
  if (p.diags.hasErrors()) return p;
  try {
    p.elab = ssaTransform(p.expanded, p.diags);
  } catch (const CheckAbort&) {
  }
  if (!p.elab || p.diags.hasErrors()) return p;
  p.elabOk = true;
  try {
    p.checked = checkDocument(*p.elab, p.diags, cfg);
  } catch (const CheckAbort&) {
  }
  p.checkOk = !p.diags.hasErrors();
  return p;
}

inline Pipeline runFile(const std::string& name, const CheckConfig& cfg = {}) {
  return run(slurp(corpusPath(name)), cfg);
}

inline int firstErrorLine(const DiagnosticBag& diags) {
  for (const auto& d : diags.items())
    if (d.severity == Severity::Error) return d.span.line;
  return -1;
}

inline std::string firstErrorMessage(const DiagnosticBag& diags) {
  for (const auto& d : diags.items())
    if (d.severity == Severity::Error) return d.message;
  return {};
}

// Two terms denote the same rational function.
inline bool polyEqTerm(const TermPtr& a, const TermPtr& b) {
  RatFunc d = termToRatFunc(a) - termToRatFunc(b);
  return d.num.isZero();
}

// --------------------------------------------------------------------------
// Structural equality, ignoring source spans.

inline bool termEq(const TermPtr& a, const TermPtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case TermKind::Number: return a->value == b->value;
    case TermKind::Variable: return a->var == b->var;
    case TermKind::Apply:
      if (a->name != b->name || a->args.size() != b->args.size()) return false;
      for (size_t i = 0; i < a->args.size(); ++i)
        if (!termEq(a->args[i], b->args[i])) return false;
      return true;
    case TermKind::Located:
      return a->name == b->name && termEq(a->lhs, b->lhs) &&
             a->args.size() == b->args.size() &&
             std::equal(a->args.begin(), a->args.end(), b->args.begin(),
                        [](const TermPtr& x, const TermPtr& y) { return termEq(x, y); });
    default:
      return termEq(a->lhs, b->lhs) && termEq(a->rhs, b->rhs);
  }
}

inline bool fmlEq(const FormulaPtr& a, const FormulaPtr& b);
inline bool gameEq(const GamePtr& a, const GamePtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case GameKind::Assign:
    case GameKind::RandomAssign:
      return a->var == b->var && termEq(a->term, b->term);
    case GameKind::Test: return fmlEq(a->fml, b->fml);
    case GameKind::Ode: {
      if (a->odes.size() != b->odes.size()) return false;
      for (size_t i = 0; i < a->odes.size(); ++i) {
        const auto& x = a->odes[i];
        const auto& y = b->odes[i];
        if (x.var != y.var || x.eqName != y.eqName || x.fwdGhost != y.fwdGhost ||
            x.invGhost != y.invGhost || !termEq(x.rhs, y.rhs))
          return false;
      }
      return fmlEq(a->fml, b->fml);
    }
    default: {
      if (a->children.size() != b->children.size()) return false;
      for (size_t i = 0; i < a->children.size(); ++i)
        if (!gameEq(a->children[i], b->children[i])) return false;
      return true;
    }
  }
}

inline bool fmlEq(const FormulaPtr& a, const FormulaPtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case FormulaKind::True:
    case FormulaKind::False: return true;
    case FormulaKind::Cmp:
      return a->op == b->op && termEq(a->left, b->left) && termEq(a->right, b->right);
    case FormulaKind::Box:
      return gameEq(a->game, b->game) && fmlEq(a->child, b->child);
    default:
      return fmlEq(a->child, b->child) && fmlEq(a->child2, b->child2);
  }
}

inline bool proofTermEq(const ProofTermPtr& a, const ProofTermPtr& b) {
  if (!a || !b) return a == b;
  if (a->head != b->head || a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!proofTermEq(a->args[i], b->args[i])) return false;
  return true;
}

inline bool specEq(const UsingSpec& a, const UsingSpec& b) {
  return a.given == b.given && a.ellipsis == b.ellipsis && a.names == b.names;
}

inline bool methodEq(const MethodSpec& a, const MethodSpec& b) {
  return a.given == b.given && a.method == b.method && termEq(a.delta, b.delta);
}

inline bool stmtEq(const StmtPtr& a, const StmtPtr& b);
inline bool bodyEq(const std::vector<StmtPtr>& a, const std::vector<StmtPtr>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!stmtEq(a[i], b[i])) return false;
  return true;
}

inline bool stmtEq(const StmtPtr& a, const StmtPtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind || a->name != b->name) return false;
  if (a->var != b->var) return false;
  if (!termEq(a->rhs, b->rhs) || !fmlEq(a->fml, b->fml)) return false;
  if (!termEq(a->letTerm, b->letTerm) || !fmlEq(a->letFml, b->letFml)) return false;
  if (!gameEq(a->letGame, b->letGame)) return false;
  if (a->params != b->params || a->labelParams != b->labelParams) return false;
  if (!specEq(a->usingSpec, b->usingSpec) || !methodEq(a->methodSpec, b->methodSpec))
    return false;
  if (!stmtEq(a->forInit, b->forInit) || !stmtEq(a->forInvariant, b->forInvariant) ||
      !stmtEq(a->forGuard, b->forGuard) || !stmtEq(a->forIncrement, b->forIncrement))
    return false;
  if (a->odes.size() != b->odes.size()) return false;
  for (size_t i = 0; i < a->odes.size(); ++i) {
    const auto& x = a->odes[i];
    const auto& y = b->odes[i];
    if (x.var != y.var || x.eqName != y.eqName || x.fwdGhost != y.fwdGhost ||
        x.invGhost != y.invGhost || !termEq(x.rhs, y.rhs))
      return false;
  }
  if (a->domain.size() != b->domain.size()) return false;
  for (size_t i = 0; i < a->domain.size(); ++i) {
    const auto& x = a->domain[i];
    const auto& y = b->domain[i];
    if (x.kind != y.kind || x.name != y.name || x.var != y.var) return false;
    if (!fmlEq(x.fml, y.fml) || !termEq(x.rhs, y.rhs)) return false;
    if (!specEq(x.usingSpec, y.usingSpec) || !methodEq(x.methodSpec, y.methodSpec))
      return false;
  }
  if (a->cases.size() != b->cases.size()) return false;
  for (size_t i = 0; i < a->cases.size(); ++i) {
    if (a->cases[i].name != b->cases[i].name) return false;
    if (!fmlEq(a->cases[i].guard, b->cases[i].guard)) return false;
    if (!bodyEq(a->cases[i].body, b->cases[i].body)) return false;
  }
  if (!proofTermEq(a->scrutinee, b->scrutinee)) return false;
  if (a->withNames != b->withNames || a->targetText != b->targetText) return false;
  return bodyEq(a->body, b->body);
}

inline bool docEq(const Document& a, const Document& b) { return bodyEq(a, b); }

}  // namespace kt
