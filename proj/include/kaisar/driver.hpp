#pragma once

// Driver: runs the whole pipeline (parse -> expand -> rename -> check) over
// proof documents, renders conclusions, answers proves queries, and emits
// the line-count metrics table.  The command-line tool is a thin shell over
// runMain(); keeping the logic here makes it testable in-process.

#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <regex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "check.hpp"
#include "parse.hpp"
#include "print.hpp"
#include "refine.hpp"
#include "reify.hpp"
#include "ssa.hpp"

namespace kaisar {

enum class RunMode { Check, Conclusion, Proves, Metrics };

struct RunConfig {
  std::vector<std::string> inputs;
  RunMode mode = RunMode::Check;
  std::string provesText;  // target formula for RunMode::Proves
  std::string solverPath;  // external solver; empty = consult KAISAR_SOLVER
  std::string deltaText;   // default slack for `by guard`, e.g. "1/100"
  bool dumpSsa = false;
  bool dumpLabels = false;
  bool dumpObligations = false;
};

// Mirrors the process exit code: 0 everything proved, 1 some obligation or
// query failed, 2 the invocation itself was wrong.
enum class RunStatus { Ok = 0, Failed = 1, UsageError = 2 };

struct FileReport {
  std::string path;
  RunStatus status = RunStatus::Ok;
  std::string out;  // standard-output payload, deterministic
  std::string err;  // diagnostics and (in metrics mode) timings
};

namespace detail {

// "1/2", "0.25", "3" -> rational.  Throws on malformed input.
inline Rational rationalFromText(const std::string& text) {
  auto slash = text.find('/');
  if (slash == std::string::npos) return parseRational(text);
  Rational num = parseRational(text.substr(0, slash));
  Rational den = parseRational(text.substr(slash + 1));
  if (den == 0) throw std::runtime_error("zero denominator");
  return num / den;
}

// Line-count metrics in the shape of the proof-metrics table: total
// non-blank lines, model lines, proof lines, and lines carrying a `using`
// clause.  A line that mixes game syntax with an embedded assertion (a for
// header or an annotated differential equation) counts toward both model
// and proof, so model + proof may exceed the total.
struct LineMetrics {
  int lines = 0, model = 0, proof = 0, assump = 0;
};

inline LineMetrics measure(const std::string& text) {
  static const std::regex usingRe("\\busing\\b");
  static const std::regex labelRe("^[A-Za-z_][A-Za-z0-9_]*:$");
  LineMetrics m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    std::string t = line.substr(b, e - b + 1);
    ++m.lines;
    bool proof = t[0] == '!' || t.rfind("note", 0) == 0 || t.rfind("print", 0) == 0 ||
                 t.rfind("/++", 0) == 0 || t.rfind("++/", 0) == 0 ||
                 std::regex_match(t, labelRe);
    bool model = !proof;
    if (model && t.find('!') != std::string::npos) proof = true;
    if (model) ++m.model;
    if (proof) ++m.proof;
    if (std::regex_search(t, usingRe)) ++m.assump;
  }
  return m;
}

inline std::string metricsHeader() {
  std::ostringstream os;
  os << std::left << std::setw(34) << "name" << std::right << std::setw(7) << "lines"
     << std::setw(7) << "model" << std::setw(7) << "proof" << std::setw(7) << "assump"
     << '\n';
  return os.str();
}

inline std::string metricsRow(const std::string& path, const LineMetrics& m) {
  std::string name = path;
  auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  std::ostringstream os;
  os << std::left << std::setw(34) << name << std::right << std::setw(7) << m.lines
     << std::setw(7) << m.model << std::setw(7) << m.proof << std::setw(7) << m.assump
     << '\n';
  return os.str();
}

inline std::string fileStem(const std::string& path) {
  auto slash = path.find_last_of('/');
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = name.find_last_of('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

}  // namespace detail

inline FileReport processFile(const std::string& path, const RunConfig& cfg) {
  FileReport rep;
  rep.path = path;

  std::ifstream in(path);
  if (!in) {
    rep.status = RunStatus::UsageError;
    rep.err = "kaisar: cannot open '" + path + "'\n";
    return rep;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  // Metrics: the counts are lexical, but the file is still checked so the
  // per-obligation timings (appended to the diagnostics channel, where
  // nondeterminism is allowed) describe a real run.
  if (cfg.mode == RunMode::Metrics)
    rep.out = detail::metricsRow(path, detail::measure(text));

  DiagnosticBag diags;
  auto bail = [&]() {
    rep.status = RunStatus::Failed;
    rep.err += diags.render(path);
    return rep;
  };

  Document doc = parseDocument(text, diags);
  if (diags.hasErrors()) return bail();

  Definitions defs;
  Document expanded = expandDocument(doc, defs, diags);
  if (diags.hasErrors()) return bail();

  std::optional<ElabResult> elab;
  try {
    elab = ssaTransform(expanded, diags);
  } catch (const CheckAbort&) {
  }
  if (!elab || diags.hasErrors()) return bail();

  CheckConfig ck;
  ck.arith.solverPath = cfg.solverPath;
  ck.arith.smtStem = detail::fileStem(path);
  if (!cfg.deltaText.empty())
    ck.defaultGuardDelta = mkNum(detail::rationalFromText(cfg.deltaText));

  CheckResult res;
  try {
    res = checkDocument(*elab, diags, ck);
  } catch (const CheckAbort&) {
  }
  if (diags.hasErrors()) return bail();

  if (cfg.mode == RunMode::Metrics) {
    long long total = 0;
    for (const auto& ob : res.obligations) {
      rep.err += path + ": " + ob.label + " (line " + std::to_string(ob.span.line) +
                 "): " + std::to_string(ob.micros) + " us\n";
      total += ob.micros;
    }
    rep.err += path + ": " + std::to_string(res.obligations.size()) +
               " obligations, " + std::to_string(total) + " us total\n";
    return rep;
  }

  if (cfg.dumpSsa) {
    rep.out += "-- renamed " + path + "\n";
    rep.out += prettyPrint(elab->doc, {.showVariants = true});
  }
  if (cfg.dumpLabels) {
    rep.out += "-- labels " + path + "\n";
    for (const auto& [name, info] : elab->labels) {
      rep.out += name;
      if (!info.params.empty()) {
        rep.out += "(";
        for (size_t i = 0; i < info.params.size(); ++i)
          rep.out += (i ? ", " : "") + info.params[i];
        rep.out += ")";
      }
      rep.out += " at line " + std::to_string(info.span.line) + "\n";
    }
  }
  if (cfg.dumpObligations) {
    rep.out += "-- obligations " + path + "\n";
    for (const auto& ob : res.obligations) {
      rep.out += ob.label + " at line " + std::to_string(ob.span.line) + ": " +
                 prettyPrint(ob.goal.conclusion, {.showVariants = true}) + " [" +
                 std::to_string(ob.goal.assumptions.size()) + " assumptions]\n";
    }
  }

  for (const auto& p : res.printed) rep.out += p + "\n";

  // Commands embedded in the document.
  auto runProves = [&](const Statement& st, const FormulaPtr& target) {
    Conclusion c = reify(expanded, *elab, res, st.withNames);
    ProvesResult pr = proves(c, target, ck.arith);
    if (!pr.ok) {
      diags.error(pr.where.known() ? pr.where : st.span,
                  "proves '" + st.name + "' failed: " + pr.reason);
      rep.status = RunStatus::Failed;
    }
  };
  for (const auto& st : expanded) {
    if (st->kind == StmtKind::Conclusion) {
      Conclusion c = reify(expanded, *elab, res, st->withNames);
      rep.out += st->name + ": " + renderConclusion(c) + "\n";
    } else if (st->kind == StmtKind::Proves) {
      DiagnosticBag tdiags;
      FormulaPtr target = st->targetFml
                              ? st->targetFml
                              : parseFormulaText(st->targetText, tdiags, &defs);
      if (!target || tdiags.hasErrors()) {
        diags.error(st->span, "proves '" + st->name + "': target formula does not parse");
        rep.status = RunStatus::Failed;
        continue;
      }
      runProves(*st, target);
    }
  }

  if (cfg.mode == RunMode::Conclusion) {
    Conclusion c = reify(expanded, *elab, res);
    rep.out += renderConclusion(c) + "\n";
  } else if (cfg.mode == RunMode::Proves) {
    DiagnosticBag tdiags;
    FormulaPtr target = parseFormulaText(cfg.provesText, tdiags, &defs);
    if (!target || tdiags.hasErrors()) {
      rep.status = RunStatus::UsageError;
      rep.err += "kaisar: target formula does not parse: " + cfg.provesText + "\n";
      return rep;
    }
    Conclusion c = reify(expanded, *elab, res);
    ProvesResult pr = proves(c, target, ck.arith);
    if (!pr.ok) {
      diags.error(pr.where, "proves failed: " + pr.reason);
      rep.status = RunStatus::Failed;
    }
  }

  if (diags.hasErrors()) rep.err += diags.render(path);
  return rep;
}

// Timings go to the diagnostics channel and only in metrics mode, keeping
// standard output byte-identical across runs.
inline int runMain(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.inputs.empty()) {
    err << "kaisar: no input files\n";
    return 2;
  }
  if (cfg.mode == RunMode::Proves && cfg.provesText.empty()) {
    err << "kaisar: proves mode needs a target formula\n";
    return 2;
  }
  RunConfig eff = cfg;
  if (eff.solverPath.empty()) {
    if (const char* env = std::getenv("KAISAR_SOLVER")) eff.solverPath = env;
  }
  if (!eff.deltaText.empty()) {
    try {
      Rational r = detail::rationalFromText(eff.deltaText);
      (void)r;
    } catch (const std::exception&) {
      err << "kaisar: not a rational: --delta " << eff.deltaText << "\n";
      return 2;
    }
  }

  std::vector<std::future<FileReport>> futures;
  futures.reserve(eff.inputs.size());
  for (const auto& p : eff.inputs)
    futures.push_back(std::async(std::launch::async,
                                 [&eff, p] { return processFile(p, eff); }));

  if (eff.mode == RunMode::Metrics) out << detail::metricsHeader();
  int worst = 0;
  for (auto& f : futures) {
    FileReport rep = f.get();
    out << rep.out;
    err << rep.err;
    worst = std::max(worst, static_cast<int>(rep.status));
  }
  return worst;
}

}  // namespace kaisar
