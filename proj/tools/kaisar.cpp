// Command-line front end for the Kaisar proof checker.
//
//   kaisar check file.kaisar ...          verify every assertion (default)
//   kaisar conclusion file.kaisar ...     print the theorem each proof proves
//   kaisar proves "<formula>" file ...    check the strategy against a game
//   kaisar metrics file.kaisar ...        line counts; timings on stderr
//
// The mode word is optional; --conclusion / --proves / --metrics do the
// same thing. Exit 0 when everything is proved, 1 when some obligation or
// query fails, 2 when the invocation itself is wrong.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kaisar/driver.hpp"

int main(int argc, char** argv) {
  kaisar::RunConfig cfg;
  bool wantConclusion = false;
  bool wantMetrics = false;

  CLI::App app{"Checker for Kaisar proofs of constructive hybrid-game strategies"};
  app.add_option("inputs", cfg.inputs, "proof documents (.kaisar)");
  app.add_flag("--conclusion", wantConclusion, "print each file's proved theorem");
  app.add_option("--proves", cfg.provesText,
                 "check each strategy against this game formula");
  app.add_flag("--metrics", wantMetrics,
               "print line-count metrics; obligation timings go to stderr");
  app.add_option("--solver", cfg.solverPath,
                 "external SMT solver for goals the built-in backend cannot decide "
                 "(default: $KAISAR_SOLVER)");
  app.add_option("--delta", cfg.deltaText,
                 "default slack for `by guard` exit bounds, e.g. 1/100");
  app.add_flag("--dump-ssa", cfg.dumpSsa, "print the renamed document after elaboration");
  app.add_flag("--dump-labels", cfg.dumpLabels, "print the label table");
  app.add_flag("--dump-obligations", cfg.dumpObligations,
               "print every arithmetic obligation");
  app.footer("Exit codes: 0 all proved, 1 a proof or query failed, 2 bad invocation.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // 0: --help / --version
  }

  // Optional leading mode word, as in `kaisar conclusion file.kaisar`.
  int modes = 0;
  if (!cfg.inputs.empty()) {
    const std::string w = cfg.inputs.front();
    if (w == "check") {
      cfg.inputs.erase(cfg.inputs.begin());
    } else if (w == "conclusion" || w == "metrics" || w == "proves") {
      cfg.inputs.erase(cfg.inputs.begin());
      if (w == "conclusion") cfg.mode = kaisar::RunMode::Conclusion;
      if (w == "metrics") cfg.mode = kaisar::RunMode::Metrics;
      if (w == "proves") {
        cfg.mode = kaisar::RunMode::Proves;
        if (cfg.provesText.empty()) {
          if (cfg.inputs.empty()) {
            std::cerr << "kaisar: proves needs a target formula\n";
            return 2;
          }
          cfg.provesText = cfg.inputs.front();
          cfg.inputs.erase(cfg.inputs.begin());
        }
      }
      ++modes;
    }
  }
  if (wantConclusion) {
    cfg.mode = kaisar::RunMode::Conclusion;
    ++modes;
  }
  if (wantMetrics) {
    cfg.mode = kaisar::RunMode::Metrics;
    ++modes;
  }
  if (!cfg.provesText.empty() && cfg.mode != kaisar::RunMode::Proves) {
    cfg.mode = kaisar::RunMode::Proves;
    ++modes;
  }
  if (modes > 1) {
    std::cerr << "kaisar: pick one of check, conclusion, proves, metrics\n";
    return 2;
  }

  return kaisar::runMain(cfg, std::cout, std::cerr);
}
