#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "kaisar/fm.hpp"

using namespace kaisar;

namespace {

FormulaPtr fml(const std::string& src) {
  DiagnosticBag d;
  FormulaPtr f = parseFormulaText(src, d);
  REQUIRE(f);
  REQUIRE_FALSE(d.hasErrors());
  return f;
}

// ---------------------------------------------------------------------------
// Brute-force feasibility oracle by vertex enumeration.
//
// A system of rows `a.x + c REL 0` over d variables is decided by lifting
// strict rows with one slack variable s (a.x + c - s >= 0), bounding the
// region with a large box plus 0 <= s <= 1, and maximizing s over the
// vertices of the resulting bounded polytope: every vertex is the solution
// of D = d+1 active hyperplanes, so enumerating all D-subsets of rows and
// keeping the points that satisfy everything finds the optimum exactly.
// The system is feasible iff some vertex satisfies all closed rows and,
// when strict rows exist, attains s > 0.  The box is far larger than any
// vertex coordinate that a system with single-digit integer coefficients
// can produce, so it never cuts off a witness.

struct OracleRow {
  std::vector<Rational> coeffs;  // over x1..xd, s
  Rational constant;
  bool strict = false;  // row must be > 0 (only used for satisfaction)
  bool eq = false;
};

bool solveSquare(std::vector<std::vector<Rational>> m, std::vector<Rational> rhs,
                 std::vector<Rational>& out) {
  const size_t n = m.size();
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    while (piv < n && m[piv][col] == 0) ++piv;
    if (piv == n) return false;
    std::swap(m[piv], m[col]);
    std::swap(rhs[piv], rhs[col]);
    for (size_t r = 0; r < n; ++r) {
      if (r == col || m[r][col] == 0) continue;
      Rational f = m[r][col] / m[col][col];
      for (size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  out.resize(n);
  for (size_t i = 0; i < n; ++i) out[i] = rhs[i] / m[i][i];
  return true;
}

enum class Feas { Yes, No };

Feas oracleFeasible(const std::vector<LinearConstraint>& rows, size_t d) {
  const Rational M(1000000);
  const size_t D = d + 1;  // + slack
  bool anyStrict = false;

  std::vector<OracleRow> sys;
  for (const auto& r : rows) {
    OracleRow o;
    o.coeffs.assign(D, Rational(0));
    for (size_t i = 0; i < d; ++i) o.coeffs[i] = i < r.coeffs.size() ? r.coeffs[i] : 0;
    o.constant = r.constant;
    if (r.rel == LinRel::Eq) {
      o.eq = true;
    } else if (r.rel == LinRel::Gt) {
      o.coeffs[d] = -1;  // a.x + c - s >= 0
      o.strict = true;
      anyStrict = true;
    }
    sys.push_back(o);
  }
  // box walls and the slack bounds
  for (size_t i = 0; i < d; ++i) {
    OracleRow lo, hi;
    lo.coeffs.assign(D, Rational(0));
    hi.coeffs.assign(D, Rational(0));
    lo.coeffs[i] = 1;
    lo.constant = M;  // x_i + M >= 0
    hi.coeffs[i] = -1;
    hi.constant = M;  // M - x_i >= 0
    sys.push_back(lo);
    sys.push_back(hi);
  }
  {
    OracleRow s0, s1;
    s0.coeffs.assign(D, Rational(0));
    s1.coeffs.assign(D, Rational(0));
    s0.coeffs[d] = 1;  // s >= 0
    s1.coeffs[d] = -1;
    s1.constant = 1;  // 1 - s >= 0
    sys.push_back(s0);
    sys.push_back(s1);
  }

  auto satisfiedClosed = [&](const std::vector<Rational>& pt) {
    for (const auto& o : sys) {
      Rational v = o.constant;
      for (size_t i = 0; i < D; ++i) v += o.coeffs[i] * pt[i];
      if (o.eq ? v != 0 : v < 0) return false;
    }
    return true;
  };

  const size_t n = sys.size();
  std::vector<size_t> pick(D);
  std::optional<Rational> bestS;
  // enumerate all D-subsets
  std::function<void(size_t, size_t)> enumerate = [&](size_t start, size_t k) {
    if (k == D) {
      std::vector<std::vector<Rational>> m(D, std::vector<Rational>(D));
      std::vector<Rational> rhs(D);
      for (size_t i = 0; i < D; ++i) {
        for (size_t j = 0; j < D; ++j) m[i][j] = sys[pick[i]].coeffs[j];
        rhs[i] = -sys[pick[i]].constant;
      }
      std::vector<Rational> pt;
      if (solveSquare(std::move(m), std::move(rhs), pt) && satisfiedClosed(pt)) {
        if (!bestS || pt[d] > *bestS) bestS = pt[d];
      }
      return;
    }
    for (size_t i = start; i + (D - k) <= n; ++i) {
      pick[k] = i;
      enumerate(i + 1, k + 1);
    }
  };
  enumerate(0, 0);

  if (!bestS) return Feas::No;
  if (anyStrict && *bestS <= 0) return Feas::No;
  return Feas::Yes;
}

}  // namespace

TEST_CASE("linear feasibility agrees with vertex enumeration on 200 random systems",
          "[arith][fm]") {
  std::mt19937 rng(977113);
  std::uniform_int_distribution<int> coeff(-4, 4);
  std::uniform_int_distribution<int> dimd(1, 3);
  std::uniform_int_distribution<int> rowsd(1, 6);
  std::uniform_int_distribution<int> reld(0, 5);

  int feasible = 0, infeasible = 0;
  for (int it = 0; it < 200; ++it) {
    size_t d = static_cast<size_t>(dimd(rng));
    size_t m = static_cast<size_t>(rowsd(rng));
    std::vector<LinearConstraint> rows(m);
    for (auto& r : rows) {
      r.coeffs.resize(d);
      for (auto& c : r.coeffs) c = Rational(coeff(rng));
      r.constant = Rational(coeff(rng));
      int k = reld(rng);  // bias toward inequalities, as real goals have
      r.rel = k == 0 ? LinRel::Eq : (k <= 3 ? LinRel::Ge : LinRel::Gt);
    }

    FourierMotzkin fm(d);
    FmResult got = fm.solve(rows, true);
    REQUIRE(got.kind != FmResult::Kind::Unknown);

    Feas want = oracleFeasible(rows, d);
    INFO("system " << it);
    if (want == Feas::Yes) {
      ++feasible;
      REQUIRE(got.kind == FmResult::Kind::Feasible);
      // the produced sample must satisfy every row
      REQUIRE(got.sample.size() >= d);
      for (const auto& r : rows) {
        Rational v = r.constant;
        for (size_t i = 0; i < d; ++i) v += r.coeffs[i] * got.sample[i];
        switch (r.rel) {
          case LinRel::Eq: CHECK(v == 0); break;
          case LinRel::Ge: CHECK(v >= 0); break;
          case LinRel::Gt: CHECK(v > 0); break;
        }
      }
    } else {
      ++infeasible;
      REQUIRE(got.kind == FmResult::Kind::Infeasible);
    }
  }
  // both outcomes must actually be exercised
  CHECK(feasible > 30);
  CHECK(infeasible > 30);
}

TEST_CASE("hereditary Harrop fragment", "[arith]") {
  CHECK(checkHereditaryHarrop(fml("x > 0")));
  CHECK(checkHereditaryHarrop(fml("x > 0 & y = 1")));
  CHECK_FALSE(checkHereditaryHarrop(fml("x = 1 | x = 0")));
  // disjunction is fine on the assuming side
  CHECK(checkHereditaryHarrop(fml("(x = 1 | x = 0) -> x >= 0")));
  CHECK_FALSE(checkHereditaryHarrop(fml("x > 0 -> (y = 1 | y = 2)")));
  // polarity flips again under a nested implication
  CHECK_FALSE(checkHereditaryHarrop(fml("((a = 0 | b = 0) -> c = 1) -> d = 2")));
  CHECK(checkHereditaryHarrop(fml("(a = 0 -> (b = 0 | c = 0)) -> d = 2")));
}

TEST_CASE("goal checker proves and refutes", "[arith]") {
  GoalChecker gc;

  Goal ok;
  ok.assumptions = {{"a", fml("x > 1")}, {"b", fml("y >= x")}};
  ok.conclusion = fml("y > 0");
  CHECK(gc.check(ok).verdict == Verdict::Valid);

  Goal bad;
  bad.assumptions = {{"a", fml("x >= 0")}};
  bad.conclusion = fml("x > 0");
  VerdictCertificate cert = gc.check(bad);
  REQUIRE(cert.verdict == Verdict::Invalid);
  REQUIRE(cert.hasCounterexample);
  // the counterexample must really violate the goal
  std::map<Var, Rational> env = cert.counterexample;
  auto assume = evalFormula(bad.assumptions[0].second, env);
  auto concl = evalFormula(bad.conclusion, env);
  REQUIRE(assume.has_value());
  REQUIRE(concl.has_value());
  CHECK(*assume);
  CHECK_FALSE(*concl);
}

TEST_CASE("nonlinear certificates through pairwise products", "[arith]") {
  GoalChecker gc;
  Goal g;
  g.assumptions = {{"a", fml("x > 2")}, {"b", fml("y > 3")}};
  g.conclusion = fml("x*y > 6");
  CHECK(gc.check(g).verdict == Verdict::Valid);

  Goal sq;
  sq.assumptions = {{"a", fml("x >= 3")}};
  sq.conclusion = fml("x^2 >= 9");
  CHECK(gc.check(sq).verdict == Verdict::Valid);
}

TEST_CASE("division needs a sign for the denominator", "[arith]") {
  GoalChecker gc;

  // T > 0 is visible but unselected: the denominator certificate must find
  // it among the ambient facts
  Goal g;
  g.assumptions = {{"v", fml("v = (d - x)/T")}, {"pos", fml("d - x >= 0")}};
  g.denFacts = {fml("T > 0"), fml("d - x >= 0"), fml("v = (d - x)/T")};
  g.conclusion = fml("v*T <= d - x");
  CHECK(gc.check(g).verdict == Verdict::Valid);

  // without any sign knowledge the goal must not be claimed valid
  Goal h;
  h.assumptions = {{"v", fml("v = 1/T")}};
  h.denFacts = {fml("v = 1/T")};
  h.conclusion = fml("v*T = 1");
  CHECK(gc.check(h).verdict != Verdict::Valid);
}

TEST_CASE("rcf without prop shape is rejected, never proved", "[arith]") {
  GoalChecker gc;
  Goal g;
  g.method = Method::Rcf;
  g.conclusion = fml("x = 1 | x = 0");
  VerdictCertificate cert = gc.check(g);
  CHECK(cert.verdict == Verdict::Invalid);
  CHECK(cert.detail.find("Harrop") != std::string::npos);
}

TEST_CASE("exact formula evaluation", "[arith]") {
  std::map<Var, Rational> env{{Var{"x", -1}, Rational(1, 3)},
                              {Var{"y", -1}, Rational(-2)}};
  CHECK(evalFormula(fml("3*x = 1"), env) == std::optional<bool>(true));
  CHECK(evalFormula(fml("x > y"), env) == std::optional<bool>(true));
  CHECK(evalFormula(fml("x*y = -2/3"), env) == std::optional<bool>(true));
  CHECK(evalFormula(fml("x/ (y + 2) = 0"), env) == std::nullopt);  // division by zero
}
