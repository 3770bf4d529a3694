#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"

using namespace kaisar;

namespace {

TermPtr term(const std::string& src) {
  DiagnosticBag d;
  FormulaPtr f = parseFormulaText(src + " = 0", d);
  REQUIRE(f);
  REQUIRE_FALSE(d.hasErrors());
  return f->left;
}

}  // namespace

TEST_CASE("normalization identifies equal polynomials", "[poly]") {
  // hand-expanded pairs
  CHECK(kt::polyEqTerm(term("(x + y)^2"), term("x^2 + 2*x*y + y^2")));
  CHECK(kt::polyEqTerm(term("(x - 1)*(x + 1)"), term("x^2 - 1")));
  CHECK(kt::polyEqTerm(term("2*(x + 3)/2"), term("x + 3")));
  CHECK(kt::polyEqTerm(term("x - x"), term("0")));
  CHECK(kt::polyEqTerm(term("(a + b)^3"),
                       term("a^3 + 3*a^2*b + 3*a*b^2 + b^3")));
  CHECK_FALSE(kt::polyEqTerm(term("(x + y)^2"), term("x^2 + y^2")));
  CHECK_FALSE(kt::polyEqTerm(term("x"), term("y")));
}

TEST_CASE("rational functions cancel common factors", "[poly]") {
  CHECK(kt::polyEqTerm(term("(x^2 - 1)/(x - 1)"), term("x + 1")));
  CHECK(kt::polyEqTerm(term("(2*x)/(4)"), term("x/2")));
  CHECK(kt::polyEqTerm(term("1/x + 1/y"), term("(x + y)/(x*y)")));
}

TEST_CASE("exact coefficients survive normalization", "[poly]") {
  // 1/3 + 1/6 = 1/2, exactly
  RatFunc r = termToRatFunc(term("x/3 + x/6"));
  RatFunc half = termToRatFunc(term("x/2"));
  CHECK((r - half).num.isZero());
  // decimal literals are exact rationals
  CHECK(parseRational("1.5") == Rational(3, 2));
  CHECK(parseRational("0.125") == Rational(1, 8));
  CHECK(parseRational("007") == Rational(7));
}

TEST_CASE("power terms need constant exponents", "[poly]") {
  CHECK_THROWS_AS(termToRatFunc(term("x^y")), PolyError);
  CHECK(kt::polyEqTerm(term("x^0"), term("1")));
  CHECK(kt::polyEqTerm(term("x^1"), term("x")));
}

TEST_CASE("located terms have no polynomial form", "[poly]") {
  CHECK_THROWS_AS(termToRatFunc(term("x@mid")), PolyError);
}

// Normalization agrees with exact evaluation: if two terms normalize equal,
// they evaluate equal at every rational point (and if not, some point
// separates them).
TEST_CASE("normalization agrees with rational evaluation", "[poly]") {
  std::mt19937 rng(20260814);
  std::uniform_int_distribution<int> num(-9, 9);
  std::uniform_int_distribution<int> den(1, 5);

  const std::pair<const char*, const char*> pairs[] = {
      {"(x + y)^2 - (x - y)^2", "4*x*y"},
      {"(x + 1)^4", "x^4 + 4*x^3 + 6*x^2 + 4*x + 1"},
      {"x*(y + z)", "x*y + x*z"},
      {"(x + y)^2", "x^2 + y^2"},  // unequal: must be separated
      {"x^3", "x*x"},              // unequal
  };
  for (const auto& [sa, sb] : pairs) {
    TermPtr a = term(sa);
    TermPtr b = term(sb);
    bool eq = kt::polyEqTerm(a, b);
    bool separated = false;
    for (int i = 0; i < 200; ++i) {
      std::map<Var, Rational> env;
      std::set<Var> vs;
      collectVars(a, vs);
      collectVars(b, vs);
      for (const Var& v : vs) env[v] = Rational(num(rng), den(rng));
      auto va = evalTerm(a, env);
      auto vb = evalTerm(b, env);
      REQUIRE(va.has_value());
      REQUIRE(vb.has_value());
      if (*va != *vb) separated = true;
      if (eq) CHECK(*va == *vb);
    }
    if (!eq) CHECK(separated);
  }
}

TEST_CASE("polynomial back to term and back is stable", "[poly]") {
  TermPtr t = term("3*x^2*y - x/2 + 7");
  RatFunc r = termToRatFunc(t);
  TermPtr back = polynomialToTerm(r.num);
  // denominator of the original is constant, so compare scaled numerators
  CHECK(kt::polyEqTerm(mkBin(TermKind::Times, back, mkNum(Rational(1))),
                       mkBin(TermKind::Times, t, polynomialToTerm(r.den))));
}
