#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace kaisar;

// Printing a parsed document and parsing it again must reproduce the same
// tree, and a second print the same text: the printer output is a fixpoint
// of the grammar.
TEST_CASE("roundtrip fixpoint over the whole corpus", "[parse]") {
  for (const auto& path : kt::corpusFiles()) {
    INFO(path);
    DiagnosticBag d1;
    Document doc = parseDocument(kt::slurp(path), d1);
    REQUIRE_FALSE(d1.hasErrors());

    std::string printed = prettyPrint(doc);
    DiagnosticBag d2;
    Document again = parseDocument(printed, d2);
    INFO(printed);
    REQUIRE_FALSE(d2.hasErrors());
    CHECK(kt::docEq(doc, again));
    CHECK(prettyPrint(again) == printed);
  }
}

TEST_CASE("term grammar precedence", "[parse]") {
  DiagnosticBag d;
  // ^ binds tighter than *, * tighter than +, unary minus tighter than +
  FormulaPtr f = parseFormulaText("x + 2*y^2 = -x + y*y*2", d);
  REQUIRE(f);
  REQUIRE_FALSE(d.hasErrors());
  REQUIRE(f->kind == FormulaKind::Cmp);
  CHECK(f->left->kind == TermKind::Plus);
  CHECK(f->left->rhs->kind == TermKind::Times);
  CHECK(f->left->rhs->rhs->kind == TermKind::Power);
  CHECK(kt::polyEqTerm(f->left, f->left));
  // both sides differ as trees but the intent is checkable by normalization
  CHECK(kt::polyEqTerm(parseFormulaText("2*y^2 = 0", d)->left,
                       parseFormulaText("y*y*2 = 0", d)->left));
}

TEST_CASE("formula connectives and comparisons", "[parse]") {
  DiagnosticBag d;
  FormulaPtr f = parseFormulaText("x >= 0 & y > 1 | z = 2 -> w <= 3", d);
  REQUIRE(f);
  REQUIRE_FALSE(d.hasErrors());
  // -> is loosest, then |, then &
  REQUIRE(f->kind == FormulaKind::Imply);
  REQUIRE(f->child->kind == FormulaKind::Or);
  REQUIRE(f->child->child->kind == FormulaKind::And);
  CHECK(f->child2->op == CmpOp::Le);
}

TEST_CASE("game syntax parses inside box formulas", "[parse]") {
  DiagnosticBag d;
  FormulaPtr f = parseFormulaText(
      "[x := 0; {x := 1; ++ x := 2;}; {x' = 1 & x <= 5}; {?(x > 0)}^@;] x > 0", d);
  REQUIRE(f);
  REQUIRE_FALSE(d.hasErrors());
  REQUIRE(f->kind == FormulaKind::Box);
  REQUIRE(f->game->kind == GameKind::Seq);
  REQUIRE(f->game->children.size() == 4);
  CHECK(f->game->children[0]->kind == GameKind::Assign);
  CHECK(f->game->children[1]->kind == GameKind::Choice);
  CHECK(f->game->children[2]->kind == GameKind::Ode);
  CHECK(f->game->children[3]->kind == GameKind::Dual);
}

TEST_CASE("statement forms survive printing", "[parse]") {
  // one of each construct, checked by the same fixpoint property so the
  // expectations cannot drift from the grammar
  const char* docs[] = {
      "x := *;\n?bounds:(x >= 0 & x <= 1);\n",
      "switch {\n  case hi:(x >= 0) => y := 1;\n  case lo:(x <= 1) => y := 2;\n}\n",
      "{?bit:(x = 0); ++ ?bit:(x = 1);}\nswitch (bit) {\n  case (x = 0) => y := 1;\n  case (x = 1) => y := 2;\n}\n",
      "for (i := 0; !inv:(i >= 0); ?(i <= 10); i := i + 1) {\n  x := x + i;\n}\n",
      "/++ g := x + 1; !gp:(g > x); ++/\n",
      "/-- y := 3; --/\n",
      "{x' = v, v' = -9/2 & ?grav:(v >= -40) & !up:(x >= 0) by induction};\n",
      "{t' = 1 & ?dur:(t := T)};\n",
      "note both = andI(a, b);\n",
      "let sq(u) = u*u;\nlet safe(p) <-> p >= 0;\n",
      "print(x + 1);\n",
      "mid:\n",
  };
  for (const char* src : docs) {
    INFO(src);
    DiagnosticBag d1;
    Document doc = parseDocument(src, d1);
    REQUIRE_FALSE(d1.hasErrors());
    std::string printed = prettyPrint(doc);
    DiagnosticBag d2;
    Document again = parseDocument(printed, d2);
    INFO(printed);
    REQUIRE_FALSE(d2.hasErrors());
    CHECK(kt::docEq(doc, again));
    CHECK(prettyPrint(again) == printed);
  }
}

TEST_CASE("parse errors carry the offending location", "[parse]") {
  DiagnosticBag d;
  parseDocument("x := 1;\ny := ;\n", d);
  REQUIRE(d.hasErrors());
  CHECK(kt::firstErrorLine(d) == 2);
}

TEST_CASE("labeled references parse as located terms", "[parse]") {
  DiagnosticBag d;
  FormulaPtr f = parseFormulaText("x@final = x@init + 3", d);
  REQUIRE(f);
  REQUIRE(f->left->kind == TermKind::Located);
  CHECK(f->left->name == "final");
  CHECK(f->left->lhs->var.base == "x");
  FormulaPtr g = parseFormulaText("v@ode(T) >= 0", d);
  REQUIRE(g);
  REQUIRE(g->left->kind == TermKind::Located);
  REQUIRE(g->left->args.size() == 1);
  CHECK(g->left->args[0]->var.base == "T");
}
