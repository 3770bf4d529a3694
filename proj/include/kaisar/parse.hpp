#pragma once

// Recursive-descent parser for proof documents, formulas, and games.
//
// The grammar has two ambiguities that are settled by bounded lookahead or
// speculation:
//   * `{` opens a block, a choice, a loop, or an ODE. We scan forward: a
//     prime token before any of `;` `?` `!` `{` `:=` means ODE.
//   * `(` in formula position groups either a formula or a term. We try the
//     formula reading first and fall back when the parenthesized content is
//     not a formula or is continued by an arithmetic operator.
//
// Hard parse errors report a diagnostic and abort the document; speculative
// attempts roll back silently.

#include <optional>
#include <string>
#include <vector>

#include "ast.hpp"
#include "ast_ops.hpp"
#include "lex.hpp"
#include "source.hpp"

namespace kaisar {

struct ParseFail {};

class Parser {
 public:
  Parser(std::vector<Token> toks, DiagnosticBag& diags, const Definitions* defs = nullptr)
      : toks_(std::move(toks)), diags_(diags), defs_(defs) {}

  Document parseDocument() {
    Document doc;
    try {
      while (!at(Tok::End)) doc.push_back(parseStatement());
    } catch (ParseFail&) {
      // diagnostic already recorded
    }
    return doc;
  }

  // Entry point for `proves` target strings and CLI-provided formulas.
  FormulaPtr parseFormulaEntry() {
    try {
      FormulaPtr f = parseFormula();
      if (!at(Tok::End)) fail(cur().span, "trailing input after formula");
      return f;
    } catch (ParseFail&) {
      return nullptr;
    }
  }

  GamePtr parseGameEntry() {
    try {
      GamePtr g = parseGame();
      if (!at(Tok::End)) fail(cur().span, "trailing input after game");
      return g;
    } catch (ParseFail&) {
      return nullptr;
    }
  }

 private:
  std::vector<Token> toks_;
  DiagnosticBag& diags_;
  const Definitions* defs_;
  size_t pos_ = 0;
  int speculating_ = 0;

  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(size_t n = 1) const {
    size_t i = pos_ + n;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at(Tok k) const { return cur().kind == k; }
  bool accept(Tok k) {
    if (at(k)) {
      ++pos_;
      return true;
    }
    return false;
  }
  Token expect(Tok k, const char* what) {
    if (!at(k)) {
      fail(cur().span, std::string("expected ") + tokName(k) + " " + what + ", found " +
                           tokName(cur().kind));
    }
    return toks_[pos_++];
  }
  [[noreturn]] void fail(SourceSpan sp, const std::string& msg) {
    if (speculating_ == 0) diags_.error(sp, msg);
    throw ParseFail{};
  }

  template <typename F>
  auto speculate(F&& f) -> std::optional<decltype(f())> {
    size_t save = pos_;
    ++speculating_;
    try {
      auto r = f();
      --speculating_;
      return r;
    } catch (ParseFail&) {
      --speculating_;
      pos_ = save;
      return std::nullopt;
    }
  }

  // ------------------------------------------------------------------ terms

  TermPtr parseTerm() { return parseAdd(); }

  TermPtr parseAdd() {
    TermPtr t = parseMul();
    while (at(Tok::Plus) || at(Tok::MinusTok)) {
      TermKind k = at(Tok::Plus) ? TermKind::Plus : TermKind::Minus;
      SourceSpan sp = cur().span;
      ++pos_;
      t = mkBin(k, t, parseMul(), SourceSpan::join(t->span, sp));
    }
    return t;
  }

  TermPtr parseMul() {
    TermPtr t = parseUnary();
    while (at(Tok::Star) || at(Tok::Slash)) {
      TermKind k = at(Tok::Star) ? TermKind::Times : TermKind::Divide;
      SourceSpan sp = cur().span;
      ++pos_;
      t = mkBin(k, t, parseUnary(), SourceSpan::join(t->span, sp));
    }
    return t;
  }

  TermPtr parseUnary() {
    if (at(Tok::MinusTok)) {
      SourceSpan sp = cur().span;
      ++pos_;
      return mkNeg(parseUnary(), sp);
    }
    return parsePostfix();
  }

  TermPtr parsePostfix() {
    TermPtr t = parsePrimary();
    while (true) {
      if (at(Tok::Caret)) {
        SourceSpan sp = cur().span;
        ++pos_;
        TermPtr e = at(Tok::MinusTok) ? parseUnary() : parsePrimary();
        t = mkBin(TermKind::Power, t, e, SourceSpan::join(t->span, sp));
      } else if (at(Tok::At)) {
        SourceSpan sp = cur().span;
        ++pos_;
        Token lbl = expect(Tok::Ident, "as label name after '@'");
        std::vector<TermPtr> args;
        if (accept(Tok::LParen)) {
          if (!at(Tok::RParen)) {
            args.push_back(parseTerm());
            while (accept(Tok::Comma)) args.push_back(parseTerm());
          }
          expect(Tok::RParen, "to close label arguments");
        }
        t = mkLocatedTerm(t, lbl.text, std::move(args), SourceSpan::join(t->span, sp));
      } else {
        return t;
      }
    }
  }

  TermPtr parsePrimary() {
    if (at(Tok::Number)) {
      Token n = toks_[pos_++];
      return mkNum(n.value, n.span);
    }
    if (at(Tok::Ident)) {
      Token id = toks_[pos_++];
      if (accept(Tok::LParen)) {
        std::vector<TermPtr> args;
        if (!at(Tok::RParen)) {
          args.push_back(parseTerm());
          while (accept(Tok::Comma)) args.push_back(parseTerm());
        }
        expect(Tok::RParen, "to close argument list");
        return mkApply(id.text, std::move(args), id.span);
      }
      return mkVar(id.text, -1, id.span);
    }
    if (accept(Tok::LParen)) {
      TermPtr t = parseTerm();
      expect(Tok::RParen, "to close parenthesized term");
      return t;
    }
    fail(cur().span, std::string("expected term, found ") + tokName(cur().kind));
  }

  // --------------------------------------------------------------- formulas

  static bool isCmpTok(Tok k) {
    return k == Tok::Eq || k == Tok::Neq || k == Tok::Le || k == Tok::Lt || k == Tok::Ge ||
           k == Tok::Gt;
  }
  static CmpOp cmpOf(Tok k) {
    switch (k) {
      case Tok::Eq: return CmpOp::Eq;
      case Tok::Neq: return CmpOp::Ne;
      case Tok::Le: return CmpOp::Le;
      case Tok::Lt: return CmpOp::Lt;
      case Tok::Ge: return CmpOp::Ge;
      default: return CmpOp::Gt;
    }
  }
  // Tokens that continue a *term* after a closing paren; if one follows a
  // parenthesized group, the group must have been a term, not a formula.
  static bool continuesTerm(Tok k) {
    return k == Tok::Plus || k == Tok::MinusTok || k == Tok::Star || k == Tok::Slash ||
           k == Tok::Caret || k == Tok::At || isCmpTok(k);
  }

  FormulaPtr parseFormula() { return parseIff(); }

  FormulaPtr parseIff() {
    FormulaPtr f = parseImply();
    while (at(Tok::DArrow)) {
      SourceSpan sp = cur().span;
      ++pos_;
      f = mkBinary(FormulaKind::Iff, f, parseImply(), SourceSpan::join(f->span, sp));
    }
    return f;
  }

  FormulaPtr parseImply() {
    FormulaPtr f = parseOr();
    if (at(Tok::Arrow)) {
      SourceSpan sp = cur().span;
      ++pos_;
      return mkBinary(FormulaKind::Imply, f, parseImply(), SourceSpan::join(f->span, sp));
    }
    return f;
  }

  FormulaPtr parseOr() {
    FormulaPtr f = parseAnd();
    while (at(Tok::Bar)) {
      SourceSpan sp = cur().span;
      ++pos_;
      f = mkBinary(FormulaKind::Or, f, parseAnd(), SourceSpan::join(f->span, sp));
    }
    return f;
  }

  FormulaPtr parseAnd() {
    FormulaPtr f = parseAtomFormula();
    while (at(Tok::Amp)) {
      SourceSpan sp = cur().span;
      ++pos_;
      f = mkBinary(FormulaKind::And, f, parseAtomFormula(), SourceSpan::join(f->span, sp));
    }
    return f;
  }

  // Coerce a term standing alone in formula position into a formula; only
  // applications (and located applications) can stand for predicates.
  FormulaPtr coerceToFormula(const TermPtr& t) {
    if (t->kind == TermKind::Apply) {
      return mkPredApply(t->name, t->args, t->span);
    }
    if (t->kind == TermKind::Located) {
      FormulaPtr inner = coerceToFormula(t->lhs);
      return mkLocatedFormula(inner, t->name, t->args, t->span);
    }
    fail(t->span, "expected a comparison or predicate, found a bare term");
  }

  FormulaPtr parseAtomFormula() {
    SourceSpan sp = cur().span;
    if (accept(Tok::KwTrue)) return mkTrue(sp);
    if (accept(Tok::KwFalse)) return mkFalse(sp);
    if (accept(Tok::Bang)) return mkUnary(FormulaKind::Not, parseAtomFormula(), sp);
    if (at(Tok::LBracket)) {
      ++pos_;
      GamePtr g = parseGame();
      expect(Tok::RBracket, "to close box modality");
      FormulaPtr post = parseAtomFormula();
      return mkModal(FormulaKind::Box, g, post, sp);
    }
    if (at(Tok::LParen)) {
      // Speculative formula-in-parens reading.
      auto attempt = speculate([&]() -> FormulaPtr {
        ++pos_;
        FormulaPtr inner = parseFormula();
        expect(Tok::RParen, "to close parenthesized formula");
        if (continuesTerm(cur().kind)) fail(cur().span, "term context");
        return inner;
      });
      if (attempt) {
        // Allow a located suffix on a parenthesized formula.
        FormulaPtr f = *attempt;
        while (at(Tok::At)) {
          ++pos_;
          Token lbl = expect(Tok::Ident, "as label name after '@'");
          std::vector<TermPtr> args;
          if (accept(Tok::LParen)) {
            if (!at(Tok::RParen)) {
              args.push_back(parseTerm());
              while (accept(Tok::Comma)) args.push_back(parseTerm());
            }
            expect(Tok::RParen, "to close label arguments");
          }
          f = mkLocatedFormula(f, lbl.text, std::move(args), sp);
        }
        return f;
      }
      return parseComparison();
    }
    return parseComparison();
  }

  FormulaPtr parseComparison() {
    TermPtr l = parseTerm();
    if (isCmpTok(cur().kind)) {
      CmpOp op = cmpOf(cur().kind);
      SourceSpan sp = cur().span;
      ++pos_;
      TermPtr r = parseTerm();
      return mkCmp(op, l, r, SourceSpan::join(l->span, sp));
    }
    return coerceToFormula(l);
  }

  // ------------------------------------------------------------------ games

  bool startsGameAtom() const {
    return at(Tok::Ident) || at(Tok::Question) || at(Tok::LBrace);
  }

  GamePtr parseGame() {
    SourceSpan sp = cur().span;
    std::vector<GamePtr> branches;
    branches.push_back(parseGameSeq());
    while (accept(Tok::ChoiceOp)) branches.push_back(parseGameSeq());
    if (branches.size() == 1) return branches[0];
    return mkChoiceGame(std::move(branches), sp);
  }

  GamePtr parseGameSeq() {
    SourceSpan sp = cur().span;
    std::vector<GamePtr> parts;
    parts.push_back(parseGamePostfix());
    while (true) {
      if (accept(Tok::Semi)) {
        if (startsGameAtom()) {
          parts.push_back(parseGamePostfix());
          continue;
        }
        break;  // trailing separator
      }
      break;
    }
    if (parts.size() == 1) return parts[0];
    return mkSeqGame(std::move(parts), sp);
  }

  GamePtr parseGamePostfix() {
    GamePtr g = parseGameAtom();
    while (true) {
      if (at(Tok::Star)) {
        ++pos_;
        g = mkRepeatGame(g, g->span);
      } else if (at(Tok::DualOp)) {
        ++pos_;
        g = mkDualGame(g, g->span);
      } else {
        return g;
      }
    }
  }

  GamePtr parseGameAtom() {
    SourceSpan sp = cur().span;
    if (at(Tok::Ident)) {
      if (peek().kind == Tok::Assign) {
        Token id = toks_[pos_++];
        ++pos_;  // :=
        if (accept(Tok::Star)) return mkRandomGame(Var{id.text, -1}, sp);
        return mkAssignGame(Var{id.text, -1}, parseTerm(), sp);
      }
      // Named game reference; resolve against definitions when available.
      Token id = toks_[pos_++];
      if (defs_ != nullptr) {
        auto it = defs_->games.find(id.text);
        if (it != defs_->games.end()) return it->second;
      }
      fail(id.span, "unknown game name '" + id.text + "'");
    }
    if (accept(Tok::Question)) {
      return mkTestGame(parseFormula(), sp);
    }
    if (accept(Tok::LBrace)) {
      if (braceOpensOde()) {
        GamePtr ode = parseGameOde(sp);
        expect(Tok::RBrace, "to close differential equation");
        return ode;
      }
      GamePtr inner = parseGame();
      expect(Tok::RBrace, "to close game group");
      return inner;
    }
    fail(sp, std::string("expected game, found ") + tokName(cur().kind));
  }

  GamePtr parseGameOde(SourceSpan sp) {
    std::vector<OdeEquation> eqs;
    while (true) {
      OdeEquation eq;
      eq.span = cur().span;
      Token v = expect(Tok::Ident, "as differential-equation variable");
      eq.var = Var{v.text, -1};
      expect(Tok::Prime, "after differential-equation variable");
      expect(Tok::Eq, "in differential equation");
      eq.rhs = parseTerm();
      eqs.push_back(std::move(eq));
      if (!accept(Tok::Comma)) break;
    }
    FormulaPtr domain = mkTrue(sp);
    if (accept(Tok::Amp)) domain = parseFormula();
    return mkOdeGame(std::move(eqs), domain, sp);
  }

  // Decide whether the `{` just consumed opens a differential equation: a
  // prime appears before any statement-shaped token.
  bool braceOpensOde() const {
    for (size_t i = pos_; i < toks_.size(); ++i) {
      switch (toks_[i].kind) {
        case Tok::Prime: return true;
        case Tok::Semi:
        case Tok::Question:
        case Tok::Bang:
        case Tok::LBrace:
        case Tok::Assign:
        case Tok::RBrace:
        case Tok::KwSwitch:
        case Tok::KwFor:
        case Tok::End: return false;
        default: break;
      }
    }
    return false;
  }

  // ------------------------------------------------------------- statements

  std::vector<StmtPtr> parseStatementsUntil(std::initializer_list<Tok> closers) {
    std::vector<StmtPtr> out;
    auto isCloser = [&](Tok k) {
      for (Tok c : closers) {
        if (k == c) return true;
      }
      return k == Tok::End;
    };
    while (!isCloser(cur().kind)) out.push_back(parseStatement());
    return out;
  }

  StmtPtr parseStatement() {
    switch (cur().kind) {
      case Tok::Question: return parseAssume();
      case Tok::Bang: return parseAssert();
      case Tok::LBrace: return parseBraced();
      case Tok::GhostOpen: return parseGhost(StmtKind::GhostFwd, Tok::GhostClose);
      case Tok::InvGhostOpen: return parseGhost(StmtKind::GhostInv, Tok::InvGhostClose);
      case Tok::KwSwitch: return parseSwitch();
      case Tok::KwFor: return parseFor();
      case Tok::KwNote: return parseNote();
      case Tok::KwLet: return parseLet();
      case Tok::KwPrint: return parsePrint();
      case Tok::KwConclusion: return parseConclusionCmd();
      case Tok::KwProves: return parseProvesCmd();
      case Tok::Ident: return parseIdentStatement();
      default:
        fail(cur().span, std::string("expected statement, found ") + tokName(cur().kind));
    }
  }

  StmtPtr parseIdentStatement() {
    Token id = cur();
    if (peek().kind == Tok::Assign) {
      pos_ += 2;
      auto st = mkStmt(StmtKind::Assign, id.span);
      st->var = Var{id.text, -1};
      if (accept(Tok::Star)) {
        st->kind = StmtKind::RandomAssign;
      } else {
        st->rhs = parseTerm();
      }
      expect(Tok::Semi, "after assignment");
      return st;
    }
    if (peek().kind == Tok::Colon) {
      pos_ += 2;
      auto st = mkStmt(StmtKind::Label, id.span);
      st->name = id.text;
      return st;
    }
    if (peek().kind == Tok::LParen) {
      // Label with parameters: name(x, y):
      auto attempt = speculate([&]() -> StmtPtr {
        ++pos_;  // name
        ++pos_;  // (
        std::vector<std::string> params;
        if (!at(Tok::RParen)) {
          params.push_back(expect(Tok::Ident, "as label parameter").text);
          while (accept(Tok::Comma)) {
            params.push_back(expect(Tok::Ident, "as label parameter").text);
          }
        }
        expect(Tok::RParen, "to close label parameters");
        expect(Tok::Colon, "after label parameters");
        auto st = mkStmt(StmtKind::Label, id.span);
        st->name = id.text;
        st->labelParams = std::move(params);
        return st;
      });
      if (attempt) return *attempt;
    }
    fail(id.span, "expected ':=' (assignment) or ':' (label) after identifier");
  }

  // `?` [name `:`] `(` formula-or-assignment `)` `;`
  StmtPtr parseAssume() {
    SourceSpan sp = cur().span;
    expect(Tok::Question, "at assumption");
    std::string name;
    if (at(Tok::Ident) && peek().kind == Tok::Colon) {
      name = cur().text;
      pos_ += 2;
    }
    expect(Tok::LParen, "after '?'");
    StmtPtr result;
    if (at(Tok::Ident) && peek().kind == Tok::Assign) {
      Token v = toks_[pos_];
      pos_ += 2;
      auto st = mkStmt(StmtKind::EqAssign, sp);
      st->name = name;
      st->var = Var{v.text, -1};
      st->rhs = parseTerm();
      result = st;
    } else {
      auto st = mkStmt(StmtKind::Assume, sp);
      st->name = name;
      st->fml = parseFormula();
      result = st;
    }
    expect(Tok::RParen, "to close assumption");
    expect(Tok::Semi, "after assumption");
    return result;
  }

  // `!` [name `:`] `(` formula `)` [using ...] [by m] `;`
  StmtPtr parseAssert() {
    SourceSpan sp = cur().span;
    expect(Tok::Bang, "at assertion");
    auto st = mkStmt(StmtKind::Assert, sp);
    if (at(Tok::Ident) && peek().kind == Tok::Colon) {
      st->name = cur().text;
      pos_ += 2;
    }
    expect(Tok::LParen, "after '!'");
    st->fml = parseFormula();
    expect(Tok::RParen, "to close assertion");
    st->usingSpec = parseUsingSpec();
    st->methodSpec = parseMethodSpec();
    expect(Tok::Semi, "after assertion");
    return st;
  }

  UsingSpec parseUsingSpec() {
    UsingSpec spec;
    if (!accept(Tok::KwUsing)) return spec;
    spec.given = true;
    while (true) {
      if (at(Tok::Ident)) {
        spec.names.push_back(cur().text);
        ++pos_;
      } else if (at(Tok::Ellipsis)) {
        spec.ellipsis = true;
        ++pos_;
      } else {
        break;
      }
    }
    if (!spec.ellipsis && spec.names.empty()) {
      fail(cur().span, "'using' requires at least one fact name or '...'");
    }
    return spec;
  }

  MethodSpec parseMethodSpec() {
    MethodSpec spec;
    if (!accept(Tok::KwBy)) return spec;
    spec.given = true;
    Token m = expect(Tok::Ident, "as proof method after 'by'");
    if (m.text == "auto") {
      spec.method = Method::Auto;
    } else if (m.text == "prop") {
      spec.method = Method::Prop;
    } else if (m.text == "rcf") {
      spec.method = Method::Rcf;
    } else if (m.text == "solution") {
      spec.method = Method::Solution;
    } else if (m.text == "induction") {
      spec.method = Method::Induction;
    } else if (m.text == "guard") {
      spec.method = Method::Guard;
      if (accept(Tok::LParen)) {
        if (!at(Tok::RParen)) spec.delta = parseTerm();
        expect(Tok::RParen, "to close guard argument");
      }
    } else {
      fail(m.span, "unknown proof method '" + m.text + "'");
    }
    return spec;
  }

  StmtPtr parseGhost(StmtKind kind, Tok closer) {
    SourceSpan sp = cur().span;
    ++pos_;
    auto st = mkStmt(kind, sp);
    st->body = parseStatementsUntil({closer});
    expect(closer, "to close ghost block");
    return st;
  }

  // `{` ... `}` — block, choice, loop, or ODE.
  StmtPtr parseBraced() {
    SourceSpan sp = cur().span;
    expect(Tok::LBrace, "at block");
    if (braceOpensOdeStmt()) return parseOdeStatement(sp);

    std::vector<std::vector<StmtPtr>> branches;
    branches.push_back(parseStatementsUntil({Tok::RBrace, Tok::ChoiceOp}));
    while (accept(Tok::ChoiceOp)) {
      branches.push_back(parseStatementsUntil({Tok::RBrace, Tok::ChoiceOp}));
    }
    expect(Tok::RBrace, "to close block");
    bool repeat = accept(Tok::Star);
    accept(Tok::Semi);

    StmtPtr inner;
    if (branches.size() > 1) {
      auto ch = mkStmt(StmtKind::Choice, sp);
      for (auto& b : branches) {
        auto blk = mkStmt(StmtKind::Block, b.empty() ? sp : b.front()->span);
        blk->body = std::move(b);
        ch->body.push_back(blk);
      }
      inner = ch;
    } else {
      auto blk = mkStmt(StmtKind::Block, sp);
      blk->body = std::move(branches[0]);
      inner = blk;
    }
    if (repeat) {
      auto loop = mkStmt(StmtKind::Loop, sp);
      if (inner->kind == StmtKind::Block) {
        loop->body = inner->body;
      } else {
        loop->body = {inner};
      }
      return loop;
    }
    return inner;
  }

  // Statement-level ODE disambiguation must also skip ghost brackets that
  // wrap leading equations.
  bool braceOpensOdeStmt() const {
    for (size_t i = pos_; i < toks_.size(); ++i) {
      switch (toks_[i].kind) {
        case Tok::Prime: return true;
        case Tok::Semi:
        case Tok::Question:
        case Tok::Bang:
        case Tok::LBrace:
        case Tok::Assign:
        case Tok::RBrace:
        case Tok::KwSwitch:
        case Tok::KwFor:
        case Tok::End: return false;
        default: break;  // idents, ghost brackets, commas, operators
      }
    }
    return false;
  }

  StmtPtr parseOdeStatement(SourceSpan sp) {
    auto st = mkStmt(StmtKind::Ode, sp);
    parseOdeEquations(st->odes);
    while (accept(Tok::Amp)) st->domain.push_back(parseDomainItem());
    expect(Tok::RBrace, "to close differential equation");
    accept(Tok::Semi);
    return st;
  }

  void parseOdeEquations(std::vector<OdeEquation>& out) {
    while (true) {
      if (at(Tok::GhostOpen) || at(Tok::InvGhostOpen)) {
        bool fwd = at(Tok::GhostOpen);
        Tok closer = fwd ? Tok::GhostClose : Tok::InvGhostClose;
        ++pos_;
        while (!at(closer)) {
          out.push_back(parseOdeEquation(fwd, !fwd));
          if (!accept(Tok::Comma)) break;
        }
        expect(closer, "to close ghost equations");
      } else {
        out.push_back(parseOdeEquation(false, false));
      }
      if (!accept(Tok::Comma)) break;
    }
  }

  OdeEquation parseOdeEquation(bool fwdGhost, bool invGhost) {
    OdeEquation eq;
    eq.fwdGhost = fwdGhost;
    eq.invGhost = invGhost;
    eq.span = cur().span;
    Token first = expect(Tok::Ident, "as differential-equation variable");
    if (accept(Tok::Colon)) {
      eq.eqName = first.text;
      first = expect(Tok::Ident, "as differential-equation variable");
    }
    eq.var = Var{first.text, -1};
    expect(Tok::Prime, "after differential-equation variable");
    expect(Tok::Eq, "in differential equation");
    eq.rhs = parseTerm();
    return eq;
  }

  DomainItem parseDomainItem() {
    DomainItem item;
    item.span = cur().span;
    if (accept(Tok::Question)) {
      if (at(Tok::Ident) && peek().kind == Tok::Colon) {
        item.name = cur().text;
        pos_ += 2;
      }
      expect(Tok::LParen, "after '?' in domain");
      if (at(Tok::Ident) && peek().kind == Tok::Assign) {
        item.kind = DomItemKind::Duration;
        item.var = Var{cur().text, -1};
        pos_ += 2;
        item.rhs = parseTerm();
      } else {
        item.kind = DomItemKind::Assume;
        item.fml = parseFormula();
      }
      expect(Tok::RParen, "to close domain assumption");
      return item;
    }
    if (accept(Tok::Bang)) {
      item.kind = DomItemKind::Assert;
      if (at(Tok::Ident) && peek().kind == Tok::Colon) {
        item.name = cur().text;
        pos_ += 2;
      }
      expect(Tok::LParen, "after '!' in domain");
      item.fml = parseFormula();
      expect(Tok::RParen, "to close domain assertion");
      item.usingSpec = parseUsingSpec();
      item.methodSpec = parseMethodSpec();
      return item;
    }
    item.kind = DomItemKind::Assume;
    item.fml = parseFormula();
    return item;
  }

  StmtPtr parseSwitch() {
    SourceSpan sp = cur().span;
    expect(Tok::KwSwitch, "at switch");
    auto st = mkStmt(StmtKind::Switch, sp);
    if (accept(Tok::LParen)) {
      st->scrutinee = parseProofTerm();
      expect(Tok::RParen, "to close switch scrutinee");
    }
    expect(Tok::LBrace, "to open switch cases");
    while (at(Tok::KwCase)) {
      SwitchCase c;
      c.span = cur().span;
      ++pos_;
      if (accept(Tok::KwTrue)) {
        c.guard = mkTrue(c.span);
      } else {
        if (at(Tok::Ident) && peek().kind == Tok::Colon) {
          c.name = cur().text;
          pos_ += 2;
        }
        expect(Tok::LParen, "after 'case'");
        c.guard = parseFormula();
        expect(Tok::RParen, "to close case guard");
      }
      expect(Tok::FatArrow, "after case guard");
      c.body = parseStatementsUntil({Tok::KwCase, Tok::RBrace});
      st->cases.push_back(std::move(c));
    }
    expect(Tok::RBrace, "to close switch");
    accept(Tok::Semi);
    if (st->cases.empty()) fail(sp, "switch requires at least one case");
    return st;
  }

  StmtPtr parseFor() {
    SourceSpan sp = cur().span;
    expect(Tok::KwFor, "at for loop");
    auto st = mkStmt(StmtKind::For, sp);
    expect(Tok::LParen, "after 'for'");

    // init: x := e;
    {
      Token v = expect(Tok::Ident, "as loop variable");
      expect(Tok::Assign, "in loop initializer");
      auto init = mkStmt(StmtKind::Assign, v.span);
      init->var = Var{v.text, -1};
      init->rhs = parseTerm();
      expect(Tok::Semi, "after loop initializer");
      st->forInit = init;
    }
    // invariant: !name:(φ) using ... by m;
    {
      SourceSpan isp = cur().span;
      expect(Tok::Bang, "at loop invariant");
      auto inv = mkStmt(StmtKind::Assert, isp);
      if (at(Tok::Ident) && peek().kind == Tok::Colon) {
        inv->name = cur().text;
        pos_ += 2;
      }
      expect(Tok::LParen, "after '!'");
      inv->fml = parseFormula();
      expect(Tok::RParen, "to close loop invariant");
      inv->usingSpec = parseUsingSpec();
      inv->methodSpec = parseMethodSpec();
      expect(Tok::Semi, "after loop invariant");
      st->forInvariant = inv;
    }
    // guard: ?name:(φ);
    {
      SourceSpan gsp = cur().span;
      expect(Tok::Question, "at loop guard");
      auto guard = mkStmt(StmtKind::Assume, gsp);
      if (at(Tok::Ident) && peek().kind == Tok::Colon) {
        guard->name = cur().text;
        pos_ += 2;
      }
      expect(Tok::LParen, "after '?'");
      guard->fml = parseFormula();
      expect(Tok::RParen, "to close loop guard");
      expect(Tok::Semi, "after loop guard");
      st->forGuard = guard;
    }
    // increment: x := e [;]
    {
      Token v = expect(Tok::Ident, "as loop variable in increment");
      expect(Tok::Assign, "in loop increment");
      auto incr = mkStmt(StmtKind::Assign, v.span);
      incr->var = Var{v.text, -1};
      incr->rhs = parseTerm();
      accept(Tok::Semi);
      st->forIncrement = incr;
    }
    expect(Tok::RParen, "to close for-loop header");
    expect(Tok::LBrace, "to open for-loop body");
    st->body = parseStatementsUntil({Tok::RBrace});
    expect(Tok::RBrace, "to close for-loop body");
    accept(Tok::Semi);
    return st;
  }

  ProofTermPtr parseProofTerm() {
    Token head = expect(Tok::Ident, "as proof term");
    std::vector<ProofTermPtr> args;
    if (accept(Tok::LParen)) {
      if (!at(Tok::RParen)) {
        args.push_back(parseProofTerm());
        while (accept(Tok::Comma)) args.push_back(parseProofTerm());
      }
      expect(Tok::RParen, "to close proof-term arguments");
    }
    return mkProofTerm(head.text, std::move(args), head.span);
  }

  StmtPtr parseNote() {
    SourceSpan sp = cur().span;
    expect(Tok::KwNote, "at note");
    auto st = mkStmt(StmtKind::Note, sp);
    st->name = expect(Tok::Ident, "as note name").text;
    expect(Tok::Eq, "after note name");
    st->scrutinee = parseProofTerm();
    expect(Tok::Semi, "after note");
    return st;
  }

  StmtPtr parseLet() {
    SourceSpan sp = cur().span;
    expect(Tok::KwLet, "at let");
    Token name = expect(Tok::Ident, "as definition name");
    if (accept(Tok::GameDef)) {
      auto st = mkStmt(StmtKind::LetGame, sp);
      st->name = name.text;
      st->letGame = parseGame();
      expect(Tok::Semi, "after game definition");
      return st;
    }
    expect(Tok::LParen, "after definition name");
    std::vector<std::string> params;
    if (!at(Tok::RParen)) {
      params.push_back(expect(Tok::Ident, "as definition parameter").text);
      while (accept(Tok::Comma)) {
        params.push_back(expect(Tok::Ident, "as definition parameter").text);
      }
    }
    expect(Tok::RParen, "to close definition parameters");
    if (accept(Tok::Eq)) {
      auto st = mkStmt(StmtKind::LetFunc, sp);
      st->name = name.text;
      st->params = std::move(params);
      st->letTerm = parseTerm();
      expect(Tok::Semi, "after function definition");
      return st;
    }
    if (accept(Tok::DArrow)) {
      auto st = mkStmt(StmtKind::LetPred, sp);
      st->name = name.text;
      st->params = std::move(params);
      st->letFml = parseFormula();
      expect(Tok::Semi, "after predicate definition");
      return st;
    }
    fail(cur().span, "expected '=', '<->', or '::=' in let definition");
  }

  StmtPtr parsePrint() {
    SourceSpan sp = cur().span;
    expect(Tok::KwPrint, "at print");
    expect(Tok::LParen, "after 'print'");
    auto st = mkStmt(StmtKind::Print, sp);
    auto attempt = speculate([&]() -> FormulaPtr {
      FormulaPtr f = parseFormula();
      if (!at(Tok::RParen)) fail(cur().span, "print formula must fill the parentheses");
      return f;
    });
    if (attempt) {
      st->fml = *attempt;
    } else {
      st->rhs = parseTerm();
    }
    expect(Tok::RParen, "to close print");
    expect(Tok::Semi, "after print");
    return st;
  }

  StmtPtr parseConclusionCmd() {
    SourceSpan sp = cur().span;
    expect(Tok::KwConclusion, "at conclusion command");
    auto st = mkStmt(StmtKind::Conclusion, sp);
    st->name = expect(Tok::Ident, "as proof name").text;
    if (accept(Tok::KwWith)) {
      expect(Tok::LParen, "after 'with'");
      st->withNames.push_back(expect(Tok::Ident, "as fact name").text);
      while (accept(Tok::Comma)) {
        st->withNames.push_back(expect(Tok::Ident, "as fact name").text);
      }
      expect(Tok::RParen, "to close 'with' list");
    }
    expect(Tok::Semi, "after conclusion command");
    return st;
  }

  StmtPtr parseProvesCmd() {
    SourceSpan sp = cur().span;
    expect(Tok::KwProves, "at proves command");
    auto st = mkStmt(StmtKind::Proves, sp);
    st->name = expect(Tok::Ident, "as proof name").text;
    st->targetText = expect(Tok::String, "as target formula").text;
    expect(Tok::Semi, "after proves command");
    return st;
  }
};

// ---------------------------------------------------------------------------
// Convenience wrappers

inline Document parseDocument(const std::string& source, DiagnosticBag& diags) {
  Lexer lex(source, diags);
  auto toks = lex.run();
  if (diags.hasErrors()) return {};
  Parser p(std::move(toks), diags);
  return p.parseDocument();
}

inline FormulaPtr parseFormulaText(const std::string& source, DiagnosticBag& diags,
                                   const Definitions* defs = nullptr) {
  Lexer lex(source, diags);
  auto toks = lex.run();
  if (diags.hasErrors()) return nullptr;
  Parser p(std::move(toks), diags, defs);
  return p.parseFormulaEntry();
}

inline GamePtr parseGameText(const std::string& source, DiagnosticBag& diags,
                             const Definitions* defs = nullptr) {
  Lexer lex(source, diags);
  auto toks = lex.run();
  if (diags.hasErrors()) return nullptr;
  Parser p(std::move(toks), diags, defs);
  return p.parseGameEntry();
}

}  // namespace kaisar
