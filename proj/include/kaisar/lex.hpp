#pragma once

// Tokenizer for proof documents. Longest-match lexing with a few multi-char
// operators that shadow shorter ones (`::=` over `:=` over `:`, `<->` over
// `<=` over `<`, ghost brackets over arithmetic).

#include <cctype>
#include <string>
#include <vector>

#include "rational.hpp"
#include "source.hpp"

namespace kaisar {

enum class Tok {
  End,
  Ident,
  Number,
  String,
  // keywords
  KwSwitch,
  KwCase,
  KwFor,
  KwNote,
  KwLet,
  KwPrint,
  KwUsing,
  KwBy,
  KwConclusion,
  KwProves,
  KwWith,
  KwTrue,
  KwFalse,
  // punctuation / operators
  LParen,
  RParen,
  LBrace,
  RBrace,
  LBracket,
  RBracket,
  Semi,
  Colon,
  Comma,
  Question,
  Bang,
  Star,
  Plus,
  MinusTok,
  Slash,
  Caret,
  Prime,
  At,
  Assign,     // :=
  GameDef,    // ::=
  ChoiceOp,   // ++
  DualOp,     // ^@
  Ellipsis,   // ...
  GhostOpen,  // /++
  GhostClose, // ++/
  InvGhostOpen,  // /--
  InvGhostClose, // --/
  Eq,
  Neq,
  Le,
  Lt,
  Ge,
  Gt,
  Amp,
  Bar,
  Arrow,   // ->
  DArrow,  // <->
  FatArrow // =>
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Rational value;  // for Number
  SourceSpan span;
};

inline const char* tokName(Tok k) {
  switch (k) {
    case Tok::End: return "end of input";
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::String: return "string literal";
    case Tok::KwSwitch: return "'switch'";
    case Tok::KwCase: return "'case'";
    case Tok::KwFor: return "'for'";
    case Tok::KwNote: return "'note'";
    case Tok::KwLet: return "'let'";
    case Tok::KwPrint: return "'print'";
    case Tok::KwUsing: return "'using'";
    case Tok::KwBy: return "'by'";
    case Tok::KwConclusion: return "'conclusion'";
    case Tok::KwProves: return "'proves'";
    case Tok::KwWith: return "'with'";
    case Tok::KwTrue: return "'true'";
    case Tok::KwFalse: return "'false'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Semi: return "';'";
    case Tok::Colon: return "':'";
    case Tok::Comma: return "','";
    case Tok::Question: return "'?'";
    case Tok::Bang: return "'!'";
    case Tok::Star: return "'*'";
    case Tok::Plus: return "'+'";
    case Tok::MinusTok: return "'-'";
    case Tok::Slash: return "'/'";
    case Tok::Caret: return "'^'";
    case Tok::Prime: return "'''";
    case Tok::At: return "'@'";
    case Tok::Assign: return "':='";
    case Tok::GameDef: return "'::='";
    case Tok::ChoiceOp: return "'++'";
    case Tok::DualOp: return "'^@'";
    case Tok::Ellipsis: return "'...'";
    case Tok::GhostOpen: return "'/++'";
    case Tok::GhostClose: return "'++/'";
    case Tok::InvGhostOpen: return "'/--'";
    case Tok::InvGhostClose: return "'--/'";
    case Tok::Eq: return "'='";
    case Tok::Neq: return "'!='";
    case Tok::Le: return "'<='";
    case Tok::Lt: return "'<'";
    case Tok::Ge: return "'>='";
    case Tok::Gt: return "'>'";
    case Tok::Amp: return "'&'";
    case Tok::Bar: return "'|'";
    case Tok::Arrow: return "'->'";
    case Tok::DArrow: return "'<->'";
    case Tok::FatArrow: return "'=>'";
  }
  return "?";
}

class Lexer {
 public:
  Lexer(std::string src, DiagnosticBag& diags) : src_(std::move(src)), diags_(diags) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      Token t = next();
      out.push_back(t);
      if (t.kind == Tok::End) break;
    }
    return out;
  }

 private:
  std::string src_;
  DiagnosticBag& diags_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;

  char peek(size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }
  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  bool match(const char* s) {
    size_t n = 0;
    while (s[n]) {
      if (peek(n) != s[n]) return false;
      ++n;
    }
    for (size_t i = 0; i < n; ++i) advance();
    return true;
  }

  void skipTrivia() {
    while (pos_ < src_.size()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && peek() != '\n') advance();
      } else if (c == '/' && peek(1) == '*') {
        advance();
        advance();
        while (pos_ < src_.size() && !(peek() == '*' && peek(1) == '/')) advance();
        if (pos_ < src_.size()) {
          advance();
          advance();
        }
      } else {
        break;
      }
    }
  }

  Token make(Tok k, std::string text, int l0, int c0) {
    Token t;
    t.kind = k;
    t.text = std::move(text);
    t.span = SourceSpan{l0, c0, line_, col_};
    return t;
  }

  Token next() {
    skipTrivia();
    int l0 = line_, c0 = col_;
    if (pos_ >= src_.size()) return make(Tok::End, "", l0, c0);
    char c = peek();

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string id;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') id += advance();
      if (id == "switch") return make(Tok::KwSwitch, id, l0, c0);
      if (id == "case") return make(Tok::KwCase, id, l0, c0);
      if (id == "for") return make(Tok::KwFor, id, l0, c0);
      if (id == "note") return make(Tok::KwNote, id, l0, c0);
      if (id == "let") return make(Tok::KwLet, id, l0, c0);
      if (id == "print") return make(Tok::KwPrint, id, l0, c0);
      if (id == "using") return make(Tok::KwUsing, id, l0, c0);
      if (id == "by") return make(Tok::KwBy, id, l0, c0);
      if (id == "conclusion") return make(Tok::KwConclusion, id, l0, c0);
      if (id == "proves") return make(Tok::KwProves, id, l0, c0);
      if (id == "with") return make(Tok::KwWith, id, l0, c0);
      if (id == "true") return make(Tok::KwTrue, id, l0, c0);
      if (id == "false") return make(Tok::KwFalse, id, l0, c0);
      return make(Tok::Ident, id, l0, c0);
    }

    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string num;
      while (std::isdigit(static_cast<unsigned char>(peek()))) num += advance();
      if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
        num += advance();
        while (std::isdigit(static_cast<unsigned char>(peek()))) num += advance();
      }
      Token t = make(Tok::Number, num, l0, c0);
      t.value = parseRational(num);
      return t;
    }

    if (c == '"') {
      advance();
      std::string s;
      while (pos_ < src_.size() && peek() != '"') {
        if (peek() == '\\' && peek(1) == '"') advance();
        s += advance();
      }
      if (pos_ >= src_.size()) {
        diags_.error(SourceSpan{l0, c0, line_, col_}, "unterminated string literal");
      } else {
        advance();
      }
      return make(Tok::String, s, l0, c0);
    }

    // Multi-character operators, longest first.
    if (match("/++")) return make(Tok::GhostOpen, "/++", l0, c0);
    if (match("/--")) return make(Tok::InvGhostOpen, "/--", l0, c0);
    if (match("++/")) return make(Tok::GhostClose, "++/", l0, c0);
    if (match("--/")) return make(Tok::InvGhostClose, "--/", l0, c0);
    if (match("...")) return make(Tok::Ellipsis, "...", l0, c0);
    if (match("::=")) return make(Tok::GameDef, "::=", l0, c0);
    if (match("<->")) return make(Tok::DArrow, "<->", l0, c0);
    if (match(":=")) return make(Tok::Assign, ":=", l0, c0);
    if (match("++")) return make(Tok::ChoiceOp, "++", l0, c0);
    if (match("^@")) return make(Tok::DualOp, "^@", l0, c0);
    if (match("->")) return make(Tok::Arrow, "->", l0, c0);
    if (match("=>")) return make(Tok::FatArrow, "=>", l0, c0);
    if (match("<=")) return make(Tok::Le, "<=", l0, c0);
    if (match(">=")) return make(Tok::Ge, ">=", l0, c0);
    if (match("!=")) return make(Tok::Neq, "!=", l0, c0);

    advance();
    switch (c) {
      case '(': return make(Tok::LParen, "(", l0, c0);
      case ')': return make(Tok::RParen, ")", l0, c0);
      case '{': return make(Tok::LBrace, "{", l0, c0);
      case '}': return make(Tok::RBrace, "}", l0, c0);
      case '[': return make(Tok::LBracket, "[", l0, c0);
      case ']': return make(Tok::RBracket, "]", l0, c0);
      case ';': return make(Tok::Semi, ";", l0, c0);
      case ':': return make(Tok::Colon, ":", l0, c0);
      case ',': return make(Tok::Comma, ",", l0, c0);
      case '?': return make(Tok::Question, "?", l0, c0);
      case '!': return make(Tok::Bang, "!", l0, c0);
      case '*': return make(Tok::Star, "*", l0, c0);
      case '+': return make(Tok::Plus, "+", l0, c0);
      case '-': return make(Tok::MinusTok, "-", l0, c0);
      case '/': return make(Tok::Slash, "/", l0, c0);
      case '^': return make(Tok::Caret, "^", l0, c0);
      case '\'': return make(Tok::Prime, "'", l0, c0);
      case '@': return make(Tok::At, "@", l0, c0);
      case '=': return make(Tok::Eq, "=", l0, c0);
      case '<': return make(Tok::Lt, "<", l0, c0);
      case '>': return make(Tok::Gt, ">", l0, c0);
      case '&': return make(Tok::Amp, "&", l0, c0);
      case '|': return make(Tok::Bar, "|", l0, c0);
      default:
        diags_.error(SourceSpan{l0, c0, line_, col_},
                     std::string("unexpected character '") + c + "'");
        return next();
    }
  }
};

}  // namespace kaisar
