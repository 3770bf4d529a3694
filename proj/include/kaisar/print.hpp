#pragma once

// Pretty-printer. The contract that matters: parsing the printed text yields
// a structurally equal AST (print is a right inverse of parse up to spans).
// Variables print with their variant suffix only when requested; surface
// printing folds everything to base names.

#include <sstream>
#include <string>

#include "ast.hpp"

namespace kaisar {

struct PrintOptions {
  bool showVariants = false;  // print x#3 instead of x
  std::string indent = "  ";
};

class Printer {
 public:
  explicit Printer(PrintOptions opts = {}) : opts_(opts) {}

  std::string varName(const Var& v) const {
    if (opts_.showVariants && v.index >= 0) return v.str();
    return v.base;
  }

  // ------------------------------------------------------------------ terms
  // precedence: 1 add, 2 mul, 3 neg, 4 power, 5 atom

  std::string term(const TermPtr& t, int level = 1) const {
    switch (t->kind) {
      case TermKind::Number: {
        if (t->value < 0) return wrap("-" + toString(-t->value), level, 3);
        return toString(t->value);
      }
      case TermKind::Variable: return varName(t->var);
      case TermKind::Plus:
        return wrap(term(t->lhs, 1) + " + " + term(t->rhs, 2), level, 1);
      case TermKind::Minus:
        return wrap(term(t->lhs, 1) + " - " + term(t->rhs, 2), level, 1);
      case TermKind::Times:
        return wrap(term(t->lhs, 2) + "*" + term(t->rhs, 3), level, 2);
      case TermKind::Divide:
        return wrap(term(t->lhs, 2) + "/" + term(t->rhs, 3), level, 2);
      case TermKind::Neg: return wrap("-" + term(t->lhs, 3), level, 3);
      case TermKind::Power:
        return wrap(term(t->lhs, 5) + "^" + term(t->rhs, 5), level, 4);
      case TermKind::Apply: {
        std::string s = t->name + "(";
        for (size_t i = 0; i < t->args.size(); ++i) {
          if (i) s += ", ";
          s += term(t->args[i], 1);
        }
        return s + ")";
      }
      case TermKind::Located: {
        std::string s = term(t->lhs, 5) + "@" + t->name;
        if (!t->args.empty()) {
          s += "(";
          for (size_t i = 0; i < t->args.size(); ++i) {
            if (i) s += ", ";
            s += term(t->args[i], 1);
          }
          s += ")";
        }
        return s;
      }
    }
    return "?";
  }

  // --------------------------------------------------------------- formulas
  // precedence: 1 iff, 2 imply, 3 or, 4 and, 5 atom

  std::string formula(const FormulaPtr& f, int level = 1) const {
    switch (f->kind) {
      case FormulaKind::True: return "true";
      case FormulaKind::False: return "false";
      case FormulaKind::Cmp:
        return wrap(term(f->left, 1) + " " + cmpText(f->op) + " " + term(f->right, 1), level, 5);
      case FormulaKind::Not: return "!(" + formula(f->child, 1) + ")";
      case FormulaKind::And:
        return wrap(formula(f->child, 4) + " & " + formula(f->child2, 5), level, 4);
      case FormulaKind::Or:
        return wrap(formula(f->child, 3) + " | " + formula(f->child2, 4), level, 3);
      case FormulaKind::Imply:
        return wrap(formula(f->child, 3) + " -> " + formula(f->child2, 2), level, 2);
      case FormulaKind::Iff:
        return wrap(formula(f->child, 2) + " <-> " + formula(f->child2, 2), level, 1);
      case FormulaKind::PredApply: {
        std::string s = f->name + "(";
        for (size_t i = 0; i < f->args.size(); ++i) {
          if (i) s += ", ";
          s += term(f->args[i], 1);
        }
        return s + ")";
      }
      case FormulaKind::Located: {
        std::string subject = f->child->kind == FormulaKind::PredApply
                                  ? formula(f->child, 5)
                                  : "(" + formula(f->child, 1) + ")";
        std::string s = subject + "@" + f->name;
        if (!f->args.empty()) {
          s += "(";
          for (size_t i = 0; i < f->args.size(); ++i) {
            if (i) s += ", ";
            s += term(f->args[i], 1);
          }
          s += ")";
        }
        return s;
      }
      case FormulaKind::Box:
        return wrap("[" + game(f->game) + "] " + formula(f->child, 5), level, 5);
      case FormulaKind::Diamond:
        return wrap("<" + game(f->game) + "> " + formula(f->child, 5), level, 5);
    }
    return "?";
  }

  static const char* cmpText(CmpOp op) {
    switch (op) {
      case CmpOp::Eq: return "=";
      case CmpOp::Ne: return "!=";
      case CmpOp::Le: return "<=";
      case CmpOp::Lt: return "<";
      case CmpOp::Ge: return ">=";
      case CmpOp::Gt: return ">";
    }
    return "?";
  }

  // ------------------------------------------------------------------ games
  // precedence: 1 choice, 2 seq, 3 atom

  std::string game(const GamePtr& g, int level = 1) const {
    switch (g->kind) {
      case GameKind::Assign:
        return varName(g->var) + " := " + term(g->term, 1);
      case GameKind::RandomAssign: return varName(g->var) + " := *";
      case GameKind::Test: return "?(" + formula(g->fml, 1) + ")";
      case GameKind::Ode: {
        std::string s = "{";
        for (size_t i = 0; i < g->odes.size(); ++i) {
          if (i) s += ", ";
          s += varName(g->odes[i].var) + "' = " + term(g->odes[i].rhs, 1);
        }
        if (g->fml && g->fml->kind != FormulaKind::True) {
          s += " & " + formula(g->fml, 1);
        }
        return s + "}";
      }
      case GameKind::Seq: {
        std::string s;
        for (size_t i = 0; i < g->children.size(); ++i) {
          if (i) s += " ";
          s += game(g->children[i], 3);
          s += ";";
        }
        return wrapGame(s, level, 2);
      }
      case GameKind::Choice: {
        std::string s;
        for (size_t i = 0; i < g->children.size(); ++i) {
          if (i) s += " ++ ";
          s += game(g->children[i], 2);
        }
        return wrapGame(s, level, 1);
      }
      case GameKind::Repeat: return "{" + game(g->children[0], 1) + "}*";
      case GameKind::Dual: return "{" + game(g->children[0], 1) + "}^@";
    }
    return "?";
  }

  // ------------------------------------------------------------- statements

  std::string document(const Document& doc) const {
    std::string out;
    for (auto& st : doc) out += statement(st, 0);
    return out;
  }

  std::string statement(const StmtPtr& st, int depth) const {
    std::string pad;
    for (int i = 0; i < depth; ++i) pad += opts_.indent;
    switch (st->kind) {
      case StmtKind::Assume:
        return pad + "?" + nameColon(st->name) + "(" + formula(st->fml) + ");\n";
      case StmtKind::Assert:
        return pad + "!" + nameColon(st->name) + "(" + formula(st->fml) + ")" +
               usingText(st->usingSpec) + methodText(st->methodSpec) + ";\n";
      case StmtKind::Assign:
        return pad + varName(st->var) + " := " + term(st->rhs) + ";\n";
      case StmtKind::RandomAssign: return pad + varName(st->var) + " := *;\n";
      case StmtKind::EqAssign:
        return pad + "?" + nameColon(st->name) + "(" + varName(st->var) + " := " +
               term(st->rhs) + ");\n";
      case StmtKind::Block: {
        std::string s = pad + "{\n";
        for (auto& c : st->body) s += statement(c, depth + 1);
        return s + pad + "}\n";
      }
      case StmtKind::Choice: {
        std::string s = pad + "{\n";
        for (size_t i = 0; i < st->body.size(); ++i) {
          if (i) s += pad + "++\n";
          for (auto& c : st->body[i]->body) s += statement(c, depth + 1);
        }
        return s + pad + "}\n";
      }
      case StmtKind::Loop: {
        std::string s = pad + "{\n";
        for (auto& c : st->body) s += statement(c, depth + 1);
        return s + pad + "}*\n";
      }
      case StmtKind::For: {
        std::string s = pad + "for (" + varName(st->forInit->var) + " := " +
                        term(st->forInit->rhs) + "; !" + nameColon(st->forInvariant->name) +
                        "(" + formula(st->forInvariant->fml) + ")" +
                        usingText(st->forInvariant->usingSpec) +
                        methodText(st->forInvariant->methodSpec) + "; ?" +
                        nameColon(st->forGuard->name) + "(" + formula(st->forGuard->fml) +
                        "); " + varName(st->forIncrement->var) + " := " +
                        term(st->forIncrement->rhs) + ") {\n";
        for (auto& c : st->body) s += statement(c, depth + 1);
        return s + pad + "}\n";
      }
      case StmtKind::Switch: {
        std::string s = pad + "switch ";
        if (st->scrutinee) s += "(" + proofTerm(st->scrutinee) + ") ";
        s += "{\n";
        for (auto& c : st->cases) {
          s += pad + opts_.indent + "case " + nameColon(c.name) + "(" + formula(c.guard) +
               ") =>\n";
          for (auto& b : c.body) s += statement(b, depth + 2);
        }
        return s + pad + "}\n";
      }
      case StmtKind::Ode: {
        std::string s = pad + "{";
        // group: 0 plain, 1 forward ghost, 2 inverse ghost
        int group = 0;
        auto opener = [](int g) { return g == 1 ? "/++ " : "/-- "; };
        auto closer = [](int g) { return g == 1 ? " ++/" : " --/"; };
        for (size_t i = 0; i < st->odes.size(); ++i) {
          const auto& eq = st->odes[i];
          int g = eq.fwdGhost ? 1 : eq.invGhost ? 2 : 0;
          if (i == 0) {
            if (g) s += opener(g);
          } else if (g == group) {
            s += ", ";
          } else {
            if (group) s += closer(group);
            s += ", ";
            if (g) s += opener(g);
          }
          group = g;
          if (!eq.eqName.empty()) s += eq.eqName + ": ";
          s += varName(eq.var) + "' = " + term(eq.rhs);
        }
        if (group) s += closer(group);
        for (auto& item : st->domain) {
          s += " & ";
          switch (item.kind) {
            case DomItemKind::Assume:
              s += "?" + nameColon(item.name) + "(" + formula(item.fml) + ")";
              break;
            case DomItemKind::Assert:
              s += "!" + nameColon(item.name) + "(" + formula(item.fml) + ")" +
                   usingText(item.usingSpec) + methodText(item.methodSpec);
              break;
            case DomItemKind::Duration:
              s += "?" + nameColon(item.name) + "(" + varName(item.var) + " := " +
                   term(item.rhs) + ")";
              break;
          }
        }
        return s + "};\n";
      }
      case StmtKind::GhostFwd: {
        std::string s = pad + "/++\n";
        for (auto& c : st->body) s += statement(c, depth + 1);
        return s + pad + "++/\n";
      }
      case StmtKind::GhostInv: {
        std::string s = pad + "/--\n";
        for (auto& c : st->body) s += statement(c, depth + 1);
        return s + pad + "--/\n";
      }
      case StmtKind::Label: {
        std::string s = pad + st->name;
        if (!st->labelParams.empty()) {
          s += "(";
          for (size_t i = 0; i < st->labelParams.size(); ++i) {
            if (i) s += ", ";
            s += st->labelParams[i];
          }
          s += ")";
        }
        return s + ":\n";
      }
      case StmtKind::Note:
        return pad + "note " + st->name + " = " + proofTerm(st->scrutinee) + ";\n";
      case StmtKind::LetFunc:
        return pad + "let " + st->name + paramList(st->params) + " = " + term(st->letTerm) +
               ";\n";
      case StmtKind::LetPred:
        return pad + "let " + st->name + paramList(st->params) + " <-> " +
               formula(st->letFml) + ";\n";
      case StmtKind::LetGame:
        return pad + "let " + st->name + " ::= " + game(st->letGame) + ";\n";
      case StmtKind::Print:
        return pad + "print(" + (st->fml ? formula(st->fml) : term(st->rhs)) + ");\n";
      case StmtKind::Conclusion: {
        std::string s = pad + "conclusion " + st->name;
        if (!st->withNames.empty()) {
          s += " with (";
          for (size_t i = 0; i < st->withNames.size(); ++i) {
            if (i) s += ", ";
            s += st->withNames[i];
          }
          s += ")";
        }
        return s + ";\n";
      }
      case StmtKind::Proves:
        return pad + "proves " + st->name + " \"" + st->targetText + "\";\n";
    }
    return pad + "?\n";
  }

  std::string proofTerm(const ProofTermPtr& pt) const {
    std::string s = pt->head;
    if (!pt->args.empty()) {
      s += "(";
      for (size_t i = 0; i < pt->args.size(); ++i) {
        if (i) s += ", ";
        s += proofTerm(pt->args[i]);
      }
      s += ")";
    }
    return s;
  }

 private:
  PrintOptions opts_;

  static std::string wrap(const std::string& s, int contextLevel, int ownLevel) {
    if (ownLevel < contextLevel) return "(" + s + ")";
    return s;
  }
  static std::string wrapGame(const std::string& s, int contextLevel, int ownLevel) {
    if (ownLevel < contextLevel) return "{" + s + "}";
    return s;
  }
  static std::string nameColon(const std::string& n) { return n.empty() ? "" : n + ":"; }

  static std::string paramList(const std::vector<std::string>& params) {
    std::string s = "(";
    for (size_t i = 0; i < params.size(); ++i) {
      if (i) s += ", ";
      s += params[i];
    }
    return s + ")";
  }

  std::string usingText(const UsingSpec& u) const {
    if (!u.given) return "";
    std::string s = " using";
    for (auto& n : u.names) s += " " + n;
    if (u.ellipsis) s += " ...";
    return s;
  }

  std::string methodText(const MethodSpec& m) const {
    if (!m.given) return "";
    switch (m.method) {
      case Method::Auto: return " by auto";
      case Method::Prop: return " by prop";
      case Method::Rcf: return " by rcf";
      case Method::Solution: return " by solution";
      case Method::Induction: return " by induction";
      case Method::Guard:
        if (m.delta) return " by guard(" + term(m.delta) + ")";
        return " by guard";
    }
    return "";
  }
};

inline std::string prettyPrint(const Document& doc, PrintOptions opts = {}) {
  return Printer(opts).document(doc);
}
inline std::string prettyPrint(const FormulaPtr& f, PrintOptions opts = {}) {
  return Printer(opts).formula(f);
}
inline std::string prettyPrint(const TermPtr& t, PrintOptions opts = {}) {
  return Printer(opts).term(t);
}
inline std::string prettyPrint(const GamePtr& g, PrintOptions opts = {}) {
  return Printer(opts).game(g);
}

}  // namespace kaisar
