#pragma once

// Exact sparse multivariate polynomials and rational functions over Q.
//
// Comparisons between terms are decided by normalizing `lhs - rhs` into a
// num/den pair and cross-multiplying; we never cancel common factors, so
// equality tests are purely structural on the normalized maps. Power terms
// admit rational exponents only when they can be evaluated away exactly
// (constant base, or integer exponent).

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ast.hpp"
#include "rational.hpp"
#include "source.hpp"

namespace kaisar {

struct PolyError {
  std::string message;
  SourceSpan span;
};

using Monomial = std::map<Var, int>;  // variable -> exponent (> 0)

inline int monomialDegree(const Monomial& m) {
  int d = 0;
  for (auto& [v, e] : m) d += e;
  return d;
}

struct Polynomial {
  // invariant: no zero coefficients, no zero exponents
  std::map<Monomial, Rational> terms;

  static Polynomial zero() { return {}; }
  static Polynomial constant(const Rational& c) {
    Polynomial p;
    if (c != 0) p.terms[{}] = c;
    return p;
  }
  static Polynomial variable(const Var& v) {
    Polynomial p;
    p.terms[{{v, 1}}] = Rational(1);
    return p;
  }

  bool isZero() const { return terms.empty(); }
  bool isConstant() const {
    return terms.empty() || (terms.size() == 1 && terms.begin()->first.empty());
  }
  Rational constantValue() const {
    if (terms.empty()) return Rational(0);
    return terms.begin()->second;
  }
  int degree() const {
    int d = 0;
    for (auto& [m, c] : terms) d = std::max(d, monomialDegree(m));
    return d;
  }
  int degreeIn(const Var& v) const {
    int d = 0;
    for (auto& [m, c] : terms) {
      auto it = m.find(v);
      if (it != m.end()) d = std::max(d, it->second);
    }
    return d;
  }
  std::set<Var> variables() const {
    std::set<Var> vs;
    for (auto& [m, c] : terms) {
      for (auto& [v, e] : m) vs.insert(v);
    }
    return vs;
  }
  bool operator==(const Polynomial& o) const { return terms == o.terms; }
  bool operator!=(const Polynomial& o) const { return !(*this == o); }

  void addTerm(const Monomial& m, const Rational& c) {
    if (c == 0) return;
    auto it = terms.find(m);
    if (it == terms.end()) {
      terms.emplace(m, c);
    } else {
      it->second += c;
      if (it->second == 0) terms.erase(it);
    }
  }
};

inline Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  Polynomial r = a;
  for (auto& [m, c] : b.terms) r.addTerm(m, c);
  return r;
}
inline Polynomial operator-(const Polynomial& a) {
  Polynomial r;
  for (auto& [m, c] : a.terms) r.terms[m] = -c;
  return r;
}
inline Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }
inline Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial r;
  for (auto& [ma, ca] : a.terms) {
    for (auto& [mb, cb] : b.terms) {
      Monomial m = ma;
      for (auto& [v, e] : mb) {
        m[v] += e;
        if (m[v] == 0) m.erase(v);
      }
      r.addTerm(m, ca * cb);
    }
  }
  return r;
}
inline Polynomial operator*(const Polynomial& a, const Rational& c) {
  Polynomial r;
  if (c == 0) return r;
  for (auto& [m, k] : a.terms) r.terms[m] = k * c;
  return r;
}
inline Polynomial polyPow(const Polynomial& a, long long e) {
  Polynomial r = Polynomial::constant(Rational(1));
  Polynomial base = a;
  long long n = e;
  while (n > 0) {
    if (n & 1) r = r * base;
    base = base * base;
    n >>= 1;
  }
  return r;
}

inline Polynomial differentiate(const Polynomial& p, const Var& x) {
  Polynomial r;
  for (auto& [m, c] : p.terms) {
    auto it = m.find(x);
    if (it == m.end()) continue;
    Monomial dm = m;
    int e = it->second;
    if (e == 1) {
      dm.erase(x);
    } else {
      dm[x] = e - 1;
    }
    r.addTerm(dm, c * Rational(e));
  }
  return r;
}

// Substitute each variable found in `bind` by its polynomial; composition.
inline Polynomial substitute(const Polynomial& p, const std::map<Var, Polynomial>& bind) {
  Polynomial r;
  for (auto& [m, c] : p.terms) {
    Polynomial t = Polynomial::constant(c);
    for (auto& [v, e] : m) {
      auto it = bind.find(v);
      Polynomial base = it != bind.end() ? it->second : Polynomial::variable(v);
      t = t * polyPow(base, e);
    }
    r = r + t;
  }
  return r;
}

inline Rational evaluate(const Polynomial& p, const std::map<Var, Rational>& env) {
  Rational total(0);
  for (auto& [m, c] : p.terms) {
    Rational t = c;
    for (auto& [v, e] : m) {
      auto it = env.find(v);
      Rational val = it != env.end() ? it->second : Rational(0);
      t *= ipow(val, e);
    }
    total += t;
  }
  return total;
}

inline std::string toString(const Polynomial& p) {
  if (p.terms.empty()) return "0";
  std::ostringstream out;
  bool first = true;
  for (auto& [m, c] : p.terms) {
    Rational coeff = c;
    if (!first) {
      out << (coeff < 0 ? " - " : " + ");
      if (coeff < 0) coeff = -coeff;
    }
    first = false;
    bool needCoeff = m.empty() || coeff != 1;
    if (needCoeff) out << toString(coeff);
    bool needStar = needCoeff;
    for (auto& [v, e] : m) {
      if (needStar) out << "*";
      out << v.str();
      if (e > 1) out << "^" << e;
      needStar = true;
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Rational functions: num/den with den kept symbolic (never cancelled).

struct RatFunc {
  Polynomial num;
  Polynomial den;  // nonzero as a polynomial; may vanish at points

  static RatFunc fromPoly(Polynomial p) {
    return {std::move(p), Polynomial::constant(Rational(1))};
  }
  static RatFunc constant(const Rational& c) { return fromPoly(Polynomial::constant(c)); }

  bool denIsConstant() const { return den.isConstant(); }
  std::optional<Polynomial> asPolynomial() const {
    if (!den.isConstant()) return std::nullopt;
    Rational c = den.constantValue();
    if (c == 0) return std::nullopt;
    return num * (Rational(1) / c);
  }
};

inline RatFunc operator+(const RatFunc& a, const RatFunc& b) {
  return {a.num * b.den + b.num * a.den, a.den * b.den};
}
inline RatFunc operator-(const RatFunc& a) { return {-a.num, a.den}; }
inline RatFunc operator-(const RatFunc& a, const RatFunc& b) { return a + (-b); }
inline RatFunc operator*(const RatFunc& a, const RatFunc& b) {
  return {a.num * b.num, a.den * b.den};
}

struct TermToRatFunc;

// Exact structural equality after cross-multiplication.
inline bool ratFuncEqual(const RatFunc& a, const RatFunc& b) {
  return a.num * b.den == b.num * a.den;
}

// Convert an elaborated, located-free term to a rational function.
// Unknown zero-argument applications are treated as constant symbols
// (variables); min/max and other applications must have been eliminated.
inline RatFunc termToRatFunc(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Number: return RatFunc::constant(t->value);
    case TermKind::Variable: return RatFunc::fromPoly(Polynomial::variable(t->var));
    case TermKind::Plus: return termToRatFunc(t->lhs) + termToRatFunc(t->rhs);
    case TermKind::Minus: return termToRatFunc(t->lhs) - termToRatFunc(t->rhs);
    case TermKind::Times: return termToRatFunc(t->lhs) * termToRatFunc(t->rhs);
    case TermKind::Divide: {
      RatFunc a = termToRatFunc(t->lhs);
      RatFunc b = termToRatFunc(t->rhs);
      if (b.num.isZero()) throw PolyError{"division by zero", t->span};
      return {a.num * b.den, a.den * b.num};
    }
    case TermKind::Neg: return -termToRatFunc(t->lhs);
    case TermKind::Power: {
      RatFunc e = termToRatFunc(t->rhs);
      if (!e.den.isConstant() || !e.num.isConstant()) {
        throw PolyError{"exponent must be a rational constant", t->span};
      }
      Rational ev = e.num.constantValue() / e.den.constantValue();
      RatFunc base = termToRatFunc(t->lhs);
      if (isInteger(ev)) {
        long long n = static_cast<long long>(numerator(ev));
        if (n >= 0) return {polyPow(base.num, n), polyPow(base.den, n)};
        if (base.num.isZero()) throw PolyError{"zero raised to negative power", t->span};
        return {polyPow(base.den, -n), polyPow(base.num, -n)};
      }
      // Fractional exponent: only exact constant roots are representable.
      if (base.num.isConstant() && base.den.isConstant()) {
        Rational bv = base.num.constantValue() / base.den.constantValue();
        auto r = exactPow(bv, ev);
        if (r) return RatFunc::constant(*r);
        throw PolyError{"fractional power has no exact rational value", t->span};
      }
      throw PolyError{"fractional power of a non-constant term", t->span};
    }
    case TermKind::Apply: {
      if (t->args.empty()) {
        // constant symbol, e.g. an undefined zero-ary function in a target
        return RatFunc::fromPoly(Polynomial::variable(Var{t->name, -1}));
      }
      throw PolyError{"uninterpreted function '" + t->name + "' in arithmetic", t->span};
    }
    case TermKind::Located:
      throw PolyError{"unresolved labeled expression in arithmetic", t->span};
  }
  throw PolyError{"unsupported term", t->span};
}

inline Polynomial termToPolynomial(const TermPtr& t) {
  RatFunc f = termToRatFunc(t);
  auto p = f.asPolynomial();
  if (!p) throw PolyError{"term is not polynomial (division by a variable)", t->span};
  return *p;
}

// Two terms agree as rational functions.
inline bool termsPolyEqual(const TermPtr& a, const TermPtr& b) {
  return ratFuncEqual(termToRatFunc(a), termToRatFunc(b));
}

// Evaluate a rational function at a point; nullopt when the denominator
// vanishes there.
inline std::optional<Rational> evaluate(const RatFunc& f, const std::map<Var, Rational>& env) {
  Rational d = evaluate(f.den, env);
  if (d == 0) return std::nullopt;
  return evaluate(f.num, env) / d;
}

}  // namespace kaisar
