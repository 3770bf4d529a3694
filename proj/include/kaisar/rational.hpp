#pragma once

// Exact rational arithmetic used throughout the checker. Wraps
// boost::multiprecision::cpp_rational and adds the few operations the
// arithmetic backend needs: parsing of decimal literals, exact integer
// powers, and exact rational roots (which only exist for perfect powers).

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace kaisar {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt numerator(const Rational& r) { return boost::multiprecision::numerator(r); }
inline BigInt denominator(const Rational& r) { return boost::multiprecision::denominator(r); }

inline bool isInteger(const Rational& r) { return denominator(r) == 1; }

inline std::string toString(const Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

// Parses "123", "1.5", "007". Fractions are built by the term grammar, not
// the lexer, so '/' never appears here.
inline Rational parseRational(const std::string& text) {
  auto dot = text.find('.');
  if (dot == std::string::npos) return Rational(BigInt(text));
  std::string whole = text.substr(0, dot);
  std::string frac = text.substr(dot + 1);
  if (whole.empty()) whole = "0";
  BigInt scale = 1;
  for (size_t i = 0; i < frac.size(); ++i) scale *= 10;
  BigInt num = BigInt(whole) * scale + (frac.empty() ? BigInt(0) : BigInt(frac));
  return Rational(num, scale);
}

inline Rational ipow(const Rational& base, long exp) {
  if (exp == 0) return Rational(1);
  bool neg = exp < 0;
  unsigned long n = neg ? static_cast<unsigned long>(-exp) : static_cast<unsigned long>(exp);
  Rational acc(1), b = base;
  while (n > 0) {
    if (n & 1u) acc *= b;
    b *= b;
    n >>= 1u;
  }
  if (neg) {
    if (acc == 0) throw std::domain_error("zero raised to a negative power");
    acc = Rational(1) / acc;
  }
  return acc;
}

// Exact n-th root of a nonnegative integer, if it is a perfect power.
inline std::optional<BigInt> exactIntRoot(const BigInt& v, unsigned long n) {
  if (v < 0) return std::nullopt;
  if (v == 0 || v == 1 || n == 1) return v;
  // Newton iteration on integers, then verify.
  BigInt x = 1;
  {
    // crude initial guess: 2^(ceil(bits/n))
    size_t bits = boost::multiprecision::msb(v) + 1;
    size_t shift = (bits + n - 1) / n;
    x = BigInt(1) << shift;
  }
  BigInt prev = -1;
  while (x != prev) {
    prev = x;
    BigInt xn1 = 1;
    for (unsigned long i = 0; i + 1 < n; ++i) xn1 *= x;
    BigInt next = ((n - 1) * x + v / xn1) / n;
    if (next >= x) break;
    x = next;
  }
  for (BigInt cand = (x > 1 ? x - 1 : BigInt(0)); cand <= x + 1; ++cand) {
    BigInt p = 1;
    for (unsigned long i = 0; i < n; ++i) p *= cand;
    if (p == v) return cand;
  }
  return std::nullopt;
}

// base^(p/q) when it has an exact rational value; nullopt otherwise.
inline std::optional<Rational> exactPow(const Rational& base, const Rational& exp) {
  if (isInteger(exp)) {
    BigInt e = numerator(exp);
    if (e > 1'000'000 || e < -1'000'000) return std::nullopt;  // keep sizes sane
    return ipow(base, static_cast<long>(e));
  }
  BigInt p = numerator(exp), q = denominator(exp);
  if (q > 64) return std::nullopt;
  unsigned long n = static_cast<unsigned long>(q);
  Rational b = base;
  if (b < 0) return std::nullopt;  // even/odd root subtleties: only nonnegative bases
  auto rn = exactIntRoot(numerator(b), n);
  auto rd = exactIntRoot(denominator(b), n);
  if (!rn || !rd) return std::nullopt;
  Rational root(*rn, *rd);
  if (p < -1'000'000 || p > 1'000'000) return std::nullopt;
  return ipow(root, static_cast<long>(p));
}

// Uniform random rational with small numerator/denominator, for sampling
// oracles. Deterministic given the engine state.
inline Rational randomRational(std::mt19937_64& rng, long lo = -12, long hi = 12) {
  std::uniform_int_distribution<long> num(lo, hi);
  std::uniform_int_distribution<long> den(1, 6);
  return Rational(num(rng), den(rng));
}

}  // namespace kaisar
