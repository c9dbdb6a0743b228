#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <string>

#include "symopt/errors.hpp"

namespace symopt {

// Exact rational number for unit exponents (sqrt introduces halves).
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n) : num(n), den(1) {}  // NOLINT: implicit by design
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den == 0) throw ConfigError("rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  bool is_zero() const { return num == 0; }

  friend Rational operator+(Rational a, Rational b) {
    return Rational{a.num * b.den + b.num * a.den, a.den * b.den};
  }
  friend Rational operator-(Rational a, Rational b) {
    return Rational{a.num * b.den - b.num * a.den, a.den * b.den};
  }
  friend Rational operator-(Rational a) { return Rational{-a.num, a.den}; }
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend auto operator<=>(const Rational& a, const Rational& b) {
    return a.num * b.den <=> b.num * a.den;
  }

  std::string str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
  }
};

// Physical unit as a map from base-dimension name to rational exponent, or the
// distinguished UNKNOWN value for units that cannot be determined yet.
// DIMENSIONLESS is the all-zero signature (empty map).
class UnitSignature {
 public:
  UnitSignature() = default;

  static UnitSignature dimensionless() { return UnitSignature{}; }

  static UnitSignature unknown() {
    UnitSignature u;
    u.unknown_ = true;
    return u;
  }

  static UnitSignature of(std::map<std::string, Rational> exponents) {
    UnitSignature u;
    for (auto& [dim, e] : exponents) {
      if (!e.is_zero()) u.exp_.emplace(dim, e);
    }
    return u;
  }

  bool is_unknown() const { return unknown_; }
  bool is_dimensionless() const { return !unknown_ && exp_.empty(); }
  const std::map<std::string, Rational>& exponents() const { return exp_; }

  Rational exponent(const std::string& dim) const {
    auto it = exp_.find(dim);
    return it == exp_.end() ? Rational{0} : it->second;
  }

  // Product/quotient add/subtract exponents componentwise; UNKNOWN absorbs.
  friend UnitSignature operator*(const UnitSignature& a, const UnitSignature& b) {
    return combine(a, b, /*subtract=*/false);
  }
  friend UnitSignature operator/(const UnitSignature& a, const UnitSignature& b) {
    return combine(a, b, /*subtract=*/true);
  }

  friend bool operator==(const UnitSignature& a, const UnitSignature& b) {
    return a.unknown_ == b.unknown_ && a.exp_ == b.exp_;
  }

  std::string str() const {
    if (unknown_) return "?";
    if (exp_.empty()) return "1";
    std::string s;
    for (const auto& [dim, e] : exp_) {
      if (!s.empty()) s += " ";
      s += dim + "^" + e.str();
    }
    return s;
  }

 private:
  static UnitSignature combine(const UnitSignature& a, const UnitSignature& b, bool subtract) {
    if (a.unknown_ || b.unknown_) return unknown();
    UnitSignature out = a;
    for (const auto& [dim, e] : b.exp_) {
      Rational r = out.exponent(dim) + (subtract ? -e : e);
      if (r.is_zero()) {
        out.exp_.erase(dim);
      } else {
        out.exp_[dim] = r;
      }
    }
    return out;
  }

  std::map<std::string, Rational> exp_;
  bool unknown_ = false;
};

}  // namespace symopt
