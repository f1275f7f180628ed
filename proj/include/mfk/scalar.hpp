// SPDX-License-Identifier: MIT
#pragma once

/// \file scalar.hpp
/// \brief Exact coefficient fields: arbitrary-precision rationals and
///        Gaussian rationals.  No floating point anywhere.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

namespace mfk {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Error with a stable machine-readable code alongside the human message.
/// Thrown for domain failures (bad input, violated invariants, exceeded
/// bounds); the CLI maps these to exit status 1 and a JSON report.
class MfkError : public std::runtime_error {
 public:
  MfkError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

/// Element of Q(i): re + im*i with exact rational parts.
struct GaussianRational {
  Rational re, im;

  GaussianRational() = default;
  GaussianRational(Rational r) : re(std::move(r)) {}                // NOLINT
  GaussianRational(long v) : re(v) {}                               // NOLINT
  GaussianRational(Rational r, Rational i)
      : re(std::move(r)), im(std::move(i)) {}

  static GaussianRational unit_i() { return {Rational(0), Rational(1)}; }

  bool is_zero() const { return re == 0 && im == 0; }
  GaussianRational conj() const { return {re, -im}; }

  GaussianRational operator-() const { return {-re, -im}; }
  GaussianRational& operator+=(const GaussianRational& o) {
    re += o.re;
    im += o.im;
    return *this;
  }
  GaussianRational& operator-=(const GaussianRational& o) {
    re -= o.re;
    im -= o.im;
    return *this;
  }
  GaussianRational& operator*=(const GaussianRational& o) {
    Rational r = re * o.re - im * o.im;
    Rational i = re * o.im + im * o.re;
    re = std::move(r);
    im = std::move(i);
    return *this;
  }
  GaussianRational& operator/=(const GaussianRational& o) {
    Rational n = o.re * o.re + o.im * o.im;
    if (n == 0) throw MfkError("division_by_zero", "division by zero scalar");
    Rational r = (re * o.re + im * o.im) / n;
    Rational i = (im * o.re - re * o.im) / n;
    re = std::move(r);
    im = std::move(i);
    return *this;
  }

  friend GaussianRational operator+(GaussianRational a,
                                    const GaussianRational& b) {
    return a += b;
  }
  friend GaussianRational operator-(GaussianRational a,
                                    const GaussianRational& b) {
    return a -= b;
  }
  friend GaussianRational operator*(GaussianRational a,
                                    const GaussianRational& b) {
    return a *= b;
  }
  friend GaussianRational operator/(GaussianRational a,
                                    const GaussianRational& b) {
    return a /= b;
  }
  friend bool operator==(const GaussianRational& a, const GaussianRational& b) {
    return a.re == b.re && a.im == b.im;
  }
  friend bool operator!=(const GaussianRational& a, const GaussianRational& b) {
    return !(a == b);
  }
};

/// Uniform hooks over the two supported coefficient fields.
template <class K>
struct scalar_traits;

template <>
struct scalar_traits<Rational> {
  static constexpr bool is_gaussian = false;
  static const char* mode_name() { return "rational"; }
  static Rational zero() { return Rational(0); }
  static Rational one() { return Rational(1); }
  static bool is_zero(const Rational& v) { return v == 0; }
  static Rational from_int(long v) { return Rational(v); }
};

template <>
struct scalar_traits<GaussianRational> {
  static constexpr bool is_gaussian = true;
  static const char* mode_name() { return "gaussian"; }
  static GaussianRational zero() { return {}; }
  static GaussianRational one() { return GaussianRational(1); }
  static bool is_zero(const GaussianRational& v) { return v.is_zero(); }
  static GaussianRational from_int(long v) { return GaussianRational(v); }
};

inline bool scalar_is_zero(const Rational& v) { return v == 0; }
inline bool scalar_is_zero(const GaussianRational& v) { return v.is_zero(); }

/// Renders a rational in canonical lowest terms, e.g. "3", "-3/2".
inline std::string rational_to_string(const Rational& v) {
  return v.str();
}

}  // namespace mfk
