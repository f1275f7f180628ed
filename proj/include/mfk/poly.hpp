// SPDX-License-Identifier: MIT
#pragma once

/// \file poly.hpp
/// \brief Sparse multivariate polynomials over an exact scalar field,
///        together with the weighted-grading utilities used throughout:
///        parsing, canonical printing, quasi-homogeneity checks, and
///        monomial enumeration by weighted degree.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mfk/scalar.hpp"

namespace mfk {

/// Exponent vector; index = variable position in the declared order.
using Mono = std::vector<uint32_t>;

inline long mono_total_degree(const Mono& m) {
  long d = 0;
  for (uint32_t e : m) d += e;
  return d;
}

inline Mono mono_mul(const Mono& a, const Mono& b) {
  Mono r = a;
  for (size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

/// Weighted degree sum(e_i * w_i).
inline long weighted_degree(const Mono& m, const std::vector<long>& weights) {
  long d = 0;
  for (size_t i = 0; i < m.size(); ++i) d += long(m[i]) * weights[i];
  return d;
}

/// Graded-lexicographic descending order: higher total degree first; ties
/// broken lexicographically with earlier declared variables dominating.
/// Iterating a map with this comparator yields canonical printing order.
struct GrlexDesc {
  bool operator()(const Mono& a, const Mono& b) const {
    long da = mono_total_degree(a), db = mono_total_degree(b);
    if (da != db) return da > db;
    return a > b;  // lexicographic on exponent vectors
  }
};

/// Positive weights on the variables plus the total degree of the potential.
struct WeightSystem {
  std::vector<long> weights;
  long degree = 0;

  bool operator==(const WeightSystem&) const = default;
};

/// Sparse polynomial in a fixed number of variables over scalar field K.
template <class K>
class Poly {
 public:
  using Terms = std::map<Mono, K, GrlexDesc>;

  Poly() : n_(0) {}
  explicit Poly(size_t nvars) : n_(nvars) {}

  static Poly zero(size_t nvars) { return Poly(nvars); }

  static Poly constant(size_t nvars, const K& c) {
    Poly p(nvars);
    p.add_term(Mono(nvars, 0), c);
    return p;
  }

  static Poly variable(size_t nvars, size_t idx) {
    Poly p(nvars);
    Mono m(nvars, 0);
    m[idx] = 1;
    p.add_term(m, scalar_traits<K>::one());
    return p;
  }

  static Poly monomial(size_t nvars, const Mono& m, const K& c) {
    Poly p(nvars);
    p.add_term(m, c);
    return p;
  }

  size_t nvars() const { return n_; }
  bool is_zero() const { return terms_.empty(); }
  size_t term_count() const { return terms_.size(); }
  const Terms& terms() const { return terms_; }

  /// Nonzero constant value if the polynomial is a (possibly zero) constant.
  std::optional<K> constant_value() const {
    if (terms_.empty()) return scalar_traits<K>::zero();
    if (terms_.size() == 1 && mono_total_degree(terms_.begin()->first) == 0)
      return terms_.begin()->second;
    return std::nullopt;
  }

  K coeff(const Mono& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? scalar_traits<K>::zero() : it->second;
  }

  void add_term(const Mono& m, const K& c) {
    if (scalar_is_zero(c)) return;
    auto [it, inserted] = terms_.emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (scalar_is_zero(it->second)) terms_.erase(it);
    }
  }

  Poly operator-() const {
    Poly r(n_);
    for (const auto& [m, c] : terms_) r.terms_.emplace(m, -c);
    return r;
  }

  Poly& operator+=(const Poly& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  Poly& operator-=(const Poly& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  friend Poly operator+(Poly a, const Poly& b) { return a += b; }
  friend Poly operator-(Poly a, const Poly& b) { return a -= b; }

  friend Poly operator*(const Poly& a, const Poly& b) {
    Poly r(a.n_);
    Mono m(a.n_);
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) {
        for (size_t i = 0; i < a.n_; ++i) m[i] = ma[i] + mb[i];
        r.add_term(m, ca * cb);
      }
    }
    return r;
  }
  Poly& operator*=(const Poly& o) { return *this = *this * o; }

  Poly scaled(const K& c) const {
    Poly r(n_);
    if (scalar_is_zero(c)) return r;
    for (const auto& [m, v] : terms_) r.terms_.emplace(m, v * c);
    return r;
  }

  friend bool operator==(const Poly& a, const Poly& b) {
    return a.n_ == b.n_ && a.terms_ == b.terms_;
  }
  friend bool operator!=(const Poly& a, const Poly& b) { return !(a == b); }

  /// Reindexes variables into a space of new_n variables; old variable i
  /// becomes variable where[i].  Exponents on dropped positions must be 0.
  Poly renamed(size_t new_n, const std::vector<size_t>& where) const {
    Poly r(new_n);
    for (const auto& [m, c] : terms_) {
      Mono nm(new_n, 0);
      for (size_t i = 0; i < n_; ++i) {
        if (m[i] == 0) continue;
        nm[where[i]] += m[i];
      }
      r.add_term(nm, c);
    }
    return r;
  }

  /// Substitutes x_i -> c * x_i.
  Poly scaled_variable(size_t idx, const K& c) const {
    Poly r(n_);
    for (const auto& [m, v] : terms_) {
      K f = v;
      for (uint32_t e = 0; e < m[idx]; ++e) f = f * c;
      r.add_term(m, f);
    }
    return r;
  }

  /// Partial derivative with respect to variable idx.
  Poly derivative(size_t idx) const {
    Poly r(n_);
    for (const auto& [m, c] : terms_) {
      if (m[idx] == 0) continue;
      Mono nm = m;
      nm[idx] -= 1;
      r.add_term(nm, c * scalar_traits<K>::from_int(long(m[idx])));
    }
    return r;
  }

  long total_degree() const {
    long d = -1;
    for (const auto& [m, c] : terms_) d = std::max(d, mono_total_degree(m));
    return d;
  }

  /// Largest weighted degree among terms; nullopt for the zero polynomial.
  std::optional<long> max_weighted_degree(const std::vector<long>& w) const {
    std::optional<long> d;
    for (const auto& [m, c] : terms_) {
      long wd = weighted_degree(m, w);
      if (!d || wd > *d) d = wd;
    }
    return d;
  }

  /// The common weighted degree of all terms, if one exists.
  /// The zero polynomial is homogeneous of every degree (returns nullopt
  /// while is_zero() distinguishes the case).
  std::optional<long> homogeneous_degree(const std::vector<long>& w) const {
    std::optional<long> d;
    for (const auto& [m, c] : terms_) {
      long wd = weighted_degree(m, w);
      if (!d) {
        d = wd;
      } else if (*d != wd) {
        return std::nullopt;
      }
    }
    return d;
  }

 private:
  size_t n_;
  Terms terms_;
};

template <class K>
bool is_quasi_homogeneous(const Poly<K>& f, const WeightSystem& ws) {
  if (f.is_zero()) return true;
  auto d = f.homogeneous_degree(ws.weights);
  return d && *d == ws.degree;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

template <class K>
class PolyParser {
 public:
  PolyParser(const std::string& text, const std::vector<std::string>& vars)
      : text_(text), vars_(vars) {}

  Poly<K> parse() {
    Poly<K> p = expr();
    skip_ws();
    if (pos_ != text_.size())
      fail("unexpected trailing input");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw MfkError("parse_error", "polynomial syntax error at position " +
                                      std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Integer number() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (pos_ == start) fail("expected a number");
    return Integer(text_.substr(start, pos_ - start));
  }

  std::string ident() {
    skip_ws();
    size_t start = pos_;
    auto ok = [&](char c, bool first) {
      return std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
             (!first && std::isdigit(static_cast<unsigned char>(c)));
    };
    if (pos_ < text_.size() && ok(text_[pos_], true)) {
      ++pos_;
      while (pos_ < text_.size() && ok(text_[pos_], false)) ++pos_;
    }
    if (pos_ == start) fail("expected a name or number");
    return text_.substr(start, pos_ - start);
  }

  Poly<K> expr() {
    bool neg = false;
    skip_ws();
    while (peek() == '+' || peek() == '-') {
      if (eat('-')) neg = !neg;
      else eat('+');
    }
    Poly<K> acc = term();
    if (neg) acc = -acc;
    for (;;) {
      char c = peek();
      if (c == '+') {
        eat('+');
        acc += term();
      } else if (c == '-') {
        eat('-');
        acc -= term();
      } else {
        break;
      }
    }
    return acc;
  }

  Poly<K> term() {
    Poly<K> acc = factor();
    while (eat('*')) acc *= factor();
    return acc;
  }

  Poly<K> factor() {
    Poly<K> b = base();
    if (eat('^')) {
      Integer e = number();
      if (e < 0 || e > 100000) fail("exponent out of range");
      Poly<K> r = Poly<K>::constant(vars_.size(), scalar_traits<K>::one());
      for (Integer k = 0; k < e; ++k) r *= b;
      return r;
    }
    return b;
  }

  Poly<K> base() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Poly<K> p = expr();
      if (!eat(')')) fail("expected ')'");
      return p;
    }
    if (c == '-') {  // unary minus inside a product, e.g. 2*-x is rejected,
                     // but (-x) comes through expr(); keep strict here.
      fail("unexpected '-'");
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      Integer num = number();
      if (eat('/')) {
        Integer den = number();
        if (den == 0) fail("zero denominator");
        return Poly<K>::constant(
            vars_.size(), K(Rational(num, den)));
      }
      return Poly<K>::constant(vars_.size(), K(Rational(num)));
    }
    std::string name = ident();
    if (name == "i") {
      if constexpr (scalar_traits<K>::is_gaussian) {
        return Poly<K>::constant(vars_.size(), GaussianRational::unit_i());
      } else {
        throw MfkError("imaginary_unit_in_rational_mode",
                       "the imaginary unit 'i' requires gaussian mode");
      }
    }
    for (size_t v = 0; v < vars_.size(); ++v)
      if (vars_[v] == name) return Poly<K>::variable(vars_.size(), v);
    throw MfkError("unknown_variable", "unknown variable '" + name + "'");
  }

  const std::string& text_;
  const std::vector<std::string>& vars_;
  size_t pos_ = 0;
};

}  // namespace detail

/// Parses the textual polynomial grammar: +, -, *, ^, integer and fraction
/// literals, parentheses, the declared variable names, and (over the
/// Gaussian rationals) the literal i.
template <class K>
Poly<K> parse_poly(const std::string& text,
                   const std::vector<std::string>& vars) {
  return detail::PolyParser<K>(text, vars).parse();
}

// ---------------------------------------------------------------------------
// Canonical printing
// ---------------------------------------------------------------------------

namespace detail {

inline void append_product(std::string& out, const Rational& magnitude,
                           bool imaginary, const Mono& m,
                           const std::vector<std::string>& vars) {
  std::vector<std::string> parts;
  if (magnitude != 1 || (!imaginary && mono_total_degree(m) == 0))
    parts.push_back(rational_to_string(magnitude));
  if (imaginary) parts.push_back("i");
  for (size_t v = 0; v < m.size(); ++v) {
    if (m[v] == 0) continue;
    if (m[v] == 1)
      parts.push_back(vars[v]);
    else
      parts.push_back(vars[v] + "^" + std::to_string(m[v]));
  }
  for (size_t k = 0; k < parts.size(); ++k) {
    if (k) out += "*";
    out += parts[k];
  }
}

inline void append_signed(std::string& out, bool first, const Rational& coeff,
                          bool imaginary, const Mono& m,
                          const std::vector<std::string>& vars) {
  bool neg = coeff < 0;
  if (first) {
    if (neg) out += "-";
  } else {
    out += neg ? " - " : " + ";
  }
  append_product(out, neg ? Rational(-coeff) : coeff, imaginary, m, vars);
}

}  // namespace detail

/// Canonical text form: terms in graded-lexicographic descending order with
/// the declared variable order; Gaussian coefficients split into a real part
/// followed by an imaginary part.  parse_poly(print_poly(p)) == p.
template <class K>
std::string print_poly(const Poly<K>& p, const std::vector<std::string>& vars) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    if constexpr (scalar_traits<K>::is_gaussian) {
      if (c.re != 0) {
        detail::append_signed(out, first, c.re, false, m, vars);
        first = false;
      }
      if (c.im != 0) {
        detail::append_signed(out, first, c.im, true, m, vars);
        first = false;
      }
    } else {
      detail::append_signed(out, first, c, false, m, vars);
      first = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monomial enumeration by weighted degree
// ---------------------------------------------------------------------------

/// All exponent vectors with sum(e_i * w_i) == target, in canonical
/// (graded-lexicographic descending) order.  Weights must be positive.
inline std::vector<Mono> enumerate_monomials(const std::vector<long>& weights,
                                             long target) {
  std::vector<Mono> out;
  if (target < 0) return out;
  Mono cur(weights.size(), 0);
  auto rec = [&](auto&& self, size_t idx, long rem) -> void {
    if (idx == weights.size()) {
      if (rem == 0) out.push_back(cur);
      return;
    }
    if (idx + 1 == weights.size()) {
      if (rem % weights[idx] == 0) {
        cur[idx] = uint32_t(rem / weights[idx]);
        out.push_back(cur);
        cur[idx] = 0;
      }
      return;
    }
    for (long e = 0; e * weights[idx] <= rem; ++e) {
      cur[idx] = uint32_t(e);
      self(self, idx + 1, rem - e * weights[idx]);
    }
    cur[idx] = 0;
  };
  rec(rec, 0, target);
  std::sort(out.begin(), out.end(), GrlexDesc{});
  return out;
}

}  // namespace mfk
