// SPDX-License-Identifier: MIT
#pragma once

/// \file modp.hpp
/// \brief Streaming rank engines used for certified rank bounds.
///
/// Reduction modulo a prime can only lower the rank of a matrix over Q or
/// Q(i).  Whenever an a-priori ceiling for a rank is known (here: from the
/// complex property im d in ker d), hitting that ceiling modulo p therefore
/// certifies the exact rank.  Candidate nonzero answers are recomputed with
/// exact arithmetic by the sparse eliminator below.
///
/// The F_p engine keeps row accumulators in 64-bit integers and delays the
/// modulo: with p < 2^15 every elimination adds at most (p-1)^2 < 2^30 per
/// entry and at most ncols eliminations touch a row, so values stay below
/// 2^30 * ncols < 2^64 for all sizes used here.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "mfk/scalar.hpp"

namespace mfk {

inline uint64_t pow_mod(uint64_t b, uint64_t e, uint64_t p) {
  uint64_t r = 1;
  b %= p;
  while (e) {
    if (e & 1) r = r * b % p;
    b = b * b % p;
    e >>= 1;
  }
  return r;
}

inline uint64_t inv_mod(uint64_t v, uint64_t p) { return pow_mod(v, p - 2, p); }

/// Smallest r with r^2 = -1 (mod p); requires p = 1 (mod 4).
inline uint32_t sqrt_minus_one_mod(uint32_t p) {
  for (uint64_t r = 2; r < p; ++r)
    if (r * r % p == p - 1ULL) return uint32_t(r);
  throw MfkError("internal_error", "no square root of -1 modulo prime");
}

/// Primes below 2^15 congruent to 1 mod 4, so both coefficient fields embed.
inline const std::vector<uint32_t>& certification_primes() {
  static const std::vector<uint32_t> ps = {32749, 32717, 32713};
  return ps;
}

/// Image of a rational in F_p, unless the denominator vanishes mod p.
inline std::optional<uint32_t> fp_image(const Rational& v, uint32_t p) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  Integer den = denominator(v) % p;
  if (den == 0) return std::nullopt;
  Integer num = numerator(v) % p;
  uint64_t n = uint64_t((num < 0 ? num + p : num));
  uint64_t d = uint64_t(den);
  return uint32_t(n * inv_mod(d, p) % p);
}

/// Image of a Gaussian rational under i -> root, with root^2 = -1 (mod p).
inline std::optional<uint32_t> fp_image(const GaussianRational& v, uint32_t p,
                                        uint32_t root) {
  auto re = fp_image(v.re, p);
  auto im = fp_image(v.im, p);
  if (!re || !im) return std::nullopt;
  return uint32_t((uint64_t(*re) + uint64_t(*im) * root) % p);
}

// ---------------------------------------------------------------------------
// F_p streaming row echelon with delayed reduction and early exit
// ---------------------------------------------------------------------------

class FpRowEchelon {
 public:
  FpRowEchelon(uint32_t p, size_t ncols)
      : p_(p), ncols_(ncols), pivot_of_col_(ncols, -1), buf_(ncols, 0) {}

  /// Feeds one row given as (column, value mod p) pairs; duplicate columns
  /// accumulate.  Returns true iff the rank increased.
  bool add_row(const std::vector<std::pair<uint32_t, uint32_t>>& entries) {
    std::fill(buf_.begin(), buf_.end(), 0);
    for (auto [c, v] : entries) buf_[c] = (buf_[c] + v) % p_;
    for (size_t c = 0; c < ncols_; ++c) {
      uint64_t v = buf_[c] % p_;
      if (v == 0) continue;
      int32_t k = pivot_of_col_[c];
      if (k < 0) {
        // New pivot: normalize and store the tail from column c onward.
        uint64_t inv = inv_mod(v, p_);
        std::vector<uint32_t> row(ncols_ - c);
        row[0] = 1;
        for (size_t j = c + 1; j < ncols_; ++j)
          row[j - c] = uint32_t(buf_[j] % p_ * inv % p_);
        pivot_of_col_[c] = int32_t(rows_.size());
        rows_.push_back(std::move(row));
        pivot_col_.push_back(uint32_t(c));
        return true;
      }
      uint64_t mult = p_ - v;
      const std::vector<uint32_t>& prow = rows_[size_t(k)];
      uint64_t* b = buf_.data() + c;
      for (size_t j = 1; j < prow.size(); ++j) b[j] += mult * prow[j];
      buf_[c] = 0;
    }
    return false;
  }

  size_t rank() const { return rows_.size(); }

 private:
  uint64_t p_;
  size_t ncols_;
  std::vector<int32_t> pivot_of_col_;
  std::vector<std::vector<uint32_t>> rows_;
  std::vector<uint32_t> pivot_col_;
  std::vector<uint64_t> buf_;
};

// ---------------------------------------------------------------------------
// F_2 streaming row echelon on packed words
// ---------------------------------------------------------------------------

class F2RowEchelon {
 public:
  explicit F2RowEchelon(size_t ncols)
      : ncols_(ncols),
        words_((ncols + 63) / 64),
        pivot_of_col_(ncols, -1),
        buf_(words_, 0) {}

  /// Feeds one row given by its nonzero columns (mod 2: repeats cancel).
  bool add_row(const std::vector<uint32_t>& cols) {
    std::fill(buf_.begin(), buf_.end(), 0);
    for (uint32_t c : cols) buf_[c >> 6] ^= uint64_t(1) << (c & 63);
    for (size_t w = 0; w < words_; ++w) {
      while (buf_[w]) {
        size_t c = (w << 6) + size_t(__builtin_ctzll(buf_[w]));
        int32_t k = pivot_of_col_[c];
        if (k < 0) {
          size_t start = w;
          std::vector<uint64_t> row(buf_.begin() + start, buf_.end());
          pivot_of_col_[c] = int32_t(rows_.size());
          rows_.push_back(std::move(row));
          row_start_.push_back(uint32_t(start));
          return true;
        }
        const std::vector<uint64_t>& prow = rows_[size_t(k)];
        size_t start = row_start_[size_t(k)];
        for (size_t j = 0; j < prow.size(); ++j) buf_[start + j] ^= prow[j];
      }
    }
    return false;
  }

  size_t rank() const { return rows_.size(); }

 private:
  size_t ncols_, words_;
  std::vector<int32_t> pivot_of_col_;
  std::vector<std::vector<uint64_t>> rows_;
  std::vector<uint32_t> row_start_;
  std::vector<uint64_t> buf_;
};

// ---------------------------------------------------------------------------
// Exact sparse elimination (authoritative ranks)
// ---------------------------------------------------------------------------

/// Sparse Gaussian elimination over an exact field with peel-first pivoting:
/// singleton rows/columns eliminate with zero fill; otherwise pivots are
/// chosen to approximately minimize fill.
template <class K>
class SparseRankExact {
 public:
  SparseRankExact(size_t nrows, size_t ncols)
      : rows_(nrows), col_rows_(ncols), row_alive_(nrows, true),
        col_alive_(ncols, true) {}

  void add_entry(size_t r, size_t c, const K& v) {
    if (scalar_is_zero(v)) return;
    auto [it, inserted] = rows_[r].emplace(c, v);
    if (!inserted) {
      it->second += v;
      if (scalar_is_zero(it->second)) rows_[r].erase(it);
    }
  }

  /// Destructive; call once.
  size_t rank() {
    for (size_t r = 0; r < rows_.size(); ++r)
      for (const auto& [c, v] : rows_[r]) col_rows_[c].insert(r);
    size_t rk = 0;
    for (;;) {
      auto [pr, pc] = pick_pivot();
      if (pr == npos) break;
      eliminate(pr, pc);
      ++rk;
    }
    return rk;
  }

 private:
  static constexpr size_t npos = size_t(-1);

  std::pair<size_t, size_t> pick_pivot() {
    // Best column by nonzero count; within it, the row with fewest entries.
    size_t best_c = npos, best_cn = npos;
    for (size_t c = 0; c < col_rows_.size(); ++c) {
      if (!col_alive_[c] || col_rows_[c].empty()) continue;
      if (col_rows_[c].size() < best_cn) {
        best_cn = col_rows_[c].size();
        best_c = c;
        if (best_cn == 1) break;
      }
    }
    if (best_c == npos) return {npos, npos};
    size_t best_r = npos, best_rn = npos;
    for (size_t r : col_rows_[best_c]) {
      if (rows_[r].size() < best_rn) {
        best_rn = rows_[r].size();
        best_r = r;
      }
    }
    return {best_r, best_c};
  }

  void eliminate(size_t pr, size_t pc) {
    const K pv = rows_[pr].at(pc);
    std::vector<size_t> targets(col_rows_[pc].begin(), col_rows_[pc].end());
    for (size_t r : targets) {
      if (r == pr) continue;
      K factor = rows_[r].at(pc) / pv;
      for (const auto& [c, v] : rows_[pr]) {
        if (!col_alive_[c]) continue;
        auto [it, inserted] = rows_[r].emplace(c, -(factor * v));
        if (!inserted) {
          it->second -= factor * v;
          if (scalar_is_zero(it->second)) {
            rows_[r].erase(it);
            col_rows_[c].erase(r);
            continue;
          }
        } else {
          col_rows_[c].insert(r);
        }
      }
    }
    // Retire the pivot row and column.
    for (const auto& [c, v] : rows_[pr]) col_rows_[c].erase(pr);
    rows_[pr].clear();
    for (size_t r : col_rows_[pc]) rows_[r].erase(pc);
    col_rows_[pc].clear();
    row_alive_[pr] = false;
    col_alive_[pc] = false;
  }

  std::vector<std::map<size_t, K>> rows_;
  std::vector<std::set<size_t>> col_rows_;
  std::vector<bool> row_alive_, col_alive_;
};

}  // namespace mfk
