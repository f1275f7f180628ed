// SPDX-License-Identifier: MIT
#pragma once
/// @file homotopy.hpp
/// Hom complexes of matrix factorizations: graded slice-by-slice homology
/// with certified exact ranks, null-homotopy solving, and homotopy
/// equivalence search returning verified certificates.
///
/// The homology driver decomposes each graded slice of the Hom complex into
/// sectors (a monomial multigrading refinement), computes ranks with a
/// ladder of engines (GF(2) bitsets, a word-size prime, exact sparse
/// elimination), and certifies modular ranks as exact whenever the chain
/// inequality rank(in) + rank(out) <= dim forces equality.  Verified
/// symmetries transport sector ranks across orbits so only one
/// representative per orbit is eliminated.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mfk/linalg.hpp"
#include "mfk/mf.hpp"
#include "mfk/modp.hpp"
#include "mfk/poly.hpp"
#include "mfk/scalar.hpp"

namespace mfk {

// ---------------------------------------------------------------------------
// Result types
// ---------------------------------------------------------------------------

/// Odd Hom element (u, v): u maps P1 -> Q0, v maps P0 -> Q1.  For a morphism
/// alpha: P -> Q it witnesses alpha ~ 0 via
///   d0' u + v d1 = alpha1   and   d1' v + u d0 = alpha0.
template <class K>
struct Homotopy {
  DenseMatrix<Poly<K>> u{0, 0, Poly<K>()};
  DenseMatrix<Poly<K>> v{0, 0, Poly<K>()};
};

template <class K>
struct NullHomotopyOutcome {
  bool found = false;
  /// True when the searched space provably contains every possible witness,
  /// so found == false refutes null-homotopy.  Witnesses returned with
  /// found == true are always verified exactly.
  bool conclusive = false;
  std::optional<Homotopy<K>> homotopy;
};

struct HomologySliceRow {
  long t = 0;
  size_t dim_even = 0, dim_odd = 0;
  size_t rank_even = 0, rank_odd = 0;
  size_t h0 = 0, h1 = 0;
};

struct HomologyResult {
  std::vector<HomologySliceRow> slices;
  size_t h0_total = 0, h1_total = 0;
  /// False when a cap stopped the scan before the zero margin was reached;
  /// the table then holds the partial results.
  bool complete = true;
  long margin = 0;
  std::string engine_summary;
};

struct HomOptions {
  /// Symmetries of the factorization (used only when source == target) for
  /// transporting sector ranks across orbits.  Re-verified before use.
  std::vector<SymmetryCert> symmetries;
  bool use_sectors = true;
  bool use_mod_p = true;
  size_t max_slices = 256;
  size_t max_slice_dim = 20'000'000;
};

struct NullHomotopyOptions {
  std::optional<long> degree_bound;  ///< pin the ansatz bound (no doubling)
  size_t max_dense_cells = 25'000'000;
};

template <class K>
struct EquivalenceResult {
  /// True only with a fully verified certificate: forward and backward
  /// morphisms plus homotopies contracting both round trips to identities.
  bool equivalent = false;
  /// Negative answers are never conclusive here (the search may simply not
  /// have reached a witness); positives are verified and conclusive.
  bool conclusive = false;
  std::optional<MFMorphism<K>> forward, backward;
  std::optional<Homotopy<K>> h_source;  ///< backward o forward ~ id(source)
  std::optional<Homotopy<K>> h_target;  ///< forward o backward ~ id(target)
  std::string detail;  ///< how the search ended (for diagnostics)
};

struct EquivOptions {
  size_t max_candidates = 64;
  size_t max_search_dim = 4000;
  std::optional<long> degree_bound;  ///< ungraded ansatz bound
  size_t max_dense_cells = 25'000'000;
};

// ---------------------------------------------------------------------------
// Internal machinery
// ---------------------------------------------------------------------------

namespace detail {

/// Integer lattice L in Z^n kept in echelon form: each row has zeros left of
/// its positive pivot, rows sorted by pivot column.  Cosets of Z^n/L then
/// have unique greedy representatives (canon).
class ExponentLattice {
 public:
  explicit ExponentLattice(size_t n) : n_(n) {}

  /// Adds v to the lattice; returns true iff the lattice grew.
  bool add(std::vector<Integer> v) {
    bool changed = false;
    for (size_t c = 0; c < n_; ++c) {
      if (v[c] == 0) continue;
      int r = pivot_row(c);
      if (r < 0) {
        if (v[c] < 0)
          for (auto& x : v) x = -x;
        rows_.push_back(std::move(v));
        order_.push_back(c);
        for (size_t k = rows_.size() - 1; k > 0; --k)
          if (order_[k] < order_[k - 1]) {
            std::swap(order_[k], order_[k - 1]);
            std::swap(rows_[k], rows_[k - 1]);
          }
        normalize_signs();
        return true;
      }
      // Euclidean exchange at column c; both vectors keep zeros left of c.
      while (v[c] != 0) {
        Integer qq = v[c] / rows_[size_t(r)][c];
        if (qq != 0)
          for (size_t j = c; j < n_; ++j) v[j] -= qq * rows_[size_t(r)][j];
        if (v[c] == 0) break;
        std::swap(v, rows_[size_t(r)]);
        changed = true;
      }
    }
    if (changed) normalize_signs();
    return changed;
  }

  /// Canonical representative of v + L: at each pivot column c the result
  /// lies in [0, pivot_c).  Unique per coset.
  std::vector<Integer> canon(std::vector<Integer> v) const {
    for (size_t k = 0; k < rows_.size(); ++k) {
      size_t c = order_[k];
      if (v[c] == 0) continue;
      Integer qq = v[c] / rows_[k][c];
      if (v[c] - qq * rows_[k][c] < 0) qq -= 1;
      if (qq != 0)
        for (size_t j = c; j < n_; ++j) v[j] -= qq * rows_[k][j];
    }
    return v;
  }

  bool contains(std::vector<Integer> v) const {
    v = canon(std::move(v));
    for (const auto& x : v)
      if (x != 0) return false;
    return true;
  }

  const std::vector<std::vector<Integer>>& basis() const { return rows_; }
  size_t dim_ambient() const { return n_; }

 private:
  int pivot_row(size_t c) const {
    for (size_t k = 0; k < rows_.size(); ++k)
      if (order_[k] == c) return int(k);
    return -1;
  }

  void normalize_signs() {
    for (size_t k = 0; k < rows_.size(); ++k)
      if (rows_[k][order_[k]] < 0)
        for (auto& x : rows_[k]) x = -x;
  }

  size_t n_;
  std::vector<std::vector<Integer>> rows_;
  std::vector<size_t> order_;  ///< pivot column of each row
};

inline std::vector<Integer> exp_vector(const Mono& m) {
  std::vector<Integer> v(m.size());
  for (size_t i = 0; i < m.size(); ++i) v[i] = m[i];
  return v;
}

/// Monomial multidegree labels for the generators of two factorizations of a
/// common potential.  The lattice grows until every entry is homogeneous
/// modulo L and every constraint cycle closes; a full lattice collapses
/// everything to a single sector (the always-valid trivial refinement).
struct MultiDegreeLabels {
  ExponentLattice lattice;
  std::vector<std::vector<Integer>> p1, p0, q1, q0;
  std::vector<Integer> phi;  ///< multidegree of the potential
  bool p_connected = true, q_connected = true;

  explicit MultiDegreeLabels(size_t n) : lattice(n) {}
};

template <class K>
void seed_entry_differences(ExponentLattice& lat,
                            const DenseMatrix<Poly<K>>& m) {
  for (size_t i = 0; i < m.rows(); ++i)
    for (size_t j = 0; j < m.cols(); ++j) {
      const auto& terms = m.at(i, j).terms();
      if (terms.empty()) continue;
      const Mono first = terms.begin()->first;
      for (const auto& [mono, c] : terms) {
        (void)c;
        std::vector<Integer> dv = exp_vector(mono);
        for (size_t k = 0; k < dv.size(); ++k) dv[k] -= Integer(first[k]);
        lat.add(std::move(dv));
      }
    }
}

/// One labeling pass over an MF's generator graph (edges are the nonzero
/// entries); returns false after growing the lattice when some constraint
/// cycle fails to close modulo L.
template <class K>
bool assign_labels(const MatrixFactorization<K>& m, ExponentLattice& lat,
                   const std::vector<Integer>& phi,
                   std::vector<std::vector<Integer>>& g1,
                   std::vector<std::vector<Integer>>& g0, bool& connected) {
  const size_t n = m.nvars();
  const size_t r1 = m.rank1(), r0 = m.rank0();
  std::vector<char> seen1(r1, 0), seen0(r0, 0);
  g1.assign(r1, std::vector<Integer>(n, 0));
  g0.assign(r0, std::vector<Integer>(n, 0));
  // Constraints: entry d1[i][j] forces g0[i] - g1[j] = exp (mod L); entry
  // d0[i][j] forces g1[i] - g0[j] = exp - phi (mod L), mirroring the integer
  // grading where the second differential carries the potential's degree.
  auto edge_vec = [&](const Poly<K>& e, bool with_phi) {
    std::vector<Integer> v = exp_vector(e.terms().begin()->first);
    if (with_phi)
      for (size_t k = 0; k < n; ++k) v[k] -= phi[k];
    return v;
  };
  size_t components = 0;
  std::vector<std::pair<int, size_t>> stack;
  for (size_t start = 0; start < r1 + r0; ++start) {
    const int sside = start < r1 ? 1 : 0;
    const size_t sidx = start < r1 ? start : start - r1;
    if (sside == 1 ? seen1[sidx] : seen0[sidx]) continue;
    ++components;
    stack.push_back({sside, sidx});
    (sside == 1 ? seen1[sidx] : seen0[sidx]) = 1;
    while (!stack.empty()) {
      auto [side, idx] = stack.back();
      stack.pop_back();
      if (side == 1) {
        for (size_t i = 0; i < r0; ++i) {
          const Poly<K>& e = m.d1.at(i, idx);
          if (e.is_zero() || seen0[i]) continue;
          auto v = edge_vec(e, false);
          for (size_t k = 0; k < n; ++k) g0[i][k] = g1[idx][k] + v[k];
          seen0[i] = 1;
          stack.push_back({0, i});
        }
        for (size_t j = 0; j < r0; ++j) {
          const Poly<K>& e = m.d0.at(idx, j);
          if (e.is_zero() || seen0[j]) continue;
          auto v = edge_vec(e, true);
          for (size_t k = 0; k < n; ++k) g0[j][k] = g1[idx][k] - v[k];
          seen0[j] = 1;
          stack.push_back({0, j});
        }
      } else {
        for (size_t j = 0; j < r1; ++j) {
          const Poly<K>& e = m.d1.at(idx, j);
          if (e.is_zero() || seen1[j]) continue;
          auto v = edge_vec(e, false);
          for (size_t k = 0; k < n; ++k) g1[j][k] = g0[idx][k] - v[k];
          seen1[j] = 1;
          stack.push_back({1, j});
        }
        for (size_t i = 0; i < r1; ++i) {
          const Poly<K>& e = m.d0.at(i, idx);
          if (e.is_zero() || seen1[i]) continue;
          auto v = edge_vec(e, true);
          for (size_t k = 0; k < n; ++k) g1[i][k] = g0[idx][k] + v[k];
          seen1[i] = 1;
          stack.push_back({1, i});
        }
      }
    }
  }
  connected = components <= 1;
  // Verify every constraint; grow the lattice on the first discrepancy.
  for (size_t i = 0; i < r0; ++i)
    for (size_t j = 0; j < r1; ++j) {
      const Poly<K>& e = m.d1.at(i, j);
      if (e.is_zero()) continue;
      auto v = edge_vec(e, false);
      std::vector<Integer> delta(n);
      for (size_t k = 0; k < n; ++k) delta[k] = g0[i][k] - g1[j][k] - v[k];
      if (!lat.contains(delta)) {
        if (!lat.add(std::move(delta)))
          throw MfkError("internal_error", "lattice failed to grow");
        return false;
      }
    }
  for (size_t i = 0; i < r1; ++i)
    for (size_t j = 0; j < r0; ++j) {
      const Poly<K>& e = m.d0.at(i, j);
      if (e.is_zero()) continue;
      auto v = edge_vec(e, true);
      std::vector<Integer> delta(n);
      for (size_t k = 0; k < n; ++k) delta[k] = g1[i][k] - g0[j][k] - v[k];
      if (!lat.contains(delta)) {
        if (!lat.add(std::move(delta)))
          throw MfkError("internal_error", "lattice failed to grow");
        return false;
      }
    }
  return true;
}

template <class K>
MultiDegreeLabels build_labels(const MatrixFactorization<K>& p,
                               const MatrixFactorization<K>& q,
                               bool use_sectors) {
  const size_t n = p.nvars();
  MultiDegreeLabels lab(n);
  lab.phi.assign(n, 0);
  if (!use_sectors) {
    for (size_t i = 0; i < n; ++i) {
      std::vector<Integer> e(n, 0);
      e[i] = 1;
      lab.lattice.add(std::move(e));
    }
    lab.p1.assign(p.rank1(), std::vector<Integer>(n, 0));
    lab.p0.assign(p.rank0(), std::vector<Integer>(n, 0));
    lab.q1.assign(q.rank1(), std::vector<Integer>(n, 0));
    lab.q0.assign(q.rank0(), std::vector<Integer>(n, 0));
    return lab;
  }
  if (!p.f.is_zero()) {
    lab.phi = exp_vector(p.f.terms().begin()->first);
    for (const auto& [mono, c] : p.f.terms()) {
      (void)c;
      std::vector<Integer> dv = exp_vector(mono);
      for (size_t k = 0; k < n; ++k) dv[k] -= lab.phi[k];
      lab.lattice.add(std::move(dv));
    }
  }
  seed_entry_differences(lab.lattice, p.d1);
  seed_entry_differences(lab.lattice, p.d0);
  seed_entry_differences(lab.lattice, q.d1);
  seed_entry_differences(lab.lattice, q.d0);
  // Grow the lattice until both labelings close.  Each retry strictly
  // enlarges L, and ascending chains of subgroups of Z^n stabilize, so the
  // loop terminates (at worst with L = Z^n, the single-sector refinement).
  for (;;) {
    if (!assign_labels(p, lab.lattice, lab.phi, lab.p1, lab.p0,
                       lab.p_connected))
      continue;
    if (!assign_labels(q, lab.lattice, lab.phi, lab.q1, lab.q0,
                       lab.q_connected))
      continue;
    break;
  }
  return lab;
}

/// Shared monomial bases per weighted degree, in a fixed deterministic order.
class MonomialTable {
 public:
  explicit MonomialTable(std::vector<long> weights)
      : weights_(std::move(weights)) {}

  const std::vector<Mono>& list(long deg) {
    auto it = lists_.find(deg);
    if (it != lists_.end()) return it->second;
    std::vector<Mono> l;
    if (deg == 0)
      l.push_back(Mono(weights_.size(), 0));
    else if (deg > 0)
      l = enumerate_monomials(weights_, deg);
    auto [jt, ins] = lists_.emplace(deg, std::move(l));
    (void)ins;
    auto& idx = index_[deg];
    for (size_t k = 0; k < jt->second.size(); ++k)
      idx.emplace(jt->second[k], k);
    return jt->second;
  }

  size_t index_of(long deg, const Mono& m) {
    list(deg);
    const auto& idx = index_.at(deg);
    auto it = idx.find(m);
    if (it == idx.end())
      throw MfkError("internal_error", "monomial missing from slice basis");
    return it->second;
  }

 private:
  std::vector<long> weights_;
  std::map<long, std::vector<Mono>> lists_;
  std::map<long, std::map<Mono, size_t>> index_;
};

struct SlicePos {
  uint32_t i = 0, j = 0;
  long delta = 0;             ///< weighted degree of monomials at this cell
  size_t offset = 0;          ///< first global element index
  size_t width = 0;           ///< number of monomials
  std::vector<Integer> base;  ///< sector base vector (before the monomial)
};

/// Basis of one graded slice of the even or odd part of the Hom complex.
/// Even block 0 holds alpha1 cells (Q1 x P1), block 1 alpha0 (Q0 x P0);
/// odd block 0 holds u cells (Q0 x P1), block 1 v (Q1 x P0).
struct SliceBasis {
  long t = 0;
  bool even = true;
  size_t rows0 = 0, cols0 = 0, rows1 = 0, cols1 = 0;
  std::vector<SlicePos> pos;  ///< block 0 row-major, then block 1 row-major
  size_t dim = 0;
  std::vector<uint32_t> sector_of;  ///< per element: interned label id
  std::vector<uint32_t> local_of;   ///< per element: index within its sector
  std::map<uint32_t, std::vector<size_t>> elems_of_sector;

  size_t pos_index(int block, size_t i, size_t j) const {
    return block == 0 ? i * cols0 + j : rows0 * cols0 + i * cols1 + j;
  }
  size_t sector_dim(uint32_t s) const {
    auto it = elems_of_sector.find(s);
    return it == elems_of_sector.end() ? 0 : it->second.size();
  }
};

class LabelInterner {
 public:
  uint32_t intern(const std::vector<Integer>& v) {
    auto it = ids_.find(v);
    if (it != ids_.end()) return it->second;
    uint32_t id = uint32_t(vecs_.size());
    ids_.emplace(v, id);
    vecs_.push_back(v);
    return id;
  }
  const std::vector<Integer>& vec(uint32_t id) const { return vecs_[id]; }

 private:
  std::map<std::vector<Integer>, uint32_t> ids_;
  std::vector<std::vector<Integer>> vecs_;
};

/// Fixed data for computations in Hom(P, Q) between graded factorizations:
/// sector labels, monomial tables, cached slice bases, and the slice
/// differential.  Both factorizations must be validated, graded with one
/// weight system, and share the potential.
template <class K>
class HomContext {
 public:
  HomContext(const MatrixFactorization<K>& p, const MatrixFactorization<K>& q,
             bool use_sectors)
      : p_(p),
        q_(q),
        labels_(build_labels(p, q, use_sectors)),
        monos_(p.grading->ws.weights),
        ws_(p.grading->ws),
        d_(p.grading->ws.degree) {}

  const MatrixFactorization<K>& p() const { return p_; }
  const MatrixFactorization<K>& q() const { return q_; }
  long degree() const { return d_; }
  const WeightSystem& ws() const { return ws_; }
  const MultiDegreeLabels& labels() const { return labels_; }

  /// Label of the sector reached from s by dir steps of the potential's
  /// multidegree (dir = +1 along the odd differential).
  uint32_t shift_label(uint32_t s, int dir) {
    std::vector<Integer> v = interner_.vec(s);
    for (size_t k = 0; k < v.size(); ++k) v[k] += dir * labels_.phi[k];
    return interner_.intern(labels_.lattice.canon(std::move(v)));
  }

  /// Action of a variable permutation on a sector label (orbit transport).
  uint32_t permute_label(uint32_t s, const std::vector<size_t>& var_perm) {
    const std::vector<Integer>& v = interner_.vec(s);
    std::vector<Integer> w(v.size(), 0);
    for (size_t i = 0; i < v.size(); ++i) w[var_perm[i]] = v[i];
    return interner_.intern(labels_.lattice.canon(std::move(w)));
  }

  bool lattice_invariant(const std::vector<size_t>& var_perm) const {
    for (const auto& row : labels_.lattice.basis()) {
      std::vector<Integer> w(row.size(), 0);
      for (size_t i = 0; i < row.size(); ++i) w[var_perm[i]] = row[i];
      if (!labels_.lattice.contains(std::move(w))) return false;
    }
    return true;
  }

  const SliceBasis& even_basis(long t) { return basis(t, true); }
  const SliceBasis& odd_basis(long t) { return basis(t, false); }
  size_t even_dim(long t) { return even_basis(t).dim; }
  size_t odd_dim(long t) { return odd_basis(t).dim; }

  size_t mono_index(long deg, const Mono& m) { return monos_.index_of(deg, m); }

  /// Decodes a global element index into (position index, monomial).
  std::pair<size_t, const Mono*> decode(const SliceBasis& b, size_t elem) {
    size_t lo = 0, hi = b.pos.size();
    while (hi - lo > 1) {
      size_t mid = (lo + hi) / 2;
      if (b.pos[mid].offset <= elem)
        lo = mid;
      else
        hi = mid;
    }
    const SlicePos& sp = b.pos[lo];
    const Mono& m = monos_.list(sp.delta)[elem - sp.offset];
    return {lo, &m};
  }

  /// Image of one source basis element under the slice differential, as
  /// (global target element, coefficient) pairs.  Throws if any image term
  /// lands outside the expected sector (which would falsify the sector
  /// decomposition).
  std::vector<std::pair<size_t, K>> apply(const SliceBasis& src, size_t elem,
                                          const SliceBasis& dst) {
    std::map<size_t, K> acc;
    auto [pidx, mono] = decode(src, elem);
    const SlicePos& sp = src.pos[pidx];
    const bool block0 = pidx < src.rows0 * src.cols0;
    const size_t i = sp.i, j = sp.j;
    auto addto = [&](int blk, size_t di, size_t dj, const Poly<K>& e,
                     int sgn) {
      for (const auto& [mu, c] : e.terms()) {
        Mono m2 = mono_mul(*mono, mu);
        const SlicePos& dp = dst.pos[dst.pos_index(blk, di, dj)];
        size_t idx = dp.offset + monos_.index_of(dp.delta, m2);
        K cv = sgn > 0 ? c : K(0) - c;
        auto [it, ins] = acc.emplace(idx, cv);
        if (!ins) it->second += cv;
      }
    };
    if (src.even) {
      // (alpha1, alpha0) |-> (d1' a1 - a0 d1, d0' a0 - a1 d0)
      if (block0) {  // alpha1 unit at (i over Q1, j over P1)
        for (size_t r = 0; r < q_.rank0(); ++r)
          if (!q_.d1.at(r, i).is_zero()) addto(0, r, j, q_.d1.at(r, i), +1);
        for (size_t j0 = 0; j0 < p_.rank0(); ++j0)
          if (!p_.d0.at(j, j0).is_zero()) addto(1, i, j0, p_.d0.at(j, j0), -1);
      } else {  // alpha0 unit at (i over Q0, j over P0)
        for (size_t j0 = 0; j0 < p_.rank1(); ++j0)
          if (!p_.d1.at(j, j0).is_zero()) addto(0, i, j0, p_.d1.at(j, j0), -1);
        for (size_t r = 0; r < q_.rank1(); ++r)
          if (!q_.d0.at(r, i).is_zero()) addto(1, r, j, q_.d0.at(r, i), +1);
      }
    } else {
      // (u, v) |-> (d0' u + v d1, d1' v + u d0)
      if (block0) {  // u unit at (i over Q0, j over P1)
        for (size_t r = 0; r < q_.rank1(); ++r)
          if (!q_.d0.at(r, i).is_zero()) addto(0, r, j, q_.d0.at(r, i), +1);
        for (size_t j0 = 0; j0 < p_.rank0(); ++j0)
          if (!p_.d0.at(j, j0).is_zero()) addto(1, i, j0, p_.d0.at(j, j0), +1);
      } else {  // v unit at (i over Q1, j over P0)
        for (size_t j0 = 0; j0 < p_.rank1(); ++j0)
          if (!p_.d1.at(j, j0).is_zero()) addto(0, i, j0, p_.d1.at(j, j0), +1);
        for (size_t r = 0; r < q_.rank0(); ++r)
          if (!q_.d1.at(r, i).is_zero()) addto(1, r, j, q_.d1.at(r, i), +1);
      }
    }
    std::vector<std::pair<size_t, K>> out;
    out.reserve(acc.size());
    const uint32_t want = src.even ? src.sector_of[elem]
                                   : shift_label(src.sector_of[elem], +1);
    for (auto& [idx, c] : acc) {
      if (scalar_is_zero(c)) continue;
      if (dst.sector_of[idx] != want)
        throw MfkError("internal_error", "sector decomposition violated");
      out.emplace_back(idx, std::move(c));
    }
    return out;
  }

  /// Full dense matrix of the slice differential out of src (rows indexed by
  /// dst elements, columns by src elements).
  DenseMatrix<K> dense_arrow(const SliceBasis& src, const SliceBasis& dst) {
    DenseMatrix<K> m(dst.dim, src.dim, scalar_traits<K>::zero());
    for (size_t e = 0; e < src.dim; ++e)
      for (auto& [idx, c] : apply(src, e, dst)) m.at(idx, e) = c;
    return m;
  }

 private:
  const SliceBasis& basis(long t, bool even) {
    auto& cache = even ? even_cache_ : odd_cache_;
    auto it = cache.find(t);
    if (it != cache.end()) return it->second;
    SliceBasis b;
    b.t = t;
    b.even = even;
    const auto& g1p = p_.grading->deg1;
    const auto& g0p = p_.grading->deg0;
    const auto& g1q = q_.grading->deg1;
    const auto& g0q = q_.grading->deg0;
    if (even) {
      b.rows0 = q_.rank1();
      b.cols0 = p_.rank1();
      b.rows1 = q_.rank0();
      b.cols1 = p_.rank0();
    } else {
      b.rows0 = q_.rank0();
      b.cols0 = p_.rank1();
      b.rows1 = q_.rank1();
      b.cols1 = p_.rank0();
    }
    b.pos.resize(b.rows0 * b.cols0 + b.rows1 * b.cols1);
    size_t off = 0;
    auto fill = [&](int blk, size_t rows, size_t cols) {
      for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) {
          SlicePos& sp = b.pos[b.pos_index(blk, i, j)];
          sp.i = uint32_t(i);
          sp.j = uint32_t(j);
          long gd;
          const std::vector<Integer>* ti;  // target row label
          const std::vector<Integer>* sj;  // source column label
          if (even) {
            if (blk == 0) {
              gd = g1q[i] - g1p[j];
              ti = &labels_.q1[i];
              sj = &labels_.p1[j];
            } else {
              gd = g0q[i] - g0p[j];
              ti = &labels_.q0[i];
              sj = &labels_.p0[j];
            }
          } else {
            if (blk == 0) {
              gd = g0q[i] - g1p[j];
              ti = &labels_.q0[i];
              sj = &labels_.p1[j];
            } else {
              gd = g1q[i] - g0p[j] + d_;
              ti = &labels_.q1[i];
              sj = &labels_.p0[j];
            }
          }
          sp.delta = gd + t;
          sp.offset = off;
          sp.width = sp.delta < 0 ? 0 : monos_.list(sp.delta).size();
          // Element label = base + monomial exponent; base is source minus
          // target so the even differential preserves labels and the odd
          // one shifts by phi (the v cell absorbs its extra phi).
          sp.base.resize(labels_.lattice.dim_ambient());
          for (size_t k = 0; k < sp.base.size(); ++k) {
            sp.base[k] = (*sj)[k] - (*ti)[k];
            if (!even && blk == 1) sp.base[k] -= labels_.phi[k];
          }
          off += sp.width;
        }
    };
    fill(0, b.rows0, b.cols0);
    fill(1, b.rows1, b.cols1);
    b.dim = off;
    b.sector_of.resize(b.dim);
    b.local_of.resize(b.dim);
    for (const SlicePos& sp : b.pos) {
      if (sp.width == 0) continue;
      const auto& ml = monos_.list(sp.delta);
      for (size_t k = 0; k < sp.width; ++k) {
        std::vector<Integer> v = sp.base;
        for (size_t c = 0; c < v.size(); ++c) v[c] += Integer(ml[k][c]);
        uint32_t s = interner_.intern(labels_.lattice.canon(std::move(v)));
        size_t idx = sp.offset + k;
        b.sector_of[idx] = s;
        auto& lst = b.elems_of_sector[s];
        b.local_of[idx] = uint32_t(lst.size());
        lst.push_back(idx);
      }
    }
    auto [jt, ins] = cache.emplace(t, std::move(b));
    (void)ins;
    return jt->second;
  }

  const MatrixFactorization<K>& p_;
  const MatrixFactorization<K>& q_;
  MultiDegreeLabels labels_;
  MonomialTable monos_;
  WeightSystem ws_;
  long d_ = 0;
  LabelInterner interner_;
  std::map<long, SliceBasis> even_cache_, odd_cache_;
};

// --- row reductions feeding the three rank engines -------------------------

inline uint32_t int_mod(const Integer& x, uint32_t p) {
  Integer r = x % p;
  if (r < 0) r += p;
  return uint32_t(r);
}

inline void row_lcm_den(const Rational& v, Integer& l) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::lcm;
  l = lcm(l, Integer(denominator(v)));
}
inline void row_lcm_den(const GaussianRational& v, Integer& l) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::lcm;
  l = lcm(l, Integer(denominator(v.re)));
  l = lcm(l, Integer(denominator(v.im)));
}

inline bool f2_bit(const Rational& v, const Integer& l) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  Integer x = Integer(numerator(v)) * (l / Integer(denominator(v)));
  return (x & 1) != 0;
}

inline uint32_t fp_value(const Rational& v, const Integer& l, uint32_t p,
                         uint32_t /*root*/) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  Integer x = Integer(numerator(v)) * (l / Integer(denominator(v)));
  return int_mod(x, p);
}
inline uint32_t fp_value(const GaussianRational& v, const Integer& l,
                         uint32_t p, uint32_t root) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  Integer re = Integer(numerator(v.re)) * (l / Integer(denominator(v.re)));
  Integer im = Integer(numerator(v.im)) * (l / Integer(denominator(v.im)));
  return uint32_t(
      (uint64_t(int_mod(re, p)) + uint64_t(int_mod(im, p)) * root) % p);
}

template <class K>
using SparseRow = std::vector<std::pair<uint32_t, K>>;

/// Rank over GF(2) after clearing denominators per row.  Always a lower
/// bound for the exact rank: row scaling is invertible over Q, and reducing
/// an integer matrix mod 2 can only kill minors, never create them.
template <class K>
size_t rank_f2(const std::vector<SparseRow<K>>& rows, size_t ncols) {
  if constexpr (scalar_traits<K>::is_gaussian) {
    (void)rows;
    (void)ncols;
    throw MfkError("internal_error", "GF(2) pass unavailable over Q(i)");
  } else {
    F2RowEchelon ech(ncols);
    std::vector<uint32_t> cols;
    for (const auto& row : rows) {
      Integer l = 1;
      for (const auto& [c, v] : row) {
        (void)c;
        row_lcm_den(v, l);
      }
      cols.clear();
      for (const auto& [c, v] : row)
        if (f2_bit(v, l)) cols.push_back(c);
      ech.add_row(cols);
    }
    return ech.rank();
  }
}

/// Rank mod a prime (with i mapped to a square root of -1 for Q(i)); a
/// lower bound for the exact rank by the same minor argument.
template <class K>
size_t rank_fp(const std::vector<SparseRow<K>>& rows, size_t ncols, uint32_t p,
               uint32_t root) {
  FpRowEchelon ech(p, ncols);
  std::vector<std::pair<uint32_t, uint32_t>> ent;
  for (const auto& row : rows) {
    Integer l = 1;
    for (const auto& [c, v] : row) {
      (void)c;
      row_lcm_den(v, l);
    }
    ent.clear();
    for (const auto& [c, v] : row) {
      uint32_t x = fp_value(v, l, p, root);
      if (x) ent.emplace_back(c, x);
    }
    ech.add_row(ent);
  }
  return ech.rank();
}

template <class K>
size_t rank_exact_sparse(const std::vector<SparseRow<K>>& rows, size_t ncols) {
  SparseRankExact<K> el(rows.size(), ncols);
  for (size_t r = 0; r < rows.size(); ++r)
    for (const auto& [c, v] : rows[r]) el.add_entry(r, c, v);
  return el.rank();
}

struct EngineTally {
  size_t f2_cert = 0, fp_cert = 0, exact_runs = 0, transported = 0,
         sectors = 0;
  std::string summary() const {
    return "sectors=" + std::to_string(sectors) +
           " f2_certified=" + std::to_string(f2_cert) +
           " fp_certified=" + std::to_string(fp_cert) +
           " exact=" + std::to_string(exact_runs) +
           " transported=" + std::to_string(transported);
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Internal degree of a morphism
// ---------------------------------------------------------------------------

/// Uniform internal degree of a morphism between factorizations graded by a
/// common weight system: the t with every alpha1 entry homogeneous of degree
/// deg1'[i] - deg1[j] + t and every alpha0 entry of deg0'[i] - deg0[j] + t.
/// Zero morphisms report 0; mixed or ungraded morphisms report nothing.
template <class K>
std::optional<long> morphism_internal_degree(const MFMorphism<K>& a) {
  if (!a.source.grading || !a.target.grading) return std::nullopt;
  const MFGrading& gs = *a.source.grading;
  const MFGrading& gt = *a.target.grading;
  if (!(gs.ws == gt.ws)) return std::nullopt;
  std::optional<long> t;
  auto scan = [&](const DenseMatrix<Poly<K>>& m, const std::vector<long>& gi,
                  const std::vector<long>& gj) {
    for (size_t i = 0; i < m.rows(); ++i)
      for (size_t j = 0; j < m.cols(); ++j) {
        if (m.at(i, j).is_zero()) continue;
        auto h = m.at(i, j).homogeneous_degree(gs.ws.weights);
        if (!h) return false;
        long ti = *h - (gi[i] - gj[j]);
        if (t && *t != ti) return false;
        t = ti;
      }
    return true;
  };
  if (!scan(a.alpha1, gt.deg1, gs.deg1)) return std::nullopt;
  if (!scan(a.alpha0, gt.deg0, gs.deg0)) return std::nullopt;
  return t ? t : std::optional<long>(0);
}

// ---------------------------------------------------------------------------
// Graded Hom homology
// ---------------------------------------------------------------------------

/// Slice-by-slice homology of Hom(P, Q) for graded factorizations of a
/// common potential.  h0 at slice t counts homotopy classes of internal
/// degree-t morphisms P -> Q; h1 the odd classes.  The scan starts at the
/// first possibly-nonempty slice and ends after max(weights) consecutive
/// zero-homology slices beyond the generator window (every slice module is
/// generated below the window top, so a full zero margin is final);
/// `complete` is false if a cap interrupted the scan first.
template <class K>
HomologyResult hom_homology_dims(const MatrixFactorization<K>& p,
                                 const MatrixFactorization<K>& q,
                                 const HomOptions& opts = {}) {
  ValidationReport vp = validate(p), vq = validate(q);
  if (!vp.valid) throw MfkError("invalid_factorization", vp.message);
  if (!vq.valid) throw MfkError("invalid_factorization", vq.message);
  if (p.vars != q.vars || !(p.f == q.f))
    throw MfkError("incompatible_pair",
                   "Hom requires a common variable list and potential");
  if (!p.grading || !q.grading || !(p.grading->ws == q.grading->ws))
    throw MfkError("grading_required",
                   "homology slices need matching gradings on both sides");
  if (p.grading->ws.degree < 1)
    throw MfkError("grading_required", "potential degree must be positive");

  HomologyResult res;
  const long d = p.grading->ws.degree;
  long maxw = 1;
  for (long w : p.grading->ws.weights) maxw = std::max(maxw, w);
  res.margin = maxw;
  if (p.rank1() + p.rank0() == 0 || q.rank1() + q.rank0() == 0) return res;

  detail::HomContext<K> ctx(p, q, opts.use_sectors);

  // Generator window from the degree differences of all cell grids.
  long max_gd = 0, min_gd = 0;
  bool first = true;
  auto scan_gd = [&](const std::vector<long>& gi, const std::vector<long>& gj,
                     long extra) {
    for (long a : gi)
      for (long b : gj) {
        long g = a - b + extra;
        if (first) {
          max_gd = min_gd = g;
          first = false;
        }
        max_gd = std::max(max_gd, g);
        min_gd = std::min(min_gd, g);
      }
  };
  scan_gd(q.grading->deg1, p.grading->deg1, 0);
  scan_gd(q.grading->deg0, p.grading->deg0, 0);
  scan_gd(q.grading->deg0, p.grading->deg1, 0);
  scan_gd(q.grading->deg1, p.grading->deg0, d);
  const long t_lo = -max_gd, window_top = -min_gd;

  // Usable symmetries for orbit transport: endomorphism case only, weights
  // and label lattice invariant, labels determined up to one global shift
  // per side (connected constraint graphs), and the certificate verified.
  std::vector<const SymmetryCert*> certs;
  if (!opts.symmetries.empty() && p == q && ctx.labels().p_connected &&
      ctx.labels().q_connected) {
    for (const auto& c : opts.symmetries) {
      bool ok = c.var_perm.size() == p.nvars();
      for (size_t i = 0; ok && i < c.var_perm.size(); ++i)
        ok = p.grading->ws.weights[c.var_perm[i]] == p.grading->ws.weights[i];
      if (ok && ctx.lattice_invariant(c.var_perm) && verify_symmetry(p, c))
        certs.push_back(&c);
    }
  }

  detail::EngineTally tally;
  constexpr bool gaussian = scalar_traits<K>::is_gaussian;
  const uint32_t prime = certification_primes().front();
  const uint32_t root = gaussian ? sqrt_minus_one_mod(prime) : 0;

  // Exact per-sector ranks of the two arrows at each slice.
  std::map<long, std::map<uint32_t, size_t>> even_rank, odd_rank;

  // Computes exact ranks for one arrow (even: E_t -> O_t; odd: O_t ->
  // E_{t+d}), sector by sector.  The ceiling dim - rank(incoming) is exact
  // because incoming ranks are exact and im(in) lies in ker(out); any
  // modular rank hitting it is therefore certified.
  auto finalize_arrow = [&](long t, bool even_arrow) {
    auto& store = even_arrow ? even_rank[t] : odd_rank[t];
    const detail::SliceBasis& src =
        even_arrow ? ctx.even_basis(t) : ctx.odd_basis(t);
    const detail::SliceBasis& dst =
        even_arrow ? ctx.odd_basis(t) : ctx.even_basis(t + d);
    // Orbit partition of the present sectors under the usable symmetries.
    std::map<uint32_t, uint32_t> rep;
    for (const auto& [s, elems] : src.elems_of_sector) {
      (void)elems;
      if (rep.count(s)) continue;
      std::vector<uint32_t> orb = {s};
      std::set<uint32_t> seen = {s};
      for (size_t k = 0; k < orb.size(); ++k)
        for (const SymmetryCert* c : certs) {
          uint32_t s2 = ctx.permute_label(orb[k], c->var_perm);
          if (seen.insert(s2).second) orb.push_back(s2);
        }
      uint32_t r = s;
      for (uint32_t s2 : orb)
        if (s2 < r && src.elems_of_sector.count(s2)) r = s2;
      for (uint32_t s2 : orb)
        if (src.elems_of_sector.count(s2)) rep[s2] = r;
    }
    for (const auto& [s, elems] : src.elems_of_sector) {
      ++tally.sectors;
      if (rep[s] != s) continue;
      size_t incoming = 0;
      if (even_arrow) {
        auto it = odd_rank.find(t - d);
        if (it != odd_rank.end()) {
          auto jt = it->second.find(ctx.shift_label(s, -1));
          if (jt != it->second.end()) incoming = jt->second;
        }
      } else {
        auto it = even_rank.find(t);
        if (it != even_rank.end()) {
          auto jt = it->second.find(s);
          if (jt != it->second.end()) incoming = jt->second;
        }
      }
      const size_t ceiling = elems.size() - std::min(elems.size(), incoming);
      std::vector<detail::SparseRow<K>> rows;
      rows.reserve(elems.size());
      for (size_t e : elems) {
        detail::SparseRow<K> row;
        for (auto& [idx, c] : ctx.apply(src, e, dst))
          row.emplace_back(uint32_t(dst.local_of[idx]), std::move(c));
        rows.push_back(std::move(row));
      }
      const uint32_t dst_sector = even_arrow ? s : ctx.shift_label(s, +1);
      const size_t ncols = dst.sector_dim(dst_sector);
      size_t r = 0;
      bool done = false;
      if (opts.use_mod_p && !gaussian) {
        r = detail::rank_f2(rows, ncols);
        if (r == ceiling) {
          done = true;
          ++tally.f2_cert;
        }
      }
      if (!done && opts.use_mod_p) {
        r = std::max(r, detail::rank_fp(rows, ncols, prime, root));
        if (r == ceiling) {
          done = true;
          ++tally.fp_cert;
        }
      }
      if (!done) {
        r = detail::rank_exact_sparse(rows, ncols);
        ++tally.exact_runs;
      }
      store[s] = r;
    }
    for (const auto& [s, r0] : rep)
      if (r0 != s) {
        if (src.sector_dim(s) != src.sector_dim(r0))
          throw MfkError("internal_error", "orbit sectors of unequal size");
        store[s] = store.at(r0);
        ++tally.transported;
      }
  };

  auto total = [](const std::map<uint32_t, size_t>& m) {
    size_t t = 0;
    for (const auto& [s, r] : m) {
      (void)s;
      t += r;
    }
    return t;
  };

  long zero_run = 0;
  long t = t_lo;
  for (size_t scanned = 0;; ++scanned, ++t) {
    if (scanned >= opts.max_slices) {
      res.complete = false;
      break;
    }
    const size_t de = ctx.even_dim(t), dq = ctx.odd_dim(t);
    if (de > opts.max_slice_dim || dq > opts.max_slice_dim ||
        ctx.even_dim(t + d) > opts.max_slice_dim) {
      res.complete = false;
      break;
    }
    finalize_arrow(t, true);
    finalize_arrow(t, false);
    const size_t rank_e = total(even_rank[t]);
    const size_t rank_o = total(odd_rank[t]);
    size_t rank_o_prev = 0;
    if (auto it = odd_rank.find(t - d); it != odd_rank.end())
      rank_o_prev = total(it->second);
    if (rank_e + rank_o_prev > de || rank_o + rank_e > dq)
      throw MfkError("internal_error", "slice ranks exceed dimensions");
    HomologySliceRow row;
    row.t = t;
    row.dim_even = de;
    row.dim_odd = dq;
    row.rank_even = rank_e;
    row.rank_odd = rank_o;
    row.h0 = de - rank_e - rank_o_prev;
    row.h1 = dq - rank_o - rank_e;
    res.slices.push_back(row);
    res.h0_total += row.h0;
    res.h1_total += row.h1;
    if (row.h0 == 0 && row.h1 == 0) {
      if (t >= window_top) ++zero_run;
    } else {
      zero_run = 0;
    }
    if (t >= window_top && zero_run >= maxw) break;
  }
  while (!res.slices.empty() && res.slices.back().h0 == 0 &&
         res.slices.back().h1 == 0 && res.slices.back().dim_even == 0 &&
         res.slices.back().dim_odd == 0)
    res.slices.pop_back();
  res.engine_summary = tally.summary();
  return res;
}

// ---------------------------------------------------------------------------
// Null-homotopy
// ---------------------------------------------------------------------------

namespace detail {

/// Exact verification that h witnesses alpha ~ 0.
template <class K>
bool homotopy_witnesses(const MFMorphism<K>& a, const Homotopy<K>& h) {
  const Poly<K> z = a.source.zero();
  return mat_mul(a.target.d0, h.u, z) + mat_mul(h.v, a.source.d1, z) ==
             a.alpha1 &&
         mat_mul(a.target.d1, h.v, z) + mat_mul(h.u, a.source.d0, z) ==
             a.alpha0;
}

/// Reads an odd-slice coordinate vector back into a Homotopy.
template <class K>
Homotopy<K> homotopy_from_vector(HomContext<K>& ctx, const SliceBasis& b,
                                 const std::vector<K>& sol) {
  const Poly<K> z = ctx.p().zero();
  Homotopy<K> h;
  h.u = DenseMatrix<Poly<K>>(ctx.q().rank0(), ctx.p().rank1(), z);
  h.v = DenseMatrix<Poly<K>>(ctx.q().rank1(), ctx.p().rank0(), z);
  for (size_t e = 0; e < b.dim; ++e) {
    if (scalar_is_zero(sol[e])) continue;
    auto [pidx, mono] = ctx.decode(b, e);
    const SlicePos& sp = b.pos[pidx];
    Poly<K> term = Poly<K>::monomial(ctx.p().nvars(), *mono, sol[e]);
    if (pidx < b.rows0 * b.cols0)
      h.u.at(sp.i, sp.j) += term;
    else
      h.v.at(sp.i, sp.j) += term;
  }
  return h;
}

/// Dense graded solve: the unknown homotopy for a degree-t morphism lives in
/// the odd (t - d) slice, and projecting any witness to that slice again
/// gives a witness, so this search is complete for the slice.
template <class K>
std::optional<Homotopy<K>> null_homotopy_slice(const MFMorphism<K>& a, long t,
                                               size_t max_cells) {
  HomContext<K> ctx(a.source, a.target, /*use_sectors=*/false);
  const long d = ctx.degree();
  const SliceBasis& unknowns = ctx.odd_basis(t - d);
  const SliceBasis& eqs = ctx.even_basis(t);
  if (eqs.dim * std::max<size_t>(unknowns.dim, 1) > max_cells)
    throw MfkError("solve_too_large",
                   "slice system exceeds the dense solve budget");
  DenseMatrix<K> m = ctx.dense_arrow(unknowns, eqs);
  std::vector<K> rhs(eqs.dim, scalar_traits<K>::zero());
  for (int blk = 0; blk < 2; ++blk) {
    const DenseMatrix<Poly<K>>& mat = blk == 0 ? a.alpha1 : a.alpha0;
    for (size_t i = 0; i < mat.rows(); ++i)
      for (size_t j = 0; j < mat.cols(); ++j)
        for (const auto& [mu, c] : mat.at(i, j).terms()) {
          const SlicePos& sp = eqs.pos[eqs.pos_index(blk, i, j)];
          rhs[sp.offset + ctx.mono_index(sp.delta, mu)] = c;
        }
  }
  auto sol = solve_linear(m, rhs);
  if (!sol) return std::nullopt;
  return homotopy_from_vector(ctx, unknowns, *sol);
}

/// Bounded-degree ansatz: solve for (u, v) supported on monomials of
/// weighted degree <= bound.  Finding a witness is definitive; not finding
/// one only rules out that support.
template <class K>
std::optional<Homotopy<K>> null_homotopy_ansatz(const MFMorphism<K>& a,
                                                long bound,
                                                const std::vector<long>& wts,
                                                size_t max_cells) {
  const MatrixFactorization<K>& p = a.source;
  const MatrixFactorization<K>& q = a.target;
  const size_t n = p.nvars();
  std::vector<Mono> monos;
  monos.push_back(Mono(n, 0));
  for (long dgr = 1; dgr <= bound; ++dgr) {
    std::vector<Mono> l = enumerate_monomials(wts, dgr);
    monos.insert(monos.end(), l.begin(), l.end());
  }
  struct Unknown {
    int block;  // 0 = u cell, 1 = v cell
    uint32_t i, j;
    size_t mono;
  };
  std::vector<Unknown> unknowns;
  for (uint32_t i = 0; i < q.rank0(); ++i)
    for (uint32_t j = 0; j < p.rank1(); ++j)
      for (size_t k = 0; k < monos.size(); ++k)
        unknowns.push_back({0, i, j, k});
  for (uint32_t i = 0; i < q.rank1(); ++i)
    for (uint32_t j = 0; j < p.rank0(); ++j)
      for (size_t k = 0; k < monos.size(); ++k)
        unknowns.push_back({1, i, j, k});

  // Equation rows are labeled (side, i, j, monomial) with side 0 for the
  // alpha1 equation d0' u + v d1 = alpha1 and side 1 for d1' v + u d0 =
  // alpha0.  Rows touched only by the right-hand side still count: they
  // make the system correctly infeasible.
  using RowKey = std::tuple<int, size_t, size_t, Mono>;
  std::map<RowKey, size_t> row_ids;
  auto row_of = [&](int side, size_t i, size_t j, const Mono& m) {
    auto [it, ins] = row_ids.emplace(RowKey{side, i, j, m}, row_ids.size());
    (void)ins;
    return it->second;
  };
  std::vector<std::vector<std::pair<size_t, K>>> col_entries(unknowns.size());
  for (size_t k = 0; k < unknowns.size(); ++k) {
    const Unknown& un = unknowns[k];
    const Mono& mu = monos[un.mono];
    auto contribute = [&](int side, size_t i, size_t j, const Poly<K>& e) {
      for (const auto& [nu, c] : e.terms())
        col_entries[k].emplace_back(row_of(side, i, j, mono_mul(mu, nu)), c);
    };
    if (un.block == 0) {  // u[i][j]
      for (size_t r = 0; r < q.rank1(); ++r)
        if (!q.d0.at(r, un.i).is_zero())
          contribute(0, r, un.j, q.d0.at(r, un.i));
      for (size_t j0 = 0; j0 < p.rank0(); ++j0)
        if (!p.d0.at(un.j, j0).is_zero())
          contribute(1, un.i, j0, p.d0.at(un.j, j0));
    } else {  // v[i][j]
      for (size_t j0 = 0; j0 < p.rank1(); ++j0)
        if (!p.d1.at(un.j, j0).is_zero())
          contribute(0, un.i, j0, p.d1.at(un.j, j0));
      for (size_t r = 0; r < q.rank0(); ++r)
        if (!q.d1.at(r, un.i).is_zero())
          contribute(1, r, un.j, q.d1.at(r, un.i));
    }
  }
  std::vector<std::pair<size_t, K>> rhs_entries;
  for (int side = 0; side < 2; ++side) {
    const DenseMatrix<Poly<K>>& mat = side == 0 ? a.alpha1 : a.alpha0;
    for (size_t i = 0; i < mat.rows(); ++i)
      for (size_t j = 0; j < mat.cols(); ++j)
        for (const auto& [mu, c] : mat.at(i, j).terms())
          rhs_entries.emplace_back(row_of(side, i, j, mu), c);
  }
  const size_t nrows = row_ids.size(), ncols = unknowns.size();
  if (nrows * std::max<size_t>(ncols, 1) > max_cells)
    throw MfkError("solve_too_large",
                   "ansatz system exceeds the dense solve budget");
  DenseMatrix<K> m(nrows, ncols, scalar_traits<K>::zero());
  for (size_t k = 0; k < ncols; ++k)
    for (const auto& [r, c] : col_entries[k]) m.at(r, k) += c;
  std::vector<K> rhs(nrows, scalar_traits<K>::zero());
  for (const auto& [r, c] : rhs_entries) rhs[r] += c;
  auto sol = solve_linear(m, rhs);
  if (!sol) return std::nullopt;
  const Poly<K> z = p.zero();
  Homotopy<K> h;
  h.u = DenseMatrix<Poly<K>>(q.rank0(), p.rank1(), z);
  h.v = DenseMatrix<Poly<K>>(q.rank1(), p.rank0(), z);
  for (size_t k = 0; k < ncols; ++k) {
    if (scalar_is_zero((*sol)[k])) continue;
    const Unknown& un = unknowns[k];
    Poly<K> term = Poly<K>::monomial(n, monos[un.mono], (*sol)[k]);
    if (un.block == 0)
      h.u.at(un.i, un.j) += term;
    else
      h.v.at(un.i, un.j) += term;
  }
  return h;
}

template <class K>
long default_ansatz_bound(const MFMorphism<K>& a,
                          const std::vector<long>& wts) {
  long b = 0;
  auto scan = [&](const DenseMatrix<Poly<K>>& m) {
    for (size_t i = 0; i < m.rows(); ++i)
      for (size_t j = 0; j < m.cols(); ++j)
        if (!m.at(i, j).is_zero())
          b = std::max(b, m.at(i, j).max_weighted_degree(wts).value_or(0));
  };
  scan(a.source.d1);
  scan(a.source.d0);
  scan(a.target.d1);
  scan(a.target.d0);
  scan(a.alpha1);
  scan(a.alpha0);
  if (!a.source.f.is_zero())
    b += std::max<long>(0, a.source.f.max_weighted_degree(wts).value_or(0));
  return b;
}

}  // namespace detail

/// Decides (when possible) whether a morphism is homotopic to zero, and
/// returns a verified witness if so.  Graded morphisms of uniform internal
/// degree get a complete slice solve (a definitive yes/no); otherwise a
/// bounded-degree ansatz is tried (its bound doubled once), which can only
/// confirm, not refute.
template <class K>
NullHomotopyOutcome<K> find_null_homotopy(
    const MFMorphism<K>& a, const NullHomotopyOptions& opts = {}) {
  ValidationReport vs = validate(a.source), vt = validate(a.target);
  if (!vs.valid) throw MfkError("invalid_factorization", vs.message);
  if (!vt.valid) throw MfkError("invalid_factorization", vt.message);
  ValidationReport va = validate(a);
  if (!va.valid) throw MfkError("invalid_morphism", va.message);

  NullHomotopyOutcome<K> out;
  const bool graded = a.source.grading && a.target.grading &&
                      a.source.grading->ws == a.target.grading->ws &&
                      a.source.grading->ws.degree >= 1;
  if (graded && !opts.degree_bound) {
    if (auto t = morphism_internal_degree(a)) {
      auto h = detail::null_homotopy_slice(a, *t, opts.max_dense_cells);
      out.conclusive = true;
      if (h) {
        if (!detail::homotopy_witnesses(a, *h))
          throw MfkError("internal_error", "homotopy verification failed");
        out.found = true;
        out.homotopy = std::move(h);
      }
      return out;
    }
  }
  std::vector<long> wts = graded ? a.source.grading->ws.weights
                                 : std::vector<long>(a.source.nvars(), 1);
  std::vector<long> bounds;
  if (opts.degree_bound) {
    bounds.push_back(std::max<long>(0, *opts.degree_bound));
  } else {
    long b0 = detail::default_ansatz_bound(a, wts);
    bounds.push_back(b0);
    bounds.push_back(2 * b0 + 1);
  }
  for (long b : bounds) {
    auto h = detail::null_homotopy_ansatz(a, b, wts, opts.max_dense_cells);
    if (h) {
      if (!detail::homotopy_witnesses(a, *h))
        throw MfkError("internal_error", "homotopy verification failed");
      out.found = true;
      out.conclusive = true;
      out.homotopy = std::move(h);
      return out;
    }
  }
  return out;  // not found, not conclusive
}

// ---------------------------------------------------------------------------
// Homotopy equivalence
// ---------------------------------------------------------------------------

namespace detail {

/// Incremental row-reduction store over K for picking representatives.
template <class K>
class VecEchelon {
 public:
  /// Reduces v against the stored rows; if independent, normalizes, stores,
  /// optionally exports the reduced vector, and returns true.
  bool add(std::vector<K> v, std::vector<K>* reduced_out = nullptr) {
    for (size_t k = 0; k < rows_.size(); ++k) {
      K f = v[pivs_[k]];
      if (scalar_is_zero(f)) continue;
      for (size_t j = 0; j < v.size(); ++j) v[j] -= f * rows_[k][j];
    }
    size_t piv = v.size();
    for (size_t j = 0; j < v.size(); ++j)
      if (!scalar_is_zero(v[j])) {
        piv = j;
        break;
      }
    if (piv == v.size()) return false;
    K inv = scalar_traits<K>::one() / v[piv];
    for (auto& x : v) x = x * inv;
    rows_.push_back(std::move(v));
    pivs_.push_back(piv);
    if (reduced_out) *reduced_out = rows_.back();
    return true;
  }

 private:
  std::vector<std::vector<K>> rows_;
  std::vector<size_t> pivs_;
};

/// Candidate pool from class representatives: the reps themselves, their
/// pairwise sums, then seeded-random small combinations, capped.
template <class K>
std::vector<std::vector<K>> expand_candidates(
    const std::vector<std::vector<K>>& reps, size_t max_candidates) {
  std::vector<std::vector<K>> out;
  if (reps.empty() || max_candidates == 0) return out;
  for (const auto& r : reps) {
    if (out.size() >= max_candidates) return out;
    out.push_back(r);
  }
  for (size_t i = 0; i < reps.size() && out.size() < max_candidates; ++i)
    for (size_t j = i + 1; j < reps.size() && out.size() < max_candidates;
         ++j) {
      std::vector<K> s = reps[i];
      for (size_t k = 0; k < s.size(); ++k) s[k] += reps[j][k];
      out.push_back(std::move(s));
    }
  std::mt19937 gen(12345);
  std::uniform_int_distribution<size_t> pick(0, reps.size() - 1);
  std::uniform_int_distribution<int> coef(0, 2);
  const K coeffs[3] = {scalar_traits<K>::one(), K(0) - scalar_traits<K>::one(),
                       scalar_traits<K>::from_int(2)};
  while (out.size() < max_candidates) {
    std::vector<K> s(reps[0].size(), scalar_traits<K>::zero());
    for (int parts = 0; parts < 3; ++parts) {
      const std::vector<K>& r = reps[pick(gen)];
      const K& c = coeffs[coef(gen)];
      for (size_t k = 0; k < s.size(); ++k) s[k] += c * r[k];
    }
    bool zero = true;
    for (const auto& x : s) zero = zero && scalar_is_zero(x);
    if (!zero) out.push_back(std::move(s));
  }
  return out;
}

template <class K>
MFMorphism<K> morphism_from_even_vector(HomContext<K>& ctx,
                                        const SliceBasis& b,
                                        const std::vector<K>& vec) {
  MFMorphism<K> m = zero_morphism(ctx.p(), ctx.q());
  for (size_t e = 0; e < b.dim; ++e) {
    if (scalar_is_zero(vec[e])) continue;
    auto [pidx, mono] = ctx.decode(b, e);
    const SlicePos& sp = b.pos[pidx];
    Poly<K> term = Poly<K>::monomial(ctx.p().nvars(), *mono, vec[e]);
    if (pidx < b.rows0 * b.cols0)
      m.alpha1.at(sp.i, sp.j) += term;
    else
      m.alpha0.at(sp.i, sp.j) += term;
  }
  return m;
}

/// Extracts the inverse-up-to-homotopy data from a contraction of
/// cone(alpha) and verifies every required identity exactly.  With
/// C1 = Q1 (+) P0 and C0 = Q0 (+) P1 and a contraction (U, V) of id_C, the
/// blocks give beta: Q -> P, a homotopy id_Q ~ alpha beta, and a homotopy
/// id_P ~ beta alpha.
template <class K>
std::optional<EquivalenceResult<K>> certify_equivalence(
    const MFMorphism<K>& alpha, const Homotopy<K>& contraction) {
  const MatrixFactorization<K>& p = alpha.source;
  const MatrixFactorization<K>& q = alpha.target;
  const Poly<K> z = p.zero();
  const size_t q1 = q.rank1(), q0 = q.rank0();
  const size_t p1 = p.rank1(), p0 = p.rank0();
  auto sub = [&](const DenseMatrix<Poly<K>>& m, size_t r, size_t c, size_t nr,
                 size_t nc) {
    DenseMatrix<Poly<K>> s(nr, nc, z);
    for (size_t i = 0; i < nr; ++i)
      for (size_t j = 0; j < nc; ++j) s.at(i, j) = m.at(r + i, c + j);
    return s;
  };
  // U : C1 -> C0 has row blocks [Q0; P1] and column blocks [Q1; P0];
  // V : C0 -> C1 has row blocks [Q1; P0] and column blocks [Q0; P1].
  const DenseMatrix<Poly<K>>& U = contraction.u;
  const DenseMatrix<Poly<K>>& V = contraction.v;
  if (U.rows() != q0 + p1 || U.cols() != q1 + p0 || V.rows() != q1 + p0 ||
      V.cols() != q0 + p1)
    return std::nullopt;
  DenseMatrix<Poly<K>> A = sub(U, 0, 0, q0, q1);    // Q1 -> Q0
  DenseMatrix<Poly<K>> Cb = sub(U, q0, 0, p1, q1);  // Q1 -> P1
  DenseMatrix<Poly<K>> D = sub(U, q0, q1, p1, p0);  // P0 -> P1
  DenseMatrix<Poly<K>> E = sub(V, 0, 0, q1, q0);    // Q0 -> Q1
  DenseMatrix<Poly<K>> G = sub(V, q1, 0, p0, q0);   // Q0 -> P0
  DenseMatrix<Poly<K>> H = sub(V, q1, q0, p0, p1);  // P1 -> P0

  MFMorphism<K> beta;
  beta.source = q;
  beta.target = p;
  beta.alpha1 = Cb;
  beta.alpha0 = G;
  if (!validate(beta).valid) return std::nullopt;

  auto eye = [&](size_t k) {
    return DenseMatrix<Poly<K>>::identity(k, z, p.one());
  };
  bool ok = mat_mul(q.d0, A, z) + mat_mul(E, q.d1, z) ==
                eye(q1) - mat_mul(alpha.alpha1, Cb, z) &&
            mat_mul(q.d1, E, z) + mat_mul(A, q.d0, z) ==
                eye(q0) - mat_mul(alpha.alpha0, G, z) &&
            mat_mul(p.d0, -H, z) + mat_mul(-D, p.d1, z) ==
                eye(p1) - mat_mul(Cb, alpha.alpha1, z) &&
            mat_mul(p.d1, -D, z) + mat_mul(-H, p.d0, z) ==
                eye(p0) - mat_mul(G, alpha.alpha0, z);
  if (!ok) return std::nullopt;

  EquivalenceResult<K> res;
  res.equivalent = true;
  res.conclusive = true;
  res.forward = alpha;
  res.backward = std::move(beta);
  res.h_source = Homotopy<K>{-H, -D};
  res.h_target = Homotopy<K>{std::move(A), std::move(E)};
  return res;
}

}  // namespace detail

/// Searches for a homotopy equivalence P ~ Q and returns it with verified
/// contraction homotopies when found.  Candidates are homology
/// representatives of degree-0 morphisms (plus small combinations); each is
/// accepted exactly when its mapping cone contracts.  A negative answer is
/// never conclusive: the pair may still be equivalent via maps the search
/// did not reach.
template <class K>
EquivalenceResult<K> find_homotopy_equivalence(const MatrixFactorization<K>& p,
                                               const MatrixFactorization<K>& q,
                                               const EquivOptions& opts = {}) {
  ValidationReport vp = validate(p), vq = validate(q);
  if (!vp.valid) throw MfkError("invalid_factorization", vp.message);
  if (!vq.valid) throw MfkError("invalid_factorization", vq.message);
  if (p.vars != q.vars || !(p.f == q.f))
    throw MfkError("incompatible_pair",
                   "equivalence requires a common variable list and potential");

  EquivalenceResult<K> res;
  if (p == q) {
    res.equivalent = true;
    res.conclusive = true;
    res.forward = identity_morphism(p);
    res.backward = identity_morphism(p);
    const Poly<K> z = p.zero();
    Homotopy<K> zero_h;
    zero_h.u = DenseMatrix<Poly<K>>(p.rank0(), p.rank1(), z);
    zero_h.v = DenseMatrix<Poly<K>>(p.rank1(), p.rank0(), z);
    res.h_source = zero_h;
    res.h_target = zero_h;
    res.detail = "identical factorizations";
    return res;
  }

  NullHomotopyOptions nh_opts;
  nh_opts.max_dense_cells = opts.max_dense_cells;

  const bool graded = p.grading && q.grading &&
                      p.grading->ws == q.grading->ws &&
                      p.grading->ws.degree >= 1;
  if (graded) {
    detail::HomContext<K> ctx(p, q, /*use_sectors=*/false);
    const long d = ctx.degree();
    const detail::SliceBasis& e0 = ctx.even_basis(0);
    const detail::SliceBasis& o0 = ctx.odd_basis(0);
    const detail::SliceBasis& om = ctx.odd_basis(-d);
    if (e0.dim > opts.max_search_dim || o0.dim > opts.max_search_dim ||
        om.dim > opts.max_search_dim) {
      res.detail = "degree-0 slice too large to search";
      return res;
    }
    DenseMatrix<K> bnd = ctx.dense_arrow(om, e0);
    std::vector<std::vector<K>> cycles = kernel_basis(ctx.dense_arrow(e0, o0));
    detail::VecEchelon<K> ech;
    for (size_t c = 0; c < bnd.cols(); ++c) {
      std::vector<K> col(bnd.rows());
      for (size_t r = 0; r < bnd.rows(); ++r) col[r] = bnd.at(r, c);
      ech.add(std::move(col));
    }
    std::vector<std::vector<K>> reps;
    for (auto& cyc : cycles) {
      std::vector<K> red;
      if (ech.add(std::move(cyc), &red)) reps.push_back(std::move(red));
    }
    if (reps.empty()) {
      res.detail = "no nonzero degree-0 morphism classes";
      return res;
    }
    std::vector<std::vector<K>> candidates =
        detail::expand_candidates(reps, opts.max_candidates);
    size_t tried = 0;
    bool capped = false;
    for (const auto& vec : candidates) {
      ++tried;
      MFMorphism<K> alpha = detail::morphism_from_even_vector(ctx, e0, vec);
      if (alpha.alpha1.all_zero() && alpha.alpha0.all_zero()) continue;
      if (!validate(alpha).valid) continue;
      MatrixFactorization<K> c = cone(alpha);
      NullHomotopyOutcome<K> contraction;
      try {
        contraction = find_null_homotopy(identity_morphism(c), nh_opts);
      } catch (const MfkError& err) {
        if (err.code() == "solve_too_large") {
          capped = true;
          continue;
        }
        throw;
      }
      if (!contraction.found) continue;
      auto cert = detail::certify_equivalence(alpha, *contraction.homotopy);
      if (cert) {
        cert->detail =
            "certified after " + std::to_string(tried) + " candidate(s)";
        return *cert;
      }
    }
    res.detail = capped ? "search capped before exhausting candidates"
                        : "no candidate cone contracted";
    return res;
  }

  // Ungraded: assemble degree-bounded morphism cycles directly.
  const size_t n = p.nvars();
  std::vector<long> wts(n, 1);
  MFMorphism<K> probe = zero_morphism(p, q);
  long bound = opts.degree_bound ? std::max<long>(0, *opts.degree_bound)
                                 : detail::default_ansatz_bound(probe, wts);
  std::vector<Mono> monos;
  monos.push_back(Mono(n, 0));
  for (long dgr = 1; dgr <= bound; ++dgr) {
    std::vector<Mono> l = enumerate_monomials(wts, dgr);
    monos.insert(monos.end(), l.begin(), l.end());
  }
  struct Cell {
    int block;
    uint32_t i, j;
    size_t mono;
  };
  std::vector<Cell> cells;
  for (uint32_t i = 0; i < q.rank1(); ++i)
    for (uint32_t j = 0; j < p.rank1(); ++j)
      for (size_t k = 0; k < monos.size(); ++k) cells.push_back({0, i, j, k});
  for (uint32_t i = 0; i < q.rank0(); ++i)
    for (uint32_t j = 0; j < p.rank0(); ++j)
      for (size_t k = 0; k < monos.size(); ++k) cells.push_back({1, i, j, k});
  if (cells.size() > opts.max_search_dim) {
    res.detail = "ansatz too large to search";
    return res;
  }
  // Cycle equations: alpha0 d1 - d1' alpha1 = 0 and alpha1 d0 - d0' alpha0
  // = 0, expanded per monomial.
  using RowKey = std::tuple<int, size_t, size_t, Mono>;
  std::map<RowKey, size_t> row_ids;
  auto row_of = [&](int side, size_t i, size_t j, const Mono& m) {
    auto [it, ins] = row_ids.emplace(RowKey{side, i, j, m}, row_ids.size());
    (void)ins;
    return it->second;
  };
  std::vector<std::vector<std::pair<size_t, K>>> cols(cells.size());
  for (size_t k = 0; k < cells.size(); ++k) {
    const Cell& cl = cells[k];
    const Mono& mu = monos[cl.mono];
    auto contribute = [&](int side, size_t i, size_t j, const Poly<K>& e,
                          int sgn) {
      for (const auto& [nu, c] : e.terms())
        cols[k].emplace_back(row_of(side, i, j, mono_mul(mu, nu)),
                             sgn > 0 ? c : K(0) - c);
    };
    if (cl.block == 0) {  // alpha1 cell (i over Q1, j over P1)
      for (size_t r = 0; r < q.rank0(); ++r)
        if (!q.d1.at(r, cl.i).is_zero())
          contribute(0, r, cl.j, q.d1.at(r, cl.i), -1);
      for (size_t j0 = 0; j0 < p.rank0(); ++j0)
        if (!p.d0.at(cl.j, j0).is_zero())
          contribute(1, cl.i, j0, p.d0.at(cl.j, j0), +1);
    } else {  // alpha0 cell (i over Q0, j over P0)
      for (size_t j0 = 0; j0 < p.rank1(); ++j0)
        if (!p.d1.at(cl.j, j0).is_zero())
          contribute(0, cl.i, j0, p.d1.at(cl.j, j0), +1);
      for (size_t r = 0; r < q.rank1(); ++r)
        if (!q.d0.at(r, cl.i).is_zero())
          contribute(1, r, cl.j, q.d0.at(r, cl.i), -1);
    }
  }
  const size_t nrows = row_ids.size();
  if (nrows * std::max<size_t>(cells.size(), 1) > opts.max_dense_cells) {
    res.detail = "ansatz too large to search";
    return res;
  }
  DenseMatrix<K> m(nrows, cells.size(), scalar_traits<K>::zero());
  for (size_t k = 0; k < cells.size(); ++k)
    for (const auto& [r, c] : cols[k]) m.at(r, k) += c;
  std::vector<std::vector<K>> kern = kernel_basis(m);
  std::vector<std::vector<K>> candidates =
      detail::expand_candidates(kern, opts.max_candidates);
  size_t tried = 0;
  bool capped = kern.size() > opts.max_candidates;
  for (const auto& vec : candidates) {
    ++tried;
    MFMorphism<K> alpha = zero_morphism(p, q);
    bool zero = true;
    for (size_t k = 0; k < cells.size(); ++k) {
      if (scalar_is_zero(vec[k])) continue;
      zero = false;
      const Cell& cl = cells[k];
      Poly<K> term = Poly<K>::monomial(n, monos[cl.mono], vec[k]);
      if (cl.block == 0)
        alpha.alpha1.at(cl.i, cl.j) += term;
      else
        alpha.alpha0.at(cl.i, cl.j) += term;
    }
    if (zero || !validate(alpha).valid) continue;
    MatrixFactorization<K> c = cone(alpha);
    NullHomotopyOutcome<K> contraction;
    try {
      contraction = find_null_homotopy(identity_morphism(c), nh_opts);
    } catch (const MfkError& err) {
      if (err.code() == "solve_too_large") {
        capped = true;
        continue;
      }
      throw;
    }
    if (!contraction.found) continue;
    auto cert = detail::certify_equivalence(alpha, *contraction.homotopy);
    if (cert) {
      cert->detail =
          "certified after " + std::to_string(tried) + " candidate(s)";
      return *cert;
    }
  }
  res.detail = capped ? "search capped before exhausting candidates"
                      : "no candidate cone contracted";
  return res;
}

}  // namespace mfk
