// SPDX-License-Identifier: MIT
#pragma once

/// \file mf.hpp
/// \brief Matrix factorizations of a polynomial potential: the core type,
///        validation, the shift/cone/sum/tensor constructions, Koszul
///        stabilization, cokernel presentations, removal of trivial
///        summands, and JSON (de)serialization.
///
/// Conventions used throughout:
///  * Modules are column-vector spaces; composition d1*d0 applies d0 first.
///  * d1 : P1 -> P0 has shape rank0 x rank1; d0 : P0 -> P1 has shape
///    rank1 x rank0; both products must equal f times the identity.
///  * In a graded factorization with twist d = deg f, the entry degrees are
///    deg d1[i][j] = deg0[i] - deg1[j] and deg d0[i][j] = deg1[i] - deg0[j] + d.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mfk/linalg.hpp"
#include "mfk/poly.hpp"
#include "mfk/scalar.hpp"

namespace mfk {

/// Weighted grading data attached to a matrix factorization.
struct MFGrading {
  WeightSystem ws;
  std::vector<long> deg1;  ///< generator degrees of P1
  std::vector<long> deg0;  ///< generator degrees of P0

  bool operator==(const MFGrading&) const = default;
};

template <class K>
struct MatrixFactorization {
  std::vector<std::string> vars;
  Poly<K> f;
  DenseMatrix<Poly<K>> d1;  ///< P1 -> P0, shape rank0() x rank1()
  DenseMatrix<Poly<K>> d0;  ///< P0 -> P1, shape rank1() x rank0()
  std::optional<MFGrading> grading;

  size_t rank1() const { return d1.cols(); }
  size_t rank0() const { return d0.cols(); }
  size_t nvars() const { return vars.size(); }
  Poly<K> zero() const { return Poly<K>::zero(vars.size()); }
  Poly<K> one() const {
    return Poly<K>::constant(vars.size(), scalar_traits<K>::one());
  }

  bool operator==(const MatrixFactorization& o) const {
    return vars == o.vars && f == o.f && d1 == o.d1 && d0 == o.d0 &&
           grading == o.grading;
  }
};

template <class K>
struct MFMorphism {
  MatrixFactorization<K> source, target;
  DenseMatrix<Poly<K>> alpha1;  ///< P1 -> P1', shape target.rank1() x source.rank1()
  DenseMatrix<Poly<K>> alpha0;  ///< P0 -> P0', shape target.rank0() x source.rank0()
};

struct ValidationReport {
  bool valid = true;
  std::string message;  ///< first violation, empty when valid

  static ValidationReport failure(std::string msg) {
    return {false, std::move(msg)};
  }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace detail {

template <class K>
bool entries_use_vars(const DenseMatrix<Poly<K>>& m, size_t nvars) {
  for (size_t i = 0; i < m.rows(); ++i)
    for (size_t j = 0; j < m.cols(); ++j)
      if (m.at(i, j).nvars() != nvars) return false;
  return true;
}

template <class K>
bool is_f_times_identity(const DenseMatrix<Poly<K>>& m, const Poly<K>& f) {
  for (size_t i = 0; i < m.rows(); ++i)
    for (size_t j = 0; j < m.cols(); ++j) {
      if (i == j) {
        if (m.at(i, j) != f) return false;
      } else if (!m.at(i, j).is_zero()) {
        return false;
      }
    }
  return true;
}

/// Checks that every entry of m is homogeneous of degree
/// rdeg[i] - cdeg[j] + shift (zero entries are exempt).
template <class K>
std::optional<std::string> check_entry_degrees(
    const DenseMatrix<Poly<K>>& m, const char* name,
    const std::vector<long>& rdeg, const std::vector<long>& cdeg, long shift,
    const std::vector<long>& weights) {
  for (size_t i = 0; i < m.rows(); ++i)
    for (size_t j = 0; j < m.cols(); ++j) {
      const Poly<K>& e = m.at(i, j);
      if (e.is_zero()) continue;
      auto deg = e.homogeneous_degree(weights);
      long want = rdeg[i] - cdeg[j] + shift;
      if (!deg || *deg != want)
        return std::string(name) + "[" + std::to_string(i) + "][" +
               std::to_string(j) + "] is not homogeneous of degree " +
               std::to_string(want);
    }
  return std::nullopt;
}

}  // namespace detail

template <class K>
ValidationReport validate(const MatrixFactorization<K>& p) {
  const size_t r1 = p.rank1(), r0 = p.rank0();
  if (p.d1.rows() != r0 || p.d0.rows() != r1)
    return ValidationReport::failure("d1 and d0 shapes are not compatible");
  if (p.f.nvars() != p.nvars() || !detail::entries_use_vars(p.d1, p.nvars()) ||
      !detail::entries_use_vars(p.d0, p.nvars()))
    return ValidationReport::failure(
        "entries do not live in the declared variable ring");
  if (!p.f.is_zero() && r1 != r0)
    return ValidationReport::failure(
        "nonzero potential requires equal ranks in both parities");
  if (!detail::is_f_times_identity(mat_mul(p.d1, p.d0, p.zero()), p.f))
    return ValidationReport::failure("d1*d0 is not f times the identity");
  if (!detail::is_f_times_identity(mat_mul(p.d0, p.d1, p.zero()), p.f))
    return ValidationReport::failure("d0*d1 is not f times the identity");
  if (p.grading) {
    const MFGrading& g = *p.grading;
    if (g.ws.weights.size() != p.nvars())
      return ValidationReport::failure("grading weight count mismatch");
    for (long w : g.ws.weights)
      if (w <= 0) return ValidationReport::failure("weights must be positive");
    if (g.deg1.size() != r1 || g.deg0.size() != r0)
      return ValidationReport::failure("generator degree count mismatch");
    if (!p.f.is_zero() && !is_quasi_homogeneous(p.f, g.ws))
      return ValidationReport::failure(
          "potential is not quasi-homogeneous of the declared degree");
    if (auto err = detail::check_entry_degrees(p.d1, "d1", g.deg0, g.deg1, 0,
                                               g.ws.weights))
      return ValidationReport::failure(*err);
    if (auto err = detail::check_entry_degrees(p.d0, "d0", g.deg1, g.deg0,
                                               g.ws.degree, g.ws.weights))
      return ValidationReport::failure(*err);
  }
  return {};
}

template <class K>
ValidationReport validate(const MFMorphism<K>& a) {
  if (a.source.vars != a.target.vars)
    return ValidationReport::failure("source and target variables differ");
  if (a.source.f != a.target.f)
    return ValidationReport::failure("source and target potentials differ");
  if (a.alpha1.rows() != a.target.rank1() ||
      a.alpha1.cols() != a.source.rank1() ||
      a.alpha0.rows() != a.target.rank0() ||
      a.alpha0.cols() != a.source.rank0())
    return ValidationReport::failure("component shapes are not compatible");
  const Poly<K> z = a.source.zero();
  // Cycle condition: alpha0 d1 = d1' alpha1; with a nonzero potential one
  // square implies the other, but both are checked unconditionally.
  if (!(mat_mul(a.alpha0, a.source.d1, z) == mat_mul(a.target.d1, a.alpha1, z)))
    return ValidationReport::failure("alpha0*d1 != d1'*alpha1");
  if (!(mat_mul(a.alpha1, a.source.d0, z) == mat_mul(a.target.d0, a.alpha0, z)))
    return ValidationReport::failure("alpha1*d0 != d0'*alpha0");
  return {};
}

/// True when both sides carry the same weight system and the components are
/// homogeneous of internal degree zero; such morphisms produce graded cones.
template <class K>
bool morphism_is_graded(const MFMorphism<K>& a) {
  if (!a.source.grading || !a.target.grading) return false;
  const MFGrading& gs = *a.source.grading;
  const MFGrading& gt = *a.target.grading;
  if (!(gs.ws == gt.ws)) return false;
  return !detail::check_entry_degrees(a.alpha1, "alpha1", gt.deg1, gs.deg1, 0,
                                      gs.ws.weights) &&
         !detail::check_entry_degrees(a.alpha0, "alpha0", gt.deg0, gs.deg0, 0,
                                      gs.ws.weights);
}

// ---------------------------------------------------------------------------
// Basic constructions
// ---------------------------------------------------------------------------

enum class TrivialKind {
  f_then_id,  ///< d1 = f*I, d0 = I
  id_then_f   ///< d1 = I, d0 = f*I
};

/// Rank-one trivial (contractible) factorization of f.
template <class K>
MatrixFactorization<K> trivial_mf(const std::vector<std::string>& vars,
                                  const Poly<K>& f, TrivialKind kind,
                                  std::optional<WeightSystem> ws = {}) {
  MatrixFactorization<K> p;
  p.vars = vars;
  p.f = f;
  const Poly<K> one = Poly<K>::constant(vars.size(), scalar_traits<K>::one());
  p.d1 = DenseMatrix<Poly<K>>(1, 1, kind == TrivialKind::f_then_id ? f : one);
  p.d0 = DenseMatrix<Poly<K>>(1, 1, kind == TrivialKind::f_then_id ? one : f);
  if (ws) {
    // f_then_id: deg d1 entry must equal deg f, so the P1 generator sits
    // d below the P0 generator; id_then_f puts them level.
    if (kind == TrivialKind::f_then_id)
      p.grading = MFGrading{*ws, {0}, {ws->degree}};
    else
      p.grading = MFGrading{*ws, {0}, {0}};
  }
  return p;
}

/// Shift [1]: swaps the parities and negates both maps.  Generator degrees
/// move as deg1' = deg0, deg0' = deg1 + d, keeping entry degrees consistent.
template <class K>
MatrixFactorization<K> shift(const MatrixFactorization<K>& p) {
  MatrixFactorization<K> s;
  s.vars = p.vars;
  s.f = p.f;
  s.d1 = -p.d0;
  s.d0 = -p.d1;
  if (p.grading) {
    MFGrading g;
    g.ws = p.grading->ws;
    g.deg1 = p.grading->deg0;
    g.deg0 = p.grading->deg1;
    for (long& v : g.deg0) v += g.ws.degree;
    s.grading = g;
  }
  return s;
}

template <class K>
MatrixFactorization<K> direct_sum(const MatrixFactorization<K>& a,
                                  const MatrixFactorization<K>& b) {
  if (a.vars != b.vars || !(a.f == b.f))
    throw MfkError("incompatible_summands",
                   "direct sum requires the same variables and potential");
  MatrixFactorization<K> s;
  s.vars = a.vars;
  s.f = a.f;
  const Poly<K> z = a.zero();
  s.d1 = mat_blocks2(a.d1, DenseMatrix<Poly<K>>(a.d1.rows(), b.d1.cols(), z),
                     DenseMatrix<Poly<K>>(b.d1.rows(), a.d1.cols(), z), b.d1, z);
  s.d0 = mat_blocks2(a.d0, DenseMatrix<Poly<K>>(a.d0.rows(), b.d0.cols(), z),
                     DenseMatrix<Poly<K>>(b.d0.rows(), a.d0.cols(), z), b.d0, z);
  if (a.grading && b.grading && a.grading->ws == b.grading->ws) {
    MFGrading g;
    g.ws = a.grading->ws;
    g.deg1 = a.grading->deg1;
    g.deg1.insert(g.deg1.end(), b.grading->deg1.begin(), b.grading->deg1.end());
    g.deg0 = a.grading->deg0;
    g.deg0.insert(g.deg0.end(), b.grading->deg0.begin(), b.grading->deg0.end());
    s.grading = g;
  }
  return s;
}

/// Mapping cone of a morphism alpha : P -> P'.  On underlying modules
/// C1 = P1' (+) P0 and C0 = P0' (+) P1, with
///   cone.d1 = [[d1', alpha0], [0, -d0]],
///   cone.d0 = [[d0', alpha1], [0, -d1]].
/// cone(0 : P -> P') is P' (+) shift(P).
template <class K>
MatrixFactorization<K> cone(const MFMorphism<K>& a) {
  ValidationReport rep = validate(a);
  if (!rep.valid) throw MfkError("invalid_morphism", rep.message);
  const MatrixFactorization<K>& p = a.source;
  const MatrixFactorization<K>& q = a.target;
  const Poly<K> z = p.zero();
  MatrixFactorization<K> c;
  c.vars = p.vars;
  c.f = p.f;
  c.d1 = mat_blocks2(q.d1, a.alpha0,
                     DenseMatrix<Poly<K>>(p.d0.rows(), q.d1.cols(), z), -p.d0,
                     z);
  c.d0 = mat_blocks2(q.d0, a.alpha1,
                     DenseMatrix<Poly<K>>(p.d1.rows(), q.d0.cols(), z), -p.d1,
                     z);
  if (morphism_is_graded(a)) {
    MFGrading g;
    g.ws = p.grading->ws;
    g.deg1 = q.grading->deg1;
    g.deg1.insert(g.deg1.end(), p.grading->deg0.begin(), p.grading->deg0.end());
    g.deg0 = q.grading->deg0;
    for (long v : p.grading->deg1) g.deg0.push_back(v + g.ws.degree);
    c.grading = g;
  }
  return c;
}

template <class K>
MFMorphism<K> zero_morphism(const MatrixFactorization<K>& src,
                            const MatrixFactorization<K>& dst) {
  MFMorphism<K> m;
  m.source = src;
  m.target = dst;
  m.alpha1 = DenseMatrix<Poly<K>>(dst.rank1(), src.rank1(), src.zero());
  m.alpha0 = DenseMatrix<Poly<K>>(dst.rank0(), src.rank0(), src.zero());
  return m;
}

template <class K>
MFMorphism<K> identity_morphism(const MatrixFactorization<K>& p) {
  MFMorphism<K> m;
  m.source = p;
  m.target = p;
  m.alpha1 = DenseMatrix<Poly<K>>::identity(p.rank1(), p.zero(), p.one());
  m.alpha0 = DenseMatrix<Poly<K>>::identity(p.rank0(), p.zero(), p.one());
  return m;
}

// ---------------------------------------------------------------------------
// Tensor product
// ---------------------------------------------------------------------------

/// Tensor product of factorizations of f and f' over the same variables:
/// a factorization of f + f'.  With T1 = P1 (x) P0' (+) P0 (x) P1' and
/// T0 = P0 (x) P0' (+) P1 (x) P1' (left factor major in each Kronecker
/// block), the differential is d (x) 1 + sigma (x) d', i.e.
///   d1'' = [[d1 (x) I,  I (x) d1'], [-I (x) d0',  d0 (x) I]]
///   d0'' = [[d0 (x) I, -I (x) d1'], [ I (x) d0',  d1 (x) I]].
template <class K>
MatrixFactorization<K> tensor_product(const MatrixFactorization<K>& p,
                                      const MatrixFactorization<K>& q) {
  if (p.vars != q.vars)
    throw MfkError("incompatible_factors",
                   "tensor product requires the same variable list");
  const Poly<K> z = p.zero();
  const Poly<K> one = p.one();
  auto eye = [&](size_t n) {
    return DenseMatrix<Poly<K>>::identity(n, z, one);
  };
  MatrixFactorization<K> t;
  t.vars = p.vars;
  t.f = p.f + q.f;
  t.d1 = mat_blocks2(mat_kron(p.d1, eye(q.rank0()), z),
                     mat_kron(eye(p.rank0()), q.d1, z),
                     -mat_kron(eye(p.rank1()), q.d0, z),
                     mat_kron(p.d0, eye(q.rank1()), z), z);
  t.d0 = mat_blocks2(mat_kron(p.d0, eye(q.rank0()), z),
                     -mat_kron(eye(p.rank1()), q.d1, z),
                     mat_kron(eye(p.rank0()), q.d0, z),
                     mat_kron(p.d1, eye(q.rank1()), z), z);
  if (p.grading && q.grading && p.grading->ws == q.grading->ws) {
    const MFGrading& gp = *p.grading;
    const MFGrading& gq = *q.grading;
    const long d = gp.ws.degree;
    MFGrading g;
    g.ws = gp.ws;
    for (long a : gp.deg1)
      for (long b : gq.deg0) g.deg1.push_back(a + b);
    for (long a : gp.deg0)
      for (long b : gq.deg1) g.deg1.push_back(a + b);
    for (long a : gp.deg0)
      for (long b : gq.deg0) g.deg0.push_back(a + b);
    for (long a : gp.deg1)
      for (long b : gq.deg1) g.deg0.push_back(a + b + d);
    t.grading = g;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Signed basis maps (permutation plus signs)
// ---------------------------------------------------------------------------

/// A bijective generator relabeling dst[perm[j]] = sign[j] * src[j].
struct SignedPermutation {
  std::vector<size_t> perm;
  std::vector<int> sign;

  size_t size() const { return perm.size(); }
  static SignedPermutation identity(size_t n) {
    SignedPermutation s;
    s.perm.resize(n);
    for (size_t i = 0; i < n; ++i) s.perm[i] = i;
    s.sign.assign(n, 1);
    return s;
  }
};

/// Parity-respecting signed relabeling between two factorizations.
struct SignedBasisMap {
  SignedPermutation on1, on0;
};

template <class K>
DenseMatrix<Poly<K>> signed_perm_matrix(const SignedPermutation& s,
                                        size_t nvars) {
  DenseMatrix<Poly<K>> m(s.size(), s.size(), Poly<K>::zero(nvars));
  for (size_t j = 0; j < s.size(); ++j)
    m.at(s.perm[j], j) = Poly<K>::constant(
        nvars, scalar_traits<K>::from_int(s.sign[j]));
  return m;
}

/// Transports a factorization along a signed relabeling of its generators:
/// d1' = M0 d1 M1^T, d0' = M1 d0 M0^T (the transpose of a signed
/// permutation matrix is its inverse).
template <class K>
MatrixFactorization<K> apply_basis_map(const MatrixFactorization<K>& p,
                                       const SignedBasisMap& map) {
  const Poly<K> z = p.zero();
  auto m1 = signed_perm_matrix<K>(map.on1, p.nvars());
  auto m0 = signed_perm_matrix<K>(map.on0, p.nvars());
  MatrixFactorization<K> r;
  r.vars = p.vars;
  r.f = p.f;
  r.d1 = mat_mul(mat_mul(m0, p.d1, z), m1.transposed(z), z);
  r.d0 = mat_mul(mat_mul(m1, p.d0, z), m0.transposed(z), z);
  if (p.grading) {
    MFGrading g;
    g.ws = p.grading->ws;
    g.deg1.resize(p.rank1());
    g.deg0.resize(p.rank0());
    for (size_t j = 0; j < p.rank1(); ++j)
      g.deg1[map.on1.perm[j]] = p.grading->deg1[j];
    for (size_t j = 0; j < p.rank0(); ++j)
      g.deg0[map.on0.perm[j]] = p.grading->deg0[j];
    r.grading = g;
  }
  return r;
}

namespace detail {

// Enumerates the (parity-of-p, parity-of-q, parity-of-r, ip, iq, ir) labels
// of the order-1 and order-0 generators of a double tensor product, where
// "left" means ((P @ Q) @ R) and "right" means (P @ (Q @ R)).
struct TripleIndexer {
  size_t p1, p0, q1, q0, r1, r0;

  using Label = std::array<size_t, 6>;

  size_t dim(int which, int parity) const {
    switch (which) {
      case 0: return parity ? p1 : p0;
      case 1: return parity ? q1 : q0;
      default: return parity ? r1 : r0;
    }
  }

  // Tensor block order chosen by tensor_product: for X (x) Y at parity 1 the
  // blocks are (X1,Y0) then (X0,Y1); at parity 0 they are (X0,Y0) then
  // (X1,Y1).  Indices are left-factor-major within each block.
  static std::vector<std::array<int, 2>> pair_order(int s) {
    if (s == 1) return {{1, 0}, {0, 1}};
    return {{0, 0}, {1, 1}};
  }

  std::vector<Label> left_labels(int s) const {
    std::vector<Label> out;
    for (auto [pq, r] : pair_order(s))
      for (auto [p, q] : pair_order(pq))
        for (size_t ip = 0; ip < dim(0, p); ++ip)
          for (size_t iq = 0; iq < dim(1, q); ++iq)
            for (size_t ir = 0; ir < dim(2, r); ++ir)
              out.push_back({size_t(p), size_t(q), size_t(r), ip, iq, ir});
    return out;
  }

  std::vector<Label> right_labels(int s) const {
    std::vector<Label> out;
    for (auto [p, qr] : pair_order(s))
      for (auto [q, r] : pair_order(qr))
        for (size_t ip = 0; ip < dim(0, p); ++ip)
          for (size_t iq = 0; iq < dim(1, q); ++iq)
            for (size_t ir = 0; ir < dim(2, r); ++ir)
              out.push_back({size_t(p), size_t(q), size_t(r), ip, iq, ir});
    return out;
  }
};

}  // namespace detail

/// The associativity relabeling from tensor_product(tensor_product(p,q),r)
/// to tensor_product(p, tensor_product(q,r)).  All signs are +1: both sides
/// realize d (x) 1 (x) 1 + sigma (x) d' (x) 1 + sigma (x) sigma' (x) d'',
/// so only the block order of the underlying sums differs.
template <class K>
SignedBasisMap tensor_associator(const MatrixFactorization<K>& p,
                                 const MatrixFactorization<K>& q,
                                 const MatrixFactorization<K>& r) {
  detail::TripleIndexer ix{p.rank1(), p.rank0(), q.rank1(),
                           q.rank0(), r.rank1(), r.rank0()};
  SignedBasisMap map;
  for (int s : {1, 0}) {
    auto left = ix.left_labels(s);
    auto right = ix.right_labels(s);
    std::map<detail::TripleIndexer::Label, size_t> where;
    for (size_t i = 0; i < right.size(); ++i) where.emplace(right[i], i);
    SignedPermutation sp;
    sp.perm.resize(left.size());
    sp.sign.assign(left.size(), 1);
    for (size_t i = 0; i < left.size(); ++i) sp.perm[i] = where.at(left[i]);
    (s == 1 ? map.on1 : map.on0) = std::move(sp);
  }
  return map;
}

// ---------------------------------------------------------------------------
// Koszul stabilization
// ---------------------------------------------------------------------------

/// A symmetry of a factorization: a permutation of the variables together
/// with signed generator relabelings intertwining the differentials, i.e.
/// M0 d1 M1^T = sigma(d1) and M1 d0 M0^T = sigma(d0), where sigma renames
/// variables in the entries.
struct SymmetryCert {
  std::vector<size_t> var_perm;  ///< variable i maps to var_perm[i]
  SignedBasisMap gens;
};

template <class K>
struct KoszulResult {
  MatrixFactorization<K> mf;
  /// Verified-by-construction symmetries (adjacent transpositions of
  /// interchangeable (g_i, x_i) pairs); consumers re-verify before use.
  std::vector<SymmetryCert> symmetries;
};

/// Euler decomposition f = sum_i g_i x_i for quasi-homogeneous f:
/// g_i = (w_i / d) * df/dx_i.
template <class K>
std::vector<Poly<K>> euler_decomposition(const Poly<K>& f,
                                         const WeightSystem& ws) {
  if (!is_quasi_homogeneous(f, ws) || f.is_zero())
    throw MfkError("not_quasi_homogeneous",
                   "Euler decomposition needs a quasi-homogeneous potential");
  std::vector<Poly<K>> gs;
  for (size_t i = 0; i < f.nvars(); ++i) {
    K c = K(Rational(ws.weights[i], ws.degree));
    gs.push_back(f.derivative(i).scaled(c));
  }
  return gs;
}

/// Koszul stabilization of f = sum_i g_i x_i on the exterior algebra of a
/// rank-n free module: D = (contraction by (x_1..x_n)) + (wedge by
/// sum_i g_i e_i), whose square is f.  Generators e_S are indexed by
/// subsets in binary-counter order, split by parity of |S|; on both halves
/// the component sign for slot i is (-1)^(number of j in S below i).
/// Generator degrees are deg(e_S) = d * floor(|S|/2) - sum_{i in S} w_i
/// when a grading is supplied.
template <class K>
KoszulResult<K> koszul_stabilization(const std::vector<std::string>& vars,
                                     const Poly<K>& f,
                                     const std::vector<Poly<K>>& gs,
                                     std::optional<WeightSystem> ws = {}) {
  const size_t n = vars.size();
  if (n == 0 || n > 20)
    throw MfkError("bad_rank", "Koszul stabilization needs 1..20 variables");
  if (gs.size() != n)
    throw MfkError("bad_decomposition", "need one cofactor per variable");
  Poly<K> sum = Poly<K>::zero(n);
  for (size_t i = 0; i < n; ++i) sum += gs[i] * Poly<K>::variable(n, i);
  if (!(sum == f))
    throw MfkError("bad_decomposition",
                   "cofactors do not recompose the potential");

  const uint32_t full = uint32_t(1) << n;
  std::vector<size_t> index_in_parity(full);
  std::vector<uint32_t> odd_sets, even_sets;
  for (uint32_t s = 0; s < full; ++s) {
    if (__builtin_popcount(s) % 2) {
      index_in_parity[s] = odd_sets.size();
      odd_sets.push_back(s);
    } else {
      index_in_parity[s] = even_sets.size();
      even_sets.push_back(s);
    }
  }

  MatrixFactorization<K> mf;
  mf.vars = vars;
  mf.f = f;
  const Poly<K> z = Poly<K>::zero(n);
  mf.d1 = DenseMatrix<Poly<K>>(even_sets.size(), odd_sets.size(), z);
  mf.d0 = DenseMatrix<Poly<K>>(odd_sets.size(), even_sets.size(), z);

  auto slot_sign = [](uint32_t set, size_t i) {
    return (__builtin_popcount(set & ((uint32_t(1) << i) - 1)) % 2) ? -1 : 1;
  };
  auto emit = [&](DenseMatrix<Poly<K>>& m, uint32_t src, uint32_t dst,
                  const Poly<K>& val, int sign) {
    Poly<K>& cell = m.at(index_in_parity[dst], index_in_parity[src]);
    cell += (sign < 0) ? -val : val;
  };
  for (uint32_t s = 0; s < full; ++s) {
    const bool odd = __builtin_popcount(s) % 2;
    DenseMatrix<Poly<K>>& m = odd ? mf.d1 : mf.d0;
    for (size_t i = 0; i < n; ++i) {
      const uint32_t bit = uint32_t(1) << i;
      if (s & bit) {
        emit(m, s, s ^ bit, Poly<K>::variable(n, i), slot_sign(s, i));
      } else if (!gs[i].is_zero()) {
        emit(m, s, s | bit, gs[i], slot_sign(s, i));
      }
    }
  }

  bool graded = false;
  if (ws) {
    graded = is_quasi_homogeneous(f, *ws);
    for (size_t i = 0; i < n && graded; ++i) {
      if (gs[i].is_zero()) continue;
      auto dg = gs[i].homogeneous_degree(ws->weights);
      graded = dg && *dg == ws->degree - ws->weights[i];
    }
  }
  if (graded) {
    MFGrading g;
    g.ws = *ws;
    auto deg_of = [&](uint32_t set) {
      long deg = ws->degree * (__builtin_popcount(set) / 2);
      for (size_t i = 0; i < n; ++i)
        if (set & (uint32_t(1) << i)) deg -= ws->weights[i];
      return deg;
    };
    for (uint32_t s : odd_sets) g.deg1.push_back(deg_of(s));
    for (uint32_t s : even_sets) g.deg0.push_back(deg_of(s));
    mf.grading = g;
  }

  KoszulResult<K> result;
  result.mf = std::move(mf);

  // Symmetries: adjacent transpositions (i, i+1) such that swapping the two
  // variables also swaps g_i and g_{i+1}.  The generator lift sends e_S to
  // e_{swap(S)} with sign -1 exactly when {i, i+1} is contained in S.
  for (size_t i = 0; i + 1 < n; ++i) {
    std::vector<size_t> vp(n);
    for (size_t k = 0; k < n; ++k) vp[k] = k;
    std::swap(vp[i], vp[i + 1]);
    if (!(gs[i].renamed(n, vp) == gs[i + 1]) ||
        !(gs[i + 1].renamed(n, vp) == gs[i]) || !(f.renamed(n, vp) == f))
      continue;
    if (ws && ws->weights[i] != ws->weights[i + 1]) continue;
    SymmetryCert cert;
    cert.var_perm = vp;
    auto build = [&](const std::vector<uint32_t>& sets) {
      SignedPermutation sp;
      sp.perm.resize(sets.size());
      sp.sign.resize(sets.size());
      const uint32_t bi = uint32_t(1) << i, bj = uint32_t(1) << (i + 1);
      for (size_t k = 0; k < sets.size(); ++k) {
        uint32_t s = sets[k];
        uint32_t img = s;
        if (bool(s & bi) != bool(s & bj)) img = s ^ bi ^ bj;
        sp.perm[k] = index_in_parity[img];
        sp.sign[k] = ((s & bi) && (s & bj)) ? -1 : 1;
      }
      return sp;
    };
    cert.gens.on1 = build(odd_sets);
    cert.gens.on0 = build(even_sets);
    result.symmetries.push_back(std::move(cert));
  }
  return result;
}

/// Renames variables inside all entries (used when checking symmetries).
template <class K>
DenseMatrix<Poly<K>> rename_entries(const DenseMatrix<Poly<K>>& m,
                                    const std::vector<size_t>& var_perm,
                                    size_t nvars) {
  DenseMatrix<Poly<K>> r(m.rows(), m.cols(), Poly<K>::zero(nvars));
  for (size_t i = 0; i < m.rows(); ++i)
    for (size_t j = 0; j < m.cols(); ++j)
      r.at(i, j) = m.at(i, j).renamed(nvars, var_perm);
  return r;
}

/// Exact check that a claimed symmetry really intertwines the differentials.
template <class K>
bool verify_symmetry(const MatrixFactorization<K>& p, const SymmetryCert& c) {
  if (c.var_perm.size() != p.nvars()) return false;
  if (c.gens.on1.size() != p.rank1() || c.gens.on0.size() != p.rank0())
    return false;
  MatrixFactorization<K> moved = apply_basis_map(p, c.gens);
  return moved.d1 == rename_entries(p.d1, c.var_perm, p.nvars()) &&
         moved.d0 == rename_entries(p.d0, c.var_perm, p.nvars());
}

// ---------------------------------------------------------------------------
// Cokernel presentation
// ---------------------------------------------------------------------------

template <class K>
struct CokerPresentation {
  DenseMatrix<Poly<K>> matrix{0, 0, Poly<K>()};
  std::vector<long> row_degrees;  ///< degrees of the target generators (P0)
  std::vector<long> col_degrees;  ///< degrees of the relations (P1)
};

/// Presentation of coker(d1) as a module over k[x]/(f): the matrix is d1
/// itself; f * (free module) lies in the image automatically because
/// f v = d1 (d0 v).
template <class K>
CokerPresentation<K> coker_presentation(const MatrixFactorization<K>& p) {
  CokerPresentation<K> c;
  c.matrix = p.d1;
  if (p.grading) {
    c.row_degrees = p.grading->deg0;
    c.col_degrees = p.grading->deg1;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Removing trivial summands
// ---------------------------------------------------------------------------

namespace detail {

/// One reduction step: if some entry of `a` (= one of the two differentials)
/// is a nonzero scalar, clear its row and column by row/column operations
/// (mirrored contragrediently on the partner differential `b`), then drop
/// the pivot generator pair.  Modifies all four matrices in place and
/// returns true if a reduction happened.
///
/// Column operations on `a` are changes of basis of its source; they act on
/// `b` by the inverse on the corresponding target side, and likewise for row
/// operations.  After clearing, the partner matrix automatically has the
/// complementary block shape, so dropping the pivot row/column of both is an
/// exact splitting of a rank-one trivial factorization.
template <class K>
bool strip_step(DenseMatrix<Poly<K>>& a, DenseMatrix<Poly<K>>& b,
                std::vector<long>* adeg_rows, std::vector<long>* adeg_cols) {
  size_t pi = a.rows(), pj = a.cols();
  for (size_t i = 0; i < a.rows() && pi == a.rows(); ++i)
    for (size_t j = 0; j < a.cols(); ++j) {
      auto c = a.at(i, j).constant_value();
      if (c && !scalar_is_zero(*c)) {
        pi = i;
        pj = j;
        break;
      }
    }
  if (pi == a.rows()) return false;
  const size_t nv = a.at(pi, pj).nvars();
  const K unit = *a.at(pi, pj).constant_value();
  const Poly<K> inv_unit =
      Poly<K>::constant(nv, scalar_traits<K>::one() / unit);
  // Clear the pivot column of `a` with row operations: row_i -= c * row_pi.
  // Contragredient action on `b`: col_pi += c * col_i.
  for (size_t i = 0; i < a.rows(); ++i) {
    if (i == pi || a.at(i, pj).is_zero()) continue;
    Poly<K> c = a.at(i, pj) * inv_unit;
    for (size_t j = 0; j < a.cols(); ++j)
      a.at(i, j) -= c * a.at(pi, j);
    for (size_t r = 0; r < b.rows(); ++r)
      b.at(r, pi) += b.at(r, i) * c;
  }
  // Clear the pivot row of `a` with column operations: col_j -= c * col_pj.
  // Contragredient action on `b`: row_pj += c * row_j.
  for (size_t j = 0; j < a.cols(); ++j) {
    if (j == pj || a.at(pi, j).is_zero()) continue;
    Poly<K> c = a.at(pi, j) * inv_unit;
    for (size_t i = 0; i < a.rows(); ++i)
      a.at(i, j) -= a.at(i, pj) * c;
    for (size_t cc = 0; cc < b.cols(); ++cc)
      b.at(pj, cc) += c * b.at(j, cc);
  }
  // Drop row pi / col pj from `a` and row pj / col pi from `b`.
  const Poly<K> z = Poly<K>::zero(nv);
  DenseMatrix<Poly<K>> na(a.rows() - 1, a.cols() - 1, z);
  for (size_t i = 0, ii = 0; i < a.rows(); ++i) {
    if (i == pi) continue;
    for (size_t j = 0, jj = 0; j < a.cols(); ++j) {
      if (j == pj) continue;
      na.at(ii, jj++) = a.at(i, j);
    }
    ++ii;
  }
  DenseMatrix<Poly<K>> nb(b.rows() - 1, b.cols() - 1, z);
  for (size_t i = 0, ii = 0; i < b.rows(); ++i) {
    if (i == pj) continue;
    for (size_t j = 0, jj = 0; j < b.cols(); ++j) {
      if (j == pi) continue;
      nb.at(ii, jj++) = b.at(i, j);
    }
    ++ii;
  }
  a = std::move(na);
  b = std::move(nb);
  if (adeg_rows) adeg_rows->erase(adeg_rows->begin() + long(pi));
  if (adeg_cols) adeg_cols->erase(adeg_cols->begin() + long(pj));
  return true;
}

}  // namespace detail

/// Splits off rank-one trivial summands as long as some entry of d1 or d0
/// is a nonzero scalar; the result is homotopy equivalent to the input (the
/// row/column operations are strict isomorphisms and the dropped summands
/// are contractible).
template <class K>
MatrixFactorization<K> strip_trivial_summands(MatrixFactorization<K> p) {
  std::vector<long>*r1 = nullptr, *r0 = nullptr;
  if (p.grading) {
    r1 = &p.grading->deg1;
    r0 = &p.grading->deg0;
  }
  for (;;) {
    if (detail::strip_step(p.d1, p.d0, r0, r1)) continue;  // rows of d1: P0
    if (detail::strip_step(p.d0, p.d1, r1, r0)) continue;
    break;
  }
  return p;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

using nlohmann::json;

template <class K>
json mf_to_json(const MatrixFactorization<K>& p) {
  json j;
  j["mode"] = scalar_traits<K>::mode_name();
  j["vars"] = p.vars;
  j["f"] = print_poly(p.f, p.vars);
  auto mat = [&](const DenseMatrix<Poly<K>>& m) {
    json rows = json::array();
    for (size_t i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (size_t jx = 0; jx < m.cols(); ++jx)
        row.push_back(print_poly(m.at(i, jx), p.vars));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["d1"] = mat(p.d1);
  j["d0"] = mat(p.d0);
  if (p.grading) {
    j["grading"] = {{"weights", p.grading->ws.weights},
                    {"degree", p.grading->ws.degree},
                    {"deg1", p.grading->deg1},
                    {"deg0", p.grading->deg0}};
  }
  return j;
}

namespace detail {

inline void require_fields(const json& j, std::initializer_list<const char*> fs) {
  for (const char* f : fs)
    if (!j.contains(f))
      throw MfkError("bad_json", std::string("missing field '") + f + "'");
}

}  // namespace detail

template <class K>
MatrixFactorization<K> mf_from_json(const json& j) {
  detail::require_fields(j, {"mode", "vars", "f", "d1", "d0"});
  if (j.at("mode").get<std::string>() != scalar_traits<K>::mode_name())
    throw MfkError("mode_mismatch", "unexpected scalar mode in JSON input");
  MatrixFactorization<K> p;
  p.vars = j.at("vars").get<std::vector<std::string>>();
  p.f = parse_poly<K>(j.at("f").get<std::string>(), p.vars);
  auto mat = [&](const json& rows, const char* name) {
    if (!rows.is_array())
      throw MfkError("bad_json", std::string(name) + " must be an array");
    size_t r = rows.size();
    size_t c = r ? rows.at(0).size() : 0;
    DenseMatrix<Poly<K>> m(r, c, Poly<K>::zero(p.vars.size()));
    for (size_t i = 0; i < r; ++i) {
      if (rows.at(i).size() != c)
        throw MfkError("bad_json", std::string(name) + " rows differ in length");
      for (size_t jx = 0; jx < c; ++jx)
        m.at(i, jx) =
            parse_poly<K>(rows.at(i).at(jx).get<std::string>(), p.vars);
    }
    return m;
  };
  p.d1 = mat(j.at("d1"), "d1");
  p.d0 = mat(j.at("d0"), "d0");
  // An explicit 0 x 0 pair is legal (the zero factorization); row counts of
  // one matrix must match column counts of the other, which validate()
  // reports on rather than this loader.
  if (j.contains("grading")) {
    const json& g = j.at("grading");
    detail::require_fields(g, {"weights", "degree", "deg1", "deg0"});
    MFGrading mg;
    mg.ws.weights = g.at("weights").get<std::vector<long>>();
    mg.ws.degree = g.at("degree").get<long>();
    mg.deg1 = g.at("deg1").get<std::vector<long>>();
    mg.deg0 = g.at("deg0").get<std::vector<long>>();
    p.grading = mg;
  }
  return p;
}

template <class K>
json morphism_to_json(const MFMorphism<K>& m) {
  json j;
  j["source"] = mf_to_json(m.source);
  j["target"] = mf_to_json(m.target);
  auto mat = [&](const DenseMatrix<Poly<K>>& a) {
    json rows = json::array();
    for (size_t i = 0; i < a.rows(); ++i) {
      json row = json::array();
      for (size_t jx = 0; jx < a.cols(); ++jx)
        row.push_back(print_poly(a.at(i, jx), m.source.vars));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["alpha1"] = mat(m.alpha1);
  j["alpha0"] = mat(m.alpha0);
  return j;
}

template <class K>
MFMorphism<K> morphism_from_json(const json& j) {
  detail::require_fields(j, {"source", "target", "alpha1", "alpha0"});
  MFMorphism<K> m;
  m.source = mf_from_json<K>(j.at("source"));
  m.target = mf_from_json<K>(j.at("target"));
  auto mat = [&](const json& rows, size_t r, size_t c, const char* name) {
    DenseMatrix<Poly<K>> a(r, c, Poly<K>::zero(m.source.vars.size()));
    if (rows.size() != r)
      throw MfkError("bad_json", std::string(name) + " row count mismatch");
    for (size_t i = 0; i < r; ++i) {
      if (rows.at(i).size() != c)
        throw MfkError("bad_json", std::string(name) + " column count mismatch");
      for (size_t jx = 0; jx < c; ++jx)
        a.at(i, jx) =
            parse_poly<K>(rows.at(i).at(jx).get<std::string>(), m.source.vars);
    }
    return a;
  };
  m.alpha1 = mat(j.at("alpha1"), m.target.rank1(), m.source.rank1(), "alpha1");
  m.alpha0 = mat(j.at("alpha0"), m.target.rank0(), m.source.rank0(), "alpha0");
  return m;
}

}  // namespace mfk
