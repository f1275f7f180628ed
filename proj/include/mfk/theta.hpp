#pragma once
// Intersection pairing of two graded matrix factorizations of the same
// isolated quasi-homogeneous potential: the lengths of the first torsion
// modules of coker(d1) against N = coker(d1'), computed degree by degree
// from the induced 2-periodic complex
//   ... -> N^{rank1} --d1--> N^{rank0} --d0--> N^{rank1} -> ...
// with theta = l(Tor2) - l(Tor1).  Every slice is a finite exact linear
// computation: quotient dimensions and induced-map ranks over the scalar
// field, with the quotient by the presentation handled as span ranks.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mfk/linalg.hpp"
#include "mfk/mf.hpp"
#include "mfk/milnor.hpp"
#include "mfk/poly.hpp"

namespace mfk {

// ---------------------------------------------------------------------------
// Reports and options
// ---------------------------------------------------------------------------

/// Homology dimensions of the four leading torsion positions in one degree.
struct ThetaSliceRow {
  long degree = 0;
  size_t h1 = 0, h2 = 0, h3 = 0, h4 = 0;
};

struct ThetaReport {
  long long tor1 = 0;  ///< total length of the first torsion module
  long long tor2 = 0;  ///< total length of the second
  long long theta = 0; ///< tor2 - tor1
  /// Two-periodicity of the scanned lengths: positions 3 and 4 must repeat
  /// positions 1 and 2.  Doubles as the window-adequacy certificate.
  bool periodic_1_3 = false;
  bool periodic_2_4 = false;
  bool valid = false;  ///< both periodicity flags hold
  long scan_min = 0, scan_max = 0;  ///< inclusive degree range scanned
  std::vector<ThetaSliceRow> slices;  ///< rows with at least one nonzero entry
};

struct ThetaOptions {
  /// Hard cap on the number of scanned degrees before giving up.
  long max_degrees = 200;
};

namespace detail {

// ---------------------------------------------------------------------------
// Slice engine
// ---------------------------------------------------------------------------

/// Degreewise rank machinery for the 2-periodic complex of P against
/// N = coker(d1') presented by the columns of d1'.  Position p >= 0 is the
/// free module N^{m_p} with m_p = rank0 (p even) or rank1 (p odd), whose
/// generator element-degrees are sigma_p; the differential into position
/// p - 1 is d1 (p odd) or d0 (p even).
template <class K>
class ThetaEngine {
 public:
  ThetaEngine(const MatrixFactorization<K>& p, const MatrixFactorization<K>& np)
      : p_(p), np_(np), w_(p.grading->ws.weights), period_(p.grading->ws.degree) {
    for (long g : p.grading->deg0) sigma0_.push_back(-g);
    for (long g : p.grading->deg1) sigma1_.push_back(-g);
    for (long g : np.grading->deg0) tau_.push_back(-g);
    for (long g : np.grading->deg1) rho_.push_back(-g);
  }

  /// Lowest total degree in which any of positions 0..5 has a nonzero
  /// ambient slice; scanning starts here.
  std::optional<long> scan_floor() const {
    std::optional<long> lo;
    for (size_t pos = 0; pos <= 5; ++pos)
      for (long s : sigma(pos))
        for (long t : tau_) {
          const long d = s + t;
          if (!lo || d < *lo) lo = d;
        }
    return lo;
  }

  /// Homology dimensions h1..h4 of the complex in total degree d.
  std::array<size_t, 4> slice(long d) {
    std::array<size_t, 6> dim{}, relrank{};
    std::array<size_t, 6> indrank{};  // induced rank of Phi_p, p = 1..5
    std::array<Layout, 6> lay;
    std::array<DenseMatrix<K>, 6> rel;
    for (size_t pos = 0; pos <= 5; ++pos) {
      lay[pos] = layout(pos, d);
      dim[pos] = lay[pos].dim;
      rel[pos] = relation_matrix(pos, d, lay[pos]);
      relrank[pos] = rank_exact(rel[pos]);
    }
    for (size_t pos = 1; pos <= 5; ++pos) {
      DenseMatrix<K> m = map_matrix(pos, d, lay[pos], lay[pos - 1]);
      DenseMatrix<K> aug(m.rows(), m.cols() + rel[pos - 1].cols(),
                         scalar_traits<K>::zero());
      for (size_t i = 0; i < m.rows(); ++i) {
        for (size_t j = 0; j < m.cols(); ++j) aug.at(i, j) = m.at(i, j);
        for (size_t j = 0; j < rel[pos - 1].cols(); ++j)
          aug.at(i, m.cols() + j) = rel[pos - 1].at(i, j);
      }
      indrank[pos] = rank_exact(aug) - relrank[pos - 1];
    }
    std::array<size_t, 4> h{};
    for (size_t pos = 1; pos <= 4; ++pos) {
      const long long qdim = (long long)dim[pos] - (long long)relrank[pos];
      const long long hv =
          qdim - (long long)indrank[pos] - (long long)indrank[pos + 1];
      if (hv < 0)
        throw MfkError("internal_error",
                       "slice homology came out negative; the induced maps "
                       "do not compose to zero");
      h[pos - 1] = size_t(hv);
    }
    return h;
  }

  /// Socle degree of the derivative algebra of the potential: homology is a
  /// module over it, so this bounds how far support can trail.
  long socle_span() const {
    long s = 0;
    for (long wi : w_) s += std::max(period_ - 2 * wi, long(0));
    return s;
  }

  long period() const { return period_; }

 private:
  struct Layout {
    std::vector<size_t> offset;  ///< per (copy j, ambient generator i)
    std::vector<long> wdeg;      ///< monomial degree of each (j, i) block
    size_t dim = 0;
  };

  std::vector<long> sigma(size_t pos) const {
    const std::vector<long>& base = (pos % 2 == 0) ? sigma0_ : sigma1_;
    const long lift = long(pos / 2) * period_;
    std::vector<long> s;
    for (long g : base) s.push_back(g + lift);
    return s;
  }

  const std::vector<Mono>& monos(long e) {
    auto it = monos_.find(e);
    if (it == monos_.end())
      it = monos_.emplace(e, enumerate_monomials(w_, e)).first;
    return it->second;
  }

  const std::map<Mono, size_t, GrlexDesc>& mono_index(long e) {
    auto it = index_.find(e);
    if (it == index_.end()) {
      std::map<Mono, size_t, GrlexDesc> ix;
      const std::vector<Mono>& ms = monos(e);
      for (size_t k = 0; k < ms.size(); ++k) ix.emplace(ms[k], k);
      it = index_.emplace(e, std::move(ix)).first;
    }
    return it->second;
  }

  Layout layout(size_t pos, long d) {
    const std::vector<long> s = sigma(pos);
    Layout lay;
    lay.offset.resize(s.size() * tau_.size());
    lay.wdeg.resize(s.size() * tau_.size());
    size_t off = 0;
    for (size_t j = 0; j < s.size(); ++j)
      for (size_t i = 0; i < tau_.size(); ++i) {
        const long e = d - s[j] - tau_[i];
        lay.offset[j * tau_.size() + i] = off;
        lay.wdeg[j * tau_.size() + i] = e;
        off += monos(e).size();
      }
    lay.dim = off;
    return lay;
  }

  /// Columns spanning the presentation submodule of N^{m_pos} in degree d:
  /// every monomial multiple of every presentation column in every copy.
  DenseMatrix<K> relation_matrix(size_t pos, long d, const Layout& lay) {
    const std::vector<long> s = sigma(pos);
    std::vector<std::vector<K>> cols;
    for (size_t j = 0; j < s.size(); ++j)
      for (size_t c = 0; c < rho_.size(); ++c)
        for (const Mono& m : monos(d - s[j] - rho_[c])) {
          std::vector<K> col(lay.dim, scalar_traits<K>::zero());
          for (size_t i = 0; i < tau_.size(); ++i)
            scatter(np_.d1.at(i, c), m, lay, j, i, col);
          cols.push_back(std::move(col));
        }
    return pack(cols, lay.dim);
  }

  /// Matrix of the differential into position pos - 1 on ambient slices.
  DenseMatrix<K> map_matrix(size_t pos, long d, const Layout& src,
                            const Layout& dst) {
    const DenseMatrix<Poly<K>>& g = (pos % 2 == 1) ? p_.d1 : p_.d0;
    const std::vector<long> s = sigma(pos);
    std::vector<std::vector<K>> cols;
    cols.reserve(src.dim);
    for (size_t j = 0; j < s.size(); ++j)
      for (size_t i = 0; i < tau_.size(); ++i)
        for (const Mono& m : monos(src.wdeg[j * tau_.size() + i])) {
          std::vector<K> col(dst.dim, scalar_traits<K>::zero());
          for (size_t r = 0; r < g.rows(); ++r)
            scatter(g.at(r, j), m, dst, r, i, col);
          cols.push_back(std::move(col));
        }
    return pack(cols, dst.dim);
  }

  /// Adds poly * m, placed in block (copy j, ambient generator i) of the
  /// layout, into the column vector.
  void scatter(const Poly<K>& poly, const Mono& m, const Layout& lay, size_t j,
               size_t i, std::vector<K>& col) {
    if (poly.terms().empty()) return;
    const size_t block = j * tau_.size() + i;
    const long e = lay.wdeg[block];
    const auto& ix = mono_index(e);
    for (const auto& [q, coef] : poly.terms()) {
      const Mono prod = mono_mul(m, q);
      auto it = ix.find(prod);
      if (it == ix.end())
        throw MfkError("internal_error",
                       "slice image fell outside its expected degree");
      col[lay.offset[block] + it->second] += coef;
    }
  }

  static DenseMatrix<K> pack(const std::vector<std::vector<K>>& cols,
                             size_t dim) {
    DenseMatrix<K> m(dim, cols.size(), scalar_traits<K>::zero());
    for (size_t c = 0; c < cols.size(); ++c)
      for (size_t r = 0; r < dim; ++r) m.at(r, c) = cols[c][r];
    return m;
  }

  const MatrixFactorization<K>& p_;
  const MatrixFactorization<K>& np_;
  std::vector<long> w_;
  long period_;
  std::vector<long> sigma0_, sigma1_, tau_, rho_;
  std::map<long, std::vector<Mono>> monos_;
  std::map<long, std::map<Mono, size_t, GrlexDesc>> index_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// The pairing
// ---------------------------------------------------------------------------

/// Computes the pairing of p against np: scans total degrees from the floor
/// of the complex upward, recording homology dimensions of the four leading
/// torsion positions, until a window of (socle span + period + 1) empty
/// degrees certifies the support has closed.  The report is valid only when
/// the scanned lengths repeat two-periodically, which also certifies that
/// the window did not clip a period-shifted copy.
template <class K>
ThetaReport theta(const MatrixFactorization<K>& p,
                  const MatrixFactorization<K>& np,
                  const ThetaOptions& opts = {}) {
  ValidationReport vp = validate(p);
  if (!vp.valid) throw MfkError("invalid_factorization", vp.message);
  ValidationReport vn = validate(np);
  if (!vn.valid) throw MfkError("invalid_factorization", vn.message);
  if (p.vars != np.vars || !(p.f == np.f))
    throw MfkError("incompatible_pair",
                   "the pairing needs two factorizations of the same "
                   "potential over the same variables");
  if (p.f == p.zero())
    throw MfkError("zero_potential", "the pairing needs a nonzero potential");
  if (!p.grading || !np.grading)
    throw MfkError("grading_required", "the pairing needs graded inputs");
  if (!(p.grading->ws == np.grading->ws))
    throw MfkError("incompatible_pair",
                   "the pairing needs a common weight system");

  MilnorReport mu = milnor_number(p.f, p.grading->ws);
  if (!mu.isolated)
    throw MfkError("not_isolated",
                   "the pairing needs an isolated singularity");

  detail::ThetaEngine<K> engine(p, np);
  ThetaReport rep;

  const std::optional<long> lo = engine.scan_floor();
  if (!lo) {  // one side has no generators at all: everything vanishes
    rep.periodic_1_3 = rep.periodic_2_4 = rep.valid = true;
    return rep;
  }

  const long window = engine.socle_span() + engine.period() + 1;
  long long totals[4] = {0, 0, 0, 0};
  long zeros_run = 0;
  long d = *lo;
  long scanned = 0;
  rep.scan_min = *lo;
  for (;; ++d, ++scanned) {
    if (scanned >= opts.max_degrees)
      throw MfkError("window_exceeded",
                     "degree window cap exceeded before the torsion support "
                     "closed");
    const std::array<size_t, 4> h = engine.slice(d);
    const bool any = h[0] || h[1] || h[2] || h[3];
    if (any) {
      rep.slices.push_back({d, h[0], h[1], h[2], h[3]});
      for (int k = 0; k < 4; ++k) totals[k] += (long long)h[k];
      zeros_run = 0;
    } else if (++zeros_run >= window) {
      break;
    }
  }
  rep.scan_max = d;
  rep.tor1 = totals[0];
  rep.tor2 = totals[1];
  rep.theta = rep.tor2 - rep.tor1;
  rep.periodic_1_3 = totals[2] == totals[0];
  rep.periodic_2_4 = totals[3] == totals[1];
  rep.valid = rep.periodic_1_3 && rep.periodic_2_4;
  return rep;
}

// ---------------------------------------------------------------------------
// Bilinearity checks
// ---------------------------------------------------------------------------

struct BilinearityReport {
  long long theta_first = 0;   ///< pairing of the first summand against n
  long long theta_second = 0;  ///< pairing of the second summand against n
  long long theta_sum = 0;     ///< pairing of the direct sum against n
  long long theta_shift = 0;   ///< pairing of the shifted first summand
  long long theta_cone = 0;    ///< pairing of the cone against n
  long long theta_cone_source = 0, theta_cone_target = 0;
  bool additive = false;
  bool shift_antisymmetric = false;
  bool cone_consistent = false;
  bool passed = false;
};

/// Verifies that the pairing against n is additive on direct sums, flips
/// sign under shift, and sends a mapping cone to the difference of its
/// endpoints.  The cone morphism defaults to the zero morphism p -> q; a
/// supplied cycle may connect any two factorizations of the same potential.
template <class K>
BilinearityReport theta_bilinearity_check(
    const MatrixFactorization<K>& p, const MatrixFactorization<K>& q,
    const MatrixFactorization<K>& n,
    std::type_identity_t<std::optional<MFMorphism<K>>> alpha = std::nullopt,
    const ThetaOptions& opts = {}) {
  if (!alpha) alpha = zero_morphism(p, q);

  BilinearityReport rep;
  ThetaReport tp = theta(p, n, opts);
  ThetaReport tq = theta(q, n, opts);
  ThetaReport tsum = theta(direct_sum(p, q), n, opts);
  ThetaReport tshift = theta(shift(p), n, opts);
  ThetaReport tsrc = theta(alpha->source, n, opts);
  ThetaReport ttgt = theta(alpha->target, n, opts);
  ThetaReport tcone = theta(cone(*alpha), n, opts);

  rep.theta_first = tp.theta;
  rep.theta_second = tq.theta;
  rep.theta_sum = tsum.theta;
  rep.theta_shift = tshift.theta;
  rep.theta_cone = tcone.theta;
  rep.theta_cone_source = tsrc.theta;
  rep.theta_cone_target = ttgt.theta;

  rep.additive = tsum.theta == tp.theta + tq.theta;
  rep.shift_antisymmetric = tshift.theta == -tp.theta;
  rep.cone_consistent = tcone.theta == ttgt.theta - tsrc.theta;
  rep.passed = rep.additive && rep.shift_antisymmetric && rep.cone_consistent &&
               tp.valid && tq.valid && tsum.valid && tshift.valid &&
               tsrc.valid && ttgt.valid && tcone.valid;
  return rep;
}

}  // namespace mfk
