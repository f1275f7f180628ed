// SPDX-License-Identifier: MIT
#pragma once

/// \file milnor.hpp
/// \brief Milnor number of a quasi-homogeneous polynomial by degreewise
///        exact linear algebra on the Jacobian quotient.

#include <utility>
#include <vector>

#include "mfk/modp.hpp"
#include "mfk/poly.hpp"

namespace mfk {

struct MilnorReport {
  bool isolated = false;
  /// Total dimension of the Jacobian quotient; -1 when not isolated.
  long milnor_number = -1;
  /// Nonzero quotient slice dimensions as (weighted degree, dimension).
  std::vector<std::pair<long, long>> degree_dims;
};

/// Dimension of the degree-s slice of k[x]/(g_1..g_m) for homogeneous g_i.
template <class K>
long jacobian_slice_dim(const std::vector<Poly<K>>& gens,
                        const std::vector<long>& gen_degrees,
                        const std::vector<long>& weights, long s) {
  std::vector<Mono> rows = enumerate_monomials(weights, s);
  if (rows.empty()) return 0;
  std::map<Mono, size_t, GrlexDesc> row_index;
  for (size_t i = 0; i < rows.size(); ++i) row_index.emplace(rows[i], i);
  // Columns: one per (generator, cofactor monomial) pair.
  std::vector<std::pair<size_t, Mono>> cols;
  for (size_t g = 0; g < gens.size(); ++g) {
    long mu_deg = s - gen_degrees[g];
    if (mu_deg < 0) continue;
    for (const Mono& mu : enumerate_monomials(weights, mu_deg))
      cols.emplace_back(g, mu);
  }
  SparseRankExact<K> elim(rows.size(), cols.size());
  for (size_t c = 0; c < cols.size(); ++c) {
    const auto& [g, mu] = cols[c];
    for (const auto& [m, coeff] : gens[g].terms()) {
      Mono prod(m.size());
      for (size_t k = 0; k < m.size(); ++k) prod[k] = m[k] + mu[k];
      elim.add_entry(row_index.at(prod), c, coeff);
    }
  }
  return long(rows.size()) - long(elim.rank());
}

/// Computes the Milnor number of a quasi-homogeneous polynomial by scanning
/// Jacobian quotient slices.  The scan runs to the socle bound
/// sum_i(d - 2 w_i) plus a margin of width max_i w_i; a zero window of that
/// width implies the quotient vanishes in all higher degrees, so a nonzero
/// slice inside the margin certifies a non-isolated singularity.
template <class K>
MilnorReport milnor_number(const Poly<K>& f, const WeightSystem& ws) {
  if (ws.weights.size() != f.nvars())
    throw MfkError("bad_weights", "weight count does not match variables");
  for (long w : ws.weights)
    if (w <= 0) throw MfkError("bad_weights", "weights must be positive");
  if (f.is_zero())
    throw MfkError("zero_potential", "the zero polynomial has no Milnor number");
  if (!is_quasi_homogeneous(f, ws))
    throw MfkError("not_quasi_homogeneous",
                   "polynomial is not quasi-homogeneous for the given weights");

  std::vector<Poly<K>> gens;
  std::vector<long> gen_degrees;
  for (size_t i = 0; i < f.nvars(); ++i) {
    Poly<K> g = f.derivative(i);
    if (g.is_zero()) continue;
    gens.push_back(std::move(g));
    gen_degrees.push_back(ws.degree - ws.weights[i]);
  }

  long max_w = 0, socle = 0;
  for (long w : ws.weights) {
    max_w = std::max(max_w, w);
    socle += ws.degree - 2 * w;
  }
  socle = std::max(socle, 0L);

  MilnorReport rep;
  long total = 0;
  bool beyond_socle_nonzero = false;
  for (long s = 0; s <= socle + max_w; ++s) {
    long q = jacobian_slice_dim(gens, gen_degrees, ws.weights, s);
    if (q > 0) {
      rep.degree_dims.emplace_back(s, q);
      if (s > socle) beyond_socle_nonzero = true;
      total += q;
    }
  }
  rep.isolated = !beyond_socle_nonzero;
  rep.milnor_number = rep.isolated ? total : -1;
  return rep;
}

/// Product formula sum for cross-checks: prod_i (d - w_i) / w_i.
inline Rational milnor_product_formula(const WeightSystem& ws) {
  Rational r(1);
  for (long w : ws.weights) r *= Rational(ws.degree - w, w);
  return r;
}

}  // namespace mfk
