// SPDX-License-Identifier: MIT
//
// Hom-complex layer: graded homology tables with certified ranks,
// engine/config agreement, null-homotopy solving, and homotopy
// equivalence certificates.

#include <array>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "mfk/homotopy.hpp"

using namespace mfk;

namespace {

using RP = Poly<Rational>;
using RMF = MatrixFactorization<Rational>;
using RMor = MFMorphism<Rational>;

RP rp(const std::string& s, const std::vector<std::string>& vars) {
  return parse_poly<Rational>(s, vars);
}

RMF mk(const std::vector<std::string>& vars, const std::string& f,
       const std::vector<std::vector<std::string>>& d1,
       const std::vector<std::vector<std::string>>& d0) {
  RMF p;
  p.vars = vars;
  p.f = rp(f, vars);
  auto build = [&](const std::vector<std::vector<std::string>>& rows) {
    size_t r = rows.size(), c = r ? rows[0].size() : 0;
    DenseMatrix<RP> m(r, c, RP::zero(vars.size()));
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < c; ++j) m.at(i, j) = rp(rows[i][j], vars);
    return m;
  };
  p.d1 = build(d1);
  p.d0 = build(d0);
  return p;
}

/// Rank-one factorization x * x of x^2 with generator degrees -1 and 0.
RMF xq() {
  RMF p = mk({"x"}, "x^2", {{"x"}}, {{"x"}});
  p.grading = MFGrading{{{1}, 2}, {-1}, {0}};
  return p;
}

RMF xy_x() {
  RMF p = mk({"x", "y"}, "x*y", {{"x"}}, {{"y"}});
  p.grading = MFGrading{{{1, 1}, 2}, {0}, {1}};
  return p;
}

RMF xy_y() {
  RMF p = mk({"x", "y"}, "x*y", {{"y"}}, {{"x"}});
  p.grading = MFGrading{{{1, 1}, 2}, {0}, {1}};
  return p;
}

/// Stabilization of the sum of n squares via its Euler decomposition.
KoszulResult<Rational> squares(size_t n) {
  std::vector<std::string> v;
  for (size_t i = 0; i < n; ++i) v.push_back("x" + std::to_string(i + 1));
  RP f = RP::zero(n);
  for (size_t i = 0; i < n; ++i) {
    RP xi = RP::variable(n, i);
    f += xi * xi;
  }
  WeightSystem ws{std::vector<long>(n, 1), 2};
  return koszul_stabilization(v, f, euler_decomposition(f, ws), ws);
}

RMor mor(const RMF& s, const RMF& t, const std::string& a1,
         const std::string& a0) {
  RMor m;
  m.source = s;
  m.target = t;
  m.alpha1 = DenseMatrix<RP>(1, 1, rp(a1, s.vars));
  m.alpha0 = DenseMatrix<RP>(1, 1, rp(a0, s.vars));
  return m;
}

template <class K>
bool witnesses(const MFMorphism<K>& a, const Homotopy<K>& h) {
  const Poly<K> z = a.source.zero();
  return mat_mul(a.target.d0, h.u, z) + mat_mul(h.v, a.source.d1, z) ==
             a.alpha1 &&
         mat_mul(a.target.d1, h.v, z) + mat_mul(h.u, a.source.d0, z) ==
             a.alpha0;
}

/// Re-derives all four contraction identities from an equivalence result.
template <class K>
bool round_trips_contract(const EquivalenceResult<K>& r) {
  if (!r.equivalent || !r.forward || !r.backward || !r.h_source ||
      !r.h_target)
    return false;
  const MatrixFactorization<K>& P = r.forward->source;
  const MatrixFactorization<K>& Q = r.forward->target;
  if (!validate(*r.forward).valid || !validate(*r.backward).valid)
    return false;
  const Poly<K> z = P.zero();
  auto eye = [&](size_t k) {
    return DenseMatrix<Poly<K>>::identity(k, z, P.one());
  };
  const MFMorphism<K>& f = *r.forward;
  const MFMorphism<K>& b = *r.backward;
  const Homotopy<K>& hs = *r.h_source;
  const Homotopy<K>& ht = *r.h_target;
  return mat_mul(P.d0, hs.u, z) + mat_mul(hs.v, P.d1, z) ==
             eye(P.rank1()) - mat_mul(b.alpha1, f.alpha1, z) &&
         mat_mul(P.d1, hs.v, z) + mat_mul(hs.u, P.d0, z) ==
             eye(P.rank0()) - mat_mul(b.alpha0, f.alpha0, z) &&
         mat_mul(Q.d0, ht.u, z) + mat_mul(ht.v, Q.d1, z) ==
             eye(Q.rank1()) - mat_mul(f.alpha1, b.alpha1, z) &&
         mat_mul(Q.d1, ht.v, z) + mat_mul(ht.u, Q.d0, z) ==
             eye(Q.rank0()) - mat_mul(f.alpha0, b.alpha0, z);
}

using TableRow = std::array<long, 7>;

std::vector<TableRow> table(const HomologyResult& r) {
  std::vector<TableRow> t;
  for (const auto& s : r.slices)
    t.push_back({s.t, long(s.dim_even), long(s.dim_odd), long(s.rank_even),
                 long(s.rank_odd), long(s.h0), long(s.h1)});
  return t;
}

}  // namespace

TEST_CASE("endomorphism homology of the rank-one square factorization") {
  RMF p = xq();
  HomologyResult r = hom_homology_dims(p, p);
  CHECK(r.complete);
  CHECK(r.margin == 1);
  CHECK(r.h0_total == 1);
  CHECK(r.h1_total == 1);
  REQUIRE(r.slices.size() == 3);
  CHECK(table(r) == std::vector<TableRow>{{-1, 0, 2, 0, 1, 0, 1},
                                          {0, 2, 2, 1, 1, 1, 0},
                                          {1, 2, 2, 1, 1, 0, 0}});
}

TEST_CASE("hom homology between the two rank-one xy factorizations") {
  HomologyResult r = hom_homology_dims(xy_x(), xy_y());
  CHECK(r.complete);
  CHECK(r.h0_total == 0);
  CHECK(r.h1_total == 1);
  REQUIRE(!r.slices.empty());
  CHECK(r.slices.front().t == -1);
  CHECK(r.slices.front().h1 == 1);

  HomologyResult rev = hom_homology_dims(xy_y(), xy_x());
  CHECK(rev.h0_total == 0);
  CHECK(rev.h1_total == 1);

  HomologyResult self = hom_homology_dims(xy_x(), xy_x());
  CHECK(self.h0_total == 1);
  CHECK(self.h1_total == 0);
}

TEST_CASE("stabilized sums of squares have halved endomorphism homology") {
  for (size_t n = 1; n <= 4; ++n) {
    DYNAMIC_SECTION("n = " << n) {
      auto kz = squares(n);
      HomOptions o;
      o.symmetries = kz.symmetries;
      HomologyResult r = hom_homology_dims(kz.mf, kz.mf, o);
      const size_t expect = size_t(1) << (n - 1);
      CHECK(r.complete);
      CHECK(r.h0_total == expect);
      CHECK(r.h1_total == expect);
      for (const auto& row : r.slices) {
        CHECK(row.h0 == (row.t == 0 ? expect : 0));
        CHECK(row.h1 == (row.t == -1 ? expect : 0));
      }
    }
  }
}

TEST_CASE("engine configurations agree on homology tables") {
  auto kz = squares(3);
  std::vector<HomOptions> configs;
  {
    HomOptions o;
    configs.push_back(o);  // sectors + modular ladder
    o.use_mod_p = false;
    configs.push_back(o);  // sectors + exact only
    o.use_sectors = false;
    configs.push_back(o);  // one sector, exact only
    o.use_mod_p = true;
    configs.push_back(o);  // one sector, modular ladder
    HomOptions s;
    s.symmetries = kz.symmetries;
    configs.push_back(s);  // sectors + transport
  }
  std::vector<std::vector<TableRow>> tables;
  for (const auto& o : configs)
    tables.push_back(table(hom_homology_dims(kz.mf, kz.mf, o)));
  for (size_t i = 1; i < tables.size(); ++i) CHECK(tables[i] == tables[0]);

  // The mixed pair exercises distinct source/target labelings.
  std::vector<std::vector<TableRow>> pair_tables;
  for (const auto& o : configs) {
    if (!o.symmetries.empty()) continue;
    pair_tables.push_back(table(hom_homology_dims(xy_x(), xy_y(), o)));
  }
  for (size_t i = 1; i < pair_tables.size(); ++i)
    CHECK(pair_tables[i] == pair_tables[0]);
}

TEST_CASE("symmetry transport matches direct elimination") {
  auto kz = squares(3);
  REQUIRE(kz.symmetries.size() == 2);
  HomOptions with_sym;
  with_sym.symmetries = kz.symmetries;
  HomologyResult a = hom_homology_dims(kz.mf, kz.mf, with_sym);
  HomologyResult b = hom_homology_dims(kz.mf, kz.mf);
  CHECK(table(a) == table(b));
  CHECK(a.engine_summary.find("transported=0") == std::string::npos);
  CHECK(b.engine_summary.find("transported=0") != std::string::npos);
}

TEST_CASE("slice differentials square to zero") {
  auto kz = squares(2);
  detail::HomContext<Rational> ctx(kz.mf, kz.mf, /*use_sectors=*/true);
  const long d = ctx.degree();
  for (long t = -2; t <= 2; ++t) {
    const auto& even_t = ctx.even_basis(t);
    const auto& odd_t = ctx.odd_basis(t);
    const auto& even_next = ctx.even_basis(t + d);
    const auto& odd_next = ctx.odd_basis(t + d);
    DenseMatrix<Rational> a = ctx.dense_arrow(even_t, odd_t);
    DenseMatrix<Rational> b = ctx.dense_arrow(odd_t, even_next);
    DenseMatrix<Rational> c = ctx.dense_arrow(even_next, odd_next);
    CHECK(mat_mul(b, a, Rational(0)).all_zero());
    CHECK(mat_mul(c, b, Rational(0)).all_zero());
  }

  RMF p = xy_x(), q = xy_y();
  detail::HomContext<Rational> ctx2(p, q, /*use_sectors=*/true);
  for (long t = -1; t <= 1; ++t) {
    DenseMatrix<Rational> a =
        ctx2.dense_arrow(ctx2.even_basis(t), ctx2.odd_basis(t));
    DenseMatrix<Rational> b =
        ctx2.dense_arrow(ctx2.odd_basis(t), ctx2.even_basis(t + 2));
    CHECK(mat_mul(b, a, Rational(0)).all_zero());
  }
}

TEST_CASE("exponent lattice canonical forms") {
  detail::ExponentLattice lat(2);
  CHECK(lat.add({Integer(0), Integer(2)}));
  CHECK(lat.add({Integer(1), Integer(1)}));
  CHECK(!lat.add({Integer(1), Integer(3)}));  // (1,1) + (0,2): no growth
  CHECK(lat.contains({Integer(2), Integer(0)}));
  for (const auto& row : lat.basis()) {
    size_t pc = 0;
    while (pc < row.size() && row[pc] == 0) ++pc;
    REQUIRE(pc < row.size());
    CHECK(row[pc] > 0);  // pivots normalized positive
  }
  std::vector<Integer> zero2 = {Integer(0), Integer(0)};
  CHECK(lat.canon({Integer(1), Integer(3)}) == zero2);

  // Euclidean exchanges must not leave a negative pivot behind.
  detail::ExponentLattice gcd1(1);
  gcd1.add({Integer(-6)});
  gcd1.add({Integer(4)});
  REQUIRE(gcd1.basis().size() == 1);
  CHECK(gcd1.basis()[0][0] == 2);
  CHECK(gcd1.canon({Integer(-3)})[0] == 1);
}

TEST_CASE("homology scan caps mark incomplete results") {
  RMF p = xq();
  HomOptions o;
  o.max_slices = 1;
  CHECK(!hom_homology_dims(p, p, o).complete);
  HomOptions o2;
  o2.max_slice_dim = 1;
  HomologyResult r = hom_homology_dims(p, p, o2);
  CHECK(!r.complete);
}

TEST_CASE("homology rejects mismatched inputs") {
  RMF other = mk({"x", "y"}, "x*x", {{"x"}}, {{"x"}});
  other.grading = MFGrading{{{1, 1}, 2}, {0}, {1}};
  try {
    hom_homology_dims(xy_x(), other);
    FAIL("expected incompatible_pair");
  } catch (const MfkError& e) {
    CHECK(e.code() == "incompatible_pair");
  }
  RMF ungraded = xy_x();
  ungraded.grading.reset();
  try {
    hom_homology_dims(ungraded, ungraded);
    FAIL("expected grading_required");
  } catch (const MfkError& e) {
    CHECK(e.code() == "grading_required");
  }
}

TEST_CASE("morphism internal degree") {
  CHECK(morphism_internal_degree(identity_morphism(xy_x())) == 0);
  CHECK(morphism_internal_degree(zero_morphism(xy_x(), xy_y())) == 0);
  RMor incl = mor(xy_x(), xy_y(), "x", "y");
  REQUIRE(validate(incl).valid);
  CHECK(morphism_internal_degree(incl) == 1);
  RMor mixed = mor(xy_x(), xy_x(), "x + x^2", "x + x^2");
  REQUIRE(validate(mixed).valid);
  CHECK(!morphism_internal_degree(mixed).has_value());
}

TEST_CASE("null-homotopy solving on graded slices") {
  RMor a = mor(xy_x(), xy_y(), "x", "y");
  REQUIRE(validate(a).valid);
  NullHomotopyOutcome<Rational> out = find_null_homotopy(a);
  REQUIRE(out.found);
  CHECK(out.conclusive);
  REQUIRE(out.homotopy.has_value());
  CHECK(witnesses(a, *out.homotopy));
  // Witness lives in constants: u = [c], v = [1 - c].
  CHECK(out.homotopy->u.at(0, 0) + out.homotopy->v.at(0, 0) ==
        rp("1", {"x", "y"}));

  SECTION("identity is refuted conclusively") {
    NullHomotopyOutcome<Rational> id_out =
        find_null_homotopy(identity_morphism(xy_x()));
    CHECK(!id_out.found);
    CHECK(id_out.conclusive);
  }
  SECTION("zero morphism contracts trivially") {
    NullHomotopyOutcome<Rational> z_out =
        find_null_homotopy(zero_morphism(xy_x(), xy_y()));
    REQUIRE(z_out.found);
    CHECK(z_out.conclusive);
    CHECK(witnesses(zero_morphism(xy_x(), xy_y()), *z_out.homotopy));
  }
}

TEST_CASE("null-homotopy bounded search") {
  RMor a = mor(xy_x(), xy_y(), "x", "y");
  SECTION("explicit bound finds the constant witness") {
    NullHomotopyOptions o;
    o.degree_bound = 0;
    NullHomotopyOutcome<Rational> out = find_null_homotopy(a, o);
    REQUIRE(out.found);
    CHECK(out.conclusive);
    CHECK(witnesses(a, *out.homotopy));
  }
  SECTION("bounded miss is inconclusive") {
    NullHomotopyOptions o;
    o.degree_bound = 2;
    NullHomotopyOutcome<Rational> out =
        find_null_homotopy(identity_morphism(xy_x()), o);
    CHECK(!out.found);
    CHECK(!out.conclusive);
  }
  SECTION("ungraded fallback still verifies") {
    RMor b = a;
    b.source.grading.reset();
    b.target.grading.reset();
    NullHomotopyOutcome<Rational> out = find_null_homotopy(b);
    REQUIRE(out.found);
    CHECK(out.conclusive);
    CHECK(witnesses(b, *out.homotopy));
  }
}

TEST_CASE("homotopy equivalence certificates") {
  RMF p = xy_x();
  WeightSystem ws{{1, 1}, 2};
  RMF t =
      trivial_mf({"x", "y"}, rp("x*y", {"x", "y"}), TrivialKind::f_then_id, ws);
  RMF q = direct_sum(p, t);

  SECTION("padded partner, graded search") {
    EquivalenceResult<Rational> r = find_homotopy_equivalence(p, q);
    REQUIRE(r.equivalent);
    CHECK(r.conclusive);
    CHECK(round_trips_contract(r));
  }
  SECTION("identical factorizations fast path") {
    EquivalenceResult<Rational> r = find_homotopy_equivalence(p, p);
    CHECK(r.equivalent);
    CHECK(r.conclusive);
    CHECK(round_trips_contract(r));
  }
  SECTION("inequivalent rank-one pair") {
    EquivalenceResult<Rational> r = find_homotopy_equivalence(xy_x(), xy_y());
    CHECK(!r.equivalent);
    CHECK(!r.conclusive);
  }
  SECTION("padded partner, ungraded search") {
    RMF p2 = p, q2 = q;
    p2.grading.reset();
    q2.grading.reset();
    EquivOptions eo;
    eo.degree_bound = 0;
    eo.max_candidates = 8;
    EquivalenceResult<Rational> r = find_homotopy_equivalence(p2, q2, eo);
    REQUIRE(r.equivalent);
    CHECK(r.conclusive);
    CHECK(round_trips_contract(r));
  }
  SECTION("incompatible potentials are rejected") {
    RMF other = mk({"x", "y"}, "x*x", {{"x"}}, {{"x"}});
    try {
      find_homotopy_equivalence(xy_x(), other);
      FAIL("expected incompatible_pair");
    } catch (const MfkError& e) {
      CHECK(e.code() == "incompatible_pair");
    }
  }
}

TEST_CASE("gaussian coefficients run the full pipeline") {
  using G = GaussianRational;
  using GP = Poly<G>;
  using GMF = MatrixFactorization<G>;
  GP u = GP::variable(2, 0), v = GP::variable(2, 1);
  GMF m;
  m.vars = {"u", "v"};
  m.f = u * u + v * v;
  m.d1 = DenseMatrix<GP>(1, 1, u + v.scaled(G::unit_i()));
  m.d0 = DenseMatrix<GP>(1, 1, u - v.scaled(G::unit_i()));
  m.grading = MFGrading{{{1, 1}, 2}, {0}, {1}};
  REQUIRE(validate(m).valid);

  HomologyResult r = hom_homology_dims(m, m);
  CHECK(r.complete);
  CHECK(r.h0_total == 1);
  CHECK(r.h1_total == 0);

  HomOptions exact_only;
  exact_only.use_mod_p = false;
  exact_only.use_sectors = false;
  CHECK(table(hom_homology_dims(m, m, exact_only)) == table(r));

  GMF conj = m;
  conj.d1 = m.d0;
  conj.d0 = m.d1;
  REQUIRE(validate(conj).valid);
  HomologyResult cross = hom_homology_dims(m, conj);
  CHECK(cross.h0_total == 0);
  CHECK(cross.h1_total == 1);

  EquivalenceResult<G> eq = find_homotopy_equivalence(m, conj);
  CHECK(!eq.equivalent);
  NullHomotopyOutcome<G> nh = find_null_homotopy(identity_morphism(m));
  CHECK(!nh.found);
  CHECK(nh.conclusive);
}
