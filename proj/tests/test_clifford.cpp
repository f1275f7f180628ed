// SPDX-License-Identifier: MIT
//
// Clifford layer: exact algebra arithmetic, the signature classification
// table, graded modules and their validation, the linear-factorization
// functor and its coefficient-extraction inverse, graded tensor products,
// regular-module decomposition into certified irreducibles, and the
// restriction class groups presented by Smith normal forms.

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>
#include <vector>

#include "mfk/clifford.hpp"

using namespace mfk;

namespace {

using GR = GaussianRational;

auto has_code(const std::string& code) {
  return Catch::Matchers::Predicate<MfkError>(
      [code](const MfkError& e) { return e.code() == code; },
      "error code == " + code);
}

template <class K>
DiagonalForm<K> form_of(const std::vector<long>& cs) {
  DiagonalForm<K> q;
  for (long c : cs) q.coefficients.push_back(scalar_traits<K>::from_int(c));
  return q;
}

GR gi(long re, long im) { return GR(Rational(re), Rational(im)); }

template <class K>
DenseMatrix<K> kmat(const std::vector<std::vector<K>>& rows) {
  size_t r = rows.size(), c = r ? rows[0].size() : 0;
  DenseMatrix<K> m(r, c, scalar_traits<K>::zero());
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) m.at(i, j) = rows[i][j];
  return m;
}

/// Change of basis by random elementary operations on both parities; the
/// result is an isomorphic module, usually with dense (non-signed) matrices.
template <class K>
void conjugate_random(GradedCliffordModule<K>& m, std::mt19937& rng) {
  const K z = scalar_traits<K>::zero();
  auto apply = [&](bool parity0, const DenseMatrix<K>& e, const DenseMatrix<K>& einv) {
    for (size_t i = 0; i < m.n(); ++i) {
      if (parity0) {
        m.up[i] = mat_mul(e, m.up[i], z);
        m.down[i] = mat_mul(m.down[i], einv, z);
      } else {
        m.up[i] = mat_mul(m.up[i], einv, z);
        m.down[i] = mat_mul(e, m.down[i], z);
      }
    }
  };
  for (int parity = 0; parity < 2; ++parity) {
    const size_t dim = parity == 0 ? m.m0 : m.m1;
    if (dim < 2) continue;
    const K one = scalar_traits<K>::one();
    for (size_t step = 0; step < 2 * dim; ++step) {
      size_t r = rng() % dim, s = rng() % dim;
      if (r == s) continue;
      K c = scalar_traits<K>::from_int(long(rng() % 2) * 2 - 1);
      DenseMatrix<K> e = DenseMatrix<K>::identity(dim, z, one);
      DenseMatrix<K> einv = e;
      e.at(r, s) = c;
      einv.at(r, s) = -c;
      apply(parity == 0, e, einv);
    }
  }
}

template <class K>
CliffordElement<K> gen(size_t n, size_t i) {
  return CliffordElement<K>::generator(n, i);
}

/// Adds two classes coordinatewise (same presentation).
AbsClass class_sum(const AbsClass& a, const AbsClass& b) {
  REQUIRE(a.torsion_orders == b.torsion_orders);
  REQUIRE(a.free_rank == b.free_rank);
  AbsClass r = a;
  for (size_t i = 0; i < r.torsion_coords.size(); ++i) {
    r.torsion_coords[i] = (r.torsion_coords[i] + b.torsion_coords[i]) % r.torsion_orders[i];
  }
  for (size_t i = 0; i < r.free_coords.size(); ++i) r.free_coords[i] += b.free_coords[i];
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Algebra element arithmetic
// ---------------------------------------------------------------------------

TEST_CASE("algebra multiplication satisfies the defining relations") {
  SECTION("a generator squares to its form coefficient") {
    auto q = form_of<Rational>({-1});
    auto prod = clifford_multiply(gen<Rational>(1, 0), gen<Rational>(1, 0), q);
    CHECK(prod == CliffordElement<Rational>::scalar(1, Rational(-1)));
  }
  SECTION("one absorption without transposition sign") {
    auto q = form_of<Rational>({1, -1, 1});
    auto e12 = CliffordElement<Rational>::basis(3, 0b011, Rational(1));
    auto e23 = CliffordElement<Rational>::basis(3, 0b110, Rational(1));
    auto expect = CliffordElement<Rational>::basis(3, 0b101, Rational(-1));
    CHECK(clifford_multiply(e12, e23, q) == expect);
  }
  SECTION("a vector squares to its form value") {
    auto q = form_of<Rational>({-1, -1});
    auto v = gen<Rational>(2, 0) + gen<Rational>(2, 1);
    CHECK(clifford_multiply(v, v, q) == CliffordElement<Rational>::scalar(2, Rational(-2)));
  }
  SECTION("generators anti-commute") {
    auto q = form_of<Rational>({-1, 1, -1});
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = 0; j < 3; ++j) {
        if (i == j) continue;
        auto lhs = clifford_multiply(gen<Rational>(3, i), gen<Rational>(3, j), q);
        auto rhs = clifford_multiply(gen<Rational>(3, j), gen<Rational>(3, i), q);
        CHECK(lhs == -rhs);
      }
  }
  SECTION("associativity on seeded random triples") {
    auto q = form_of<Rational>({-1, 1, -1, -1});
    std::mt19937 rng(20260818);
    for (int trial = 0; trial < 40; ++trial) {
      auto rnd = [&] {
        CliffordElement<Rational> e = CliffordElement<Rational>::zero(4);
        for (int t = 0; t < 3; ++t)
          e.add_term(rng() % 16, Rational(long(rng() % 7) - 3));
        return e;
      };
      auto x = rnd(), y = rnd(), w = rnd();
      auto left = clifford_multiply(clifford_multiply(x, y, q), w, q);
      auto right = clifford_multiply(x, clifford_multiply(y, w, q), q);
      CHECK(left == right);
    }
  }
  SECTION("gaussian coefficients multiply exactly") {
    auto q = form_of<GR>({1, 1});
    auto x = GR::unit_i() * gen<GR>(2, 0);
    auto prod = clifford_multiply(x, x, q);  // (i e1)^2 = i^2 * 1 = -1
    CHECK(prod == CliffordElement<GR>::scalar(2, gi(-1, 0)));
  }
  SECTION("rank mismatch is rejected") {
    auto q = form_of<Rational>({-1});
    CHECK_THROWS_MATCHES(clifford_multiply(gen<Rational>(2, 0), gen<Rational>(2, 1),
                                           q),
                         MfkError, has_code("dimension_mismatch"));
  }
  SECTION("zero form coefficients are rejected") {
    DiagonalForm<Rational> q = form_of<Rational>({0});
    CHECK_THROWS_MATCHES(clifford_multiply(gen<Rational>(1, 0), gen<Rational>(1, 0), q),
                         MfkError, has_code("bad_form"));
  }
}

// ---------------------------------------------------------------------------
// Classification table
// ---------------------------------------------------------------------------

TEST_CASE("classification of unit diagonal forms") {
  auto neg = [](size_t n) { return negative_definite_form<Rational>(n); };
  auto pos = [](size_t n) {
    DiagonalForm<Rational> q;
    q.coefficients.assign(n, Rational(1));
    return q;
  };

  CHECK(classify(neg(1)) == CliffordClassification{CliffordBase::C, 1, false});
  CHECK(classify(neg(2)) == CliffordClassification{CliffordBase::H, 1, false});
  CHECK(classify(neg(8)) == CliffordClassification{CliffordBase::R, 16, false});
  CHECK(classify(neg(8)).text() == "Mat_16(R)");
  CHECK(classify(neg(2)).text() == "H");

  CHECK(classify(pos(1)) == CliffordClassification{CliffordBase::R, 1, true});
  CHECK(classify(pos(1)).text() == "R + R");
  CHECK(classify(pos(2)) == CliffordClassification{CliffordBase::R, 2, false});
  CHECK(classify(pos(3)) == CliffordClassification{CliffordBase::C, 2, false});
  CHECK(classify(form_of<Rational>({1, -1})) ==
        CliffordClassification{CliffordBase::R, 2, false});

  SECTION("dimensions account for the whole algebra at every signature") {
    for (size_t n = 0; n <= 8; ++n)
      for (size_t p = 0; p <= n; ++p) {
        DiagonalForm<Rational> q;
        for (size_t i = 0; i < n; ++i)
          q.coefficients.push_back(i < p ? Rational(1) : Rational(-1));
        CliffordClassification c = classify(q);
        unsigned long long df = c.base == CliffordBase::R ? 1
                                : c.base == CliffordBase::C ? 2
                                                            : 4;
        unsigned long long dim =
            c.matrix_size * c.matrix_size * df * (c.twofold ? 2 : 1);
        CHECK(dim == (1ULL << n));
      }
  }
  SECTION("non-unit coefficients are rejected") {
    CHECK_THROWS_MATCHES(classify(form_of<Rational>({2})), MfkError, has_code("bad_form"));
  }
}

// ---------------------------------------------------------------------------
// Graded modules
// ---------------------------------------------------------------------------

TEST_CASE("module validation checks every relation and names offenders") {
  auto q2 = negative_definite_form<Rational>(2);
  GradedCliffordModule<Rational> free2 = free_rank_one(q2);
  REQUIRE(free2.m0 == 2);
  REQUIRE(free2.m1 == 2);
  CHECK_NOTHROW(validate(free2, q2));

  SECTION("broken square relation reports the generator") {
    GradedCliffordModule<Rational> bad = free2;
    bad.up[0].at(0, 0) = bad.up[0].at(0, 0) + Rational(1);
    CHECK_THROWS_MATCHES(validate(bad, q2), MfkError, has_code("relation_violation"));
  }
  SECTION("broken anti-commutation names the pair") {
    GradedCliffordModule<Rational> bad = free2;
    bad.up[1] = bad.up[0];
    bad.down[1] = bad.down[0];
    try {
      validate(bad, q2);
      FAIL("expected a relation violation");
    } catch (const MfkError& e) {
      CHECK(e.code() == "relation_violation");
      CHECK(std::string(e.what()).find("1 and 2") != std::string::npos);
    }
  }
  SECTION("shape mismatches are reported before relations") {
    GradedCliffordModule<Rational> bad = free2;
    bad.up[0] = DenseMatrix<Rational>(1, 2, Rational(0));
    CHECK_THROWS_MATCHES(validate(bad, q2), MfkError, has_code("dimension_mismatch"));
  }
  SECTION("dense (non-signed) modules validate through the general path") {
    GradedCliffordModule<Rational> m = free2;
    std::mt19937 rng(7);
    conjugate_random(m, rng);
    CHECK_NOTHROW(validate(m, q2));
  }
  SECTION("direct sum and restriction preserve validity") {
    GradedCliffordModule<Rational> s = direct_sum(free2, free2);
    CHECK(s.m0 == 4);
    CHECK(s.m1 == 4);
    CHECK_NOTHROW(validate(s, q2));
    GradedCliffordModule<Rational> r = restrict_module(free2);
    CHECK_NOTHROW(validate(r, negative_definite_form<Rational>(1)));
  }
  SECTION("generator scaling rescales the form") {
    auto [scaled, qq] = scale_generators(free2, q2, {Rational(2), Rational(3)});
    CHECK(qq.coefficients == std::vector<Rational>{Rational(-4), Rational(-9)});
    CHECK_NOTHROW(validate(scaled, qq));
    CHECK_THROWS_MATCHES(scale_generators(free2, q2, {Rational(0), Rational(1)}),
                         MfkError, has_code("bad_form"));
  }
}

// ---------------------------------------------------------------------------
// Factorizations from modules
// ---------------------------------------------------------------------------

TEST_CASE("module-to-factorization assembly") {
  SECTION("rank-one module of x^2 gives ([x],[x]) with the standard grading") {
    auto q = form_of<Rational>({1});
    GradedCliffordModule<Rational> m;
    m.m1 = m.m0 = 1;
    m.up = {kmat<Rational>({{Rational(1)}})};
    m.down = {kmat<Rational>({{Rational(1)}})};
    MatrixFactorization<Rational> mf = beh_theta(m, q);
    REQUIRE(mf.vars == std::vector<std::string>{"x1"});
    CHECK(print_poly(mf.d1.at(0, 0), mf.vars) == "x1");
    CHECK(print_poly(mf.d0.at(0, 0), mf.vars) == "x1");
    CHECK(mf.f == parse_poly<Rational>("x1^2", mf.vars));
    REQUIRE(mf.grading.has_value());
    CHECK(mf.grading->ws.weights == std::vector<long>{1});
    CHECK(mf.grading->ws.degree == 2);
    CHECK(mf.grading->deg1 == std::vector<long>{-1});
    CHECK(mf.grading->deg0 == std::vector<long>{0});
    CHECK(validate(mf).valid);
  }
  SECTION("gaussian two-variable module assembles to ([u+iv],[u-iv])") {
    auto q = form_of<GR>({1, 1});
    GradedCliffordModule<GR> m;
    m.m1 = m.m0 = 1;
    m.up = {kmat<GR>({{gi(1, 0)}}), kmat<GR>({{gi(0, 1)}})};
    m.down = {kmat<GR>({{gi(1, 0)}}), kmat<GR>({{gi(0, -1)}})};
    MatrixFactorization<GR> mf = beh_theta(m, q, {"u", "v"});
    CHECK(mf.d1.at(0, 0) == parse_poly<GR>("u + i*v", {"u", "v"}));
    CHECK(mf.d0.at(0, 0) == parse_poly<GR>("u - i*v", {"u", "v"}));
    CHECK(validate(mf).valid);
  }
  SECTION("the eight-generator column module yields a half-rank-16 factorization") {
    GradedCliffordModule<Rational> m = column_module_X8();
    MatrixFactorization<Rational> mf = beh_theta(m, negative_definite_form<Rational>(8));
    CHECK(mf.rank1() == 8);
    CHECK(mf.rank0() == 8);
    CHECK(validate(mf).valid);
    CHECK(mf.f == parse_poly<Rational>(
                      "-x1^2 - x2^2 - x3^2 - x4^2 - x5^2 - x6^2 - x7^2 - x8^2", mf.vars));
  }
  SECTION("relation violations in the module are rejected") {
    auto q = form_of<Rational>({1});
    GradedCliffordModule<Rational> m;
    m.m1 = m.m0 = 1;
    m.up = {kmat<Rational>({{Rational(1)}})};
    m.down = {kmat<Rational>({{Rational(2)}})};
    CHECK_THROWS_MATCHES(beh_theta(m, q), MfkError, has_code("relation_violation"));
  }
  SECTION("the free module's factorization equals the exterior-algebra stabilization") {
    for (size_t n : {size_t(1), size_t(2)}) {
      DiagonalForm<Rational> q;
      q.coefficients.assign(n, Rational(1));
      std::vector<std::string> vars;
      std::vector<Poly<Rational>> gs;
      Poly<Rational> f = Poly<Rational>::zero(n);
      for (size_t i = 0; i < n; ++i) vars.push_back("x" + std::to_string(i + 1));
      for (size_t i = 0; i < n; ++i) {
        gs.push_back(Poly<Rational>::variable(n, i));
        f += gs.back() * gs.back();
      }
      WeightSystem ws;
      ws.weights.assign(n, 1);
      ws.degree = 2;
      MatrixFactorization<Rational> kos = koszul_stabilization(vars, f, gs, ws).mf;
      MatrixFactorization<Rational> theta = beh_theta(free_rank_one(q), q, vars);
      CHECK(theta.d1 == kos.d1);
      CHECK(theta.d0 == kos.d0);
      CHECK(theta.f == kos.f);
      REQUIRE(kos.grading.has_value());
      REQUIRE(theta.grading.has_value());
      CHECK(*theta.grading == *kos.grading);
    }
  }
}

// ---------------------------------------------------------------------------
// Module recognition from factorizations
// ---------------------------------------------------------------------------

TEST_CASE("factorization-to-module extraction") {
  SECTION("([u+iv],[u-iv]) recognizes the two-variable gaussian module") {
    auto q = form_of<GR>({1, 1});
    MatrixFactorization<GR> p;
    p.vars = {"u", "v"};
    p.f = parse_poly<GR>("u^2 + v^2", p.vars);
    p.d1 = DenseMatrix<Poly<GR>>(1, 1, parse_poly<GR>("u + i*v", p.vars));
    p.d0 = DenseMatrix<Poly<GR>>(1, 1, parse_poly<GR>("u - i*v", p.vars));
    GradedCliffordModule<GR> m = mf_to_clifford_module(p, q);
    CHECK(m.m1 == 1);
    CHECK(m.m0 == 1);
    CHECK(m.up[0].at(0, 0) == gi(1, 0));
    CHECK(m.up[1].at(0, 0) == gi(0, 1));
    CHECK(m.down[0].at(0, 0) == gi(1, 0));
    CHECK(m.down[1].at(0, 0) == gi(0, -1));
  }
  SECTION("extraction inverts assembly on conjugated free modules") {
    std::mt19937 rng(20260818);
    for (int trial = 0; trial < 12; ++trial) {
      size_t n = 1 + trial % 4;
      DiagonalForm<Rational> q;
      for (size_t i = 0; i < n; ++i)
        q.coefficients.push_back(rng() % 2 ? Rational(1) : Rational(-1));
      GradedCliffordModule<Rational> m = free_rank_one(q);
      conjugate_random(m, rng);
      MatrixFactorization<Rational> mf = beh_theta(m, q);
      CHECK(mf_to_clifford_module(mf, q) == m);
    }
    for (int trial = 0; trial < 8; ++trial) {
      size_t n = 1 + trial % 4;
      DiagonalForm<GR> q;
      for (size_t i = 0; i < n; ++i)
        q.coefficients.push_back(rng() % 2 ? gi(1, 0) : gi(-1, 0));
      GradedCliffordModule<GR> m = free_rank_one(q);
      conjugate_random(m, rng);
      MatrixFactorization<GR> mf = beh_theta(m, q);
      CHECK(mf_to_clifford_module(mf, q) == m);
    }
  }
  SECTION("a cubic potential is not the form's polynomial") {
    MatrixFactorization<Rational> p;
    p.vars = {"x"};
    p.f = parse_poly<Rational>("x^3", p.vars);
    p.d1 = DenseMatrix<Poly<Rational>>(1, 1, parse_poly<Rational>("x", p.vars));
    p.d0 = DenseMatrix<Poly<Rational>>(1, 1, parse_poly<Rational>("x^2", p.vars));
    CHECK_THROWS_MATCHES(mf_to_clifford_module(p, form_of<Rational>({1})), MfkError,
                         has_code("f_mismatch"));
  }
  SECTION("nonlinear entries are rejected with their position") {
    MatrixFactorization<Rational> p;
    p.vars = {"x"};
    p.f = parse_poly<Rational>("x^2", p.vars);
    p.d1 = DenseMatrix<Poly<Rational>>(2, 2, Poly<Rational>::zero(1));
    p.d0 = DenseMatrix<Poly<Rational>>(2, 2, Poly<Rational>::zero(1));
    p.d1.at(0, 0) = p.d1.at(1, 1) = parse_poly<Rational>("x", p.vars);
    p.d0.at(0, 0) = p.d0.at(1, 1) = parse_poly<Rational>("x", p.vars);
    p.d1.at(1, 0) = parse_poly<Rational>("x^2", p.vars);
    p.d0.at(1, 0) = parse_poly<Rational>("-x^2", p.vars);
    try {
      mf_to_clifford_module(p, form_of<Rational>({1}));
      FAIL("expected a nonlinear entry rejection");
    } catch (const MfkError& e) {
      CHECK(e.code() == "nonlinear_entry");
      CHECK(std::string(e.what()).find("[2][1]") != std::string::npos);
    }
  }
  SECTION("linear entries violating the relations name the failing pair") {
    MatrixFactorization<Rational> p;
    p.vars = {"x", "y"};
    p.f = parse_poly<Rational>("x^2 + y^2", p.vars);
    p.d1 = DenseMatrix<Poly<Rational>>(1, 1, parse_poly<Rational>("x + y", p.vars));
    p.d0 = DenseMatrix<Poly<Rational>>(1, 1, parse_poly<Rational>("x + y", p.vars));
    try {
      mf_to_clifford_module(p, form_of<Rational>({1, 1}));
      FAIL("expected a relation violation");
    } catch (const MfkError& e) {
      CHECK(e.code() == "relation_violation");
      CHECK(std::string(e.what()).find("1 and 2") != std::string::npos);
    }
  }
}

// ---------------------------------------------------------------------------
// The eight-generator column module
// ---------------------------------------------------------------------------

TEST_CASE("column module construction") {
  GradedCliffordModule<Rational> m = column_module_X8();
  CHECK(m.m1 == 8);
  CHECK(m.m0 == 8);
  CHECK(m.n() == 8);
  CHECK_NOTHROW(validate(m, negative_definite_form<Rational>(8)));
  SECTION("each generator squares to minus the identity") {
    const DenseMatrix<Rational> id8 =
        DenseMatrix<Rational>::identity(8, Rational(0), Rational(1));
    for (size_t i = 0; i < 8; ++i)
      CHECK(mat_mul(m.up[i], m.down[i], Rational(0)) == mat_scaled(id8, Rational(-1)));
  }
  SECTION("the construction is deterministic") { CHECK(column_module_X8() == m); }
}

// ---------------------------------------------------------------------------
// Graded tensor products
// ---------------------------------------------------------------------------

TEST_CASE("graded tensor product") {
  const DiagonalForm<Rational> q0;  // zero-variable form
  GradedCliffordModule<Rational> unit;
  unit.m1 = 0;
  unit.m0 = 1;

  SECTION("the even rank-one module at rank zero is a two-sided unit") {
    auto q2 = negative_definite_form<Rational>(2);
    GradedCliffordModule<Rational> m = free_rank_one(q2);
    GradedTensorResult<Rational> right = graded_tensor(m, q2, unit, q0);
    CHECK(right.module == m);
    CHECK(right.form == q2);
    GradedTensorResult<Rational> left = graded_tensor(unit, q0, m, q2);
    CHECK(left.module == m);
    CHECK(left.form == q2);
  }
  SECTION("factorization of a tensor equals the tensor of factorizations") {
    auto qx = form_of<Rational>({1});
    auto fx = free_rank_one(qx);
    GradedTensorResult<Rational> t = graded_tensor(fx, qx, fx, qx);
    CHECK(t.module.m1 == 2);
    CHECK(t.module.m0 == 2);
    std::vector<std::string> vars{"x", "y"};
    auto mfa = beh_theta(fx, qx, vars, 0);
    auto mfb = beh_theta(fx, qx, vars, 1);
    auto mft = beh_theta(t.module, t.form, vars, 0);
    MatrixFactorization<Rational> moved = apply_basis_map(mft, t.to_tensor);
    MatrixFactorization<Rational> expected = tensor_product(mfa, mfb);
    CHECK(moved.d1 == expected.d1);
    CHECK(moved.d0 == expected.d0);
    CHECK(moved.f == expected.f);
    REQUIRE(moved.grading.has_value());
    REQUIRE(expected.grading.has_value());
    CHECK(*moved.grading == *expected.grading);
  }
  SECTION("compatibility holds on seeded random pairs in both modes") {
    std::mt19937 rng(424242);
    auto check_pair = [&](auto mode_tag) {
      using K = decltype(mode_tag);
      size_t n = 1 + rng() % 2, n2 = 1 + rng() % 2;
      DiagonalForm<K> qa, qb;
      for (size_t i = 0; i < n; ++i)
        qa.coefficients.push_back(scalar_traits<K>::from_int(rng() % 2 ? 1 : -1));
      for (size_t i = 0; i < n2; ++i)
        qb.coefficients.push_back(scalar_traits<K>::from_int(rng() % 2 ? 1 : -1));
      GradedCliffordModule<K> a = free_rank_one(qa);
      GradedCliffordModule<K> b = free_rank_one(qb);
      conjugate_random(a, rng);
      conjugate_random(b, rng);
      GradedTensorResult<K> t = graded_tensor(a, qa, b, qb);
      CHECK(t.module.m1 == a.m1 * b.m0 + a.m0 * b.m1);
      CHECK(t.module.m0 == a.m0 * b.m0 + a.m1 * b.m1);
      std::vector<std::string> vars;
      for (size_t i = 0; i < n + n2; ++i) vars.push_back("t" + std::to_string(i + 1));
      auto mfa = beh_theta(a, qa, vars, 0);
      auto mfb = beh_theta(b, qb, vars, n);
      MatrixFactorization<K> moved = apply_basis_map(beh_theta(t.module, t.form, vars, 0),
                                                     t.to_tensor);
      MatrixFactorization<K> expected = tensor_product(mfa, mfb);
      CHECK(moved.d1 == expected.d1);
      CHECK(moved.d0 == expected.d0);
      CHECK(moved.f == expected.f);
    };
    for (int trial = 0; trial < 5; ++trial) check_pair(Rational());
    for (int trial = 0; trial < 3; ++trial) check_pair(GR());
  }
}

// ---------------------------------------------------------------------------
// Regular decomposition
// ---------------------------------------------------------------------------

TEST_CASE("graded irreducibles of the negative definite algebras") {
  struct Expect {
    size_t classes, dim, end_dim, mult;
  };
  SECTION("rational ladder: class data for ranks one through eight") {
    const std::vector<Expect> table = {
        {1, 1, 1, 1},  // n=1
        {1, 2, 2, 1},  // n=2
        {1, 4, 4, 1},  // n=3
        {2, 4, 4, 1},  // n=4
        {1, 8, 4, 2},  // n=5
        {1, 8, 2, 4},  // n=6
        {1, 8, 1, 8},  // n=7
        {2, 8, 1, 8},  // n=8
    };
    for (size_t n = 1; n <= table.size(); ++n) {
      auto classes = graded_irreducibles<Rational>(n);
      const Expect& e = table[n - 1];
      REQUIRE(classes.size() == e.classes);
      for (const auto& cls : classes) {
        CHECK(cls.module.m0 == e.dim);
        CHECK(cls.module.m1 == e.dim);
        CHECK(cls.end_dim == e.end_dim);
        CHECK(cls.multiplicity == e.mult);
        CHECK_NOTHROW(validate(cls.module, negative_definite_form<Rational>(n)));
      }
    }
  }
  SECTION("gaussian ladder: class data for ranks one through five") {
    const std::vector<Expect> table = {
        {1, 1, 1, 1},  // n=1
        {2, 1, 1, 1},  // n=2
        {1, 2, 1, 2},  // n=3
        {2, 2, 1, 2},  // n=4
        {1, 4, 1, 4},  // n=5
    };
    for (size_t n = 1; n <= table.size(); ++n) {
      auto classes = graded_irreducibles<GR>(n);
      const Expect& e = table[n - 1];
      REQUIRE(classes.size() == e.classes);
      for (const auto& cls : classes) {
        CHECK(cls.module.m0 == e.dim);
        CHECK(cls.module.m1 == e.dim);
        CHECK(cls.end_dim == e.end_dim);
        CHECK(cls.multiplicity == e.mult);
      }
    }
  }
  SECTION("rank zero has the two parity classes") {
    auto classes = graded_irreducibles<Rational>(0);
    REQUIRE(classes.size() == 2);
    CHECK(classes[0].module.m0 == 1);
    CHECK(classes[0].module.m1 == 0);
    CHECK(classes[0].multiplicity == 1);
    CHECK(classes[1].module.m0 == 0);
    CHECK(classes[1].module.m1 == 1);
    CHECK(classes[1].multiplicity == 0);
  }
  SECTION("the enumeration is deterministic") {
    auto a = graded_irreducibles<Rational>(4);
    auto b = graded_irreducibles<Rational>(4);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].module == b[i].module);
  }
  SECTION("multiplicity vectors decompose direct sums") {
    auto classes = graded_irreducibles<Rational>(4);
    REQUIRE(classes.size() == 2);
    auto sum = direct_sum(classes[0].module, classes[1].module);
    CHECK(multiplicity_vector(sum, classes) == std::vector<long long>{1, 1});
    // A conjugated copy exercises the dense homomorphism solver.
    std::mt19937 rng(99);
    conjugate_random(sum, rng);
    CHECK(multiplicity_vector(sum, classes) == std::vector<long long>{1, 1});
  }
  SECTION("explicit splitting recovers the summands of a direct sum") {
    auto classes = graded_irreducibles<Rational>(4);
    REQUIRE(classes.size() == 2);
    auto sum = direct_sum(classes[0].module, classes[1].module);
    std::vector<std::pair<GradedCliffordModule<Rational>, size_t>> refined;
    detail::split_recursive(sum, refined);
    REQUIRE(refined.size() == 2);
    for (const auto& [mod, end_dim] : refined) {
      CHECK(mod.m0 == 4);
      CHECK(mod.m1 == 4);
      CHECK(end_dim == 4);
      CHECK_NOTHROW(validate(mod, negative_definite_form<Rational>(4)));
      bool matches_some = !detail::hom_space(mod, classes[0].module).empty() ||
                          !detail::hom_space(mod, classes[1].module).empty();
      CHECK(matches_some);
    }
  }
}

// ---------------------------------------------------------------------------
// Restriction class groups
// ---------------------------------------------------------------------------

TEST_CASE("restriction class groups match the frozen ladder") {
  struct Expect {
    std::vector<long long> torsion;
    size_t free_rank;
  };
  SECTION("rational groups for ranks zero through ten") {
    const std::vector<Expect> table = {
        {{}, 1},   // n=0
        {{2}, 0},  // n=1
        {{2}, 0},  // n=2
        {{}, 0},   // n=3
        {{}, 1},   // n=4
        {{}, 0},   // n=5
        {{}, 0},   // n=6
        {{}, 0},   // n=7
        {{}, 1},   // n=8
        {{2}, 0},  // n=9
        {{2}, 0},  // n=10
    };
    for (size_t n = 0; n < table.size(); ++n) {
      AbsGroup g = abs_group<Rational>(n);
      INFO("rank " << n);
      CHECK(g.torsion_orders == table[n].torsion);
      CHECK(g.free_rank == table[n].free_rank);
    }
  }
  SECTION("gaussian groups for ranks zero through four alternate Z and 0") {
    const std::vector<Expect> table = {
        {{}, 1}, {{}, 0}, {{}, 1}, {{}, 0}, {{}, 1},
    };
    for (size_t n = 0; n < table.size(); ++n) {
      AbsGroup g = abs_group<GR>(n);
      INFO("rank " << n);
      CHECK(g.torsion_orders == table[n].torsion);
      CHECK(g.free_rank == table[n].free_rank);
    }
  }
  SECTION("the group ladder repeats with period eight at the start") {
    CHECK(abs_group<Rational>(0) == abs_group<Rational>(8));
    CHECK(abs_group<Rational>(1) == abs_group<Rational>(9));
    CHECK(abs_group<Rational>(2) == abs_group<Rational>(10));
  }
}

TEST_CASE("classes of distinguished modules") {
  SECTION("the free rank-one module generates the two-torsion at rank one") {
    auto q1 = negative_definite_form<Rational>(1);
    AbsClass c = abs_class(free_rank_one(q1));
    CHECK(c.torsion_orders == std::vector<long long>{2});
    CHECK(c.torsion_coords == std::vector<long long>{1});
    CHECK(c.free_rank == 0);
    CHECK(!c.is_zero());
    // Two copies restrict from one rank up, so the doubled class vanishes.
    AbsClass doubled = abs_class(direct_sum(free_rank_one(q1), free_rank_one(q1)));
    CHECK(doubled.is_zero());
  }
  SECTION("the column module generates the free factor at rank eight") {
    GradedCliffordModule<Rational> x8 = column_module_X8();
    AbsClass c = abs_class(x8);
    CHECK(c.torsion_orders.empty());
    REQUIRE(c.free_coords.size() == 1);
    CHECK((c.free_coords[0] == 1 || c.free_coords[0] == -1));

    AbsClass twice = abs_class(direct_sum(x8, x8));
    CHECK(twice.free_coords[0] == 2 * c.free_coords[0]);
  }
  SECTION("restricted modules have zero class") {
    GradedCliffordModule<Rational> r1 =
        restrict_module(free_rank_one(negative_definite_form<Rational>(2)));
    CHECK(abs_class(r1).is_zero());
    auto classes9 = graded_irreducibles<Rational>(9);
    REQUIRE(classes9.size() == 1);
    GradedCliffordModule<Rational> r8 = restrict_module(classes9[0].module);
    CHECK(abs_class(r8).is_zero());

    SECTION("and adding one leaves other classes unchanged") {
      GradedCliffordModule<Rational> x8 = column_module_X8();
      AbsClass base = abs_class(x8);
      AbsClass shifted = abs_class(direct_sum(x8, r8));
      CHECK(shifted == base);
    }
  }
  SECTION("classes add under direct sum") {
    auto classes8 = graded_irreducibles<Rational>(8);
    REQUIRE(classes8.size() == 2);
    AbsClass a = abs_class(classes8[0].module);
    AbsClass b = abs_class(classes8[1].module);
    AbsClass sum = abs_class(direct_sum(classes8[0].module, classes8[1].module));
    CHECK(sum == class_sum(a, b));
    CHECK(sum.is_zero());  // the two simple classes restrict from rank nine jointly
  }
}

TEST_CASE("gaussian tensor multiplicativity on classes") {
  auto q2 = negative_definite_form<GR>(2);
  auto classes2 = graded_irreducibles<GR>(2);
  REQUIRE(classes2.size() == 2);
  const GradedCliffordModule<GR>& t = classes2[0].module;

  AbsClass base = abs_class(t);
  REQUIRE(base.free_coords.size() == 1);
  CHECK((base.free_coords[0] == 1 || base.free_coords[0] == -1));

  SECTION("generator times generator lands on a generator") {
    GradedCliffordModule<GR> tt = graded_tensor(t, q2, t, q2).module;
    AbsClass c = abs_class(tt);
    REQUIRE(c.free_coords.size() == 1);
    CHECK((c.free_coords[0] == 1 || c.free_coords[0] == -1));
  }
  SECTION("the pairing is additive in each slot") {
    GradedCliffordModule<GR> dbl = direct_sum(t, t);
    AbsClass c = abs_class(graded_tensor(dbl, q2, t, q2).module);
    REQUIRE(c.free_coords.size() == 1);
    CHECK((c.free_coords[0] == 2 || c.free_coords[0] == -2));
  }
  SECTION("a zero class annihilates under the pairing") {
    auto classes3 = graded_irreducibles<GR>(3);
    REQUIRE(classes3.size() == 1);
    GradedCliffordModule<GR> r = restrict_module(classes3[0].module);
    REQUIRE(abs_class(r).is_zero());
    AbsClass c = abs_class(graded_tensor(r, q2, t, q2).module);
    CHECK(c.is_zero());
  }
}

// ---------------------------------------------------------------------------
// JSON round trips
// ---------------------------------------------------------------------------

TEST_CASE("module JSON serialization") {
  SECTION("rational round trip") {
    auto q = negative_definite_form<Rational>(2);
    GradedCliffordModule<Rational> m = free_rank_one(q);
    nlohmann::json j = module_to_json(m, q);
    auto [m2, q2] = module_from_json<Rational>(j);
    CHECK(m2 == m);
    CHECK(q2 == q);
  }
  SECTION("gaussian round trip") {
    auto q = form_of<GR>({1, 1});
    GradedCliffordModule<GR> m;
    m.m1 = m.m0 = 1;
    m.up = {kmat<GR>({{gi(1, 0)}}), kmat<GR>({{gi(0, 1)}})};
    m.down = {kmat<GR>({{gi(1, 0)}}), kmat<GR>({{gi(0, -1)}})};
    nlohmann::json j = module_to_json(m, q);
    auto [m2, q2] = module_from_json<GR>(j);
    CHECK(m2 == m);
    CHECK(q2 == q);
  }
  SECTION("numeric scalars are accepted") {
    nlohmann::json j;
    j["mode"] = "rational";
    j["n"] = 1;
    j["form"] = nlohmann::json::array({-1});
    j["m1"] = 1;
    j["m0"] = 1;
    j["rho"] = nlohmann::json::array(
        {nlohmann::json{{"up", {{1}}}, {"down", {{-1}}}}});
    auto [m, q] = module_from_json<Rational>(j);
    CHECK(q.coefficients == std::vector<Rational>{Rational(-1)});
    CHECK(m.up[0].at(0, 0) == Rational(1));
    CHECK(m.down[0].at(0, 0) == Rational(-1));
    CHECK_NOTHROW(validate(m, q));
  }
  SECTION("missing fields and wrong modes are rejected") {
    auto q = negative_definite_form<Rational>(1);
    nlohmann::json j = module_to_json(free_rank_one(q), q);
    nlohmann::json missing = j;
    missing.erase("rho");
    CHECK_THROWS_MATCHES(module_from_json<Rational>(missing), MfkError,
                         has_code("bad_json"));
    CHECK_THROWS_MATCHES(module_from_json<GR>(j), MfkError, has_code("mode_mismatch"));
    nlohmann::json bad_shape = j;
    bad_shape["rho"][0]["up"] = nlohmann::json::array({nlohmann::json::array({"1", "2"})});
    CHECK_THROWS_MATCHES(module_from_json<Rational>(bad_shape), MfkError,
                         has_code("bad_json"));
  }
}
