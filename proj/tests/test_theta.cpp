// SPDX-License-Identifier: MIT
#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "mfk/mf.hpp"
#include "mfk/poly.hpp"
#include "mfk/theta.hpp"

using namespace mfk;
using GR = GaussianRational;
using Catch::Matchers::Predicate;

namespace {

auto has_code(const std::string& code) {
  return Predicate<MfkError>(
      [code](const MfkError& e) { return e.code() == code; },
      "error code is \"" + code + "\"");
}

/// 1x1 graded factorization of top*bottom with P1 generator degree -deg(top)
/// shifted by `twist` and P0 generator degree `twist`.
template <class K>
MatrixFactorization<K> one_by_one(const std::vector<std::string>& vars,
                                  const WeightSystem& ws,
                                  const std::string& top,
                                  const std::string& bottom, long twist = 0) {
  MatrixFactorization<K> p;
  p.vars = vars;
  const Poly<K> t = parse_poly<K>(top, vars);
  const Poly<K> b = parse_poly<K>(bottom, vars);
  p.f = t * b;
  p.d1 = DenseMatrix<Poly<K>>(1, 1, t);
  p.d0 = DenseMatrix<Poly<K>>(1, 1, b);
  const long dt = *t.homogeneous_degree(ws.weights);
  p.grading = MFGrading{ws, {twist - dt}, {twist}};
  return p;
}

WeightSystem weights(std::vector<long> w, long d) {
  WeightSystem ws;
  ws.weights = std::move(w);
  ws.degree = d;
  return ws;
}

}  // namespace

TEST_CASE("pairing values on the node") {
  const std::vector<std::string> xy{"x", "y"};
  const WeightSystem ws = weights({1, 1}, 2);
  MatrixFactorization<Rational> p = one_by_one<Rational>(xy, ws, "x", "y");
  MatrixFactorization<Rational> q = one_by_one<Rational>(xy, ws, "y", "x");

  SECTION("opposite branches pair to +1") {
    ThetaReport rep = theta(p, q);
    CHECK(rep.tor1 == 0);
    CHECK(rep.tor2 == 1);
    CHECK(rep.theta == 1);
    CHECK(rep.valid);
    CHECK(rep.periodic_1_3);
    CHECK(rep.periodic_2_4);
    REQUIRE(rep.slices.size() == 2);
    CHECK(rep.slices[0].degree == 2);
    CHECK(rep.slices[0].h1 == 0);
    CHECK(rep.slices[0].h2 == 1);
    CHECK(rep.slices[1].degree == 4);
    CHECK(rep.slices[1].h4 == 1);
    CHECK(rep.scan_min == 0);
    CHECK(rep.scan_max > 4);
  }

  SECTION("a branch against itself pairs to -1") {
    ThetaReport rep = theta(p, p);
    CHECK(rep.tor1 == 1);
    CHECK(rep.tor2 == 0);
    CHECK(rep.theta == -1);
    CHECK(rep.valid);
    REQUIRE(rep.slices.size() == 2);
    CHECK(rep.slices[0].degree == 1);
    CHECK(rep.slices[0].h1 == 1);
    CHECK(rep.slices[1].degree == 3);
    CHECK(rep.slices[1].h3 == 1);
  }

  SECTION("the pairing is symmetric") {
    CHECK(theta(p, q).theta == theta(q, p).theta);
    CHECK(theta(p, p).theta == -1);
    CHECK(theta(q, q).theta == -1);
  }

  SECTION("both trivial factorizations pair to zero") {
    for (TrivialKind kind : {TrivialKind::id_then_f, TrivialKind::f_then_id}) {
      MatrixFactorization<Rational> t =
          trivial_mf<Rational>(xy, p.f, kind, ws);
      ThetaReport rep = theta(p, t);
      CHECK(rep.theta == 0);
      CHECK(rep.tor1 == 0);
      CHECK(rep.tor2 == 0);
      CHECK(rep.valid);
      CHECK(theta(t, p).theta == 0);
    }
  }

  SECTION("gaussian scalars compute the same values") {
    MatrixFactorization<GR> gp = one_by_one<GR>(xy, ws, "x", "y");
    MatrixFactorization<GR> gq = one_by_one<GR>(xy, ws, "y", "x");
    CHECK(theta(gp, gq).theta == 1);
    CHECK(theta(gp, gp).theta == -1);
  }
}

TEST_CASE("pairing bilinearity") {
  const std::vector<std::string> xy{"x", "y"};
  const WeightSystem ws = weights({1, 1}, 2);
  MatrixFactorization<Rational> p = one_by_one<Rational>(xy, ws, "x", "y");
  // Twisted so that the multiplication-by-(x, y) cycle below is graded.
  MatrixFactorization<Rational> q = one_by_one<Rational>(xy, ws, "y", "x", 1);
  MatrixFactorization<Rational> n = one_by_one<Rational>(xy, ws, "y", "x");

  SECTION("twisting generators does not change the pairing") {
    CHECK(theta(q, n).theta == -1);
  }

  SECTION("sum, shift, and default zero-morphism cone relations hold") {
    BilinearityReport rep = theta_bilinearity_check(p, q, n);
    CHECK(rep.theta_first == 1);
    CHECK(rep.theta_second == -1);
    CHECK(rep.theta_sum == 0);
    CHECK(rep.theta_shift == -1);
    CHECK(rep.additive);
    CHECK(rep.shift_antisymmetric);
    CHECK(rep.cone_consistent);
    CHECK(rep.theta_cone == -2);
    CHECK(rep.passed);
  }

  SECTION("the cone relation holds for a nonzero graded cycle") {
    MFMorphism<Rational> a;
    a.source = p;
    a.target = q;
    a.alpha1 = DenseMatrix<Poly<Rational>>(1, 1, parse_poly<Rational>("x", xy));
    a.alpha0 = DenseMatrix<Poly<Rational>>(1, 1, parse_poly<Rational>("y", xy));
    REQUIRE(validate(a).valid);
    REQUIRE(morphism_is_graded(a));
    BilinearityReport rep = theta_bilinearity_check(p, q, n, a);
    CHECK(rep.cone_consistent);
    CHECK(rep.theta_cone == rep.theta_cone_target - rep.theta_cone_source);
    CHECK(rep.passed);
  }
}

TEST_CASE("pairing across the plane-curve suite") {
  struct Curve {
    const char* name;
    const char* f;
    std::vector<long> w;
    long d;
  };
  const std::vector<Curve> curves = {
      {"node", "x*y", {1, 1}, 2},
      {"split node", "x^2 - y^2", {1, 1}, 2},
      {"cusp", "x^3 - y^2", {2, 3}, 6},
      {"three lines", "x^3 - x*y^2", {2, 2}, 6},
      {"tacnode-type", "x^3 + y^3", {2, 2}, 6},
      {"higher cusp", "x^3 + y^4", {4, 3}, 12},
      {"top cusp", "x^3 + y^5", {5, 3}, 15},
  };
  const std::vector<std::string> xy{"x", "y"};

  for (const Curve& c : curves) {
    DYNAMIC_SECTION("invariants for " << c.name) {
      const WeightSystem ws = weights(c.w, c.d);
      const Poly<Rational> f = parse_poly<Rational>(c.f, xy);
      KoszulResult<Rational> kr =
          koszul_stabilization(xy, f, euler_decomposition(f, ws), ws);
      const MatrixFactorization<Rational>& e = kr.mf;
      REQUIRE(validate(e).valid);
      REQUIRE(e.grading.has_value());

      ThetaReport self = theta(e, e);
      CHECK(self.valid);
      CHECK(self.periodic_1_3);
      CHECK(self.periodic_2_4);

      ThetaReport sh = theta(shift(e), e);
      CHECK(sh.valid);
      CHECK(sh.theta == -self.theta);
      CHECK(theta(e, shift(e)).theta == -self.theta);

      BilinearityReport bil = theta_bilinearity_check(e, shift(e), e);
      CHECK(bil.passed);
      CHECK(bil.theta_sum == 0);
    }
  }
}

TEST_CASE("pairing preconditions") {
  const std::vector<std::string> xy{"x", "y"};
  const WeightSystem ws = weights({1, 1}, 2);
  MatrixFactorization<Rational> p = one_by_one<Rational>(xy, ws, "x", "y");
  MatrixFactorization<Rational> q = one_by_one<Rational>(xy, ws, "y", "x");

  SECTION("ungraded inputs are rejected") {
    MatrixFactorization<Rational> u = p;
    u.grading.reset();
    CHECK_THROWS_MATCHES(theta(u, q), MfkError, has_code("grading_required"));
    CHECK_THROWS_MATCHES(theta(p, [&] {
                           MatrixFactorization<Rational> v = q;
                           v.grading.reset();
                           return v;
                         }()),
                         MfkError, has_code("grading_required"));
  }

  SECTION("different potentials are rejected") {
    MatrixFactorization<Rational> other =
        one_by_one<Rational>(xy, ws, "x", "x");
    CHECK_THROWS_MATCHES(theta(p, other), MfkError,
                         has_code("incompatible_pair"));
  }

  SECTION("mismatched weight systems are rejected") {
    MatrixFactorization<Rational> tw =
        one_by_one<Rational>(xy, weights({1, 3}, 4), "y", "x");
    CHECK_THROWS_MATCHES(theta(p, tw), MfkError,
                         has_code("incompatible_pair"));
  }

  SECTION("a zero potential is rejected") {
    MatrixFactorization<Rational> z;
    z.vars = xy;
    z.f = Poly<Rational>::zero(2);
    z.d1 = DenseMatrix<Poly<Rational>>(1, 1, z.f);
    z.d0 = DenseMatrix<Poly<Rational>>(1, 1, z.f);
    REQUIRE(validate(z).valid);
    CHECK_THROWS_MATCHES(theta(z, z), MfkError, has_code("zero_potential"));
  }

  SECTION("non-isolated singularities are rejected") {
    const WeightSystem w4 = weights({1, 1}, 4);
    MatrixFactorization<Rational> s =
        one_by_one<Rational>(xy, w4, "x*y", "x*y");
    CHECK_THROWS_MATCHES(theta(s, s), MfkError, has_code("not_isolated"));
  }

  SECTION("the degree cap aborts the scan") {
    ThetaOptions opts;
    opts.max_degrees = 1;
    CHECK_THROWS_MATCHES(theta(p, q, opts), MfkError,
                         has_code("window_exceeded"));
  }

  SECTION("invalid factorizations are rejected") {
    MatrixFactorization<Rational> bad = p;
    bad.f = parse_poly<Rational>("x^2", xy);
    CHECK_THROWS_MATCHES(theta(bad, q), MfkError,
                         has_code("invalid_factorization"));
  }
}
