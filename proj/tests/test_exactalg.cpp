// SPDX-License-Identifier: MIT
//
// Exact scalar/polynomial layer: parsing, canonical printing, weighted
// gradings, exact linear algebra, streaming rank engines, Smith normal
// form, and Milnor numbers.

#include <catch2/catch_amalgamated.hpp>

#include "mfk/linalg.hpp"
#include "mfk/milnor.hpp"
#include "mfk/modp.hpp"
#include "mfk/poly.hpp"
#include "mfk/scalar.hpp"

#include <random>

using namespace mfk;

namespace {

Poly<Rational> rp(const std::string& text,
                  const std::vector<std::string>& vars) {
  return parse_poly<Rational>(text, vars);
}

Poly<GaussianRational> gp(const std::string& text,
                          const std::vector<std::string>& vars) {
  return parse_poly<GaussianRational>(text, vars);
}

}  // namespace

TEST_CASE("polynomial parsing and canonical printing round-trip") {
  std::vector<std::string> xy = {"x", "y"};

  auto f = rp("x^3 - y^2", xy);
  CHECK(f.term_count() == 2);
  CHECK(print_poly(f, xy) == "x^3 - y^2");

  // Canonical order is graded-lex descending regardless of input order.
  CHECK(print_poly(rp("-y^2 + x^3", xy), xy) == "x^3 - y^2");
  CHECK(rp("-y^2 + x^3", xy) == f);

  CHECK(print_poly(rp("0", xy), xy) == "0");
  CHECK(rp("0", xy).is_zero());
  CHECK(rp("x - x", xy).is_zero());

  auto g = rp("1/2*x*y - 3/2", xy);
  CHECK(print_poly(g, xy) == "1/2*x*y - 3/2");

  CHECK(print_poly(rp("(x + y)^2", xy), xy) == "x^2 + 2*x*y + y^2");
  CHECK(print_poly(rp("-x", xy), xy) == "-x");
  CHECK(print_poly(rp("y*x", xy), xy) == "x*y");

  // Round-trip property on a few shapes.
  for (const char* s : {"x^3 - y^2", "1/2*x*y - 3/2", "-x + y",
                        "x^2 + 2*x*y + y^2", "7", "-7/3", "0"}) {
    auto p = rp(s, xy);
    CHECK(rp(print_poly(p, xy), xy) == p);
  }
}

TEST_CASE("gaussian polynomials and the imaginary unit") {
  std::vector<std::string> uv = {"u", "v"};

  auto prod = gp("(u + i*v)*(u - i*v)", uv);
  CHECK(prod == gp("u^2 + v^2", uv));
  CHECK(print_poly(prod, uv) == "u^2 + v^2");

  auto mixed = gp("u + i*v", uv);
  CHECK(print_poly(mixed, uv) == "u + i*v");
  CHECK(gp(print_poly(mixed, uv), uv) == mixed);

  auto im = gp("3/2*i*u - i", uv);
  CHECK(gp(print_poly(im, uv), uv) == im);

  CHECK_THROWS_MATCHES(
      rp("i*x", {"x"}), MfkError,
      Catch::Matchers::Predicate<MfkError>([](const MfkError& e) {
        return e.code() == "imaginary_unit_in_rational_mode";
      }));

  // i^2 = -1 exactly.
  CHECK(gp("i*i", uv) == gp("-1", uv));
}

TEST_CASE("parse errors carry position and code") {
  std::vector<std::string> xy = {"x", "y"};
  CHECK_THROWS_MATCHES(rp("x + ", xy), MfkError,
                       Catch::Matchers::Predicate<MfkError>([](const MfkError& e) {
                         return e.code() == "parse_error" &&
                                std::string(e.what()).find("position") !=
                                    std::string::npos;
                       }));
  CHECK_THROWS_MATCHES(rp("x + z", xy), MfkError,
                       Catch::Matchers::Predicate<MfkError>([](const MfkError& e) {
                         return e.code() == "unknown_variable";
                       }));
  CHECK_THROWS_AS(rp("x ^ y", xy), MfkError);
  CHECK_THROWS_AS(rp("(x", xy), MfkError);
  CHECK_THROWS_AS(rp("1/0", xy), MfkError);
}

TEST_CASE("weighted degrees and quasi-homogeneity") {
  std::vector<std::string> xy = {"x", "y"};
  auto f = rp("x^3 - y^2", xy);

  WeightSystem ws{{2, 3}, 6};
  CHECK(is_quasi_homogeneous(f, ws));
  CHECK(!is_quasi_homogeneous(f, WeightSystem{{1, 1}, 3}));
  CHECK(!is_quasi_homogeneous(rp("x^3 - y^2 + x", xy), ws));
  CHECK(f.homogeneous_degree({2, 3}) == 6);
  CHECK(f.max_weighted_degree({1, 1}) == 3);
  CHECK(f.total_degree() == 3);

  auto dx = f.derivative(0);
  CHECK(dx == rp("3*x^2", xy));
  CHECK(f.derivative(1) == rp("-2*y", xy));

  // Substituting x -> i*x flips the sign of x^2 over Q(i).
  auto q = gp("x^2 + y^2", xy);
  CHECK(q.scaled_variable(0, GaussianRational::unit_i()) ==
        gp("-x^2 + y^2", xy));
}

TEST_CASE("monomial enumeration by weighted degree") {
  CHECK(enumerate_monomials({1, 1, 1}, 3).size() == 10);
  auto ms = enumerate_monomials({2, 3}, 6);
  REQUIRE(ms.size() == 2);
  CHECK(ms[0] == Mono{3, 0});
  CHECK(ms[1] == Mono{0, 2});
  CHECK(enumerate_monomials({2, 2}, 3).empty());
  CHECK(enumerate_monomials({1, 1}, 0).size() == 1);
}

TEST_CASE("exact dense linear algebra") {
  auto Q = [](long v) { return Rational(v); };
  DenseMatrix<Rational> a(2, 2, Q(0));
  a.at(0, 0) = Q(1);
  a.at(0, 1) = Q(2);
  a.at(1, 0) = Q(2);
  a.at(1, 1) = Q(4);
  CHECK(rank_exact(a) == 1);

  auto ker = kernel_basis(a);
  REQUIRE(ker.size() == 1);
  // a * ker[0] == 0
  CHECK(a.at(0, 0) * ker[0][0] + a.at(0, 1) * ker[0][1] == 0);

  std::vector<Rational> b = {Q(3), Q(6)};
  auto x = solve_linear(a, b);
  REQUIRE(x.has_value());
  CHECK(a.at(0, 0) * (*x)[0] + a.at(0, 1) * (*x)[1] == Q(3));
  CHECK(!solve_linear(a, {Q(3), Q(7)}).has_value());

  auto id3 = DenseMatrix<Rational>::identity(3, Q(0), Q(1));
  CHECK(rank_exact(id3) == 3);

  // Kronecker uses left-factor-major indexing.
  DenseMatrix<Rational> e01(2, 2, Q(0));
  e01.at(0, 1) = Q(1);
  auto k = mat_kron(e01, id3, Q(0));
  CHECK(k.rows() == 6);
  CHECK(k.at(0, 3) == Q(1));
  CHECK(k.at(2, 5) == Q(1));
  CHECK(k.at(0, 0) == Q(0));

  auto blk = mat_blocks2(id3, DenseMatrix<Rational>(3, 2, Q(0)),
                         DenseMatrix<Rational>(2, 3, Q(0)),
                         DenseMatrix<Rational>::identity(2, Q(0), Q(1)), Q(0));
  CHECK(blk.rows() == 5);
  CHECK(blk.cols() == 5);
  CHECK(rank_exact(blk) == 5);

  GradedSolveProblem<Rational> prob;
  prob.matrix = a;
  prob.row_labels = {"r0", "r1"};
  prob.col_labels = {"c0", "c1"};
  auto res = graded_component_rank(prob);
  CHECK(res.rank == 1);
  CHECK(res.kernel.size() == 1);
}

TEST_CASE("sparse exact rank agrees with dense rank") {
  std::mt19937 rng(20260818);
  std::uniform_int_distribution<int> dim(1, 6), val(-2, 2);
  for (int trial = 0; trial < 60; ++trial) {
    size_t r = size_t(dim(rng)), c = size_t(dim(rng));
    DenseMatrix<Rational> m(r, c, Rational(0));
    SparseRankExact<Rational> sp(r, c);
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < c; ++j) {
        int v = val(rng);
        m.at(i, j) = Rational(v);
        sp.add_entry(i, j, Rational(v));
      }
    CHECK(sp.rank() == rank_exact(m));
  }
}

TEST_CASE("streaming mod-p ranks lower-bound the exact rank") {
  std::mt19937 rng(987654);
  std::uniform_int_distribution<int> dim(1, 7), val(-3, 3);
  for (uint32_t p : certification_primes()) {
    CHECK(p % 4 == 1);
    uint32_t root = sqrt_minus_one_mod(p);
    CHECK(uint64_t(root) * root % p == p - 1);
  }
  for (int trial = 0; trial < 40; ++trial) {
    size_t r = size_t(dim(rng)), c = size_t(dim(rng));
    DenseMatrix<Rational> m(r, c, Rational(0));
    FpRowEchelon fp(32749, c);
    F2RowEchelon f2(c);
    for (size_t i = 0; i < r; ++i) {
      std::vector<std::pair<uint32_t, uint32_t>> fprow;
      std::vector<uint32_t> f2row;
      for (size_t j = 0; j < c; ++j) {
        int v = val(rng);
        m.at(i, j) = Rational(v);
        if (v != 0) fprow.emplace_back(uint32_t(j), uint32_t((v + 32749) % 32749));
        if (v % 2 != 0) f2row.push_back(uint32_t(j));
      }
      fp.add_row(fprow);
      f2.add_row(f2row);
    }
    size_t exact = rank_exact(m);
    CHECK(fp.rank() <= exact);
    CHECK(f2.rank() <= exact);
    // Over a 15-bit prime, random tiny integer matrices never collide.
    CHECK(fp.rank() == exact);
  }

  // Under-ranking mod 2 is possible and expected: [[2]] has rank 1 over Q.
  F2RowEchelon f2(1);
  CHECK(!f2.add_row({}));  // 2 = 0 mod 2: empty support
  CHECK(f2.rank() == 0);

  // fp_image maps 1/2 to the inverse of 2.
  auto half = fp_image(Rational(1, 2), 32749);
  REQUIRE(half.has_value());
  CHECK(uint64_t(*half) * 2 % 32749 == 1);
  CHECK(!fp_image(Rational(1, 32749), 32749).has_value());

  uint32_t root = sqrt_minus_one_mod(32749);
  auto gi = fp_image(GaussianRational(Rational(0), Rational(1)), 32749, root);
  REQUIRE(gi.has_value());
  CHECK(*gi == root);
}

TEST_CASE("smith normal form") {
  auto I = [](long v) { return Integer(v); };

  DenseMatrix<Integer> m(1, 1, I(0));
  m.at(0, 0) = I(2);
  auto s = smith_normal_form(m);
  REQUIRE(s.diag.size() == 1);
  CHECK(s.diag[0] == 2);

  DenseMatrix<Integer> d(2, 2, I(0));
  d.at(0, 0) = I(2);
  d.at(1, 1) = I(3);
  s = smith_normal_form(d);
  REQUIRE(s.diag.size() == 2);
  CHECK(s.diag[0] == 1);
  CHECK(s.diag[1] == 6);

  // Z^2 / <(1,1)>: one unit invariant, one free coordinate.
  DenseMatrix<Integer> rel(2, 1, I(0));
  rel.at(0, 0) = I(1);
  rel.at(1, 0) = I(1);
  s = smith_normal_form(rel);
  REQUIRE(s.diag.size() == 1);
  CHECK(s.diag[0] == 1);
  // U is unimodular.
  Integer det = s.U.at(0, 0) * s.U.at(1, 1) - s.U.at(0, 1) * s.U.at(1, 0);
  CHECK((det == 1 || det == -1));

  // Zero matrix: quotient is free.
  DenseMatrix<Integer> z(2, 2, I(0));
  s = smith_normal_form(z);
  CHECK(s.diag[0] == 0);
  CHECK(s.diag[1] == 0);
}

TEST_CASE("milnor numbers of quasi-homogeneous polynomials") {
  std::vector<std::string> xyz = {"x", "y", "z"};

  auto rep = milnor_number(rp("x^2 + y^2 + z^2", xyz), WeightSystem{{1, 1, 1}, 2});
  CHECK(rep.isolated);
  CHECK(rep.milnor_number == 1);
  REQUIRE(rep.degree_dims.size() == 1);
  CHECK(rep.degree_dims[0] == std::pair<long, long>(0, 1));

  rep = milnor_number(rp("x^3 - y^2", {"x", "y"}), WeightSystem{{2, 3}, 6});
  CHECK(rep.isolated);
  CHECK(rep.milnor_number == 2);
  REQUIRE(rep.degree_dims.size() == 2);
  CHECK(rep.degree_dims[0] == std::pair<long, long>(0, 1));
  CHECK(rep.degree_dims[1] == std::pair<long, long>(2, 1));

  rep = milnor_number(rp("x^3 + y^3 + z^3", xyz), WeightSystem{{1, 1, 1}, 3});
  CHECK(rep.isolated);
  CHECK(rep.milnor_number == 8);
  REQUIRE(rep.degree_dims.size() == 4);
  CHECK(rep.degree_dims[1] == std::pair<long, long>(1, 3));
  CHECK(rep.degree_dims[2] == std::pair<long, long>(2, 3));

  // Non-isolated: x^2 y^2 has one-dimensional critical locus.
  rep = milnor_number(rp("x^2*y^2", {"x", "y"}), WeightSystem{{1, 1}, 4});
  CHECK(!rep.isolated);
  CHECK(rep.milnor_number == -1);

  CHECK_THROWS_MATCHES(
      milnor_number(rp("x^3 - y^2", {"x", "y"}), WeightSystem{{1, 1}, 3}),
      MfkError, Catch::Matchers::Predicate<MfkError>([](const MfkError& e) {
        return e.code() == "not_quasi_homogeneous";
      }));

  // Product formula agreement on Brieskorn-type sums.
  CHECK(milnor_product_formula(WeightSystem{{2, 3}, 6}) == Rational(2));
  CHECK(milnor_product_formula(WeightSystem{{1, 1, 1}, 3}) == Rational(8));
}
