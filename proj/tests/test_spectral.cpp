#include "graphon/spectral.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "graphon/errors.hpp"
#include "oracles.hpp"

using namespace graphon;
using spectral::Index;
using spectral::LinearOp;
using spectral::Mat;
using spectral::SvdTriple;
using spectral::Vec;

TEST_SUITE_BEGIN("spectral");

TEST_CASE("truncated_svd identity") {
  Mat id = Mat::Identity(3, 3);
  auto triples = spectral::truncated_svd(LinearOp(id), 3);
  REQUIRE(triples.size() == 3);
  for (const auto& t : triples) CHECK(t.sigma == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("truncated_svd rank-1 all-ones") {
  Mat ones = Mat::Ones(4, 4);
  auto triples = spectral::truncated_svd(LinearOp(ones), 1);
  REQUIRE(triples.size() == 1);
  CHECK(triples[0].sigma == doctest::Approx(4.0).epsilon(1e-12));
  for (int i = 0; i < 4; ++i) {
    CHECK(triples[0].u(i) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(triples[0].v(i) == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("truncated_svd planted spectrum 20x20 vs dense reference") {
  Vec spectrum(20);
  spectrum << 10, 5, 1, 0.5, 0.25, 0.2, 0.15, 0.1, 0.09, 0.08, 0.07, 0.06,
      0.05, 0.04, 0.03, 0.02, 0.01, 0.005, 0.002, 0.001;
  Mat m = oracles::planted_spectrum(spectrum, 42);
  auto triples = spectral::truncated_svd(LinearOp(m), 2);
  CHECK(std::abs(triples[0].sigma - 10.0) < 1e-8);
  CHECK(std::abs(triples[1].sigma - 5.0) < 1e-8);

  Eigen::JacobiSVD<Mat> ref(m);
  CHECK(std::abs(triples[0].sigma - ref.singularValues()(0)) < 1e-10);
  CHECK(std::abs(triples[1].sigma - ref.singularValues()(1)) < 1e-10);
}

TEST_CASE("truncated_svd randomized path reconstruction bound") {
  // 100x100 with a clear gap at the cut: sigma_4 = 1e-3.
  Vec spectrum = Vec::Zero(100);
  spectrum(0) = 10.0;
  spectrum(1) = 5.0;
  spectrum(2) = 1.0;
  for (Index i = 3; i < 100; ++i)
    spectrum(i) = 1e-3 * std::pow(0.9, static_cast<double>(i - 3));
  Mat m = oracles::planted_spectrum(spectrum, 7);

  auto triples = spectral::truncated_svd(LinearOp(m), 3, 10, 2, 123);
  Mat recon = spectral::reconstruct(triples, 100, 100);
  const double err = oracles::jacobi_opnorm(m - recon);
  CHECK(err <= spectrum(3) * (1.0 + 1e-6));
  CHECK(std::abs(triples[0].sigma - 10.0) < 1e-7);
  CHECK(std::abs(triples[2].sigma - 1.0) < 1e-7);
}

TEST_CASE("truncated_svd full spectrum matches jacobi oracle on small matrices") {
  for (Index n = 1; n <= 12; ++n) {
    CounterRng rng(1000 + static_cast<std::uint64_t>(n));
    Mat m(n, n);
    std::uint64_t ctr = 0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) m(i, j) = 2.0 * rng.uniform01(ctr++) - 1.0;
    auto triples = spectral::truncated_svd(LinearOp(m), n, 0, 2, 5);
    Vec ref = oracles::jacobi_singular_values(m);
    for (Index i = 0; i < n; ++i)
      CHECK(std::abs(triples[static_cast<std::size_t>(i)].sigma - ref(i)) < 1e-8);
  }
}

TEST_CASE("truncated_svd invariants: ordering and orthogonality") {
  Vec spectrum(30);
  for (Index i = 0; i < 30; ++i) spectrum(i) = 30.0 - static_cast<double>(i);
  Mat m = oracles::planted_spectrum(spectrum, 99);
  auto triples = spectral::truncated_svd(LinearOp(m), 10);
  for (std::size_t i = 1; i < triples.size(); ++i)
    CHECK(triples[i].sigma <= triples[i - 1].sigma + 1e-12);
  for (std::size_t i = 0; i < triples.size(); ++i) {
    CHECK(std::abs(triples[i].u.norm() - 1.0) < 1e-10);
    CHECK(std::abs(triples[i].v.norm() - 1.0) < 1e-10);
    for (std::size_t j = i + 1; j < triples.size(); ++j) {
      CHECK(std::abs(triples[i].u.dot(triples[j].u)) < 1e-8);
      CHECK(std::abs(triples[i].v.dot(triples[j].v)) < 1e-8);
    }
  }
}

TEST_CASE("truncated_svd rejects rank beyond dimension") {
  Mat m = Mat::Identity(4, 4);
  CHECK_THROWS_AS(spectral::truncated_svd(LinearOp(m), 5), ArgumentError);
}

TEST_CASE("truncated_svd deterministic under fixed seed") {
  Vec spectrum = Vec::LinSpaced(80, 80.0, 1.0);
  Mat m = oracles::planted_spectrum(spectrum, 3);
  auto a = spectral::truncated_svd(LinearOp(m), 5, 10, 2, 77);
  auto b = spectral::truncated_svd(LinearOp(m), 5, 10, 2, 77);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sigma == b[i].sigma);
    CHECK(a[i].u == b[i].u);
    CHECK(a[i].v == b[i].v);
  }
}

TEST_CASE("top_eigenpair diagonal") {
  Mat d = Mat::Zero(3, 3);
  d.diagonal() << 3, 1, 0;
  auto [lambda, v] = spectral::top_eigenpair(LinearOp(d));
  CHECK(lambda == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(std::abs(std::abs(v(0)) - 1.0) < 1e-8);
}

TEST_CASE("top_eigenpair all-ones") {
  Mat m = Mat::Ones(5, 5);
  auto [lambda, v] = spectral::top_eigenpair(LinearOp(m));
  CHECK(lambda == doctest::Approx(5.0).epsilon(1e-10));
  const double expect = 1.0 / std::sqrt(5.0);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(std::abs(v(i)) - expect) < 1e-8);
}

TEST_CASE("top_eigenpair path graph on 3 nodes") {
  // characteristic polynomial lambda^3 - 2 lambda = 0: largest root sqrt(2)
  Mat m = Mat::Zero(3, 3);
  m(0, 1) = m(1, 0) = 1.0;
  m(1, 2) = m(2, 1) = 1.0;
  auto [lambda, v] = spectral::top_eigenpair(LinearOp(m));
  CHECK(lambda == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
  CHECK((m * v - lambda * v).norm() < 1e-9);

  // same matrix through the sparse interface
  spectral::SpMat sp(3, 3);
  sp.insert(0, 1) = 1.0;
  sp.insert(1, 0) = 1.0;
  sp.insert(1, 2) = 1.0;
  sp.insert(2, 1) = 1.0;
  sp.makeCompressed();
  auto [lambda_sp, v_sp] = spectral::top_eigenpair(LinearOp(sp));
  CHECK(lambda_sp == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
  (void)v_sp;
}

TEST_CASE("top_eigenpair agrees with truncated_svd sigma1 on psd input") {
  Vec spectrum = Vec::LinSpaced(16, 16.0, 1.0);
  Mat m = oracles::planted_spectrum(spectrum, 11);
  auto [lambda, v] = spectral::top_eigenpair(LinearOp(m), 300, 1e-11);
  auto triples = spectral::truncated_svd(LinearOp(m), 1);
  CHECK(std::abs(lambda - triples[0].sigma) < 1e-9);
  (void)v;
}

TEST_CASE("top_eigenpair reports non-convergence") {
  Vec spectrum = Vec::LinSpaced(40, 1.02, 1.0);  // tightly clustered
  Mat m = oracles::planted_spectrum(spectrum, 13);
  CHECK_THROWS_AS(spectral::top_eigenpair(LinearOp(m), 2, 1e-14),
                  NumericalError);
}

TEST_CASE("cg_solve identity and diagonal") {
  Vec b(2);
  b << 2, 8;
  auto identity = [](const Vec& x) { return x; };
  CHECK((spectral::cg_solve(identity, b) - b).norm() < 1e-12);

  auto diag = [](const Vec& x) {
    Vec y = x;
    y(0) *= 2.0;
    y(1) *= 4.0;
    return y;
  };
  Vec x = spectral::cg_solve(diag, b);
  CHECK(x(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(x(1) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("cg_solve matches dense factorization on intervention operator") {
  // apply = I + L (I - gamma A / n)^2 with L chosen to keep it SPD
  const Index n = 6;
  CounterRng rng(555);
  Mat a = Mat::Zero(n, n);
  std::uint64_t ctr = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.uniform01(ctr++) < 0.5) a(i, j) = a(j, i) = 1.0;
  const double gamma = 0.4;
  const double lag = 2.0;
  Mat m = Mat::Identity(n, n) - (gamma / static_cast<double>(n)) * a;
  Mat op = Mat::Identity(n, n) + lag * m * m;

  Vec b(n);
  for (Index i = 0; i < n; ++i) b(i) = rng.gaussian(ctr++);
  Vec x = spectral::cg_solve([&op](const Vec& v) { return Vec(op * v); }, b,
                             1e-12);
  Vec ref = op.ldlt().solve(b);
  CHECK((x - ref).norm() < 1e-8);
}

TEST_CASE("cg_solve flags indefinite operators") {
  Vec b(3);
  b << 1, 2, 3;
  auto neg = [](const Vec& x) { return Vec(-x); };
  CHECK_THROWS_AS(spectral::cg_solve(neg, b), NumericalError);
}

TEST_CASE("operator_norm matches jacobi oracle") {
  CounterRng rng(77);
  Mat m(9, 9);
  std::uint64_t ctr = 0;
  for (Index j = 0; j < 9; ++j)
    for (Index i = 0; i < 9; ++i) m(i, j) = 2.0 * rng.uniform01(ctr++) - 1.0;
  CHECK(std::abs(spectral::operator_norm(LinearOp(m)) -
                 oracles::jacobi_opnorm(m)) < 1e-9);
}

TEST_CASE("operator_norm large path uses gram lanczos") {
  Vec spectrum = Vec::Zero(300);
  spectrum(0) = 4.2;
  spectrum(1) = -3.9;  // opnorm from the magnitude, not the algebraic max
  for (Index i = 2; i < 300; ++i) spectrum(i) = 1.0 / static_cast<double>(i);
  Mat m = oracles::planted_spectrum(spectrum, 21);
  CHECK(std::abs(spectral::operator_norm(LinearOp(m)) - 4.2) < 1e-8);
}

TEST_SUITE_END();
