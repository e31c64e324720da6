#include "graphon/games.hpp"

#include <doctest.h>

#include <cmath>

#include "graphon/errors.hpp"
#include "graphon/harness.hpp"
#include "graphon/prng.hpp"
#include "oracles.hpp"

using namespace graphon;
using games::GraphonProblem;
using games::LowRankStepOperator;
using games::NetworkProblem;

namespace {

Mat random_adjacency(Index n, double p, std::uint64_t seed) {
  CounterRng rng(seed);
  Mat a = Mat::Zero(n, n);
  std::uint64_t ctr = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.uniform01(ctr++) < p) a(i, j) = a(j, i) = 1.0;
  return a;
}

Vec random_gaussian(Index n, std::uint64_t seed) {
  CounterRng rng(seed);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.gaussian(static_cast<std::uint64_t>(i));
  return v;
}

Mat path_graph(Index n) {
  Mat a = Mat::Zero(n, n);
  for (Index i = 0; i + 1 < n; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
  return a;
}

StepGraphon random_symmetric_step(std::uint64_t seed, Index cells) {
  CounterRng rng(seed);
  Mat values(cells, cells);
  std::uint64_t ctr = 0;
  for (Index i = 0; i < cells; ++i)
    for (Index j = i; j < cells; ++j)
      values(i, j) = values(j, i) = rng.uniform01(ctr++);
  return {Vec::Constant(cells, 1.0 / static_cast<double>(cells)), values};
}

}  // namespace

TEST_SUITE_BEGIN("games");

TEST_CASE("network problem rejects a violated spectral condition") {
  Mat a = Mat::Ones(4, 4) - Mat::Identity(4, 4);  // ||A|| = 3
  Vec theta = Vec::Ones(4);
  CHECK_THROWS_AS(NetworkProblem(AdjMatrix(a), theta, 1.5, 1.0),
                  ArgumentError);
  CHECK_NOTHROW(NetworkProblem(AdjMatrix(a), theta, 1.2, 1.0));
}

TEST_CASE("equilibrium reduces to theta + intervention without peer effects") {
  Mat a = random_adjacency(8, 0.5, 17);
  Vec theta = random_gaussian(8, 1);
  Vec hat = random_gaussian(8, 2);

  NetworkProblem zero_gamma(AdjMatrix(a), theta, 0.0, 1.0);
  CHECK((games::equilibrium(zero_gamma, hat) - (theta + hat)).norm() < 1e-12);

  NetworkProblem zero_a(AdjMatrix(Mat::Zero(8, 8)), theta, 0.9, 1.0);
  CHECK((games::equilibrium(zero_a, hat) - (theta + hat)).norm() < 1e-12);
}

TEST_CASE("equilibrium matches the truncated Neumann series") {
  Mat a = path_graph(3);
  Vec theta = Vec::Ones(3);
  NetworkProblem p(AdjMatrix(a), theta, 0.5, 1.0);
  Vec s = games::equilibrium(p, Vec::Zero(3));
  Vec ref = oracles::neumann_resolvent(a, 0.5, theta, 60);
  CHECK((s - ref).norm() < 1e-8);
}

TEST_CASE("welfare trivia and the dense-inverse oracle") {
  const Index n = 4;
  Vec theta(n);
  theta << 1, 2, 3, 4;

  NetworkProblem zero_a(AdjMatrix(Mat::Zero(n, n)), theta, 0.7, 1.0);
  CHECK(games::welfare(zero_a, Vec::Zero(n)) ==
        doctest::Approx(0.5 * theta.squaredNorm() / n).epsilon(1e-12));

  // gamma = 0, intervention collinear with theta on the budget sphere
  const double budget = 2.0;
  Vec collinear = std::sqrt(budget) * theta / theta.norm();
  NetworkProblem zero_gamma(AdjMatrix(Mat::Zero(n, n)), theta, 0.0, budget);
  const double expect =
      0.5 * std::pow(theta.norm() + std::sqrt(budget), 2) / n;
  CHECK(games::welfare(zero_gamma, collinear) ==
        doctest::Approx(expect).epsilon(1e-12));

  Mat a = random_adjacency(n, 0.7, 23);
  NetworkProblem p(AdjMatrix(a), theta, 0.6, budget);
  Vec hat = random_gaussian(n, 5);
  Mat m = Mat::Identity(n, n) - (0.6 / n) * a;
  const double oracle = 0.5 * (m.inverse() * (theta + hat)).squaredNorm() / n;
  CHECK(games::welfare(p, hat) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("optimal intervention: zero budget and zero network") {
  Vec theta(3);
  theta << 1, 2, 2;
  NetworkProblem p0(AdjMatrix(Mat::Zero(3, 3)), theta, 0.5, 0.0);
  auto sol0 = games::optimal_intervention(p0);
  CHECK(sol0.zero_budget);
  CHECK(sol0.theta_hat.norm() == 0.0);

  const double budget = 4.0;
  NetworkProblem p(AdjMatrix(Mat::Zero(3, 3)), theta, 0.5, budget);
  auto sol = games::optimal_intervention(p);
  Vec expect = std::sqrt(budget) * theta / theta.norm();
  CHECK((sol.theta_hat - expect).norm() < 1e-9);
  // all mu equal 1: 1 + L = -||theta|| / sqrt(B)
  CHECK(sol.lagrange ==
        doctest::Approx(-1.0 - theta.norm() / std::sqrt(budget)).epsilon(1e-9));
  CHECK(sol.budget_residual <= 1e-8 * budget);
}

TEST_CASE("optimal intervention beats the projected-gradient oracle") {
  const Index n = 4;
  Mat a = path_graph(n);
  const double opnorm = oracles::jacobi_opnorm(a);
  const double gamma = 0.8 * (static_cast<double>(n) / opnorm) * 0.9;
  Vec theta(n);
  theta << 1, 2, 3, 4;
  const double budget = 2.0;
  NetworkProblem p(AdjMatrix(a), theta, gamma, budget);
  auto sol = games::optimal_intervention(p);
  CHECK(sol.budget_residual <= 1e-8 * budget);

  Vec candidate =
      oracles::projected_gradient_candidate(a, gamma, theta, budget, 500, 400, 99);
  const double cand_welfare = games::welfare(p, candidate);
  CHECK(sol.welfare >= cand_welfare - 1e-6);
  CHECK(std::abs(sol.welfare - cand_welfare) < 1e-6);
}

TEST_CASE("oracle dominance on small random instances") {
  for (int inst = 0; inst < 10; ++inst) {
    const Index n = 3 + (inst % 4);
    Mat a = random_adjacency(n, 0.6, 300 + inst);
    const double opnorm = oracles::jacobi_opnorm(a);
    const double gamma =
        opnorm > 0 ? 0.85 * static_cast<double>(n) / opnorm : 0.5;
    Vec theta = random_gaussian(n, 40 + inst);
    const double budget = 0.5 + 0.3 * inst;
    NetworkProblem p(AdjMatrix(a), theta, gamma, budget);
    auto sol = games::optimal_intervention(p);
    CHECK(sol.budget_residual <= 1e-8 * budget);
    Vec candidate = oracles::projected_gradient_candidate(
        a, gamma, theta, budget, 50, 300, 700 + inst);
    CHECK(sol.welfare >= games::welfare(p, candidate) - 1e-9);
  }
}

TEST_CASE("secular function decreases along the bracket expansion") {
  const Index n = 6;
  Mat a = random_adjacency(n, 0.5, 66);
  Vec theta = random_gaussian(n, 8);
  const double gamma = 0.7;
  NetworkProblem p(AdjMatrix(a), theta, gamma, 1.0);
  Mat m = Mat::Identity(n, n) - (gamma / n) * a;
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  const double mu_min = es.eigenvalues().minCoeff();
  const double l_sup = -1.0 / (mu_min * mu_min);
  auto psi = [&](double lag) {
    Mat op = Mat::Identity(n, n) + lag * m * m;
    return op.inverse() * theta;
  };
  double dist = -l_sup;
  double last = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 12; ++k) {
    const double value = psi(l_sup - dist).squaredNorm();
    CHECK(value < last);
    last = value;
    dist *= 4.0;
  }
}

TEST_CASE("secular solution scales with theta and budget") {
  const Index n = 5;
  Mat a = random_adjacency(n, 0.6, 77);
  Vec theta = random_gaussian(n, 9);
  NetworkProblem p1(AdjMatrix(a), theta, 0.9, 1.5);
  NetworkProblem p2(AdjMatrix(a), Vec(2.0 * theta), 0.9, 6.0);
  auto s1 = games::optimal_intervention(p1);
  auto s2 = games::optimal_intervention(p2);
  CHECK((s2.theta_hat - 2.0 * s1.theta_hat).norm() <=
        1e-13 * s1.theta_hat.norm());
}

TEST_CASE("hard case: theta orthogonal to the top eigenspace") {
  const Index n = 4;
  Mat a = Mat::Ones(n, n) - Mat::Identity(n, n);
  // top eigenvector of the complete graph is uniform; pick theta orthogonal
  Vec theta(n);
  theta << 1, -1, 0.5, -0.5;
  const double gamma = 0.9;
  const double budget = 2.0;
  NetworkProblem p(AdjMatrix(a), theta, gamma, budget);
  auto sol = games::optimal_intervention(p);
  CHECK(sol.hard_case);
  CHECK(std::abs(sol.theta_hat.squaredNorm() - budget) <= 1e-8 * budget);
  Vec candidate = oracles::projected_gradient_candidate(a, gamma, theta,
                                                        budget, 200, 500, 5);
  CHECK(sol.welfare >= games::welfare(p, candidate) - 1e-9);
}

TEST_CASE("cg path agrees with the dense path") {
  const Index n = 50;
  Mat a = random_adjacency(n, 0.2, 123);
  Vec theta = random_gaussian(n, 11);
  const double gamma = 0.8;
  const double budget = n / 2.0;
  NetworkProblem p(AdjMatrix(a), theta, gamma, budget);
  auto dense = games::optimal_intervention(p, 1e-10);
  auto cg = games::optimal_intervention_cg(p, 1e-8);
  CHECK((dense.theta_hat - cg.theta_hat).norm() <= 10.0 * 1e-8);
  CHECK(cg.budget_residual <= 1e-8 * budget);
}

TEST_CASE("cg path on the zero network reproduces the closed form") {
  const Index n = 12;
  SpMat a(n, n);
  Vec theta = random_gaussian(n, 13).cwiseAbs();
  const double budget = 3.0;
  NetworkProblem p(AdjMatrix(a), theta, 0.5, budget);
  auto sol = games::optimal_intervention_cg(p, 1e-10);
  Vec expect = std::sqrt(budget) * theta / theta.norm();
  CHECK((sol.theta_hat - expect).norm() < 1e-7);
}

TEST_CASE("cg path handles a large sparse sample") {
  Vec bp(1);
  bp << 0.5;
  Mat s(2, 2);
  s << 0.9, 0.3, 0.3, 0.9;
  auto model = GraphonModel::sbm(bp, s);
  SampledNetwork net = sample_network(model, 2048, 0.02, 2048);
  REQUIRE(!net.A.is_dense());
  Vec theta = net.xi.cwiseProduct(net.xi);
  const double budget = net.n / 2.0;
  NetworkProblem p(net.A, theta, 0.8, budget);
  const double tol = 1e-8;
  auto sol = games::optimal_intervention_cg(p, tol);
  CHECK(sol.budget_residual <= tol * budget);
}

TEST_CASE("cg hard case agrees with the dense hard case") {
  const Index n = 60;
  Mat a = random_adjacency(n, 0.3, 456);
  Vec theta = random_gaussian(n, 21);
  const double gamma = 0.8;
  NetworkProblem probe(AdjMatrix(a), theta, gamma, 1.0);
  // remove the component on the exact top eigenvector
  Vec vtop = probe.eigenvectors().col(n - 1);
  theta -= vtop * vtop.dot(theta);
  const double budget = 50.0;  // beyond the complement's reach at the pole
  NetworkProblem p(AdjMatrix(a), theta, gamma, budget);
  auto dense = games::optimal_intervention(p);
  auto cg = games::optimal_intervention_cg(p, 1e-8);
  CHECK(dense.hard_case == cg.hard_case);
  CHECK(std::abs(dense.welfare - cg.welfare) < 1e-7);
  CHECK(std::abs(cg.theta_hat.squaredNorm() - budget) <= 1e-7 * budget);
}

TEST_CASE("lowrank hard case lands in the operator complement") {
  // all operator eigenvalues negative, so the minimal mu sits on the
  // complement; theta lives entirely in the operator range, which forces the
  // hard case once the budget exceeds what the range can absorb at the pole
  Vec lengths(2);
  lengths << 0.5, 0.5;
  Mat values(2, 2);
  values << -0.4, 0.0, 0.0, -0.4;
  auto op = LowRankStepOperator::from_step_graphon(StepGraphon{lengths, values});
  REQUIRE((op.eigenvalues.array() < 0.0).all());

  Vec tvals(4);
  tvals << 1.0, 1.0, -2.0, -2.0;  // constant per operator cell
  StepFunction theta = StepFunction::uniform(tvals);
  const double gamma = 0.5;
  const double budget = 200.0;
  GraphonProblem p(op, theta, gamma, budget);
  auto sol = games::optimal_intervention_lowrank(p);
  CHECK(sol.hard_case);
  const double norm2 = std::pow(sol.theta_hat.l2_norm(), 2);
  CHECK(std::abs(norm2 - budget) <= 1e-8 * budget);
  // dominates the feasible candidate aligned with theta
  StepFunction candidate{theta.lengths,
                         std::sqrt(budget) / theta.l2_norm() * theta.values};
  CHECK(sol.welfare >= games::graphon_welfare(p, candidate) - 1e-9);
}

TEST_CASE("graphon problem rejects a violated spectral condition") {
  auto op = LowRankStepOperator::from_step_graphon(StepGraphon::constant(0.8));
  StepFunction theta = StepFunction::constant(1.0);
  CHECK_THROWS_AS(GraphonProblem(op, theta, 1.3, 1.0), ArgumentError);
}

TEST_CASE("lowrank solver on the zero operator") {
  StepFunction theta = StepFunction::uniform((Vec(4) << 1, 2, 3, 4).finished());
  LowRankStepOperator zero;
  zero.eigenvalues = Vec(0);
  zero.basis = Mat(4, 0);
  zero.lengths = theta.lengths;
  GraphonProblem p(zero, theta, 0.5, 0.25);
  auto sol = games::optimal_intervention_lowrank(p);
  const double tnorm = theta.l2_norm();
  for (Index i = 0; i < 4; ++i)
    CHECK(sol.theta_hat.values(i) ==
          doctest::Approx(0.5 * theta.values(i) / tnorm).epsilon(1e-9));
}

TEST_CASE("lowrank rank-1 constant graphon matches the dense discretization") {
  const double c = 0.6, gamma = 0.9, graphon_budget = 0.5;
  const Index m = 256;
  auto op = LowRankStepOperator::from_step_graphon(StepGraphon::constant(c));
  REQUIRE(op.rank() == 1);
  StepFunction theta = StepFunction::constant(1.3);
  GraphonProblem gp(op, theta, gamma, graphon_budget);
  auto gsol = games::optimal_intervention_lowrank(gp);

  // dense oracle: the same game on the uniform m-grid as a network problem
  Mat a = Mat::Constant(m, m, c);
  Vec theta_vec = Vec::Constant(m, 1.3);
  NetworkProblem np(AdjMatrix(a), theta_vec, gamma,
                    graphon_budget * static_cast<double>(m));
  auto nsol = games::optimal_intervention(np);
  // step values of the graphon solution equal the network coefficients
  CHECK(std::abs(gsol.theta_hat.at(0.3) - nsol.theta_hat(0)) < 1e-8);
  CHECK(std::abs(gsol.welfare - nsol.welfare) < 1e-8);
}

TEST_CASE("lowrank solver matches the dense solver on an svt estimate") {
  auto model = harness::sbm4_model(1234);
  const Index n = 150;
  SampledNetwork net = sample_network(model, n, 1.0, 55);
  Vec theta = net.xi.cwiseProduct(net.xi);
  const double gamma = 0.8, budget = n / 2.0;

  svt::SvtEstimate est =
      svt::svt(net.A.op(), 2.0 * std::sqrt(static_cast<double>(n)), 3);
  REQUIRE(est.rank() >= 1);
  auto op = LowRankStepOperator::from_svt(est);
  GraphonProblem gp(op, StepFunction::uniform(theta), gamma,
                    budget / static_cast<double>(n));
  auto gsol = games::optimal_intervention_lowrank(gp);

  NetworkProblem np(AdjMatrix(est.symmetrized()), theta, gamma, budget);
  auto nsol = games::optimal_intervention(np);

  // both live on the uniform n-partition
  Refinement r = refine(Vec::Constant(n, 1.0 / n), gsol.theta_hat.lengths);
  Vec mapped = Vec::Zero(n);
  for (Index cidx = 0; cidx < r.lengths.size(); ++cidx)
    mapped(r.map1[static_cast<std::size_t>(cidx)]) +=
        static_cast<double>(n) * r.lengths(cidx) *
        gsol.theta_hat.values(r.map2[static_cast<std::size_t>(cidx)]);
  CHECK((mapped - nsol.theta_hat).norm() < 1e-6);
  CHECK(std::abs(gsol.welfare - nsol.welfare) < 1e-6);
}

TEST_CASE("network and empirical-graphon welfare agree") {
  const Index n = 20;
  Mat a = random_adjacency(n, 0.5, 31);
  Vec theta = random_gaussian(n, 14).cwiseAbs();
  Vec hat = random_gaussian(n, 15);
  const double gamma = 0.8, budget = 4.0;
  NetworkProblem np(AdjMatrix(a), theta, gamma, budget);
  auto op = LowRankStepOperator::from_step_graphon(empirical_graphon(a));
  GraphonProblem gp(op, StepFunction::uniform(theta), gamma,
                    budget / static_cast<double>(n));
  CHECK(std::abs(games::welfare(np, hat) -
                 games::graphon_welfare(gp, StepFunction::uniform(hat))) <
        1e-10);
}

TEST_CASE("transfer from a network's own empirical graphon is exact") {
  const Index n = 40;
  Mat a = random_adjacency(n, 0.4, 91);
  Vec theta = random_gaussian(n, 16).cwiseAbs();
  NetworkProblem p(AdjMatrix(a), theta, 0.8, n / 2.0);
  auto exact_op = LowRankStepOperator::from_step_graphon(empirical_graphon(a));
  Vec transferred = games::transfer_interventions(p, exact_op, 1.0);
  auto sol = games::optimal_intervention(p);
  CHECK((transferred - sol.theta_hat).norm() < 1e-8);
}

TEST_CASE("transfer constant pipeline matches the rank-1 closed form") {
  auto model = GraphonModel::named("constant", 0.6);
  const Index n = 100;
  SampledNetwork net = sample_network(model, n, 1.0, 77);
  Vec theta = Vec::Constant(n, 0.8);
  const double budget = n / 2.0;
  NetworkProblem p(net.A, theta, 0.9, budget);
  auto op = LowRankStepOperator::from_step_graphon(StepGraphon::constant(0.6));
  Vec transferred = games::transfer_interventions(p, op, 1.0);
  const double expect = std::sqrt(budget / static_cast<double>(n));
  for (Index i = 0; i < n; ++i)
    CHECK(std::abs(transferred(i) - expect) < 1e-9);
}

TEST_CASE("transfer rejects a scaled estimator violating the condition") {
  const Index n = 30;
  Mat a = random_adjacency(n, 0.4, 15);
  Vec theta = random_gaussian(n, 17);
  NetworkProblem p(AdjMatrix(a), theta, 0.9, 1.0);
  auto op = LowRankStepOperator::from_step_graphon(StepGraphon::constant(0.9));
  CHECK_THROWS_AS(games::transfer_interventions(p, op, 5.0), NumericalError);
}

TEST_CASE("sparsity ratio trivia and fixtures") {
  auto model = GraphonModel::named("constant", 0.5);
  SampledNetwork net = sample_network(model, 200, 0.8, 5);
  CHECK(games::estimate_sparsity_ratio(net, net) == doctest::Approx(1.0));

  auto ones = GraphonModel::named("constant", 1.0);
  SampledNetwork big = sample_network(ones, 120, 1.0, 6);
  SampledNetwork small = sample_network(ones, 60, 1.0, 7);
  CHECK(games::estimate_sparsity_ratio(big, small) == doctest::Approx(1.0));

  SampledNetwork bigf = sample_network(model, 600, 0.8, 8);
  SampledNetwork smallf = sample_network(model, 300, 0.4, 9);
  const double est = games::estimate_sparsity_ratio(bigf, smallf);
  const double q1 = 0.5 * 0.8, q2 = 0.5 * 0.4;
  const double pairs1 = 600.0 * 599.0 / 2.0, pairs2 = 300.0 * 299.0 / 2.0;
  const double rel_se = std::sqrt((1.0 - q1) / (q1 * 2.0 * pairs1) +
                                  (1.0 - q2) / (q2 * 2.0 * pairs2));
  CHECK(std::abs(est - 2.0) <= 3.0 * 2.0 * rel_se);

  auto zeros = GraphonModel::named("constant", 0.0);
  SampledNetwork empty = sample_network(zeros, 50, 1.0, 10);
  CHECK_THROWS_AS(games::estimate_sparsity_ratio(big, empty), ArgumentError);
}

TEST_CASE("suboptimality bound trivia") {
  auto zero = games::suboptimality_bound(0.5, 0.6, 0.0, 0.9, 1.0, 2.0);
  CHECK(zero.theta_gap == 0.0);
  CHECK(zero.welfare_gap == 0.0);

  const double gamma = 1e-9;
  auto tiny = games::suboptimality_bound(0.5, 0.6, 0.2, gamma, 1.0, 2.0);
  const double linear = 2.0 * gamma * 0.2 * (1.0 + std::sqrt(2.0));
  CHECK(tiny.theta_gap == doctest::Approx(linear).epsilon(1e-6));

  CHECK_THROWS_AS(games::suboptimality_bound(2.0, 0.5, 0.1, 1.0, 1.0, 1.0),
                  ArgumentError);
}

TEST_CASE("measured gaps never exceed the stability bounds") {
  for (int inst = 0; inst < 20; ++inst) {
    StepGraphon g1 = random_symmetric_step(5000 + inst, 8);
    StepGraphon g2 = random_symmetric_step(6000 + inst, 8);
    auto op1 = LowRankStepOperator::from_step_graphon(g1);
    auto op2 = LowRankStepOperator::from_step_graphon(g2);
    const double n1 = op1.opnorm(), n2 = op2.opnorm();
    CounterRng rng(7000 + inst);
    const double gamma = (0.3 + 0.6 * rng.uniform01(0)) / std::max(n1, n2);
    const double budget = 0.1 + 2.0 * rng.uniform01(1);
    Vec tvals(8);
    for (Index i = 0; i < 8; ++i) tvals(i) = rng.gaussian(10 + i);
    StepFunction theta = StepFunction::uniform(tvals);

    GraphonProblem p1(op1, theta, gamma, budget);
    GraphonProblem p2(op2, theta, gamma, budget);
    auto s1 = games::optimal_intervention_lowrank(p1);
    auto s2 = games::optimal_intervention_lowrank(p2);

    const double dist = step_graphon_distance(g1, g2);
    auto bound = games::suboptimality_bound(n1, n2, dist, gamma,
                                            theta.l2_norm(), budget);

    StepFunction diff{s1.theta_hat.lengths,
                      s1.theta_hat.values - s2.theta_hat.values};
    CHECK(diff.l2_norm() <= bound.theta_gap + 1e-9);

    const double t1_at_1 = s1.welfare;
    const double t1_at_2 = games::graphon_welfare(p1, s2.theta_hat);
    CHECK(t1_at_1 - t1_at_2 >= -1e-9);
    CHECK(t1_at_1 - t1_at_2 <= bound.welfare_gap + 1e-9);
  }
}

TEST_SUITE_END();
