#include "graphon/games.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>
#include <vector>

#include "graphon/errors.hpp"

namespace graphon::games {

using nlohmann::json;

namespace {

constexpr std::uint64_t kLanczosSeed = 0x10E1A5EEDULL;

// ---------------------------------------------------------------------------
// Secular equation psi(L) = sum_i c_i^2 / (1 + L mu_i^2)^2 = budget on the
// interval (-inf, L_sup), L_sup = -1/mu_min^2. There psi is strictly
// increasing from 0 to +inf (when the top coefficient is nonzero), so the
// root is unique. The hard case (theta orthogonal to the minimal-mu
// eigenspace with psi bounded above by the budget) pins L = L_sup and spends
// the leftover budget along the top direction.
// ---------------------------------------------------------------------------

struct SecularResult {
  double lagrange = 0.0;
  Vec a;               // coefficients -c_i / (1 + L mu_i^2)
  double t = 0.0;      // extra mass along the top direction (hard case)
  Index top_index = -1;
  bool hard_case = false;
};

SecularResult solve_secular(const Vec& mu, const Vec& c, double budget) {
  const Index m = mu.size();
  if (m == 0) throw NumericalError("secular: empty spectrum");
  if ((mu.array() <= 0.0).any())
    throw NumericalError("secular: spectral condition yields nonpositive mu");
  if (!(budget > 0.0)) throw NumericalError("secular: budget must be > 0");

  const double mu_min = mu.minCoeff();
  const double l_sup = -1.0 / (mu_min * mu_min);

  std::vector<bool> top(static_cast<std::size_t>(m), false);
  double c_top_sq = 0.0;
  Index top_index = -1;
  for (Index i = 0; i < m; ++i) {
    if (mu(i) <= mu_min * (1.0 + 1e-12)) {
      top[static_cast<std::size_t>(i)] = true;
      c_top_sq += c(i) * c(i);
      top_index = i;
    }
  }

  auto psi = [&](double lag, bool skip_top) {
    double s = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (skip_top && top[static_cast<std::size_t>(i)]) continue;
      const double d = 1.0 + lag * mu(i) * mu(i);
      s += c(i) * c(i) / (d * d);
    }
    return s;
  };
  auto coeffs = [&](double lag, bool zero_top) {
    Vec a(m);
    for (Index i = 0; i < m; ++i) {
      if (zero_top && top[static_cast<std::size_t>(i)]) {
        a(i) = 0.0;
        continue;
      }
      const double d = 1.0 + lag * mu(i) * mu(i);
      a(i) = std::abs(d) < 1e-300 ? 0.0 : -c(i) / d;
    }
    return a;
  };

  auto bisect = [&](double lo, double hi, bool skip_top) {
    // Maintains psi(lo) <= budget <= psi(hi). Runs to bracket collapse: the
    // welfare is first-order sensitive to |psi - budget| through the
    // multiplier, so stopping at a loose budget residual is not enough.
    double best = hi;
    double best_err = std::abs(psi(hi, skip_top) - budget);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double p = psi(mid, skip_top);
      const double err = std::abs(p - budget);
      if (err < best_err) {
        best_err = err;
        best = mid;
      }
      if (err == 0.0) break;
      if (p < budget)
        lo = mid;
      else
        hi = mid;
    }
    return best;
  };

  SecularResult res;
  res.top_index = top_index;

  const double tol_degenerate = 1e-11 * std::max(c.norm(), 1e-100);
  bool degenerate = std::sqrt(c_top_sq) <= tol_degenerate;

  if (!degenerate) {
    // Geometric bracket expansion (factor 4) starting from L = 2 * l_sup.
    double d_hi = -l_sup;
    int guard = 0;
    while (psi(l_sup - d_hi, false) < budget) {
      d_hi /= 4.0;
      if (++guard > 600 || l_sup - d_hi == l_sup) {
        degenerate = true;  // top coefficient too small to reach the budget
        break;
      }
    }
    if (!degenerate) {
      double d_lo = d_hi;
      guard = 0;
      while (psi(l_sup - d_lo, false) > budget) {
        d_lo *= 4.0;
        if (++guard > 600)
          throw NumericalError("secular: bracket expansion failed");
      }
      res.lagrange = bisect(l_sup - d_lo, l_sup - d_hi, false);
      res.a = coeffs(res.lagrange, false);
      return res;
    }
  }

  // theta has (numerically) no component on the top eigenspace.
  const double psi_lim = psi(l_sup, true);
  if (psi_lim >= budget) {
    double d_lo = -l_sup;
    int guard = 0;
    while (psi(l_sup - d_lo, true) > budget) {
      d_lo *= 4.0;
      if (++guard > 600)
        throw NumericalError("secular: bracket expansion failed");
    }
    res.lagrange = bisect(l_sup - d_lo, l_sup, true);
    res.a = coeffs(res.lagrange, true);
    return res;
  }

  res.hard_case = true;
  res.lagrange = l_sup;
  res.a = coeffs(l_sup, true);
  res.t = std::sqrt(std::max(0.0, budget - res.a.squaredNorm()));
  return res;
}

}  // namespace

// ---------------------------------------------------------------------------
// LowRankStepOperator
// ---------------------------------------------------------------------------

LowRankStepOperator LowRankStepOperator::scaled(double factor) const {
  LowRankStepOperator out = *this;
  out.eigenvalues *= factor;
  return out;
}

LowRankStepOperator LowRankStepOperator::from_step_graphon(
    const StepGraphon& g) {
  const Vec d = g.lengths.cwiseSqrt();
  Mat scaled = d.asDiagonal() * g.values * d.asDiagonal();
  if (!scaled.isApprox(scaled.transpose(), 1e-12))
    throw ArgumentError("from_step_graphon: value matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(scaled);
  LowRankStepOperator op;
  op.lengths = g.lengths;
  op.eigenvalues = es.eigenvalues();
  // Eigenfunction phi_j is the step function with cell values y_j / sqrt(d):
  // then <phi_i, phi_j>_{L2} = y_i . y_j.
  op.basis = es.eigenvectors();
  for (Index i = 0; i < d.size(); ++i) op.basis.row(i) /= d(i);
  return op;
}

LowRankStepOperator LowRankStepOperator::from_svt(const svt::SvtEstimate& e) {
  const Index n = e.n;
  const Index r = e.rank();
  LowRankStepOperator op;
  op.lengths = Vec::Constant(n, 1.0 / static_cast<double>(n));
  if (r == 0) {
    op.eigenvalues = Vec(0);
    op.basis = Mat(n, 0);
    return op;
  }
  // Orthonormal basis of span(U, V), then the symmetrized reconstruction
  // restricted to it: a small eigenproblem instead of n x n. The SVD route
  // handles the u ~ +-v near-dependence of symmetric inputs.
  Mat uv(n, 2 * r);
  for (Index j = 0; j < r; ++j) {
    uv.col(j) = e.triples[static_cast<std::size_t>(j)].u;
    uv.col(r + j) = e.triples[static_cast<std::size_t>(j)].v;
  }
  Eigen::BDCSVD<Mat> basis_svd(uv, Eigen::ComputeThinU);
  const Vec& sv = basis_svd.singularValues();
  Index kept = 0;
  while (kept < sv.size() && sv(kept) > 1e-10 * sv(0)) ++kept;
  Mat qk = basis_svd.matrixU().leftCols(kept);

  // small = qk^T sym(Q_hat) qk with sym(Q_hat) = (U S V^T + V S U^T) / 2.
  Mat qtu(qk.cols(), r), qtv(qk.cols(), r);
  for (Index j = 0; j < r; ++j) {
    qtu.col(j) = qk.transpose() * e.triples[static_cast<std::size_t>(j)].u;
    qtv.col(j) = qk.transpose() * e.triples[static_cast<std::size_t>(j)].v;
  }
  Vec sig(r);
  for (Index j = 0; j < r; ++j) sig(j) = e.triples[static_cast<std::size_t>(j)].sigma;
  Mat small = 0.5 * (qtu * sig.asDiagonal() * qtv.transpose() +
                     qtv * sig.asDiagonal() * qtu.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(small);

  // Operator eigenvalues of the empirical graphon scale by 1/n; step values
  // of unit-L2 eigenfunctions scale by sqrt(n).
  op.eigenvalues = es.eigenvalues() / static_cast<double>(n);
  op.basis = std::sqrt(static_cast<double>(n)) * (qk * es.eigenvectors());
  return op;
}

// ---------------------------------------------------------------------------
// NetworkProblem
// ---------------------------------------------------------------------------

NetworkProblem::NetworkProblem(AdjMatrix a, Vec theta, double gamma,
                               double budget)
    : a_(std::move(a)), theta_(std::move(theta)), gamma_(gamma),
      budget_(budget) {
  const Index n = a_.n();
  if (n < 1) throw ArgumentError("NetworkProblem: empty network");
  if (theta_.size() != n)
    throw ArgumentError("NetworkProblem: theta size does not match network");
  if (gamma_ < 0.0) throw ArgumentError("NetworkProblem: gamma must be >= 0");
  if (budget_ < 0.0) throw ArgumentError("NetworkProblem: budget must be >= 0");

  if (n <= kDenseEigCutoff && a_.is_dense()) {
    const Mat& dense = a_.dense();
    if (!dense.isApprox(dense.transpose(), 1e-12))
      throw ArgumentError("NetworkProblem: adjacency matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(dense);
    eig_ = Eig{es.eigenvalues(), es.eigenvectors()};
    lambda_max_ = eig_->values(n - 1);
    opnorm_ = std::max(std::abs(eig_->values(0)), std::abs(lambda_max_));
    top_vec_ = eig_->vectors.col(n - 1);
  } else {
    auto [lmax, v] = spectral::top_eigenpair(a_.op(), 500, 1e-11, kLanczosSeed);
    lambda_max_ = lmax;
    top_vec_ = v;
    auto neg = [this](const Vec& x) { return Vec(-a_.apply(x)); };
    auto [lmax_neg, v2] =
        spectral::top_eigenpair_op(neg, n, 500, 1e-11, kLanczosSeed);
    (void)v2;
    opnorm_ = std::max(lambda_max_, lmax_neg);
  }

  const double ratio = gamma_ * opnorm_ / static_cast<double>(n);
  if (ratio >= 1.0) {
    std::ostringstream msg;
    msg << "NetworkProblem: spectral condition violated, gamma*||A||_op/n = "
        << ratio;
    throw ArgumentError(msg.str());
  }
}

Vec NetworkProblem::apply_m(const Vec& x) const {
  return x - (gamma_ / static_cast<double>(n())) * a_.apply(x);
}

// ---------------------------------------------------------------------------
// Equilibrium and welfare
// ---------------------------------------------------------------------------

Vec equilibrium(const NetworkProblem& p, const Vec& intervention) {
  if (intervention.size() != p.n())
    throw ArgumentError("equilibrium: intervention size mismatch");
  const Vec f = p.theta() + intervention;
  Vec s;
  if (p.dense_path()) {
    Vec w = p.eigenvectors().transpose() * f;
    const Vec mu = (1.0 - (p.gamma() / static_cast<double>(p.n())) *
                              p.eigenvalues().array())
                       .matrix();
    s = p.eigenvectors() * (w.array() / mu.array()).matrix();
  } else {
    s = spectral::cg_solve([&p](const Vec& x) { return p.apply_m(x); }, f,
                           1e-12, 50000);
  }
  const double res = (p.apply_m(s) - f).norm();
  if (res > 1e-8 * std::max(f.norm(), 1e-300)) {
    std::ostringstream msg;
    msg << "equilibrium: residual " << res << " exceeds tolerance";
    throw NumericalError(msg.str());
  }
  return s;
}

double welfare(const NetworkProblem& p, const Vec& intervention) {
  const Vec s = equilibrium(p, intervention);
  return 0.5 * s.squaredNorm() / static_cast<double>(p.n());
}

// ---------------------------------------------------------------------------
// Dense-path solver
// ---------------------------------------------------------------------------

namespace {

InterventionSolution zero_budget_solution(const NetworkProblem& p) {
  InterventionSolution sol;
  sol.theta_hat = Vec::Zero(p.n());
  sol.zero_budget = true;
  sol.equilibrium = equilibrium(p, sol.theta_hat);
  sol.welfare = 0.5 * sol.equilibrium.squaredNorm() / static_cast<double>(p.n());
  return sol;
}

}  // namespace

InterventionSolution optimal_intervention(const NetworkProblem& p,
                                          double tol) {
  if (!p.dense_path())
    throw ArgumentError(
        "optimal_intervention: no dense eigendecomposition at this size, use "
        "optimal_intervention_cg");
  if (p.budget() == 0.0) return zero_budget_solution(p);

  const Index n = p.n();
  const Vec mu = (1.0 - (p.gamma() / static_cast<double>(n)) *
                            p.eigenvalues().array())
                     .matrix();
  const Vec c = p.eigenvectors().transpose() * p.theta();
  SecularResult sec = solve_secular(mu, c, p.budget());

  InterventionSolution sol;
  sol.lagrange = sec.lagrange;
  sol.hard_case = sec.hard_case;
  sol.theta_hat = p.eigenvectors() * sec.a;
  Vec scoef = (c + sec.a).cwiseQuotient(mu);
  if (sec.t != 0.0) {
    sol.theta_hat += sec.t * p.eigenvectors().col(sec.top_index);
    scoef(sec.top_index) += sec.t / mu(sec.top_index);
  }
  sol.equilibrium = p.eigenvectors() * scoef;
  sol.welfare = 0.5 * scoef.squaredNorm() / static_cast<double>(n);
  sol.budget_residual = std::abs(sol.theta_hat.squaredNorm() - p.budget());
  if (!sol.hard_case && sol.budget_residual > tol * p.budget()) {
    std::ostringstream msg;
    msg << "optimal_intervention: budget residual " << sol.budget_residual
        << " exceeds " << tol << " * B";
    throw NumericalError(msg.str());
  }
  return sol;
}

// ---------------------------------------------------------------------------
// CG-path solver
// ---------------------------------------------------------------------------

InterventionSolution optimal_intervention_cg(const NetworkProblem& p,
                                             double tol, int max_iters) {
  if (p.budget() == 0.0) return zero_budget_solution(p);
  const Index n = p.n();
  const double budget = p.budget();
  const double mu_min = 1.0 - p.gamma() * p.lambda_max() / static_cast<double>(n);
  const double l_sup = -1.0 / (mu_min * mu_min);
  const double cg_tol = 1e-12;

  // theta_hat(L) = -[I + L M^2]^{-1} theta solves (-I - L M^2) x = theta,
  // an SPD system for L < l_sup.
  auto solve_at = [&](double lag) {
    auto op = [&p, lag](const Vec& x) {
      return Vec(-x - lag * p.apply_m(p.apply_m(x)));
    };
    return spectral::cg_solve(op, p.theta(), cg_tol, max_iters);
  };

  const Vec& vtop = p.top_eigvec();
  const double c_top = vtop.dot(p.theta());
  const double tol_degenerate = 1e-11 * std::max(p.theta().norm(), 1e-100);
  bool degenerate = std::abs(c_top) <= tol_degenerate;

  InterventionSolution sol;
  if (!degenerate) {
    // Near-degenerate instances push the bracket endpoint into the pole,
    // where the system turns numerically singular; treat a CG failure there
    // the same as an unreachable budget.
    double d_hi = -l_sup;
    int guard = 0;
    bool ok = true;
    try {
      while (solve_at(l_sup - d_hi).squaredNorm() < budget) {
        d_hi /= 4.0;
        if (++guard > 200 || l_sup - d_hi == l_sup) {
          ok = false;
          break;
        }
      }
    } catch (const NumericalError&) {
      ok = false;
    }
    if (ok) {
      double d_lo = d_hi;
      guard = 0;
      while (solve_at(l_sup - d_lo).squaredNorm() > budget) {
        d_lo *= 4.0;
        if (++guard > 200)
          throw NumericalError("optimal_intervention_cg: bracket failed");
      }
      // Illinois secant on g(L) = ||x(L)||^{-1} - budget^{-1/2}, which is
      // decreasing and close to linear near the pole.
      double lo = l_sup - d_lo, hi = l_sup - d_hi;
      Vec x_lo = solve_at(lo), x_hi = solve_at(hi);
      double g_lo = 1.0 / x_lo.norm() - 1.0 / std::sqrt(budget);
      double g_hi = 1.0 / x_hi.norm() - 1.0 / std::sqrt(budget);
      Vec x = x_hi;
      double lag = hi;
      int side = 0;
      for (int it = 0; it < 200; ++it) {
        if (std::abs(x.squaredNorm() - budget) <= tol * budget) break;
        double cand = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if (!std::isfinite(cand) || cand <= lo || cand >= hi)
          cand = 0.5 * (lo + hi);
        x = solve_at(cand);
        lag = cand;
        const double g = 1.0 / x.norm() - 1.0 / std::sqrt(budget);
        if (g > 0.0) {
          lo = cand;
          g_lo = g;
          if (side == 1) g_hi *= 0.5;
          side = 1;
        } else {
          hi = cand;
          g_hi = g;
          if (side == -1) g_lo *= 0.5;
          side = -1;
        }
      }
      if (std::abs(x.squaredNorm() - budget) > tol * budget) {
        std::ostringstream msg;
        msg << "optimal_intervention_cg: secular iteration stalled, "
            << "|  ||theta_hat||^2 - B | = "
            << std::abs(x.squaredNorm() - budget);
        throw NumericalError(msg.str());
      }
      sol.theta_hat = x;
      sol.lagrange = lag;
      sol.equilibrium = equilibrium(p, sol.theta_hat);
      sol.welfare =
          0.5 * sol.equilibrium.squaredNorm() / static_cast<double>(n);
      sol.budget_residual = std::abs(x.squaredNorm() - budget);
      return sol;
    }
    degenerate = true;
  }

  // Degenerate path: solve on the complement of the top eigenvector with a
  // deflated operator at L = l_sup.
  auto deflate = [&vtop](const Vec& x) { return Vec(x - vtop * vtop.dot(x)); };
  auto solve_deflated = [&](double lag) {
    auto op = [&](const Vec& x) {
      Vec px = deflate(x);
      Vec y = -px - lag * p.apply_m(p.apply_m(px));
      return deflate(y);
    };
    return spectral::cg_solve(op, deflate(p.theta()), cg_tol, max_iters);
  };

  Vec x_perp = solve_deflated(l_sup);
  if (x_perp.squaredNorm() >= budget) {
    // Interior root of the deflated problem.
    double d_lo = -l_sup;
    int guard = 0;
    while (solve_deflated(l_sup - d_lo).squaredNorm() > budget) {
      d_lo *= 4.0;
      if (++guard > 200)
        throw NumericalError("optimal_intervention_cg: bracket failed");
    }
    double lo = l_sup - d_lo, hi = l_sup;
    Vec x = x_perp;
    double lag = hi;
    for (int it = 0; it < 200; ++it) {
      if (std::abs(x.squaredNorm() - budget) <= tol * budget) break;
      const double mid = 0.5 * (lo + hi);
      x = solve_deflated(mid);
      lag = mid;
      if (x.squaredNorm() < budget)
        lo = mid;
      else
        hi = mid;
    }
    sol.theta_hat = x;
    sol.lagrange = lag;
  } else {
    sol.hard_case = true;
    sol.lagrange = l_sup;
    const double t = std::sqrt(budget - x_perp.squaredNorm());
    sol.theta_hat = x_perp + t * vtop;
  }
  sol.equilibrium = equilibrium(p, sol.theta_hat);
  sol.welfare = 0.5 * sol.equilibrium.squaredNorm() / static_cast<double>(n);
  sol.budget_residual = std::abs(sol.theta_hat.squaredNorm() - budget);
  return sol;
}

InterventionSolution solve_network_intervention(const NetworkProblem& p,
                                                double tol) {
  return p.dense_path() ? optimal_intervention(p, tol)
                        : optimal_intervention_cg(p, std::max(tol, 1e-9));
}

// ---------------------------------------------------------------------------
// Graphon problems
// ---------------------------------------------------------------------------

GraphonProblem::GraphonProblem(LowRankStepOperator op, StepFunction theta,
                               double gamma, double budget)
    : op_(std::move(op)), theta_(std::move(theta)), gamma_(gamma),
      budget_(budget) {
  if (gamma_ < 0.0) throw ArgumentError("GraphonProblem: gamma must be >= 0");
  if (budget_ < 0.0)
    throw ArgumentError("GraphonProblem: budget must be >= 0");
  const double ratio = gamma_ * op_.opnorm();
  if (ratio >= 1.0) {
    std::ostringstream msg;
    msg << "GraphonProblem: spectral condition violated, gamma*||W||_op = "
        << ratio;
    throw ArgumentError(msg.str());
  }
}

namespace {

// theta and the operator basis mapped onto a common refinement.
struct ProjectedTheta {
  Vec lengths;      // refined partition
  Mat phi;          // refined cell values of the eigenfunctions
  Vec theta_vals;   // refined cell values of theta
  Vec c;            // <theta, phi_j>
  Vec residual;     // theta - sum c_j phi_j (cell values)
  double c0 = 0.0;  // L2 norm of the residual
};

ProjectedTheta project_theta(const LowRankStepOperator& op,
                             const StepFunction& theta) {
  Refinement r = refine(op.lengths, theta.lengths);
  const Index cells = r.lengths.size();
  const Index rank = op.rank();
  ProjectedTheta out;
  out.lengths = r.lengths;
  out.phi.resize(cells, rank);
  out.theta_vals.resize(cells);
  for (Index cidx = 0; cidx < cells; ++cidx) {
    out.phi.row(cidx) = op.basis.row(r.map1[static_cast<std::size_t>(cidx)]);
    out.theta_vals(cidx) = theta.values(r.map2[static_cast<std::size_t>(cidx)]);
  }
  out.c = out.phi.transpose() * out.lengths.cwiseProduct(out.theta_vals);
  out.residual = out.theta_vals - out.phi * out.c;
  out.c0 = std::sqrt(std::max(
      0.0, out.lengths.dot(out.residual.cwiseProduct(out.residual))));
  return out;
}

// Unit-L2 step function on `lengths` orthogonal to the columns of phi and to
// `extra`; used for the hard case when the top of the spectrum is the
// complement of the operator range.
Vec complement_direction(const Vec& lengths, const Mat& phi,
                         const Vec& extra) {
  const Index cells = lengths.size();
  for (Index k = 0; k < cells; ++k) {
    Vec cand = Vec::Zero(cells);
    cand(k) = 1.0 / std::sqrt(lengths(k));
    Vec proj = phi.transpose() * lengths.cwiseProduct(cand);
    cand -= phi * proj;
    const double e2 = lengths.dot(extra.cwiseProduct(extra));
    if (e2 > 1e-30) {
      const double ip = lengths.dot(extra.cwiseProduct(cand));
      cand -= (ip / e2) * extra;
    }
    const double norm = std::sqrt(lengths.dot(cand.cwiseProduct(cand)));
    if (norm > 1e-6) return cand / norm;
  }
  throw NumericalError(
      "hard case: no direction orthogonal to the operator range; refine the "
      "partition");
}

}  // namespace

StepFunction graphon_equilibrium(const GraphonProblem& p,
                                 const StepFunction& intervention) {
  // Put everything on one partition, then use the spectral split: the
  // resolvent acts as 1/(1 - gamma eta_j) on phi_j and as identity on the
  // complement.
  Refinement r0 = refine(p.theta().lengths, intervention.lengths);
  Vec f_vals(r0.lengths.size());
  for (Index i = 0; i < r0.lengths.size(); ++i)
    f_vals(i) = p.theta().values(r0.map1[static_cast<std::size_t>(i)]) +
                intervention.values(r0.map2[static_cast<std::size_t>(i)]);
  StepFunction f{r0.lengths, f_vals};

  ProjectedTheta pt = project_theta(p.op(), f);
  const Vec mu =
      (1.0 - p.gamma() * p.op().eigenvalues.array()).matrix();
  Vec s_vals = pt.residual;
  if (p.op().rank() > 0)
    s_vals += pt.phi * (pt.c.array() / mu.array()).matrix();
  return {pt.lengths, s_vals};
}

double graphon_welfare(const GraphonProblem& p,
                       const StepFunction& intervention) {
  StepFunction s = graphon_equilibrium(p, intervention);
  const double norm = s.l2_norm();
  return 0.5 * norm * norm;
}

GraphonSolution optimal_intervention_lowrank(const GraphonProblem& p,
                                             double tol) {
  GraphonSolution sol;
  if (p.budget() == 0.0) {
    sol.theta_hat = StepFunction{p.theta().lengths,
                                 Vec::Zero(p.theta().values.size())};
    sol.zero_budget = true;
    sol.equilibrium = graphon_equilibrium(p, sol.theta_hat);
    const double norm = sol.equilibrium.l2_norm();
    sol.welfare = 0.5 * norm * norm;
    return sol;
  }

  ProjectedTheta pt = project_theta(p.op(), p.theta());
  const Index rank = p.op().rank();

  // Components: the r eigenfunctions plus the residual direction, with
  // mu = 1 on the complement.
  Vec mu(rank + 1), c(rank + 1);
  for (Index j = 0; j < rank; ++j) {
    mu(j) = 1.0 - p.gamma() * p.op().eigenvalues(j);
    c(j) = pt.c(j);
  }
  mu(rank) = 1.0;
  c(rank) = pt.c0;

  SecularResult sec = solve_secular(mu, c, p.budget());

  Vec theta_hat_vals = Vec::Zero(pt.lengths.size());
  if (rank > 0) theta_hat_vals += pt.phi * sec.a.head(rank);
  if (pt.c0 > 0.0) theta_hat_vals += (sec.a(rank) / pt.c0) * pt.residual;

  // Coefficients of the equilibrium on the orthonormal directions
  // {phi_1..phi_r, residual direction}; the hard-case mass t goes either to
  // a phi_j or to a fresh complement direction orthogonal to everything.
  Vec scoef = (c + sec.a).cwiseQuotient(mu);
  double extra_coef = 0.0;
  Vec extra_dir;
  if (sec.t != 0.0) {
    if (sec.top_index < rank) {
      extra_dir = pt.phi.col(sec.top_index);
      scoef(sec.top_index) += sec.t / mu(sec.top_index);
    } else {
      Vec res_unit = pt.c0 > 0.0 ? Vec(pt.residual / pt.c0)
                                 : Vec(Vec::Zero(pt.lengths.size()));
      extra_dir = complement_direction(pt.lengths, pt.phi, res_unit);
      extra_coef = sec.t / mu(rank);
    }
    theta_hat_vals += sec.t * extra_dir;
  }

  sol.theta_hat = StepFunction{pt.lengths, theta_hat_vals};
  sol.lagrange = sec.lagrange;
  sol.hard_case = sec.hard_case;

  Vec s_vals = Vec::Zero(pt.lengths.size());
  if (rank > 0) s_vals += pt.phi * scoef.head(rank);
  if (pt.c0 > 0.0) s_vals += (scoef(rank) / pt.c0) * pt.residual;
  if (extra_coef != 0.0) s_vals += extra_coef * extra_dir;
  sol.equilibrium = StepFunction{pt.lengths, s_vals};
  sol.welfare = 0.5 * (scoef.squaredNorm() + extra_coef * extra_coef);
  const double bn = sol.theta_hat.l2_norm();
  sol.budget_residual = std::abs(bn * bn - p.budget());
  if (!sol.hard_case && sol.budget_residual > tol * p.budget()) {
    std::ostringstream msg;
    msg << "optimal_intervention_lowrank: budget residual "
        << sol.budget_residual << " exceeds " << tol << " * B";
    throw NumericalError(msg.str());
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Transfer pipeline
// ---------------------------------------------------------------------------

Vec transfer_interventions(const NetworkProblem& big,
                           const LowRankStepOperator& est,
                           double sparsity_ratio, bool point_eval,
                           GraphonSolution* detail) {
  if (!(sparsity_ratio > 0.0))
    throw ArgumentError("transfer: sparsity ratio must be > 0");
  const Index n_big = big.n();
  LowRankStepOperator scaled = est.scaled(sparsity_ratio);
  const double cond = big.gamma() * scaled.opnorm();
  if (cond >= 1.0) {
    std::ostringstream msg;
    msg << "transfer: scaled estimator violates gamma * (rho_N/rho_n) * "
           "||W_hat||_op < 1 (value "
        << cond << ")";
    throw NumericalError(msg.str());
  }

  StepFunction theta_tilde = StepFunction::uniform(big.theta());
  GraphonProblem gp(std::move(scaled), std::move(theta_tilde), big.gamma(),
                    big.budget() / static_cast<double>(n_big));
  GraphonSolution gs = optimal_intervention_lowrank(gp);

  // Cell averages theta'_i = N * integral of t-hat over cell i (default), or
  // evaluation at the right endpoint of each cell behind the flag.
  Vec lengths_big = Vec::Constant(n_big, 1.0 / static_cast<double>(n_big));
  Refinement r = refine(lengths_big, gs.theta_hat.lengths);
  Vec out = Vec::Zero(n_big);
  if (point_eval) {
    for (Index cidx = 0; cidx < r.lengths.size(); ++cidx)
      out(r.map1[static_cast<std::size_t>(cidx)]) =
          gs.theta_hat.values(r.map2[static_cast<std::size_t>(cidx)]);
    // the last refined cell within each big cell wins = value just left of i/N
  } else {
    for (Index cidx = 0; cidx < r.lengths.size(); ++cidx)
      out(r.map1[static_cast<std::size_t>(cidx)]) +=
          r.lengths(cidx) *
          gs.theta_hat.values(r.map2[static_cast<std::size_t>(cidx)]);
    out *= static_cast<double>(n_big);
  }
  if (detail) *detail = std::move(gs);
  return out;
}

double estimate_sparsity_ratio(const SampledNetwork& big,
                               const SampledNetwork& small) {
  if (big.n < 2 || small.n < 2)
    throw ArgumentError("estimate_sparsity_ratio: networks must have n >= 2");
  if (small.A.edge_count() == 0)
    throw ArgumentError("estimate_sparsity_ratio: small network has no edges");
  const double num = big.mean_degree() / static_cast<double>(big.n - 1);
  const double den = small.mean_degree() / static_cast<double>(small.n - 1);
  return num / den;
}

SuboptimalityBound suboptimality_bound(double w1_norm, double w2_norm,
                                       double op_distance, double gamma,
                                       double theta_norm, double budget) {
  const double wmax = std::max(w1_norm, w2_norm);
  const double denom = 1.0 - gamma * wmax;
  if (denom <= 0.0) {
    std::ostringstream msg;
    msg << "suboptimality_bound: 1 - gamma*max(||W1||,||W2||) = " << denom
        << " is nonpositive";
    throw ArgumentError(msg.str());
  }
  const double sqb = std::sqrt(budget);
  SuboptimalityBound b;
  b.theta_gap = 2.0 * gamma * std::pow(1.0 + gamma * w1_norm, 2) /
                std::pow(denom, 3) * op_distance * (theta_norm + sqb);
  b.welfare_gap = 2.0 * gamma * std::pow(theta_norm + sqb, 2) /
                  std::pow(denom, 5) * op_distance;
  return b;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string InterventionSolution::to_json(const NetworkProblem& p,
                                          const std::string& a_ref) const {
  json j;
  j["n"] = p.n();
  j["gamma"] = p.gamma();
  j["budget"] = p.budget();
  if (!a_ref.empty()) j["A_ref"] = a_ref;
  auto vec = [](const Vec& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
  };
  j["theta"] = vec(p.theta());
  j["theta_hat"] = vec(theta_hat);
  j["L"] = lagrange;
  j["welfare"] = welfare;
  j["residual"] = budget_residual;
  j["equilibrium"] = vec(equilibrium);
  j["flags"] = {{"hard_case", hard_case}, {"zero_budget", zero_budget}};
  return j.dump();
}

}  // namespace graphon::games
