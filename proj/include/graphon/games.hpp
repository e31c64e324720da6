#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "graphon/estimator.hpp"
#include "graphon/model.hpp"

namespace graphon::games {

/// Spectral form of a step-graphon operator on L2[0,1]: eigenvalues eta_j
/// with orthonormal step eigenfunctions phi_j (column j of `basis` holds the
/// cell values of phi_j on `lengths`). The operator acts as zero on the
/// orthogonal complement of span{phi_j}.
struct LowRankStepOperator {
  Vec eigenvalues;
  Mat basis;
  Vec lengths;

  Index rank() const { return eigenvalues.size(); }
  double opnorm() const {
    return rank() > 0 ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  }
  LowRankStepOperator scaled(double factor) const;

  /// Full eigendecomposition of diag(sqrt(d)) T diag(sqrt(d)).
  static LowRankStepOperator from_step_graphon(const StepGraphon& g);
  /// Symmetrizes the reconstruction and eigendecomposes it on the span of
  /// the retained factors; rank at most 2 * e.rank().
  static LowRankStepOperator from_svt(const svt::SvtEstimate& e);
};

/// LQ network game with a welfare intervention budget. The spectral-radius
/// condition gamma * ||A||_op / n < 1 is checked at construction. For dense
/// storage with n <= kDenseEigCutoff a full symmetric eigendecomposition is
/// cached; above that only the top eigenpair (Lanczos) is kept and solves go
/// through conjugate gradients.
class NetworkProblem {
 public:
  static constexpr Index kDenseEigCutoff = 1024;

  NetworkProblem(AdjMatrix a, Vec theta, double gamma, double budget);

  Index n() const { return a_.n(); }
  const AdjMatrix& adjacency() const { return a_; }
  const Vec& theta() const { return theta_; }
  double gamma() const { return gamma_; }
  double budget() const { return budget_; }
  double opnorm() const { return opnorm_; }
  double lambda_max() const { return lambda_max_; }
  const Vec& top_eigvec() const { return top_vec_; }

  bool dense_path() const { return eig_.has_value(); }
  const Vec& eigenvalues() const { return eig_->values; }
  const Mat& eigenvectors() const { return eig_->vectors; }

  /// (I - gamma A / n) x
  Vec apply_m(const Vec& x) const;

 private:
  AdjMatrix a_;
  Vec theta_;
  double gamma_, budget_;
  double opnorm_ = 0.0, lambda_max_ = 0.0;
  Vec top_vec_;
  struct Eig {
    Vec values;
    Mat vectors;
  };
  std::optional<Eig> eig_;
};

struct InterventionSolution {
  Vec theta_hat;
  double lagrange = 0.0;
  double welfare = 0.0;
  Vec equilibrium;
  double budget_residual = 0.0;
  bool hard_case = false;
  bool zero_budget = false;

  /// a_ref names the serialized network the problem was built from, when any.
  std::string to_json(const NetworkProblem& p,
                      const std::string& a_ref = "") const;
};

/// Equilibrium s* solving (I - gamma A/n) s* = theta + intervention, with the
/// residual verified to 1e-8 * ||theta + intervention||.
Vec equilibrium(const NetworkProblem& p, const Vec& intervention);

/// (1/2n) ||s*||^2; normalized so the value equals the graphon welfare of
/// the induced step functions.
double welfare(const NetworkProblem& p, const Vec& intervention);

/// Secular-equation solver on the full eigendecomposition (dense path).
InterventionSolution optimal_intervention(const NetworkProblem& p,
                                          double tol = 1e-10);

/// Matrix-free path: each secular evaluation solves
/// [I + L (I - gamma A/n)^2] x = theta by conjugate gradients, and L is
/// driven by a safeguarded secant/bisection on ||x(L)||^2 - B.
InterventionSolution optimal_intervention_cg(const NetworkProblem& p,
                                             double tol = 1e-8,
                                             int max_iters = 20000);

/// Dense path when the cached eigendecomposition exists, CG otherwise.
InterventionSolution solve_network_intervention(const NetworkProblem& p,
                                                double tol = 1e-10);

/// LQ graphon game on a low-rank step operator.
class GraphonProblem {
 public:
  GraphonProblem(LowRankStepOperator op, StepFunction theta, double gamma,
                 double budget);

  const LowRankStepOperator& op() const { return op_; }
  const StepFunction& theta() const { return theta_; }
  double gamma() const { return gamma_; }
  double budget() const { return budget_; }

 private:
  LowRankStepOperator op_;
  StepFunction theta_;
  double gamma_, budget_;
};

struct GraphonSolution {
  StepFunction theta_hat;
  double lagrange = 0.0;
  double welfare = 0.0;
  StepFunction equilibrium;
  double budget_residual = 0.0;
  bool hard_case = false;
  bool zero_budget = false;
};

StepFunction graphon_equilibrium(const GraphonProblem& p,
                                 const StepFunction& intervention);
double graphon_welfare(const GraphonProblem& p,
                       const StepFunction& intervention);

/// Secular-equation solver in the r+1 dimensions spanned by the operator
/// eigenfunctions and the residual component of theta; cost is independent
/// of the partition resolution beyond the initial projection.
GraphonSolution optimal_intervention_lowrank(const GraphonProblem& p,
                                             double tol = 1e-10);

/// Transfer pipeline: solve the graphon problem on (rho_N/rho_n) * est with
/// the step function of big.theta and budget big.budget / N, then map the
/// solution back to the network by cell averages (or point evaluation at the
/// right cell endpoints when point_eval is set).
Vec transfer_interventions(const NetworkProblem& big,
                           const LowRankStepOperator& est,
                           double sparsity_ratio, bool point_eval = false,
                           GraphonSolution* detail = nullptr);

/// Ratio of average degrees normalized by n-1; estimates rho_N / rho_n.
double estimate_sparsity_ratio(const SampledNetwork& big,
                               const SampledNetwork& small);

struct SuboptimalityBound {
  double theta_gap;
  double welfare_gap;
};

/// Closed-form stability bounds on ||theta_hat_1 - theta_hat_2|| and
/// T_1(theta_hat_1) - T_1(theta_hat_2) in terms of the operator-norm
/// distance of the two graphons.
SuboptimalityBound suboptimality_bound(double w1_norm, double w2_norm,
                                       double op_distance, double gamma,
                                       double theta_norm, double budget);

}  // namespace graphon::games
