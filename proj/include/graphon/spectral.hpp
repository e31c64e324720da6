#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <functional>
#include <vector>

namespace graphon::spectral {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

/// One singular triple (sigma, u, v) with sigma >= 0 and unit vectors.
struct SvdTriple {
  double sigma;
  Vec u;
  Vec v;
};

/// Non-owning view of a dense or sparse matrix exposing matrix products.
/// The referenced matrix must outlive the view.
class LinearOp {
 public:
  LinearOp(const Mat& m) : dense_(&m), rows_(m.rows()), cols_(m.cols()) {}
  LinearOp(const SpMat& m) : sparse_(&m), rows_(m.rows()), cols_(m.cols()) {}

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool is_dense() const { return dense_ != nullptr; }

  Mat apply(const Mat& x) const {
    return dense_ ? Mat(*dense_ * x) : Mat(*sparse_ * x);
  }
  Mat apply_adjoint(const Mat& x) const {
    return dense_ ? Mat(dense_->transpose() * x)
                  : Mat(sparse_->transpose() * x);
  }
  Vec apply(const Vec& x) const {
    return dense_ ? Vec(*dense_ * x) : Vec(*sparse_ * x);
  }
  Mat to_dense() const { return dense_ ? *dense_ : Mat(*sparse_); }

 private:
  const Mat* dense_ = nullptr;
  const SpMat* sparse_ = nullptr;
  Index rows_, cols_;
};

/// Default parameters of the randomized SVD; near-deterministic accuracy at
/// desk scale.
inline constexpr int kDefaultOversample = 10;
inline constexpr int kDefaultPowerIters = 2;
/// Below this dimension the full decomposition is computed directly.
inline constexpr Index kDenseSvdCutoff = 64;

/// Leading `target_rank` singular triples of m, descending by sigma.
///
/// Uses a full dense SVD when min(rows, cols) <= kDenseSvdCutoff, otherwise a
/// seeded randomized range finder with `power_iters` power iterations and
/// `oversample` extra probe columns. Deterministic given (m, seed). Signs are
/// canonicalized so the largest-magnitude entry of each u is positive.
std::vector<SvdTriple> truncated_svd(const LinearOp& m, Index target_rank,
                                     int oversample = kDefaultOversample,
                                     int power_iters = kDefaultPowerIters,
                                     std::uint64_t seed = 0);

/// Largest algebraic eigenvalue and eigenvector of a symmetric operator,
/// via Lanczos iteration with full reorthogonalization.
/// Throws NumericalError with the last residual if max_iters Lanczos vectors
/// do not reach ||m x - lambda x|| <= tol * |lambda|.
std::pair<double, Vec> top_eigenpair(const LinearOp& m, int max_iters = 300,
                                     double tol = 1e-10,
                                     std::uint64_t seed = 0);

/// As top_eigenpair, for an operator given only through its matrix-vector
/// product on R^n.
std::pair<double, Vec> top_eigenpair_op(
    const std::function<Vec(const Vec&)>& apply, Index n, int max_iters = 300,
    double tol = 1e-10, std::uint64_t seed = 0);

/// Conjugate gradient for apply(x) = b with apply symmetric positive
/// definite. Returns x with ||apply(x) - b|| <= tol * ||b||. Throws
/// NumericalError on detected negative curvature (naming the violating
/// direction norm) or on non-convergence.
Vec cg_solve(const std::function<Vec(const Vec&)>& apply, const Vec& b,
             double tol = 1e-10, int max_iters = 10000);

/// Largest singular value. Exact dense SVD up to 256 rows/cols, above that a
/// seeded Lanczos iteration on the Gram operator m^T m.
double operator_norm(const LinearOp& m);

/// Reconstruction sum(sigma_i u_i v_i^T) as a dense matrix.
Mat reconstruct(const std::vector<SvdTriple>& triples, Index rows, Index cols);

}  // namespace graphon::spectral
