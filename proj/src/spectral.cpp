#include "graphon/spectral.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "graphon/errors.hpp"
#include "graphon/prng.hpp"

namespace graphon::spectral {

namespace {

Mat gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  CounterRng rng(seed);
  Mat g(rows, cols);
  std::uint64_t ctr = 0;
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = rng.gaussian(ctr++);
  return g;
}

Mat thin_q(const Mat& y) {
  Eigen::HouseholderQR<Mat> qr(y);
  return qr.householderQ() * Mat::Identity(y.rows(), y.cols());
}

// Flip (u, v) pairs so the largest-magnitude entry of u is positive; removes
// the sign ambiguity of the underlying factorization.
void canonicalize(std::vector<SvdTriple>& triples) {
  for (auto& t : triples) {
    Index imax = 0;
    t.u.cwiseAbs().maxCoeff(&imax);
    if (t.u(imax) < 0) {
      t.u = -t.u;
      t.v = -t.v;
    }
  }
}

std::vector<SvdTriple> from_factors(const Mat& u, const Vec& s, const Mat& v,
                                    Index count) {
  std::vector<SvdTriple> out;
  out.reserve(count);
  for (Index i = 0; i < count; ++i) out.push_back({s(i), u.col(i), v.col(i)});
  canonicalize(out);
  return out;
}

struct LanczosResult {
  double lambda = 0.0;
  Vec x;
  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;
};

// Lanczos with full reorthogonalization for the largest algebraic eigenvalue
// of a symmetric operator. Converged when the Ritz residual estimate
// |beta_k s_k| drops below tol * max|ritz|; exact once the basis spans an
// invariant subspace or all of R^n.
LanczosResult lanczos_top(const std::function<Vec(const Vec&)>& apply, Index n,
                          int max_iters, double tol, std::uint64_t seed) {
  const int kmax = static_cast<int>(std::min<Index>(max_iters, n));
  Mat basis(n, kmax);
  Vec alpha(kmax), beta(kmax);

  CounterRng rng(seed);
  Vec q(n);
  for (Index i = 0; i < n; ++i)
    q(i) = rng.gaussian(static_cast<std::uint64_t>(i));
  q.normalize();

  LanczosResult res;
  for (int k = 0; k < kmax; ++k) {
    basis.col(k) = q;
    Vec w = apply(q);
    alpha(k) = q.dot(w);
    w -= alpha(k) * q;
    if (k > 0) w -= beta(k - 1) * basis.col(k - 1);
    w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
    beta(k) = w.norm();

    Mat t = Mat::Zero(k + 1, k + 1);
    for (int i = 0; i <= k; ++i) {
      t(i, i) = alpha(i);
      if (i > 0) t(i, i - 1) = t(i - 1, i) = beta(i - 1);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(t);
    const Vec s = es.eigenvectors().col(k);
    const double scale = std::max(
        {std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(k)), 1e-300});

    res.lambda = es.eigenvalues()(k);
    res.residual = beta(k) * std::abs(s(k));
    const bool invariant = beta(k) <= 1e-13 * std::max(scale, 1.0);
    if (res.residual <= tol * scale || invariant || k + 1 == n) {
      res.x = basis.leftCols(k + 1) * s;
      res.x.normalize();
      res.lambda = res.x.dot(apply(res.x));
      res.residual = (apply(res.x) - res.lambda * res.x).norm();
      res.converged = true;
      return res;
    }
    q = w / beta(k);
  }
  return res;
}

}  // namespace

std::vector<SvdTriple> truncated_svd(const LinearOp& m, Index target_rank,
                                     int oversample, int power_iters,
                                     std::uint64_t seed) {
  const Index min_dim = std::min(m.rows(), m.cols());
  if (target_rank < 1 || target_rank > min_dim) {
    std::ostringstream msg;
    msg << "truncated_svd: target_rank " << target_rank << " outside [1, "
        << min_dim << "]";
    throw ArgumentError(msg.str());
  }

  if (min_dim <= kDenseSvdCutoff) {
    Eigen::JacobiSVD<Mat> svd(m.to_dense(),
                              Eigen::ComputeThinU | Eigen::ComputeThinV);
    return from_factors(svd.matrixU(), svd.singularValues(), svd.matrixV(),
                        target_rank);
  }

  const Index k =
      std::min<Index>(target_rank + std::max(oversample, 0), min_dim);
  Mat q = thin_q(m.apply(gaussian_matrix(m.cols(), k, seed)));
  for (int it = 0; it < power_iters; ++it) {
    q = thin_q(m.apply_adjoint(q));
    q = thin_q(m.apply(q));
  }
  // b = q^T m with shape k x cols; its SVD lifts back through q.
  Mat b = m.apply_adjoint(q).transpose();
  Eigen::JacobiSVD<Mat> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Mat u = q * svd.matrixU();
  return from_factors(u, svd.singularValues(), svd.matrixV(), target_rank);
}

std::pair<double, Vec> top_eigenpair(const LinearOp& m, int max_iters,
                                     double tol, std::uint64_t seed) {
  if (m.rows() != m.cols())
    throw ArgumentError("top_eigenpair: matrix not square");
  auto apply = [&m](const Vec& x) { return m.apply(x); };
  return top_eigenpair_op(apply, m.rows(), max_iters, tol, seed);
}

std::pair<double, Vec> top_eigenpair_op(
    const std::function<Vec(const Vec&)>& apply, Index n, int max_iters,
    double tol, std::uint64_t seed) {
  LanczosResult res = lanczos_top(apply, n, max_iters, tol, seed);
  if (!res.converged) {
    std::ostringstream msg;
    msg << "top_eigenpair: no convergence after " << max_iters
        << " Lanczos steps, last residual " << res.residual;
    throw NumericalError(msg.str());
  }
  return {res.lambda, res.x};
}

Vec cg_solve(const std::function<Vec(const Vec&)>& apply, const Vec& b,
             double tol, int max_iters) {
  const double bnorm = b.norm();
  Vec x = Vec::Zero(b.size());
  if (bnorm == 0.0) return x;

  Vec r = b;
  Vec p = r;
  double rs = r.squaredNorm();
  for (int it = 0; it < max_iters; ++it) {
    if (std::sqrt(rs) <= tol * bnorm) return x;
    Vec ap = apply(p);
    const double curvature = p.dot(ap);
    if (curvature <= 0.0) {
      std::ostringstream msg;
      msg << "cg_solve: indefinite operator, p^T A p = " << curvature
          << " along direction with norm " << p.norm();
      throw NumericalError(msg.str());
    }
    const double step = rs / curvature;
    x += step * p;
    r -= step * ap;
    const double rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  if (std::sqrt(rs) <= tol * bnorm) return x;
  std::ostringstream msg;
  msg << "cg_solve: no convergence after " << max_iters
      << " iterations, relative residual " << std::sqrt(rs) / bnorm;
  throw NumericalError(msg.str());
}

double operator_norm(const LinearOp& m) {
  const Index min_dim = std::min(m.rows(), m.cols());
  if (min_dim == 0) return 0.0;
  if (min_dim <= 256) {
    return Eigen::BDCSVD<Mat>(m.to_dense()).singularValues()(0);
  }
  // sigma_1^2 = lambda_max(m^T m); the Gram operator is symmetric PSD.
  auto gram = [&m](const Vec& x) { return m.apply_adjoint(m.apply(x)); };
  LanczosResult res =
      lanczos_top(gram, m.cols(), 400, 1e-12, 0x9A7F0C0DE5EEDULL);
  return std::sqrt(std::max(0.0, res.lambda));
}

Mat reconstruct(const std::vector<SvdTriple>& triples, Index rows,
                Index cols) {
  Mat out = Mat::Zero(rows, cols);
  for (const auto& t : triples) out += t.sigma * t.u * t.v.transpose();
  return out;
}

}  // namespace graphon::spectral
