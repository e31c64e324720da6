#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "graphon/spectral.hpp"

namespace graphon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

/// Smoothness declared for callable kernels.
struct Smoothness {
  enum class Kind { none, holder, analytic };
  Kind kind = Kind::none;
  double a = 0.0;  // H (holder) or M (analytic)
  double b = 0.0;  // alpha (holder) or r (analytic)
};

/// Step-function graphon: value T_ij on cell i x j of the given partition.
/// Lengths are positive and sum to 1; values need not lie in [0,1] (the type
/// also carries estimates and differences of graphons).
struct StepGraphon {
  Vec lengths;
  Mat values;

  Index cells() const { return lengths.size(); }
  static StepGraphon uniform(Mat values);
  static StepGraphon constant(double c);
  double at(double x, double y) const;
};

/// One-dimensional step function on a partition of [0,1].
struct StepFunction {
  Vec lengths;
  Vec values;

  static StepFunction uniform(Vec values);
  static StepFunction constant(double c);
  double l2_norm() const;
  double integral() const;
  double at(double x) const;  // cells are half-open [l, r); at(1) = last cell
};

/// Inner product and common-refinement helpers for step functions.
double inner_product(const StepFunction& f, const StepFunction& g);

/// Generative graphon model: SBM, explicit step function, or a callable
/// kernel with a declared smoothness tag.
class GraphonModel {
 public:
  struct Sbm {
    Vec breakpoints;  // strictly increasing, inside (0,1)
    Mat block;        // symmetric, entries in [0,1], size k x k
  };
  struct Step {
    StepGraphon g;
  };
  struct Callable {
    std::function<double(double, double)> w;
    Smoothness smoothness;
    std::string name;  // used for serialization of named kernels
  };

  static GraphonModel sbm(Vec breakpoints, Mat block);
  static GraphonModel step(StepGraphon g);
  static GraphonModel callable(std::function<double(double, double)> w,
                               Smoothness smoothness, std::string name);
  /// Registry of named kernels used by experiments and serialization:
  /// "sqrt_abs_diff" (the (1,1/2)-Holder kernel sqrt|x-y|) and
  /// "constant" (value in `param`).
  static GraphonModel named(const std::string& name, double param = 0.0);

  double operator()(double x, double y) const;
  bool is_sbm() const { return std::holds_alternative<Sbm>(v_); }
  bool is_step() const { return std::holds_alternative<Step>(v_); }
  bool is_callable() const { return std::holds_alternative<Callable>(v_); }
  const Sbm& as_sbm() const { return std::get<Sbm>(v_); }
  const Step& as_step() const { return std::get<Step>(v_); }
  const Callable& as_callable() const { return std::get<Callable>(v_); }

  std::string to_json() const;
  static GraphonModel from_json(const std::string& text);

 private:
  explicit GraphonModel(std::variant<Sbm, Step, Callable> v)
      : v_(std::move(v)) {}
  std::variant<Sbm, Step, Callable> v_;
};

/// Adjacency storage: dense for moderate sizes, compressed sparse above the
/// density/size cutoff used by sample_network.
class AdjMatrix {
 public:
  AdjMatrix() = default;
  explicit AdjMatrix(Mat dense) : m_(std::move(dense)) {}
  explicit AdjMatrix(SpMat sparse) : m_(std::move(sparse)) {}

  Index n() const;
  bool is_dense() const { return std::holds_alternative<Mat>(m_); }
  const Mat& dense() const { return std::get<Mat>(m_); }
  const SpMat& sparse() const { return std::get<SpMat>(m_); }
  Mat to_dense() const;
  spectral::LinearOp op() const;
  Vec apply(const Vec& x) const;
  Index edge_count() const;  // undirected edges (i < j)

 private:
  std::variant<Mat, SpMat> m_;
};

/// Network sampled from a graphon model; latent positions are stored sorted.
struct SampledNetwork {
  Index n = 0;
  AdjMatrix A;
  Vec xi;  // sorted ascending, values in [0,1]
  double rho = 1.0;
  std::uint64_t seed = 0;

  double mean_degree() const;
};

/// Sampling per the ordered-statistics model: Q_ij = rho W(xi_(i), xi_(j)),
/// A_ij ~ Bernoulli(Q_ij) for i < j mirrored, zero diagonal. One uniform is
/// drawn per unordered pair in lexicographic order, so coupled runs with a
/// larger rho only ever add edges. The unsorted variant Q_ij = rho W(xi_i,
/// xi_j) is not implemented.
SampledNetwork sample_network(const GraphonModel& model, Index n, double rho,
                              std::uint64_t seed, Mat* q_out = nullptr);

/// Empirical graphon of a square matrix on the uniform partition.
StepGraphon empirical_graphon(const Mat& t);

/// Operator norm of the step graphon: the spectral norm of
/// diag(sqrt(lengths)) * T * diag(sqrt(lengths)). Equals ||T||_op / n on
/// uniform partitions.
double step_graphon_opnorm(const StepGraphon& g);

/// Operator-norm distance via the common refinement of the two partitions.
double step_graphon_distance(const StepGraphon& g1, const StepGraphon& g2);

/// Midpoint discretization on the uniform m-partition. For an (H,alpha)-
/// Holder kernel the error is O(m^{-min(alpha,1)}); step models with
/// breakpoints on the grid are represented exactly.
StepGraphon discretize(const GraphonModel& model, Index m);

/// Common refinement: partition lengths plus the two value matrices mapped
/// onto it. Exposed for games/estimator code that integrates step functions.
struct Refinement {
  Vec lengths;
  std::vector<Index> map1;  // refined cell -> cell of partition 1
  std::vector<Index> map2;
};
Refinement refine(const Vec& lengths1, const Vec& lengths2);

/// Edge-list text serialization (first line n, then "i j" with 0 <= i < j)
/// with a JSON sidecar holding xi, rho and the seed.
void save_network(const SampledNetwork& net, const std::string& base_path);
SampledNetwork load_network(const std::string& base_path);

}  // namespace graphon
