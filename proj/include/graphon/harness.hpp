#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "graphon/model.hpp"

namespace graphon::harness {

/// rho(n): either a power n^exponent or a constant.
struct RhoRule {
  enum class Type { power, constant };
  Type type = Type::power;
  double value = -0.25;
  double of(Index n) const;
};

/// B(n): proportional factor*n or a constant.
struct BudgetRule {
  enum class Type { proportional, constant };
  Type type = Type::proportional;
  double value = 0.5;
  double of(Index n) const;
};

/// lambda(n, rho) = factor * sqrt(n * rho).
struct LambdaRule {
  double factor = 2.0;
  double of(Index n, double rho) const;
};

struct ExperimentConfig {
  std::string experiment;  // holder | sbm | transfer
  std::vector<Index> n_grid;
  RhoRule rho;
  double gamma = 0.8;
  BudgetRule budget;
  LambdaRule lambda;
  int replications = 20;
  std::uint64_t base_seed = 20260809;
  std::string out_path;
  Index big_n = 2000;        // transfer only
  Index svd_components = 4;  // sbm only
  bool record_timings = false;
  int threads = 0;  // 0 = hardware concurrency

  /// Desk-scale defaults; full_scale switches to the grids and replication
  /// counts of the original studies (hours of compute).
  static ExperimentConfig desk_default(const std::string& experiment);
  static ExperimentConfig full_scale(const std::string& experiment);
  static ExperimentConfig from_json_file(const std::string& path);

  void validate() const;
  /// base_seed ^ hash(experiment, n, rep); pairwise distinct streams.
  std::uint64_t replication_seed(const std::string& exp, Index n,
                                 int rep) const;
};

struct ResultRow {
  std::string experiment;
  Index n = 0;
  int replication = 0;
  std::uint64_t seed = 0;
  double welfare_true = 0.0;
  double welfare_estimated = 0.0;
  double gap = 0.0;
  Index estimator_rank = 0;
  double wall_time_ms = 0.0;
};

struct SummaryRow {
  std::string experiment;
  Index n = 0;
  int replications = 0;
  double gap_median = 0.0;
  double gap_p05 = 0.0;
  double gap_p95 = 0.0;
};

std::vector<ResultRow> run_experiment_holder(const ExperimentConfig& config);
std::vector<ResultRow> run_experiment_sbm(const ExperimentConfig& config);
std::vector<ResultRow> run_experiment_transfer(const ExperimentConfig& config);
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

/// Per (experiment, n): median and the empirical 0.9 band (5th and 95th
/// percentile) of the gap.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

/// Percentile with linear interpolation between closest ranks, p in [0,1].
double percentile(std::vector<double> values, double p);

void write_rows_csv(const std::vector<ResultRow>& rows, std::ostream& out);
std::vector<ResultRow> read_rows_csv(std::istream& in);
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);

/// The K=4 block matrix of the SBM experiments, generated once from a
/// dedicated sub-seed of base_seed and shared by the sbm and transfer
/// experiments: B_ij = u_ij/2 off the diagonal, (1+u_ij)/2 on it.
Mat sbm_block_matrix(std::uint64_t base_seed);
GraphonModel sbm4_model(std::uint64_t base_seed);

}  // namespace graphon::harness
