#include "graphon/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <thread>

#include "graphon/errors.hpp"
#include "graphon/estimator.hpp"
#include "graphon/games.hpp"
#include "graphon/prng.hpp"

namespace graphon::harness {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::vector<Index> arithmetic_grid(Index first, Index step, Index last) {
  std::vector<Index> g;
  for (Index n = first; n <= last; n += step) g.push_back(n);
  return g;
}

// Runs tasks 0..count-1 on a small pool; each task writes only its own slots.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& task) {
  unsigned int hw = std::thread::hardware_concurrency();
  unsigned int nthreads =
      threads > 0 ? static_cast<unsigned int>(threads) : (hw > 0 ? hw : 1);
  nthreads = std::min<unsigned int>(
      nthreads, static_cast<unsigned int>(std::max<std::size_t>(count, 1)));
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double elapsed_ms(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ResultRow& a, const ResultRow& b) {
              if (a.n != b.n) return a.n < b.n;
              if (a.experiment != b.experiment)
                return a.experiment < b.experiment;
              return a.replication < b.replication;
            });
}

Vec theta_from_xi(const Vec& xi) { return xi.cwiseProduct(xi); }

}  // namespace

double RhoRule::of(Index n) const {
  return type == Type::power ? std::pow(static_cast<double>(n), value) : value;
}

double BudgetRule::of(Index n) const {
  return type == Type::proportional ? value * static_cast<double>(n) : value;
}

double LambdaRule::of(Index n, double rho) const {
  return factor * std::sqrt(static_cast<double>(n) * rho);
}

ExperimentConfig ExperimentConfig::desk_default(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "holder") {
    c.n_grid = arithmetic_grid(20, 100, 1020);
    c.replications = 20;
  } else if (experiment == "sbm") {
    c.n_grid = {20, 180, 340, 500, 660, 820, 980};
    c.replications = 20;
  } else if (experiment == "transfer") {
    c.n_grid = arithmetic_grid(100, 100, 800);
    c.replications = 20;
    c.big_n = 2000;
  } else {
    throw ArgumentError("unknown experiment: " + experiment);
  }
  return c;
}

ExperimentConfig ExperimentConfig::full_scale(const std::string& experiment) {
  ExperimentConfig c = desk_default(experiment);
  if (experiment == "holder") {
    c.n_grid = arithmetic_grid(20, 100, 4920);
    c.replications = 100;
  } else if (experiment == "sbm") {
    c.n_grid = arithmetic_grid(20, 20, 980);
    c.replications = 100;
  } else {
    c.n_grid = arithmetic_grid(100, 100, 1500);
    c.replications = 600;
    c.big_n = 10000;
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read config file: " + path);
  json j = json::parse(in);
  ExperimentConfig c = desk_default(j.at("experiment").get<std::string>());
  if (j.contains("n_grid")) c.n_grid = j["n_grid"].get<std::vector<Index>>();
  if (j.contains("rho")) {
    const auto& r = j["rho"];
    const std::string type = r.at("type").get<std::string>();
    if (type == "power")
      c.rho = {RhoRule::Type::power, r.at("exponent").get<double>()};
    else if (type == "constant")
      c.rho = {RhoRule::Type::constant, r.at("value").get<double>()};
    else
      throw ArgumentError("rho rule type must be power or constant");
  }
  if (j.contains("gamma")) c.gamma = j["gamma"].get<double>();
  if (j.contains("budget")) {
    const auto& b = j["budget"];
    const std::string type = b.at("type").get<std::string>();
    if (type == "proportional")
      c.budget = {BudgetRule::Type::proportional, b.at("factor").get<double>()};
    else if (type == "constant")
      c.budget = {BudgetRule::Type::constant, b.at("value").get<double>()};
    else
      throw ArgumentError("budget rule type must be proportional or constant");
  }
  if (j.contains("lambda")) c.lambda.factor = j["lambda"].at("factor").get<double>();
  if (j.contains("replications")) c.replications = j["replications"].get<int>();
  if (j.contains("base_seed")) c.base_seed = j["base_seed"].get<std::uint64_t>();
  if (j.contains("out_path")) c.out_path = j["out_path"].get<std::string>();
  if (j.contains("big_n")) c.big_n = j["big_n"].get<Index>();
  if (j.contains("svd_components"))
    c.svd_components = j["svd_components"].get<Index>();
  if (j.contains("record_timings"))
    c.record_timings = j["record_timings"].get<bool>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (experiment != "holder" && experiment != "sbm" && experiment != "transfer")
    throw ArgumentError("unknown experiment: " + experiment);
  if (n_grid.empty()) throw ArgumentError("config: empty n grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 2) throw ArgumentError("config: n must be >= 2");
    if (i > 0 && n_grid[i] <= n_grid[i - 1])
      throw ArgumentError("config: n grid must be strictly increasing");
  }
  if (replications < 1) throw ArgumentError("config: replications must be >= 1");
  if (!(gamma >= 0.0)) throw ArgumentError("config: gamma must be >= 0");
  if (experiment == "transfer" && big_n <= n_grid.back())
    throw ArgumentError("config: big_n must exceed the n grid");
}

std::uint64_t ExperimentConfig::replication_seed(const std::string& exp,
                                                 Index n, int rep) const {
  std::uint64_t h = hash_str(exp);
  h = mix_seed(h, static_cast<std::uint64_t>(n));
  h = mix_seed(h, static_cast<std::uint64_t>(rep));
  return base_seed ^ h;
}

Mat sbm_block_matrix(std::uint64_t base_seed) {
  CounterRng rng(mix_seed(base_seed, hash_str("sbm-block-matrix")));
  Mat b(4, 4);
  std::uint64_t ctr = 0;
  for (Index i = 0; i < 4; ++i) {
    for (Index j = i; j < 4; ++j) {
      const double u = rng.uniform01(ctr++);
      b(i, j) = b(j, i) = (i == j) ? (1.0 + u) / 2.0 : u / 2.0;
    }
  }
  return b;
}

GraphonModel sbm4_model(std::uint64_t base_seed) {
  Vec breakpoints(3);
  breakpoints << 0.25, 0.5, 0.75;
  return GraphonModel::sbm(breakpoints, sbm_block_matrix(base_seed));
}

std::vector<ResultRow> run_experiment_holder(const ExperimentConfig& config) {
  config.validate();
  const GraphonModel model = GraphonModel::named("sqrt_abs_diff");
  const std::size_t cells = config.n_grid.size();
  const std::size_t reps = static_cast<std::size_t>(config.replications);
  std::vector<ResultRow> rows(cells * reps);

  parallel_for(cells * reps, config.threads, [&](std::size_t idx) {
    const Index n = config.n_grid[idx / reps];
    const int rep = static_cast<int>(idx % reps);
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = config.replication_seed("holder", n, rep);

    const double rho = config.rho.of(n);
    const double lambda = config.lambda.of(n, rho);
    SampledNetwork net = sample_network(model, n, rho, seed);
    games::NetworkProblem problem(net.A, theta_from_xi(net.xi), config.gamma,
                                  config.budget.of(n));
    games::InterventionSolution opt =
        games::solve_network_intervention(problem);

    svt::SvtEstimate est =
        svt::svt(net.A.op(), lambda, mix_seed(seed, hash_str("svt")), rho);
    auto op = games::LowRankStepOperator::from_svt(est);
    Vec mapped = games::transfer_interventions(problem, op, 1.0);
    const double w_est = games::welfare(problem, mapped);

    ResultRow& row = rows[idx];
    row.experiment = "holder";
    row.n = n;
    row.replication = rep;
    row.seed = seed;
    row.welfare_true = opt.welfare;
    row.welfare_estimated = w_est;
    row.gap = opt.welfare - w_est;
    row.estimator_rank = est.rank();
    row.wall_time_ms = config.record_timings ? elapsed_ms(t0) : 0.0;
  });
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_experiment_sbm(const ExperimentConfig& config) {
  config.validate();
  const GraphonModel model = sbm4_model(config.base_seed);
  const Mat block = sbm_block_matrix(config.base_seed);
  const std::size_t cells = config.n_grid.size();
  const std::size_t reps = static_cast<std::size_t>(config.replications);
  std::vector<ResultRow> rows(2 * cells * reps);

  parallel_for(cells * reps, config.threads, [&](std::size_t idx) {
    const Index n = config.n_grid[idx / reps];
    const int rep = static_cast<int>(idx % reps);
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = config.replication_seed("sbm", n, rep);

    const double rho = config.rho.of(n);
    SampledNetwork net = sample_network(model, n, rho, seed);
    games::NetworkProblem problem(net.A, theta_from_xi(net.xi), config.gamma,
                                  config.budget.of(n));
    games::InterventionSolution opt =
        games::solve_network_intervention(problem);

    // (a) interventions from the true graphon rho * W2
    StepGraphon true_graphon{Vec::Constant(4, 0.25), rho * block};
    auto op_true = games::LowRankStepOperator::from_step_graphon(true_graphon);
    Vec mapped_true = games::transfer_interventions(problem, op_true, 1.0);
    const double w_true_graphon = games::welfare(problem, mapped_true);

    // (b) interventions from the truncated SVD of A with fixed rank
    const Index comps = std::min(config.svd_components, n);
    svt::SvtEstimate est;
    est.n = n;
    est.rho_used = rho;
    est.triples = spectral::truncated_svd(
        net.A.op(), comps, spectral::kDefaultOversample,
        spectral::kDefaultPowerIters, mix_seed(seed, hash_str("tsvd")));
    auto op_svd = games::LowRankStepOperator::from_svt(est);
    Vec mapped_svd = games::transfer_interventions(problem, op_svd, 1.0);
    const double w_svd = games::welfare(problem, mapped_svd);

    const double ms = config.record_timings ? elapsed_ms(t0) : 0.0;
    ResultRow& ra = rows[2 * idx];
    ra.experiment = "sbm_graphon";
    ra.n = n;
    ra.replication = rep;
    ra.seed = seed;
    ra.welfare_true = opt.welfare;
    ra.welfare_estimated = w_true_graphon;
    ra.gap = opt.welfare - w_true_graphon;
    ra.estimator_rank = op_true.rank();
    ra.wall_time_ms = ms;
    ResultRow& rb = rows[2 * idx + 1];
    rb.experiment = "sbm_svd";
    rb.n = n;
    rb.replication = rep;
    rb.seed = seed;
    rb.welfare_true = opt.welfare;
    rb.welfare_estimated = w_svd;
    rb.gap = opt.welfare - w_svd;
    rb.estimator_rank = est.rank();
    rb.wall_time_ms = ms;
  });
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_experiment_transfer(const ExperimentConfig& config) {
  config.validate();
  const GraphonModel model = sbm4_model(config.base_seed);
  const Mat block = sbm_block_matrix(config.base_seed);
  const Index big_n = config.big_n;
  const double rho_big = config.rho.of(big_n);
  const std::uint64_t big_seed =
      config.replication_seed("transfer-big", big_n, 0);

  SampledNetwork big = sample_network(model, big_n, rho_big, big_seed);
  games::NetworkProblem big_problem(big.A, theta_from_xi(big.xi), config.gamma,
                                    config.budget.of(big_n));
  games::InterventionSolution opt =
      games::solve_network_intervention(big_problem, 1e-9);

  // Dashed baseline: interventions from the true graphon, independent of n.
  StepGraphon true_graphon{Vec::Constant(4, 0.25), rho_big * block};
  auto op_true = games::LowRankStepOperator::from_step_graphon(true_graphon);
  Vec mapped_true = games::transfer_interventions(big_problem, op_true, 1.0);
  const double w_true_graphon = games::welfare(big_problem, mapped_true);

  const std::size_t cells = config.n_grid.size();
  const std::size_t reps = static_cast<std::size_t>(config.replications);
  std::vector<ResultRow> rows(cells * reps + cells);

  parallel_for(cells * reps, config.threads, [&](std::size_t idx) {
    const Index n = config.n_grid[idx / reps];
    const int rep = static_cast<int>(idx % reps);
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = config.replication_seed("transfer", n, rep);

    const double rho = config.rho.of(n);
    const double lambda = config.lambda.of(n, rho);
    SampledNetwork small = sample_network(model, n, rho, seed);
    svt::SvtEstimate est =
        svt::svt(small.A.op(), lambda, mix_seed(seed, hash_str("svt")), rho);
    auto op = games::LowRankStepOperator::from_svt(est);
    const double ratio = games::estimate_sparsity_ratio(big, small);
    Vec mapped = games::transfer_interventions(big_problem, op, ratio);
    const double w_est = games::welfare(big_problem, mapped);

    ResultRow& row = rows[idx];
    row.experiment = "transfer";
    row.n = n;
    row.replication = rep;
    row.seed = seed;
    row.welfare_true = opt.welfare;
    row.welfare_estimated = w_est;
    row.gap = opt.welfare - w_est;
    row.estimator_rank = est.rank();
    row.wall_time_ms = config.record_timings ? elapsed_ms(t0) : 0.0;
  });

  for (std::size_t g = 0; g < cells; ++g) {
    ResultRow& row = rows[cells * reps + g];
    row.experiment = "transfer_true";
    row.n = config.n_grid[g];
    row.replication = 0;
    row.seed = big_seed;
    row.welfare_true = opt.welfare;
    row.welfare_estimated = w_true_graphon;
    row.gap = opt.welfare - w_true_graphon;
    row.estimator_rank = op_true.rank();
    row.wall_time_ms = 0.0;
  }
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
  if (config.experiment == "holder") return run_experiment_holder(config);
  if (config.experiment == "sbm") return run_experiment_sbm(config);
  if (config.experiment == "transfer") return run_experiment_transfer(config);
  throw ArgumentError("unknown experiment: " + config.experiment);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ArgumentError("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw ArgumentError("summarize: no rows");
  // group by (experiment, n), preserving the sorted emission order
  std::vector<SummaryRow> out;
  std::map<std::pair<std::string, Index>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.experiment, r.n}].push_back(r.gap);
  for (auto& [key, gaps] : groups) {
    SummaryRow s;
    s.experiment = key.first;
    s.n = key.second;
    s.replications = static_cast<int>(gaps.size());
    s.gap_median = percentile(gaps, 0.5);
    s.gap_p05 = percentile(gaps, 0.05);
    s.gap_p95 = percentile(gaps, 0.95);
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const SummaryRow& a, const SummaryRow& b) {
    if (a.n != b.n) return a.n < b.n;
    return a.experiment < b.experiment;
  });
  return out;
}

void write_rows_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "# schema_version=1\n";
  out << "experiment,n,replication,seed,welfare_true,welfare_estimated,gap,"
         "estimator_rank,wall_time_ms\n";
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.n << ',' << r.replication << ',' << r.seed
        << ',' << fmt(r.welfare_true) << ',' << fmt(r.welfare_estimated) << ','
        << fmt(r.gap) << ',' << r.estimator_rank << ',' << fmt(r.wall_time_ms)
        << '\n';
  }
}

std::vector<ResultRow> read_rows_csv(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    std::istringstream ss(line);
    std::string field;
    ResultRow r;
    std::getline(ss, r.experiment, ',');
    std::getline(ss, field, ',');
    r.n = static_cast<Index>(std::stoll(field));
    std::getline(ss, field, ',');
    r.replication = std::stoi(field);
    std::getline(ss, field, ',');
    r.seed = std::stoull(field);
    std::getline(ss, field, ',');
    r.welfare_true = std::stod(field);
    std::getline(ss, field, ',');
    r.welfare_estimated = std::stod(field);
    std::getline(ss, field, ',');
    r.gap = std::stod(field);
    std::getline(ss, field, ',');
    r.estimator_rank = static_cast<Index>(std::stoll(field));
    std::getline(ss, field, ',');
    r.wall_time_ms = std::stod(field);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ArgumentError("read_rows_csv: no data rows");
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "# schema_version=1\n";
  out << "experiment,n,replications,gap_median,gap_p05,gap_p95\n";
  for (const auto& s : rows) {
    out << s.experiment << ',' << s.n << ',' << s.replications << ','
        << fmt(s.gap_median) << ',' << fmt(s.gap_p05) << ',' << fmt(s.gap_p95)
        << '\n';
  }
}

}  // namespace graphon::harness
