// Command-line front end: sampling, estimation, interventions and the
// experiment harness. Exit codes: 0 success, 2 configuration error,
// 3 numerical failure.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "graphon/errors.hpp"
#include "graphon/estimator.hpp"
#include "graphon/games.hpp"
#include "graphon/harness.hpp"
#include "graphon/model.hpp"
#include "graphon/prng.hpp"

namespace {

using namespace graphon;

GraphonModel model_from_string(const std::string& descriptor,
                             std::uint64_t base_seed) {
  // Either a path to a model JSON file or one of the named shortcuts
  // "sqrtabs", "constant:<v>", "sbm4" (the frozen K=4 block model).
  if (descriptor == "sqrtabs") return GraphonModel::named("sqrt_abs_diff");
  if (descriptor.rfind("constant:", 0) == 0)
    return GraphonModel::named("constant", std::stod(descriptor.substr(9)));
  if (descriptor == "sbm4") return harness::sbm4_model(base_seed);
  std::ifstream in(descriptor);
  if (!in) throw ArgumentError("cannot read model file: " + descriptor);
  std::ostringstream ss;
  ss << in.rdbuf();
  return GraphonModel::from_json(ss.str());
}

Vec theta_for_network(const SampledNetwork& net,
                      const std::string& theta_file) {
  if (theta_file.empty()) {
    // default heterogeneity rule theta_i = xi_(i)^2
    return net.xi.cwiseProduct(net.xi);
  }
  std::ifstream in(theta_file);
  if (!in) throw ArgumentError("cannot read theta file: " + theta_file);
  std::vector<double> vals;
  double v;
  while (in >> v) vals.push_back(v);
  if (static_cast<Index>(vals.size()) != net.n)
    throw ArgumentError("theta file length does not match network size");
  return Eigen::Map<Vec>(vals.data(), static_cast<Index>(vals.size()));
}

int run(int argc, char** argv) {
  CLI::App app{"Low-rank graphon estimation and targeted interventions"};
  app.require_subcommand(1);

  // ---- sample ----
  auto* sample = app.add_subcommand("sample", "Sample a network from a model");
  std::string sample_model = "sqrtabs", sample_out = "network";
  Index sample_n = 200;
  double sample_rho = 1.0;
  std::uint64_t sample_seed = 1;
  sample->add_option("--model", sample_model,
                     "Model: sqrtabs | constant:<v> | sbm4 | <file.json>");
  sample->add_option("--n", sample_n, "Network size")->required();
  sample->add_option("--rho", sample_rho, "Sparsity parameter in (0,1]");
  sample->add_option("--seed", sample_seed, "RNG seed");
  sample->add_option("--out", sample_out, "Output base path");

  // ---- estimate ----
  auto* estimate = app.add_subcommand("estimate", "SVT estimate of a network");
  std::string est_in = "network", est_out = "estimate.json";
  double est_lambda = -1.0;
  double est_lambda_factor = 2.0;
  std::uint64_t est_seed = 1;
  estimate->add_option("--in", est_in, "Network base path")->required();
  estimate->add_option("--lambda", est_lambda,
                       "Threshold; default factor*sqrt(n*rho)");
  estimate->add_option("--lambda-factor", est_lambda_factor,
                       "Factor for the default threshold");
  estimate->add_option("--seed", est_seed, "RNG seed");
  estimate->add_option("--out", est_out, "Output JSON path");

  // ---- intervene ----
  auto* intervene =
      app.add_subcommand("intervene", "Optimal intervention on a network");
  std::string int_in = "network", int_out = "solution.json", int_theta;
  double int_gamma = 0.8, int_budget = -1.0;
  intervene->add_option("--in", int_in, "Network base path")->required();
  intervene->add_option("--theta-file", int_theta,
                        "Whitespace-separated theta values (default xi^2)");
  intervene->add_option("--gamma", int_gamma, "Peer-effect parameter");
  intervene->add_option("--budget", int_budget, "Budget (default n/2)");
  intervene->add_option("--out", int_out, "Output JSON path");

  // ---- experiment ----
  auto* experiment = app.add_subcommand("experiment", "Run an experiment");
  std::string exp_name, exp_config, exp_out;
  bool exp_full = false, exp_timings = false;
  std::optional<int> exp_reps;
  std::optional<std::uint64_t> exp_seed;
  std::optional<double> exp_gamma, exp_budget_factor, exp_lambda_factor,
      exp_rho;
  std::optional<Index> exp_n;
  experiment->add_option("name", exp_name, "holder | sbm | transfer")
      ->required();
  experiment->add_option("--config", exp_config, "Config JSON file");
  experiment->add_flag("--full-scale", exp_full,
                       "Original grids and replication counts");
  experiment->add_option("--reps", exp_reps, "Replications per n");
  experiment->add_option("--seed", exp_seed, "Base seed");
  experiment->add_option("--gamma", exp_gamma, "Peer-effect parameter");
  experiment->add_option("--budget", exp_budget_factor,
                         "Budget factor (B = factor*n)");
  experiment->add_option("--lambda", exp_lambda_factor,
                         "Threshold factor (lambda = factor*sqrt(n rho))");
  experiment->add_option("--rho", exp_rho, "Constant rho override");
  experiment->add_option("--n", exp_n, "Single-n grid override");
  experiment->add_flag("--timings", exp_timings,
                       "Record wall times (breaks byte-identical reruns)");
  experiment->add_option("--out", exp_out, "Output CSV path");

  // ---- summarize ----
  auto* summ = app.add_subcommand("summarize", "Summarize experiment rows");
  std::string sum_in, sum_out;
  summ->add_option("--in", sum_in, "Rows CSV path")->required();
  summ->add_option("--out", sum_out, "Summary CSV path");

  CLI11_PARSE(app, argc, argv);

  if (sample->parsed()) {
    GraphonModel model = model_from_string(sample_model, sample_seed);
    SampledNetwork net = sample_network(model, sample_n, sample_rho, sample_seed);
    save_network(net, sample_out);
    std::cout << "wrote " << sample_out << ".edges (" << net.A.edge_count()
              << " edges) and " << sample_out << ".json\n";
    return 0;
  }

  if (estimate->parsed()) {
    SampledNetwork net = load_network(est_in);
    const double lambda =
        est_lambda >= 0.0
            ? est_lambda
            : est_lambda_factor * std::sqrt(static_cast<double>(net.n) * net.rho);
    svt::SvtEstimate e = svt::svt(net.A.op(), lambda, est_seed, net.rho);
    std::ofstream out(est_out);
    if (!out) throw ArgumentError("cannot write " + est_out);
    out << e.to_json() << "\n";
    std::cout << "lambda=" << lambda << " rank=" << e.rank() << " -> "
              << est_out << "\n";
    return 0;
  }

  if (intervene->parsed()) {
    SampledNetwork net = load_network(int_in);
    Vec theta = theta_for_network(net, int_theta);
    const double budget =
        int_budget >= 0.0 ? int_budget : static_cast<double>(net.n) / 2.0;
    games::NetworkProblem problem(net.A, theta, int_gamma, budget);
    games::InterventionSolution sol =
        games::solve_network_intervention(problem);
    std::ofstream out(int_out);
    if (!out) throw ArgumentError("cannot write " + int_out);
    out << sol.to_json(problem, int_in) << "\n";
    std::cout << "welfare=" << sol.welfare << " L=" << sol.lagrange
              << " residual=" << sol.budget_residual << " -> " << int_out
              << "\n";
    return 0;
  }

  if (experiment->parsed()) {
    harness::ExperimentConfig config =
        !exp_config.empty() ? harness::ExperimentConfig::from_json_file(exp_config)
        : exp_full          ? harness::ExperimentConfig::full_scale(exp_name)
                            : harness::ExperimentConfig::desk_default(exp_name);
    if (!exp_config.empty() && config.experiment != exp_name)
      throw ArgumentError("config experiment does not match subcommand");
    if (exp_reps) config.replications = *exp_reps;
    if (exp_seed) config.base_seed = *exp_seed;
    if (exp_gamma) config.gamma = *exp_gamma;
    if (exp_budget_factor)
      config.budget = {harness::BudgetRule::Type::proportional,
                       *exp_budget_factor};
    if (exp_lambda_factor) config.lambda.factor = *exp_lambda_factor;
    if (exp_rho) config.rho = {harness::RhoRule::Type::constant, *exp_rho};
    if (exp_n) config.n_grid = {*exp_n};
    if (exp_timings) config.record_timings = true;
    if (!exp_out.empty()) config.out_path = exp_out;
    config.validate();

    auto rows = harness::run_experiment(config);
    if (config.out_path.empty()) {
      harness::write_rows_csv(rows, std::cout);
    } else {
      std::ofstream out(config.out_path, std::ios::binary);
      if (!out) throw ArgumentError("cannot write " + config.out_path);
      harness::write_rows_csv(rows, out);
      std::cout << "wrote " << rows.size() << " rows to " << config.out_path
                << "\n";
    }
    return 0;
  }

  if (summ->parsed()) {
    std::ifstream in(sum_in);
    if (!in) throw ArgumentError("cannot read " + sum_in);
    auto rows = harness::read_rows_csv(in);
    auto summary = harness::summarize(rows);
    if (sum_out.empty()) {
      harness::write_summary_csv(summary, std::cout);
    } else {
      std::ofstream out(sum_out, std::ios::binary);
      if (!out) throw ArgumentError("cannot write " + sum_out);
      harness::write_summary_csv(summary, out);
      std::cout << "wrote " << summary.size() << " summary rows to " << sum_out
                << "\n";
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const graphon::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const graphon::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
