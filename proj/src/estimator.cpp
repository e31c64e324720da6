#include "graphon/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "graphon/errors.hpp"

namespace graphon::svt {

using nlohmann::json;

Mat SvtEstimate::reconstruction() const {
  return spectral::reconstruct(triples, n, n);
}

Mat SvtEstimate::symmetrized() const {
  Mat q = reconstruction();
  return 0.5 * (q + q.transpose());
}

std::string SvtEstimate::to_json() const {
  json j;
  j["lambda"] = lambda;
  j["n"] = n;
  j["rank"] = rank();
  j["rho_used"] = rho_used;
  json sigma = json::array(), u = json::array(), v = json::array();
  for (const auto& t : triples) {
    sigma.push_back(t.sigma);
    json uc = json::array(), vc = json::array();
    for (Index i = 0; i < t.u.size(); ++i) uc.push_back(t.u(i));
    for (Index i = 0; i < t.v.size(); ++i) vc.push_back(t.v(i));
    u.push_back(std::move(uc));
    v.push_back(std::move(vc));
  }
  j["sigma"] = std::move(sigma);
  j["U"] = std::move(u);
  j["V"] = std::move(v);
  return j.dump();
}

SvtEstimate SvtEstimate::from_json(const std::string& text) {
  json j = json::parse(text);
  SvtEstimate e;
  e.lambda = j.at("lambda").get<double>();
  e.n = j.at("n").get<Index>();
  e.rho_used = j.at("rho_used").get<double>();
  const auto& sigma = j.at("sigma");
  const auto& u = j.at("U");
  const auto& v = j.at("V");
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    SvdTriple t;
    t.sigma = sigma.at(k).get<double>();
    t.u.resize(static_cast<Index>(u.at(k).size()));
    t.v.resize(static_cast<Index>(v.at(k).size()));
    for (Index i = 0; i < t.u.size(); ++i) t.u(i) = u.at(k).at(i).get<double>();
    for (Index i = 0; i < t.v.size(); ++i) t.v(i) = v.at(k).at(i).get<double>();
    e.triples.push_back(std::move(t));
  }
  return e;
}

SvtEstimate svt(const spectral::LinearOp& a, double lambda, std::uint64_t seed,
                double rho_used) {
  if (lambda < 0.0) throw ArgumentError("svt: lambda must be >= 0");
  if (a.rows() != a.cols()) throw ArgumentError("svt: matrix not square");
  const Index n = a.rows();

  std::vector<SvdTriple> triples;
  Index request = std::min<Index>(8, n);
  while (true) {
    triples = spectral::truncated_svd(a, request, spectral::kDefaultOversample,
                                      spectral::kDefaultPowerIters, seed);
    const bool all_above = triples.back().sigma >= lambda;
    if (!all_above || request == n) break;
    request = std::min<Index>(2 * request, n);
  }

  SvtEstimate e;
  e.lambda = lambda;
  e.n = n;
  e.rho_used = rho_used;
  for (auto& t : triples) {
    if (t.sigma >= lambda) e.triples.push_back(std::move(t));
  }
  return e;
}

double default_lambda(Index n, double rho) {
  if (n < 1) throw ArgumentError("default_lambda: n must be >= 1");
  if (!(rho > 0.0) || rho > 1.0)
    throw ArgumentError("default_lambda: rho must lie in (0,1]");
  return 6.0 * std::sqrt(static_cast<double>(n) * rho);
}

SvtEstimate svt_missing_links(const spectral::LinearOp& a_tilde, double p,
                              double lambda, std::uint64_t seed,
                              double rho_used) {
  if (!(p > 0.0) || p > 1.0)
    throw ArgumentError("svt_missing_links: p must lie in (0,1]");
  Mat scaled = a_tilde.to_dense() / p;
  SvtEstimate e = svt(spectral::LinearOp(scaled), lambda / p, seed, rho_used);
  e.lambda = lambda;  // report the threshold on the unscaled matrix
  return e;
}

StepGraphon estimate_graphon(const SampledNetwork& network, double lambda,
                             std::uint64_t seed, bool clip_entries) {
  SvtEstimate e = svt(network.A.op(), lambda, seed, network.rho);
  Mat q = e.reconstruction();
  if (clip_entries) q = q.cwiseMax(0.0).cwiseMin(1.0);
  return empirical_graphon(q);
}

BoundReport bound_report(Index n, double rho, double delta, double lambda,
                         double c_universal) {
  if (!(delta > 0.0) || delta > 1.0)
    throw ArgumentError("bound_report: delta must lie in (0,1]");
  if (n < 1) throw ArgumentError("bound_report: n must be >= 1");
  BoundReport r;
  r.delta = delta;
  r.c_universal = c_universal;
  const double nd = static_cast<double>(n);
  r.w_delta = 4.0 * std::sqrt(nd * rho) +
              std::sqrt(c_universal * std::log(nd / delta));
  r.theoretical_error_bound = lambda + r.w_delta;
  return r;
}

}  // namespace graphon::svt
