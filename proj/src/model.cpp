#include "graphon/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <vector>

#include "graphon/errors.hpp"
#include "graphon/prng.hpp"

namespace graphon {

using nlohmann::json;

namespace {

constexpr double kPartitionTol = 1e-12;

void check_partition(const Vec& lengths, const char* who) {
  if (lengths.size() < 1) throw ArgumentError(std::string(who) + ": empty partition");
  if ((lengths.array() <= 0.0).any())
    throw ArgumentError(std::string(who) + ": non-positive cell length");
  if (std::abs(lengths.sum() - 1.0) > kPartitionTol)
    throw ArgumentError(std::string(who) + ": lengths do not sum to 1");
}

Index cell_of(const Vec& lengths, double x) {
  double cum = 0.0;
  for (Index i = 0; i < lengths.size(); ++i) {
    cum += lengths(i);
    if (x < cum) return i;
  }
  return lengths.size() - 1;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  if (rows == 0) throw ArgumentError("matrix JSON: empty");
  const Index cols = static_cast<Index>(j.at(0).size());
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  return m;
}

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vec vec_from_json(const json& j) {
  Vec v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

}  // namespace

StepGraphon StepGraphon::uniform(Mat values) {
  StepGraphon g;
  const Index n = values.rows();
  g.lengths = Vec::Constant(n, 1.0 / static_cast<double>(n));
  g.values = std::move(values);
  return g;
}

StepGraphon StepGraphon::constant(double c) {
  return {Vec::Ones(1), Mat::Constant(1, 1, c)};
}

double StepGraphon::at(double x, double y) const {
  return values(cell_of(lengths, x), cell_of(lengths, y));
}

StepFunction StepFunction::uniform(Vec values) {
  StepFunction f;
  const Index n = values.size();
  f.lengths = Vec::Constant(n, 1.0 / static_cast<double>(n));
  f.values = std::move(values);
  return f;
}

StepFunction StepFunction::constant(double c) {
  return {Vec::Ones(1), Vec::Constant(1, c)};
}

double StepFunction::l2_norm() const {
  return std::sqrt(lengths.dot(values.cwiseProduct(values)));
}

double StepFunction::integral() const { return lengths.dot(values); }

double StepFunction::at(double x) const { return values(cell_of(lengths, x)); }

Refinement refine(const Vec& lengths1, const Vec& lengths2) {
  Refinement r;
  std::vector<double> lens;
  Index i = 0, j = 0;
  double rem1 = lengths1(0), rem2 = lengths2(0);
  while (true) {
    const double step = std::min(rem1, rem2);
    lens.push_back(step);
    r.map1.push_back(i);
    r.map2.push_back(j);
    rem1 -= step;
    rem2 -= step;
    const bool adv1 = rem1 <= kPartitionTol;
    const bool adv2 = rem2 <= kPartitionTol;
    if (adv1 && i + 1 == lengths1.size() && adv2 && j + 1 == lengths2.size())
      break;
    if (adv1) {
      if (i + 1 == lengths1.size()) {
        // trailing sliver from rounding; fold it into the last cell
        rem1 = rem2;
      } else {
        rem1 = lengths1(++i);
      }
    }
    if (adv2) {
      if (j + 1 == lengths2.size()) {
        rem2 = rem1;
      } else {
        rem2 = lengths2(++j);
      }
    }
  }
  r.lengths = Eigen::Map<Vec>(lens.data(), static_cast<Index>(lens.size()));
  return r;
}

double inner_product(const StepFunction& f, const StepFunction& g) {
  Refinement r = refine(f.lengths, g.lengths);
  double acc = 0.0;
  for (Index c = 0; c < r.lengths.size(); ++c)
    acc += r.lengths(c) * f.values(r.map1[c]) * g.values(r.map2[c]);
  return acc;
}

GraphonModel GraphonModel::sbm(Vec breakpoints, Mat block) {
  const Index k = block.rows();
  if (block.cols() != k || k < 1) throw ArgumentError("sbm: block matrix not square");
  if (breakpoints.size() != k - 1)
    throw ArgumentError("sbm: need k-1 breakpoints");
  for (Index i = 0; i < breakpoints.size(); ++i) {
    if (breakpoints(i) <= 0.0 || breakpoints(i) >= 1.0)
      throw ArgumentError("sbm: breakpoints must lie in (0,1)");
    if (i > 0 && breakpoints(i) <= breakpoints(i - 1))
      throw ArgumentError("sbm: breakpoints must be strictly increasing");
  }
  if (!block.isApprox(block.transpose(), 1e-14))
    throw ArgumentError("sbm: block matrix not symmetric");
  if (block.minCoeff() < 0.0 || block.maxCoeff() > 1.0)
    throw ArgumentError("sbm: block entries outside [0,1]");
  return GraphonModel(Sbm{std::move(breakpoints), std::move(block)});
}

GraphonModel GraphonModel::step(StepGraphon g) {
  check_partition(g.lengths, "step model");
  if (!g.values.isApprox(g.values.transpose(), 1e-14))
    throw ArgumentError("step model: value matrix not symmetric");
  if (g.values.minCoeff() < 0.0 || g.values.maxCoeff() > 1.0)
    throw ArgumentError("step model: values outside [0,1]");
  return GraphonModel(Step{std::move(g)});
}

GraphonModel GraphonModel::callable(std::function<double(double, double)> w,
                                    Smoothness smoothness, std::string name) {
  // Probe symmetry and range on a fixed grid.
  for (int a = 0; a < 7; ++a) {
    for (int b = 0; b <= a; ++b) {
      const double x = (a + 0.5) / 7.0, y = (b + 0.37) / 7.0;
      const double wxy = w(x, y), wyx = w(y, x);
      if (std::abs(wxy - wyx) > 1e-12)
        throw ArgumentError("callable model: kernel not symmetric at probe");
      if (wxy < 0.0 || wxy > 1.0)
        throw ArgumentError("callable model: kernel value outside [0,1]");
    }
  }
  return GraphonModel(Callable{std::move(w), smoothness, std::move(name)});
}

GraphonModel GraphonModel::named(const std::string& name, double param) {
  if (name == "sqrt_abs_diff") {
    return callable(
        [](double x, double y) { return std::sqrt(std::abs(x - y)); },
        {Smoothness::Kind::holder, 1.0, 0.5}, name);
  }
  if (name == "constant") {
    if (param < 0.0 || param > 1.0)
      throw ArgumentError("named constant: value outside [0,1]");
    return callable([param](double, double) { return param; },
                    {Smoothness::Kind::analytic, param, 1.0}, name);
  }
  throw ArgumentError("unknown named graphon model: " + name);
}

double GraphonModel::operator()(double x, double y) const {
  if (const auto* s = std::get_if<Sbm>(&v_)) {
    auto block_of = [&](double t) {
      Index b = 0;
      while (b < s->breakpoints.size() && t >= s->breakpoints(b)) ++b;
      return b;
    };
    return s->block(block_of(x), block_of(y));
  }
  if (const auto* st = std::get_if<Step>(&v_)) return st->g.at(x, y);
  return std::get<Callable>(v_).w(x, y);
}

std::string GraphonModel::to_json() const {
  json j;
  if (is_sbm()) {
    j["type"] = "sbm";
    j["breakpoints"] = vec_to_json(as_sbm().breakpoints);
    j["S"] = mat_to_json(as_sbm().block);
  } else if (is_step()) {
    j["type"] = "step";
    j["lengths"] = vec_to_json(as_step().g.lengths);
    j["values"] = mat_to_json(as_step().g.values);
  } else {
    const auto& c = as_callable();
    if (c.name.empty())
      throw ArgumentError("cannot serialize an anonymous callable model");
    j["type"] = "named";
    j["name"] = c.name;
    if (c.name == "constant") j["value"] = c.w(0.0, 0.0);
  }
  return j.dump();
}

GraphonModel GraphonModel::from_json(const std::string& text) {
  json j = json::parse(text);
  const std::string type = j.at("type").get<std::string>();
  if (type == "sbm")
    return sbm(vec_from_json(j.at("breakpoints")), mat_from_json(j.at("S")));
  if (type == "step")
    return step({vec_from_json(j.at("lengths")), mat_from_json(j.at("values"))});
  if (type == "named")
    return named(j.at("name").get<std::string>(), j.value("value", 0.0));
  throw ArgumentError("unknown graphon model type: " + type);
}

Index AdjMatrix::n() const {
  return is_dense() ? dense().rows() : sparse().rows();
}

Mat AdjMatrix::to_dense() const { return is_dense() ? dense() : Mat(sparse()); }

spectral::LinearOp AdjMatrix::op() const {
  return is_dense() ? spectral::LinearOp(dense())
                    : spectral::LinearOp(sparse());
}

Vec AdjMatrix::apply(const Vec& x) const {
  return is_dense() ? Vec(dense() * x) : Vec(sparse() * x);
}

Index AdjMatrix::edge_count() const {
  if (is_dense()) {
    return static_cast<Index>(std::llround(dense().sum())) / 2;
  }
  return static_cast<Index>(std::llround(sparse().sum())) / 2;
}

double SampledNetwork::mean_degree() const {
  return n > 0 ? 2.0 * static_cast<double>(A.edge_count()) / static_cast<double>(n)
               : 0.0;
}

SampledNetwork sample_network(const GraphonModel& model, Index n, double rho,
                              std::uint64_t seed, Mat* q_out) {
  if (n < 1) throw ArgumentError("sample_network: n must be >= 1");
  if (!(rho > 0.0) || rho > 1.0)
    throw ArgumentError("sample_network: rho must lie in (0,1]");

  CounterRng rng(seed);
  std::vector<double> xi(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    xi[static_cast<std::size_t>(i)] = rng.uniform01(static_cast<std::uint64_t>(i));
  std::sort(xi.begin(), xi.end());

  SampledNetwork net;
  net.n = n;
  net.xi = Eigen::Map<Vec>(xi.data(), n);
  net.rho = rho;
  net.seed = seed;

  if (q_out) {
    q_out->resize(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        (*q_out)(i, j) = rho * model(net.xi(i), net.xi(j));
  }

  // One uniform per unordered pair {i,j}, i<j, in lexicographic order;
  // counters start after the n draws used for xi.
  const bool sparse_storage = rho < 0.05 && n > 2000;
  auto pair_counter = [n](Index i, Index j) {
    return static_cast<std::uint64_t>(n) +
           static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n) -
           static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(i + 1) / 2 +
           static_cast<std::uint64_t>(j - i - 1);
  };

  if (sparse_storage) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(rho * static_cast<double>(n) *
                                           static_cast<double>(n)));
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        const double q = rho * model(net.xi(i), net.xi(j));
        if (rng.uniform01(pair_counter(i, j)) < q) {
          trips.emplace_back(static_cast<int>(i), static_cast<int>(j), 1.0);
          trips.emplace_back(static_cast<int>(j), static_cast<int>(i), 1.0);
        }
      }
    }
    SpMat a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    a.makeCompressed();
    net.A = AdjMatrix(std::move(a));
  } else {
    Mat a = Mat::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        const double q = rho * model(net.xi(i), net.xi(j));
        if (rng.uniform01(pair_counter(i, j)) < q) a(i, j) = a(j, i) = 1.0;
      }
    }
    net.A = AdjMatrix(std::move(a));
  }
  return net;
}

StepGraphon empirical_graphon(const Mat& t) {
  if (t.rows() != t.cols())
    throw ArgumentError("empirical_graphon: matrix not square");
  return StepGraphon::uniform(t);
}

double step_graphon_opnorm(const StepGraphon& g) {
  check_partition(g.lengths, "step_graphon_opnorm");
  const Vec d = g.lengths.cwiseSqrt();
  Mat scaled = d.asDiagonal() * g.values * d.asDiagonal();
  return spectral::operator_norm(spectral::LinearOp(scaled));
}

double step_graphon_distance(const StepGraphon& g1, const StepGraphon& g2) {
  Refinement r = refine(g1.lengths, g2.lengths);
  const Index m = r.lengths.size();
  Mat diff(m, m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b)
      diff(a, b) = g1.values(r.map1[a], r.map1[b]) -
                   g2.values(r.map2[a], r.map2[b]);
  return step_graphon_opnorm({r.lengths, std::move(diff)});
}

StepGraphon discretize(const GraphonModel& model, Index m) {
  if (m < 1) throw ArgumentError("discretize: resolution must be >= 1");
  Mat values(m, m);
  for (Index a = 0; a < m; ++a) {
    const double x = (static_cast<double>(a) + 0.5) / static_cast<double>(m);
    for (Index b = 0; b < m; ++b) {
      const double y = (static_cast<double>(b) + 0.5) / static_cast<double>(m);
      values(a, b) = model(x, y);
    }
  }
  return StepGraphon::uniform(std::move(values));
}

void save_network(const SampledNetwork& net, const std::string& base_path) {
  std::ofstream edges(base_path + ".edges");
  if (!edges) throw ArgumentError("cannot write " + base_path + ".edges");
  edges << net.n << "\n";
  if (net.A.is_dense()) {
    const Mat& a = net.A.dense();
    for (Index i = 0; i < net.n; ++i)
      for (Index j = i + 1; j < net.n; ++j)
        if (a(i, j) != 0.0) edges << i << " " << j << "\n";
  } else {
    const SpMat& a = net.A.sparse();
    for (int k = 0; k < a.outerSize(); ++k)
      for (SpMat::InnerIterator it(a, k); it; ++it)
        if (it.row() < it.col()) edges << it.row() << " " << it.col() << "\n";
  }

  json side;
  side["n"] = net.n;
  side["rho"] = net.rho;
  side["seed"] = net.seed;
  side["xi"] = vec_to_json(net.xi);
  std::ofstream sidecar(base_path + ".json");
  sidecar << side.dump(2) << "\n";
}

SampledNetwork load_network(const std::string& base_path) {
  std::ifstream sidecar(base_path + ".json");
  if (!sidecar) throw ArgumentError("cannot read " + base_path + ".json");
  json side = json::parse(sidecar);

  SampledNetwork net;
  net.n = side.at("n").get<Index>();
  net.rho = side.at("rho").get<double>();
  net.seed = side.at("seed").get<std::uint64_t>();
  net.xi = vec_from_json(side.at("xi"));

  std::ifstream edges(base_path + ".edges");
  if (!edges) throw ArgumentError("cannot read " + base_path + ".edges");
  Index n = 0;
  edges >> n;
  if (n != net.n) throw ArgumentError("edge list and sidecar disagree on n");

  const bool sparse_storage = net.rho < 0.05 && n > 2000;
  if (sparse_storage) {
    std::vector<Eigen::Triplet<double>> trips;
    Index i, j;
    while (edges >> i >> j) {
      trips.emplace_back(static_cast<int>(i), static_cast<int>(j), 1.0);
      trips.emplace_back(static_cast<int>(j), static_cast<int>(i), 1.0);
    }
    SpMat a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    a.makeCompressed();
    net.A = AdjMatrix(std::move(a));
  } else {
    Mat a = Mat::Zero(n, n);
    Index i, j;
    while (edges >> i >> j) a(i, j) = a(j, i) = 1.0;
    net.A = AdjMatrix(std::move(a));
  }
  return net;
}

}  // namespace graphon
