#include <cmath>
#include <istream>
#include <random>
#include <sstream>

#include "decopt/problems.hpp"

namespace decopt {
namespace {

std::mt19937_64 agent_stream(std::uint64_t seed, int agent) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(agent + 1), 0xda7au};
  return std::mt19937_64(seq);
}

}  // namespace

std::vector<AgentData> synthetic_data(const SyntheticSpec& spec) {
  const int n = spec.agents, d = spec.dimension, m = spec.samples_per_agent;
  if (n < 1 || d < 1 || m < 1) throw ValidationError("synthetic: sizes must be positive");
  if (spec.label_noise < 0 || spec.label_noise >= 0.5) {
    throw ValidationError("synthetic: label_noise must be in [0, 0.5)");
  }
  std::mt19937_64 global(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<AgentData> data(n);

  if (spec.split == DataSplit::Homogeneous) {
    Vector planted(d);
    for (auto& v : planted) v = normal(global);
    for (int i = 0; i < n; ++i) {
      auto rng = agent_stream(spec.seed, i);
      AgentData& a = data[i];
      a.features.resize(m, d);
      a.labels.resize(m);
      a.cluster.assign(m, 0);
      for (int l = 0; l < m; ++l) {
        for (int s = 0; s < d; ++s) a.features(l, s) = normal(rng);
        const double p = 1.0 / (1.0 + std::exp(-a.features.row(l).dot(planted)));
        a.labels(l) = unit(rng) < p ? 1.0 : -1.0;
      }
    }
    return data;
  }

  const int k = spec.clusters > 0 ? spec.clusters : 2 * n;
  if (k < n) {
    throw ValidationError("synthetic: " + std::to_string(k) + " clusters cannot be split " +
                          "exclusively across " + std::to_string(n) + " agents");
  }
  Matrix centers(k, d);
  for (int c = 0; c < k; ++c)
    for (int s = 0; s < d; ++s) centers(c, s) = 2.0 * normal(global);
  for (int i = 0; i < n; ++i) {
    // agent i owns clusters c with floor(c * n / k) == i
    std::vector<int> owned;
    for (int c = 0; c < k; ++c)
      if (static_cast<long>(c) * n / k == i) owned.push_back(c);
    auto rng = agent_stream(spec.seed, i);
    std::uniform_int_distribution<std::size_t> pick(0, owned.size() - 1);
    AgentData& a = data[i];
    a.features.resize(m, d);
    a.labels.resize(m);
    a.cluster.resize(m);
    for (int l = 0; l < m; ++l) {
      const int c = owned[pick(rng)];
      a.cluster[l] = c;
      for (int s = 0; s < d; ++s) a.features(l, s) = centers(c, s) + normal(rng);
      const double label = c % 2 == 0 ? 1.0 : -1.0;
      a.labels(l) = unit(rng) < spec.label_noise ? -label : label;
    }
  }
  return data;
}

ProblemPtr generate_synthetic(const SyntheticSpec& spec) {
  if (spec.family == "ncvx_logistic") {
    return std::make_shared<NcvxLogisticProblem>(synthetic_data(spec), spec.lambda, spec.rho);
  }
  if (spec.family == "tiny_mlp") {
    return std::make_shared<TinyMlpProblem>(synthetic_data(spec), spec.hidden);
  }
  if (spec.family == "quadratic") {
    auto data = synthetic_data(spec);
    Vector curvature = Vector::Ones(spec.agents);
    if (spec.split == DataSplit::Heterogeneous) {
      std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
      std::uniform_real_distribution<double> spread(0.5, 2.0);
      for (auto& a : curvature) a = spread(rng);
    }
    std::vector<Matrix> samples;
    for (auto& a : data) samples.push_back(std::move(a.features));
    return std::make_shared<QuadraticProblem>(std::move(curvature), std::move(samples));
  }
  throw ValidationError("unknown problem family '" + spec.family + "'");
}

Instance example3() {
  auto problem = std::make_shared<QuadraticProblem>(Vector{{1.0, -1.0}}, Matrix::Zero(2, 1));
  Graph g = build_graph("path", 2);
  Matrix w{{0.5, 0.5}, {0.5, 0.5}};
  Stack initial{{1.0}, {2.0}};
  return {problem, Topology(g, explicit_mixing(g, w)), initial};
}

Instance example4(const Vector& shifts) {
  if (shifts.size() != 3) throw ValidationError("example4 needs three shifts");
  // (x - b)^2 = 2 * (x - b)^2 / 2
  auto problem = std::make_shared<QuadraticProblem>(Vector::Constant(3, 2.0), Matrix(shifts));
  Graph g = build_graph("path", 3);
  Matrix w{{0.5, 0.5, 0.0}, {0.5, 0.0, 0.5}, {0.0, 0.5, 0.5}};
  // e_1 overlaps the eigenvector (1, -2, 1) of the -0.5 eigenvalue, which a
  // zero start with equally spaced shifts would never excite.
  Stack initial{{1.0}, {0.0}, {0.0}};
  return {problem, Topology(g, explicit_mixing(g, w)), initial};
}

std::vector<AgentData> load_agent_csv(std::istream& in, int dimension, int agents) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("csv: empty input");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (static_cast<int>(header.size()) != dimension + 2 || header.front() != "label" ||
      header.back() != "agent") {
    throw ValidationError("csv: header must be label,feature_1..feature_" +
                          std::to_string(dimension) + ",agent");
  }
  for (int s = 1; s <= dimension; ++s) {
    if (header[s] != "feature_" + std::to_string(s)) {
      throw ValidationError("csv: unexpected column '" + header[s] + "'");
    }
  }
  std::vector<std::vector<std::vector<double>>> rows(agents);
  std::vector<std::vector<double>> labels(agents);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("csv line " + std::to_string(line_no) + ": bad number '" + cell +
                              "'");
      }
    }
    if (static_cast<int>(values.size()) != dimension + 2) {
      throw ValidationError("csv line " + std::to_string(line_no) + ": expected " +
                            std::to_string(dimension + 2) + " columns");
    }
    const double label = values.front();
    if (label != 1.0 && label != -1.0) {
      throw ValidationError("csv line " + std::to_string(line_no) + ": label must be -1 or +1");
    }
    const double agent = values.back();
    if (agent != std::floor(agent) || agent < 0 || agent >= agents) {
      throw ValidationError("csv line " + std::to_string(line_no) + ": agent out of range");
    }
    const int a = static_cast<int>(agent);
    labels[a].push_back(label);
    rows[a].emplace_back(values.begin() + 1, values.end() - 1);
  }
  std::vector<AgentData> data(agents);
  for (int a = 0; a < agents; ++a) {
    if (rows[a].empty()) throw ValidationError("csv: agent " + std::to_string(a) + " has no rows");
    const auto m = static_cast<Eigen::Index>(rows[a].size());
    data[a].features.resize(m, dimension);
    data[a].labels.resize(m);
    data[a].cluster.assign(rows[a].size(), 0);
    for (Eigen::Index l = 0; l < m; ++l) {
      data[a].labels(l) = labels[a][l];
      for (int s = 0; s < dimension; ++s) data[a].features(l, s) = rows[a][l][s];
    }
  }
  return data;
}

}  // namespace decopt
