#include <fstream>
#include <random>
#include <set>

#include "decopt/harness.hpp"

namespace decopt {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ValidationError(where + ": unknown field '" + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("field '") + key + "': " + e.what());
  }
}

Matrix matrix_from(const json& rows, const std::string& where) {
  if (!rows.is_array() || rows.empty()) throw ValidationError(where + ": expected a 2-D array");
  const auto r = static_cast<Eigen::Index>(rows.size());
  Eigen::Index c = -1;
  Matrix m;
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows[i];
    if (row.is_number()) {
      // a flat list is a column
      if (c == -1) {
        c = 1;
        m.resize(r, 1);
      }
      if (c != 1) throw ValidationError(where + ": ragged array");
      m(i, 0) = row.get<double>();
      continue;
    }
    if (!row.is_array()) throw ValidationError(where + ": expected numbers");
    if (c == -1) {
      c = static_cast<Eigen::Index>(row.size());
      m.resize(r, c);
    }
    if (static_cast<Eigen::Index>(row.size()) != c) throw ValidationError(where + ": ragged array");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row[j].get<double>();
  }
  return m;
}

DataSplit parse_split(const std::string& s) {
  if (s == "homogeneous") return DataSplit::Homogeneous;
  if (s == "heterogeneous") return DataSplit::Heterogeneous;
  throw ValidationError("problem.split must be homogeneous or heterogeneous, got '" + s + "'");
}

struct BuiltProblem {
  ProblemPtr problem;
  std::optional<Instance> instance;
};

BuiltProblem build_problem(const json& p, std::uint64_t seed) {
  check_keys(p, "problem",
             {"family", "agents", "dimension", "samples_per_agent", "seed", "split", "clusters",
              "lambda", "rho", "hidden", "label_noise", "shifts", "path", "model"});
  const std::string family = get_or<std::string>(p, "family", "");
  if (family == "example3") return {nullptr, example3()};
  if (family == "example4") {
    Vector shifts{{0.0, 1.0, 2.0}};
    if (p.contains("shifts")) shifts = matrix_from(p.at("shifts"), "problem.shifts").col(0);
    return {nullptr, example4(shifts)};
  }
  if (family == "csv") {
    const std::string path = get_or<std::string>(p, "path", "");
    std::ifstream in(path);
    if (!in) throw ValidationError("problem.path: cannot open '" + path + "'");
    const int d = get_or<int>(p, "dimension", 0);
    const int n = get_or<int>(p, "agents", 0);
    if (d < 1 || n < 1) throw ValidationError("csv problem needs dimension and agents");
    auto data = load_agent_csv(in, d, n);
    const std::string model = get_or<std::string>(p, "model", "ncvx_logistic");
    if (model == "ncvx_logistic") {
      return {std::make_shared<NcvxLogisticProblem>(std::move(data), get_or(p, "lambda", 0.01),
                                                    get_or(p, "rho", 1.0))};
    }
    if (model == "tiny_mlp") {
      return {std::make_shared<TinyMlpProblem>(
          std::move(data), get_or<std::vector<int>>(p, "hidden", {16, 8}))};
    }
    throw ValidationError("problem.model must be ncvx_logistic or tiny_mlp");
  }
  SyntheticSpec spec;
  spec.family = family;
  spec.agents = get_or(p, "agents", spec.agents);
  spec.dimension = get_or(p, "dimension", spec.dimension);
  spec.samples_per_agent = get_or(p, "samples_per_agent", spec.samples_per_agent);
  spec.seed = get_or<std::uint64_t>(p, "seed", seed);
  spec.split = parse_split(get_or<std::string>(p, "split", "homogeneous"));
  spec.clusters = get_or(p, "clusters", spec.clusters);
  spec.lambda = get_or(p, "lambda", spec.lambda);
  spec.rho = get_or(p, "rho", spec.rho);
  spec.hidden = get_or(p, "hidden", spec.hidden);
  spec.label_noise = get_or(p, "label_noise", spec.label_noise);
  return {generate_synthetic(spec)};
}

Topology build_topology(const json& g, const std::string& mixing, int agents,
                        std::uint64_t seed) {
  check_keys(g, "graph", {"type", "n", "degree", "seed"});
  const std::string kind = get_or<std::string>(g, "type", "complete");
  const int n = get_or(g, "n", agents);
  if (n != agents) {
    throw ValidationError("graph.n = " + std::to_string(n) + " but the problem has " +
                          std::to_string(agents) + " agents");
  }
  Graph graph = build_graph(kind, n, get_or(g, "degree", 0), get_or<std::uint64_t>(g, "seed", seed));
  if (mixing == "max_degree") return Topology(graph, max_degree_mixing(graph));
  if (mixing == "lazy_max_degree") return Topology(graph, lazy_max_degree_mixing(graph));
  throw ValidationError("mixing must be max_degree or lazy_max_degree, got '" + mixing + "'");
}

OracleSpec parse_oracle(const json& o) {
  check_keys(o, "oracle", {"mode", "batch_size", "noise_std", "sigma"});
  OracleSpec spec;
  spec.mode = parse_oracle_mode(get_or<std::string>(o, "mode", "batch"));
  spec.batch_size = get_or(o, "batch_size", spec.batch_size);
  spec.noise_std = get_or(o, "noise_std", spec.noise_std);
  if (o.contains("sigma") && !o.at("sigma").is_null()) spec.sigma = o.at("sigma").get<double>();
  return spec;
}

InitSpec parse_init(const json& i) {
  check_keys(i, "init", {"kind", "scale", "values"});
  InitSpec spec;
  const std::string kind = get_or<std::string>(i, "kind", "zeros");
  if (kind == "zeros") {
    spec.kind = InitKind::Zeros;
  } else if (kind == "random") {
    spec.kind = InitKind::Random;
  } else if (kind == "consensual_random") {
    spec.kind = InitKind::ConsensualRandom;
  } else if (kind == "values") {
    spec.kind = InitKind::Values;
    if (!i.contains("values")) throw ValidationError("init.values missing");
    spec.values = matrix_from(i.at("values"), "init.values");
  } else {
    throw ValidationError("init.kind must be zeros, random, consensual_random or values");
  }
  spec.scale = get_or(i, "scale", spec.scale);
  if (!(spec.scale > 0)) throw ValidationError("init.scale must be positive");
  return spec;
}

}  // namespace

Stack make_initial(const InitSpec& init, int agents, int dimension, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, init.scale);
  Stack x = Stack::Zero(agents, dimension);
  switch (init.kind) {
    case InitKind::Zeros:
      break;
    case InitKind::Random:
      for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = normal(rng);
      break;
    case InitKind::ConsensualRandom: {
      Vector v(dimension);
      for (auto& e : v) e = normal(rng);
      v.array() -= v.mean();
      x.rowwise() = v.transpose();
      break;
    }
    case InitKind::Values:
      if (init.values.rows() != agents || init.values.cols() != dimension) {
        throw ValidationError("init.values must be " + std::to_string(agents) + "x" +
                              std::to_string(dimension));
      }
      x = init.values;
      break;
  }
  return x;
}

static ExperimentConfig parse_experiment_impl(const json& c) {
  check_keys(c, "config",
             {"name", "seed", "problem", "graph", "mixing", "oracle", "algorithm", "stepsize", "c",
              "beta", "Q", "iters", "force", "target_eps", "divergence_threshold", "replicates",
              "metric_every", "init", "output", "expect_divergence", "extra_tilde"});
  ExperimentConfig cfg;
  cfg.source = c;
  cfg.name = get_or<std::string>(c, "name", "run");
  cfg.seed = get_or<std::uint64_t>(c, "seed", 1);
  if (!c.contains("problem")) throw ValidationError("config: problem is required");
  if (!c.contains("algorithm")) throw ValidationError("config: algorithm is required");

  BuiltProblem built = build_problem(c.at("problem"), cfg.seed);
  if (built.instance) {
    if (c.contains("graph") || c.contains("mixing")) {
      throw ValidationError("example instances carry their own graph and mixing matrix");
    }
    cfg.problem = built.instance->problem;
    cfg.topology = std::make_shared<const Topology>(built.instance->topology);
    cfg.instance_initial = built.instance->initial;
  } else {
    cfg.problem = built.problem;
    cfg.topology = std::make_shared<const Topology>(
        build_topology(c.value("graph", json::object()),
                       get_or<std::string>(c, "mixing", "max_degree"), cfg.problem->agents(),
                       cfg.seed));
  }
  const int n = cfg.problem->agents();
  const int d = cfg.problem->dimension();

  RunSpec& run = cfg.run;
  run.oracle = parse_oracle(c.value("oracle", json::object()));
  run.algo.id = parse_algorithm(get_or<std::string>(c, "algorithm", ""));
  run.iterations = get_or(c, "iters", 100);
  if (run.iterations < 1) throw ValidationError("iters must be positive");
  run.metric_every = get_or(c, "metric_every", 1);
  if (run.metric_every < 1) throw ValidationError("metric_every must be positive");
  run.policy.target_eps = get_or(c, "target_eps", 0.0);
  run.policy.divergence_threshold = get_or(c, "divergence_threshold", 1e6);
  run.algo.force = get_or(c, "force", false);
  run.algo.chebyshev_order = get_or(c, "Q", 0);
  if (c.contains("extra_tilde")) run.algo.extra_tilde = matrix_from(c.at("extra_tilde"), "extra_tilde");
  cfg.expect_divergence = get_or(c, "expect_divergence", false);
  cfg.replicates = get_or(c, "replicates", run.oracle.mode == OracleMode::Batch ? 1 : 5);
  if (cfg.replicates < 1) throw ValidationError("replicates must be positive");
  if (c.contains("output")) cfg.output = get_or<std::string>(c, "output", "");

  if (cfg.instance_initial && !c.contains("init")) {
    cfg.init.kind = InitKind::Values;
    cfg.init.values = *cfg.instance_initial;
  } else {
    cfg.init = parse_init(c.value("init", json::object()));
  }
  // Validate the initial stack shape up front.
  const Stack theta0 = make_initial(cfg.init, n, d, cfg.seed);

  std::optional<double> lipschitz;
  auto lip = [&] {
    if (!lipschitz) lipschitz = estimate_stacked_lipschitz(*cfg.problem, theta0);
    if (!(*lipschitz > 0)) throw ValidationError("cannot derive defaults: stacked gradient is flat");
    return *lipschitz;
  };

  const json step = c.value("stepsize", json{{"kind", "auto"}});
  check_keys(step, "stepsize", {"kind", "alpha", "gamma", "c", "kappa", "sigma"});
  const std::string kind = get_or<std::string>(step, "kind", "auto");
  if (kind == "constant") {
    if (step.contains("gamma")) {
      run.algo.step = StepSize::constant(scaled_step(step.at("gamma").get<double>(), n));
    } else {
      run.algo.step = StepSize::constant(get_or(step, "alpha", 0.0));
    }
  } else if (kind == "one_over_t") {
    run.algo.step = StepSize::one_over_t(get_or(step, "c", 1.0));
  } else if (kind == "horizon") {
    double sigma = get_or(step, "sigma", run.oracle.sigma.value_or(run.oracle.noise_std));
    run.algo.step = StepSize::horizon(get_or(step, "kappa", 1.0), n, sigma, run.iterations);
  } else if (kind == "auto") {
    const double sigma = run.oracle.sigma.value_or(run.oracle.noise_std);
    if (is_stochastic_method(run.algo.id) && sigma > 0) {
      run.algo.step = StepSize::horizon(1.0, n, sigma, run.iterations);
    } else {
      run.algo.step = StepSize::constant(1.0 / (4.0 * lip()));
    }
  } else {
    throw ValidationError("stepsize.kind must be constant, one_over_t, horizon or auto");
  }

  const bool primal_dual =
      run.algo.id == AlgorithmId::ProxGpda || run.algo.id == AlgorithmId::Xfilter;
  if (primal_dual) {
    run.algo.c = c.contains("c") ? get_or(c, "c", 0.0) : lip();
    if (!c.contains("beta")) {
      run.algo.beta = Vector::Constant(1, run.algo.c);
    } else if (c.at("beta").is_number()) {
      run.algo.beta = Vector::Constant(1, c.at("beta").get<double>());
    } else {
      run.algo.beta = matrix_from(c.at("beta"), "beta").col(0);
    }
  }
  // Surface oracle and algorithm validation errors before any run starts.
  GradientOracle(cfg.problem, run.oracle, cfg.seed);
  make_stepper(run.algo, *cfg.topology);
  return cfg;
}

ExperimentConfig parse_experiment(const json& c) {
  try {
    return parse_experiment_impl(c);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_experiment(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open config '" + file.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + file.string() + "': " + e.what());
  }
  return parse_experiment(j);
}

}  // namespace decopt
