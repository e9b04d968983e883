#include "decopt/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>

#include <fmt/format.h>

namespace decopt {

RunResult simulate(ProblemPtr problem, const Topology& topo, const Stack& theta0,
                   const RunSpec& spec) {
  return simulate(std::move(problem), topo, initial_state(topo, theta0), spec);
}

RunResult simulate(ProblemPtr problem, const Topology& topo, AlgoState state,
                   const RunSpec& spec) {
  GradientOracle oracle(problem, spec.oracle, spec.seed);
  auto stepper = make_stepper(spec.algo, topo);
  RunResult result{RunLog(problem, spec.policy), {}, RunStatus::Running, 0, {}};
  RunLog& log = result.log;

  bool alive = true;
  try {
    stepper->initialize(state, oracle);
  } catch (const NonFiniteError&) {
    log.record_divergence(0, state.counters);
    alive = false;
  }
  if (alive && log.record(0, state.theta, state.counters).status == RunStatus::Running) {
    for (int t = 1; t <= spec.iterations; ++t) {
      if (stepper->step(state, oracle) == StepStatus::Diverged) {
        log.record_divergence(t, state.counters);
        break;
      }
      if (t % spec.metric_every == 0 || t == spec.iterations) {
        if (log.record(t, state.theta, state.counters).status != RunStatus::Running) break;
      }
    }
  }
  result.status = log.status();
  result.iterations_run = state.t;
  result.warnings = state.warnings;
  result.state = std::move(state);
  return result;
}

std::string ExperimentSummary::line() const {
  const RunRecord& row = replicates.front().final_row;
  return fmt::format(
      "{} status={} final_gap={:.6e} comm_rounds={} grad_eval_rounds={} iters={} replicates={}",
      name, to_string(status), median_final_gap, row.counters.comm_rounds,
      row.counters.grad_eval_rounds, row.iter, replicates.size());
}

namespace {

std::uint64_t replicate_seed(std::uint64_t seed, int r) {
  return seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(r);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 const std::optional<std::filesystem::path>& out_dir) {
  ExperimentSummary summary;
  summary.name = config.name;
  if (out_dir) std::filesystem::create_directories(*out_dir);
  std::vector<double> finals;
  const int n = config.problem->agents(), d = config.problem->dimension();
  for (int r = 0; r < config.replicates; ++r) {
    const std::uint64_t seed = replicate_seed(config.seed, r);
    RunSpec spec = config.run;
    spec.seed = seed;
    const Stack theta0 = make_initial(config.init, n, d, seed + 1);
    RunResult res = simulate(config.problem, *config.topology, theta0, spec);

    ReplicateOutcome out;
    out.seed = seed;
    out.status = res.status;
    out.final_row = res.log.last();
    if (config.run.policy.target_eps > 0) out.at_target = res.log.first_reaching(config.run.policy.target_eps);
    if (out_dir) {
      const std::string file =
          config.replicates == 1 ? config.name + ".csv" : fmt::format("{}_r{}.csv", config.name, r);
      out.csv = *out_dir / file;
      std::ofstream csv(out.csv, std::ios::binary);
      if (!csv) throw std::runtime_error("cannot write " + out.csv.string());
      res.log.write_csv(csv);
    }
    for (auto& w : res.warnings) summary.warnings.push_back(std::move(w));
    finals.push_back(out.final_row.gap);
    summary.replicates.push_back(std::move(out));
  }
  summary.median_final_gap = median(finals);
  const bool any_diverged = std::any_of(summary.replicates.begin(), summary.replicates.end(),
                                        [](const auto& r) { return r.status == RunStatus::Diverged; });
  const bool all_converged = std::all_of(summary.replicates.begin(), summary.replicates.end(),
                                         [](const auto& r) { return r.status == RunStatus::Converged; });
  summary.status = any_diverged    ? RunStatus::Diverged
                   : all_converged ? RunStatus::Converged
                                   : RunStatus::Running;
  return summary;
}

std::optional<std::filesystem::path> default_output_dir() {
  if (const char* dir = std::getenv("DECOPT_OUT_DIR"); dir && *dir) return std::filesystem::path(dir);
  return std::nullopt;
}

nlohmann::json apply_axis(nlohmann::json base, const std::string& axis, const std::string& value) {
  auto number = [&](const char* what) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(std::string(what) + " sweep value '" + value + "' is not an integer");
    }
  };
  if (axis == "algorithm") {
    base["algorithm"] = value;
  } else if (axis == "graph") {
    base["graph"]["type"] = value;
  } else if (axis == "batch_size") {
    base["oracle"]["batch_size"] = number("batch_size");
  } else if (axis == "n") {
    const int n = number("n");
    base["problem"]["agents"] = n;
    if (base.contains("graph") && base["graph"].contains("n")) base["graph"]["n"] = n;
  } else if (axis == "heterogeneity") {
    base["problem"]["split"] = value;
  } else {
    throw ValidationError("sweep axis must be algorithm, graph, batch_size, n or heterogeneity; got '" +
                          axis + "'");
  }
  base["name"] = base.value("name", std::string("run")) + "_" + axis + "_" + value;
  return base;
}

SweepResult sweep(const nlohmann::json& base, const std::string& axis,
                  const std::vector<std::string>& values,
                  const std::optional<std::filesystem::path>& out_dir) {
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  SweepResult result;
  result.axis = axis;
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) configs.push_back(parse_experiment(apply_axis(base, axis, v)));
  result.target_eps = configs.front().run.policy.target_eps;
  for (std::size_t k = 0; k < values.size(); ++k) {
    result.points.push_back({values[k], run_experiment(configs[k], out_dir)});
  }
  auto key = [](const SweepPoint& p) {
    const auto& at = p.summary.replicates.front().at_target;
    constexpr auto inf = std::numeric_limits<std::int64_t>::max();
    return std::tuple(at ? at->counters.grad_eval_rounds : inf, at ? at->counters.comm_rounds : inf,
                      p.summary.median_final_gap);
  };
  std::stable_sort(result.points.begin(), result.points.end(),
                   [&](const SweepPoint& a, const SweepPoint& b) { return key(a) < key(b); });
  if (out_dir) {
    std::ofstream out(*out_dir / (base.value("name", std::string("run")) + "_" + axis + "_summary.csv"),
                      std::ios::binary);
    result.write_summary(out);
  }
  return result;
}

void SweepResult::write_summary(std::ostream& out) const {
  out << "value,status,median_final_gap,iters_to_target,comm_to_target,grad_to_target\n";
  for (const auto& p : points) {
    const auto& at = p.summary.replicates.front().at_target;
    out << fmt::format("{},{},{:.17g},", p.value, to_string(p.summary.status),
                       p.summary.median_final_gap);
    if (at) {
      out << fmt::format("{},{},{}\n", at->iter, at->counters.comm_rounds,
                         at->counters.grad_eval_rounds);
    } else {
      out << ",,\n";
    }
  }
}

}  // namespace decopt
