#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "decopt/algorithms.hpp"
#include "decopt/metrics.hpp"
#include "decopt/oracles.hpp"
#include "decopt/problems.hpp"
#include "decopt/topology.hpp"

namespace decopt {

struct RunSpec {
  AlgoConfig algo;
  OracleSpec oracle;
  int iterations = 100;
  RecordPolicy policy;
  int metric_every = 1;
  std::uint64_t seed = 0;  // oracle streams
};

struct RunResult {
  RunLog log;
  AlgoState state;
  RunStatus status = RunStatus::Running;
  int iterations_run = 0;
  std::vector<std::string> warnings;
};

// One trajectory: initialize, record t = 0, then step until T, convergence
// or divergence. Rows are recorded every metric_every iterations and at the
// final iteration.
RunResult simulate(ProblemPtr problem, const Topology& topo, const Stack& theta0,
                   const RunSpec& spec);
// Same, with a caller-prepared state (e.g. non-zero initial duals).
RunResult simulate(ProblemPtr problem, const Topology& topo, AlgoState state,
                   const RunSpec& spec);

enum class InitKind { Zeros, Random, ConsensualRandom, Values };

struct InitSpec {
  InitKind kind = InitKind::Zeros;
  double scale = 1.0;
  Matrix values;  // InitKind::Values
};

// Stack for one replicate. Random draws come from `seed`; the consensual
// variant puts the same zero-mean draw on every agent.
Stack make_initial(const InitSpec& init, int agents, int dimension, std::uint64_t seed);

// Parsed, validated JSON experiment.
struct ExperimentConfig {
  nlohmann::json source;
  std::string name = "run";
  ProblemPtr problem;
  std::shared_ptr<const Topology> topology;
  std::optional<Stack> instance_initial;  // example3 / example4
  InitSpec init;
  RunSpec run;
  int replicates = 1;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> output;
  bool expect_divergence = false;
};

// Throws ValidationError on any invalid field.
ExperimentConfig parse_experiment(const nlohmann::json& config);
ExperimentConfig load_experiment(const std::filesystem::path& file);

struct ReplicateOutcome {
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::Running;
  RunRecord final_row;
  std::optional<RunRecord> at_target;
  std::filesystem::path csv;
};

struct ExperimentSummary {
  std::string name;
  std::vector<ReplicateOutcome> replicates;
  RunStatus status = RunStatus::Running;  // diverged if any replicate diverged
  double median_final_gap = 0.0;
  std::vector<std::string> warnings;

  std::string line() const;
};

// Runs every replicate; writes one CSV per replicate when out_dir is set.
ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 const std::optional<std::filesystem::path>& out_dir);

// Directory from the DECOPT_OUT_DIR environment variable, if set.
std::optional<std::filesystem::path> default_output_dir();

struct SweepPoint {
  std::string value;
  ExperimentSummary summary;
};

struct SweepResult {
  std::string axis;
  double target_eps = 0.0;
  std::vector<SweepPoint> points;  // ordered by grad rounds, then comm rounds, to target

  void write_summary(std::ostream& out) const;
};

// axis in {algorithm, graph, batch_size, n, heterogeneity}.
nlohmann::json apply_axis(nlohmann::json base, const std::string& axis, const std::string& value);
SweepResult sweep(const nlohmann::json& base, const std::string& axis,
                  const std::vector<std::string>& values,
                  const std::optional<std::filesystem::path>& out_dir);

}  // namespace decopt
