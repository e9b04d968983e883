#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "decopt/problems.hpp"
#include "decopt/types.hpp"

namespace decopt {

enum class OracleMode { Batch, Streaming, Minibatch };

OracleMode parse_oracle_mode(std::string_view name);
std::string_view to_string(OracleMode mode);

struct OracleSpec {
  OracleMode mode = OracleMode::Batch;
  int batch_size = 1;            // m, streaming and minibatch only
  double noise_std = 0.0;        // streaming: per-coordinate std of one sample
  std::optional<double> sigma;   // declared variance bound, metadata only
};

struct GradientEstimate {
  Stack grads;                   // n x d, row i = DO_i / n
  std::int64_t sample_evals = 0;
};

// Per-agent data oracle. Every agent owns its own random stream, so the
// values drawn for agent i do not depend on the order agents are queried.
//
// - batch:     exact local gradients.
// - streaming: exact gradient plus N(0, noise_std^2 / m I) per agent.
// - minibatch: mean of m per-sample gradients drawn uniformly with
//              replacement from the local dataset; m = M_i is the
//              full local pass.
//
// Every mode returns the stack scaled by 1/n.
class GradientOracle {
 public:
  GradientOracle(ProblemPtr problem, OracleSpec spec, std::uint64_t seed);

  GradientEstimate evaluate(const Stack& theta);

  const Problem& problem() const { return *problem_; }
  const ProblemPtr& problem_ptr() const { return problem_; }
  const OracleSpec& spec() const { return spec_; }
  bool stochastic() const { return spec_.mode != OracleMode::Batch; }
  const std::vector<std::int64_t>& per_agent_evals() const { return per_agent_evals_; }
  // Per-sample evaluations charged by one call.
  std::int64_t cost_per_call() const;

 private:
  Vector agent_estimate(int agent, const Vector& theta);

  ProblemPtr problem_;
  OracleSpec spec_;
  std::vector<std::mt19937_64> streams_;
  std::vector<std::int64_t> per_agent_evals_;
};

struct UnbiasednessReport {
  int trials = 0;
  double max_deviation = 0.0;   // max |mean - exact| over entries
  double worst_sigma_ratio = 0.0;  // max |mean - exact| / (std / sqrt(N))
  bool passed = false;
};

// Compares the empirical mean of `trials` draws of `estimate` with `exact`,
// entry by entry, against a 4 standard-error band.
UnbiasednessReport check_unbiased(const Stack& exact, const std::function<Stack()>& estimate,
                                  int trials);
UnbiasednessReport unbiasedness_check(ProblemPtr problem, const OracleSpec& spec,
                                      const Stack& theta, int trials, std::uint64_t seed);

// Trace of the empirical covariance of the stacked estimator at theta.
double estimator_variance(ProblemPtr problem, const OracleSpec& spec, const Stack& theta,
                          int trials, std::uint64_t seed);

// Exact (1/n)-scaled stacked gradient.
Stack exact_stacked_gradient(const Problem& problem, const Stack& theta);

}  // namespace decopt
