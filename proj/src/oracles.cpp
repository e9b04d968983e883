#include "decopt/oracles.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace decopt {

OracleMode parse_oracle_mode(std::string_view name) {
  if (name == "batch") return OracleMode::Batch;
  if (name == "streaming") return OracleMode::Streaming;
  if (name == "minibatch") return OracleMode::Minibatch;
  throw ValidationError("unknown oracle mode '" + std::string(name) + "'");
}

std::string_view to_string(OracleMode mode) {
  switch (mode) {
    case OracleMode::Batch: return "batch";
    case OracleMode::Streaming: return "streaming";
    case OracleMode::Minibatch: return "minibatch";
  }
  return "?";
}

GradientOracle::GradientOracle(ProblemPtr problem, OracleSpec spec, std::uint64_t seed)
    : problem_(std::move(problem)), spec_(spec) {
  if (!problem_) throw ValidationError("oracle needs a problem");
  const int n = problem_->agents();
  if (spec_.mode != OracleMode::Batch && spec_.batch_size < 1) {
    throw ValidationError("oracle: batch_size must be positive");
  }
  if (spec_.mode == OracleMode::Minibatch) {
    for (int i = 0; i < n; ++i) {
      if (spec_.batch_size > problem_->local_samples(i)) {
        throw ValidationError("oracle: batch_size " + std::to_string(spec_.batch_size) +
                              " exceeds agent " + std::to_string(i) + "'s " +
                              std::to_string(problem_->local_samples(i)) + " samples");
      }
    }
  }
  if (spec_.noise_std < 0) throw ValidationError("oracle: noise_std must be >= 0");
  if (spec_.sigma && *spec_.sigma < 0) throw ValidationError("oracle: sigma must be >= 0");
  streams_.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), 0x0c1eu};
    streams_.emplace_back(seq);
  }
  per_agent_evals_.assign(n, 0);
}

std::int64_t GradientOracle::cost_per_call() const {
  if (spec_.mode == OracleMode::Batch) return problem_->total_samples();
  return static_cast<std::int64_t>(spec_.batch_size) * problem_->agents();
}

Vector GradientOracle::agent_estimate(int agent, const Vector& theta) {
  switch (spec_.mode) {
    case OracleMode::Batch:
      per_agent_evals_[agent] += problem_->local_samples(agent);
      return problem_->local_grad(agent, theta);
    case OracleMode::Streaming: {
      per_agent_evals_[agent] += spec_.batch_size;
      Vector g = problem_->local_grad(agent, theta);
      if (spec_.noise_std > 0) {
        std::normal_distribution<double> noise(0.0,
                                               spec_.noise_std / std::sqrt(spec_.batch_size));
        for (auto& v : g) v += noise(streams_[agent]);
      }
      return g;
    }
    case OracleMode::Minibatch: {
      per_agent_evals_[agent] += spec_.batch_size;
      const int local = problem_->local_samples(agent);
      // A batch as large as the local set is the full pass.
      if (spec_.batch_size == local) return problem_->local_grad(agent, theta);
      std::uniform_int_distribution<int> pick(0, local - 1);
      std::vector<int> rows(spec_.batch_size);
      for (int& r : rows) r = pick(streams_[agent]);
      return problem_->sample_grad(agent, theta, rows);
    }
  }
  throw std::logic_error("unreachable oracle mode");
}

GradientEstimate GradientOracle::evaluate(const Stack& theta) {
  const int n = problem_->agents();
  if (theta.rows() != n || theta.cols() != problem_->dimension()) {
    throw ValidationError("oracle: stack must be " + std::to_string(n) + "x" +
                          std::to_string(problem_->dimension()));
  }
  GradientEstimate out;
  out.grads.resize(n, theta.cols());
  for (int i = 0; i < n; ++i) {
    Vector g = agent_estimate(i, theta.row(i).transpose());
    if (!g.allFinite()) throw NonFiniteError("oracle: non-finite gradient at agent " +
                                             std::to_string(i));
    out.grads.row(i) = g.transpose() / static_cast<double>(n);
  }
  out.sample_evals = cost_per_call();
  return out;
}

Stack exact_stacked_gradient(const Problem& problem, const Stack& theta) {
  const int n = problem.agents();
  Stack g(n, theta.cols());
  for (int i = 0; i < n; ++i) {
    g.row(i) = problem.local_grad(i, theta.row(i).transpose()).transpose() / n;
  }
  return g;
}

namespace {

// Welford accumulation; identical draws give an exactly equal mean.
struct RunningMoments {
  Stack mean;
  Stack m2;
  int count = 0;

  void add(const Stack& x) {
    ++count;
    if (count == 1) {
      mean = x;
      m2 = Stack::Zero(x.rows(), x.cols());
      return;
    }
    const Stack delta = x - mean;
    mean += delta / count;
    m2 += delta.cwiseProduct(x - mean);
  }
  Stack variance() const { return (m2 / (count - 1)).cwiseMax(0.0); }
};

}  // namespace

UnbiasednessReport check_unbiased(const Stack& exact, const std::function<Stack()>& estimate,
                                  int trials) {
  if (trials < 2) throw ValidationError("unbiasedness check needs at least 2 trials");
  RunningMoments moments;
  for (int t = 0; t < trials; ++t) moments.add(estimate());
  const Stack var = moments.variance();
  const double n = trials;
  UnbiasednessReport report;
  report.trials = trials;
  report.passed = true;
  for (Eigen::Index r = 0; r < exact.rows(); ++r) {
    for (Eigen::Index c = 0; c < exact.cols(); ++c) {
      const double dev = std::abs(moments.mean(r, c) - exact(r, c));
      const double se = std::sqrt(var(r, c) / n);
      report.max_deviation = std::max(report.max_deviation, dev);
      if (dev > 4.0 * se) report.passed = false;
      if (se > 0) {
        report.worst_sigma_ratio = std::max(report.worst_sigma_ratio, dev / se);
      } else if (dev > 0) {
        report.worst_sigma_ratio = std::numeric_limits<double>::infinity();
      }
    }
  }
  return report;
}

UnbiasednessReport unbiasedness_check(ProblemPtr problem, const OracleSpec& spec,
                                      const Stack& theta, int trials, std::uint64_t seed) {
  GradientOracle oracle(problem, spec, seed);
  const Stack exact = exact_stacked_gradient(*problem, theta);
  return check_unbiased(exact, [&] { return oracle.evaluate(theta).grads; }, trials);
}

double estimator_variance(ProblemPtr problem, const OracleSpec& spec, const Stack& theta,
                          int trials, std::uint64_t seed) {
  if (trials < 2) throw ValidationError("variance estimate needs at least 2 trials");
  GradientOracle oracle(problem, spec, seed);
  RunningMoments moments;
  for (int t = 0; t < trials; ++t) moments.add(oracle.evaluate(theta).grads);
  return moments.variance().sum();
}

}  // namespace decopt
