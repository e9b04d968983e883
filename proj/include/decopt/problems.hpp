#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "decopt/topology.hpp"
#include "decopt/types.hpp"

namespace decopt {

// Local dataset of one agent. Labels are in {-1, +1}; `cluster` records the
// generating cluster of each row (0 when the data is unclustered).
struct AgentData {
  Matrix features;  // M_i x p
  Vector labels;    // M_i
  std::vector<int> cluster;

  int size() const { return static_cast<int>(features.rows()); }
};

// Family of local costs f_i(theta) = M_i^-1 sum_l F_i(theta; xi_il).
// Gradients returned here are the plain local gradients; the 1/n stacking
// factor belongs to the oracle. Implementations are immutable.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string family() const = 0;
  virtual int agents() const = 0;
  virtual int dimension() const = 0;
  virtual int local_samples(int agent) const = 0;

  virtual double local_cost(int agent, const Vector& theta) const = 0;
  virtual Vector local_grad(int agent, const Vector& theta) const = 0;
  // Average of the per-sample gradients at the given row indices (repeats
  // allowed).
  virtual Vector sample_grad(int agent, const Vector& theta, std::span<const int> rows) const = 0;

  // Smoothness constant L of every f_i; analytic where the family allows,
  // otherwise a power-iteration estimate.
  virtual double smoothness() const = 0;

  int total_samples() const;
  // (1/n) sum_i f_i(theta).
  double average_cost(const Vector& theta) const;
};

using ProblemPtr = std::shared_ptr<const Problem>;

// f_i(theta) = M_i^-1 sum_l a_i ||theta - xi_il||^2 / 2, so that
// grad f_i(theta) = a_i (theta - b_i) with b_i the mean of agent i's samples.
// a_i may be negative.
class QuadraticProblem final : public Problem {
 public:
  // One sample per agent: xi_i1 = b_i (row i of `shifts`).
  QuadraticProblem(Vector curvature, const Matrix& shifts);
  QuadraticProblem(Vector curvature, std::vector<Matrix> samples);

  std::string family() const override { return "quadratic"; }
  int agents() const override { return static_cast<int>(curvature_.size()); }
  int dimension() const override { return static_cast<int>(shifts_.cols()); }
  int local_samples(int agent) const override {
    return static_cast<int>(samples_[agent].rows());
  }
  double local_cost(int agent, const Vector& theta) const override;
  Vector local_grad(int agent, const Vector& theta) const override;
  Vector sample_grad(int agent, const Vector& theta, std::span<const int> rows) const override;
  double smoothness() const override { return curvature_.cwiseAbs().maxCoeff(); }

  const Vector& curvature() const { return curvature_; }
  const Matrix& shifts() const { return shifts_; }

 private:
  Vector curvature_;
  std::vector<Matrix> samples_;
  Matrix shifts_;  // n x d, row i = b_i
};

// Logistic loss with the bounded non-convex penalty
// lambda * sum_s rho theta_s^2 / (1 + rho theta_s^2).
class NcvxLogisticProblem final : public Problem {
 public:
  NcvxLogisticProblem(std::vector<AgentData> data, double lambda, double rho);

  std::string family() const override { return "ncvx_logistic"; }
  int agents() const override { return static_cast<int>(data_.size()); }
  int dimension() const override { return static_cast<int>(data_.front().features.cols()); }
  int local_samples(int agent) const override { return data_[agent].size(); }
  double local_cost(int agent, const Vector& theta) const override;
  Vector local_grad(int agent, const Vector& theta) const override;
  Vector sample_grad(int agent, const Vector& theta, std::span<const int> rows) const override;
  double smoothness() const override { return smoothness_; }

  double regularizer(const Vector& theta) const;
  Vector regularizer_grad(const Vector& theta) const;
  // Cost without the penalty term.
  double loss(int agent, const Vector& theta) const;
  const AgentData& data(int agent) const { return data_[agent]; }
  double lambda() const { return lambda_; }
  double rho() const { return rho_; }

 private:
  std::vector<AgentData> data_;
  double lambda_;
  double rho_;
  double smoothness_;
};

// Fully connected sigmoid network with a single sigmoid output trained on the
// logistic loss -log h(y x). Parameters are flattened layer by layer: the
// weight matrix (out x in, row-major) followed by the bias vector.
class TinyMlpProblem final : public Problem {
 public:
  static constexpr double kClamp = 1e-12;

  TinyMlpProblem(std::vector<AgentData> data, std::vector<int> hidden);

  std::string family() const override { return "tiny_mlp"; }
  int agents() const override { return static_cast<int>(data_.size()); }
  int dimension() const override { return parameter_count_; }
  int local_samples(int agent) const override { return data_[agent].size(); }
  double local_cost(int agent, const Vector& theta) const override;
  Vector local_grad(int agent, const Vector& theta) const override;
  Vector sample_grad(int agent, const Vector& theta, std::span<const int> rows) const override;
  double smoothness() const override;

  const std::vector<int>& widths() const { return widths_; }
  // Network output h_theta(x) in (0, 1) for each row of `inputs`.
  Vector predict(const Vector& theta, const Matrix& inputs) const;
  const AgentData& data(int agent) const { return data_[agent]; }

 private:
  double batch_loss(const Vector& theta, const Matrix& x, const Vector& y) const;
  Vector batch_grad(const Vector& theta, const Matrix& x, const Vector& y) const;

  std::vector<AgentData> data_;
  std::vector<int> widths_;  // input, hidden..., 1
  int parameter_count_;
};

enum class DataSplit { Homogeneous, Heterogeneous };

struct SyntheticSpec {
  std::string family = "ncvx_logistic";  // quadratic | ncvx_logistic | tiny_mlp
  int agents = 8;
  int dimension = 10;  // feature dimension
  int samples_per_agent = 400;
  std::uint64_t seed = 1;
  DataSplit split = DataSplit::Homogeneous;
  int clusters = 0;  // heterogeneous split; 0 means 2 * agents
  double lambda = 0.01;
  double rho = 1.0;
  std::vector<int> hidden = {16, 8};
  double label_noise = 0.1;
};

// Homogeneous: standard-normal features with labels drawn from a planted
// logistic model, identically across agents. Heterogeneous: Gaussian
// clusters with per-cluster labels, each agent owning a disjoint contiguous
// block of clusters.
ProblemPtr generate_synthetic(const SyntheticSpec& spec);
std::vector<AgentData> synthetic_data(const SyntheticSpec& spec);

// A small instance bundled with the network it is posed on.
struct Instance {
  ProblemPtr problem;
  Topology topology;
  Stack initial;
};

// f_1 = theta^2 / 2, f_2 = -theta^2 / 2 on a single edge with
// W = [[.5, .5], [.5, .5]].
Instance example3();
// f_i = (x - b_i)^2 on a three-node line with W = [.5 .5 0; .5 0 .5; 0 .5 .5].
Instance example4(const Vector& shifts = Vector{{0.0, 1.0, 2.0}});

// Step size on the 1/n-scaled gradient that reproduces the unscaled step
// gamma of a two-agent counterexample.
inline double scaled_step(double gamma, int agents) { return gamma * agents; }

// CSV with header "label,feature_1,...,feature_d,agent". Labels must be -1
// or +1 and agents in [0, agents).
std::vector<AgentData> load_agent_csv(std::istream& in, int dimension, int agents);

}  // namespace decopt
