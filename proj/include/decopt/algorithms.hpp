#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decopt/oracles.hpp"
#include "decopt/topology.hpp"
#include "decopt/types.hpp"

namespace decopt {

enum class AlgorithmId { Dgd, ProxGpda, Extra, Gt, Xfilter, Dsgd, D2, Gnsd };

AlgorithmId parse_algorithm(std::string_view name);
std::string_view to_string(AlgorithmId id);
// DSGD, D2 and GNSD are the streaming-data methods.
bool is_stochastic_method(AlgorithmId id);

class StepSize {
 public:
  enum class Kind { Constant, OneOverT, Horizon };

  static StepSize constant(double alpha);
  // alpha^t = c / t, with t = 0 treated as t = 1.
  static StepSize one_over_t(double c);
  // alpha = kappa * sqrt(n / (sigma^2 T)), constant over the run.
  static StepSize horizon(double kappa, int agents, double sigma, int iterations);

  double at(int t) const;
  Kind kind() const { return kind_; }
  bool is_constant() const { return kind_ != Kind::OneOverT; }

 private:
  StepSize(Kind kind, double value) : kind_(kind), value_(value) {}

  Kind kind_;
  double value_;
};

struct AlgoConfig {
  AlgorithmId id = AlgorithmId::Dgd;
  StepSize step = StepSize::constant(0.1);
  double c = 1.0;                    // penalty / dual step (Prox-GPDA, xFILTER)
  Vector beta = Vector::Ones(1);     // proximal weights; size 1 broadcasts
  int chebyshev_order = 0;           // xFILTER Q; 0 selects ceil(1 / sqrt(xi))
  bool force = false;                // run D2 even when lambda_min(W) <= -1/3
  std::optional<Matrix> extra_tilde; // generalized EXTRA: replaces (I + W) / 2
};

// Per-run iterate memory. Which fields are live depends on the algorithm.
struct AlgoState {
  int t = 0;
  Stack theta;
  Stack theta_prev;    // EXTRA, D2
  Stack mu;            // |E| x d edge duals (Prox-GPDA, xFILTER)
  Stack p;             // A^T mu
  Stack tracker;       // g (GT, GNSD)
  Stack grad_prev;     // last oracle output, reused rather than redrawn
  Stack exchanged;     // neighbour information from the latest exchange
  Counters counters;
  std::vector<std::string> warnings;
};

// Fresh state at theta0 with zero duals.
AlgoState initial_state(const Topology& topo, const Stack& theta0);

enum class StepStatus { Ok, Diverged };

// Shared contract: initialize() prepares the memory at theta^0 and charges
// any setup exchange or oracle call; step() advances one outer iteration.
// On a non-finite value the state is left at its last finite value and
// Diverged is returned.
class Stepper {
 public:
  virtual ~Stepper() = default;

  virtual AlgorithmId id() const = 0;
  virtual void initialize(AlgoState& state, GradientOracle& oracle) = 0;
  StepStatus step(AlgoState& state, GradientOracle& oracle);
  // Exchange rounds charged by a steady-state step().
  virtual int comm_rounds_per_step() const = 0;

 protected:
  virtual void advance(AlgoState& state, GradientOracle& oracle) = 0;
};

// Throws ValidationError on an invalid configuration (D2 on a matrix with
// lambda_min <= -1/3 without force, non-positive Prox-GPDA divisor, ...).
std::unique_ptr<Stepper> make_stepper(const AlgoConfig& config, const Topology& topo);

// Default xFILTER order: ceil(1 / sqrt(xi(L_G))).
int default_chebyshev_order(const Topology& topo);

// Largest singular value of the Jacobian of the (1/n)-scaled stacked
// gradient at theta, by power iteration on finite-difference products.
double estimate_stacked_lipschitz(const Problem& problem, const Stack& theta, int iterations = 50,
                                  std::uint64_t seed = 1);

}  // namespace decopt
