#include "decopt/algorithms.hpp"

#include <cmath>
#include <random>
#include <string>

#include "decopt/chebyshev.hpp"

namespace decopt {

AlgorithmId parse_algorithm(std::string_view name) {
  if (name == "dgd") return AlgorithmId::Dgd;
  if (name == "prox_gpda") return AlgorithmId::ProxGpda;
  if (name == "extra") return AlgorithmId::Extra;
  if (name == "gt") return AlgorithmId::Gt;
  if (name == "xfilter") return AlgorithmId::Xfilter;
  if (name == "dsgd") return AlgorithmId::Dsgd;
  if (name == "d2") return AlgorithmId::D2;
  if (name == "gnsd") return AlgorithmId::Gnsd;
  throw ValidationError("unknown algorithm '" + std::string(name) + "'");
}

std::string_view to_string(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::Dgd: return "dgd";
    case AlgorithmId::ProxGpda: return "prox_gpda";
    case AlgorithmId::Extra: return "extra";
    case AlgorithmId::Gt: return "gt";
    case AlgorithmId::Xfilter: return "xfilter";
    case AlgorithmId::Dsgd: return "dsgd";
    case AlgorithmId::D2: return "d2";
    case AlgorithmId::Gnsd: return "gnsd";
  }
  return "?";
}

bool is_stochastic_method(AlgorithmId id) {
  return id == AlgorithmId::Dsgd || id == AlgorithmId::D2 || id == AlgorithmId::Gnsd;
}

StepSize StepSize::constant(double alpha) {
  if (!(alpha > 0) || !std::isfinite(alpha)) throw ValidationError("step size must be positive");
  return {Kind::Constant, alpha};
}

StepSize StepSize::one_over_t(double c) {
  if (!(c > 0) || !std::isfinite(c)) throw ValidationError("1/t step constant must be positive");
  return {Kind::OneOverT, c};
}

StepSize StepSize::horizon(double kappa, int agents, double sigma, int iterations) {
  if (!(kappa > 0)) throw ValidationError("horizon step: kappa must be positive");
  if (!(sigma > 0)) throw ValidationError("horizon step: sigma must be positive");
  if (agents < 1 || iterations < 1) throw ValidationError("horizon step: n and T must be positive");
  return {Kind::Horizon, kappa * std::sqrt(agents / (sigma * sigma * iterations))};
}

double StepSize::at(int t) const {
  if (kind_ == Kind::OneOverT) return value_ / std::max(t, 1);
  return value_;
}

AlgoState initial_state(const Topology& topo, const Stack& theta0) {
  if (theta0.rows() != topo.size()) {
    throw ValidationError("initial stack has " + std::to_string(theta0.rows()) +
                          " rows for a graph of " + std::to_string(topo.size()) + " nodes");
  }
  AlgoState s;
  s.theta = theta0;
  s.theta_prev = theta0;
  s.mu = Stack::Zero(topo.graph().edge_count(), theta0.cols());
  s.p = Stack::Zero(theta0.rows(), theta0.cols());
  return s;
}

namespace {

bool finite_state(const AlgoState& s) {
  return s.theta.allFinite() && s.theta_prev.allFinite() && s.mu.allFinite() &&
         s.p.allFinite() && s.tracker.allFinite() && s.grad_prev.allFinite();
}

Stack draw(GradientOracle& oracle, const Stack& theta, Counters& counters) {
  GradientEstimate est = oracle.evaluate(theta);
  ++counters.grad_eval_rounds;
  counters.sample_grad_evals += est.sample_evals;
  return std::move(est.grads);
}

class PlainStepper : public Stepper {
 public:
  PlainStepper(AlgorithmId id, StepSize step, const Topology& topo)
      : id_(id), step_(step), topo_(topo) {}

  AlgorithmId id() const override { return id_; }
  void initialize(AlgoState&, GradientOracle&) override {}
  int comm_rounds_per_step() const override { return 1; }

 protected:
  void advance(AlgoState& s, GradientOracle& oracle) override {
    Stack g = draw(oracle, s.theta, s.counters);
    s.theta_prev = s.theta;
    s.theta = mix(topo_.mixing(), s.theta, s.counters) - step_.at(s.t) * g;
  }

 private:
  AlgorithmId id_;
  StepSize step_;
  const Topology& topo_;
};

class ProxGpdaStepper : public Stepper {
 public:
  ProxGpdaStepper(double c, Vector beta, const Topology& topo)
      : c_(c), beta_(std::move(beta)), topo_(topo) {
    const Vector deg = topo.graph().degrees().cast<double>();
    divisor_ = beta_ + 2.0 * c_ * deg;
  }

  AlgorithmId id() const override { return AlgorithmId::ProxGpda; }
  int comm_rounds_per_step() const override { return 1; }

  void initialize(AlgoState& s, GradientOracle&) override {
    s.p = topo_.incidence().transpose() * s.mu;
    s.exchanged = neighbor_sum(topo_, s.theta, s.counters);
  }

 protected:
  void advance(AlgoState& s, GradientOracle& oracle) override {
    const Stack g = draw(oracle, s.theta, s.counters);
    const Vector deg = topo_.graph().degrees().cast<double>();
    // c * sum_{j in N(i)} (theta_i + theta_j) = c (d_i theta_i + (Adj theta)_i)
    Stack numer = beta_.asDiagonal() * s.theta - g - s.p +
                  c_ * (deg.asDiagonal() * s.theta + s.exchanged);
    s.theta_prev = s.theta;
    s.theta = divisor_.cwiseInverse().asDiagonal() * numer;
    s.exchanged = neighbor_sum(topo_, s.theta, s.counters);
    s.p += c_ * (deg.asDiagonal() * s.theta - s.exchanged);
    s.mu += c_ * (topo_.incidence() * s.theta);
  }

 private:
  double c_;
  Vector beta_;
  Vector divisor_;
  const Topology& topo_;
};

class ExtraStepper : public Stepper {
 public:
  ExtraStepper(StepSize step, const Topology& topo, std::optional<Matrix> tilde)
      : step_(step), topo_(topo), tilde_(std::move(tilde)) {}

  AlgorithmId id() const override { return AlgorithmId::Extra; }
  void initialize(AlgoState&, GradientOracle&) override {}
  int comm_rounds_per_step() const override { return tilde_ ? 2 : 1; }

 protected:
  void advance(AlgoState& s, GradientOracle& oracle) override {
    const double alpha = step_.at(s.t);
    const Stack g = draw(oracle, s.theta, s.counters);
    Stack next;
    if (s.t == 0) {
      next = mix(topo_.mixing(), s.theta, s.counters) - alpha * g;
    } else if (tilde_) {
      next = s.theta + mix(topo_.mixing(), s.theta, s.counters) -
             mix(*tilde_, s.theta_prev, s.counters) - alpha * (g - s.grad_prev);
    } else {
      const Stack combo = s.theta - 0.5 * s.theta_prev;
      next = combo + mix(topo_.mixing(), combo, s.counters) - alpha * (g - s.grad_prev);
    }
    s.grad_prev = g;
    s.theta_prev = s.theta;
    s.theta = std::move(next);
  }

 private:
  static Stack mix(const Matrix& w, const Stack& x, Counters& counters) {
    ++counters.comm_rounds;
    return w * x;
  }
  static Stack mix(const MixingMatrix& w, const Stack& x, Counters& counters) {
    return decopt::mix(w, x, counters);
  }

  StepSize step_;
  const Topology& topo_;
  std::optional<Matrix> tilde_;
};

// GT with the run's W, and GNSD (its stochastic twin).
class TrackingStepper : public Stepper {
 public:
  TrackingStepper(AlgorithmId id, StepSize step, const Topology& topo)
      : id_(id), step_(step), topo_(topo) {}

  AlgorithmId id() const override { return id_; }
  int comm_rounds_per_step() const override { return 2; }

  void initialize(AlgoState& s, GradientOracle& oracle) override {
    s.grad_prev = draw(oracle, s.theta, s.counters);
    s.tracker = s.grad_prev;
  }

 protected:
  void advance(AlgoState& s, GradientOracle& oracle) override {
    const double alpha = step_.at(s.t);
    s.theta_prev = s.theta;
    s.theta = mix(topo_.mixing(), s.theta, s.counters) - alpha * s.tracker;
    Stack g = draw(oracle, s.theta, s.counters);
    s.tracker = mix(topo_.mixing(), s.tracker, s.counters) + g - s.grad_prev;
    s.grad_prev = std::move(g);
  }

 private:
  AlgorithmId id_;
  StepSize step_;
  const Topology& topo_;
};

class D2Stepper : public Stepper {
 public:
  D2Stepper(StepSize step, const Topology& topo) : step_(step), topo_(topo) {}

  AlgorithmId id() const override { return AlgorithmId::D2; }
  void initialize(AlgoState&, GradientOracle&) override {}
  int comm_rounds_per_step() const override { return 1; }

 protected:
  void advance(AlgoState& s, GradientOracle& oracle) override {
    const double alpha = step_.at(s.t);
    Stack g = draw(oracle, s.theta, s.counters);
    Stack next;
    if (s.t == 0) {
      next = mix(topo_.mixing(), s.theta, s.counters) - alpha * g;
    } else {
      next = mix(topo_.mixing(),
                 2.0 * s.theta - s.theta_prev - alpha * (g - s.grad_prev), s.counters);
    }
    s.grad_prev = std::move(g);
    s.theta_prev = s.theta;
    s.theta = std::move(next);
  }

 private:
  StepSize step_;
  const Topology& topo_;
};

class XfilterStepper : public Stepper {
 public:
  XfilterStepper(double c, Vector beta, int order, const Topology& topo)
      : c_(c), upsilon_(std::move(beta)), order_(order), topo_(topo) {
    lmin_ = upsilon_.minCoeff();
    lmax_ = c_ * topo.laplacian_spectrum().maxCoeff() + upsilon_.maxCoeff();
  }

  AlgorithmId id() const override { return AlgorithmId::Xfilter; }
  int comm_rounds_per_step() const override { return order_; }

  void initialize(AlgoState& s, GradientOracle&) override {
    s.p = topo_.incidence().transpose() * s.mu;
    s.exchanged = apply_laplacian(topo_, s.theta, s.counters);
  }

 protected:
  void advance(AlgoState& s, GradientOracle& oracle) override {
    const Stack g = draw(oracle, s.theta, s.counters);
    const auto ups = upsilon_.asDiagonal();
    const Stack rhs = ups * s.theta - g - s.p;
    // r0 = rhs - (c L + Upsilon) theta^t, with L theta^t kept from the last round
    const Stack r0 = -g - s.p - c_ * s.exchanged;
    auto apply = [&](const Stack& x) -> Stack {
      return c_ * apply_laplacian(topo_, x, s.counters) + ups * x;
    };
    ChebyshevResult<double> sol = chebyshev_solve<double>(apply, s.theta, r0, lmin_, lmax_, order_);
    if (sol.residual.norm() > r0.norm() && !warned_) {
      s.warnings.push_back("xfilter: inner residual grew over Q = " + std::to_string(order_) +
                           " rounds; increase Q");
      warned_ = true;
    }
    s.theta_prev = s.theta;
    s.theta = std::move(sol.x);
    // K theta^{t+1} = rhs - r_Q gives L theta^{t+1} without another exchange.
    s.exchanged = (rhs - sol.residual - ups * s.theta) / c_;
    s.p += c_ * s.exchanged;
    s.mu += c_ * (topo_.incidence() * s.theta);
  }

 private:
  double c_;
  Vector upsilon_;
  int order_;
  const Topology& topo_;
  double lmin_ = 0, lmax_ = 0;
  bool warned_ = false;
};

Vector broadcast_beta(const Vector& beta, int n) {
  if (beta.size() == 1) return Vector::Constant(n, beta(0));
  if (beta.size() != n) {
    throw ValidationError("beta has " + std::to_string(beta.size()) + " entries for " +
                          std::to_string(n) + " agents");
  }
  return beta;
}

}  // namespace

StepStatus Stepper::step(AlgoState& state, GradientOracle& oracle) {
  AlgoState next = state;
  try {
    advance(next, oracle);
  } catch (const NonFiniteError&) {
    return StepStatus::Diverged;
  }
  if (!finite_state(next)) return StepStatus::Diverged;
  ++next.t;
  state = std::move(next);
  return StepStatus::Ok;
}

int default_chebyshev_order(const Topology& topo) {
  return static_cast<int>(std::ceil(1.0 / std::sqrt(topo.spectral_ratio()) - 1e-12));
}

std::unique_ptr<Stepper> make_stepper(const AlgoConfig& config, const Topology& topo) {
  const int n = topo.size();
  switch (config.id) {
    case AlgorithmId::Dgd:
    case AlgorithmId::Dsgd:
      return std::make_unique<PlainStepper>(config.id, config.step, topo);
    case AlgorithmId::Extra:
      if (config.extra_tilde && (config.extra_tilde->rows() != n || config.extra_tilde->cols() != n)) {
        throw ValidationError("extra: second mixing matrix must be n x n");
      }
      return std::make_unique<ExtraStepper>(config.step, topo, config.extra_tilde);
    case AlgorithmId::Gt:
    case AlgorithmId::Gnsd:
      return std::make_unique<TrackingStepper>(config.id, config.step, topo);
    case AlgorithmId::D2:
      if (!config.force && !topo.mixing().satisfies_d2_condition()) {
        throw ValidationError("d2 requires lambda_min(W) > -1/3, got " +
                              std::to_string(topo.mixing().lambda_min()) +
                              " (set force to run anyway)");
      }
      return std::make_unique<D2Stepper>(config.step, topo);
    case AlgorithmId::ProxGpda: {
      if (!(config.c > 0)) throw ValidationError("prox_gpda: c must be positive");
      Vector beta = broadcast_beta(config.beta, n);
      const Vector divisor = beta + 2.0 * config.c * topo.graph().degrees().cast<double>();
      if (!(divisor.minCoeff() > 0)) {
        throw ValidationError("prox_gpda: beta_i + 2 c d_i must be positive for every agent");
      }
      return std::make_unique<ProxGpdaStepper>(config.c, std::move(beta), topo);
    }
    case AlgorithmId::Xfilter: {
      if (!(config.c > 0)) throw ValidationError("xfilter: c must be positive");
      Vector beta = broadcast_beta(config.beta, n);
      if (!(beta.minCoeff() > 0)) throw ValidationError("xfilter: beta must be positive");
      if (config.chebyshev_order < 0) throw ValidationError("xfilter: Q must be >= 1");
      const int q = config.chebyshev_order > 0 ? config.chebyshev_order
                                               : default_chebyshev_order(topo);
      return std::make_unique<XfilterStepper>(config.c, std::move(beta), q, topo);
    }
  }
  throw ValidationError("unknown algorithm");
}

double estimate_stacked_lipschitz(const Problem& problem, const Stack& theta, int iterations,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Stack v(theta.rows(), theta.cols());
  for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = normal(rng);
  v /= v.norm();
  const double h = 1e-5 * std::max(1.0, theta.norm());
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Stack jv = (exact_stacked_gradient(problem, theta + h * v) -
                      exact_stacked_gradient(problem, theta - h * v)) /
                     (2 * h);
    estimate = jv.norm();
    if (!(estimate > 0)) return 0.0;
    v = jv / estimate;
  }
  return estimate;
}

}  // namespace decopt
