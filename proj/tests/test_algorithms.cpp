#include <gtest/gtest.h>

#include "decopt/algorithms.hpp"
#include "decopt/chebyshev.hpp"
#include "decopt/harness.hpp"

using namespace decopt;

namespace {

// f_i = (theta - b_i)^2 / 2 with b = (0, 2) on one edge.
struct TwoAgent {
  ProblemPtr problem = std::make_shared<QuadraticProblem>(Vector::Ones(2), Matrix{{0.0}, {2.0}});
  Topology topo{build_graph("path", 2),
                explicit_mixing(build_graph("path", 2), Matrix{{.5, .5}, {.5, .5}})};
};

AlgoState one_step(const AlgoConfig& cfg, const Topology& topo, ProblemPtr problem,
                   const Stack& theta0, OracleSpec spec = {}) {
  GradientOracle oracle(std::move(problem), spec, 1);
  auto stepper = make_stepper(cfg, topo);
  AlgoState s = initial_state(topo, theta0);
  stepper->initialize(s, oracle);
  EXPECT_EQ(stepper->step(s, oracle), StepStatus::Ok);
  return s;
}

AlgoConfig config_for(AlgorithmId id, double alpha = 0.1) {
  AlgoConfig cfg;
  cfg.id = id;
  cfg.step = StepSize::constant(alpha);
  return cfg;
}

const std::vector<AlgorithmId> kAll = {AlgorithmId::Dgd,  AlgorithmId::ProxGpda, AlgorithmId::Extra,
                                       AlgorithmId::Gt,   AlgorithmId::Xfilter,  AlgorithmId::Dsgd,
                                       AlgorithmId::D2,   AlgorithmId::Gnsd};

}  // namespace

TEST(Names, RoundTrip) {
  for (AlgorithmId id : kAll) EXPECT_EQ(parse_algorithm(to_string(id)), id);
  EXPECT_THROW(parse_algorithm("adam"), ValidationError);
}

TEST(StepSize, Schedules) {
  EXPECT_EQ(StepSize::constant(0.3).at(100), 0.3);
  const StepSize inv = StepSize::one_over_t(2.0);
  EXPECT_EQ(inv.at(0), 2.0);
  EXPECT_EQ(inv.at(1), 2.0);
  EXPECT_EQ(inv.at(4), 0.5);
  const StepSize h = StepSize::horizon(0.5, 8, 2.0, 200);
  EXPECT_DOUBLE_EQ(h.at(1), 0.5 * std::sqrt(8.0 / (4.0 * 200)));
  EXPECT_EQ(h.at(1), h.at(199));
  EXPECT_THROW(StepSize::constant(0.0), ValidationError);
  EXPECT_THROW(StepSize::one_over_t(-1.0), ValidationError);
  EXPECT_THROW(StepSize::horizon(1.0, 8, 0.0, 10), ValidationError);
}

TEST(Dgd, ZeroCostFixedPoint) {
  auto zero = std::make_shared<QuadraticProblem>(Vector::Zero(2), Matrix::Zero(2, 1));
  const TwoAgent t;
  const AlgoState s = one_step(config_for(AlgorithmId::Dgd), t.topo, zero, Stack{{1.0}, {1.0}});
  EXPECT_EQ(s.theta, (Stack{{1.0}, {1.0}}));
}

TEST(Dgd, FirstIterateOnExample3) {
  const Instance ex = example3();
  const AlgoState s = one_step(config_for(AlgorithmId::Dgd, scaled_step(0.1, 2)), ex.topology,
                               ex.problem, Stack{{1.0}, {1.0}});
  EXPECT_NEAR(s.theta(0, 0), 0.9, 1e-15);
  EXPECT_NEAR(s.theta(1, 0), 1.1, 1e-15);
  EXPECT_EQ(s.counters.comm_rounds, 1);
  EXPECT_EQ(s.counters.grad_eval_rounds, 1);
}

TEST(Dgd, DivergesOnExample3) {
  const Instance ex = example3();
  for (double gamma : {0.1, 1.0}) {
    RunSpec spec;
    spec.algo = config_for(AlgorithmId::Dgd, scaled_step(gamma, 2));
    spec.iterations = 10000;
    const RunResult r = simulate(ex.problem, ex.topology, ex.initial, spec);
    EXPECT_EQ(r.status, RunStatus::Diverged);
    EXPECT_GE(r.log.max_consensus_error(), 1e6);
  }
}

TEST(ProxGpda, FirstIterateByHand) {
  const TwoAgent t;
  AlgoConfig cfg;
  cfg.id = AlgorithmId::ProxGpda;
  cfg.c = 1.0;
  cfg.beta = Vector::Ones(1);
  const AlgoState s = one_step(cfg, t.topo, t.problem, Stack::Zero(2, 1));
  EXPECT_NEAR(s.theta(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(s.theta(1, 0), 1.0 / 3, 1e-15);
  EXPECT_NEAR(s.p(0, 0), -1.0 / 3, 1e-15);
  EXPECT_NEAR(s.p(1, 0), 1.0 / 3, 1e-15);
  EXPECT_EQ(s.counters.comm_rounds, 2);  // setup exchange plus one per step
}

TEST(ProxGpda, StationaryPointWithMatchingDualIsFixed) {
  // Consensual theta = 1: stacked gradient (-1/2, 1/2); p = -gradient.
  const TwoAgent t;
  AlgoConfig cfg;
  cfg.id = AlgorithmId::ProxGpda;
  cfg.c = 1.0;
  cfg.beta = Vector::Ones(1);
  GradientOracle oracle(t.problem, {}, 1);
  auto stepper = make_stepper(cfg, t.topo);
  AlgoState s = initial_state(t.topo, Stack::Ones(2, 1));
  s.mu = Stack::Constant(1, 1, -0.5);  // A^T mu = (-0.5, 0.5)
  stepper->initialize(s, oracle);
  for (int k = 0; k < 5; ++k) stepper->step(s, oracle);
  EXPECT_LE((s.theta - Stack::Ones(2, 1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ProxGpda, RejectsBadParameters) {
  const TwoAgent t;
  AlgoConfig cfg;
  cfg.id = AlgorithmId::ProxGpda;
  cfg.c = 0.0;
  EXPECT_THROW(make_stepper(cfg, t.topo), ValidationError);
  cfg.c = 1.0;
  cfg.beta = Vector::Constant(1, -2.0);  // beta + 2 c d = 0
  EXPECT_THROW(make_stepper(cfg, t.topo), ValidationError);
  cfg.beta = Vector::Ones(3);
  EXPECT_THROW(make_stepper(cfg, t.topo), ValidationError);
}

TEST(Extra, FirstIterateByHand) {
  const TwoAgent t;
  const AlgoState s = one_step(config_for(AlgorithmId::Extra), t.topo, t.problem, Stack::Zero(2, 1));
  EXPECT_NEAR(s.theta(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(s.theta(1, 0), 0.1, 1e-15);
}

TEST(Gt, FirstIterateByHand) {
  const TwoAgent t;
  const AlgoState s = one_step(config_for(AlgorithmId::Gt), t.topo, t.problem, Stack::Zero(2, 1));
  EXPECT_NEAR(s.theta(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(s.theta(1, 0), 0.1, 1e-15);
  EXPECT_NEAR(s.tracker(0, 0), -0.5, 1e-15);
  EXPECT_NEAR(s.tracker(1, 0), -0.45, 1e-15);
}

TEST(Stochastic, NoiselessVariantsMatchBatchTwins) {
  const Instance ex = example4();
  const OracleSpec noiseless{OracleMode::Streaming, 4, 0.0, {}};
  for (auto [stochastic, batch] : {std::pair{AlgorithmId::Dsgd, AlgorithmId::Dgd},
                                   std::pair{AlgorithmId::Gnsd, AlgorithmId::Gt}}) {
    RunSpec a, b;
    a.algo = config_for(stochastic, 0.05);
    a.oracle = noiseless;
    b.algo = config_for(batch, 0.05);
    a.iterations = b.iterations = 50;
    const RunResult ra = simulate(ex.problem, ex.topology, ex.initial, a);
    const RunResult rb = simulate(ex.problem, ex.topology, ex.initial, b);
    EXPECT_EQ(ra.state.theta, rb.state.theta);
  }
}

TEST(Dsgd, DivergesOnExample3WithoutNoise) {
  const Instance ex = example3();
  RunSpec spec;
  spec.algo = config_for(AlgorithmId::Dsgd, scaled_step(0.5, 2));
  spec.oracle = {OracleMode::Streaming, 1, 0.0, {}};
  spec.iterations = 10000;
  EXPECT_EQ(simulate(ex.problem, ex.topology, ex.initial, spec).status, RunStatus::Diverged);
}

TEST(D2, PreconditionAndForce) {
  const Instance ex = example4();
  AlgoConfig cfg = config_for(AlgorithmId::D2, 0.25);
  EXPECT_THROW(make_stepper(cfg, ex.topology), ValidationError);
  cfg.force = true;
  EXPECT_NO_THROW(make_stepper(cfg, ex.topology));
}

TEST(D2, DivergesOnExample4) {
  const Instance ex = example4();
  for (StepSize step : {StepSize::constant(0.25), StepSize::one_over_t(1.0)}) {
    RunSpec spec;
    spec.algo.id = AlgorithmId::D2;
    spec.algo.step = step;
    spec.algo.force = true;
    spec.iterations = 10000;
    const RunResult r = simulate(ex.problem, ex.topology, ex.initial, spec);
    EXPECT_EQ(r.status, RunStatus::Diverged);
    EXPECT_GE(r.log.last().gap, 1e6);
  }
}

TEST(D2, FirstStepIsDsgdAndReusesTheStoredGradient) {
  const Graph g = build_graph("complete", 3);
  const Topology topo(g, lazy_max_degree_mixing(g));
  const auto problem = std::make_shared<QuadraticProblem>(Vector::Ones(3), Matrix{{0.0}, {1.0}, {3.0}});
  const OracleSpec noisy{OracleMode::Streaming, 1, 1.0, {}};
  GradientOracle oracle(problem, noisy, 5), replay(problem, noisy, 5);
  auto stepper = make_stepper(config_for(AlgorithmId::D2), topo);
  const Stack theta0 = Stack::Zero(3, 1);
  AlgoState s = initial_state(topo, theta0);
  stepper->initialize(s, oracle);
  stepper->step(s, oracle);
  const Stack g0 = replay.evaluate(theta0).grads;
  const Matrix& w = topo.mixing().matrix();
  EXPECT_LE((s.theta - (w * theta0 - 0.1 * g0)).cwiseAbs().maxCoeff(), 1e-15);
  const Stack theta1 = s.theta;
  stepper->step(s, oracle);
  const Stack g1 = replay.evaluate(theta1).grads;
  const Stack expected = w * (2 * theta1 - theta0 - 0.1 * (g1 - g0));
  EXPECT_LE((s.theta - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(s.counters.grad_eval_rounds, 2);
}

TEST(Gnsd, ConvergesOnExample4) {
  const Instance ex = example4();
  RunSpec spec;
  spec.algo = config_for(AlgorithmId::Gnsd, 0.05);
  spec.oracle = {OracleMode::Streaming, 1, 0.0, {}};
  spec.iterations = 10000;
  spec.policy.target_eps = 1e-8;
  EXPECT_EQ(simulate(ex.problem, ex.topology, ex.initial, spec).status, RunStatus::Converged);
}

TEST(Tracking, ConservationHoldsEveryIteration) {
  SyntheticSpec data;
  data.agents = 10;
  data.dimension = 4;
  data.samples_per_agent = 60;
  data.split = DataSplit::Heterogeneous;
  const ProblemPtr problem = generate_synthetic(data);
  const Graph g = build_graph("random_regular", 10, 3, 2);
  const Topology topo(g, lazy_max_degree_mixing(g));
  for (auto [id, spec] : {std::pair{AlgorithmId::Gt, OracleSpec{}},
                          std::pair{AlgorithmId::Gnsd, OracleSpec{OracleMode::Minibatch, 5, 0.0, {}}}}) {
    GradientOracle oracle(problem, spec, 8);
    auto stepper = make_stepper(config_for(id, 0.5), topo);
    AlgoState s = initial_state(topo, Stack::Random(10, 4));
    stepper->initialize(s, oracle);
    for (int t = 0; t < 200; ++t) {
      const Vector lhs = s.tracker.colwise().sum();
      const Vector rhs = s.grad_prev.colwise().sum();
      ASSERT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10 * (1 + s.grad_prev.norm())) << t;
      ASSERT_EQ(stepper->step(s, oracle), StepStatus::Ok);
    }
  }
}

TEST(PrimalDual, DualStaysConsistent) {
  SyntheticSpec data;
  data.agents = 8;
  data.dimension = 3;
  data.samples_per_agent = 20;
  const ProblemPtr problem = generate_synthetic(data);
  const Graph g = build_graph("cycle", 8);
  const Topology topo(g, max_degree_mixing(g));
  for (AlgorithmId id : {AlgorithmId::ProxGpda, AlgorithmId::Xfilter}) {
    AlgoConfig cfg;
    cfg.id = id;
    cfg.c = 0.5;
    cfg.beta = Vector::Constant(1, 0.5);
    GradientOracle oracle(problem, {}, 1);
    auto stepper = make_stepper(cfg, topo);
    AlgoState s = initial_state(topo, Stack::Random(8, 3));
    stepper->initialize(s, oracle);
    for (int t = 0; t < 50; ++t) {
      stepper->step(s, oracle);
      ASSERT_LE((s.p - topo.incidence().transpose() * s.mu).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Counters, PerIterationLaws) {
  SyntheticSpec data;
  data.agents = 16;
  data.dimension = 3;
  data.samples_per_agent = 25;
  const ProblemPtr problem = generate_synthetic(data);
  const Graph g = build_graph("cycle", 16);
  const Topology topo(g, lazy_max_degree_mixing(g));
  const int q = default_chebyshev_order(topo);
  EXPECT_EQ(q, static_cast<int>(std::ceil(1 / std::sqrt(laplacian_ratio(g)))));
  const std::map<AlgorithmId, int> comm = {
      {AlgorithmId::Dgd, 1}, {AlgorithmId::Dsgd, 1}, {AlgorithmId::ProxGpda, 1},
      {AlgorithmId::Extra, 1}, {AlgorithmId::D2, 1}, {AlgorithmId::Gt, 2},
      {AlgorithmId::Gnsd, 2},  {AlgorithmId::Xfilter, q}};
  for (AlgorithmId id : kAll) {
    const bool stochastic = is_stochastic_method(id);
    const OracleSpec spec = stochastic ? OracleSpec{OracleMode::Minibatch, 5, 0.0, {}} : OracleSpec{};
    AlgoConfig cfg = config_for(id, 0.1);
    cfg.c = 0.2;
    cfg.beta = Vector::Constant(1, 0.2);
    GradientOracle oracle(problem, spec, 3);
    auto stepper = make_stepper(cfg, topo);
    EXPECT_EQ(stepper->comm_rounds_per_step(), comm.at(id));
    AlgoState s = initial_state(topo, Stack::Zero(16, 3));
    stepper->initialize(s, oracle);
    const Counters init = s.counters;
    const bool tracking = id == AlgorithmId::Gt || id == AlgorithmId::Gnsd;
    const bool exchange_first = id == AlgorithmId::ProxGpda || id == AlgorithmId::Xfilter;
    EXPECT_EQ(init.grad_eval_rounds, tracking ? 1 : 0) << to_string(id);
    EXPECT_EQ(init.comm_rounds, exchange_first ? 1 : 0) << to_string(id);
    for (int t = 1; t <= 40; ++t) {
      ASSERT_EQ(stepper->step(s, oracle), StepStatus::Ok);
      ASSERT_EQ(s.counters.comm_rounds - init.comm_rounds, static_cast<std::int64_t>(t) * comm.at(id))
          << to_string(id);
      ASSERT_EQ(s.counters.grad_eval_rounds - init.grad_eval_rounds, t) << to_string(id);
      ASSERT_EQ(s.counters.sample_grad_evals,
                s.counters.grad_eval_rounds * oracle.cost_per_call());
    }
  }
}

TEST(FixedPoints, ConsensualStationaryStackStaysPut) {
  const Matrix shifts = Matrix::Constant(6, 2, 0.7);
  const auto problem = std::make_shared<QuadraticProblem>(Vector::LinSpaced(6, 0.5, 2.0), shifts);
  const Graph g = build_graph("complete", 6);
  const Topology topo(g, lazy_max_degree_mixing(g));
  for (AlgorithmId id : kAll) {
    AlgoConfig cfg = config_for(id, 0.3);
    cfg.c = 1.0;
    cfg.beta = Vector::Ones(1);
    GradientOracle oracle(problem, {}, 1);
    auto stepper = make_stepper(cfg, topo);
    AlgoState s = initial_state(topo, shifts);
    stepper->initialize(s, oracle);
    for (int t = 0; t < 10; ++t) stepper->step(s, oracle);
    EXPECT_LE((s.theta - shifts).cwiseAbs().maxCoeff(), 1e-12) << to_string(id);
  }
}

TEST(Xfilter, ExactInnerSolveKeepsStationaryStack) {
  const Graph g = build_graph("random_regular", 8, 3, 1);
  const Topology topo(g, max_degree_mixing(g));
  auto zero = std::make_shared<QuadraticProblem>(Vector::Zero(8), Matrix::Zero(8, 2));
  AlgoConfig cfg;
  cfg.id = AlgorithmId::Xfilter;
  cfg.c = 1.0;
  cfg.beta = Vector::Ones(1);
  cfg.chebyshev_order = 40;
  const Stack theta = Stack::Constant(8, 2, -1.25);
  const AlgoState s = one_step(cfg, topo, zero, theta);
  EXPECT_LE((s.theta - theta).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(s.counters.comm_rounds, 1 + 40);
}

TEST(Xfilter, RejectsBadParameters) {
  const Graph g = build_graph("cycle", 5);
  const Topology topo(g, max_degree_mixing(g));
  AlgoConfig cfg;
  cfg.id = AlgorithmId::Xfilter;
  cfg.chebyshev_order = -1;
  EXPECT_THROW(make_stepper(cfg, topo), ValidationError);
  cfg.chebyshev_order = 0;
  cfg.beta = Vector::Zero(1);
  EXPECT_THROW(make_stepper(cfg, topo), ValidationError);
}

TEST(Chebyshev, MatchesDenseSolveAndImprovesWithOrder) {
  const Graph g = build_graph("random_regular", 8, 3, 5);
  const Matrix lap = laplacian_matrix(g);
  const double c = 0.7;
  const Vector ups = Vector::Constant(8, 0.3);
  const Matrix k = c * lap + Matrix(ups.asDiagonal());
  const double lmin = ups.minCoeff();
  const double lmax = c * Eigen::SelfAdjointEigenSolver<Matrix>(lap).eigenvalues().maxCoeff() + ups.maxCoeff();
  const Stack rhs = Stack::Random(8, 3);
  const Stack direct = k.ldlt().solve(rhs);
  auto apply = [&](const Stack& x) -> Stack { return k * x; };
  double previous = std::numeric_limits<double>::infinity();
  for (int q = 1; q <= 40; ++q) {
    const Stack x0 = Stack::Zero(8, 3);
    const auto sol = chebyshev_solve<double>(apply, x0, rhs, lmin, lmax, q);
    EXPECT_EQ(sol.applications, q);
    EXPECT_LE((sol.residual - (rhs - k * sol.x)).norm(), 1e-12);
    const double rel = (rhs - k * sol.x).norm() / rhs.norm();
    EXPECT_LT(rel, previous) << q;
    previous = rel;
  }
  const auto sol = chebyshev_solve<double>(apply, Stack(Stack::Zero(8, 3)), rhs, lmin, lmax, 40);
  EXPECT_LE((rhs - k * sol.x).norm() / rhs.norm(), 1e-8);
  EXPECT_LE((sol.x - direct).norm() / direct.norm(), 1e-7);
}

TEST(Divergence, StateStaysAtLastFiniteValue) {
  const Instance ex = example3();
  GradientOracle oracle(ex.problem, {}, 1);
  auto stepper = make_stepper(config_for(AlgorithmId::Dgd, 40.0), ex.topology);
  AlgoState s = initial_state(ex.topology, ex.initial);
  stepper->initialize(s, oracle);
  int t = 0;
  while (stepper->step(s, oracle) == StepStatus::Ok) ASSERT_LT(++t, 100000);
  EXPECT_TRUE(s.theta.allFinite());
  EXPECT_EQ(s.t, t);
}

TEST(Lipschitz, QuadraticEstimate) {
  const auto problem = std::make_shared<QuadraticProblem>(Vector{{0.5, -3.0, 1.0, 2.0}}, Matrix::Zero(4, 2));
  EXPECT_NEAR(estimate_stacked_lipschitz(*problem, Stack::Zero(4, 2)), 3.0 / 4, 1e-6);
}

TEST(Determinism, StochasticRunsRepeatBitForBit) {
  SyntheticSpec data;
  data.agents = 6;
  data.dimension = 3;
  data.samples_per_agent = 30;
  const ProblemPtr problem = generate_synthetic(data);
  const Graph g = build_graph("cycle", 6);
  const Topology topo(g, lazy_max_degree_mixing(g));
  RunSpec spec;
  spec.algo = config_for(AlgorithmId::Gnsd, 0.2);
  spec.oracle = {OracleMode::Minibatch, 4, 0.0, {}};
  spec.iterations = 60;
  spec.seed = 77;
  const RunResult a = simulate(problem, topo, Stack::Zero(6, 3), spec);
  const RunResult b = simulate(problem, topo, Stack::Zero(6, 3), spec);
  EXPECT_EQ(a.state.theta, b.state.theta);
  spec.seed = 78;
  EXPECT_NE(simulate(problem, topo, Stack::Zero(6, 3), spec).state.theta, a.state.theta);
}
