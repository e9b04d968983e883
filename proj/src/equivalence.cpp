#include "decopt/equivalence.hpp"

#include <random>

#include "decopt/algorithms.hpp"
#include "decopt/problems.hpp"

namespace decopt {
namespace {

constexpr int kAgents = 8;
constexpr int kDim = 3;

struct RandomQuadratic {
  ProblemPtr problem;
  Stack theta0;
};

RandomQuadratic random_quadratic(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> curvature(0.5, 2.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector a(kAgents);
  for (auto& v : a) v = curvature(rng);
  Matrix b(kAgents, kDim);
  Stack theta0(kAgents, kDim);
  for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = normal(rng);
  for (Eigen::Index k = 0; k < theta0.size(); ++k) theta0.data()[k] = normal(rng);
  return {std::make_shared<QuadraticProblem>(a, b), theta0};
}

Graph path_with_chord() {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < kAgents; ++i) edges.push_back({i, i + 1});
  edges.push_back({0, kAgents / 2});
  return Graph(kAgents, edges, "path_chord");
}

std::vector<Stack> run_stepper(const AlgoConfig& config, const Topology& topo, ProblemPtr problem,
                               AlgoState state, int iterations) {
  GradientOracle oracle(std::move(problem), OracleSpec{}, 0);
  auto stepper = make_stepper(config, topo);
  stepper->initialize(state, oracle);
  std::vector<Stack> out{state.theta};
  for (int t = 0; t < iterations; ++t) {
    stepper->step(state, oracle);
    out.push_back(state.theta);
  }
  return out;
}

double max_deviation(const std::vector<Stack>& x, const std::vector<Stack>& y) {
  double worst = 0.0;
  for (std::size_t t = 0; t < x.size() && t < y.size(); ++t) {
    worst = std::max(worst, (x[t] - y[t]).cwiseAbs().maxCoeff());
  }
  return worst;
}

// theta^{t+1} = (I - c P^{-1} L)(2 theta^t - theta^{t-1}) - P^{-1}(g^t - g^{t-1}),
// P = Upsilon + 2 c D, started from the first primal-dual step with mu^0 = 0.
std::vector<Stack> prox_gpda_one_line(const Problem& problem, const Graph& g, double c,
                                      const Vector& beta, const Stack& theta0, int iterations) {
  const Matrix lap = laplacian_matrix(g);
  const Vector p_diag = beta + 2.0 * c * g.degrees().cast<double>();
  const Matrix p_inv = p_diag.cwiseInverse().asDiagonal();
  const Matrix n_eye = Matrix::Identity(g.size(), g.size());
  const Matrix mix_part = n_eye - c * p_inv * lap;
  std::vector<Stack> out{theta0};
  Stack g_prev = exact_stacked_gradient(problem, theta0);
  out.push_back(theta0 - c * p_inv * lap * theta0 - p_inv * g_prev);
  for (int t = 1; t < iterations; ++t) {
    const Stack& cur = out[t];
    const Stack& prev = out[t - 1];
    const Stack grad = exact_stacked_gradient(problem, cur);
    out.push_back(mix_part * (2 * cur - prev) - p_inv * (grad - g_prev));
    g_prev = grad;
  }
  return out;
}

// theta^{t+1} = 2 W theta^t - W^2 theta^{t-1} - alpha (g^t - g^{t-1}), t >= 1.
std::vector<Stack> gt_one_line(const Problem& problem, const Matrix& w, double alpha,
                               const Stack& theta0, int iterations) {
  const Matrix w2 = w * w;
  std::vector<Stack> out{theta0};
  Stack g_prev = exact_stacked_gradient(problem, theta0);
  out.push_back(w * theta0 - alpha * g_prev);
  for (int t = 1; t < iterations; ++t) {
    const Stack& cur = out[t];
    const Stack& prev = out[t - 1];
    const Stack grad = exact_stacked_gradient(problem, cur);
    out.push_back(2 * w * cur - w2 * prev - alpha * (grad - g_prev));
    g_prev = grad;
  }
  return out;
}

}  // namespace

EquivalenceReport verify_equivalences(std::uint64_t seed, int iterations) {
  EquivalenceReport report;
  report.iterations = iterations;
  const RandomQuadratic inst = random_quadratic(seed);
  const Graph graph = path_with_chord();
  const Topology topo(graph, max_degree_mixing(graph));

  {
    AlgoConfig cfg;
    cfg.id = AlgorithmId::ProxGpda;
    cfg.c = 1.0;
    cfg.beta = Vector::Constant(1, 2.0);
    const auto primal_dual = run_stepper(cfg, topo, inst.problem,
                                         initial_state(topo, inst.theta0), iterations);
    const auto one_line = prox_gpda_one_line(*inst.problem, graph, cfg.c,
                                             Vector::Constant(kAgents, 2.0), inst.theta0,
                                             iterations);
    report.prox_forms = max_deviation(primal_dual, one_line);
  }

  {
    const double c = 0.5, alpha = 0.1;
    const Matrix lap = laplacian_matrix(graph);
    const Matrix w = Matrix::Identity(kAgents, kAgents) - 2 * c * alpha * lap;
    const Topology extra_topo(graph, MixingMatrix(graph, w));
    AlgoConfig extra;
    extra.id = AlgorithmId::Extra;
    extra.step = StepSize::constant(alpha);
    const auto extra_run = run_stepper(extra, extra_topo, inst.problem,
                                       initial_state(extra_topo, inst.theta0), iterations);

    AlgoConfig prox;
    prox.id = AlgorithmId::ProxGpda;
    prox.c = c;
    prox.beta = Vector::Constant(kAgents, 1 / alpha) - 2 * c * graph.degrees().cast<double>();
    AlgoState start = initial_state(topo, inst.theta0);
    start.mu = c * (incidence_matrix(graph) * inst.theta0);
    const auto prox_run = run_stepper(prox, topo, inst.problem, start, iterations);
    report.extra_vs_prox = max_deviation(extra_run, prox_run);
  }

  {
    const double alpha = 0.1;
    AlgoConfig cfg;
    cfg.id = AlgorithmId::Gt;
    cfg.step = StepSize::constant(alpha);
    const auto two_var = run_stepper(cfg, topo, inst.problem, initial_state(topo, inst.theta0),
                                     iterations);
    const auto one_line = gt_one_line(*inst.problem, topo.mixing().matrix(), alpha, inst.theta0,
                                      iterations);
    report.gt_forms = max_deviation(two_var, one_line);
  }
  return report;
}

}  // namespace decopt
