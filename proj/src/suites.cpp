#include "decopt/suites.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "decopt/equivalence.hpp"
#include "decopt/harness.hpp"

namespace decopt {

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> suite_names() {
  return {"equivalence", "counterexamples", "gradients", "oracles", "mixing"};
}

namespace {

SuiteReport equivalence_suite() {
  SuiteReport rep{"equivalence", {}};
  const EquivalenceReport r = verify_equivalences(2024, 50);
  rep.checks.push_back({"prox_gpda per-agent vs one-line", r.prox_forms <= 1e-10,
                        fmt::format("max deviation {:.3e}", r.prox_forms)});
  rep.checks.push_back({"extra vs prox_gpda substitution", r.extra_vs_prox <= 1e-10,
                        fmt::format("max deviation {:.3e}", r.extra_vs_prox)});
  rep.checks.push_back({"gt two-variable vs one-line", r.gt_forms <= 1e-10,
                        fmt::format("max deviation {:.3e}", r.gt_forms)});
  return rep;
}

RunSpec batch_spec(AlgorithmId id, StepSize step, int iterations, double eps) {
  RunSpec spec;
  spec.algo.id = id;
  spec.algo.step = step;
  spec.iterations = iterations;
  spec.policy.target_eps = eps;
  return spec;
}

CheckResult expect_converged(const std::string& name, const Instance& inst, RunSpec spec) {
  const RunResult r = simulate(inst.problem, inst.topology, inst.initial, spec);
  const bool ok = r.status == RunStatus::Converged;
  return {name, ok,
          fmt::format("status {} at iter {}, gap {:.3e}", to_string(r.status), r.log.last().iter,
                      r.log.last().gap)};
}

CheckResult expect_diverged(const std::string& name, const Instance& inst, RunSpec spec) {
  const RunResult r = simulate(inst.problem, inst.topology, inst.initial, spec);
  const bool ok = r.status == RunStatus::Diverged;
  return {name, ok,
          fmt::format("status {} at iter {}, gap {:.3e}", to_string(r.status), r.log.last().iter,
                      r.log.last().gap)};
}

SuiteReport counterexample_suite() {
  SuiteReport rep{"counterexamples", {}};
  const Instance ex3 = example3();
  for (double gamma : {0.01, 0.1, 1.0}) {
    const double alpha = scaled_step(gamma, 2);
    // One DGD step applied to the basis vectors gives the iterate matrix.
    Matrix map(2, 2);
    for (int k = 0; k < 2; ++k) {
      Counters counters;
      const Stack e = Stack::Identity(2, 2).col(k);
      map.col(k) = mix(ex3.topology.mixing(), e, counters) -
                   alpha * exact_stacked_gradient(*ex3.problem, e);
    }
    const Matrix expected{{0.5 - gamma, 0.5}, {0.5, 0.5 + gamma}};
    const double err = (map - expected).cwiseAbs().maxCoeff();
    const double radius = Eigen::SelfAdjointEigenSolver<Matrix>(map).eigenvalues().cwiseAbs().maxCoeff();
    rep.checks.push_back({fmt::format("example3 dgd map equals M({})", gamma),
                          err <= 1e-14 && radius > 1.0,
                          fmt::format("entry error {:.1e}, spectral radius {:.8f}", err, radius)});
    RunSpec spec = batch_spec(AlgorithmId::Dgd, StepSize::constant(alpha), 1000000, 0.0);
    spec.metric_every = 100;
    rep.checks.push_back(expect_diverged(fmt::format("example3 dgd diverges, gamma {}", gamma), ex3,
                                         spec));
  }
  {
    RunSpec spec = batch_spec(AlgorithmId::ProxGpda, StepSize::constant(1.0), 10000, 1e-8);
    spec.algo.c = 1.0;
    spec.algo.beta = Vector::Ones(1);
    rep.checks.push_back(expect_converged("example3 prox_gpda converges", ex3, spec));
  }
  rep.checks.push_back(expect_converged(
      "example3 extra converges", ex3,
      batch_spec(AlgorithmId::Extra, StepSize::constant(0.1), 10000, 1e-8)));
  rep.checks.push_back(expect_converged(
      "example3 gt converges", ex3,
      batch_spec(AlgorithmId::Gt, StepSize::constant(0.1), 10000, 1e-8)));
  {
    RunSpec spec = batch_spec(AlgorithmId::Gnsd, StepSize::constant(0.1), 10000, 1e-8);
    spec.oracle.mode = OracleMode::Streaming;
    rep.checks.push_back(expect_converged("example3 gnsd (zero noise) converges", ex3, spec));
  }

  const Instance ex4 = example4();
  const Vector spectrum = ex4.topology.mixing().spectrum();
  const double eig_err = (spectrum - Vector{{-0.5, 0.5, 1.0}}).cwiseAbs().maxCoeff();
  rep.checks.push_back({"example4 eigenvalues {-0.5, 0.5, 1}", eig_err <= 1e-10,
                        fmt::format("max error {:.1e}", eig_err)});
  {
    AlgoConfig cfg;
    cfg.id = AlgorithmId::D2;
    bool rejected = false;
    try {
      make_stepper(cfg, ex4.topology);
    } catch (const ValidationError&) {
      rejected = true;
    }
    rep.checks.push_back({"example4 d2 precondition rejected without force", rejected, ""});
  }
  for (auto [label, step] : {std::pair{"0.25", StepSize::constant(0.25)},
                             std::pair{"1/t", StepSize::one_over_t(1.0)}}) {
    RunSpec spec = batch_spec(AlgorithmId::D2, step, 10000, 0.0);
    spec.algo.force = true;
    rep.checks.push_back(
        expect_diverged(fmt::format("example4 d2 diverges, step {}", label), ex4, spec));
  }
  rep.checks.push_back(expect_converged(
      "example4 gt converges", ex4,
      batch_spec(AlgorithmId::Gt, StepSize::constant(0.05), 10000, 1e-8)));
  {
    RunSpec spec = batch_spec(AlgorithmId::Gnsd, StepSize::constant(0.05), 10000, 1e-8);
    spec.oracle.mode = OracleMode::Streaming;
    rep.checks.push_back(expect_converged("example4 gnsd (zero noise) converges", ex4, spec));
  }
  return rep;
}

SuiteReport gradient_suite() {
  SuiteReport rep{"gradients", {}};
  for (const auto& g : finite_difference_checks()) {
    rep.checks.push_back({g.family + " gradient vs central differences",
                          g.worst_relative_error <= 1e-5,
                          fmt::format("worst relative error {:.2e}", g.worst_relative_error)});
  }
  return rep;
}

ProblemPtr oracle_test_problem() {
  SyntheticSpec spec;
  spec.family = "quadratic";
  spec.agents = 2;
  spec.dimension = 3;
  spec.samples_per_agent = 400;
  spec.seed = 11;
  spec.split = DataSplit::Heterogeneous;
  return generate_synthetic(spec);
}

SuiteReport oracle_suite() {
  SuiteReport rep{"oracles", {}};
  const ProblemPtr problem = oracle_test_problem();
  const Stack theta = Stack::Constant(2, 3, 0.3);
  {
    OracleSpec spec{OracleMode::Minibatch, 1, 0.0, {}};
    const auto r = unbiasedness_check(problem, spec, theta, 100000, 5);
    rep.checks.push_back({"minibatch m=1 unbiased", r.passed,
                          fmt::format("worst deviation {:.2f} standard errors", r.worst_sigma_ratio)});
  }
  {
    OracleSpec spec{OracleMode::Streaming, 4, 1.0, 1.0};
    const auto r = unbiasedness_check(problem, spec, theta, 100000, 6);
    rep.checks.push_back({"streaming m=4 unbiased", r.passed,
                          fmt::format("worst deviation {:.2f} standard errors", r.worst_sigma_ratio)});
  }
  {
    const auto r = unbiasedness_check(problem, OracleSpec{}, theta, 10, 7);
    rep.checks.push_back({"batch deviation is exactly zero", r.max_deviation == 0.0,
                          fmt::format("deviation {:.1e}", r.max_deviation)});
  }
  {
    GradientOracle oracle(problem, OracleSpec{OracleMode::Minibatch, 1, 0.0, {}}, 8);
    const Stack exact = exact_stacked_gradient(*problem, theta);
    const auto r = check_unbiased(
        exact, [&] { return Stack(oracle.evaluate(theta).grads.array() + 0.1); }, 100000);
    rep.checks.push_back({"biased control oracle is rejected", !r.passed,
                          fmt::format("worst deviation {:.1f} standard errors", r.worst_sigma_ratio)});
  }
  for (OracleMode mode : {OracleMode::Minibatch, OracleMode::Streaming}) {
    OracleSpec small{mode, 8, 1.0, {}}, large{mode, 16, 1.0, {}};
    const double v8 = estimator_variance(problem, small, theta, 10000, 9);
    const double v16 = estimator_variance(problem, large, theta, 10000, 10);
    const double ratio = v16 / v8;
    rep.checks.push_back({fmt::format("{} variance halves when m doubles", to_string(mode)),
                          std::abs(ratio - 0.5) <= 0.1,
                          fmt::format("var(16)/var(8) = {:.3f}", ratio)});
  }
  return rep;
}

SuiteReport mixing_suite() {
  SuiteReport rep{"mixing", {}};
  const std::vector<std::tuple<std::string, int, int>> graphs = {
      {"complete", 6, 0}, {"path", 6, 0},      {"line", 5, 0},
      {"cycle", 7, 0},    {"cycle", 8, 0},     {"star", 6, 0},
      {"hypercube", 8, 0}, {"random_regular", 32, 5}, {"random_regular", 16, 3}};
  for (const auto& [kind, n, degree] : graphs) {
    const Graph g = build_graph(kind, n, degree, 3);
    for (bool lazy : {false, true}) {
      const MixingMatrix w = lazy ? lazy_max_degree_mixing(g) : max_degree_mixing(g);
      const auto& v = w.validation();
      bool ok = v.ok();
      if (lazy) ok = ok && w.lambda_min() >= -1e-12;
      // the -1 eigenvalue appears exactly for bipartite graphs with no self weight
      if (!lazy) ok = ok && v.boundary_eigenvalue == (g.is_bipartite() && (w.matrix().diagonal().array() == 0).all());
      rep.checks.push_back({fmt::format("{}{} n={} P1-P3", lazy ? "lazy " : "", kind, n), ok,
                            fmt::format("lambda_min {:.4f}, second {:.4f}{}", w.lambda_min(),
                                        w.second_largest(), v.message.empty() ? "" : ", " + v.message)});
    }
  }
  return rep;
}

double relative_error(const Vector& approx, const Vector& exact) {
  return (approx - exact).norm() / std::max(exact.norm(), 1e-8);
}

}  // namespace

std::vector<GradientCheck> finite_difference_checks(int points, double step) {
  std::vector<std::pair<ProblemPtr, double>> problems;
  {
    SyntheticSpec spec;
    spec.family = "quadratic";
    spec.agents = 4;
    spec.dimension = 5;
    spec.samples_per_agent = 30;
    spec.split = DataSplit::Heterogeneous;
    spec.seed = 21;
    problems.emplace_back(generate_synthetic(spec), 1.0);
  }
  {
    SyntheticSpec spec;
    spec.family = "ncvx_logistic";
    spec.agents = 4;
    spec.dimension = 5;
    spec.samples_per_agent = 50;
    spec.seed = 22;
    problems.emplace_back(generate_synthetic(spec), 1.0);
  }
  {
    SyntheticSpec spec;
    spec.family = "tiny_mlp";
    spec.agents = 3;
    spec.dimension = 6;
    spec.samples_per_agent = 40;
    spec.hidden = {5, 4};
    spec.split = DataSplit::Heterogeneous;
    spec.seed = 23;
    problems.emplace_back(generate_synthetic(spec), 0.5);
  }
  std::vector<GradientCheck> out;
  std::mt19937_64 rng(99);
  for (const auto& [problem, scale] : problems) {
    std::normal_distribution<double> normal(0.0, scale);
    GradientCheck check{problem->family(), 0.0};
    const int d = problem->dimension();
    for (int k = 0; k < points; ++k) {
      Vector theta(d);
      for (auto& v : theta) v = normal(rng);
      for (int i = 0; i < problem->agents(); ++i) {
        Vector fd(d);
        for (int s = 0; s < d; ++s) {
          Vector up = theta, down = theta;
          up(s) += step;
          down(s) -= step;
          fd(s) = (problem->local_cost(i, up) - problem->local_cost(i, down)) / (2 * step);
        }
        check.worst_relative_error =
            std::max(check.worst_relative_error, relative_error(fd, problem->local_grad(i, theta)));
      }
    }
    out.push_back(check);
  }
  return out;
}

std::vector<SuiteReport> run_suite(const std::string& name) {
  if (name == "equivalence") return {equivalence_suite()};
  if (name == "counterexamples") return {counterexample_suite()};
  if (name == "gradients") return {gradient_suite()};
  if (name == "oracles") return {oracle_suite()};
  if (name == "mixing") return {mixing_suite()};
  if (name == "all") {
    std::vector<SuiteReport> all;
    for (const auto& s : suite_names()) all.push_back(run_suite(s).front());
    return all;
  }
  throw ValidationError("unknown suite '" + name +
                        "' (equivalence, counterexamples, gradients, oracles, mixing, all)");
}

}  // namespace decopt
