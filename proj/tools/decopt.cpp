#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "decopt/harness.hpp"
#include "decopt/suites.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kDiverged = 3;
constexpr int kSuiteFailure = 4;

std::filesystem::path resolve_out(const std::string& flag,
                                  const std::optional<std::filesystem::path>& from_config) {
  if (!flag.empty()) return flag;
  if (from_config) return *from_config;
  if (auto env = decopt::default_output_dir()) return *env;
  return "decopt_out";
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int do_run(const std::string& config_path, const std::string& out_flag) {
  const decopt::ExperimentConfig cfg = decopt::load_experiment(config_path);
  const auto out = resolve_out(out_flag, cfg.output);
  const decopt::ExperimentSummary summary = decopt::run_experiment(cfg, out);
  for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << summary.line() << '\n';
  if (summary.status == decopt::RunStatus::Diverged && !cfg.expect_divergence) return kDiverged;
  return kOk;
}

int do_verify(const std::string& suite) {
  bool all_ok = true;
  for (const auto& report : decopt::run_suite(suite)) {
    for (const auto& check : report.checks) {
      std::cout << fmt::format("[{}] {} {}: {}\n", report.suite, check.passed ? "PASS" : "FAIL",
                               check.name, check.detail);
    }
    all_ok = all_ok && report.passed();
  }
  std::cout << (all_ok ? "verify: all checks passed\n" : "verify: failures\n");
  return all_ok ? kOk : kSuiteFailure;
}

int do_sweep(const std::string& config_path, const std::string& axis, const std::string& values,
             const std::string& out_flag) {
  std::ifstream in(config_path);
  if (!in) throw decopt::ValidationError("cannot open config '" + config_path + "'");
  nlohmann::json base;
  try {
    base = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw decopt::ValidationError(std::string("config: ") + e.what());
  }
  std::optional<std::filesystem::path> from_config;
  if (base.contains("output") && base["output"].is_string()) {
    from_config = base["output"].get<std::string>();
  }
  const auto out = resolve_out(out_flag, from_config);
  const decopt::SweepResult result = decopt::sweep(base, axis, split_list(values), out);
  result.write_summary(std::cout);
  const bool expect = base.value("expect_divergence", false);
  for (const auto& p : result.points) {
    if (p.summary.status == decopt::RunStatus::Diverged && !expect) return kDiverged;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized optimization simulator"};
  app.require_subcommand(1);

  std::string config, out, suite = "all", axis, values;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("--config", config, "JSON experiment file")->required();
  run->add_option("--out", out, "Output directory for CSV logs");

  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("--suite", suite, "equivalence|counterexamples|gradients|oracles|mixing|all");

  auto* sweep = app.add_subcommand("sweep", "Run a config over one axis");
  sweep->add_option("--config", config, "Base JSON experiment file")->required();
  sweep->add_option("--axis", axis, "algorithm|graph|batch_size|n|heterogeneity")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (run->parsed()) return do_run(config, out);
    if (verify->parsed()) return do_verify(suite);
    if (sweep->parsed()) return do_sweep(config, axis, values, out);
  } catch (const decopt::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
