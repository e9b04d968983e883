#include "decopt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

namespace decopt {

GapComponents stationarity_gap(const Problem& problem, const Stack& theta) {
  const int n = problem.agents();
  if (theta.rows() != n || theta.cols() != problem.dimension()) {
    throw ValidationError("stationarity_gap: stack shape does not match the problem");
  }
  GapComponents out;
  out.mean = theta.colwise().mean().transpose();
  Vector avg_grad = Vector::Zero(theta.cols());
  double cost = 0.0;
  for (int j = 0; j < n; ++j) {
    avg_grad += problem.local_grad(j, out.mean);
    cost += problem.local_cost(j, out.mean);
  }
  avg_grad /= n;
  out.avg_grad_norm_sq = avg_grad.squaredNorm();
  out.consensus_error = (theta.rowwise() - out.mean.transpose()).squaredNorm();
  out.avg_cost = cost / n;
  out.gap = out.avg_grad_norm_sq + out.consensus_error;
  return out;
}

double heterogeneity_at(const Problem& problem, const Vector& theta) {
  const int n = problem.agents();
  std::vector<Vector> grads;
  grads.reserve(n);
  Vector avg = Vector::Zero(theta.size());
  for (int i = 0; i < n; ++i) {
    grads.push_back(problem.local_grad(i, theta));
    avg += grads.back();
  }
  avg /= n;
  double sum = 0.0;
  for (const auto& g : grads) sum += (g - avg).squaredNorm();
  return sum / n;
}

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Running: return "running";
    case RunStatus::Converged: return "converged";
    case RunStatus::Diverged: return "diverged";
  }
  return "?";
}

RunLog::RunLog(ProblemPtr problem, RecordPolicy policy)
    : problem_(std::move(problem)), policy_(policy) {
  if (!problem_) throw ValidationError("run log needs a problem");
}

RunRecord RunLog::base_row(int iter, const Counters& counters) const {
  RunRecord row;
  row.iter = iter;
  row.counters = counters;
  row.epoch = static_cast<double>(counters.sample_grad_evals) / problem_->total_samples();
  return row;
}

const RunRecord& RunLog::record(int iter, const Stack& theta, const Counters& counters) {
  RunRecord row = base_row(iter, counters);
  if (!theta.allFinite()) return record_divergence(iter, counters);
  const GapComponents gc = stationarity_gap(*problem_, theta);
  metric_sample_evals_ += problem_->total_samples();
  if (!std::isfinite(gc.gap) || !std::isfinite(gc.avg_cost)) {
    return record_divergence(iter, counters);
  }
  row.gap = gc.gap;
  row.consensus_error = gc.consensus_error;
  row.avg_grad_norm_sq = gc.avg_grad_norm_sq;
  row.avg_cost = gc.avg_cost;
  if (gc.gap > policy_.divergence_threshold) {
    row.status = RunStatus::Diverged;
  } else if (policy_.target_eps > 0 && gc.gap <= policy_.target_eps) {
    row.status = RunStatus::Converged;
  }
  last_finite_ = row;
  rows_.push_back(row);
  return rows_.back();
}

const RunRecord& RunLog::record_divergence(int iter, const Counters& counters) {
  RunRecord row = base_row(iter, counters);
  if (last_finite_) {
    row.gap = last_finite_->gap;
    row.consensus_error = last_finite_->consensus_error;
    row.avg_grad_norm_sq = last_finite_->avg_grad_norm_sq;
    row.avg_cost = last_finite_->avg_cost;
  } else {
    row.gap = row.consensus_error = row.avg_grad_norm_sq = row.avg_cost =
        std::numeric_limits<double>::quiet_NaN();
  }
  row.status = RunStatus::Diverged;
  rows_.push_back(row);
  return rows_.back();
}

std::optional<RunRecord> RunLog::first_reaching(double eps) const {
  for (const auto& row : rows_) {
    if (row.status != RunStatus::Diverged && row.gap <= eps) return row;
  }
  return std::nullopt;
}

double RunLog::max_consensus_error() const {
  double worst = 0.0;
  for (const auto& row : rows_) {
    if (std::isfinite(row.consensus_error)) worst = std::max(worst, row.consensus_error);
  }
  return worst;
}

std::string format_csv_row(const RunRecord& row) {
  return fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}", row.iter,
                     row.counters.comm_rounds, row.counters.grad_eval_rounds,
                     row.counters.sample_grad_evals, row.gap, row.consensus_error,
                     row.avg_grad_norm_sq, row.avg_cost, row.epoch, to_string(row.status));
}

void RunLog::write_csv(std::ostream& out) const {
  out << kCsvHeader << '\n';
  for (const auto& row : rows_) out << format_csv_row(row) << '\n';
}

}  // namespace decopt
