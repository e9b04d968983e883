#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "decopt/problems.hpp"
#include "decopt/types.hpp"

namespace decopt {

struct GapComponents {
  double gap = 0.0;               // avg_grad_norm_sq + consensus_error
  double avg_grad_norm_sq = 0.0;  // ||(1/n) sum_j grad f_j(mean)||^2
  double consensus_error = 0.0;   // sum_j ||theta_j - mean||^2
  double avg_cost = 0.0;          // (1/n) sum_j f_j(mean)
  Vector mean;
};

// Exact evaluation from the problem's local gradients (never an oracle).
GapComponents stationarity_gap(const Problem& problem, const Stack& theta);

// (1/n) sum_i ||grad f_i(theta) - grad f(theta)||^2 at one point.
double heterogeneity_at(const Problem& problem, const Vector& theta);

enum class RunStatus { Running, Converged, Diverged };
std::string_view to_string(RunStatus status);

struct RunRecord {
  int iter = 0;
  Counters counters;
  double gap = 0.0;
  double consensus_error = 0.0;
  double avg_grad_norm_sq = 0.0;
  double avg_cost = 0.0;
  double epoch = 0.0;
  RunStatus status = RunStatus::Running;
};

struct RecordPolicy {
  double target_eps = 0.0;  // <= 0 disables the converged status
  double divergence_threshold = 1e6;
};

inline constexpr std::string_view kCsvHeader =
    "iter,comm_rounds,grad_eval_rounds,sample_grad_evals,gap,consensus_error,"
    "avg_grad_norm_sq,avg_cost,epoch,status";

// Append-only per-run log. Metric evaluation is charged to its own counter
// so the algorithm's counters only reflect the algorithm.
class RunLog {
 public:
  RunLog(ProblemPtr problem, RecordPolicy policy = {});

  // Evaluates the gap at theta and appends a row. A non-finite theta (or
  // gap) yields a diverged row carrying the last finite gap.
  const RunRecord& record(int iter, const Stack& theta, const Counters& counters);
  // Appends a diverged row without evaluating anything.
  const RunRecord& record_divergence(int iter, const Counters& counters);

  const std::vector<RunRecord>& rows() const { return rows_; }
  const RunRecord& last() const { return rows_.back(); }
  bool empty() const { return rows_.empty(); }
  RunStatus status() const { return rows_.empty() ? RunStatus::Running : rows_.back().status; }
  std::int64_t metric_sample_evals() const { return metric_sample_evals_; }
  const RecordPolicy& policy() const { return policy_; }

  // First row whose gap is at most eps.
  std::optional<RunRecord> first_reaching(double eps) const;
  // Largest consensus error over the log.
  double max_consensus_error() const;

  void write_csv(std::ostream& out) const;

 private:
  RunRecord base_row(int iter, const Counters& counters) const;

  ProblemPtr problem_;
  RecordPolicy policy_;
  std::vector<RunRecord> rows_;
  std::int64_t metric_sample_evals_ = 0;
  std::optional<RunRecord> last_finite_;
};

// One CSV row in the log format (no trailing newline).
std::string format_csv_row(const RunRecord& row);

}  // namespace decopt
