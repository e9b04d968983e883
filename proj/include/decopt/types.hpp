#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace decopt {

// Agent-major parameter stack: row i holds agent i's copy of the d-vector.
template <typename Scalar>
using StackT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Stack = StackT<double>;
using Vector = VectorT<double>;
using Matrix = Eigen::MatrixXd;

// Raised when inputs break a documented precondition (bad sizes, invalid
// graphs, malformed configs). The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by an oracle when a gradient comes back non-finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-run communication and computation accounting.
struct Counters {
  std::int64_t comm_rounds = 0;
  std::int64_t grad_eval_rounds = 0;
  std::int64_t sample_grad_evals = 0;

  friend bool operator==(const Counters&, const Counters&) = default;
};

}  // namespace decopt
