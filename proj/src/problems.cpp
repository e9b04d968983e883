#include "decopt/problems.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

namespace decopt {
namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(-m)) without overflow.
double logistic_loss(double margin) {
  return margin > 0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

void check_agent(const Problem& p, int agent) {
  if (agent < 0 || agent >= p.agents()) throw ValidationError("agent index out of range");
}

void check_theta(const Problem& p, const Vector& theta) {
  if (theta.size() != p.dimension()) {
    throw ValidationError("parameter has size " + std::to_string(theta.size()) + ", expected " +
                          std::to_string(p.dimension()));
  }
}

void check_data(const std::vector<AgentData>& data) {
  if (data.empty()) throw ValidationError("problem needs at least one agent");
  const auto p = data.front().features.cols();
  for (const AgentData& d : data) {
    if (d.size() == 0) throw ValidationError("every agent needs at least one sample");
    if (d.features.cols() != p) throw ValidationError("agents disagree on feature dimension");
    if (d.labels.size() != d.features.rows()) throw ValidationError("labels/features mismatch");
    for (double y : d.labels) {
      if (y != 1.0 && y != -1.0) throw ValidationError("labels must be -1 or +1");
    }
  }
}

}  // namespace

int Problem::total_samples() const {
  int total = 0;
  for (int i = 0; i < agents(); ++i) total += local_samples(i);
  return total;
}

double Problem::average_cost(const Vector& theta) const {
  double sum = 0.0;
  for (int i = 0; i < agents(); ++i) sum += local_cost(i, theta);
  return sum / agents();
}

// ---------------------------------------------------------------- quadratic

QuadraticProblem::QuadraticProblem(Vector curvature, const Matrix& shifts)
    : curvature_(std::move(curvature)) {
  if (shifts.rows() != curvature_.size()) throw ValidationError("quadratic: shifts rows != n");
  for (Eigen::Index i = 0; i < shifts.rows(); ++i) samples_.push_back(shifts.row(i));
  shifts_ = shifts;
}

QuadraticProblem::QuadraticProblem(Vector curvature, std::vector<Matrix> samples)
    : curvature_(std::move(curvature)), samples_(std::move(samples)) {
  if (static_cast<Eigen::Index>(samples_.size()) != curvature_.size() || samples_.empty()) {
    throw ValidationError("quadratic: need one sample block per agent");
  }
  const auto d = samples_.front().cols();
  shifts_.resize(curvature_.size(), d);
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].rows() == 0 || samples_[i].cols() != d) {
      throw ValidationError("quadratic: malformed sample block");
    }
    shifts_.row(static_cast<Eigen::Index>(i)) = samples_[i].colwise().mean();
  }
}

double QuadraticProblem::local_cost(int agent, const Vector& theta) const {
  check_agent(*this, agent);
  check_theta(*this, theta);
  const Matrix& s = samples_[agent];
  double sum = 0.0;
  for (Eigen::Index l = 0; l < s.rows(); ++l) sum += (theta.transpose() - s.row(l)).squaredNorm();
  return 0.5 * curvature_(agent) * sum / static_cast<double>(s.rows());
}

Vector QuadraticProblem::local_grad(int agent, const Vector& theta) const {
  check_agent(*this, agent);
  check_theta(*this, theta);
  return curvature_(agent) * (theta - shifts_.row(agent).transpose());
}

Vector QuadraticProblem::sample_grad(int agent, const Vector& theta,
                                     std::span<const int> rows) const {
  check_agent(*this, agent);
  if (rows.empty()) throw ValidationError("sample_grad: empty sample set");
  const Matrix& s = samples_[agent];
  Vector mean = Vector::Zero(dimension());
  for (int r : rows) mean += s.row(r).transpose();
  mean /= static_cast<double>(rows.size());
  return curvature_(agent) * (theta - mean);
}

// ------------------------------------------------------------ ncvx logistic

NcvxLogisticProblem::NcvxLogisticProblem(std::vector<AgentData> data, double lambda, double rho)
    : data_(std::move(data)), lambda_(lambda), rho_(rho) {
  check_data(data_);
  if (lambda_ < 0) throw ValidationError("ncvx_logistic: lambda must be >= 0");
  if (rho_ <= 0) throw ValidationError("ncvx_logistic: rho must be > 0");
  double top = 0.0;
  for (const AgentData& d : data_) {
    Matrix gram = d.features.transpose() * d.features / static_cast<double>(d.size());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    top = std::max(top, eig.eigenvalues().maxCoeff());
  }
  // |sigma'| <= 1/4 and |r''| <= 2 rho.
  smoothness_ = 0.25 * top + 2.0 * lambda_ * rho_;
}

double NcvxLogisticProblem::regularizer(const Vector& theta) const {
  const Eigen::ArrayXd sq = rho_ * theta.array().square();
  return lambda_ * (sq / (1.0 + sq)).sum();
}

Vector NcvxLogisticProblem::regularizer_grad(const Vector& theta) const {
  const Eigen::ArrayXd denom = 1.0 + rho_ * theta.array().square();
  return (lambda_ * 2.0 * rho_ * theta.array() / denom.square()).matrix();
}

double NcvxLogisticProblem::loss(int agent, const Vector& theta) const {
  check_agent(*this, agent);
  check_theta(*this, theta);
  const AgentData& d = data_[agent];
  const Vector margins = d.labels.cwiseProduct(d.features * theta);
  double sum = 0.0;
  for (double m : margins) sum += logistic_loss(m);
  return sum / d.size();
}

double NcvxLogisticProblem::local_cost(int agent, const Vector& theta) const {
  return loss(agent, theta) + regularizer(theta);
}

Vector NcvxLogisticProblem::local_grad(int agent, const Vector& theta) const {
  check_agent(*this, agent);
  check_theta(*this, theta);
  const AgentData& d = data_[agent];
  const Vector margins = d.labels.cwiseProduct(d.features * theta);
  Vector weights(d.size());
  for (int l = 0; l < d.size(); ++l) weights(l) = -d.labels(l) * sigmoid(-margins(l));
  return d.features.transpose() * weights / static_cast<double>(d.size()) +
         regularizer_grad(theta);
}

Vector NcvxLogisticProblem::sample_grad(int agent, const Vector& theta,
                                        std::span<const int> rows) const {
  check_agent(*this, agent);
  if (rows.empty()) throw ValidationError("sample_grad: empty sample set");
  const AgentData& d = data_[agent];
  Vector g = Vector::Zero(dimension());
  for (int r : rows) {
    const double y = d.labels(r);
    const double margin = y * d.features.row(r).dot(theta);
    g += (-y * sigmoid(-margin)) * d.features.row(r).transpose();
  }
  return g / static_cast<double>(rows.size()) + regularizer_grad(theta);
}

// ----------------------------------------------------------------- tiny MLP

TinyMlpProblem::TinyMlpProblem(std::vector<AgentData> data, std::vector<int> hidden)
    : data_(std::move(data)) {
  check_data(data_);
  widths_.push_back(static_cast<int>(data_.front().features.cols()));
  for (int h : hidden) {
    if (h <= 0) throw ValidationError("tiny_mlp: hidden widths must be positive");
    widths_.push_back(h);
  }
  widths_.push_back(1);
  parameter_count_ = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    parameter_count_ += widths_[l] * widths_[l + 1] + widths_[l + 1];
  }
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Layer {
  Eigen::Map<const RowMajor> weight;
  Eigen::Map<const Vector> bias;
};

std::vector<Layer> unpack(const std::vector<int>& widths, const Vector& theta) {
  std::vector<Layer> layers;
  const double* p = theta.data();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    Eigen::Map<const RowMajor> w(p, out, in);
    p += static_cast<std::ptrdiff_t>(out) * in;
    Eigen::Map<const Vector> b(p, out);
    p += out;
    layers.push_back({w, b});
  }
  return layers;
}

// Returns layer activations; the last entry holds the pre-sigmoid output.
std::vector<Matrix> forward(const std::vector<Layer>& layers, const Matrix& x) {
  std::vector<Matrix> acts{x};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = acts.back() * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (l + 1 < layers.size()) z = z.unaryExpr([](double v) { return sigmoid(v); });
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

double TinyMlpProblem::batch_loss(const Vector& theta, const Matrix& x, const Vector& y) const {
  const auto acts = forward(unpack(widths_, theta), x);
  const Matrix& z = acts.back();
  double sum = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    sum -= std::log(std::max(sigmoid(y(r) * z(r, 0)), kClamp));
  }
  return sum / static_cast<double>(x.rows());
}

Vector TinyMlpProblem::batch_grad(const Vector& theta, const Matrix& x, const Vector& y) const {
  const auto layers = unpack(widths_, theta);
  const auto acts = forward(layers, x);
  const auto m = static_cast<double>(x.rows());
  Matrix delta(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    delta(r, 0) = -y(r) * sigmoid(-y(r) * acts.back()(r, 0)) / m;
  }
  Vector grad(parameter_count_);
  // Offsets of each layer inside the flat vector.
  std::vector<int> offset{0};
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offset.push_back(offset.back() + widths_[l] * widths_[l + 1] + widths_[l + 1]);
  }
  for (std::size_t l = layers.size(); l-- > 0;) {
    const int in = widths_[l], out = widths_[l + 1];
    const Matrix& h = acts[l];
    Eigen::Map<RowMajor> gw(grad.data() + offset[l], out, in);
    gw = delta.transpose() * h;
    Eigen::Map<Vector>(grad.data() + offset[l] + out * in, out) = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix back = delta * layers[l].weight;
      delta = back.cwiseProduct(h).cwiseProduct((1.0 - h.array()).matrix());
    }
  }
  return grad;
}

Vector TinyMlpProblem::predict(const Vector& theta, const Matrix& inputs) const {
  check_theta(*this, theta);
  const auto acts = forward(unpack(widths_, theta), inputs);
  return acts.back().col(0).unaryExpr([](double v) { return sigmoid(v); });
}

double TinyMlpProblem::local_cost(int agent, const Vector& theta) const {
  check_agent(*this, agent);
  check_theta(*this, theta);
  return batch_loss(theta, data_[agent].features, data_[agent].labels);
}

Vector TinyMlpProblem::local_grad(int agent, const Vector& theta) const {
  check_agent(*this, agent);
  check_theta(*this, theta);
  return batch_grad(theta, data_[agent].features, data_[agent].labels);
}

Vector TinyMlpProblem::sample_grad(int agent, const Vector& theta,
                                   std::span<const int> rows) const {
  check_agent(*this, agent);
  if (rows.empty()) throw ValidationError("sample_grad: empty sample set");
  const AgentData& d = data_[agent];
  Matrix x(static_cast<Eigen::Index>(rows.size()), d.features.cols());
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    x.row(static_cast<Eigen::Index>(k)) = d.features.row(rows[k]);
    y(static_cast<Eigen::Index>(k)) = d.labels(rows[k]);
  }
  return batch_grad(theta, x, y);
}

// No closed form; power iteration on finite-difference Hessian-vector
// products of agent 0's gradient at a fixed random point.
double TinyMlpProblem::smoothness() const {
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector theta(parameter_count_), v(parameter_count_);
  for (auto& t : theta) t = 0.3 * normal(rng);
  for (auto& t : v) t = normal(rng);
  v.normalize();
  constexpr double h = 1e-6;
  double estimate = 0.0;
  for (int agent = 0; agent < agents(); ++agent) {
    const Vector g0 = local_grad(agent, theta);
    Vector u = v;
    double lam = 0.0;
    for (int it = 0; it < 30; ++it) {
      Vector hv = (local_grad(agent, theta + h * u) - g0) / h;
      lam = hv.norm();
      if (lam == 0.0) break;
      u = hv / lam;
    }
    estimate = std::max(estimate, lam);
  }
  return estimate;
}

}  // namespace decopt
