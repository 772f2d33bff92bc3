#include "edgebandit/linucb.hpp"

#include <cmath>
#include <stdexcept>

namespace edgebandit {

LinUcb::LinUcb(int n_arms, int dim, double alpha)
    : n_arms_(n_arms), dim_(dim), alpha_(alpha) {
  if (n_arms < 1 || dim < 1) throw std::invalid_argument("n_arms and dim must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  cov_.assign(static_cast<std::size_t>(n_arms),
              std::vector<double>(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim), 0.0));
  bias_.assign(static_cast<std::size_t>(n_arms),
               std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  for (auto& a : cov_) {
    for (int i = 0; i < dim; ++i) {
      a[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(i)] = 1.0;
    }
  }
}

// Cholesky solve; A is symmetric positive definite by construction
// (identity plus a sum of outer products).
std::vector<double> LinUcb::solve(int arm, const std::vector<double>& rhs) const {
  const std::size_t n = static_cast<std::size_t>(dim_);
  const auto& a = cov_[static_cast<std::size_t>(arm)];
  std::vector<double> chol(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= chol[i * n + k] * chol[j * n + k];
      if (i == j) {
        if (!(s > 0.0)) throw std::runtime_error("covariance lost positive definiteness");
        chol[i * n + i] = std::sqrt(s);
      } else {
        chol[i * n + j] = s / chol[j * n + j];
      }
    }
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= chol[i * n + k] * y[k];
    y[i] = s / chol[i * n + i];
  }
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= chol[k * n + ii] * x[k];
    x[ii] = s / chol[ii * n + ii];
    if (!std::isfinite(x[ii])) throw std::runtime_error("non-finite LinUCB solve");
  }
  return x;
}

double LinUcb::mean(int arm, const std::vector<double>& x) const {
  const auto theta = solve(arm, bias_[static_cast<std::size_t>(arm)]);
  double m = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) m += x[i] * theta[i];
  return m;
}

double LinUcb::ucb(int arm, const std::vector<double>& x) const {
  if (x.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("context size");
  const auto z = solve(arm, x);
  double quad = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) quad += x[i] * z[i];
  return mean(arm, x) + alpha_ * std::sqrt(quad);
}

int LinUcb::select(const std::vector<double>& x) const {
  int best = 0;
  double best_score = ucb(0, x);
  for (int a = 1; a < n_arms_; ++a) {
    const double s = ucb(a, x);
    if (s > best_score) {
      best_score = s;
      best = a;
    }
  }
  return best;
}

void LinUcb::update(int arm, const std::vector<double>& x, double reward) {
  if (arm < 0 || arm >= n_arms_) throw std::invalid_argument("arm out of range");
  if (x.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("context size");
  auto& a = cov_[static_cast<std::size_t>(arm)];
  auto& b = bias_[static_cast<std::size_t>(arm)];
  const std::size_t n = static_cast<std::size_t>(dim_);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] += x[i] * x[j];
    b[i] += x[i] * reward;
  }
}

const std::vector<double>& LinUcb::covariance(int arm) const {
  return cov_.at(static_cast<std::size_t>(arm));
}

const std::vector<double>& LinUcb::bias(int arm) const {
  return bias_.at(static_cast<std::size_t>(arm));
}

}  // namespace edgebandit
