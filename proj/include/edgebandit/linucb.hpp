#pragma once

#include <vector>

namespace edgebandit {

// Classic disjoint-arms LinUCB baseline: per arm a dense covariance A
// (identity prior) and bias vector b; theta is obtained by solving A x = b
// rather than forming the inverse. Kept for oracle comparisons against the
// diagonal variant; it is deliberately not optimized.
class LinUcb {
 public:
  LinUcb(int n_arms, int dim, double alpha);

  int n_arms() const { return n_arms_; }
  int dim() const { return dim_; }

  double ucb(int arm, const std::vector<double>& x) const;
  double mean(int arm, const std::vector<double>& x) const;
  // Argmax of ucb over arms, ties to the lower arm index.
  int select(const std::vector<double>& x) const;
  void update(int arm, const std::vector<double>& x, double reward);

  // Row-major dim x dim covariance of one arm.
  const std::vector<double>& covariance(int arm) const;
  const std::vector<double>& bias(int arm) const;

 private:
  std::vector<double> solve(int arm, const std::vector<double>& rhs) const;

  int n_arms_;
  int dim_;
  double alpha_;
  std::vector<std::vector<double>> cov_;   // per arm, row-major
  std::vector<std::vector<double>> bias_;  // per arm
};

}  // namespace edgebandit
