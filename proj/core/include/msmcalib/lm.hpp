#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace msm::lm {

/// A residual block over a subset of parameter blocks. Residuals must already be whitened.
class Factor {
 public:
  virtual ~Factor() = default;

  virtual int residual_dim() const = 0;
  /// Parameter block ids this factor depends on, in Jacobian order.
  virtual const std::vector<int>& blocks() const = 0;

  /// Fills r and, when jacobians != nullptr, one residual_dim x block_size matrix per block.
  /// params[k] points at the values of blocks()[k].
  /// Returns false when the geometry is degenerate; the block is then flagged, not fatal.
  virtual bool evaluate(const std::vector<const double*>& params, Eigen::Ref<Eigen::VectorXd> r,
                        std::vector<Eigen::MatrixXd>* jacobians) const = 0;
};

struct Options {
  double initial_lambda = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-14;
  double function_tolerance = 1e-14;
  /// Condition number above which the covariance falls back to a truncated pseudo-inverse.
  double max_condition = 1e12;
};

struct Summary {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  int flagged_blocks = 0;
  std::string termination;
  std::vector<double> accepted_costs;  ///< cost after each accepted step, starting with the initial cost
};

/// Dense-normal-equation Levenberg-Marquardt over additive minimal parameters.
class Problem {
 public:
  int add_parameter_block(int size);
  void add_factor(std::unique_ptr<Factor> factor);

  int num_parameters() const { return static_cast<int>(total_); }
  int num_residuals() const;
  int block_offset(int id) const { return offsets_[id]; }
  int block_size(int id) const { return sizes_[id]; }
  std::size_t num_factors() const { return factors_.size(); }
  const Factor& factor(std::size_t i) const { return *factors_[i]; }

  /// Sum of squared whitened residuals; counts flagged blocks when flagged != nullptr.
  double cost(const Eigen::VectorXd& x, int* flagged = nullptr) const;
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const;

  /// Minimizes the cost starting from x (updated in place). Throws NoConvergence when the
  /// iteration limit is hit far from a stationary point, SingularNormalEquations when no
  /// damping makes the system solvable.
  Summary solve(Eigen::VectorXd& x, const Options& options = {}) const;

  /// (J^T J)^-1 at x, truncated pseudo-inverse past options.max_condition.
  Eigen::MatrixXd covariance(const Eigen::VectorXd& x, const Options& options = {}) const;

  /// Whitened J^T J and J^T r at x.
  void normal_equations(const Eigen::VectorXd& x, Eigen::MatrixXd& H, Eigen::VectorXd& g,
                        double& cost, int& flagged) const;

 private:
  std::vector<int> offsets_;
  std::vector<int> sizes_;
  long total_ = 0;
  std::vector<std::unique_ptr<Factor>> factors_;
};

}  // namespace msm::lm
