#include "msmcalib/lm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "msmcalib/error.hpp"

namespace msm::lm {

namespace {

void gather(const Factor& f, const std::vector<int>& offsets, const Eigen::VectorXd& x,
            std::vector<const double*>& params) {
  const auto& blocks = f.blocks();
  params.resize(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) params[k] = x.data() + offsets[blocks[k]];
}

}  // namespace

int Problem::add_parameter_block(int size) {
  offsets_.push_back(static_cast<int>(total_));
  sizes_.push_back(size);
  total_ += size;
  return static_cast<int>(sizes_.size()) - 1;
}

void Problem::add_factor(std::unique_ptr<Factor> factor) {
  for (int b : factor->blocks()) {
    if (b < 0 || b >= static_cast<int>(sizes_.size())) {
      throw CalibError(ErrorCode::Validation, "factor references unknown parameter block " + std::to_string(b));
    }
  }
  factors_.push_back(std::move(factor));
}

int Problem::num_residuals() const {
  int n = 0;
  for (const auto& f : factors_) n += f->residual_dim();
  return n;
}

double Problem::cost(const Eigen::VectorXd& x, int* flagged) const {
  double c = 0.0;
  int bad = 0;
  Eigen::VectorXd r;
  std::vector<const double*> params;
  for (const auto& f : factors_) {
    r.resize(f->residual_dim());
    gather(*f, offsets_, x, params);
    if (!f->evaluate(params, r, nullptr)) ++bad;
    c += r.squaredNorm();
  }
  if (flagged) *flagged = bad;
  return c;
}

Eigen::VectorXd Problem::residuals(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(num_residuals());
  Eigen::Index row = 0;
  std::vector<const double*> params;
  for (const auto& f : factors_) {
    const int m = f->residual_dim();
    gather(*f, offsets_, x, params);
    f->evaluate(params, out.segment(row, m), nullptr);
    row += m;
  }
  return out;
}

void Problem::normal_equations(const Eigen::VectorXd& x, Eigen::MatrixXd& H, Eigen::VectorXd& g, double& cost,
                               int& flagged) const {
  H.setZero(total_, total_);
  g.setZero(total_);
  cost = 0.0;
  flagged = 0;
  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> J;
  std::vector<const double*> params;
  for (const auto& f : factors_) {
    const auto& blocks = f->blocks();
    const int m = f->residual_dim();
    r.resize(m);
    J.resize(blocks.size());
    for (std::size_t k = 0; k < blocks.size(); ++k) J[k].resize(m, sizes_[blocks[k]]);
    gather(*f, offsets_, x, params);
    if (!f->evaluate(params, r, &J)) {
      ++flagged;
      continue;
    }
    cost += r.squaredNorm();
    for (std::size_t a = 0; a < blocks.size(); ++a) {
      const int oa = offsets_[blocks[a]];
      const int sa = sizes_[blocks[a]];
      g.segment(oa, sa).noalias() += J[a].transpose() * r;
      for (std::size_t b = a; b < blocks.size(); ++b) {
        const int ob = offsets_[blocks[b]];
        const int sb = sizes_[blocks[b]];
        const Eigen::MatrixXd JtJ = J[a].transpose() * J[b];
        H.block(oa, ob, sa, sb) += JtJ;
        if (b != a) H.block(ob, oa, sb, sa) += JtJ.transpose();
      }
    }
  }
}

Summary Problem::solve(Eigen::VectorXd& x, const Options& options) const {
  if (x.size() != total_) throw CalibError(ErrorCode::Validation, "state size mismatch");
  Summary s;
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double cost = 0.0;
  int flagged = 0;
  normal_equations(x, H, g, cost, flagged);
  s.initial_cost = cost;
  s.flagged_blocks = flagged;
  s.accepted_costs.push_back(cost);

  double lambda = options.initial_lambda;
  for (s.iterations = 0; s.iterations < options.max_iterations; ++s.iterations) {
    s.gradient_norm = g.lpNorm<Eigen::Infinity>();
    if (s.gradient_norm < options.gradient_tolerance) {
      s.converged = true;
      s.termination = "gradient";
      break;
    }
    if (cost == 0.0) {
      s.converged = true;
      s.termination = "zero cost";
      break;
    }

    bool accepted = false;
    bool tiny_step = false;
    while (!accepted) {
      if (lambda > 1e32) {
        s.converged = true;
        s.termination = "damping saturated";
        break;
      }
      Eigen::MatrixXd A = H;
      for (Eigen::Index i = 0; i < A.rows(); ++i) A(i, i) += lambda * std::max(H(i, i), 1e-12);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        lambda *= options.lambda_up;
        continue;
      }
      const Eigen::VectorXd dx = ldlt.solve(-g);
      if (!dx.allFinite()) {
        lambda *= options.lambda_up;
        continue;
      }
      if (dx.norm() <= options.step_tolerance * (x.norm() + options.step_tolerance)) {
        tiny_step = true;
        break;
      }
      const Eigen::VectorXd xn = x + dx;
      int flagged_new = 0;
      const double cn = this->cost(xn, &flagged_new);
      if (std::isfinite(cn) && flagged_new <= flagged && cn < cost) {
        const double rel = (cost - cn) / cost;
        x = xn;
        lambda = std::max(lambda / options.lambda_down, 1e-16);
        normal_equations(x, H, g, cost, flagged);
        s.accepted_costs.push_back(cost);
        accepted = true;
        if (rel < options.function_tolerance) {
          s.converged = true;
          s.termination = "function";
        }
      } else {
        lambda *= options.lambda_up;
      }
    }
    if (tiny_step) {
      s.converged = true;
      s.termination = "step";
      break;
    }
    if (s.converged) break;
  }
  s.final_cost = cost;
  s.flagged_blocks = flagged;
  s.gradient_norm = g.lpNorm<Eigen::Infinity>();
  if (!s.converged) {
    s.termination = "iteration limit";
    if (s.iterations >= options.max_iterations && s.gradient_norm > 1e3 * options.gradient_tolerance * (1.0 + cost)) {
      throw CalibError(ErrorCode::NoConvergence, "no convergence after " + std::to_string(s.iterations) +
                                                     " iterations, gradient " + std::to_string(s.gradient_norm));
    }
  }
  return s;
}

Eigen::MatrixXd Problem::covariance(const Eigen::VectorXd& x, const Options& options) const {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double cost = 0.0;
  int flagged = 0;
  normal_equations(x, H, g, cost, flagged);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (!(top > 0.0)) throw CalibError(ErrorCode::SingularNormalEquations, "normal equations are zero");
  const double floor = top / options.max_condition;
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv(i) = ev(i) > floor ? 1.0 / ev(i) : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace msm::lm
