#include "wid/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace wid {

void EstimatorConfig::validate() const {
  if (!(gain_exponent > 0.5 && gain_exponent <= 1.0))
    throw std::invalid_argument("estimator: gain exponent must lie in (0.5, 1]");
  if (!(gain_scale > 0.0)) throw std::invalid_argument("estimator: gain scale must be positive");
  if (!(r0_scale > 0.0)) throw std::invalid_argument("estimator: R_0 scale must be positive");
  if (!(theta_norm_max > 0.0))
    throw std::invalid_argument("estimator: norm bound must be positive");
  if (!constraint.contains) throw std::invalid_argument("estimator: constraint set required");
}

double gain(long k, const EstimatorConfig& cfg) {
  if (k < 1) throw std::invalid_argument("gain: step index starts at 1");
  return cfg.gain_scale / std::pow(static_cast<double>(k), cfg.gain_exponent);
}

Eigen::VectorXd project(const Eigen::VectorXd& candidate, const Eigen::VectorXd& previous,
                        const ConstraintSet& constraint, bool* hit) {
  if (!constraint.contains(previous))
    throw std::logic_error("project: previous iterate violates the constraint set");
  bool inside = candidate.allFinite() && constraint.contains(candidate);
  if (hit) *hit = !inside;
  return inside ? candidate : previous;
}

EstimatorSnapshot init_estimator(const Eigen::VectorXd& theta0, const EstimatorConfig& cfg) {
  cfg.validate();
  if (!cfg.constraint.contains(theta0))
    throw std::invalid_argument("init_estimator: initial parameters violate the constraint set");
  EstimatorSnapshot s;
  s.k = 0;
  s.theta = theta0;
  s.R = cfg.r0_scale * Eigen::MatrixXd::Identity(theta0.size(), theta0.size());
  return s;
}

EstimatorSnapshot newton_update(const EstimatorSnapshot& prev, const Eigen::VectorXd& psi_bar,
                                double eps, const EstimatorConfig& cfg) {
  const Eigen::Index d = prev.theta.size();
  if (psi_bar.size() != d) throw std::invalid_argument("newton_update: dimension mismatch");
  const long k = prev.k + 1;
  if (!psi_bar.allFinite() || !std::isfinite(eps))
    throw DivergenceError(k, "estimating signal is not finite");
  const double g = gain(k, cfg);

  EstimatorSnapshot next;
  next.k = k;
  next.R = prev.R + g * (psi_bar * psi_bar.transpose() - prev.R);
  next.R = ((next.R + next.R.transpose()) / 2.0).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(next.R, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  Eigen::MatrixXd R_solve = next.R;
  if (!(lo > 0.0) || hi > cfg.cond_limit * lo)
    R_solve += (1e-8 * next.R.trace() / static_cast<double>(d)) *
               Eigen::MatrixXd::Identity(d, d);

  Eigen::VectorXd candidate = prev.theta + g * R_solve.ldlt().solve(psi_bar * eps);
  if (!candidate.allFinite()) throw DivergenceError(k, "parameter candidate is not finite");
  next.theta = project(candidate, prev.theta, cfg.constraint, &next.projection_hit);
  if (next.theta.norm() > cfg.theta_norm_max)
    throw DivergenceError(k, "parameter norm exceeded the configured bound");
  return next;
}

}  // namespace wid
