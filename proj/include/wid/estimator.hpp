#pragma once

#include <Eigen/Core>

#include "wid/errors.hpp"
#include "wid/model.hpp"

namespace wid {

struct EstimatorConfig {
  double gain_scale = 1.0;     // gamma_k = gain_scale / k^gain_exponent
  double gain_exponent = 0.9;  // must lie in (1/2, 1]
  double r0_scale = 1.0;       // R_0 = r0_scale * I
  double theta_norm_max = 1e6;
  double cond_limit = 1e12;    // eigenvalue-ratio threshold for regularizing the solve
  enum class DivergencePolicy { abort, reset } on_divergence = DivergencePolicy::abort;
  ConstraintSet constraint;

  void validate() const;
};

struct EstimatorSnapshot {
  long k = 0;  // number of updates applied
  Eigen::VectorXd theta;
  Eigen::MatrixXd R;
  bool projection_hit = false;
};

double gain(long k, const EstimatorConfig& cfg);

// Returns the candidate when it satisfies the constraint set, the previous
// iterate otherwise. The previous iterate must itself be feasible.
Eigen::VectorXd project(const Eigen::VectorXd& candidate, const Eigen::VectorXd& previous,
                        const ConstraintSet& constraint, bool* hit = nullptr);

EstimatorSnapshot init_estimator(const Eigen::VectorXd& theta0, const EstimatorConfig& cfg);

// One stochastic Newton step: refresh the curvature estimate R with the outer
// product of the prediction gradient, then move theta along R^{-1} psi eps and
// project. Throws DivergenceError on a nonfinite candidate or when the
// projected iterate escapes the norm bound.
EstimatorSnapshot newton_update(const EstimatorSnapshot& prev, const Eigen::VectorXd& psi_bar,
                                double eps, const EstimatorConfig& cfg);

}  // namespace wid
