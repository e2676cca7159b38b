#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace wid {

// Full parameter vector theta = [theta_G; theta_w; theta_f] with block sizes
// (transfer operator / disturbance SDE / output nonlinearity).
struct ParameterVector {
  Eigen::VectorXd values;
  Eigen::Index tf_dim = 0;
  Eigen::Index sde_dim = 0;
  Eigen::Index nl_dim = 0;

  Eigen::Index dim() const { return values.size(); }
  void validate() const;  // throws std::invalid_argument on block/finiteness violation
};

struct ConstraintSet {
  std::function<bool(const Eigen::VectorXd&)> contains;
  std::string description;
};

// Rational operator  G(p) = (c_m p^m + ... + c_0) / (p^n + d_{n-1} p^{n-1} + ... + d_0).
struct TransferOperator {
  Eigen::VectorXd num;  // c_0..c_m
  Eigen::VectorXd den;  // d_0..d_{n-1}; leading p^n coefficient is implicitly 1

  Eigen::Index num_order() const { return num.size() - 1; }  // m
  Eigen::Index den_order() const { return den.size(); }      // n
  Eigen::Index param_count() const { return num.size() + den.size(); }
  void validate() const;
};

// true iff every denominator root has real part < -1e-12
bool stability_check(const TransferOperator& op);

// Disturbance SDE  dw = A(theta) w dt + B(theta) dbeta,  output row C(theta).
// Jacobian maps are indexed by the position j in the full theta vector.
//
// reset_each_interval: the predictor re-anchors the paths at the origin every
// sampling interval, so each prediction sees the one-interval marginal law
// instead of the accumulated state. Required when A is not Hurwitz (pure
// Brownian disturbance): the accumulated law has no stationary limit, and a
// predictor built on it degenerates while the parameter scale stays finite
// only for the per-interval reading.
struct DisturbanceSde {
  Eigen::Index state_dim = 0;  // n_w
  Eigen::Index noise_dim = 0;  // n_beta
  bool reset_each_interval = false;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> drift;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> dispersion;
  std::function<Eigen::RowVectorXd(const Eigen::VectorXd&)> output;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, Eigen::Index)> drift_jac;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, Eigen::Index)> dispersion_jac;
  std::function<Eigen::RowVectorXd(const Eigen::VectorXd&, Eigen::Index)> output_jac;
};

// Static output map y = f(x; theta_f) with analytic partials. The theta
// argument is the theta_f block only.
struct Nonlinearity {
  std::function<double(double, const Eigen::VectorXd&)> value;
  std::function<double(double, const Eigen::VectorXd&)> dvalue_dx;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> dvalue_dtheta;
};

// Known input signal with exact inter-sample behaviour.
struct InputSignal {
  enum class Kind { piecewise_constant, exosystem };
  Kind kind = Kind::piecewise_constant;

  // piecewise-constant: samples[i] held on [times[i], times[i+1])
  std::vector<double> times;
  std::vector<double> samples;

  // exosystem: u(t) = sum_l amplitudes[l] * cos(frequencies[l] * t + phases[l])
  Eigen::VectorXd amplitudes;
  Eigen::VectorXd frequencies;
  Eigen::VectorXd phases;

  double value_at(double t) const;

  static InputSignal piecewise(std::vector<double> times, std::vector<double> samples);
  static InputSignal multisine(Eigen::VectorXd amplitudes, Eigen::VectorXd frequencies,
                               Eigen::VectorXd phases);
};

// Deterministic latent dynamics  z' = A_z(theta) z + B_z(theta) u,  z-output
// row C_z(theta). Used when plant and disturbance share parameters and the
// transfer-operator regressor form cannot represent the coupling.
struct StateSpacePlant {
  Eigen::Index state_dim = 0;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> drift;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> input_gain;
  std::function<Eigen::RowVectorXd(const Eigen::VectorXd&)> output;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, Eigen::Index)> drift_jac;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, Eigen::Index)> input_gain_jac;
  std::function<Eigen::RowVectorXd(const Eigen::VectorXd&, Eigen::Index)> output_jac;
};

enum class PlantKind { transfer_function, state_space };

struct WienerModelSpec {
  std::string name;
  std::vector<std::string> parameter_names;
  Eigen::Index tf_dim = 0;
  Eigen::Index sde_dim = 0;
  Eigen::Index nl_dim = 0;
  ConstraintSet constraint;

  PlantKind plant_kind = PlantKind::transfer_function;

  // transfer-function path
  std::function<TransferOperator(const Eigen::VectorXd&)> transfer_operator;
  // position of theta[j] inside the canonical coefficient list
  // [c_0..c_m, d_0..d_{n-1}]; nullopt if theta[j] is not a plant coefficient
  std::function<std::optional<Eigen::Index>(Eigen::Index)> tf_coeff_index;

  // state-space path
  StateSpacePlant plant;

  DisturbanceSde disturbance;
  Nonlinearity output_fn;

  Eigen::Index dim() const { return tf_dim + sde_dim + nl_dim; }
  Eigen::Index nl_offset() const { return tf_dim + sde_dim; }
  Eigen::VectorXd nl_block(const Eigen::VectorXd& theta) const {
    return theta.segment(nl_offset(), nl_dim);
  }
  ParameterVector parameter_vector(Eigen::VectorXd values) const;
};

// dx = a x dt + b u dt + sigma dbeta, y = x^2 + v; theta = [a, b, sigma],
// plant and disturbance share the pole a. Constraint: a < 0.
WienerModelSpec make_example1_model();

// G(p) = c / (p^2 + a p + b), dw = sigma dbeta, Hill output 1/(1+|x|^alpha);
// theta = [a, b, c, sigma, alpha]. Constraint: (a,b) Hurwitz, alpha > 1.
WienerModelSpec make_example2_model();

// Example 2 with the disturbance dropped from the estimated block (w == 0);
// theta = [a, b, c, alpha].
WienerModelSpec make_example2_baseline_model();

}  // namespace wid
