#pragma once

#include <vector>

#include <Eigen/Core>

#include "wid/discretize.hpp"
#include "wid/errors.hpp"
#include "wid/model.hpp"
#include "wid/rng.hpp"

namespace wid {

struct PredictorConfig {
  int paths = 100;
  enum class RegressorInit { zeros, from_data };
  RegressorInit regressor_init = RegressorInit::zeros;
  // draw the initial disturbance ensemble from the stationary law instead of
  // zero; requires a Hurwitz disturbance drift
  bool stationary_disturbance_init = false;

  void validate() const;
};

// response_only advances just the output channel (regressor and y-ensemble);
// the gradient channel is left untouched and no gradient draws are consumed.
enum class PredictorMode { full, response_only };

struct PredictorState {
  // transfer-function path: [-z lags, u lags] and the per-parameter variants
  Eigen::VectorXd phi;
  std::vector<Eigen::VectorXd> phi_grad;
  // state-space path: stacked [z; dz/dtheta_1; ...; dz/dtheta_d]
  Eigen::VectorXd latent;
  // disturbance ensembles: output channel, gradient channel, and the
  // per-parameter sensitivity states driven by the gradient-channel noise
  std::vector<Eigen::VectorXd> w_out;
  std::vector<Eigen::VectorXd> w_grad_base;
  std::vector<std::vector<Eigen::VectorXd>> w_grad_sens;

  int paths() const { return static_cast<int>(w_out.size()); }
};

struct PredictionOutput {
  double z = 0.0;       // linear response
  double y_bar = 0.0;   // output-channel prediction
  double eps = 0.0;     // y_k - y_bar
  Eigen::VectorXd z_grad;
  Eigen::VectorXd psi_bar;       // gradient of y_bar estimated on the gradient channel
  double y_grad_channel = 0.0;   // prediction mean over the gradient-channel ensemble
};

// head_u: held input values for the first n records, required for
// RegressorInit::from_data (z lags start at zero, u lags from data).
PredictorState init_predictor_state(const WienerModelSpec& model, const PredictorConfig& cfg,
                                    const Eigen::VectorXd& theta,
                                    const rng::StreamContext& ctx,
                                    const Eigen::VectorXd* head_u = nullptr);

// One sample step: advances the linear response, refreshes both disturbance
// ensembles with draws keyed by (k, path), and returns the prediction, its
// parameter gradient and the residual against y_k. t_prev and input are only
// read on the state-space path.
PredictionOutput predictor_step(PredictorState& state, const WienerModelSpec& model,
                                const Eigen::VectorXd& theta, const StepBundle& bundle, long k,
                                double u_k, double y_k, const rng::StreamContext& ctx,
                                PredictorMode mode = PredictorMode::full, double t_prev = 0.0,
                                const InputSignal* input = nullptr);

// s_k = psi_bar_k * eps_k, the direction the parameter update follows
Eigen::VectorXd estimating_vector(const PredictionOutput& out);

}  // namespace wid
