#pragma once

#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wid/model.hpp"

namespace wid {

// Difference-equation coefficients of a sampled transfer function
//   z_k = -a_1 z_{k-1} - ... - a_n z_{k-n} + b_1 u_{k-1} + ... + b_n u_{k-n}.
struct DiscreteArx {
  Eigen::VectorXd a;
  Eigen::VectorXd b;

  Eigen::Index order() const { return a.size(); }
  // stacked coefficient vector [a; b], the eta that multiplies the regressor
  Eigen::VectorXd eta() const;
};

// Exact one-step map of dw = A w dt + B dbeta over an interval dt:
//   w_k = A_d w_{k-1} + B_d xi,  xi ~ N(0, I).
struct DiscreteSdeStep {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  double dt = 0.0;
};

// Exact one-step map of the parameter-gradient SDE (state [w; dw/dtheta_j]).
struct GradientSdeStep {
  Eigen::MatrixXd F;
  Eigen::MatrixXd L;
  double dt = 0.0;
};

// Exact affine-Gaussian step x(t+dt) = A x(t) + g + B xi for a linear system
// driven by a known input. The forcing g depends on where the step starts;
// cross_input * exosystem-state(t) reproduces it for any t.
struct ExoStep {
  Eigen::MatrixXd A;
  Eigen::VectorXd g;
  Eigen::MatrixXd B;
  double dt = 0.0;
};

struct ExoKernel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd cross_input;  // n x 2L oscillator coupling
  Eigen::MatrixXd B;
  double dt = 0.0;

  Eigen::VectorXd forcing(const InputSignal& input, double t) const;
};

Eigen::MatrixXd mat_exp(const Eigen::MatrixXd& A, double t);

// (e^{A dt}, integral_0^dt e^{As} B B^T e^{A^T s} ds), the latter symmetrized
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> van_loan_cov(const Eigen::MatrixXd& A,
                                                         const Eigen::MatrixXd& B, double dt);

// Square root of a symmetric PSD matrix: Cholesky when positive definite,
// eigendecomposition square root with near-zero clipping otherwise.
// scale_hint, when positive, widens the clipping tolerance to that scale
// (used for Schur complements of a larger covariance).
Eigen::MatrixXd cov_sqrt(const Eigen::MatrixXd& Q, double scale_hint = -1.0);

DiscreteArx zoh_discretize(const TransferOperator& op, double dt);

// ZOH discretization of the gradient filter d G / d theta_j, where j indexes
// the canonical coefficient list [c_0..c_m, d_0..d_{n-1}]: order n for
// numerator coefficients (p^j / den), order 2n for denominator coefficients
// (-p^j num / den^2).
DiscreteArx gradient_tf_discretize(const TransferOperator& op, Eigen::Index j, double dt);

DiscreteSdeStep sde_discretize(const DisturbanceSde& sde, const Eigen::VectorXd& theta, double dt);

GradientSdeStep gradient_sde_discretize(const DisturbanceSde& sde, const Eigen::VectorXd& theta,
                                        Eigen::Index j, double dt);

// Exact discretization of dx = (A x + B_u u(t)) dt + B_noise dbeta over
// [t, t+dt] for an oscillator-bank input, via the block exponential of the
// exosystem-augmented system.
ExoKernel exo_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B_u,
                     const Eigen::MatrixXd& B_noise, const InputSignal& input, double dt);
ExoStep exo_discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B_u,
                       const Eigen::MatrixXd& B_noise, const InputSignal& input, double t,
                       double dt);

// ZOH step of a deterministic linear system: x_{k+1} = A_d x_k + B_d u_k.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> zoh_state_step(const Eigen::MatrixXd& A,
                                                           const Eigen::MatrixXd& B, double dt);

// Everything the predictor needs for one interval at a fixed theta.
struct StepBundle {
  double dt = 0.0;
  // transfer-function path
  DiscreteArx arx;
  std::vector<DiscreteArx> arx_grad;  // indexed by theta position; empty when unused
  // state-space path: stacked latent [z; dz/dtheta_1; ...; dz/dtheta_d]
  ExoKernel latent;
  Eigen::Index latent_block = 0;  // n_z
  // disturbance
  DiscreteSdeStep sde;
  std::vector<GradientSdeStep> sde_grad;  // indexed by theta position
};

StepBundle build_step_bundle(const WienerModelSpec& model, const Eigen::VectorXd& theta, double dt,
                             const InputSignal* input = nullptr);

// Memoizes bundles on (theta identity, dt quantized to 1e-9). Correctness
// never depends on a hit; the map is bounded and cleared wholesale when full.
class StepCache {
 public:
  explicit StepCache(std::size_t capacity = 256) : capacity_(capacity) {}
  std::shared_ptr<const StepBundle> get(const WienerModelSpec& model, const Eigen::VectorXd& theta,
                                        double dt, const InputSignal* input = nullptr);

 private:
  struct Entry {
    Eigen::VectorXd theta;
    double dt;
    std::shared_ptr<const StepBundle> bundle;
  };
  std::size_t capacity_;
  std::unordered_map<std::uint64_t, Entry> entries_;
};

}  // namespace wid
