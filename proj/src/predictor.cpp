#include "wid/predictor.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace wid {

namespace {

// stationary covariance of dw = A w dt + B dbeta, via the vectorized
// Lyapunov equation A P + P A^T + B B^T = 0
Eigen::MatrixXd stationary_cov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  if ((es.eigenvalues().real().array() >= 0.0).any())
    throw std::invalid_argument("stationary init requires a Hurwitz disturbance drift");
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index l = 0; l < n; ++l) {
        K(i + n * j, l + n * j) += A(i, l);  // (A P)_{ij}
        K(i + n * j, i + n * l) += A(j, l);  // (P A^T)_{ij}
      }
  Eigen::MatrixXd BBt = B * B.transpose();
  Eigen::Map<Eigen::VectorXd> rhs(BBt.data(), n * n);
  Eigen::VectorXd p = K.fullPivLu().solve(-rhs);
  Eigen::MatrixXd P = Eigen::Map<Eigen::MatrixXd>(p.data(), n, n);
  return ((P + P.transpose()) / 2.0).eval();
}

void shift_in(Eigen::VectorXd& phi, double neg_z_new, double u_new) {
  const Eigen::Index n = phi.size() / 2;
  for (Eigen::Index i = n - 1; i > 0; --i) phi(i) = phi(i - 1);
  phi(0) = neg_z_new;
  for (Eigen::Index i = 2 * n - 1; i > n; --i) phi(i) = phi(i - 1);
  phi(n) = u_new;
}

}  // namespace

void PredictorConfig::validate() const {
  if (paths < 1) throw std::invalid_argument("predictor: at least one path required");
}

PredictorState init_predictor_state(const WienerModelSpec& model, const PredictorConfig& cfg,
                                    const Eigen::VectorXd& theta, const rng::StreamContext& ctx,
                                    const Eigen::VectorXd* head_u) {
  cfg.validate();
  if (theta.size() != model.dim())
    throw std::invalid_argument("init_predictor_state: parameter dimension mismatch");
  const Eigen::Index d = model.dim();
  PredictorState st;

  if (model.plant_kind == PlantKind::transfer_function) {
    TransferOperator op = model.transfer_operator(theta);
    const Eigen::Index n = op.den_order();
    auto fill_u_lags = [&](Eigen::VectorXd& phi) {
      const Eigen::Index nj = phi.size() / 2;
      for (Eigen::Index i = 0; i < nj; ++i) {
        Eigen::Index src = n - 1 - i;  // lag i+1 at the first predicted step
        phi(nj + i) = src >= 0 && src < head_u->size() ? (*head_u)(src) : 0.0;
      }
    };
    if (cfg.regressor_init == PredictorConfig::RegressorInit::from_data) {
      if (head_u == nullptr || head_u->size() != n)
        throw std::invalid_argument(
            "init_predictor_state: from_data needs one held input per plant order");
    }
    st.phi = Eigen::VectorXd::Zero(2 * n);
    st.phi_grad.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      if (auto idx = model.tf_coeff_index(j)) {
        Eigen::Index nj = *idx <= op.num_order() ? n : 2 * n;
        st.phi_grad[j] = Eigen::VectorXd::Zero(2 * nj);
      }
    }
    if (cfg.regressor_init == PredictorConfig::RegressorInit::from_data) {
      fill_u_lags(st.phi);
      for (auto& pg : st.phi_grad)
        if (pg.size() > 0) fill_u_lags(pg);
    }
  } else {
    st.latent = Eigen::VectorXd::Zero((d + 1) * model.plant.state_dim);
  }

  const Eigen::Index nw = model.disturbance.state_dim;
  st.w_out.assign(cfg.paths, Eigen::VectorXd::Zero(nw));
  st.w_grad_base.assign(cfg.paths, Eigen::VectorXd::Zero(nw));
  st.w_grad_sens.assign(cfg.paths, std::vector<Eigen::VectorXd>(d, Eigen::VectorXd::Zero(nw)));
  if (cfg.stationary_disturbance_init && nw > 0) {
    Eigen::MatrixXd P = stationary_cov(model.disturbance.drift(theta),
                                       model.disturbance.dispersion(theta));
    Eigen::MatrixXd root = cov_sqrt(P);
    for (int m = 0; m < cfg.paths; ++m) {
      st.w_out[m] = root * ctx.y_stream(0, m).vector(nw);
      st.w_grad_base[m] = root * ctx.psi_stream(0, m).vector(nw);
    }
  }
  return st;
}

PredictionOutput predictor_step(PredictorState& st, const WienerModelSpec& model,
                                const Eigen::VectorXd& theta, const StepBundle& bundle, long k,
                                double u_k, double y_k, const rng::StreamContext& ctx,
                                PredictorMode mode, double t_prev, const InputSignal* input) {
  const Eigen::Index d = model.dim();
  const Eigen::Index nw = model.disturbance.state_dim;
  const int M = st.paths();
  const bool tf = model.plant_kind == PlantKind::transfer_function;
  const bool full = mode == PredictorMode::full;
  PredictionOutput out;

  // linear response and its parameter sensitivities
  Eigen::VectorXd zg = Eigen::VectorXd::Zero(d);
  double z = 0.0;
  if (tf) {
    z = st.phi.dot(bundle.arx.eta());
    if (full)
      for (Eigen::Index j = 0; j < d; ++j)
        if (st.phi_grad[j].size() > 0) zg(j) = st.phi_grad[j].dot(bundle.arx_grad[j].eta());
  } else {
    if (input == nullptr)
      throw std::invalid_argument("predictor_step: state-space path requires the input signal");
    const Eigen::Index nz = bundle.latent_block;
    st.latent = (bundle.latent.A * st.latent + bundle.latent.forcing(*input, t_prev)).eval();
    Eigen::RowVectorXd Cz = model.plant.output(theta);
    z = Cz.dot(st.latent.head(nz));
    if (full)
      for (Eigen::Index j = 0; j < d; ++j)
        zg(j) = Cz.dot(st.latent.segment((j + 1) * nz, nz)) +
                model.plant.output_jac(theta, j).dot(st.latent.head(nz));
  }
  out.z = z;

  Eigen::RowVectorXd C;
  if (nw > 0) C = model.disturbance.output(theta);

  const bool reset = model.disturbance.reset_each_interval;

  // output channel
  double y_sum = 0.0;
  for (int m = 0; m < M; ++m) {
    double x = z;
    if (nw > 0) {
      Eigen::VectorXd xi = ctx.y_stream(k, m).vector(bundle.sde.B.cols());
      st.w_out[m] = reset ? (bundle.sde.B * xi).eval()
                          : (bundle.sde.A * st.w_out[m] + bundle.sde.B * xi).eval();
      x += C.dot(st.w_out[m]);
    }
    y_sum += model.output_fn.value(x, model.nl_block(theta));
  }
  out.y_bar = y_sum / M;
  out.eps = y_k - out.y_bar;
  if (!std::isfinite(out.y_bar)) throw DivergenceError(k, "prediction is not finite");

  if (!full) {
    if (tf) shift_in(st.phi, -z, u_k);
    return out;
  }

  // gradient channel: one 2*nw draw per path, shared across all parameters
  Eigen::MatrixXd Cj(d, std::max<Eigen::Index>(nw, 1));
  if (nw > 0)
    for (Eigen::Index j = 0; j < d; ++j) Cj.row(j) = model.disturbance.output_jac(theta, j);
  const Eigen::Index off = model.nl_offset();

  Eigen::VectorXd psi_sum = Eigen::VectorXd::Zero(d);
  double g_sum = 0.0;
  for (int m = 0; m < M; ++m) {
    double x = z;
    if (nw > 0) {
      Eigen::VectorXd xi = ctx.psi_stream(k, m).vector(2 * nw);
      Eigen::VectorXd w_prev = reset ? Eigen::VectorXd::Zero(nw) : st.w_grad_base[m];
      st.w_grad_base[m] =
          (bundle.sde.A * w_prev + bundle.sde.B * xi.head(nw)).eval();
      for (Eigen::Index j = 0; j < d; ++j) {
        const auto& G = bundle.sde_grad[j];
        Eigen::VectorXd s_prev =
            reset ? Eigen::VectorXd::Zero(nw) : st.w_grad_sens[m][j];
        st.w_grad_sens[m][j] = (G.F.bottomLeftCorner(nw, nw) * w_prev +
                                G.F.bottomRightCorner(nw, nw) * s_prev +
                                G.L.bottomLeftCorner(nw, nw) * xi.head(nw) +
                                G.L.bottomRightCorner(nw, nw) * xi.tail(nw))
                                   .eval();
      }
      x += C.dot(st.w_grad_base[m]);
    }
    double fx = model.output_fn.value(x, model.nl_block(theta));
    double fpx = model.output_fn.dvalue_dx(x, model.nl_block(theta));
    Eigen::VectorXd ft;
    if (model.nl_dim > 0) ft = model.output_fn.dvalue_dtheta(x, model.nl_block(theta));
    g_sum += fx;
    for (Eigen::Index j = 0; j < d; ++j) {
      double xj = zg(j);
      if (nw > 0) xj += Cj.row(j).dot(st.w_grad_base[m]) + C.dot(st.w_grad_sens[m][j]);
      double yj = fpx * xj;
      if (j >= off && j < off + model.nl_dim) yj += ft(j - off);
      psi_sum(j) += yj;
    }
  }
  out.psi_bar = psi_sum / M;
  out.y_grad_channel = g_sum / M;
  out.z_grad = zg;
  if (!out.psi_bar.allFinite()) throw DivergenceError(k, "prediction gradient is not finite");

  if (tf) {
    shift_in(st.phi, -z, u_k);
    for (Eigen::Index j = 0; j < d; ++j)
      if (st.phi_grad[j].size() > 0) shift_in(st.phi_grad[j], -zg(j), u_k);
  }
  return out;
}

Eigen::VectorXd estimating_vector(const PredictionOutput& out) {
  if (out.psi_bar.size() == 0)
    throw std::invalid_argument("estimating_vector: gradient channel was not computed");
  return out.psi_bar * out.eps;
}

}  // namespace wid
