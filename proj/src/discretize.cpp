#include "wid/discretize.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <unsupported/Eigen/MatrixFunctions>

namespace wid {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// characteristic polynomial of A via the Faddeev-LeVerrier recursion;
// returns [a_1, ..., a_n] with det(zI - A) = z^n + a_1 z^{n-1} + ... + a_n
Eigen::VectorXd char_poly(const Eigen::MatrixXd& A) {
  const Eigen::Index n = A.rows();
  Eigen::VectorXd a(n);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  double c = 1.0;
  for (Eigen::Index k = 1; k <= n; ++k) {
    if (k > 1) M = A * M + c * Eigen::MatrixXd::Identity(n, n);
    c = -(A * M).trace() / static_cast<double>(k);
    a(k - 1) = c;
  }
  return a;
}

// controllable canonical realization of num(p)/den(p), strictly proper
void canonical_form(const Eigen::VectorXd& num, const Eigen::VectorXd& den, Eigen::MatrixXd& A,
                    Eigen::VectorXd& B, Eigen::RowVectorXd& C) {
  const Eigen::Index n = den.size();
  A = Eigen::MatrixXd::Zero(n, n);
  if (n > 1) A.topRightCorner(n - 1, n - 1).setIdentity();
  A.row(n - 1) = -den.transpose();
  B = Eigen::VectorXd::Zero(n);
  B(n - 1) = 1.0;
  C = Eigen::RowVectorXd::Zero(n);
  C.head(num.size()) = num.transpose();
}

// coefficients of the product of two polynomials given in ascending order
Eigen::VectorXd poly_mul(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(p.size() + q.size() - 1);
  for (Eigen::Index i = 0; i < p.size(); ++i)
    for (Eigen::Index j = 0; j < q.size(); ++j) r(i + j) += p(i) * q(j);
  return r;
}

// sampled difference-equation coefficients from a discrete state-space
// realization, via the characteristic polynomial and Markov parameters
DiscreteArx state_space_to_arx(const Eigen::MatrixXd& Ad, const Eigen::VectorXd& Bd,
                               const Eigen::RowVectorXd& C) {
  const Eigen::Index n = Ad.rows();
  DiscreteArx out;
  out.a = char_poly(Ad);
  out.b = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd h(n);
  Eigen::VectorXd v = Bd;
  for (Eigen::Index i = 0; i < n; ++i) {
    h(i) = C * v;  // h_{i+1} = C Ad^i Bd
    v = Ad * v;
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    double acc = h(r);
    for (Eigen::Index s = 0; s < r; ++s) acc += out.a(s) * h(r - 1 - s);
    out.b(r) = acc;
  }
  return out;
}

std::uint64_t mix_hash(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

Eigen::VectorXd DiscreteArx::eta() const {
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

Eigen::MatrixXd mat_exp(const Eigen::MatrixXd& A, double t) {
  require(A.rows() == A.cols(), "mat_exp: square matrix required");
  require(A.allFinite() && std::isfinite(t), "mat_exp: finite input required");
  require(t >= 0.0, "mat_exp: nonnegative time required");
  Eigen::MatrixXd At = A * t;
  Eigen::MatrixXd E = At.exp();
  if (!E.allFinite()) throw std::invalid_argument("mat_exp: exponential overflowed");
  return E;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> van_loan_cov(const Eigen::MatrixXd& A,
                                                         const Eigen::MatrixXd& B, double dt) {
  const Eigen::Index n = A.rows();
  require(A.rows() == A.cols(), "van_loan_cov: square drift required");
  require(B.rows() == n, "van_loan_cov: dispersion row count mismatch");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = -A;
  M.topRightCorner(n, n) = B * B.transpose();
  M.bottomRightCorner(n, n) = A.transpose();
  Eigen::MatrixXd E = mat_exp(M, dt);
  Eigen::MatrixXd Ad = E.bottomRightCorner(n, n).transpose();
  Eigen::MatrixXd Q = Ad * E.topRightCorner(n, n);
  Q = ((Q + Q.transpose()) / 2.0).eval();
  return {Ad, Q};
}

Eigen::MatrixXd cov_sqrt(const Eigen::MatrixXd& Q, double scale_hint) {
  const Eigen::Index n = Q.rows();
  require(Q.rows() == Q.cols(), "cov_sqrt: square matrix required");
  require(Q.allFinite(), "cov_sqrt: finite input required");
  double scale = Q.cwiseAbs().maxCoeff();
  require((Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, scale),
          "cov_sqrt: symmetric matrix required");
  if (n == 0) return Q;
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd L = llt.matrixL();
    if (L.allFinite()) return L;
  }
  double tol_scale = std::max(scale, scale_hint);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ev(i) < -1e-10 * std::max(1e-300, tol_scale))
      throw std::invalid_argument("cov_sqrt: matrix is not positive semidefinite");
    if (ev(i) < 0.0) ev(i) = 0.0;
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

DiscreteArx zoh_discretize(const TransferOperator& op, double dt) {
  op.validate();
  require(dt > 0.0, "zoh_discretize: positive interval required");
  require(op.num_order() < op.den_order(), "zoh_discretize: strictly proper operator required");
  const Eigen::Index n = op.den_order();
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  Eigen::RowVectorXd C;
  canonical_form(op.num, op.den, A, B, C);
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = A;
  aug.topRightCorner(n, 1) = B;
  Eigen::MatrixXd E = mat_exp(aug, dt);
  Eigen::MatrixXd Ad = E.topLeftCorner(n, n);
  Eigen::VectorXd Bd = E.topRightCorner(n, 1);
  return state_space_to_arx(Ad, Bd, C);
}

DiscreteArx gradient_tf_discretize(const TransferOperator& op, Eigen::Index j, double dt) {
  op.validate();
  const Eigen::Index m = op.num_order();
  const Eigen::Index n = op.den_order();
  require(j >= 0 && j < op.param_count(), "gradient_tf_discretize: coefficient index out of range");
  TransferOperator filt;
  if (j <= m) {
    filt.num = Eigen::VectorXd::Zero(j + 1);
    filt.num(j) = 1.0;
    filt.den = op.den;
  } else {
    const Eigen::Index i = j - m - 1;
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(i + 1);
    shift(i) = 1.0;
    filt.num = -poly_mul(shift, op.num);
    Eigen::VectorXd den_full(n + 1);
    den_full << op.den, 1.0;
    Eigen::VectorXd den_sq = poly_mul(den_full, den_full);
    filt.den = den_sq.head(2 * n);
  }
  return zoh_discretize(filt, dt);
}

DiscreteSdeStep sde_discretize(const DisturbanceSde& sde, const Eigen::VectorXd& theta,
                               double dt) {
  require(dt > 0.0, "sde_discretize: positive interval required");
  Eigen::MatrixXd A = sde.drift(theta);
  Eigen::MatrixXd B = sde.dispersion(theta);
  require(A.rows() == sde.state_dim && A.cols() == sde.state_dim,
          "sde_discretize: drift dimension mismatch");
  require(B.rows() == sde.state_dim && B.cols() == sde.noise_dim,
          "sde_discretize: dispersion dimension mismatch");
  auto [Ad, Q] = van_loan_cov(A, B, dt);
  DiscreteSdeStep out;
  out.A = Ad;
  out.B = cov_sqrt(Q);
  out.dt = dt;
  return out;
}

GradientSdeStep gradient_sde_discretize(const DisturbanceSde& sde, const Eigen::VectorXd& theta,
                                        Eigen::Index j, double dt) {
  require(dt > 0.0, "gradient_sde_discretize: positive interval required");
  const Eigen::Index n = sde.state_dim;
  Eigen::MatrixXd A = sde.drift(theta);
  Eigen::MatrixXd B = sde.dispersion(theta);
  Eigen::MatrixXd Aj = sde.drift_jac(theta, j);
  Eigen::MatrixXd Bj = sde.dispersion_jac(theta, j);
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  F.topLeftCorner(n, n) = A;
  F.bottomLeftCorner(n, n) = Aj;
  F.bottomRightCorner(n, n) = A;
  Eigen::MatrixXd L(2 * n, sde.noise_dim);
  L.topRows(n) = B;
  L.bottomRows(n) = Bj;
  auto [Fd, Q] = van_loan_cov(F, L, dt);

  // Block-triangular square root: the leading block reuses the one-step
  // disturbance root so the w component of the gradient state is driven by
  // the same noise coordinates as the disturbance ensemble, with the
  // cross-covariance carried by the lower-left block.
  Eigen::MatrixXd Qw = Q.topLeftCorner(n, n);
  Eigen::MatrixXd Qc = Q.bottomLeftCorner(n, n);
  Eigen::MatrixXd Qg = Q.bottomRightCorner(n, n);
  double q_scale = std::max(Q.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::MatrixXd Lw = cov_sqrt(((Qw + Qw.transpose()) / 2.0).eval(), q_scale);
  Eigen::MatrixXd Lc =
      Lw.completeOrthogonalDecomposition().solve(Qc.transpose()).transpose().eval();
  Eigen::MatrixXd S = Qg - Lc * Lc.transpose();
  Eigen::MatrixXd Lg = cov_sqrt(((S + S.transpose()) / 2.0).eval(), q_scale);

  GradientSdeStep out;
  out.F = Fd;
  out.L = Eigen::MatrixXd::Zero(2 * n, Lw.cols() + Lg.cols());
  out.L.topLeftCorner(n, Lw.cols()) = Lw;
  out.L.bottomLeftCorner(n, Lw.cols()) = Lc;
  out.L.bottomRightCorner(n, Lg.cols()) = Lg;
  out.dt = dt;
  return out;
}

Eigen::VectorXd ExoKernel::forcing(const InputSignal& input, double t) const {
  if (cross_input.cols() == 0) return Eigen::VectorXd::Zero(A.rows());
  const auto L = static_cast<Eigen::Index>(input.amplitudes.size());
  Eigen::VectorXd e(2 * L);
  for (Eigen::Index l = 0; l < L; ++l) {
    double ph = input.frequencies[l] * t + input.phases[l];
    e(2 * l) = input.amplitudes[l] * std::cos(ph);
    e(2 * l + 1) = input.amplitudes[l] * std::sin(ph);
  }
  return cross_input * e;
}

ExoKernel exo_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B_u,
                     const Eigen::MatrixXd& B_noise, const InputSignal& input, double dt) {
  require(input.kind == InputSignal::Kind::exosystem,
          "exo_kernel: oscillator-bank input required");
  require(dt > 0.0, "exo_kernel: positive interval required");
  const Eigen::Index n = A.rows();
  require(A.cols() == n && B_u.rows() == n && B_u.cols() == 1,
          "exo_kernel: dimension mismatch");
  const auto L = static_cast<Eigen::Index>(input.amplitudes.size());

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + 2 * L, n + 2 * L);
  M.topLeftCorner(n, n) = A;
  for (Eigen::Index l = 0; l < L; ++l) {
    double w = input.frequencies[l];
    M(n + 2 * l, n + 2 * l + 1) = -w;
    M(n + 2 * l + 1, n + 2 * l) = w;
    M.block(0, n + 2 * l, n, 1) = B_u;  // cosine component feeds the input
  }
  Eigen::MatrixXd E = mat_exp(M, dt);

  ExoKernel out;
  out.A = E.topLeftCorner(n, n);
  out.cross_input = E.topRightCorner(n, 2 * L);
  out.dt = dt;
  if (B_noise.size() > 0 && B_noise.cwiseAbs().maxCoeff() > 0.0) {
    auto [Ad, Q] = van_loan_cov(A, B_noise, dt);
    (void)Ad;
    out.B = cov_sqrt(Q);
  } else {
    out.B = Eigen::MatrixXd::Zero(n, B_noise.cols());
  }
  return out;
}

ExoStep exo_discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B_u,
                       const Eigen::MatrixXd& B_noise, const InputSignal& input, double t,
                       double dt) {
  ExoKernel k = exo_kernel(A, B_u, B_noise, input, dt);
  ExoStep out;
  out.A = k.A;
  out.g = k.forcing(input, t);
  out.B = k.B;
  out.dt = dt;
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> zoh_state_step(const Eigen::MatrixXd& A,
                                                           const Eigen::MatrixXd& B, double dt) {
  require(dt > 0.0, "zoh_state_step: positive interval required");
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = A;
  aug.topRightCorner(n, m) = B;
  Eigen::MatrixXd E = mat_exp(aug, dt);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

StepBundle build_step_bundle(const WienerModelSpec& model, const Eigen::VectorXd& theta, double dt,
                             const InputSignal* input) {
  require(theta.size() == model.dim(), "build_step_bundle: parameter dimension mismatch");
  require(dt > 0.0, "build_step_bundle: positive interval required");
  const Eigen::Index d = model.dim();
  StepBundle out;
  out.dt = dt;

  if (model.plant_kind == PlantKind::transfer_function) {
    TransferOperator op = model.transfer_operator(theta);
    out.arx = zoh_discretize(op, dt);
    out.arx_grad.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      if (auto idx = model.tf_coeff_index(j))
        out.arx_grad[j] = gradient_tf_discretize(op, *idx, dt);
    }
  } else {
    require(input != nullptr, "build_step_bundle: state-space path requires the input signal");
    const Eigen::Index nz = model.plant.state_dim;
    const Eigen::Index ns = (d + 1) * nz;
    Eigen::MatrixXd As = Eigen::MatrixXd::Zero(ns, ns);
    Eigen::MatrixXd Bs = Eigen::MatrixXd::Zero(ns, 1);
    Eigen::MatrixXd Az = model.plant.drift(theta);
    As.topLeftCorner(nz, nz) = Az;
    Bs.topRows(nz) = model.plant.input_gain(theta);
    for (Eigen::Index j = 0; j < d; ++j) {
      As.block((j + 1) * nz, (j + 1) * nz, nz, nz) = Az;
      As.block((j + 1) * nz, 0, nz, nz) = model.plant.drift_jac(theta, j);
      Bs.block((j + 1) * nz, 0, nz, 1) = model.plant.input_gain_jac(theta, j);
    }
    out.latent = exo_kernel(As, Bs, Eigen::MatrixXd::Zero(ns, 0), *input, dt);
    out.latent_block = nz;
  }

  if (model.disturbance.state_dim > 0) {
    out.sde = sde_discretize(model.disturbance, theta, dt);
    out.sde_grad.resize(d);
    for (Eigen::Index j = 0; j < d; ++j)
      out.sde_grad[j] = gradient_sde_discretize(model.disturbance, theta, j, dt);
  }
  return out;
}

std::shared_ptr<const StepBundle> StepCache::get(const WienerModelSpec& model,
                                                 const Eigen::VectorXd& theta, double dt,
                                                 const InputSignal* input) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    std::uint64_t bits;
    double v = theta(i);
    std::memcpy(&bits, &v, sizeof(bits));
    h = mix_hash(h, bits);
  }
  const auto qdt = static_cast<std::int64_t>(std::llround(dt * 1e9));
  h = mix_hash(h, static_cast<std::uint64_t>(qdt));

  auto it = entries_.find(h);
  if (it != entries_.end() && it->second.theta.size() == theta.size() &&
      it->second.theta == theta && it->second.dt == dt)
    return it->second.bundle;

  auto bundle = std::make_shared<const StepBundle>(build_step_bundle(model, theta, dt, input));
  if (entries_.size() >= capacity_) entries_.clear();
  entries_[h] = Entry{theta, dt, bundle};
  return bundle;
}

}  // namespace wid
