#include <cmath>
#include <vector>

#include <doctest.h>

#include "wid/model.hpp"
#include "wid/predictor.hpp"

using namespace wid;

namespace {

struct Trace {
  std::vector<double> y_bar;
  std::vector<double> y_grad;
  std::vector<Eigen::VectorXd> psi;
  std::vector<double> z;
};

// fixed-rate replay of the predictor over a held-input record
Trace run_tf(const WienerModelSpec& model, const Eigen::VectorXd& theta, const PredictorConfig& cfg,
             const rng::StreamContext& ctx, const std::vector<double>& u, double dt,
             PredictorMode mode = PredictorMode::full) {
  PredictorState st = init_predictor_state(model, cfg, theta, ctx);
  StepBundle bundle = build_step_bundle(model, theta, dt);
  Trace tr;
  for (std::size_t i = 0; i < u.size(); ++i) {
    long k = static_cast<long>(i) + 1;
    PredictionOutput out = predictor_step(st, model, theta, bundle, k, u[i], 0.5, ctx, mode);
    tr.y_bar.push_back(out.y_bar);
    tr.z.push_back(out.z);
    if (mode == PredictorMode::full) {
      tr.y_grad.push_back(out.y_grad_channel);
      tr.psi.push_back(out.psi_bar);
    }
  }
  return tr;
}

Trace run_ss(const WienerModelSpec& model, const Eigen::VectorXd& theta, const PredictorConfig& cfg,
             const rng::StreamContext& ctx, const InputSignal& input, int steps, double dt) {
  PredictorState st = init_predictor_state(model, cfg, theta, ctx);
  StepBundle bundle = build_step_bundle(model, theta, dt, &input);
  Trace tr;
  for (int i = 0; i < steps; ++i) {
    PredictionOutput out = predictor_step(st, model, theta, bundle, i + 1, 0.0, 0.5, ctx,
                                          PredictorMode::full, i * dt, &input);
    tr.y_bar.push_back(out.y_bar);
    tr.y_grad.push_back(out.y_grad_channel);
    tr.psi.push_back(out.psi_bar);
    tr.z.push_back(out.z);
  }
  return tr;
}

std::vector<double> prbs(int n, std::uint64_t seed) {
  rng::UniformStream s(seed, rng::Channel::truth, 7, 7);
  std::vector<double> u(n);
  for (auto& v : u) v = s.next() < 0.5 ? -5.0 : 5.0;
  return u;
}

}  // namespace

TEST_CASE("gradient channel matches finite differences on the filter model") {
  WienerModelSpec m = make_example2_model();
  Eigen::VectorXd th(5);
  th << 1.2, 0.27, 1.0, 0.5, 1.7;
  PredictorConfig cfg;
  cfg.paths = 4;
  rng::StreamContext ctx{11, 12};
  const double dt = 0.5;
  auto u = prbs(40, 2);

  Trace base = run_tf(m, th, cfg, ctx, u, dt);
  for (Eigen::Index j = 0; j < 5; ++j) {
    const double delta = 1e-5 * std::max(1.0, std::abs(th(j)));
    Eigen::VectorXd hi = th, lo = th;
    hi(j) += delta;
    lo(j) -= delta;
    Trace th_hi = run_tf(m, hi, cfg, ctx, u, dt);
    Trace th_lo = run_tf(m, lo, cfg, ctx, u, dt);
    double scale = 1e-7;
    for (const auto& p : base.psi) scale = std::max(scale, std::abs(p(j)));
    for (std::size_t i = 0; i < u.size(); ++i) {
      double fd = (th_hi.y_grad[i] - th_lo.y_grad[i]) / (2.0 * delta);
      CHECK(std::abs(fd - base.psi[i](j)) < 3e-6 * scale);
    }
  }
}

TEST_CASE("gradient channel matches finite differences on the latent model") {
  WienerModelSpec m = make_example1_model();
  PredictorConfig cfg;
  cfg.paths = 3;
  rng::StreamContext ctx{21, 22};
  const double dt = 0.7;
  Eigen::VectorXd amp(3), freq(3), ph(3);
  amp << 6.0, 6.0, 6.0;
  freq << M_PI / 5.0, 3.0 * M_PI / 5.0, 7.0 * M_PI / 5.0;
  ph << 0.0, 0.4, 1.1;
  InputSignal input = InputSignal::multisine(amp, freq, ph);
  const int steps = 25;

  // with noise on, the input-gain and dispersion sensitivities ride the same
  // draws as the base ensemble, so central differences reproduce them
  Eigen::VectorXd th(3);
  th << -1.0, 1.0, 0.8;
  Trace base = run_ss(m, th, cfg, ctx, input, steps, dt);
  for (Eigen::Index j : {1, 2}) {
    const double delta = 1e-6;
    Eigen::VectorXd hi = th, lo = th;
    hi(j) += delta;
    lo(j) -= delta;
    Trace th_hi = run_ss(m, hi, cfg, ctx, input, steps, dt);
    Trace th_lo = run_ss(m, lo, cfg, ctx, input, steps, dt);
    double scale = 1e-7;
    for (const auto& p : base.psi) scale = std::max(scale, std::abs(p(j)));
    for (int i = 0; i < steps; ++i) {
      double fd = (th_hi.y_grad[i] - th_lo.y_grad[i]) / (2.0 * delta);
      CHECK(std::abs(fd - base.psi[i](j)) < 2e-5 * scale);
    }
  }

  // with the dispersion at zero the prediction is deterministic and the pole
  // sensitivity comes out of the augmented kernel alone
  th << -1.0, 1.0, 0.0;
  base = run_ss(m, th, cfg, ctx, input, steps, dt);
  for (Eigen::Index j : {0, 1}) {
    const double delta = 1e-6;
    Eigen::VectorXd hi = th, lo = th;
    hi(j) += delta;
    lo(j) -= delta;
    Trace th_hi = run_ss(m, hi, cfg, ctx, input, steps, dt);
    Trace th_lo = run_ss(m, lo, cfg, ctx, input, steps, dt);
    double scale = 1e-7;
    for (const auto& p : base.psi) scale = std::max(scale, std::abs(p(j)));
    for (int i = 0; i < steps; ++i) {
      double fd = (th_hi.y_grad[i] - th_lo.y_grad[i]) / (2.0 * delta);
      CHECK(std::abs(fd - base.psi[i](j)) < 2e-5 * scale);
    }
  }
}

TEST_CASE("output and gradient channels draw from disjoint streams") {
  WienerModelSpec m = make_example2_model();
  Eigen::VectorXd th(5);
  th << 1.2, 0.27, 1.0, 0.5, 1.7;
  PredictorConfig cfg;
  cfg.paths = 6;
  auto u = prbs(30, 3);

  Trace a = run_tf(m, th, cfg, rng::StreamContext{5, 6}, u, 0.5);
  Trace b = run_tf(m, th, cfg, rng::StreamContext{5, 99}, u, 0.5);
  Trace c = run_tf(m, th, cfg, rng::StreamContext{77, 6}, u, 0.5);

  bool psi_changed = false, y_changed = false;
  for (std::size_t i = 0; i < u.size(); ++i) {
    CHECK(a.y_bar[i] == b.y_bar[i]);  // bitwise: gradient reseed cannot leak
    CHECK(a.psi[i] == c.psi[i]);
    psi_changed |= a.psi[i] != b.psi[i];
    y_changed |= a.y_bar[i] != c.y_bar[i];
  }
  CHECK(psi_changed);
  CHECK(y_changed);

  // same context twice replays bit-identically
  Trace a2 = run_tf(m, th, cfg, rng::StreamContext{5, 6}, u, 0.5);
  for (std::size_t i = 0; i < u.size(); ++i) {
    CHECK(a.y_bar[i] == a2.y_bar[i]);
    CHECK(a.psi[i] == a2.psi[i]);
  }
}

TEST_CASE("response-only mode skips the gradient channel entirely") {
  WienerModelSpec m = make_example2_model();
  Eigen::VectorXd th(5);
  th << 1.2, 0.27, 1.0, 0.5, 1.7;
  PredictorConfig cfg;
  cfg.paths = 5;
  rng::StreamContext ctx{31, 32};
  auto u = prbs(20, 4);

  rng::Audit::enable();
  rng::Audit::reset();
  Trace lean = run_tf(m, th, cfg, ctx, u, 0.5, PredictorMode::response_only);
  std::uint64_t psi_draws = rng::Audit::draws(rng::Channel::predictor_psi);
  std::uint64_t y_draws = rng::Audit::draws(rng::Channel::predictor_y);
  rng::Audit::disable();
  CHECK(psi_draws == 0);
  CHECK(y_draws > 0);

  Trace full = run_tf(m, th, cfg, ctx, u, 0.5, PredictorMode::full);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(lean.y_bar[i] == full.y_bar[i]);
}

TEST_CASE("noise-free filter prediction equals the direct recursion") {
  WienerModelSpec m = make_example2_model();
  Eigen::VectorXd th(5);
  th << 1.2, 0.27, 1.0, 0.0, 1.7;  // dispersion off
  PredictorConfig cfg;
  cfg.paths = 3;
  rng::StreamContext ctx{41, 42};
  const double dt = 0.5;
  auto u = prbs(30, 5);

  Trace tr = run_tf(m, th, cfg, ctx, u, dt);
  DiscreteArx f = zoh_discretize(m.transfer_operator(th), dt);
  double z1 = 0.0, z2 = 0.0, u1 = 0.0, u2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double z = -f.a(0) * z1 - f.a(1) * z2 + f.b(0) * u1 + f.b(1) * u2;
    CHECK(tr.z[i] == doctest::Approx(z).epsilon(1e-12));
    CHECK(tr.y_bar[i] ==
          doctest::Approx(1.0 / (1.0 + std::pow(std::abs(z), 1.7))).epsilon(1e-12));
    z2 = z1;
    z1 = z;
    u2 = u1;
    u1 = u[i];
  }
}

TEST_CASE("state layout follows the declared model dimensions") {
  WienerModelSpec m = make_example2_model();
  Eigen::VectorXd th(5);
  th << 1.2, 0.27, 1.0, 0.5, 1.7;
  PredictorConfig cfg;
  cfg.paths = 7;
  rng::StreamContext ctx{51, 52};
  PredictorState st = init_predictor_state(m, cfg, th, ctx);
  CHECK(st.phi.size() == 4);
  REQUIRE(st.phi_grad.size() == 5);
  CHECK(st.phi_grad[0].size() == 8);  // denominator sensitivities run at doubled order
  CHECK(st.phi_grad[1].size() == 8);
  CHECK(st.phi_grad[2].size() == 4);
  CHECK(st.phi_grad[3].size() == 0);
  CHECK(st.phi_grad[4].size() == 0);
  CHECK(st.w_out.size() == 7);
  CHECK(st.w_grad_base.size() == 7);
  REQUIRE(st.w_grad_sens.size() == 7);
  CHECK(st.w_grad_sens[0].size() == 5);

  Eigen::VectorXd short_th = th.head(4);
  CHECK_THROWS_AS(init_predictor_state(m, cfg, short_th, ctx), std::invalid_argument);
  PredictorConfig bad = cfg;
  bad.paths = 0;
  CHECK_THROWS_AS(init_predictor_state(m, bad, th, ctx), std::invalid_argument);
}

TEST_CASE("data-driven regressor start fills only the input lags") {
  WienerModelSpec m = make_example2_model();
  Eigen::VectorXd th(5);
  th << 1.2, 0.27, 1.0, 0.5, 1.7;
  PredictorConfig cfg;
  cfg.paths = 2;
  cfg.regressor_init = PredictorConfig::RegressorInit::from_data;
  rng::StreamContext ctx{61, 62};

  CHECK_THROWS_AS(init_predictor_state(m, cfg, th, ctx), std::invalid_argument);
  Eigen::VectorXd head(2);
  head << 5.0, -5.0;  // u_1, u_2
  PredictorState st = init_predictor_state(m, cfg, th, ctx, &head);
  CHECK(st.phi(0) == 0.0);
  CHECK(st.phi(1) == 0.0);
  CHECK(st.phi(2) == -5.0);  // lag one at the first predicted step is u_2
  CHECK(st.phi(3) == 5.0);
  CHECK(st.phi_grad[0](4) == -5.0);
  CHECK(st.phi_grad[0](5) == 5.0);
  CHECK(st.phi_grad[0](6) == 0.0);  // beyond the recorded head
  Eigen::VectorXd wrong(3);
  wrong << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS(init_predictor_state(m, cfg, th, ctx, &wrong), std::invalid_argument);
}

TEST_CASE("stationary ensemble start") {
  WienerModelSpec m1 = make_example1_model();
  Eigen::VectorXd th(3);
  th << -1.0, 1.0, 1.0;
  PredictorConfig cfg;
  cfg.paths = 4000;
  cfg.stationary_disturbance_init = true;
  rng::StreamContext ctx{71, 72};
  PredictorState st = init_predictor_state(m1, cfg, th, ctx);
  double mean = 0.0, sq = 0.0;
  for (const auto& w : st.w_out) {
    mean += w(0);
    sq += w(0) * w(0);
  }
  mean /= cfg.paths;
  sq /= cfg.paths;
  CHECK(std::abs(mean) < 0.05);          // sigma^2/(2|a|) = 0.5
  CHECK(std::abs(sq - 0.5) < 0.04);
  CHECK(st.w_grad_base[0](0) != st.w_out[0](0));  // channels draw independently
  CHECK(st.w_grad_sens[0][0](0) == 0.0);

  // the random-walk disturbance has no stationary law
  WienerModelSpec m2 = make_example2_model();
  Eigen::VectorXd th2(5);
  th2 << 1.2, 0.27, 1.0, 0.5, 1.7;
  CHECK_THROWS_AS(init_predictor_state(m2, cfg, th2, ctx), std::invalid_argument);
}

TEST_CASE("ensemble averaging tightens with the path count") {
  WienerModelSpec m = make_example2_model();
  Eigen::VectorXd th(5);
  th << 1.2, 0.27, 1.0, 0.5, 1.7;
  auto u = prbs(60, 6);

  // variance of the terminal prediction across independent seeds shrinks
  // roughly as 1/paths
  auto spread = [&](int paths, std::uint64_t seed0) {
    PredictorConfig cfg;
    cfg.paths = paths;
    std::vector<double> vals;
    for (std::uint64_t s = 0; s < 16; ++s) {
      Trace tr = run_tf(m, th, cfg, rng::StreamContext{seed0 + 2 * s, seed0 + 2 * s + 1}, u, 0.5);
      vals.push_back(tr.y_bar.back());
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    return var / (vals.size() - 1);
  };
  double v_small = spread(2, 100);
  double v_large = spread(128, 300);
  CHECK(v_large < v_small / 5.0);
}

TEST_CASE("nonfinite measurements raise the divergence signal") {
  WienerModelSpec m = make_example2_model();
  Eigen::VectorXd th(5);
  th << 1.2, 0.27, 1.0, 0.5, 1.7;
  PredictorConfig cfg;
  cfg.paths = 2;
  rng::StreamContext ctx{81, 82};
  PredictorState st = init_predictor_state(m, cfg, th, ctx);
  StepBundle bundle = build_step_bundle(m, th, 0.5);
  Eigen::VectorXd bad = th;
  bad(0) = -40.0;  // unstable recursion blows up the regressor
  StepBundle bb = build_step_bundle(m, bad, 0.5);
  PredictorState sb = init_predictor_state(m, cfg, bad, ctx);
  bool threw = false;
  try {
    for (long k = 1; k <= 400; ++k) predictor_step(sb, m, bad, bb, k, 5.0, 0.5, ctx);
  } catch (const DivergenceError& e) {
    threw = true;
    CHECK(e.step_index() >= 1);
  }
  CHECK(threw);
  CHECK(estimating_vector(predictor_step(st, m, th, bundle, 1, 5.0, 0.5, ctx)).size() == 5);
  PredictionOutput lean =
      predictor_step(st, m, th, bundle, 2, 5.0, 0.5, ctx, PredictorMode::response_only);
  CHECK_THROWS_AS(estimating_vector(lean), std::invalid_argument);
}
