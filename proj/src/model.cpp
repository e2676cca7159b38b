#include "wid/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace wid {

void ParameterVector::validate() const {
  if (tf_dim < 0 || sde_dim < 0 || nl_dim < 0 || tf_dim + sde_dim + nl_dim != values.size())
    throw std::invalid_argument("parameter blocks do not sum to the vector dimension");
  if (!values.allFinite()) throw std::invalid_argument("parameter vector has nonfinite entries");
}

void TransferOperator::validate() const {
  if (num.size() < 1 || den.size() < 1)
    throw std::invalid_argument("transfer operator needs at least one coefficient per side");
  if (num_order() >= den_order())
    throw std::invalid_argument("transfer operator must be strictly proper");
  if (!num.allFinite() || !den.allFinite())
    throw std::invalid_argument("transfer operator has nonfinite coefficients");
}

bool stability_check(const TransferOperator& op) {
  const Eigen::Index n = op.den_order();
  if (n < 1) throw std::invalid_argument("stability_check needs denominator order >= 1");
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) companion(i, i + 1) = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) companion(n - 1, j) = -op.den[j];
  const auto roots = companion.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i)
    if (roots[i].real() >= -1e-12) return false;
  return true;
}

double InputSignal::value_at(double t) const {
  if (kind == Kind::exosystem) {
    double u = 0.0;
    for (Eigen::Index l = 0; l < amplitudes.size(); ++l)
      u += amplitudes[l] * std::cos(frequencies[l] * t + phases[l]);
    return u;
  }
  // hold value for the unique interval [t_i, t_{i+1}) containing t; zero
  // before the first sample time
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  return samples[static_cast<std::size_t>(it - times.begin()) - 1];
}

InputSignal InputSignal::piecewise(std::vector<double> times, std::vector<double> samples) {
  if (times.size() != samples.size())
    throw std::invalid_argument("piecewise input needs matching time/sample counts");
  if (!std::is_sorted(times.begin(), times.end()))
    throw std::invalid_argument("piecewise input times must be increasing");
  InputSignal s;
  s.kind = Kind::piecewise_constant;
  s.times = std::move(times);
  s.samples = std::move(samples);
  return s;
}

InputSignal InputSignal::multisine(Eigen::VectorXd amplitudes, Eigen::VectorXd frequencies,
                                   Eigen::VectorXd phases) {
  if (amplitudes.size() != frequencies.size() || amplitudes.size() != phases.size())
    throw std::invalid_argument("multisine needs equal-length amplitude/frequency/phase lists");
  InputSignal s;
  s.kind = Kind::exosystem;
  s.amplitudes = std::move(amplitudes);
  s.frequencies = std::move(frequencies);
  s.phases = std::move(phases);
  return s;
}

ParameterVector WienerModelSpec::parameter_vector(Eigen::VectorXd values) const {
  ParameterVector p{std::move(values), tf_dim, sde_dim, nl_dim};
  p.validate();
  return p;
}

namespace {

Eigen::MatrixXd scalar_mat(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return m;
}

Eigen::RowVectorXd scalar_row(double v) {
  Eigen::RowVectorXd r(1);
  r[0] = v;
  return r;
}

// Hill function 1/(1+|x|^alpha) and its partials; alpha > 1 keeps both
// derivatives continuous through x = 0.
double hill(double x, double alpha) { return 1.0 / (1.0 + std::pow(std::abs(x), alpha)); }

double hill_dx(double x, double alpha) {
  if (x == 0.0) return 0.0;
  const double ax = std::abs(x);
  const double den = 1.0 + std::pow(ax, alpha);
  return -alpha * std::pow(ax, alpha - 1.0) * (x > 0 ? 1.0 : -1.0) / (den * den);
}

double hill_dalpha(double x, double alpha) {
  if (x == 0.0) return 0.0;
  const double ax = std::abs(x);
  const double den = 1.0 + std::pow(ax, alpha);
  return -std::pow(ax, alpha) * std::log(ax) / (den * den);
}

}  // namespace

WienerModelSpec make_example1_model() {
  WienerModelSpec m;
  m.name = "example1";
  m.parameter_names = {"a", "b", "sigma"};
  m.tf_dim = 2;
  m.sde_dim = 1;
  m.nl_dim = 0;
  m.constraint = {
      [](const Eigen::VectorXd& th) { return th.size() == 3 && th.allFinite() && th[0] < 0.0; },
      "a < 0"};

  m.plant_kind = PlantKind::state_space;
  m.plant.state_dim = 1;
  m.plant.drift = [](const Eigen::VectorXd& th) { return scalar_mat(th[0]); };
  m.plant.input_gain = [](const Eigen::VectorXd& th) {
    return Eigen::VectorXd::Constant(1, th[1]);
  };
  m.plant.output = [](const Eigen::VectorXd&) { return scalar_row(1.0); };
  m.plant.drift_jac = [](const Eigen::VectorXd&, Eigen::Index j) {
    return scalar_mat(j == 0 ? 1.0 : 0.0);
  };
  m.plant.input_gain_jac = [](const Eigen::VectorXd&, Eigen::Index j) {
    return Eigen::VectorXd::Constant(1, j == 1 ? 1.0 : 0.0);
  };
  m.plant.output_jac = [](const Eigen::VectorXd&, Eigen::Index) { return scalar_row(0.0); };

  m.disturbance.state_dim = 1;
  m.disturbance.noise_dim = 1;
  m.disturbance.drift = [](const Eigen::VectorXd& th) { return scalar_mat(th[0]); };
  m.disturbance.dispersion = [](const Eigen::VectorXd& th) { return scalar_mat(th[2]); };
  m.disturbance.output = [](const Eigen::VectorXd&) { return scalar_row(1.0); };
  m.disturbance.drift_jac = [](const Eigen::VectorXd&, Eigen::Index j) {
    return scalar_mat(j == 0 ? 1.0 : 0.0);
  };
  m.disturbance.dispersion_jac = [](const Eigen::VectorXd&, Eigen::Index j) {
    return scalar_mat(j == 2 ? 1.0 : 0.0);
  };
  m.disturbance.output_jac = [](const Eigen::VectorXd&, Eigen::Index) { return scalar_row(0.0); };

  m.output_fn.value = [](double x, const Eigen::VectorXd&) { return x * x; };
  m.output_fn.dvalue_dx = [](double x, const Eigen::VectorXd&) { return 2.0 * x; };
  m.output_fn.dvalue_dtheta = [](double, const Eigen::VectorXd&) { return Eigen::VectorXd(0); };
  return m;
}

namespace {

WienerModelSpec example2_common(bool with_sigma) {
  WienerModelSpec m;
  m.tf_dim = 3;
  m.sde_dim = with_sigma ? 1 : 0;
  m.nl_dim = 1;
  const Eigen::Index dim = m.dim();
  const Eigen::Index alpha_ix = dim - 1;

  m.constraint = {[dim, alpha_ix](const Eigen::VectorXd& th) {
                    if (th.size() != dim || !th.allFinite()) return false;
                    if (th[alpha_ix] <= 1.0) return false;
                    TransferOperator op;
                    op.num = Eigen::VectorXd::Constant(1, th[2]);
                    op.den = th.head(2).reverse();
                    return stability_check(op);
                  },
                  "p^2 + a p + b Hurwitz and alpha > 1"};

  m.plant_kind = PlantKind::transfer_function;
  m.transfer_operator = [](const Eigen::VectorXd& th) {
    TransferOperator op;
    op.num = Eigen::VectorXd::Constant(1, th[2]);  // c_0 = c
    op.den = Eigen::VectorXd(2);
    op.den[0] = th[1];  // d_0 = b
    op.den[1] = th[0];  // d_1 = a
    return op;
  };
  m.tf_coeff_index = [](Eigen::Index j) -> std::optional<Eigen::Index> {
    switch (j) {
      case 0: return 2;  // a = d_1
      case 1: return 1;  // b = d_0
      case 2: return 0;  // c = c_0
      default: return std::nullopt;
    }
  };

  m.disturbance.state_dim = 1;
  m.disturbance.noise_dim = 1;
  m.disturbance.reset_each_interval = true;  // pure Brownian: no stationary accumulated law
  m.disturbance.drift = [](const Eigen::VectorXd&) { return scalar_mat(0.0); };
  if (with_sigma) {
    m.disturbance.dispersion = [](const Eigen::VectorXd& th) { return scalar_mat(th[3]); };
    m.disturbance.dispersion_jac = [](const Eigen::VectorXd&, Eigen::Index j) {
      return scalar_mat(j == 3 ? 1.0 : 0.0);
    };
  } else {
    m.disturbance.dispersion = [](const Eigen::VectorXd&) { return scalar_mat(0.0); };
    m.disturbance.dispersion_jac = [](const Eigen::VectorXd&, Eigen::Index) {
      return scalar_mat(0.0);
    };
  }
  m.disturbance.output = [](const Eigen::VectorXd&) { return scalar_row(1.0); };
  m.disturbance.drift_jac = [](const Eigen::VectorXd&, Eigen::Index) { return scalar_mat(0.0); };
  m.disturbance.output_jac = [](const Eigen::VectorXd&, Eigen::Index) { return scalar_row(0.0); };

  m.output_fn.value = [](double x, const Eigen::VectorXd& nl) { return hill(x, nl[0]); };
  m.output_fn.dvalue_dx = [](double x, const Eigen::VectorXd& nl) { return hill_dx(x, nl[0]); };
  m.output_fn.dvalue_dtheta = [](double x, const Eigen::VectorXd& nl) {
    return Eigen::VectorXd::Constant(1, hill_dalpha(x, nl[0]));
  };
  return m;
}

}  // namespace

WienerModelSpec make_example2_model() {
  WienerModelSpec m = example2_common(true);
  m.name = "example2";
  m.parameter_names = {"a", "b", "c", "sigma", "alpha"};
  return m;
}

WienerModelSpec make_example2_baseline_model() {
  WienerModelSpec m = example2_common(false);
  m.name = "example2_baseline";
  m.parameter_names = {"a", "b", "c", "alpha"};
  return m;
}

}  // namespace wid
