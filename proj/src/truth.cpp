#include "wid/truth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wid/discretize.hpp"
#include "wid/rng.hpp"

namespace wid {

namespace {

using rng::Channel;
using rng::NormalStream;
using rng::UniformStream;

// substream labels within the truth channel
constexpr std::uint64_t kSubState = 0;    // latent/disturbance noise
constexpr std::uint64_t kSubMeas = 1;     // measurement noise
constexpr std::uint64_t kSubSetup = 2;    // one-off design draws (frequencies, PRBS seed)
constexpr std::uint64_t kSubScale = 3;    // case-2 amplitude draws
constexpr std::uint64_t kSubMix = 4;      // case-3 component choice
constexpr std::uint64_t kSubAlt = 5;      // case-3 alternate component
constexpr std::uint64_t kSubInterval = 6; // irregular sampling intervals
constexpr std::uint64_t kSubRef = 7;      // reference integrator

double lfsr16_chip(std::uint16_t& s) {
  // maximal-length taps 16, 15, 13, 4
  unsigned bit = ((s >> 15) ^ (s >> 14) ^ (s >> 12) ^ (s >> 3)) & 1u;
  s = static_cast<std::uint16_t>((s << 1) | bit);
  return bit ? 1.0 : -1.0;
}

}  // namespace

DataSet gen_example1(const Example1Scenario& sc, long N, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("gen_example1: at least one sample required");
  if (sc.lines < 1 || sc.lines > sc.grid_size)
    throw std::invalid_argument("gen_example1: line count must fit in the frequency grid");
  if (!(sc.dt_min > 0.0 && sc.dt_max >= sc.dt_min))
    throw std::invalid_argument("gen_example1: bad sampling-interval range");

  // draw distinct grid lines, sort, then phase each to flatten the crest
  UniformStream setup(seed, Channel::truth, 0, kSubSetup);
  std::vector<int> pool(sc.grid_size);
  std::iota(pool.begin(), pool.end(), 1);
  for (int i = 0; i < sc.lines; ++i) {
    auto j = i + static_cast<int>(setup.next() * (sc.grid_size - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> lines(pool.begin(), pool.begin() + sc.lines);
  std::sort(lines.begin(), lines.end());
  Eigen::VectorXd amps = Eigen::VectorXd::Constant(sc.lines, sc.amplitude);
  Eigen::VectorXd freqs(sc.lines), phases(sc.lines);
  for (int l = 0; l < sc.lines; ++l) {
    freqs(l) = M_PI / 5.0 * lines[l];
    phases(l) = (l + 1) * l * M_PI / sc.lines;
  }

  DataSet out;
  out.scenario = "example1";
  out.input = InputSignal::multisine(amps, freqs, phases);

  Eigen::MatrixXd A(1, 1), Bu(1, 1), Bn(1, 1);
  A << sc.a;
  Bu << sc.b;
  Bn << sc.sigma;

  double t = 0.0;
  double x = 0.0;
  out.records.reserve(N);
  for (long k = 1; k <= N; ++k) {
    double dt = sc.dt_min +
                (sc.dt_max - sc.dt_min) * UniformStream(seed, Channel::truth, k, kSubInterval).next();
    ExoStep step = exo_discretize(A, Bu, Bn, out.input, t, dt);
    double xi = NormalStream(seed, Channel::truth, k, kSubState).next();
    x = step.A(0, 0) * x + step.g(0) + step.B(0, 0) * xi;
    t += dt;
    double v = NormalStream(seed, Channel::truth, k, kSubMeas).next();
    out.records.push_back({k, t, out.input.value_at(t), x * x + sc.noise_std * v});
  }
  return out;
}

DataSet gen_example2(const Example2Scenario& sc, long N, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("gen_example2: at least one sample required");
  if (sc.disturbance_case < 1 || sc.disturbance_case > 3)
    throw std::invalid_argument("gen_example2: disturbance case must be 1, 2 or 3");
  if (!(sc.dt > 0.0)) throw std::invalid_argument("gen_example2: positive interval required");

  // PRBS chips, one per interval, held on [t_k, t_{k+1}); zero before t_1
  UniformStream setup(seed, Channel::truth, 0, kSubSetup);
  auto s = static_cast<std::uint16_t>(setup.next_u64() & 0xFFFF);
  if (s == 0) s = 0xACE1;
  std::vector<double> times(N), chips(N);
  for (long k = 1; k <= N; ++k) {
    times[k - 1] = k * sc.dt;
    chips[k - 1] = sc.prbs_amplitude * lfsr16_chip(s);
  }

  DataSet out;
  out.scenario = "example2_case" + std::to_string(sc.disturbance_case);
  if (sc.brownian_sigma > 0.0) out.scenario = "example2_brownian";
  out.input = InputSignal::piecewise(times, chips);

  TransferOperator op;
  op.num = Eigen::VectorXd::Constant(1, sc.c);
  op.den = Eigen::VectorXd(2);
  op.den << sc.b, sc.a;
  DiscreteArx arx = zoh_discretize(op, sc.dt);

  // disturbance driver: exact one-step map of the stationary filter
  Eigen::MatrixXd Af(1, 1), Bf(1, 1);
  Af << -sc.filter_pole;
  Bf << sc.filter_gain;
  auto [Ad, Qd] = van_loan_cov(Af, Bf, sc.dt);
  const double xi_step_a = Ad(0, 0);
  const double xi_step_b = std::sqrt(Qd(0, 0));
  const double xi_stat = sc.filter_gain / std::sqrt(2.0 * sc.filter_pole);
  double xi = xi_stat * NormalStream(seed, Channel::truth, 0, kSubState).next();
  const double alt_std =
      sc.mixture_value_is_variance ? std::sqrt(sc.mixture_value) : sc.mixture_value;

  double z1 = 0.0, z2 = 0.0, u1 = 0.0, u2 = 0.0;  // filter lags, input zero before t_1
  out.records.reserve(N);
  for (long k = 1; k <= N; ++k) {
    double z = -arx.a(0) * z1 - arx.a(1) * z2 + arx.b(0) * u1 + arx.b(1) * u2;
    z2 = z1;
    z1 = z;
    u2 = u1;
    u1 = chips[k - 1];

    double w;
    if (sc.brownian_sigma > 0.0) {
      // model-consistent disturbance: per-sample one-interval law, matching the
      // re-anchored paths the predictor uses for a driftless disturbance
      w = sc.brownian_sigma * std::sqrt(sc.dt) *
          NormalStream(seed, Channel::truth, k, kSubState).next();
    } else {
      xi = xi_step_a * xi + xi_step_b * NormalStream(seed, Channel::truth, k, kSubState).next();
      switch (sc.disturbance_case) {
        case 1:
          w = xi;
          break;
        case 2:
          w = xi * UniformStream(seed, Channel::truth, k, kSubScale).next();
          break;
        default:
          w = UniformStream(seed, Channel::truth, k, kSubMix).next() < sc.mixture_weight
                  ? xi
                  : alt_std * NormalStream(seed, Channel::truth, k, kSubAlt).next();
      }
    }

    double x = z + w;
    double f = 1.0 / (1.0 + std::pow(std::abs(x), sc.alpha));
    double v = NormalStream(seed, Channel::truth, k, kSubMeas).next();
    out.records.push_back({k, times[k - 1], chips[k - 1], f + sc.noise_std * v});
  }
  return out;
}

Eigen::MatrixXd euler_maruyama_ref(const DisturbanceSde& sde, const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& w0, double dt, long steps,
                                   std::uint64_t seed, std::uint64_t path_index) {
  if (!(dt > 0.0) || steps < 1)
    throw std::invalid_argument("euler_maruyama_ref: positive grid required");
  Eigen::MatrixXd A = sde.drift(theta);
  Eigen::MatrixXd B = sde.dispersion(theta);
  if (w0.size() != sde.state_dim)
    throw std::invalid_argument("euler_maruyama_ref: initial state dimension mismatch");
  Eigen::MatrixXd path(sde.state_dim, steps + 1);
  path.col(0) = w0;
  NormalStream noise(seed, Channel::truth, path_index, kSubRef);
  const double root_dt = std::sqrt(dt);
  if (sde.state_dim == 1 && sde.noise_dim == 1) {
    const double a = A(0, 0), b = B(0, 0);
    double w = w0(0);
    for (long i = 1; i <= steps; ++i) {
      w += a * w * dt + b * root_dt * noise.next();
      path(0, i) = w;
    }
    return path;
  }
  Eigen::VectorXd w = w0;
  for (long i = 1; i <= steps; ++i) {
    w += A * w * dt + root_dt * (B * noise.vector(sde.noise_dim));
    path.col(i) = w;
  }
  return path;
}

namespace {

std::string join_csv(const Eigen::VectorXd& v) {
  std::ostringstream os;
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v(i));
    if (i) os << ',';
    os << buf;
  }
  return os.str();
}

std::vector<double> split_csv(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

}  // namespace

void write_dataset_csv(const std::string& path, const DataSet& data) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_dataset_csv: cannot open " + path);
  f << "# scenario=" << data.scenario << "\n";
  if (data.input.kind == InputSignal::Kind::exosystem) {
    f << "# input_kind=exosystem\n";
    f << "# amplitudes=" << join_csv(data.input.amplitudes) << "\n";
    f << "# frequencies=" << join_csv(data.input.frequencies) << "\n";
    f << "# phases=" << join_csv(data.input.phases) << "\n";
  } else {
    f << "# input_kind=piecewise\n";
  }
  f << "k,t_k,u_k,y_k\n";
  char buf[128];
  for (const auto& r : data.records) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g\n", r.k, r.t, r.u, r.y);
    f << buf;
  }
  if (!f) throw std::runtime_error("write_dataset_csv: write failed for " + path);
}

DataSet read_dataset_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_dataset_csv: cannot open " + path);
  DataSet out;
  std::string kind = "piecewise";
  std::vector<double> amps, freqs, phases;
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(2, eq - 2);
      std::string val = line.substr(eq + 1);
      if (key == "scenario")
        out.scenario = val;
      else if (key == "input_kind")
        kind = val;
      else if (key == "amplitudes")
        amps = split_csv(val);
      else if (key == "frequencies")
        freqs = split_csv(val);
      else if (key == "phases")
        phases = split_csv(val);
      continue;
    }
    if (!header_seen) {
      if (line.rfind("k,", 0) != 0)
        throw std::runtime_error("read_dataset_csv: missing column header in " + path);
      header_seen = true;
      continue;
    }
    auto vals = split_csv(line);
    if (vals.size() != 4)
      throw std::runtime_error("read_dataset_csv: malformed row in " + path);
    out.records.push_back(
        {static_cast<long>(std::llround(vals[0])), vals[1], vals[2], vals[3]});
  }
  if (kind == "exosystem") {
    auto to_vec = [](const std::vector<double>& v) {
      return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()).eval();
    };
    out.input = InputSignal::multisine(to_vec(amps), to_vec(freqs), to_vec(phases));
  } else {
    std::vector<double> times, samples;
    times.reserve(out.records.size());
    for (const auto& r : out.records) {
      times.push_back(r.t);
      samples.push_back(r.u);
    }
    out.input = InputSignal::piecewise(times, samples);
  }
  return out;
}

}  // namespace wid
