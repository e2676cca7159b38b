#include "wid/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "wid/discretize.hpp"
#include "wid/rng.hpp"

namespace wid {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const char* section,
                         std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw std::invalid_argument(std::string("config: section ") + section + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument(std::string("config: unknown key \"") + item.key() +
                                  "\" in section " + section);
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_of(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile of empty set");
  std::sort(v.begin(), v.end());
  double pos = p * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[lo + 1] - v[lo]) * frac;
}

std::string scenario_name(const ExperimentConfig& cfg) {
  if (cfg.example == 1) return "example1";
  std::string name = cfg.truth2.brownian_sigma > 0.0
                         ? "example2_brownian"
                         : "example2_case" + std::to_string(cfg.truth2.disturbance_case);
  if (cfg.baseline) name += "_baseline";
  return name;
}

Eigen::VectorXd draw_theta0(const WienerModelSpec& model, const ExperimentConfig& cfg,
                            std::uint64_t run_seed) {
  const Eigen::Index d = model.dim();
  if (cfg.init.kind == InitPolicy::Kind::fixed) {
    if (cfg.init.theta0.size() != d)
      throw std::invalid_argument("config: init.theta0 length does not match the model");
    if (!model.constraint.contains(cfg.init.theta0))
      throw std::invalid_argument("config: init.theta0 violates the model constraints");
    return cfg.init.theta0;
  }
  Eigen::VectorXd ref =
      cfg.init.reference.size() > 0 ? cfg.init.reference : init_reference(cfg);
  if (ref.size() != d)
    throw std::invalid_argument("config: init.reference length does not match the model");
  const double s = cfg.init.spread;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    rng::UniformStream us(run_seed, rng::Channel::init, attempt, 0);
    Eigen::VectorXd theta(d);
    for (Eigen::Index j = 0; j < d; ++j) theta(j) = ref(j) * (1.0 - s + 2.0 * s * us.next());
    if (model.constraint.contains(theta)) return theta;
  }
  throw std::runtime_error("init: no feasible start found near the reference point");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema_version != 1) throw std::invalid_argument("config: unsupported schema_version");
  if (example != 1 && example != 2)
    throw std::invalid_argument("config: example must be 1 or 2");
  if (baseline && example != 2)
    throw std::invalid_argument("config: the baseline variant exists only for example 2");
  if (samples < 1) throw std::invalid_argument("config: samples must be positive");
  if (replications < 1) throw std::invalid_argument("config: replications must be positive");
  if (paths < 1) throw std::invalid_argument("config: paths must be positive");
  if (!(window_fraction > 0.0 && window_fraction <= 1.0))
    throw std::invalid_argument("config: window_fraction must lie in (0, 1]");
  if (!(init.spread >= 0.0 && init.spread < 1.0))
    throw std::invalid_argument("config: init.spread must lie in [0, 1)");
  EstimatorConfig e = estimator;
  e.constraint = ConstraintSet{[](const Eigen::VectorXd&) { return true; }, "unrestricted"};
  e.validate();
  predictor.validate();
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg;
  reject_unknown_keys(j, "top level",
                      {"schema_version", "experiment", "estimator", "predictor", "init", "truth"});
  if (!j.contains("schema_version"))
    throw std::invalid_argument("config: schema_version is required");
  cfg.schema_version = j.at("schema_version").get<int>();
  if (cfg.schema_version != 1) throw std::invalid_argument("config: unsupported schema_version");

  if (j.contains("experiment")) {
    const json& e = j.at("experiment");
    reject_unknown_keys(e, "experiment",
                        {"example", "baseline", "disturbance_case", "samples", "replications",
                         "base_seed", "paths", "window_fraction"});
    maybe(e, "example", cfg.example);
    maybe(e, "baseline", cfg.baseline);
    maybe(e, "samples", cfg.samples);
    maybe(e, "replications", cfg.replications);
    maybe(e, "base_seed", cfg.base_seed);
    maybe(e, "paths", cfg.paths);
    maybe(e, "window_fraction", cfg.window_fraction);
    maybe(e, "disturbance_case", cfg.truth2.disturbance_case);
  }
  if (j.contains("estimator")) {
    const json& e = j.at("estimator");
    reject_unknown_keys(e, "estimator",
                        {"gain_scale", "gain_exponent", "r0_scale", "theta_norm_max",
                         "cond_limit", "on_divergence"});
    maybe(e, "gain_scale", cfg.estimator.gain_scale);
    maybe(e, "gain_exponent", cfg.estimator.gain_exponent);
    maybe(e, "r0_scale", cfg.estimator.r0_scale);
    maybe(e, "theta_norm_max", cfg.estimator.theta_norm_max);
    maybe(e, "cond_limit", cfg.estimator.cond_limit);
    if (e.contains("on_divergence")) {
      auto v = e.at("on_divergence").get<std::string>();
      if (v == "abort")
        cfg.estimator.on_divergence = EstimatorConfig::DivergencePolicy::abort;
      else if (v == "reset")
        cfg.estimator.on_divergence = EstimatorConfig::DivergencePolicy::reset;
      else
        throw std::invalid_argument("config: on_divergence must be \"abort\" or \"reset\"");
    }
  }
  if (j.contains("predictor")) {
    const json& p = j.at("predictor");
    reject_unknown_keys(p, "predictor", {"regressor_init", "stationary_disturbance_init"});
    if (p.contains("regressor_init")) {
      auto v = p.at("regressor_init").get<std::string>();
      if (v == "zeros")
        cfg.predictor.regressor_init = PredictorConfig::RegressorInit::zeros;
      else if (v == "from_data")
        cfg.predictor.regressor_init = PredictorConfig::RegressorInit::from_data;
      else
        throw std::invalid_argument("config: regressor_init must be \"zeros\" or \"from_data\"");
    }
    maybe(p, "stationary_disturbance_init", cfg.predictor.stationary_disturbance_init);
  }
  if (j.contains("init")) {
    const json& i = j.at("init");
    reject_unknown_keys(i, "init", {"policy", "theta0", "reference", "spread"});
    if (i.contains("policy")) {
      auto v = i.at("policy").get<std::string>();
      if (v == "fixed")
        cfg.init.kind = InitPolicy::Kind::fixed;
      else if (v == "uniform")
        cfg.init.kind = InitPolicy::Kind::uniform;
      else
        throw std::invalid_argument("config: init.policy must be \"fixed\" or \"uniform\"");
    }
    if (i.contains("theta0")) cfg.init.theta0 = to_eigen(i.at("theta0").get<std::vector<double>>());
    if (i.contains("reference"))
      cfg.init.reference = to_eigen(i.at("reference").get<std::vector<double>>());
    maybe(i, "spread", cfg.init.spread);
    if (cfg.init.kind == InitPolicy::Kind::fixed && cfg.init.theta0.size() == 0)
      throw std::invalid_argument("config: init.policy \"fixed\" requires init.theta0");
  }
  if (j.contains("truth")) {
    const json& t = j.at("truth");
    if (cfg.example == 1) {
      reject_unknown_keys(t, "truth",
                          {"a", "b", "sigma", "lines", "grid_size", "amplitude", "dt_min",
                           "dt_max", "noise_std"});
      maybe(t, "a", cfg.truth1.a);
      maybe(t, "b", cfg.truth1.b);
      maybe(t, "sigma", cfg.truth1.sigma);
      maybe(t, "lines", cfg.truth1.lines);
      maybe(t, "grid_size", cfg.truth1.grid_size);
      maybe(t, "amplitude", cfg.truth1.amplitude);
      maybe(t, "dt_min", cfg.truth1.dt_min);
      maybe(t, "dt_max", cfg.truth1.dt_max);
      maybe(t, "noise_std", cfg.truth1.noise_std);
    } else {
      reject_unknown_keys(t, "truth",
                          {"a", "b", "c", "alpha", "dt", "noise_std", "prbs_amplitude",
                           "filter_pole", "filter_gain", "mixture_weight", "mixture_value",
                           "mixture_value_is_variance", "brownian_sigma"});
      maybe(t, "a", cfg.truth2.a);
      maybe(t, "b", cfg.truth2.b);
      maybe(t, "c", cfg.truth2.c);
      maybe(t, "alpha", cfg.truth2.alpha);
      maybe(t, "dt", cfg.truth2.dt);
      maybe(t, "noise_std", cfg.truth2.noise_std);
      maybe(t, "prbs_amplitude", cfg.truth2.prbs_amplitude);
      maybe(t, "filter_pole", cfg.truth2.filter_pole);
      maybe(t, "filter_gain", cfg.truth2.filter_gain);
      maybe(t, "mixture_weight", cfg.truth2.mixture_weight);
      maybe(t, "mixture_value", cfg.truth2.mixture_value);
      maybe(t, "mixture_value_is_variance", cfg.truth2.mixture_value_is_variance);
      maybe(t, "brownian_sigma", cfg.truth2.brownian_sigma);
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string config_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["experiment"] = {{"example", cfg.example},
                     {"baseline", cfg.baseline},
                     {"samples", cfg.samples},
                     {"replications", cfg.replications},
                     {"base_seed", cfg.base_seed},
                     {"paths", cfg.paths},
                     {"window_fraction", cfg.window_fraction}};
  if (cfg.example == 2) j["experiment"]["disturbance_case"] = cfg.truth2.disturbance_case;
  j["estimator"] = {
      {"gain_scale", cfg.estimator.gain_scale},
      {"gain_exponent", cfg.estimator.gain_exponent},
      {"r0_scale", cfg.estimator.r0_scale},
      {"theta_norm_max", cfg.estimator.theta_norm_max},
      {"cond_limit", cfg.estimator.cond_limit},
      {"on_divergence",
       cfg.estimator.on_divergence == EstimatorConfig::DivergencePolicy::abort ? "abort"
                                                                               : "reset"}};
  j["predictor"] = {
      {"regressor_init",
       cfg.predictor.regressor_init == PredictorConfig::RegressorInit::zeros ? "zeros"
                                                                             : "from_data"},
      {"stationary_disturbance_init", cfg.predictor.stationary_disturbance_init}};
  j["init"] = {{"policy", cfg.init.kind == InitPolicy::Kind::fixed ? "fixed" : "uniform"},
               {"spread", cfg.init.spread}};
  if (cfg.init.theta0.size() > 0) j["init"]["theta0"] = to_std(cfg.init.theta0);
  if (cfg.init.reference.size() > 0) j["init"]["reference"] = to_std(cfg.init.reference);
  if (cfg.example == 1) {
    j["truth"] = {{"a", cfg.truth1.a},
                  {"b", cfg.truth1.b},
                  {"sigma", cfg.truth1.sigma},
                  {"lines", cfg.truth1.lines},
                  {"grid_size", cfg.truth1.grid_size},
                  {"amplitude", cfg.truth1.amplitude},
                  {"dt_min", cfg.truth1.dt_min},
                  {"dt_max", cfg.truth1.dt_max},
                  {"noise_std", cfg.truth1.noise_std}};
  } else {
    j["truth"] = {{"a", cfg.truth2.a},
                  {"b", cfg.truth2.b},
                  {"c", cfg.truth2.c},
                  {"alpha", cfg.truth2.alpha},
                  {"dt", cfg.truth2.dt},
                  {"noise_std", cfg.truth2.noise_std},
                  {"prbs_amplitude", cfg.truth2.prbs_amplitude},
                  {"filter_pole", cfg.truth2.filter_pole},
                  {"filter_gain", cfg.truth2.filter_gain},
                  {"mixture_weight", cfg.truth2.mixture_weight},
                  {"mixture_value", cfg.truth2.mixture_value},
                  {"mixture_value_is_variance", cfg.truth2.mixture_value_is_variance},
                  {"brownian_sigma", cfg.truth2.brownian_sigma}};
  }
  return j.dump(2) + "\n";
}

WienerModelSpec model_for(const ExperimentConfig& cfg) {
  if (cfg.example == 1) return make_example1_model();
  return cfg.baseline ? make_example2_baseline_model() : make_example2_model();
}

DataSet dataset_for(const ExperimentConfig& cfg, int replication) {
  std::uint64_t run_seed = rng::derive_run_seed(cfg.base_seed, replication);
  if (cfg.example == 1) return gen_example1(cfg.truth1, cfg.samples, run_seed);
  return gen_example2(cfg.truth2, cfg.samples, run_seed);
}

Eigen::VectorXd init_reference(const ExperimentConfig& cfg) {
  if (cfg.example == 1) {
    Eigen::VectorXd r(3);
    r << cfg.truth1.a, cfg.truth1.b, cfg.truth1.sigma;
    return r;
  }
  const double sigma_ref =
      cfg.truth2.brownian_sigma > 0.0
          ? cfg.truth2.brownian_sigma
          : cfg.truth2.filter_gain / std::sqrt(2.0 * cfg.truth2.filter_pole);
  if (cfg.baseline) {
    Eigen::VectorXd r(4);
    r << cfg.truth2.a, cfg.truth2.b, cfg.truth2.c, cfg.truth2.alpha;
    return r;
  }
  Eigen::VectorXd r(5);
  r << cfg.truth2.a, cfg.truth2.b, cfg.truth2.c, sigma_ref, cfg.truth2.alpha;
  return r;
}

WindowStats window_stats(const Eigen::MatrixXd& trajectory, double fraction) {
  const Eigen::Index rows = trajectory.rows();
  if (!(fraction > 0.0 && fraction <= 1.0) || rows < 1)
    throw std::invalid_argument("window_stats: empty trailing window");
  const auto w = static_cast<Eigen::Index>(
      std::ceil(fraction * static_cast<double>(rows)));
  const Eigen::Index start = rows - w;
  const Eigen::Index d = trajectory.cols();
  WindowStats out;
  out.mean.resize(d);
  out.std_dev.resize(d);
  out.median.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::VectorXd col = trajectory.col(j).segment(start, w);
    double m = col.mean();
    out.mean(j) = m;
    out.std_dev(j) =
        w > 1 ? std::sqrt((col.array() - m).square().sum() / static_cast<double>(w - 1)) : 0.0;
    out.median(j) = median_of(std::vector<double>(col.data(), col.data() + w));
  }
  return out;
}

bool convergence_flag(const WindowStats& w) {
  for (Eigen::Index j = 0; j < w.mean.size(); ++j)
    if (!(w.std_dev(j) < std::max(0.05 * std::abs(w.mean(j)), 0.02))) return false;
  return true;
}

RunReport run_single(const WienerModelSpec& model, const DataSet& data,
                     const ExperimentConfig& cfg, int replication,
                     const StepObserver& observer) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const auto N = static_cast<Eigen::Index>(data.records.size());
  const Eigen::Index d = model.dim();
  if (N < 1) throw std::invalid_argument("run_single: empty dataset");

  const std::uint64_t run_seed = rng::derive_run_seed(cfg.base_seed, replication);
  const rng::StreamContext ctx = rng::StreamContext::for_run(run_seed);

  EstimatorConfig ecfg = cfg.estimator;
  ecfg.constraint = model.constraint;
  PredictorConfig pcfg = cfg.predictor;
  pcfg.paths = cfg.paths;

  const bool tf = model.plant_kind == PlantKind::transfer_function;
  const bool from_data = pcfg.regressor_init == PredictorConfig::RegressorInit::from_data;
  if (from_data && !tf)
    throw std::invalid_argument("run_single: from_data applies to the regressor form only");

  RunReport rep;
  rep.replication = replication;
  rep.run_seed = run_seed;
  rep.theta0 = draw_theta0(model, cfg, run_seed);
  rep.trajectory.resize(N, d);
  rep.eps = Eigen::VectorXd::Zero(N);
  rep.times.resize(N);
  rep.projection_hits = Eigen::VectorXi::Zero(N);
  for (Eigen::Index i = 0; i < N; ++i) rep.times(i) = data.records[i].t;

  Eigen::Index n_lags = 0;
  Eigen::VectorXd head_u;
  if (tf) {
    n_lags = model.transfer_operator(rep.theta0).den_order();
    if (from_data) {
      if (N <= n_lags) throw std::invalid_argument("run_single: dataset shorter than the lag depth");
      head_u.resize(n_lags);
      for (Eigen::Index i = 0; i < n_lags; ++i) head_u(i) = data.records[i].u;
    }
  }
  const Eigen::Index start = from_data ? n_lags : 0;  // first predicted record, 0-based
  rep.first_update = start + 1;
  for (Eigen::Index i = 0; i < start; ++i) rep.trajectory.row(i) = rep.theta0.transpose();

  EstimatorSnapshot est = init_estimator(rep.theta0, ecfg);
  PredictorState st =
      init_predictor_state(model, pcfg, rep.theta0, ctx, head_u.size() ? &head_u : nullptr);
  StepCache cache;

  double t_prev = start > 0 ? data.records[start - 1].t : 0.0;
  for (Eigen::Index i = start; i < N; ++i) {
    const DataRecord& r = data.records[i];
    const double dt = r.t - t_prev;
    bool aborted = false;
    try {
      auto bundle = cache.get(model, est.theta, dt, &data.input);
      PredictionOutput out = predictor_step(st, model, est.theta, *bundle, r.k, r.u, r.y, ctx,
                                            PredictorMode::full, t_prev, &data.input);
      est = newton_update(est, out.psi_bar, out.eps, ecfg);
      rep.eps(i) = out.eps;
      if (observer) observer(r.k, out, est);
    } catch (const DivergenceError& e) {
      if (ecfg.on_divergence == EstimatorConfig::DivergencePolicy::abort) {
        rep.diverged = true;
        rep.divergence_step = e.step_index();
        aborted = true;
      } else {
        // Restart the estimator from scratch at the current data position: a
        // reset that kept the decayed gain could never pull the iterate back.
        ++rep.resets;
        est = init_estimator(rep.theta0, ecfg);
        st = init_predictor_state(model, pcfg, rep.theta0, ctx, head_u.size() ? &head_u : nullptr);
      }
    }
    if (aborted) {
      for (Eigen::Index f = i; f < N; ++f) rep.trajectory.row(f) = est.theta.transpose();
      break;
    }
    rep.trajectory.row(i) = est.theta.transpose();
    rep.projection_hits(i) = est.projection_hit ? 1 : 0;
    t_prev = r.t;
  }

  WindowStats w = window_stats(rep.trajectory, cfg.window_fraction);
  rep.window_mean = w.mean;
  rep.window_std = w.std_dev;
  rep.window_median = w.median;
  rep.converged = !rep.diverged && convergence_flag(w);
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rep;
}

std::vector<RunReport> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::future<RunReport>> futures;
  futures.reserve(cfg.replications);
  for (int r = 0; r < cfg.replications; ++r)
    futures.push_back(std::async(std::launch::async, [cfg, r] {
      WienerModelSpec model = model_for(cfg);
      DataSet data = dataset_for(cfg, r);
      return run_single(model, data, cfg, r);
    }));
  std::vector<RunReport> reports;
  reports.reserve(cfg.replications);
  for (auto& f : futures) reports.push_back(f.get());
  return reports;
}

double offline_cost(const WienerModelSpec& model, const Eigen::VectorXd& theta,
                    const DataSet& data, int paths, std::uint64_t seed,
                    const PredictorConfig& pcfg) {
  if (!model.constraint.contains(theta))
    throw std::invalid_argument("offline_cost: parameters violate the model constraints");
  if (data.records.empty()) throw std::invalid_argument("offline_cost: empty dataset");
  PredictorConfig p = pcfg;
  p.paths = paths;
  const rng::StreamContext ctx = rng::StreamContext::for_run(seed);
  const bool tf = model.plant_kind == PlantKind::transfer_function;
  const bool from_data = p.regressor_init == PredictorConfig::RegressorInit::from_data;

  Eigen::VectorXd head_u;
  Eigen::Index start = 0;
  if (tf && from_data) {
    const Eigen::Index n = model.transfer_operator(theta).den_order();
    const auto N = static_cast<Eigen::Index>(data.records.size());
    if (N <= n) throw std::invalid_argument("offline_cost: dataset shorter than the lag depth");
    head_u.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) head_u(i) = data.records[i].u;
    start = n;
  }
  PredictorState st =
      init_predictor_state(model, p, theta, ctx, head_u.size() ? &head_u : nullptr);
  StepCache cache;
  double t_prev = start > 0 ? data.records[start - 1].t : 0.0;
  double acc = 0.0;
  long count = 0;
  for (std::size_t i = start; i < data.records.size(); ++i) {
    const DataRecord& r = data.records[i];
    auto bundle = cache.get(model, theta, r.t - t_prev, &data.input);
    PredictionOutput out = predictor_step(st, model, theta, *bundle, r.k, r.u, r.y, ctx,
                                          PredictorMode::response_only, t_prev, &data.input);
    acc += 0.5 * out.eps * out.eps;
    ++count;
    t_prev = r.t;
  }
  return acc / static_cast<double>(count);
}

namespace {

json run_json(const WienerModelSpec& model, const RunReport& r) {
  json j;
  j["replication"] = r.replication;
  j["run_seed"] = r.run_seed;
  j["parameter_names"] = model.parameter_names;
  j["theta0"] = to_std(r.theta0);
  j["final"] = to_std(r.final_theta());
  j["window_mean"] = to_std(r.window_mean);
  j["window_std"] = to_std(r.window_std);
  j["window_median"] = to_std(r.window_median);
  j["first_update"] = r.first_update;
  j["converged"] = r.converged;
  j["diverged"] = r.diverged;
  if (r.diverged) j["divergence_step"] = r.divergence_step;
  j["resets"] = r.resets;
  j["projection_hit_count"] = r.projection_hits.sum();
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace

std::string summary_json(const ExperimentConfig& cfg, const std::vector<RunReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("summary_json: no reports");
  WienerModelSpec model = model_for(cfg);
  const Eigen::Index d = model.dim();
  json j;
  j["schema_version"] = 1;
  j["scenario"] = scenario_name(cfg);
  j["model"] = model.name;
  j["parameter_names"] = model.parameter_names;
  j["samples"] = cfg.samples;
  j["replications"] = cfg.replications;
  j["paths"] = cfg.paths;
  j["base_seed"] = cfg.base_seed;
  j["window_fraction"] = cfg.window_fraction;
  j["runs"] = json::array();
  for (const auto& r : reports) j["runs"].push_back(run_json(model, r));

  json agg;
  std::vector<double> med(d), q25(d), q75(d), abs_med(d), wmed(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    std::vector<double> fin, wm;
    for (const auto& r : reports) {
      fin.push_back(r.final_theta()(c));
      wm.push_back(r.window_median(c));
    }
    med[c] = median_of(fin);
    q25[c] = quantile_of(fin, 0.25);
    q75[c] = quantile_of(fin, 0.75);
    std::vector<double> fa = fin;
    for (auto& v : fa) v = std::abs(v);
    abs_med[c] = median_of(fa);
    wmed[c] = median_of(wm);
  }
  agg["final_median"] = med;
  agg["final_q25"] = q25;
  agg["final_q75"] = q75;
  agg["final_abs_median"] = abs_med;
  agg["window_median_median"] = wmed;
  int conv = 0, div = 0, resets = 0;
  for (const auto& r : reports) {
    conv += r.converged ? 1 : 0;
    div += r.diverged ? 1 : 0;
    resets += r.resets;
  }
  agg["converged_runs"] = conv;
  agg["diverged_runs"] = div;
  agg["total_resets"] = resets;
  j["aggregate"] = agg;
  return j.dump(2) + "\n";
}

void write_trajectory_csv(const std::string& path, const RunReport& report) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
  const Eigen::Index d = report.trajectory.cols();
  f << "k,t,eps,proj_hit";
  for (Eigen::Index c = 0; c < d; ++c) f << ",theta_" << (c + 1);
  f << "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < report.trajectory.rows(); ++i) {
    f << (i + 1);
    std::snprintf(buf, sizeof(buf), ",%.15g", report.times(i));
    f << buf;
    std::snprintf(buf, sizeof(buf), ",%.15g", report.eps(i));
    f << buf;
    f << ',' << report.projection_hits(i);
    for (Eigen::Index c = 0; c < d; ++c) {
      std::snprintf(buf, sizeof(buf), ",%.15g", report.trajectory(i, c));
      f << buf;
    }
    f << "\n";
  }
  if (!f) throw std::runtime_error("write_trajectory_csv: write failed for " + path);
}

void write_run_artifacts(const std::string& dir, const ExperimentConfig& cfg,
                         const std::vector<RunReport>& reports) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream cf(fs::path(dir) / "effective_config.json");
  if (!cf) throw std::runtime_error("write_run_artifacts: cannot write config echo");
  cf << config_json(cfg);
  WienerModelSpec model = model_for(cfg);
  for (const auto& r : reports) {
    write_trajectory_csv((fs::path(dir) / ("trajectory_" + std::to_string(r.replication) + ".csv"))
                             .string(),
                         r);
    std::ofstream rf(fs::path(dir) / ("run_" + std::to_string(r.replication) + ".json"));
    if (!rf) throw std::runtime_error("write_run_artifacts: cannot write run metadata");
    rf << run_json(model, r).dump(2) << "\n";
  }
  std::ofstream sf(fs::path(dir) / "summary.json");
  if (!sf) throw std::runtime_error("write_run_artifacts: cannot write summary");
  sf << summary_json(cfg, reports);
}

}  // namespace wid
