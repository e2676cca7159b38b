#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wid/harness.hpp"
#include "wid/rng.hpp"

namespace fs = std::filesystem;
using wid::rng::derive_run_seed;

namespace {

Eigen::VectorXd parse_theta_list(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
  if (vals.empty()) throw std::invalid_argument("--theta: at least one value required");
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
}

wid::RunReport read_trajectory(const std::string& path, int replication) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("k,t,eps,proj_hit", 0) != 0)
    throw std::invalid_argument("unexpected trajectory header in " + path);
  int d = 0;
  for (char c : line)
    if (c == ',') ++d;
  d -= 3;
  if (d < 1) throw std::invalid_argument("no parameter columns in " + path);

  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (static_cast<int>(vals.size()) != d + 4)
      throw std::invalid_argument("malformed trajectory row in " + path);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::invalid_argument("empty trajectory in " + path);

  wid::RunReport rep;
  rep.replication = replication;
  const auto n = static_cast<Eigen::Index>(rows.size());
  rep.trajectory.resize(n, d);
  rep.eps.resize(n);
  rep.times.resize(n);
  rep.projection_hits.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rep.times(i) = rows[i][1];
    rep.eps(i) = rows[i][2];
    rep.projection_hits(i) = static_cast<int>(rows[i][3]);
    for (int c = 0; c < d; ++c) rep.trajectory(i, c) = rows[i][4 + c];
  }
  return rep;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed, std::optional<int> replications, bool baseline) {
  wid::ExperimentConfig cfg = wid::load_config(config_path);
  if (seed) cfg.base_seed = *seed;
  if (replications) cfg.replications = *replications;
  if (baseline) cfg.baseline = true;
  cfg.validate();
  auto reports = wid::run_experiment(cfg);
  wid::write_run_artifacts(out_dir, cfg, reports);
  int diverged = 0;
  for (const auto& r : reports) diverged += r.diverged ? 1 : 0;
  std::cout << wid::summary_json(cfg, reports);
  if (diverged > 0) {
    std::cerr << diverged << " of " << reports.size()
              << " replications diverged; partial outputs written to " << out_dir << "\n";
    return 3;
  }
  return 0;
}

int cmd_summarize(const std::string& in_dir, std::optional<double> window) {
  wid::ExperimentConfig cfg = wid::load_config((fs::path(in_dir) / "effective_config.json").string());
  if (window) cfg.window_fraction = *window;
  std::vector<wid::RunReport> reports;
  for (int r = 0;; ++r) {
    fs::path tp = fs::path(in_dir) / ("trajectory_" + std::to_string(r) + ".csv");
    if (!fs::exists(tp)) break;
    wid::RunReport rep = read_trajectory(tp.string(), r);
    fs::path mp = fs::path(in_dir) / ("run_" + std::to_string(r) + ".json");
    if (fs::exists(mp)) {
      std::ifstream mf(mp);
      nlohmann::json m = nlohmann::json::parse(mf);
      rep.run_seed = m.value("run_seed", std::uint64_t{0});
      rep.diverged = m.value("diverged", false);
      rep.divergence_step = m.value("divergence_step", 0L);
      rep.resets = m.value("resets", 0);
      rep.first_update = m.value("first_update", 1L);
      if (m.contains("theta0")) {
        auto v = m.at("theta0").get<std::vector<double>>();
        rep.theta0 = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
      }
    }
    wid::WindowStats w = wid::window_stats(rep.trajectory, cfg.window_fraction);
    rep.window_mean = w.mean;
    rep.window_std = w.std_dev;
    rep.window_median = w.median;
    rep.converged = !rep.diverged && wid::convergence_flag(w);
    reports.push_back(std::move(rep));
  }
  if (reports.empty())
    throw std::invalid_argument("no trajectory files found in " + in_dir);
  std::cout << wid::summary_json(cfg, reports);
  return 0;
}

int cmd_oracle_cost(const std::string& config_path, const std::string& theta_csv,
                    std::optional<int> paths, std::optional<std::uint64_t> seed,
                    int replication) {
  wid::ExperimentConfig cfg = wid::load_config(config_path);
  Eigen::VectorXd theta = parse_theta_list(theta_csv);
  wid::WienerModelSpec model = wid::model_for(cfg);
  wid::DataSet data = wid::dataset_for(cfg, replication);
  std::uint64_t s = seed ? *seed : derive_run_seed(cfg.base_seed, replication);
  double cost = wid::offline_cost(model, theta, data, paths ? *paths : cfg.paths, s,
                                  cfg.predictor);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.15g\n", cost);
  std::cout << buf;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recursive identification of stochastic Wiener models"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir, theta_csv;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications, paths;
  std::optional<double> window;
  int replication = 0;
  bool baseline = false;

  CLI::App* run = app.add_subcommand("run", "run an experiment and write its artifacts");
  run->add_option("--config", config_path, "experiment configuration (JSON)")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--seed", seed, "override the base seed");
  run->add_option("--replications", replications, "override the replication count");
  run->add_flag("--baseline", baseline, "use the disturbance-free model variant");

  CLI::App* summ = app.add_subcommand("summarize", "recompute the summary for a run directory");
  summ->add_option("--in", in_dir, "directory written by run")->required();
  summ->add_option("--window", window, "trailing-window fraction override");

  CLI::App* oracle = app.add_subcommand("oracle", "reference computations");
  oracle->require_subcommand(1);
  CLI::App* cost = oracle->add_subcommand("cost", "offline prediction cost at fixed parameters");
  cost->add_option("--config", config_path, "experiment configuration (JSON)")->required();
  cost->add_option("--theta", theta_csv, "comma-separated parameter values")->required();
  cost->add_option("--paths", paths, "override the path count");
  cost->add_option("--seed", seed, "override the stream seed");
  cost->add_option("--replication", replication, "dataset replication index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed, replications, baseline);
    if (summ->parsed()) return cmd_summarize(in_dir, window);
    if (oracle->parsed()) return cmd_oracle_cost(config_path, theta_csv, paths, seed, replication);
  } catch (const wid::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
