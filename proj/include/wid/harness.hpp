#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wid/estimator.hpp"
#include "wid/model.hpp"
#include "wid/predictor.hpp"
#include "wid/truth.hpp"

namespace wid {

struct InitPolicy {
  enum class Kind { fixed, uniform } kind = Kind::uniform;
  Eigen::VectorXd theta0;     // fixed: the starting point, must satisfy the constraints
  Eigen::VectorXd reference;  // uniform: centre; empty means scenario truth
  double spread = 0.5;        // uniform: relative half-width per component
};

struct ExperimentConfig {
  int schema_version = 1;
  int example = 2;
  bool baseline = false;
  long samples = 5000;
  int replications = 1;
  std::uint64_t base_seed = 1;
  int paths = 100;
  double window_fraction = 0.1;
  EstimatorConfig estimator;  // constraint is filled in from the model at run time
  PredictorConfig predictor;
  InitPolicy init;
  Example1Scenario truth1;
  Example2Scenario truth2;

  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_json(const ExperimentConfig& cfg);

WienerModelSpec model_for(const ExperimentConfig& cfg);
DataSet dataset_for(const ExperimentConfig& cfg, int replication);
// uniform-policy centre: scenario truth values for the selected model
Eigen::VectorXd init_reference(const ExperimentConfig& cfg);

struct RunReport {
  int replication = 0;
  std::uint64_t run_seed = 0;
  Eigen::VectorXd theta0;
  Eigen::MatrixXd trajectory;  // one row per record
  Eigen::VectorXd eps;
  Eigen::VectorXd times;
  Eigen::VectorXi projection_hits;
  long first_update = 1;  // record index of the first parameter update
  Eigen::VectorXd window_mean, window_std, window_median;
  bool converged = false;
  bool diverged = false;
  long divergence_step = 0;
  int resets = 0;
  double wall_seconds = 0.0;

  Eigen::VectorXd final_theta() const { return trajectory.row(trajectory.rows() - 1); }
};

using StepObserver =
    std::function<void(long k, const PredictionOutput&, const EstimatorSnapshot&)>;

RunReport run_single(const WienerModelSpec& model, const DataSet& data,
                     const ExperimentConfig& cfg, int replication,
                     const StepObserver& observer = nullptr);

// All replications, independent streams, fanned out with std::async.
// Observers are a per-run facility; use run_single for instrumentation.
std::vector<RunReport> run_experiment(const ExperimentConfig& cfg);

// Mean half-squared residual of the frozen-parameter predictor over the
// records; theta must satisfy the model constraints.
double offline_cost(const WienerModelSpec& model, const Eigen::VectorXd& theta,
                    const DataSet& data, int paths, std::uint64_t seed,
                    const PredictorConfig& pcfg = {});

// trailing-window statistics over the last ceil(fraction * rows) rows
struct WindowStats {
  Eigen::VectorXd mean, std_dev, median;
};
WindowStats window_stats(const Eigen::MatrixXd& trajectory, double fraction);
bool convergence_flag(const WindowStats& w);

std::string summary_json(const ExperimentConfig& cfg, const std::vector<RunReport>& reports);
void write_run_artifacts(const std::string& dir, const ExperimentConfig& cfg,
                         const std::vector<RunReport>& reports);
void write_trajectory_csv(const std::string& path, const RunReport& report);

}  // namespace wid
