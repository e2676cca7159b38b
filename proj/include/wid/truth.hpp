#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wid/model.hpp"

namespace wid {

struct DataRecord {
  long k = 0;
  double t = 0.0;
  double u = 0.0;  // held value on [t_k, t_{k+1}) for sampled inputs, u(t_k) otherwise
  double y = 0.0;
};

struct DataSet {
  std::string scenario;
  InputSignal input;
  std::vector<DataRecord> records;
};

// First-order linear plant with squared output, multisine input, irregular
// sampling. The latent state starts at zero and is advanced exactly.
struct Example1Scenario {
  double a = -1.0;
  double b = 1.0;
  double sigma = 1.0;
  int lines = 10;          // oscillators drawn without replacement from the grid
  int grid_size = 50;      // frequency grid pi/5 * {1, ..., grid_size}
  double amplitude = 6.0;
  double dt_min = 0.5;
  double dt_max = 1.0;
  double noise_std = 0.01;
};

// Second-order plant with saturating output, PRBS input, regular sampling.
// The process disturbance is deliberately outside the model class:
//   case 1: stationary first-order filtered noise,
//   case 2: the same, scaled each sample by an independent U(0,1) draw,
//   case 3: a mixture of the filtered noise and an independent Gaussian.
// brownian_sigma > 0 replaces all of that with dw = sigma dbeta, the law the
// identification model assumes.
struct Example2Scenario {
  double a = 1.2;
  double b = 0.27;
  double c = 1.0;
  double alpha = 1.7;
  int disturbance_case = 1;
  double dt = 0.5;
  double noise_std = 0.05;
  double prbs_amplitude = 5.0;
  double filter_pole = 0.75;  // d xi = -filter_pole xi dt + filter_gain dbeta
  double filter_gain = 1.5;
  double mixture_weight = 0.8;  // case 3: probability of the filtered component
  double mixture_value = 0.5;   // case 3: spread of the alternate component
  bool mixture_value_is_variance = true;
  double brownian_sigma = 0.0;
};

DataSet gen_example1(const Example1Scenario& sc, long N, std::uint64_t seed);
DataSet gen_example2(const Example2Scenario& sc, long N, std::uint64_t seed);

// Euler-Maruyama reference for the disturbance equation on a regular grid.
// Column i holds the state at time i*dt; path_index keys the noise stream so
// independent replications can share a seed.
Eigen::MatrixXd euler_maruyama_ref(const DisturbanceSde& sde, const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& w0, double dt, long steps,
                                   std::uint64_t seed, std::uint64_t path_index = 0);

void write_dataset_csv(const std::string& path, const DataSet& data);
DataSet read_dataset_csv(const std::string& path);

}  // namespace wid
