#pragma once

#include <atomic>
#include <cstdint>

#include <Eigen/Core>

// Counter-based random streams. Every draw site derives its stream from
// (seed, channel, step k, substream m), so replaying a run touches exactly
// the same variates regardless of execution order or thread count, and the
// truth generator can never collide with the predictor's channels.
namespace wid::rng {

enum class Channel : std::uint64_t {
  truth = 1,
  predictor_y = 2,
  predictor_psi = 3,
  init = 4,
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b);
std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t replication);

// Per-channel draw counters, enabled only by tests that audit stream usage.
class Audit {
 public:
  static void enable();
  static void disable();
  static void reset();
  static std::uint64_t draws(Channel ch);

 private:
  friend class NormalStream;
  friend class UniformStream;
  static void record(Channel ch);
  static std::atomic<bool> enabled_;
  static std::atomic<std::uint64_t> counts_[5];
};

// Stream of iid U[0,1) doubles at a fixed (seed, channel, k, m) key.
class UniformStream {
 public:
  UniformStream(std::uint64_t seed, Channel ch, std::uint64_t k, std::uint64_t m = 0);
  double next();
  std::uint64_t next_u64();

 private:
  std::uint64_t state_;
  Channel channel_;
};

// Stream of iid N(0,1) doubles (Box-Muller over the uniform stream).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, Channel ch, std::uint64_t k, std::uint64_t m = 0);
  double next();
  Eigen::VectorXd vector(Eigen::Index n);

 private:
  UniformStream uniforms_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Seeds for the two predictor channels of one run. Tests override one seed
// at a time to verify that y-predictions and gradients use disjoint streams.
struct StreamContext {
  std::uint64_t seed_y = 0;
  std::uint64_t seed_psi = 0;

  static StreamContext for_run(std::uint64_t run_seed);
  NormalStream y_stream(std::uint64_t k, std::uint64_t m) const;
  NormalStream psi_stream(std::uint64_t k, std::uint64_t m) const;
};

}  // namespace wid::rng
