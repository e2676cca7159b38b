#include "wid/rng.hpp"

#include <cmath>
#include <numbers>

namespace wid::rng {
namespace {

// splitmix64 step (Vigna); good enough as a keyed counter generator.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s = h ^ b;
  return splitmix64(s);
}

std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t replication) {
  return mix(base_seed, 0x72756E00ULL + replication);
}

std::atomic<bool> Audit::enabled_{false};
std::atomic<std::uint64_t> Audit::counts_[5] = {};

void Audit::enable() { enabled_.store(true); }
void Audit::disable() { enabled_.store(false); }
void Audit::reset() {
  for (auto& c : counts_) c.store(0);
}
std::uint64_t Audit::draws(Channel ch) { return counts_[static_cast<std::size_t>(ch)].load(); }
void Audit::record(Channel ch) {
  if (enabled_.load(std::memory_order_relaxed))
    counts_[static_cast<std::size_t>(ch)].fetch_add(1, std::memory_order_relaxed);
}

UniformStream::UniformStream(std::uint64_t seed, Channel ch, std::uint64_t k, std::uint64_t m)
    : state_(mix(mix(mix(seed, static_cast<std::uint64_t>(ch)), k), m)), channel_(ch) {}

std::uint64_t UniformStream::next_u64() {
  Audit::record(channel_);
  return splitmix64(state_);
}

double UniformStream::next() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

NormalStream::NormalStream(std::uint64_t seed, Channel ch, std::uint64_t k, std::uint64_t m)
    : uniforms_(seed, ch, k, m) {}

double NormalStream::next() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so the log is finite.
  const double u1 = static_cast<double>((uniforms_.next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniforms_.next();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  have_spare_ = true;
  return r * std::cos(phi);
}

Eigen::VectorXd NormalStream::vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = next();
  return v;
}

StreamContext StreamContext::for_run(std::uint64_t run_seed) {
  StreamContext ctx;
  ctx.seed_y = mix(run_seed, 0x79ULL);
  ctx.seed_psi = mix(run_seed, 0x707369ULL);
  return ctx;
}

NormalStream StreamContext::y_stream(std::uint64_t k, std::uint64_t m) const {
  return NormalStream(seed_y, Channel::predictor_y, k, m);
}

NormalStream StreamContext::psi_stream(std::uint64_t k, std::uint64_t m) const {
  return NormalStream(seed_psi, Channel::predictor_psi, k, m);
}

}  // namespace wid::rng
