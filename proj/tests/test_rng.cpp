#include <cmath>
#include <set>

#include <doctest.h>

#include "wid/rng.hpp"

using namespace wid::rng;

TEST_CASE("uniform streams replay exactly and stay in [0,1)") {
  UniformStream a(42, Channel::truth, 7, 3);
  UniformStream b(42, Channel::truth, 7, 3);
  for (int i = 0; i < 100; ++i) {
    double va = a.next();
    CHECK(va == b.next());
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
}

TEST_CASE("distinct keys give distinct streams") {
  std::set<std::uint64_t> first;
  for (std::uint64_t k = 0; k < 50; ++k)
    first.insert(UniformStream(1, Channel::truth, k, 0).next_u64());
  for (std::uint64_t m = 0; m < 50; ++m)
    first.insert(UniformStream(1, Channel::truth, 0, m + 100).next_u64());
  first.insert(UniformStream(1, Channel::predictor_y, 0, 0).next_u64());
  first.insert(UniformStream(1, Channel::predictor_psi, 0, 0).next_u64());
  first.insert(UniformStream(2, Channel::truth, 0, 0).next_u64());
  CHECK(first.size() == 103);
}

TEST_CASE("uniform moments") {
  UniformStream s(7, Channel::init, 0, 0);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double v = s.next();
    sum += v;
    sq += v * v;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("normal moments and replay") {
  NormalStream s(11, Channel::predictor_y, 3, 5);
  NormalStream r(11, Channel::predictor_y, 3, 5);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double v = s.next();
    if (i < 50) CHECK(v == r.next());
    sum += v;
    sq += v * v;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("normal vector equals sequential draws") {
  NormalStream a(5, Channel::predictor_psi, 9, 2);
  NormalStream b(5, Channel::predictor_psi, 9, 2);
  Eigen::VectorXd v = a.vector(5);
  for (int i = 0; i < 5; ++i) CHECK(v(i) == b.next());
}

TEST_CASE("run seeds are replication specific") {
  std::set<std::uint64_t> seeds;
  for (int r = 0; r < 100; ++r) seeds.insert(derive_run_seed(99, r));
  CHECK(seeds.size() == 100);
}

TEST_CASE("stream context splits prediction channels") {
  StreamContext ctx = StreamContext::for_run(123);
  CHECK(ctx.seed_y != ctx.seed_psi);
  CHECK(ctx.y_stream(4, 2).next() == ctx.y_stream(4, 2).next());
  CHECK(ctx.y_stream(4, 2).next() != ctx.psi_stream(4, 2).next());
}

TEST_CASE("audit counts draws per channel") {
  Audit::reset();
  Audit::enable();
  UniformStream u(1, Channel::truth, 0, 0);
  u.next();
  u.next();
  NormalStream g(1, Channel::init, 0, 0);
  g.next();
  CHECK(Audit::draws(Channel::truth) == 2);
  CHECK(Audit::draws(Channel::init) >= 1);
  CHECK(Audit::draws(Channel::predictor_y) == 0);
  Audit::disable();
  u.next();
  CHECK(Audit::draws(Channel::truth) == 2);
  Audit::reset();
  CHECK(Audit::draws(Channel::truth) == 0);
}
