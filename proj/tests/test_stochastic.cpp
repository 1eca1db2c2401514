#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mvmlab/math.hpp"
#include "mvmlab/stochastic.hpp"

using namespace mvmlab;

TEST_CASE("trivial paths and grids", "[stochastic]") {
  TimeGrid g0(0.0, 0.0, 0);
  auto p = simulate_brownian(g0, 0.7, RngStream(1, 0));
  REQUIRE(p.values.size() == 1);
  CHECK(p.values[0] == 0.7);

  TimeGrid g(0.0, 1.0, 10);
  CHECK(g.dt() == Catch::Approx(0.1));
  CHECK(g.time(0) == 0.0);
  CHECK(g.time(10) == 1.0);
  CHECK(g.index_of(0.31) == 3);
  CHECK_THROWS_AS(TimeGrid(1.0, 0.0, 4), std::invalid_argument);
}

TEST_CASE("reproducibility of streams and paths", "[stochastic]") {
  TimeGrid g(0.0, 1.0, 256);
  auto a = simulate_brownian(g, 0.0, RngStream(42, 17));
  auto b = simulate_brownian(g, 0.0, RngStream(42, 17));
  CHECK(a.values == b.values);  // bit-identical

  auto c = simulate_brownian(g, 0.0, RngStream(42, 18));
  CHECK(a.values != c.values);

  // Draw order does not matter: the stream is a pure function of counter.
  RngStream s1(9, 4), s2(9, 4);
  (void)s1.next_u64();
  CHECK(s1.next_u64() != s2.next_u64());  // different counters
  RngStream s3(9, 4);
  (void)s3.next_u64();
  RngStream s4(9, 4);
  (void)s4.next_u64();
  CHECK(s3.next_u64() == s4.next_u64());

  // Substreams are decoupled from the parent counter.
  auto sub = RngStream(9, 4).substream(1);
  auto sub2 = RngStream(9, 4).substream(2);
  CHECK(sub.next_u64() != sub2.next_u64());
}

TEST_CASE("Brownian moments", "[stochastic][mc]") {
  const std::size_t n_paths = 100000;
  TimeGrid g(0.0, 1.0, 4);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    auto p = simulate_brownian(g, 0.0, RngStream(7, i));
    sum += p.back();
    sum2 += p.back() * p.back();
  }
  double mean = sum / n_paths;
  double var = sum2 / n_paths - mean * mean;
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(1.0 / n_paths));
  CHECK(std::abs(var - 1.0) <= 0.02);
}

TEST_CASE("quadratic variation", "[stochastic]") {
  TimeGrid g(0.0, 1.0, 10000);
  SamplePath flat;
  flat.grid = g;
  flat.values.assign(g.size(), 2.5);
  auto qv0 = quadratic_variation(flat);
  CHECK(qv0.front() == 0.0);
  CHECK(qv0.back() == 0.0);

  auto p = simulate_brownian(g, 0.0, RngStream(123, 0));
  auto qv = quadratic_variation(p);
  CHECK(std::abs(qv.back() - 1.0) <= 0.05);

  SamplePath scaled = p;
  for (auto& v : scaled.values) v *= 2.0;
  auto qv4 = quadratic_variation(scaled);
  CHECK(std::abs(qv4.back() - 4.0) <= 0.2);
}

TEST_CASE("time change", "[stochastic]") {
  TimeGrid g(0.0, 1.0, 1000);
  std::vector<double> clock(g.size());
  for (std::size_t i = 0; i < clock.size(); ++i) clock[i] = g.time(i);
  CHECK(std::abs(g.time(time_change_index(clock, 0.3)) - 0.3) <= g.dt());
  CHECK(time_change_index(clock, 0.0) == 0);

  // First time 4s >= 1 for the clock of 2B is 0.25 in expectation.
  const std::size_t n_paths = 200;
  double acc = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    auto p = simulate_brownian(g, 0.0, RngStream(55, i));
    for (auto& v : p.values) v *= 2.0;
    auto qv = quadratic_variation(p);
    acc += time_change_time(g, qv, 1.0);
  }
  CHECK(acc / n_paths == Catch::Approx(0.25).margin(0.02));

  // Monotone in level and inverse-consistent.
  auto p = simulate_brownian(g, 0.0, RngStream(56, 3));
  auto qv = quadratic_variation(p);
  std::size_t prev = 0;
  for (double level : {0.0, 0.1, 0.3, 0.6, 0.9}) {
    std::size_t i = time_change_index(qv, level);
    CHECK(i >= prev);
    if (qv.back() >= level) CHECK(qv[i] >= level);
    prev = i;
  }

  std::vector<double> bad = {0.0, 0.5, 0.2};
  CHECK_THROWS_AS(time_change_index(bad, 0.4), std::invalid_argument);
}

TEST_CASE("stopped simulation freezes at the stop", "[stochastic]") {
  TimeGrid g(0.0, 4.0, 4096);
  std::size_t tau = 0;
  auto p = simulate_stopped(
      g, 0.0, RngStream(3, 1),
      [](double, double x) { return std::abs(x) >= 1.0; }, &tau);
  REQUIRE(tau <= g.n_steps);
  CHECK(std::abs(p.values[tau]) >= 1.0);
  for (std::size_t i = tau; i <= g.n_steps; ++i) {
    CHECK(p.values[i] == p.values[tau]);
  }
  for (std::size_t i = 0; i < tau; ++i) {
    CHECK(std::abs(p.values[i]) < 1.0);
  }
}
