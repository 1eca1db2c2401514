#pragma once

// Reproducible Brownian simulation.  Randomness comes from counter-based
// streams: draw i of path j under seed s is a pure function of (s, j, i), so
// paths can be generated in any order, on any number of threads, with
// bit-identical results.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mvmlab/math.hpp"

namespace mvmlab {

struct TimeGrid {
  double t0 = 0.0;
  double t_end = 1.0;
  std::size_t n_steps = 0;

  TimeGrid() = default;
  TimeGrid(double t0_, double t_end_, std::size_t n_steps_)
      : t0(t0_), t_end(t_end_), n_steps(n_steps_) {
    if (!(t_end > t0) && n_steps > 0) {
      throw std::invalid_argument("TimeGrid: t_end must exceed t0");
    }
  }

  double dt() const {
    return n_steps == 0 ? 0.0 : (t_end - t0) / static_cast<double>(n_steps);
  }
  double time(std::size_t i) const {
    if (n_steps == 0) return t0;
    return i == n_steps ? t_end : t0 + static_cast<double>(i) * dt();
  }
  std::size_t size() const { return n_steps + 1; }

  /// Index of the grid time nearest to t (clamped).
  std::size_t index_of(double t) const {
    if (t <= t0) return 0;
    if (t >= t_end) return n_steps;
    auto i = static_cast<std::size_t>(std::llround((t - t0) / dt()));
    return i > n_steps ? n_steps : i;
  }
};

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t path_id)
      : seed_(seed), path_id_(path_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t path_id() const { return path_id_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    std::uint64_t v = mix64(counter_ + mix64(path_id_ + mix64(seed_)));
    ++counter_;
    return v;
  }

  /// Uniform in (0,1].
  double next_unit() { return u64_to_unit(next_u64()); }

  /// Standard normal via Box-Muller; consumes two words per draw.
  double next_normal() {
    double u1 = next_unit();
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Independent stream derived from this one; used for conditional
  /// regeneration (branch bundles) without replaying the parent counter.
  RngStream substream(std::uint64_t tag) const {
    return RngStream(seed_, mix64(path_id_ ^ mix64(tag ^ 0xB5AD4ECEDA1CE2A9ULL)));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t path_id_;
  std::uint64_t counter_ = 0;
};

struct SamplePath {
  TimeGrid grid;
  std::vector<double> values;  // grid.n_steps + 1 entries
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;

  double at(std::size_t i) const { return values[i]; }
  double front() const { return values.front(); }
  double back() const { return values.back(); }
};

inline SamplePath simulate_brownian(const TimeGrid& grid, double start,
                                    RngStream stream) {
  SamplePath p;
  p.grid = grid;
  p.seed = stream.seed();
  p.path_id = stream.path_id();
  p.values.resize(grid.size());
  p.values[0] = start;
  const double sdt = std::sqrt(grid.dt());
  for (std::size_t i = 0; i < grid.n_steps; ++i) {
    p.values[i + 1] = p.values[i] + sdt * stream.next_normal();
  }
  return p;
}

/// Brownian path frozen once stop(t, x) first holds on the grid.  Values
/// after the stopping index repeat the stopped value; only B_{t ^ tau} is
/// meaningful downstream.  Returns the stopping index through *stop_index
/// (grid.n_steps + 1 when the predicate never fired).
inline SamplePath simulate_stopped(
    const TimeGrid& grid, double start, RngStream stream,
    const std::function<bool(double, double)>& stop,
    std::size_t* stop_index = nullptr) {
  SamplePath p;
  p.grid = grid;
  p.seed = stream.seed();
  p.path_id = stream.path_id();
  p.values.resize(grid.size());
  p.values[0] = start;
  const double sdt = std::sqrt(grid.dt());
  std::size_t tau = grid.n_steps + 1;
  for (std::size_t i = 0; i <= grid.n_steps; ++i) {
    if (i > 0) p.values[i] = p.values[i - 1] + sdt * stream.next_normal();
    if (stop(grid.time(i), p.values[i])) {
      tau = i;
      for (std::size_t j = i + 1; j <= grid.n_steps; ++j) {
        p.values[j] = p.values[i];
      }
      break;
    }
  }
  if (stop_index) *stop_index = tau;
  return p;
}

/// Cumulative sums of squared increments.
inline std::vector<double> quadratic_variation(const SamplePath& path) {
  std::vector<double> qv(path.values.size(), 0.0);
  for (std::size_t i = 1; i < path.values.size(); ++i) {
    double d = path.values[i] - path.values[i - 1];
    qv[i] = qv[i - 1] + d * d;
  }
  return qv;
}

inline std::vector<double> quadratic_variation(const std::vector<double>& xs) {
  std::vector<double> qv(xs.size(), 0.0);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    double d = xs[i] - xs[i - 1];
    qv[i] = qv[i - 1] + d * d;
  }
  return qv;
}

/// First grid index where the non-decreasing clock reaches `level`
/// (grid-snapped time change); n_steps if never reached.
inline std::size_t time_change_index(const std::vector<double>& clock,
                                     double level) {
  for (std::size_t i = 1; i < clock.size(); ++i) {
    if (clock[i] < clock[i - 1]) {
      throw std::invalid_argument("time_change: clock not non-decreasing");
    }
  }
  auto it = std::lower_bound(clock.begin(), clock.end(), level);
  if (it == clock.end()) return clock.size() - 1;
  return static_cast<std::size_t>(it - clock.begin());
}

/// Time change with sub-grid linear interpolation in clock value.
inline double time_change_time(const TimeGrid& grid,
                               const std::vector<double>& clock, double level) {
  std::size_t i = time_change_index(clock, level);
  if (i == 0 || clock[i] < level) return grid.time(i);
  double c1 = clock[i - 1], c2 = clock[i];
  if (c2 <= c1) return grid.time(i);
  double w = (level - c1) / (c2 - c1);
  return grid.time(i - 1) + w * (grid.time(i) - grid.time(i - 1));
}

}  // namespace mvmlab
