#pragma once

// Speed of an MVM, estimated by partition sums of squared W_1 increments
// over a dyadic mesh ladder; the quadratic variation of the mean process for
// comparison; rho-speed through a monotone change of the state space; the
// coin-flip example separating the two; and the second optimality objective.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvmlab/math.hpp"
#include "mvmlab/measure.hpp"
#include "mvmlab/mvm.hpp"
#include "mvmlab/parallel.hpp"
#include "mvmlab/stochastic.hpp"

namespace mvmlab {

/// Monotone re-parameterization of the state space; typically the
/// right-continuous inverse of a scale function kappa.
class RhoMap {
 public:
  explicit RhoMap(ScaleFunction f) : f_(std::move(f)) {}

  static RhoMap identity() { return RhoMap(ScaleFunction::identity()); }

  /// Right-continuous inverse rho(y) = inf{x : kappa(x) > y}; flat stretches
  /// of kappa collapse to their right endpoint.
  static RhoMap inverse_of(const ScaleFunction& kappa) {
    if (kappa.is_identity()) return identity();
    const auto& xs = kappa.xs();
    const auto& ys = kappa.ys();
    std::vector<double> ix, iy;
    ix.reserve(xs.size());
    iy.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!ix.empty() && ys[i] == ix.back()) {
        iy.back() = xs[i];  // keep the rightmost preimage
      } else {
        ix.push_back(ys[i]);
        iy.push_back(xs[i]);
      }
    }
    if (ix.size() < 2) {
      throw std::invalid_argument("RhoMap: kappa is constant");
    }
    return RhoMap(ScaleFunction(std::move(ix), std::move(iy)));
  }

  double operator()(double y) const { return f_(y); }
  const ScaleFunction& table() const { return f_; }
  bool is_identity() const { return f_.is_identity(); }

 private:
  ScaleFunction f_;
};

struct SpeedEstimate {
  std::vector<std::size_t> strides;           // coarse to fine, in grid cells
  std::vector<double> mesh_dts;
  std::vector<std::vector<double>> cumulative;  // [mesh][grid time]
  std::vector<double> mean_qv;                  // finest-grid QV of the means
  std::vector<double> value;  // min over the ladder: the liminf proxy

  double total() const { return value.back(); }
  double total_at_mesh(std::size_t k) const { return cumulative[k].back(); }
};

inline std::vector<std::size_t> default_mesh_ladder() {
  return {16, 8, 4, 2, 1};
}

/// Partition estimator: for each mesh, the running sum of W_1^2 between
/// consecutive partition points; the pointwise minimum over the ladder is
/// reported as the liminf proxy.
inline SpeedEstimate estimate_speed(const MvmSeries& series,
                                    std::vector<std::size_t> strides =
                                        default_mesh_ladder()) {
  if (strides.empty()) throw std::invalid_argument("estimate_speed: no meshes");
  std::sort(strides.begin(), strides.end(), std::greater<>());
  const std::size_t n = series.grid.n_steps;
  for (std::size_t s : strides) {
    if (s == 0 || s > n) {
      throw std::invalid_argument(
          "estimate_speed: mesh finer than the series grid");
    }
  }
  SpeedEstimate out;
  out.strides = strides;
  out.mean_qv = quadratic_variation(series.means);
  for (std::size_t s : strides) {
    out.mesh_dts.push_back(static_cast<double>(s) * series.grid.dt());
    std::vector<double> cum(n + 1, 0.0);
    double acc = 0.0;
    std::size_t prev = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      if (i % s == 0) {
        double w = wasserstein_1(series.measures[i], series.measures[prev]);
        acc += w * w;
        prev = i;
      }
      cum[i] = acc;
    }
    out.cumulative.push_back(std::move(cum));
  }
  out.value.assign(n + 1, 0.0);
  for (std::size_t i = 0; i <= n; ++i) {
    double v = out.cumulative[0][i];
    for (std::size_t k = 1; k < out.cumulative.size(); ++k) {
      v = std::min(v, out.cumulative[k][i]);
    }
    out.value[i] = v;
  }
  return out;
}

/// Quadratic variation of the mean process of a series.
inline std::vector<double> mean_qv(const MvmSeries& series) {
  return quadratic_variation(series.means);
}

/// Speed of the pushforward MVM rho_# xi.
inline SpeedEstimate rho_speed(const MvmSeries& series, const RhoMap& rho,
                               std::vector<std::size_t> strides =
                                   default_mesh_ladder()) {
  if (rho.is_identity()) return estimate_speed(series, std::move(strides));
  return estimate_speed(pushforward_series(series, rho.table()),
                        std::move(strides));
}

/// Total finest-mesh speed, optionally through rho: the [xi]^rho_infty
/// estimate used by the second objective.
inline double speed_total(const MvmSeries& series,
                          const RhoMap* rho = nullptr) {
  double acc = 0.0;
  if (rho == nullptr || rho->is_identity()) {
    for (std::size_t i = 1; i < series.measures.size(); ++i) {
      double w = wasserstein_1(series.measures[i], series.measures[i - 1]);
      acc += w * w;
    }
    return acc;
  }
  const ScaleFunction& f = rho->table();
  QuantileMeasure prev =
      pushforward(series.measures[0], [&](double x) { return f(x); });
  for (std::size_t i = 1; i < series.measures.size(); ++i) {
    QuantileMeasure cur =
        pushforward(series.measures[i], [&](double x) { return f(x); });
    double w = wasserstein_1(cur, prev);
    acc += w * w;
    prev = std::move(cur);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Coin-flip example
// ---------------------------------------------------------------------------

/// Positive-coin jump target: the uniform law on [-1, -1/sqrt(2)] u
/// [0, 1/sqrt(2)] (density one on a union of total length one).  Its mirror
/// serves the negative coin.  Both have mean zero and average back to
/// U[-1,1], so the flip preserves the MVM property exactly.
inline QuantileMeasure coinflip_outcome(bool positive, std::size_t m) {
  const double s0 = 1.0 - 1.0 / kSqrt2;
  std::vector<double> v(m);
  for (std::size_t k = 0; k < m; ++k) {
    double q = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
    if (positive) {
      v[k] = q <= s0 ? -1.0 + q : q - s0;
    } else {
      v[k] = q <= 1.0 / kSqrt2 ? -1.0 / kSqrt2 + q : q;
    }
  }
  return QuantileMeasure(std::move(v));
}

/// MVM that sits at U[-1,1] until the driving Brownian motion first reaches
/// +-eps, then jumps to the coin outcome and holds it: zero mean quadratic
/// variation but strictly positive speed.
inline MvmSeries coinflip_mvm_series(double eps, const TimeGrid& grid,
                                     RngStream stream, std::size_t m) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("coinflip_mvm_series: eps must be in (0,1)");
  }
  SamplePath path = simulate_brownian(grid, 0.0, stream);
  MvmSeries out;
  out.grid = grid;
  QuantileMeasure pre = QuantileMeasure::uniform(-1.0, 1.0, m);
  std::size_t flip = grid.size();
  bool positive = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(path.values[i]) >= eps) {
      flip = i;
      positive = path.values[i] > 0.0;
      break;
    }
  }
  QuantileMeasure post = coinflip_outcome(positive, m);
  out.measures.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.measures.push_back(i < flip ? pre : post);
  }
  out.finalize();
  out.termination_index = out.measures.size();  // never a Dirac
  return out;
}

/// Index of the first post-flip state (grid.size() if the coin never flips).
inline std::size_t coinflip_flip_index(const MvmSeries& series) {
  for (std::size_t i = 1; i < series.measures.size(); ++i) {
    if (wasserstein_1(series.measures[i], series.measures[0]) > 1e-12) {
      return i;
    }
  }
  return series.measures.size();
}

// ---------------------------------------------------------------------------
// Second optimality objective
// ---------------------------------------------------------------------------

struct Opt2Estimate {
  double estimate = 0.0;
  double se = 0.0;
  std::size_t n = 0;
  std::size_t n_unterminated = 0;
};

/// MC estimate of E[F([xi]^rho_infty)] with the finest-mesh speed total as
/// the terminal speed.  Paths whose series has not terminated at the horizon
/// are counted; beyond `unterminated_tol` (as a fraction) this throws.
inline Opt2Estimate objective_opt2(
    const std::function<MvmSeries(std::uint64_t)>& factory, const RhoMap& rho,
    const std::function<double(double)>& F, std::size_t n_paths,
    double unterminated_tol = 0.01, double dirac_tol = 1e-9) {
  std::vector<double> vals(n_paths);
  std::vector<unsigned char> bad(n_paths, 0);
  parallel_for(n_paths, [&](std::size_t i) {
    MvmSeries s = factory(static_cast<std::uint64_t>(i));
    if (!s.measures.back().is_dirac(
            dirac_tol * (1.0 + std::abs(s.measures.back().mean())))) {
      bad[i] = 1;
    }
    vals[i] = F(speed_total(s, &rho));
  });
  Opt2Estimate out;
  for (auto b : bad) out.n_unterminated += b;
  if (static_cast<double>(out.n_unterminated) >
      unterminated_tol * static_cast<double>(n_paths)) {
    throw std::runtime_error(
        "objective_opt2: too many series unterminated at the horizon (" +
        std::to_string(out.n_unterminated) + "/" + std::to_string(n_paths) +
        ")");
  }
  MeanSe ms = mean_se(vals);
  out.estimate = ms.mean;
  out.se = ms.se;
  out.n = n_paths;
  return out;
}

}  // namespace mvmlab
