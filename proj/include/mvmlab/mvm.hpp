#pragma once

// The example measure-valued martingales: the Gaussian MVM eta_t =
// N(B_t, 1-t), the Bass MVM xi_t = h_# eta_t in canonical and natural time,
// and the Azema-Yor MVM driven by the running maximum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvmlab/math.hpp"
#include "mvmlab/measure.hpp"
#include "mvmlab/stochastic.hpp"

namespace mvmlab {

/// Monotone function tabulated at strictly increasing abscissae; evaluation
/// interpolates linearly and clamps outside the table.
class ScaleFunction {
 public:
  ScaleFunction(std::vector<double> xs, std::vector<double> ys)
      : xs_(std::move(xs)), ys_(std::move(ys)) {
    if (xs_.size() != ys_.size() || xs_.size() < 2) {
      throw std::invalid_argument("ScaleFunction: bad table");
    }
    for (std::size_t i = 1; i < xs_.size(); ++i) {
      if (!(xs_[i] > xs_[i - 1])) {
        throw std::invalid_argument("ScaleFunction: xs not strictly increasing");
      }
      if (ys_[i] < ys_[i - 1]) {
        throw std::invalid_argument("ScaleFunction: ys not non-decreasing");
      }
    }
  }

  static ScaleFunction identity() {
    ScaleFunction f({-1.0, 1.0}, {-1.0, 1.0});
    f.identity_ = true;
    return f;
  }

  double operator()(double x) const {
    if (identity_) return x;
    if (x <= xs_.front()) return ys_.front();
    if (x >= xs_.back()) return ys_.back();
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
    double w = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
    return ys_[i] + w * (ys_[i + 1] - ys_[i]);
  }

  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }
  bool is_identity() const { return identity_; }

 private:
  std::vector<double> xs_, ys_;
  bool identity_ = false;
};

inline void require_centred(const QuantileMeasure& mu, const char* where,
                            double tol = 1e-6) {
  double scale = std::max(1.0, std::max(std::abs(mu.min_support()),
                                        std::abs(mu.max_support())));
  if (std::abs(mu.mean()) > tol * scale) {
    throw std::invalid_argument(std::string(where) + ": measure not centred");
  }
}

inline void require_atomless(const QuantileMeasure& mu, const char* where) {
  if (mu.has_atoms()) {
    throw std::invalid_argument(std::string(where) +
                                ": measure has atoms (repeated quantiles)");
  }
}

// ---------------------------------------------------------------------------
// Gaussian MVM
// ---------------------------------------------------------------------------

struct GaussianState {
  double b = 0.0;   // current Brownian value
  double s2 = 1.0;  // remaining variance 1 - t
};

inline QuantileMeasure eta_at(const GaussianState& state, std::size_t m) {
  if (state.s2 < 0.0) throw std::invalid_argument("eta_at: s2 < 0");
  if (state.s2 == 0.0) return QuantileMeasure::point_mass(state.b, m);
  return QuantileMeasure::gaussian(state.b, state.s2, m);
}

// ---------------------------------------------------------------------------
// Bass MVM
// ---------------------------------------------------------------------------

/// Canonical scale h = F_mu^{-1} o F_{eta_0}, tabulated at the z-grid of the
/// midpoint quantile levels so that h_# eta_0 reproduces mu grid-exactly.
inline ScaleFunction bass_scale(const QuantileMeasure& mu) {
  require_atomless(mu, "bass_scale");
  require_centred(mu, "bass_scale");
  const std::size_t m = mu.size();
  std::vector<double> zs(m);
  for (std::size_t k = 0; k < m; ++k) {
    double q = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
    zs[k] = normal_quantile(q);
  }
  return ScaleFunction(std::move(zs), mu.values());
}

inline QuantileMeasure bass_mvm_at(const ScaleFunction& h,
                                   const GaussianState& state, std::size_t m) {
  return pushforward(eta_at(state, m), [&](double x) { return h(x); });
}

// ---------------------------------------------------------------------------
// Series carrier
// ---------------------------------------------------------------------------

struct MvmSeries {
  TimeGrid grid;
  std::vector<QuantileMeasure> measures;
  std::vector<double> means;
  // First index whose measure is a Dirac; measures.size() if none.
  std::size_t termination_index = 0;

  void finalize() {
    means.resize(measures.size());
    for (std::size_t i = 0; i < measures.size(); ++i) {
      means[i] = measures[i].mean();
    }
  }

  std::size_t compute_termination(double tol = 0.0) const {
    for (std::size_t i = 0; i < measures.size(); ++i) {
      if (measures[i].is_dirac(tol)) return i;
    }
    return measures.size();
  }
};

namespace detail {
inline TimeGrid decimated_grid(const TimeGrid& g, std::size_t stride) {
  if (stride == 0 || g.n_steps % stride != 0) {
    throw std::invalid_argument("decimation stride must divide n_steps");
  }
  return TimeGrid(g.t0, g.t_end, g.n_steps / stride);
}
}  // namespace detail

/// Canonical-time Bass MVM along one driving path on [0,1].
inline MvmSeries bass_mvm_series(const ScaleFunction& h, const SamplePath& path,
                                 std::size_t m, std::size_t out_stride = 1) {
  if (std::abs(path.grid.t_end - 1.0) > 1e-12 || path.grid.t0 != 0.0) {
    throw std::invalid_argument("bass_mvm_series: path grid must be [0,1]");
  }
  if (path.values.front() != 0.0) {
    throw std::invalid_argument("bass_mvm_series: path must start at 0");
  }
  MvmSeries s;
  s.grid = detail::decimated_grid(path.grid, out_stride);
  s.measures.reserve(s.grid.size());
  for (std::size_t j = 0; j <= s.grid.n_steps; ++j) {
    double t = s.grid.time(j);
    GaussianState st{path.values[j * out_stride], std::max(0.0, 1.0 - t)};
    s.measures.push_back(bass_mvm_at(h, st, m));
  }
  s.finalize();
  s.termination_index = s.grid.n_steps;  // delta at t = 1
  return s;
}

inline MvmSeries bass_mvm_series(const QuantileMeasure& mu,
                                 const SamplePath& path, std::size_t m,
                                 std::size_t out_stride = 1) {
  return bass_mvm_series(bass_scale(mu), path, m, out_stride);
}

/// Re-clocks a series onto the quadratic variation of its mean process: the
/// output grid is [0, <M>_end] and measures are re-indexed, not recomputed.
inline MvmSeries natural_time(const MvmSeries& s) {
  auto clock = quadratic_variation(s.means);
  double total = clock.back();
  if (total <= 0.0) return s;  // constant mean, nothing to re-clock
  MvmSeries out;
  out.grid = TimeGrid(0.0, total, s.grid.n_steps);
  out.measures.reserve(out.grid.size());
  std::size_t i = 0;
  for (std::size_t j = 0; j <= out.grid.n_steps; ++j) {
    double level = out.grid.time(j);
    while (i + 1 < clock.size() && clock[i] < level) ++i;
    out.measures.push_back(s.measures[i]);
  }
  out.finalize();
  out.termination_index = out.compute_termination();
  return out;
}

inline MvmSeries bass_natural_time(const MvmSeries& s) {
  return natural_time(s);
}

/// Monotone pushforward of every state of a series.
inline MvmSeries pushforward_series(const MvmSeries& s,
                                    const ScaleFunction& f) {
  MvmSeries out;
  out.grid = s.grid;
  out.termination_index = s.termination_index;
  out.measures.reserve(s.measures.size());
  for (const auto& mu : s.measures) {
    out.measures.push_back(pushforward(mu, [&](double x) { return f(x); }));
  }
  out.finalize();
  return out;
}

/// Monotone quantile transport F_mu^{-1} o F_lambda between atomless grids.
inline ScaleFunction quantile_transport(const QuantileMeasure& lambda,
                                        const QuantileMeasure& mu) {
  require_atomless(lambda, "quantile_transport");
  QuantileMeasure target =
      mu.size() == lambda.size() ? mu : mu.resampled(lambda.size());
  return ScaleFunction(lambda.values(), target.values());
}

/// Exact integral of the tabulated (piecewise-linear, clamped) scale against
/// N(b, s2).  Independent route for checking grid means of Bass states.
inline double scale_gaussian_mean(const ScaleFunction& h, double b, double s2) {
  if (s2 < 0.0) throw std::invalid_argument("scale_gaussian_mean: s2 < 0");
  if (s2 == 0.0 || h.is_identity()) return h(b);
  const double sd = std::sqrt(s2);
  const auto& xs = h.xs();
  const auto& ys = h.ys();
  auto z = [&](double x) { return (x - b) / sd; };
  double total = ys.front() * normal_cdf(z(xs.front()));
  total += ys.back() * (1.0 - normal_cdf(z(xs.back())));
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    double za = z(xs[i]), zb = z(xs[i + 1]);
    double dPhi = normal_cdf(zb) - normal_cdf(za);
    double dphi = normal_pdf(zb) - normal_pdf(za);
    double slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    // int_{xa}^{xb} x dN(b, s2) = b dPhi - sd dphi
    total += ys[i] * dPhi + slope * ((b - xs[i]) * dPhi - sd * dphi);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Azema-Yor MVM
// ---------------------------------------------------------------------------

/// Precomputed barycentre data for one target measure: the level table
/// pi(x) solving x (1 - pi) = tail integral of mu above pi, and the stopping
/// boundary psi(x) = F_mu^{-1}(pi(x)), psi(r) = r.
class AyEmbedding {
 public:
  AyEmbedding(const QuantileMeasure& mu, std::size_t n_table = 1024,
              bool allow_atoms = false)
      : mu_(mu), r_(mu.max_support()) {
    if (!allow_atoms) require_atomless(mu, "ay_barycentre");
    require_centred(mu, "ay_barycentre");
    const std::size_t m = mu.size();
    suffix_.assign(m + 1, 0.0);
    for (std::size_t k = m; k-- > 0;) {
      suffix_[k] = suffix_[k + 1] + mu.values()[k];
    }
    double lo = mu.mean();
    if (!(r_ > lo)) {
      throw std::invalid_argument("ay_barycentre: degenerate support");
    }
    xs_.resize(n_table);
    pi_.resize(n_table);
    for (std::size_t i = 0; i < n_table; ++i) {
      double x = lo + (r_ - lo) * static_cast<double>(i) /
                          static_cast<double>(n_table - 1);
      xs_[i] = x;
      pi_[i] = solve_pi(x);
    }
  }

  double sup_support() const { return r_; }
  const QuantileMeasure& target() const { return mu_; }
  const std::vector<double>& level_table() const { return pi_; }
  const std::vector<double>& x_table() const { return xs_; }

  /// Tail integral T(p) = int_p^1 F^{-1}(q) dq of the grid measure (exact).
  double tail_integral(double p) const {
    const std::size_t m = mu_.size();
    const double md = static_cast<double>(m);
    if (p <= 0.0) return suffix_[0] / md;
    if (p >= 1.0) return 0.0;
    auto i = static_cast<std::size_t>(std::floor(p * md));
    if (i >= m) i = m - 1;
    double upper = (static_cast<double>(i) + 1.0) / md;
    return (upper - p) * mu_.values()[i] + suffix_[i + 1] / md;
  }

  double pi(double x) const {
    if (x <= xs_.front()) return 0.0;
    if (x >= xs_.back()) return pi_.back();
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
    double w = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
    return pi_[i] + w * (pi_[i + 1] - pi_[i]);
  }

  double psi(double x) const {
    if (x >= r_) return r_;  // stated boundary case psi(r) = r
    double p = pi(x);
    if (p <= 0.0) return mu_.min_support();
    return mu_.quantile(std::min(p, 1.0 - 1e-15));
  }

 private:
  // Solves bar(p) := T(p)/(1-p) = x by bisection; bar is non-decreasing.
  double solve_pi(double x) const {
    double lo = 0.0, hi = 1.0 - 1e-14;
    auto bar = [&](double p) { return tail_integral(p) / (1.0 - p); };
    if (bar(lo) >= x) return 0.0;
    if (bar(hi) <= x) return hi;
    for (int it = 0; it < 100; ++it) {
      double mid = 0.5 * (lo + hi);
      (bar(mid) < x ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  QuantileMeasure mu_;
  double r_;
  std::vector<double> suffix_;
  std::vector<double> xs_, pi_;
};

inline AyEmbedding ay_barycentre(const QuantileMeasure& mu,
                                 std::size_t n_table = 1024,
                                 bool allow_atoms = false) {
  return AyEmbedding(mu, n_table, allow_atoms);
}

struct AyState {
  const AyEmbedding* embedding = nullptr;
  double s_max = 0.0;
  double b = 0.0;
  bool stopped = false;
  double stop_value = 0.0;
};

/// The AY mixture at (S_t, B_t): weight (S-B)/(S-psi(S)) on delta_{psi(S)}
/// and (B-psi(S))/(S-psi(S)) on the normalized upper tail mu_pi/(1-pi).
inline QuantileMeasure ay_mvm_at(const AyState& state, std::size_t m) {
  const AyEmbedding& emb = *state.embedding;
  if (state.stopped) return QuantileMeasure::point_mass(state.stop_value, m);
  double s = state.s_max;
  if (s >= emb.sup_support()) {
    return QuantileMeasure::point_mass(emb.sup_support(), m);
  }
  double psi = emb.psi(s);
  double denom = s - psi;
  if (denom <= 0.0) {
    // Degenerate S = psi(S): the state is already terminal.
    return QuantileMeasure::point_mass(psi, m);
  }
  double b = std::min(state.b, s);
  if (b <= psi) return QuantileMeasure::point_mass(psi, m);
  double p = emb.pi(s);
  double w1 = (s - b) / denom;
  const QuantileMeasure& mu = emb.target();
  std::vector<double> v(m);
  for (std::size_t k = 0; k < m; ++k) {
    double q = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
    if (q <= w1) {
      v[k] = psi;
    } else {
      double u = (q - w1) / (1.0 - w1);
      double level = p + u * (1.0 - p);
      v[k] = mu.quantile(std::min(std::max(level, 1e-15), 1.0 - 1e-15));
    }
  }
  std::sort(v.begin(), v.end());  // guard against interpolation rounding
  return QuantileMeasure(std::move(v));
}

/// AY MVM along a driving path started at 0; the running maximum is tracked
/// on the simulation grid and the series is emitted every `out_stride` steps.
inline MvmSeries ay_mvm_series(const AyEmbedding& emb, const SamplePath& path,
                               std::size_t m, std::size_t out_stride = 1) {
  if (path.values.front() != 0.0) {
    throw std::invalid_argument("ay_mvm_series: path must start at 0");
  }
  MvmSeries out;
  out.grid = detail::decimated_grid(path.grid, out_stride);
  out.measures.reserve(out.grid.size());
  AyState st;
  st.embedding = &emb;
  out.termination_index = out.grid.size();
  for (std::size_t i = 0; i <= path.grid.n_steps; ++i) {
    if (!st.stopped) {
      st.b = path.values[i];
      st.s_max = std::max(st.s_max, st.b);
      double psi = emb.psi(st.s_max);
      if (st.b <= psi || st.s_max >= emb.sup_support()) {
        st.stopped = true;
        st.stop_value = st.s_max >= emb.sup_support() ? emb.sup_support() : psi;
      }
    }
    if (i % out_stride == 0) {
      out.measures.push_back(ay_mvm_at(st, m));
      if (st.stopped && out.termination_index == out.grid.size()) {
        out.termination_index = out.measures.size() - 1;
      }
    }
  }
  out.finalize();
  return out;
}

}  // namespace mvmlab
