#pragma once

// Root barrier machinery: the free boundary r(x) of the parabolic obstacle
// problem min(d_t u - 1/2 d_xx u, u - U_mu) = 0 with u(0,x) = -|x|, the
// hitting time of the induced space-time barrier, and the family of
// absorption laws mu_R^{t,x} computed by dynamic programming on a trinomial
// lattice.  The Bass-Root MVM is the monotone pushforward of the Root MVM.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvmlab/measure.hpp"
#include "mvmlab/mvm.hpp"
#include "mvmlab/stochastic.hpp"

namespace mvmlab {

/// First-entry-time representation of a barrier: the set
/// {(t, x) : t >= r(x)}, with r = +inf where the boundary is never reached.
struct Barrier {
  std::vector<double> xs;  // uniform space grid
  std::vector<double> r;   // entry times, kInfinity sentinel allowed

  double dx() const { return xs[1] - xs[0]; }

  std::size_t nearest(double x) const {
    if (x <= xs.front()) return 0;
    if (x >= xs.back()) return xs.size() - 1;
    auto i = static_cast<std::size_t>(
        std::llround((x - xs.front()) / dx()));
    return i >= xs.size() ? xs.size() - 1 : i;
  }

  double r_at(double x) const { return r[nearest(x)]; }
  bool contains(double t, double x) const { return t >= r_at(x); }
};

struct RootSolveConfig {
  double x_min = -4.0;
  double x_max = 4.0;
  std::size_t n_x = 401;
  double horizon = 4.0;
  std::size_t n_t = 1024;
  double omega = 1.5;     // PSOR over-relaxation
  double tol = 1e-12;     // PSOR sweep tolerance
  int max_iter = 20000;
};

namespace detail {

/// Potentials U_mu(x_j) = -(1/M) sum |x_j - v_k| for all grid nodes,
/// via prefix sums over the sorted quantile table.
inline std::vector<double> potential_on_grid(const QuantileMeasure& mu,
                                             const std::vector<double>& xs) {
  const auto& v = mu.values();
  const std::size_t m = v.size();
  std::vector<double> prefix(m + 1, 0.0);
  for (std::size_t k = 0; k < m; ++k) prefix[k + 1] = prefix[k] + v[k];
  std::vector<double> out(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    double x = xs[j];
    auto c = static_cast<std::size_t>(
        std::upper_bound(v.begin(), v.end(), x) - v.begin());
    double below = x * static_cast<double>(c) - prefix[c];
    double above = (prefix[m] - prefix[c]) - x * static_cast<double>(m - c);
    out[j] = -(below + above) / static_cast<double>(m);
  }
  return out;
}

}  // namespace detail

/// Solves the obstacle problem by implicit Euler time stepping with
/// projected SOR and reads off the free boundary as the first contact time
/// per node.  Nodes outside supp mu are in contact from t = 0.
inline Barrier solve_root_barrier(const QuantileMeasure& mu,
                                  const RootSolveConfig& cfg = {}) {
  require_centred(mu, "solve_root_barrier");
  const double width = mu.max_support() - mu.min_support();
  if (mu.min_support() - cfg.x_min < 0.05 * width ||
      cfg.x_max - mu.max_support() < 0.05 * width) {
    throw std::invalid_argument(
        "solve_root_barrier: space grid must contain supp mu with margin");
  }
  if (cfg.n_x < 3 || cfg.n_t < 1) {
    throw std::invalid_argument("solve_root_barrier: bad grid sizes");
  }

  Barrier out;
  out.xs.resize(cfg.n_x);
  const double dx = (cfg.x_max - cfg.x_min) / static_cast<double>(cfg.n_x - 1);
  for (std::size_t j = 0; j < cfg.n_x; ++j) {
    out.xs[j] = cfg.x_min + static_cast<double>(j) * dx;
  }
  const std::vector<double> psi = detail::potential_on_grid(mu, out.xs);

  std::vector<double> u(cfg.n_x);
  out.r.assign(cfg.n_x, kInfinity);
  const double contact_eps = 1e-10;
  for (std::size_t j = 0; j < cfg.n_x; ++j) {
    u[j] = -std::abs(out.xs[j]);
    if (u[j] <= psi[j] + contact_eps * (1.0 + std::abs(psi[j]))) {
      u[j] = psi[j];
      out.r[j] = 0.0;
    }
  }
  // Endpoints sit outside the support, so they stay in contact throughout.
  u.front() = psi.front();
  u.back() = psi.back();

  const double dt = cfg.horizon / static_cast<double>(cfg.n_t);
  const double alpha = 0.5 * dt / (dx * dx);
  const double diag = 1.0 + 2.0 * alpha;
  std::vector<double> rhs(cfg.n_x);

  for (std::size_t n = 1; n <= cfg.n_t; ++n) {
    rhs = u;
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
      double delta = 0.0;
      for (std::size_t j = 1; j + 1 < cfg.n_x; ++j) {
        double gs = (rhs[j] + alpha * (u[j - 1] + u[j + 1])) / diag;
        double next = u[j] + cfg.omega * (gs - u[j]);
        if (next < psi[j]) next = psi[j];
        delta = std::max(delta, std::abs(next - u[j]));
        u[j] = next;
      }
      if (delta < cfg.tol) break;
    }
    const double t = static_cast<double>(n) * dt;
    for (std::size_t j = 1; j + 1 < cfg.n_x; ++j) {
      if (out.r[j] == kInfinity &&
          u[j] - psi[j] <= contact_eps * (1.0 + std::abs(psi[j]))) {
        out.r[j] = t;
      }
    }
  }
  return out;
}

struct RootHit {
  std::size_t index = 0;
  double time = 0.0;
  double value = 0.0;
  bool hit = false;
};

/// First grid time with t >= r(nearest node).  Path values outside the
/// barrier grid are clamped to its range for the lookup.
inline RootHit root_hit_time(const Barrier& barrier, const SamplePath& path,
                             std::size_t* n_clamped = nullptr) {
  RootHit out;
  for (std::size_t i = 0; i < path.values.size(); ++i) {
    double x = path.values[i];
    if (n_clamped && (x < barrier.xs.front() || x > barrier.xs.back())) {
      ++*n_clamped;
    }
    if (barrier.contains(path.grid.time(i), x)) {
      out.index = i;
      out.time = path.grid.time(i);
      out.value = x;
      out.hit = true;
      return out;
    }
  }
  out.index = path.values.size();
  out.time = path.grid.t_end;
  out.value = path.values.back();
  return out;
}

struct RootDpConfig {
  double dx = 0.02;        // lattice spacing; dt = (2/3) dx^2
  double horizon = 8.0;    // absolute time cap for the absorption march
  double leak_tol = 1e-6;  // max unabsorbed mass at the horizon
};

namespace detail {

struct LatticeGeometry {
  std::vector<double> nodes;
  double dx = 0.0;
  double dt = 0.0;

  LatticeGeometry(const Barrier& barrier, double target_dx) {
    double lo = barrier.xs.front(), hi = barrier.xs.back();
    auto n = static_cast<std::size_t>(std::ceil((hi - lo) / target_dx)) + 1;
    if (n < 3) n = 3;
    dx = (hi - lo) / static_cast<double>(n - 1);
    dt = (2.0 / 3.0) * dx * dx;
    nodes.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      nodes[j] = lo + static_cast<double>(j) * dx;
    }
  }

  std::size_t snap(double x) const {
    if (x <= nodes.front()) return 0;
    if (x >= nodes.back()) return nodes.size() - 1;
    auto j = static_cast<std::size_t>(
        std::llround((x - nodes.front()) / dx));
    return j >= nodes.size() ? nodes.size() - 1 : j;
  }
};

}  // namespace detail

/// Law of the absorbed process started at (t, x): forward march of the mass
/// vector with trinomial steps (1/3, 1/3, 1/3) and absorption at lattice
/// nodes already inside the barrier.  Throws if more than leak_tol mass
/// survives to the horizon.
inline QuantileMeasure root_mvm_at(const Barrier& barrier, double t, double x,
                                   std::size_t m,
                                   const RootDpConfig& cfg = {}) {
  if (barrier.contains(t, x)) return QuantileMeasure::point_mass(x, m);
  detail::LatticeGeometry geo(barrier, cfg.dx);
  const std::size_t n = geo.nodes.size();
  std::vector<double> alive(n, 0.0), next(n, 0.0), absorbed(n, 0.0);
  alive[geo.snap(x)] = 1.0;
  double time = t;
  double alive_mass = 1.0;
  while (alive_mass > 0.1 * cfg.leak_tol && time < cfg.horizon) {
    for (std::size_t j = 0; j < n; ++j) {
      if (alive[j] > 0.0 && barrier.contains(time, geo.nodes[j])) {
        absorbed[j] += alive[j];
        alive_mass -= alive[j];
        alive[j] = 0.0;
      }
    }
    if (alive_mass <= 0.1 * cfg.leak_tol) break;
    const double third = 1.0 / 3.0;
    for (std::size_t j = 0; j < n; ++j) {
      double lo = j == 0 ? alive[0] : alive[j - 1];
      double hi = j + 1 == n ? alive[n - 1] : alive[j + 1];
      next[j] = third * (lo + alive[j] + hi);
    }
    alive.swap(next);
    time += geo.dt;
  }
  if (alive_mass > cfg.leak_tol) {
    throw std::runtime_error("root_mvm_at: mass leakage " +
                             std::to_string(alive_mass) +
                             " at horizon (time horizon too short)");
  }
  for (std::size_t j = 0; j < n; ++j) absorbed[j] += alive[j];
  return QuantileMeasure::from_atoms(geo.nodes, absorbed, m);
}

/// Precomputed table of mu_R^{t,x} on a snapshot ladder: one backward pass
/// over the lattice serves every (t, x) query by bilinear interpolation of
/// quantile tables.  Inside the barrier the law is the exact Dirac delta_x.
class RootMvmTable {
 public:
  RootMvmTable(const Barrier& barrier, std::vector<double> snapshot_times,
               std::size_t m, const RootDpConfig& cfg = {})
      : barrier_(barrier), geo_(barrier, cfg.dx), m_(m) {
    if (snapshot_times.empty()) {
      throw std::invalid_argument("RootMvmTable: no snapshot times");
    }
    std::sort(snapshot_times.begin(), snapshot_times.end());
    if (snapshot_times.front() < 0.0) {
      throw std::invalid_argument("RootMvmTable: negative snapshot time");
    }
    const std::size_t n = geo_.nodes.size();
    const double dt = geo_.dt;
    auto t_index = [&](double t) {
      return static_cast<std::size_t>(std::llround(t / dt));
    };
    const std::size_t top = std::max<std::size_t>(
        t_index(std::max(cfg.horizon, snapshot_times.back())), 1);

    std::vector<std::size_t> snap_idx;
    for (double t : snapshot_times) {
      std::size_t i = std::min(t_index(t), top);
      if (snap_idx.empty() || i != snap_idx.back()) {
        snap_idx.push_back(i);
        snap_times_.push_back(static_cast<double>(i) * dt);
      }
    }
    std::reverse(snap_idx.begin(), snap_idx.end());

    // rows[j]: absorption law from node j at the current backward time,
    // as atom weights over all nodes.  Forced absorption at the top slice.
    std::vector<double> rows(n * n, 0.0), next(n * n, 0.0);
    std::vector<double> leak(n, 0.0), leak_next(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      rows[j * n + j] = 1.0;
      leak[j] =
          barrier_.contains(static_cast<double>(top) * dt, geo_.nodes[j])
              ? 0.0
              : 1.0;
    }
    quantiles_.assign(snap_times_.size() * n * m_, 0.0);
    leak_table_.assign(snap_times_.size() * n, 0.0);

    std::size_t pending = 0;  // next entry of snap_idx to capture
    auto maybe_capture = [&](std::size_t i) {
      while (pending < snap_idx.size() && snap_idx[pending] == i) {
        std::size_t slot = snap_idx.size() - 1 - pending;
        for (std::size_t j = 0; j < n; ++j) {
          quantize_row(&rows[j * n], slot, j);
          leak_table_[slot * n + j] = leak[j];
        }
        ++pending;
      }
    };

    maybe_capture(top);
    const double third = 1.0 / 3.0;
    for (std::size_t i = top; i-- > 0;) {
      const double t = static_cast<double>(i) * dt;
      for (std::size_t j = 0; j < n; ++j) {
        double* dst = &next[j * n];
        if (barrier_.contains(t, geo_.nodes[j])) {
          std::fill(dst, dst + n, 0.0);
          dst[j] = 1.0;
          leak_next[j] = 0.0;
          continue;
        }
        std::size_t lo = j == 0 ? 0 : j - 1;
        std::size_t hi = j + 1 == n ? n - 1 : j + 1;
        const double* a = &rows[lo * n];
        const double* b = &rows[j * n];
        const double* c = &rows[hi * n];
        for (std::size_t k = 0; k < n; ++k) {
          dst[k] = third * (a[k] + b[k] + c[k]);
        }
        leak_next[j] = third * (leak[lo] + leak[j] + leak[hi]);
      }
      rows.swap(next);
      leak.swap(leak_next);
      maybe_capture(i);
    }

    max_leak_ = 0.0;
    for (double v : leak_table_) max_leak_ = std::max(max_leak_, v);
    if (max_leak_ > cfg.leak_tol) {
      throw std::runtime_error("RootMvmTable: mass leakage " +
                               std::to_string(max_leak_) +
                               " at horizon (time horizon too short)");
    }
  }

  std::size_t grid_size() const { return m_; }
  double max_leak() const { return max_leak_; }
  const std::vector<double>& snapshot_times() const { return snap_times_; }

  QuantileMeasure measure_at(double t, double x) const {
    if (barrier_.contains(t, x)) return QuantileMeasure::point_mass(x, m_);
    std::vector<double> v(m_);
    fill_quantiles(t, x, v.data());
    return QuantileMeasure(std::move(v));
  }

  double mean_at(double t, double x) const {
    if (barrier_.contains(t, x)) return x;
    std::vector<double> v(m_);
    fill_quantiles(t, x, v.data());
    double s = 0.0;
    for (double y : v) s += y;
    return s / static_cast<double>(m_);
  }

 private:
  void quantize_row(const double* weights, std::size_t slot, std::size_t j) {
    QuantileMeasure q = QuantileMeasure::from_atoms(
        geo_.nodes, std::vector<double>(weights, weights + geo_.nodes.size()),
        m_);
    std::copy(q.values().begin(), q.values().end(),
              &quantiles_[(slot * geo_.nodes.size() + j) * m_]);
  }

  void fill_quantiles(double t, double x, double* out) const {
    const std::size_t n = geo_.nodes.size();
    // time bracket
    std::size_t si = 0;
    double wt = 0.0;
    if (t <= snap_times_.front()) {
      si = 0;
    } else if (t >= snap_times_.back()) {
      si = snap_times_.size() - 1;
    } else {
      auto it = std::upper_bound(snap_times_.begin(), snap_times_.end(), t);
      si = static_cast<std::size_t>(it - snap_times_.begin()) - 1;
      double t1 = snap_times_[si], t2 = snap_times_[si + 1];
      wt = (t - t1) / (t2 - t1);
    }
    std::size_t sj = std::min(si + 1, snap_times_.size() - 1);
    // space bracket
    double xc = std::min(std::max(x, geo_.nodes.front()), geo_.nodes.back());
    auto j = static_cast<std::size_t>((xc - geo_.nodes.front()) / geo_.dx);
    if (j + 1 >= n) j = n - 2;
    double wx = (xc - geo_.nodes[j]) / geo_.dx;
    wx = std::min(std::max(wx, 0.0), 1.0);

    const double* q00 = &quantiles_[(si * n + j) * m_];
    const double* q01 = &quantiles_[(si * n + j + 1) * m_];
    const double* q10 = &quantiles_[(sj * n + j) * m_];
    const double* q11 = &quantiles_[(sj * n + j + 1) * m_];
    for (std::size_t k = 0; k < m_; ++k) {
      double lo = q00[k] + wx * (q01[k] - q00[k]);
      double hi = q10[k] + wx * (q11[k] - q10[k]);
      out[k] = lo + wt * (hi - lo);
    }
  }

  Barrier barrier_;
  detail::LatticeGeometry geo_;
  std::size_t m_;
  std::vector<double> snap_times_;
  std::vector<double> quantiles_;   // [snapshot][node][level]
  std::vector<double> leak_table_;  // [snapshot][node]
  double max_leak_ = 0.0;
};

/// Dense-then-geometric snapshot ladder covering [0, horizon].
inline std::vector<double> make_snapshot_times(double dense_end,
                                               std::size_t n_dense,
                                               double horizon,
                                               std::size_t n_tail) {
  std::vector<double> ts;
  for (std::size_t i = 0; i <= n_dense; ++i) {
    ts.push_back(dense_end * static_cast<double>(i) /
                 static_cast<double>(n_dense));
  }
  if (horizon > dense_end && n_tail > 0) {
    double ratio = std::pow(horizon / dense_end,
                            1.0 / static_cast<double>(n_tail));
    double t = dense_end;
    for (std::size_t i = 0; i < n_tail; ++i) {
      t *= ratio;
      ts.push_back(std::min(t, horizon));
    }
  }
  return ts;
}

struct RootEmbedding {
  Barrier barrier;
  RootMvmTable table;

  RootEmbedding(Barrier b, RootMvmTable t)
      : barrier(std::move(b)), table(std::move(t)) {}
};

inline RootEmbedding make_root_embedding(
    const QuantileMeasure& lambda, const RootSolveConfig& solve_cfg,
    const RootDpConfig& dp_cfg, std::vector<double> snapshot_times,
    std::size_t m) {
  Barrier b = solve_root_barrier(lambda, solve_cfg);
  RootMvmTable t(b, std::move(snapshot_times), m, dp_cfg);
  return RootEmbedding(std::move(b), std::move(t));
}

/// Root MVM along one driving path: xi_t = mu_R^{t, B_t} before the hit,
/// frozen at delta_{B_tau} afterwards.
inline MvmSeries root_mvm_series(const RootEmbedding& emb,
                                 const SamplePath& path,
                                 std::size_t out_stride = 1) {
  RootHit hit = root_hit_time(emb.barrier, path);
  MvmSeries out;
  out.grid = detail::decimated_grid(path.grid, out_stride);
  out.measures.reserve(out.grid.size());
  const std::size_t m = emb.table.grid_size();
  out.termination_index = out.grid.size();
  for (std::size_t j = 0; j <= out.grid.n_steps; ++j) {
    std::size_t i = j * out_stride;
    if (hit.hit && i >= hit.index) {
      out.measures.push_back(QuantileMeasure::point_mass(hit.value, m));
      if (out.termination_index == out.grid.size()) out.termination_index = j;
    } else {
      out.measures.push_back(
          emb.table.measure_at(path.grid.time(i), path.values[i]));
    }
  }
  out.finalize();
  return out;
}

/// Canonical-time Bass-Root MVM: kappa_# applied to the Root series for
/// lambda, where kappa = F_mu^{-1} o F_lambda.
inline MvmSeries bass_root_mvm_series(const QuantileMeasure& mu,
                                      const QuantileMeasure& lambda,
                                      const RootEmbedding& emb,
                                      const SamplePath& path,
                                      std::size_t out_stride = 1) {
  require_atomless(mu, "bass_root_mvm_series");
  require_centred(mu, "bass_root_mvm_series");
  ScaleFunction kappa = quantile_transport(lambda, mu);
  return pushforward_series(root_mvm_series(emb, path, out_stride), kappa);
}

}  // namespace mvmlab
