#pragma once

// The distance process t -> W_p^p(xi^1_t, xi^2_t) between two MVMs, the
// statistical testers for its (sub)martingale behaviour, the kernel-coupled
// companion MVM built from the monotone transport plan, the Lipschitz-Markov
// equality check and the first optimality objective.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvmlab/math.hpp"
#include "mvmlab/measure.hpp"
#include "mvmlab/mvm.hpp"
#include "mvmlab/parallel.hpp"

namespace mvmlab {

/// Monotone rearrangement kernel m0(x, dy) pairing the quantile levels of a
/// source grid with those of a target; on atomless grids the optimal plan is
/// a map, so pushing the source through the kernel returns the target
/// grid-exactly.
struct TransportKernel {
  ScaleFunction map;

  TransportKernel(const QuantileMeasure& source, const QuantileMeasure& target)
      : map(make_map(source, target)) {}

  QuantileMeasure apply(const QuantileMeasure& mu) const {
    return pushforward(mu, [&](double x) { return map(x); });
  }

 private:
  static ScaleFunction make_map(const QuantileMeasure& source,
                                const QuantileMeasure& target) {
    require_atomless(source, "TransportKernel");
    require_atomless(target, "TransportKernel");
    return quantile_transport(source, target);
  }
};

/// Kernel-coupled MVM: builds the monotone plan from xi^1_0 to mu and pushes
/// every state of the first series through it; the result starts at mu and
/// keeps W_p^p(xi^1, xi^2) a martingale.
inline MvmSeries coupled_mvm_from_plan(const MvmSeries& series1,
                                       const QuantileMeasure& mu) {
  if (series1.measures.empty()) {
    throw std::invalid_argument("coupled_mvm_from_plan: empty series");
  }
  TransportKernel kernel(series1.measures.front(), mu);
  return pushforward_series(series1, kernel.map);
}

namespace detail {
inline void require_aligned(const MvmSeries& a, const MvmSeries& b) {
  if (a.grid.n_steps != b.grid.n_steps || a.grid.t0 != b.grid.t0 ||
      a.grid.t_end != b.grid.t_end) {
    throw std::invalid_argument("distance_process: misaligned series grids");
  }
}
}  // namespace detail

/// W_p^p(xi^1_t, xi^2_t) at every grid time (pathwise grid evaluation).
inline std::vector<double> distance_process(const MvmSeries& s1,
                                            const MvmSeries& s2, double p) {
  detail::require_aligned(s1, s2);
  std::vector<double> out(s1.measures.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = wasserstein_pow(s1.measures[i], s2.measures[i], p);
  }
  return out;
}

struct TestReport {
  std::vector<double> times;
  std::vector<double> estimates;
  std::vector<double> ses;
  std::vector<double> increment_means;  // paired E[X_{t+1} - X_t]
  std::vector<double> increment_ses;
  std::size_t n_samples = 0;
  bool pass = false;
  std::string verdict;
};

using SeriesPairSampler =
    std::function<std::pair<MvmSeries, MvmSeries>(std::uint64_t)>;

/// Estimates E[W_p^p(xi^1_t, xi^2_t)] at the checkpoint times and checks the
/// sequence is non-decreasing up to 3-SE slack on the paired increments.
inline TestReport submartingale_test(const SeriesPairSampler& sampler,
                                     const std::vector<double>& times,
                                     double p, std::size_t n_paths) {
  if (n_paths < 100) {
    throw std::invalid_argument("submartingale_test: n_paths must be >= 100");
  }
  if (times.size() < 2) {
    throw std::invalid_argument("submartingale_test: need >= 2 checkpoints");
  }
  const std::size_t nt = times.size();
  std::vector<std::vector<double>> samples(nt);  // [time][path]
  for (auto& s : samples) s.resize(n_paths);

  parallel_for(n_paths, [&](std::size_t i) {
    auto [s1, s2] = sampler(static_cast<std::uint64_t>(i));
    detail::require_aligned(s1, s2);
    for (std::size_t j = 0; j < nt; ++j) {
      std::size_t idx = s1.grid.index_of(times[j]);
      samples[j][i] = wasserstein_pow(s1.measures[idx], s2.measures[idx], p);
    }
  });

  TestReport rep;
  rep.times = times;
  rep.n_samples = n_paths;
  for (std::size_t j = 0; j < nt; ++j) {
    MeanSe ms = mean_se(samples[j]);
    rep.estimates.push_back(ms.mean);
    rep.ses.push_back(ms.se);
  }
  rep.pass = true;
  std::vector<double> incr(n_paths);
  for (std::size_t j = 0; j + 1 < nt; ++j) {
    for (std::size_t i = 0; i < n_paths; ++i) {
      incr[i] = samples[j + 1][i] - samples[j][i];
    }
    MeanSe ms = mean_se(incr);
    rep.increment_means.push_back(ms.mean);
    rep.increment_ses.push_back(ms.se);
    if (ms.mean < -3.0 * ms.se) rep.pass = false;
  }
  rep.verdict = rep.pass ? "PASS" : "FAIL";
  return rep;
}

enum class MartingaleKind { martingale, submartingale };

/// Samples the pair of measures of one scenario: branch == 0 follows the
/// base path; branch > 0 reuses the prefix up to the branch time and draws
/// fresh increments from a derived sub-stream.
using BranchSampler = std::function<std::pair<QuantileMeasure, QuantileMeasure>(
    std::uint64_t outer, std::uint64_t branch, double time)>;

/// For each outer path compares the branch-average of W_p^p at time t with
/// its value at time s; reports the mean conditional defect with its SE.
inline TestReport branching_martingale_test(const BranchSampler& sampler,
                                            double s, double t,
                                            std::size_t n_outer,
                                            std::size_t n_branch, double p,
                                            MartingaleKind kind) {
  if (t < s) throw std::invalid_argument("branching test: t < s");
  std::vector<double> defects(n_outer);
  parallel_for(n_outer, [&](std::size_t i) {
    auto o = static_cast<std::uint64_t>(i);
    auto [m1, m2] = sampler(o, 0, s);
    double at_s = wasserstein_pow(m1, m2, p);
    if (t == s) {
      defects[i] = 0.0;
      return;
    }
    double acc = 0.0;
    for (std::size_t b = 1; b <= n_branch; ++b) {
      auto [b1, b2] = sampler(o, static_cast<std::uint64_t>(b), t);
      acc += wasserstein_pow(b1, b2, p);
    }
    defects[i] = acc / static_cast<double>(n_branch) - at_s;
  });
  MeanSe ms = mean_se(defects);
  TestReport rep;
  rep.times = {s, t};
  rep.estimates = {ms.mean};
  rep.ses = {ms.se};
  rep.n_samples = n_outer;
  if (kind == MartingaleKind::martingale) {
    rep.pass = std::abs(ms.mean) <= 3.0 * std::max(ms.se, 1e-300);
  } else {
    rep.pass = ms.mean >= -3.0 * ms.se;
  }
  if (t == s) rep.pass = ms.mean == 0.0;
  rep.verdict = rep.pass ? "PASS" : "FAIL";
  return rep;
}

/// Max over independent scenario pairs of |W_1(xi_t(w), xi_t(w')) -
/// |M(xi_t(w)) - M(xi_t(w'))||; zero (to grid error) iff Lipschitz-Markov.
inline double lipschitz_markov_check(
    const std::function<QuantileMeasure(std::uint64_t)>& measure_at_t,
    std::size_t n_pairs) {
  std::vector<double> defects(n_pairs);
  parallel_for(n_pairs, [&](std::size_t i) {
    QuantileMeasure a = measure_at_t(2 * static_cast<std::uint64_t>(i));
    QuantileMeasure b = measure_at_t(2 * static_cast<std::uint64_t>(i) + 1);
    double w1 = wasserstein_1(a, b);
    defects[i] = std::abs(w1 - std::abs(a.mean() - b.mean()));
  });
  double mx = 0.0;
  for (double d : defects) mx = std::max(mx, d);
  return mx;
}

struct McEstimate {
  double estimate = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// MC estimate of E[ int_0^1 w(t) W_p^p(eta_t, xi_t) dt ] by per-path
/// trapezoidal quadrature.  The factory returns (eta series, xi series) on a
/// common [0,1] grid; each xi must start at mu (within start_tol in W_1).
inline McEstimate objective_opt1(
    const std::function<std::pair<MvmSeries, MvmSeries>(std::uint64_t)>&
        pair_factory,
    const QuantileMeasure& mu, const std::function<double(double)>& weight,
    double p, std::size_t n_paths, double start_tol = 1e-6) {
  std::vector<double> vals(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    auto [eta, xi] = pair_factory(static_cast<std::uint64_t>(i));
    detail::require_aligned(eta, xi);
    if (wasserstein_1(xi.measures.front(), mu) > start_tol) {
      throw std::invalid_argument("objective_opt1: xi_0 != mu");
    }
    auto w_of = [&](double t) {
      double w = weight(t);
      if (w < 0.0) {
        throw std::invalid_argument("objective_opt1: negative weight");
      }
      return w;
    };
    const TimeGrid& g = eta.grid;
    double acc = 0.0;
    double prev = w_of(g.time(0)) *
                  wasserstein_pow(eta.measures[0], xi.measures[0], p);
    for (std::size_t j = 1; j < eta.measures.size(); ++j) {
      double cur = w_of(g.time(j)) *
                   wasserstein_pow(eta.measures[j], xi.measures[j], p);
      acc += 0.5 * (prev + cur) * g.dt();
      prev = cur;
    }
    vals[i] = acc;
  });
  MeanSe ms = mean_se(vals);
  return {ms.mean, ms.se, n_paths};
}

/// The w = delta_1 case of the first objective: E[W_p^p at the terminal
/// time], evaluated exactly at t = 1 instead of through a bump weight.
inline McEstimate objective_opt1_terminal(
    const std::function<std::pair<MvmSeries, MvmSeries>(std::uint64_t)>&
        pair_factory,
    double p, std::size_t n_paths) {
  std::vector<double> vals(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    auto [eta, xi] = pair_factory(static_cast<std::uint64_t>(i));
    vals[i] = wasserstein_pow(eta.measures.back(), xi.measures.back(), p);
  });
  MeanSe ms = mean_se(vals);
  return {ms.mean, ms.se, n_paths};
}

/// Normalized bump of the given width with unit integral, ending at t = 1.
inline std::function<double(double)> make_bump_weight(double width = 0.02) {
  return [width](double t) {
    return t >= 1.0 - width ? 1.0 / width : 0.0;
  };
}

}  // namespace mvmlab
