#pragma once

// One-dimensional probability measures carried by their quantile function
// sampled at the M midpoint levels q_k = (k - 1/2)/M.  All transforms that
// matter here (pushforward by monotone maps, Wasserstein distances, means,
// potentials) are cheap and exact-to-grid in this representation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvmlab/math.hpp"

namespace mvmlab {

inline constexpr std::size_t kDefaultGridSize = 2048;

class QuantileMeasure {
 public:
  /// Takes ownership of a non-decreasing, finite quantile table.
  explicit QuantileMeasure(std::vector<double> values)
      : values_(std::move(values)) {
    if (values_.empty()) {
      throw std::invalid_argument("QuantileMeasure: empty quantile table");
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k])) {
        throw std::invalid_argument("QuantileMeasure: non-finite entry");
      }
      if (k > 0 && values_[k] < values_[k - 1]) {
        throw std::invalid_argument("QuantileMeasure: values not sorted");
      }
    }
  }

  static QuantileMeasure point_mass(double x, std::size_t m = kDefaultGridSize) {
    return QuantileMeasure(std::vector<double>(m, x));
  }

  /// Equal-weight two-point law at {a, b}; m must be even.
  static QuantileMeasure two_point(double a, double b,
                                   std::size_t m = kDefaultGridSize) {
    if (m % 2 != 0) throw std::invalid_argument("two_point: m must be even");
    if (a > b) std::swap(a, b);
    std::vector<double> v(m, a);
    std::fill(v.begin() + static_cast<std::ptrdiff_t>(m / 2), v.end(), b);
    return QuantileMeasure(std::move(v));
  }

  static QuantileMeasure gaussian(double mean, double variance,
                                  std::size_t m = kDefaultGridSize) {
    if (variance < 0.0) throw std::invalid_argument("gaussian: variance < 0");
    if (variance == 0.0) return point_mass(mean, m);
    const double sd = std::sqrt(variance);
    std::vector<double> v(m);
    for (std::size_t k = 0; k < m; ++k) {
      double q = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
      v[k] = mean + sd * normal_quantile(q);
    }
    // Enforce exact symmetry so that the mean of a centred grid is 0.
    for (std::size_t k = 0; k < m / 2; ++k) {
      double w = 0.5 * (v[m - 1 - k] - v[k]);
      v[k] = mean - w;
      v[m - 1 - k] = mean + w;
    }
    return QuantileMeasure(std::move(v));
  }

  static QuantileMeasure uniform(double a, double b,
                                 std::size_t m = kDefaultGridSize) {
    if (a > b) std::swap(a, b);
    std::vector<double> v(m);
    for (std::size_t k = 0; k < m; ++k) {
      double q = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
      v[k] = a + q * (b - a);
    }
    return QuantileMeasure(std::move(v));
  }

  /// Builds the quantile table of a discrete law given by atom positions and
  /// non-negative weights (not necessarily normalized or sorted).
  static QuantileMeasure from_atoms(std::vector<double> xs,
                                    std::vector<double> ws,
                                    std::size_t m = kDefaultGridSize) {
    if (xs.size() != ws.size() || xs.empty()) {
      throw std::invalid_argument("from_atoms: bad atom arrays");
    }
    std::vector<std::size_t> idx(xs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
    double total = 0.0;
    for (double w : ws) {
      if (w < 0.0) throw std::invalid_argument("from_atoms: negative weight");
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("from_atoms: zero mass");
    std::vector<double> v(m);
    std::size_t pos = 0;
    double cum = ws[idx[0]] / total;
    for (std::size_t k = 0; k < m; ++k) {
      double q = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
      while (cum < q && pos + 1 < idx.size()) {
        ++pos;
        cum += ws[idx[pos]] / total;
      }
      v[k] = xs[idx[pos]];
    }
    return QuantileMeasure(std::move(v));
  }

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }

  double mean() const {
    // Neumaier-compensated sum: martingale testers difference means across
    // thousands of states, so accumulation noise matters.
    double s = 0.0, c = 0.0;
    for (double v : values_) {
      double t = s + v;
      c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
      s = t;
    }
    return (s + c) / static_cast<double>(values_.size());
  }

  double variance() const {
    double m = mean(), s = 0.0;
    for (double v : values_) s += (v - m) * (v - m);
    return s / static_cast<double>(values_.size());
  }

  double min_support() const { return values_.front(); }
  double max_support() const { return values_.back(); }

  /// Right-continuous quantile: F^{-1}_+(q) = inf{x : F(x) > q}.
  double quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) {
      throw std::invalid_argument("quantile: q must lie in (0,1)");
    }
    auto m = static_cast<double>(values_.size());
    auto j = static_cast<std::size_t>(std::floor(q * m));
    if (j >= values_.size()) j = values_.size() - 1;
    return values_[j];
  }

  /// CDF of the grid law: fraction of table entries <= x.
  double cdf(double x) const {
    auto it = std::upper_bound(values_.begin(), values_.end(), x);
    return static_cast<double>(it - values_.begin()) /
           static_cast<double>(values_.size());
  }

  /// True when the table carries a repeated value, i.e. an atom of mass
  /// >= 2/M.  Constructions whose hypotheses require atomless inputs
  /// (Bass scale, AY barycentre) reject such measures.
  bool has_atoms() const {
    for (std::size_t k = 1; k < values_.size(); ++k) {
      if (values_[k] == values_[k - 1]) return true;
    }
    return false;
  }

  bool is_dirac(double tol = 0.0) const {
    return values_.back() - values_.front() <= tol;
  }

  /// Re-evaluates the quantile table on a grid of m midpoint levels.
  QuantileMeasure resampled(std::size_t m) const {
    if (m == values_.size()) return *this;
    std::vector<double> v(m);
    for (std::size_t k = 0; k < m; ++k) {
      double q = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
      v[k] = quantile(q);
    }
    return QuantileMeasure(std::move(v));
  }

 private:
  std::vector<double> values_;
};

enum class MapKind { monotone, general };

/// Pushforward f_# mu.  Monotone maps act entry-wise on the quantile table;
/// general maps additionally re-sort the image.
inline QuantileMeasure pushforward(const QuantileMeasure& mu,
                                   const std::function<double(double)>& f,
                                   MapKind kind = MapKind::monotone) {
  std::vector<double> v(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) v[k] = f(mu.values()[k]);
  if (kind == MapKind::general) {
    std::sort(v.begin(), v.end());
  } else {
    for (std::size_t k = 1; k < v.size(); ++k) {
      if (v[k] < v[k - 1]) {
        throw std::invalid_argument(
            "pushforward: map is not non-decreasing; use MapKind::general");
      }
    }
  }
  return QuantileMeasure(std::move(v));
}

namespace detail {
inline std::pair<QuantileMeasure, QuantileMeasure> common_grid(
    const QuantileMeasure& mu, const QuantileMeasure& nu) {
  if (mu.size() == nu.size()) return {mu, nu};
  std::size_t m = std::max(mu.size(), nu.size());
  return {mu.resampled(m), nu.resampled(m)};
}
}  // namespace detail

/// W_p^p via the monotone coupling, optimal in one dimension for p >= 1.
inline double wasserstein_pow(const QuantileMeasure& mu,
                              const QuantileMeasure& nu, double p) {
  if (p < 1.0) throw std::invalid_argument("wasserstein: p < 1");
  if (mu.size() != nu.size()) {
    auto [a, b] = detail::common_grid(mu, nu);
    return wasserstein_pow(a, b, p);
  }
  const auto& x = mu.values();
  const auto& y = nu.values();
  double s = 0.0;
  if (p == 1.0) {
    for (std::size_t k = 0; k < x.size(); ++k) s += std::abs(x[k] - y[k]);
  } else if (p == 2.0) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      double d = x[k] - y[k];
      s += d * d;
    }
  } else {
    for (std::size_t k = 0; k < x.size(); ++k) {
      s += std::pow(std::abs(x[k] - y[k]), p);
    }
  }
  return s / static_cast<double>(x.size());
}

inline double wasserstein_p(const QuantileMeasure& mu,
                            const QuantileMeasure& nu, double p) {
  return std::pow(wasserstein_pow(mu, nu, p), 1.0 / p);
}

inline double wasserstein_1(const QuantileMeasure& mu,
                            const QuantileMeasure& nu) {
  return wasserstein_pow(mu, nu, 1.0);
}

/// Potential function U_mu(x) = -int |x-y| mu(dy); concave and 1-Lipschitz.
inline double potential(const QuantileMeasure& mu, double x) {
  double s = 0.0;
  for (double v : mu.values()) s += std::abs(x - v);
  return -s / static_cast<double>(mu.size());
}

/// Uniform density grid used for total-variation computations.
struct DensityGrid {
  std::vector<double> xs;
  std::vector<double> density;
  double h = 0.0;

  DensityGrid(double x_min, double x_max, std::size_t n,
              const std::function<double(double)>& f) {
    if (n < 2 || !(x_max > x_min)) {
      throw std::invalid_argument("DensityGrid: bad grid");
    }
    h = (x_max - x_min) / static_cast<double>(n - 1);
    xs.resize(n);
    density.resize(n);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = x_min + static_cast<double>(i) * h;
      density[i] = f(xs[i]);
      if (density[i] < 0.0) {
        throw std::invalid_argument("DensityGrid: negative density");
      }
      mass += density[i] * h;
    }
    if (std::abs(mass - 1.0) > 1e-9) {
      throw std::invalid_argument("DensityGrid: mass " + std::to_string(mass) +
                                  " not within 1e-9 of 1");
    }
  }

  static DensityGrid gaussian(double variance, double x_min, double x_max,
                              std::size_t n) {
    double sd = std::sqrt(variance);
    return DensityGrid(x_min, x_max, n, [sd](double x) {
      return normal_pdf(x / sd) / sd;
    });
  }
};

/// Total variation distance (1/2) int |f - g| on a shared grid.
inline double tv_distance(const DensityGrid& f, const DensityGrid& g) {
  if (f.xs.size() != g.xs.size() || f.h != g.h ||
      f.xs.front() != g.xs.front()) {
    throw std::invalid_argument("tv_distance: mismatched grids");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < f.density.size(); ++i) {
    s += std::abs(f.density[i] - g.density[i]);
  }
  return 0.5 * s * f.h;
}

/// KS distance between an empirical sample and the grid measure's CDF.
inline double ks_to_measure(std::vector<double>& sample,
                            const QuantileMeasure& mu) {
  return ks_statistic(sample, [&](double x) { return mu.cdf(x); });
}

}  // namespace mvmlab
