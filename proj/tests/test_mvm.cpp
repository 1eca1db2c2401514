#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mvmlab/math.hpp"
#include "mvmlab/measure.hpp"
#include "mvmlab/mvm.hpp"
#include "mvmlab/stochastic.hpp"

using namespace mvmlab;

namespace {
constexpr std::size_t kM = 2048;

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - b[i]));
  }
  return d;
}
}  // namespace

TEST_CASE("eta_at states", "[mvm]") {
  auto init = eta_at({0.0, 1.0}, kM);
  CHECK(init.values() == QuantileMeasure::gaussian(0.0, 1.0, kM).values());

  auto terminated = eta_at({0.7, 0.0}, kM);
  CHECK(terminated.is_dirac());
  CHECK(terminated.mean() == Catch::Approx(0.7).margin(1e-14));

  auto mid = eta_at({1.0, 0.25}, kM);
  CHECK(mid.mean() == Catch::Approx(1.0).margin(1e-12));
  // Grid std is exactly 0.5 x the std of the standard normal grid; the
  // residual against 0.5 itself is the quantile-truncation bias ~ log(M)/M.
  double z2 = QuantileMeasure::gaussian(0.0, 1.0, kM).variance();
  CHECK(std::sqrt(mid.variance()) ==
        Catch::Approx(0.5 * std::sqrt(z2)).margin(1e-12));
  CHECK(std::sqrt(mid.variance()) == Catch::Approx(0.5).margin(4.0e-3));

  CHECK_THROWS_AS(eta_at({0.0, -0.1}, kM), std::invalid_argument);
}

TEST_CASE("bass scale function", "[mvm]") {
  auto h1 = bass_scale(QuantileMeasure::gaussian(0.0, 1.0, kM));
  for (double z : {-3.0, -1.2, 0.0, 0.4, 2.7}) {
    CHECK(h1(z) == Catch::Approx(z).margin(1e-3));
  }

  auto h2 = bass_scale(QuantileMeasure::gaussian(0.0, 4.0, kM));
  for (double z : {-2.5, -0.3, 0.0, 1.0, 3.0}) {
    CHECK(h2(z) == Catch::Approx(2.0 * z).margin(2e-3));
  }

  auto hu = bass_scale(QuantileMeasure::uniform(-1.0, 1.0, kM));
  for (double z : {-3.2, -1.0, 0.0, 0.5, 2.0, 3.2}) {
    CHECK(std::abs(hu(z) - (2.0 * normal_cdf(z) - 1.0)) <= 2.0 / kM);
  }

  CHECK_THROWS_AS(bass_scale(QuantileMeasure::two_point(-1.0, 1.0, kM)),
                  std::invalid_argument);
  CHECK_THROWS_AS(bass_scale(QuantileMeasure::gaussian(1.0, 1.0, kM)),
                  std::invalid_argument);
}

TEST_CASE("bass state measures", "[mvm]") {
  auto mu = QuantileMeasure::uniform(-1.0, 1.0, kM);
  auto h = bass_scale(mu);
  auto xi0 = bass_mvm_at(h, {0.0, 1.0}, kM);
  CHECK(max_abs_diff(xi0.values(), mu.values()) <= 1e-12);

  auto term = bass_mvm_at(h, {0.8, 0.0}, kM);
  CHECK(term.is_dirac());
  CHECK(term.mean() == Catch::Approx(h(0.8)));

  auto h2 = bass_scale(QuantileMeasure::gaussian(0.0, 4.0, kM));
  for (double b : {-1.0, 0.0, 0.6}) {
    auto m = bass_mvm_at(h2, {b, 0.5}, kM);
    CHECK(m.mean() == Catch::Approx(2.0 * b).margin(1e-9));
  }
}

TEST_CASE("bass series along a path", "[mvm]") {
  auto mu = QuantileMeasure::gaussian(0.0, 4.0, kM);
  TimeGrid grid(0.0, 1.0, 512);
  auto path = simulate_brownian(grid, 0.0, RngStream(101, 5));
  auto series = bass_mvm_series(mu, path, kM);

  CHECK(max_abs_diff(series.measures.front().values(), mu.values()) <= 1e-12);
  CHECK(series.measures.back().is_dirac());
  CHECK(series.termination_index == grid.n_steps);

  // Linear scale: the mean process is 2 B_t up to the tail-clamp grid error
  // (quantile entries beyond the tabulated range stick to the table ends).
  for (std::size_t i = 0; i <= grid.n_steps; ++i) {
    CHECK(series.means[i] ==
          Catch::Approx(2.0 * path.values[i])
              .margin(1e-3 * (1.0 + std::abs(path.values[i]))));
  }
}

TEST_CASE("bass terminal law embeds mu", "[mvm][mc]") {
  auto mu = QuantileMeasure::uniform(-1.0, 1.0, kM);
  auto h = bass_scale(mu);

  // One series spot-check: terminal measure is the Dirac at h(B_1)...
  TimeGrid grid(0.0, 1.0, 64);
  auto path = simulate_brownian(grid, 0.0, RngStream(77, 0));
  auto series = bass_mvm_series(h, path, 256);
  CHECK(series.measures.back().mean() == Catch::Approx(h(path.back())));

  // ...so terminal draws are h(B_1) and should follow mu in KS distance.
  const std::size_t n_paths = 100000;
  std::vector<double> draws(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) {
    RngStream s(77, i);
    draws[i] = h(s.next_normal());
  }
  double ks = ks_statistic(draws, [](double x) {
    return std::min(1.0, std::max(0.0, 0.5 * (x + 1.0)));
  });
  CHECK(ks <= 0.01);
}

TEST_CASE("martingale property of constructed means", "[mvm][mc]") {
  auto mu = QuantileMeasure::uniform(-2.0, 2.0, 256);
  auto h = bass_scale(mu);
  TimeGrid grid(0.0, 1.0, 32);
  const std::size_t n_paths = 2000;
  for (std::size_t checkpoint : {8ul, 16ul, 31ul}) {
    std::vector<double> diffs(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
      auto path = simulate_brownian(grid, 0.0, RngStream(900, i));
      auto series = bass_mvm_series(h, path, 256);
      diffs[i] = series.means[checkpoint] - series.means[0];
    }
    auto ms = mean_se(diffs);
    CHECK(std::abs(ms.mean) <= 3.0 * ms.se);
  }
}

TEST_CASE("natural time re-clocks by the mean's quadratic variation",
          "[mvm]") {
  auto mu = QuantileMeasure::gaussian(0.0, 4.0, 512);
  TimeGrid grid(0.0, 1.0, 2048);

  double slope_acc = 0.0;
  const int n_rep = 8;
  for (int rep = 0; rep < n_rep; ++rep) {
    auto path = simulate_brownian(grid, 0.0, RngStream(300, rep));
    auto series = bass_mvm_series(mu, path, 512);
    auto natural = natural_time(series);

    auto clock = quadratic_variation(series.means);
    CHECK(natural.grid.t_end == Catch::Approx(clock.back()));

    auto nqv = quadratic_variation(natural.means);
    slope_acc += nqv.back() / natural.grid.t_end;
  }
  CHECK(slope_acc / n_rep == Catch::Approx(1.0).margin(0.1));

  // h = identity: natural time is canonical time (unit QV rate).
  auto mu1 = QuantileMeasure::gaussian(0.0, 1.0, 512);
  auto path = simulate_brownian(grid, 0.0, RngStream(301, 0));
  auto series = bass_mvm_series(mu1, path, 512);
  auto natural = natural_time(series);
  CHECK(natural.grid.t_end == Catch::Approx(1.0).margin(0.15));
  std::size_t mid_n = natural.grid.index_of(0.4);
  std::size_t mid_c = series.grid.index_of(0.4);
  CHECK(wasserstein_1(natural.measures[mid_n], series.measures[mid_c]) < 0.1);
}

TEST_CASE("bass mean via two independent routes", "[mvm]") {
  for (auto mu : {QuantileMeasure::gaussian(0.0, 4.0, kM),
                  QuantileMeasure::uniform(-1.0, 1.0, kM)}) {
    auto h = bass_scale(mu);
    double scale = std::max(1.0, std::abs(mu.max_support()));
    for (double b : {-1.5, -0.2, 0.0, 0.9}) {
      for (double s2 : {1.0, 0.5, 0.1, 0.01}) {
        double grid_mean = bass_mvm_at(h, {b, s2}, kM).mean();
        double direct = scale_gaussian_mean(h, b, s2);
        CHECK(std::abs(grid_mean - direct) <= 1e-6 * scale);
      }
    }
  }
}

TEST_CASE("AY barycentre tables", "[mvm]") {
  auto mu = QuantileMeasure::uniform(-1.0, 1.0, kM);
  auto emb = ay_barycentre(mu);

  // Analytic solution for U[-1,1]: pi(x) = x and psi(x) = 2x - 1 on [0,1).
  for (double x : {0.05, 0.2, 0.5, 0.8, 0.95}) {
    CHECK(emb.pi(x) == Catch::Approx(x).margin(2e-3));
    CHECK(emb.psi(x) == Catch::Approx(2.0 * x - 1.0).margin(4e-3));
  }
  CHECK(emb.psi(emb.sup_support()) == emb.sup_support());

  // Two-point diagnostic mode: pi(x) = x/(1+x), psi(x) = -1 below the top.
  auto two = QuantileMeasure::two_point(-1.0, 1.0, kM);
  auto demb = ay_barycentre(two, 1024, /*allow_atoms=*/true);
  for (double x : {0.1, 0.4, 0.7, 0.9}) {
    CHECK(demb.pi(x) == Catch::Approx(x / (1.0 + x)).margin(2e-3));
    CHECK(demb.psi(x) == -1.0);
  }

  CHECK_THROWS_AS(ay_barycentre(two), std::invalid_argument);
  CHECK_THROWS_AS(ay_barycentre(QuantileMeasure::uniform(0.0, 1.0, kM)),
                  std::invalid_argument);
}

TEST_CASE("AY state measures", "[mvm]") {
  auto mu = QuantileMeasure::uniform(-1.0, 1.0, kM);
  auto emb = ay_barycentre(mu);

  AyState start{&emb, 0.0, 0.0, false, 0.0};
  auto xi0 = ay_mvm_at(start, kM);
  CHECK(wasserstein_1(xi0, mu) <= 2e-3);

  AyState stopped{&emb, 1.5, -1.0, true, -1.0};
  auto term = ay_mvm_at(stopped, kM);
  CHECK(term.is_dirac());
  CHECK(term.mean() == -1.0);

  // S = 0.5, B = 0.25: mixture of delta_0 and U[0,1] with equal weights;
  // the mean must equal the Brownian value.
  AyState st{&emb, 0.5, 0.25, false, 0.0};
  auto mix = ay_mvm_at(st, kM);
  CHECK(mix.mean() == Catch::Approx(0.25).margin(4e-3));
  std::size_t at_zero = 0;
  for (double v : mix.values()) {
    if (std::abs(v) < 5e-3) ++at_zero;
  }
  CHECK(static_cast<double>(at_zero) / kM == Catch::Approx(0.5).margin(0.01));
  CHECK(mix.max_support() <= 1.0 + 1e-12);
}

TEST_CASE("AY series: mean matches the Brownian value before stopping",
          "[mvm]") {
  auto mu = QuantileMeasure::uniform(-1.0, 1.0, kM);
  auto emb = ay_barycentre(mu);
  TimeGrid grid(0.0, 8.0, 8192);
  std::size_t checked = 0;
  for (int rep = 0; rep < 4; ++rep) {
    auto path = simulate_brownian(grid, 0.0, RngStream(410, rep));
    auto series = ay_mvm_series(emb, path, kM, 32);
    for (std::size_t j = 0; j < series.measures.size(); ++j) {
      if (j >= series.termination_index) break;
      CHECK(series.means[j] ==
            Catch::Approx(path.values[j * 32]).margin(5e-3));
      ++checked;
    }
    // Support shrinkage along the series.  The lower edge is psi(S), exact;
    // the upper edge of the M-grid mixture representation wobbles by a few
    // quantile cells as the Dirac weight moves, so it gets a grid tolerance.
    const double cell_tol = 0.01 * (mu.max_support() - mu.min_support());
    double run_min = series.measures[0].min_support();
    double run_max = series.measures[0].max_support();
    for (std::size_t j = 1; j < series.measures.size(); ++j) {
      CHECK(series.measures[j].min_support() >= run_min - 1e-9);
      CHECK(series.measures[j].max_support() <= run_max + cell_tol);
      run_min = std::max(run_min, series.measures[j].min_support());
      run_max = std::min(run_max, series.measures[j].max_support() + cell_tol);
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("AY terminal draws embed mu", "[mvm][mc]") {
  auto mu = QuantileMeasure::uniform(-1.0, 1.0, 512);
  auto emb = ay_barycentre(mu, 2048);
  TimeGrid grid(0.0, 16.0, 131072);
  const std::size_t n_paths = 20000;
  std::vector<double> draws;
  draws.reserve(n_paths);
  std::size_t unstopped = 0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    double s_max = 0.0;
    bool stopped = false;
    RngStream stream(500, i);
    const double sdt = std::sqrt(grid.dt());
    double b = 0.0;
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
      b += sdt * stream.next_normal();
      s_max = std::max(s_max, b);
      if (s_max >= emb.sup_support() || b <= emb.psi(s_max)) {
        draws.push_back(s_max >= emb.sup_support() ? emb.sup_support()
                                                   : emb.psi(s_max));
        stopped = true;
        break;
      }
    }
    if (!stopped) ++unstopped;
  }
  CHECK(static_cast<double>(unstopped) / n_paths < 0.01);
  double ks = ks_statistic(draws, [](double x) {
    return std::min(1.0, std::max(0.0, 0.5 * (x + 1.0)));
  });
  // Grid monitoring of the running maximum biases the embedding by
  // O(sqrt(dt)); dt = 1/2048 keeps it inside this band.
  CHECK(ks <= 0.03);
}
