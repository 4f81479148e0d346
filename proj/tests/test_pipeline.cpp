#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "nilm/error.hpp"
#include "nilm/pipeline.hpp"
#include "nilm/rng.hpp"

using namespace nilm;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::invalid_argument;
}

PowerSeries series(std::vector<double> v) { return PowerSeries::from_values(0, 8, std::move(v)); }

PowerSeries random_series(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return series(std::move(v));
}

const NormStats kStats{600.0, 400.0, 2000.0, 200.0, 10.0};

}  // namespace

TEST_CASE("fit_norm_stats: hand cases") {
  const std::vector<PowerSeries> agg = {series({100, 300, 500, 700})};
  const std::vector<PowerSeries> app = {series({0, 1800, 2200, 0})};
  const NormStats s = fit_norm_stats(agg, app);
  CHECK(s.agg_mean == 400.0);
  CHECK(s.agg_std == doctest::Approx(std::sqrt(50000.0)));
  CHECK(s.on_mean == 2000.0);
  CHECK(s.on_std == 200.0);
  CHECK(s.on_threshold == 10.0);

  SUBCASE("invalid samples are ignored") {
    PowerSeries a = series({100, 300, 99999});
    a.valid[2] = 0;
    PowerSeries y = series({0, 1800, 2200, 99999});
    y.valid[3] = 0;
    const std::vector<PowerSeries> aggs = {a};
    const std::vector<PowerSeries> apps = {y};
    const NormStats t = fit_norm_stats(aggs, apps);
    CHECK(t.agg_mean == 200.0);
    CHECK(t.on_mean == 2000.0);
  }
}

TEST_CASE("fit_norm_stats: degenerate cases") {
  const std::vector<PowerSeries> flat_agg = {series({500, 500, 500})};
  const std::vector<PowerSeries> app = {series({0, 1800, 2200})};
  CHECK(code_of([&] { fit_norm_stats(flat_agg, app); }) == Errc::degenerate_std);

  const std::vector<PowerSeries> agg = {series({100, 300, 500, 700})};
  const std::vector<PowerSeries> flat_on = {series({0, 0, 2000, 2000})};
  CHECK(code_of([&] { fit_norm_stats(agg, flat_on); }) == Errc::degenerate_std);

  const std::vector<PowerSeries> never_on = {series({0, 5, 10, 0})};
  CHECK(code_of([&] { fit_norm_stats(agg, never_on); }) == Errc::cannot_fit);
}

TEST_CASE("s2p normalization") {
  std::vector<double> w(5, kStats.agg_mean);
  s2p_standardize(w, kStats);
  for (double x : w) CHECK(x == 0.0);
  std::vector<double> one = {kStats.agg_mean + kStats.agg_std};
  s2p_standardize(one, kStats);
  CHECK(one[0] == 1.0);
  CHECK(s2p_target(2200, kStats) == 1.0);
  CHECK(s2p_target_inverse(s2p_target(1234.5, kStats), kStats) == doctest::Approx(1234.5).epsilon(1e-12));

  Rng rng(1);
  std::vector<double> x(300);
  for (auto& v : x) v = rng.uniform(0, 5000);
  std::vector<double> y = x;
  s2p_standardize(y, kStats);
  s2p_destandardize(y, kStats);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) <= 1e-6 * std::max(1.0, std::abs(x[i])));

  NormStats bad = kStats;
  bad.agg_std = 0.0;
  CHECK(code_of([&] { s2p_standardize(x, bad); }) == Errc::degenerate_std);
}

TEST_CASE("fcn normalization") {
  std::vector<double> c(7, 321.0);
  fcn_normalize(c, kStats);
  for (double x : c) CHECK(x == 0.0);
  CHECK(fcn_target(kStats.on_mean, kStats) == 1.0);
  CHECK(fcn_target_inverse(fcn_target(987.0, kStats), kStats) == doctest::Approx(987.0).epsilon(1e-12));

  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(200);
    for (auto& v : x) v = rng.uniform(50, 4000);
    const double offset = rng.uniform(1, 1000);
    std::vector<double> shifted = x;
    for (auto& v : shifted) v += offset;
    std::vector<double> a = x;
    const double mean = fcn_normalize(a, kStats);
    fcn_normalize(shifted, kStats);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(a[i] - shifted[i]) <= 1e-9);
    fcn_denormalize(a, mean, kStats);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(a[i] - x[i]) <= 1e-6 * x[i]);
  }

  std::vector<double> zero(4, 0.0);
  CHECK(code_of([&] { fcn_normalize(zero, kStats); }) == Errc::degenerate_window);
}

TEST_CASE("fcn geometry") {
  const WindowGeometry g = fcn_geometry(2053);
  CHECK(g.output_len == 2053);
  CHECK(g.input_len == 4105);
  CHECK(g.input_len - g.output_len == 2052);
  CHECK(g.stride == 2053);
  CHECK(g.context_left == 1026);
  CHECK(g.context_right() == 1026);
  const WindowGeometry s = s2p_geometry(599);
  CHECK(s.output_len == 1);
  CHECK(s.midpoint_offset == 299);
  CHECK_THROWS_AS(s2p_geometry(600), Error);
}

TEST_CASE("make_fcn_windows: tiling") {
  Rng rng(3);
  const WindowGeometry g = fcn_geometry(2053);
  const PowerSeries agg = random_series(rng, 4106, 100, 3000);
  const PowerSeries app = random_series(rng, 4106, 0, 100);
  const WindowBatch b = make_fcn_windows(agg, app, g);
  REQUIRE(b.windows.size() == 2);
  CHECK(b.windows[0].output_start == 0);
  CHECK(b.windows[1].output_start == 2053);
  CHECK(b.padded_aggregate.size() == 2053 + 4105);
  // Replicated edges.
  CHECK(b.padded_aggregate[0] == agg.values.front());
  CHECK(b.padded_aggregate[1025] == agg.values.front());
  CHECK(b.padded_aggregate[1026] == agg.values[0]);
  CHECK(b.padded_aggregate.back() == agg.values.back());
  CHECK(b.valid_window_count() == 2);

  std::vector<std::uint8_t> mask;
  const FeatureMap<double> y = window_target<double>(b, 1, kStats, mask);
  // 4106 = 2 * 2053: every target is real, only the right input context is padded.
  CHECK(std::count(mask.begin(), mask.end(), 1) == 2053);
  CHECK(b.padded_aggregate[1026 + 4106] == agg.values.back());
  CHECK(y(0, 0) == fcn_target(app.values[2053], kStats));

  CHECK(code_of([&] { make_fcn_windows(series(std::vector<double>(2052, 1.0)), series(std::vector<double>(2052, 1.0)), g); }) ==
        Errc::too_short);
}

TEST_CASE("make_fcn_windows: partition and validity flags") {
  Rng rng(4);
  const WindowGeometry g = fcn_geometry(21, 50);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50 + rng.below(1000);
    PowerSeries agg = random_series(rng, n, 100, 3000);
    PowerSeries app = random_series(rng, n, 0, 100);
    for (std::size_t k = 0; k < 3; ++k) app.valid[rng.below(n)] = 0;
    const WindowBatch b = make_fcn_windows(agg, app, g);
    std::vector<int> cover(n, 0);
    for (const Window& w : b.windows) {
      bool any_invalid = false;
      for (std::size_t i = w.output_start; i < std::min(n, w.output_start + g.output_len); ++i) {
        ++cover[i];
        any_invalid = any_invalid || !app.valid[i];
      }
      CHECK(w.valid == !any_invalid);
    }
    for (int c : cover) CHECK(c == 1);
  }
}

TEST_CASE("make_fcn_windows: concatenated window outputs equal the whole-sequence pass") {
  const NetworkSpec spec = build_fcn({3, 3, 3, 2});
  const std::size_t rf = receptive_field(spec);
  const auto params = init_params<double>(spec, 5);
  Rng rng(6);
  const std::size_t n = 300;
  const WindowGeometry g = fcn_geometry(rf);
  const PowerSeries agg = random_series(rng, n, 100, 3000);
  const WindowBatch b = make_fcn_windows(agg, agg, g);

  FeatureMap<double> whole(1, b.padded_aggregate.size());
  for (std::size_t i = 0; i < whole.length(); ++i) whole(0, i) = b.padded_aggregate[i] / 1000.0;
  const FeatureMap<double> full = forward(spec, params, whole);
  for (const Window& w : b.windows) {
    FeatureMap<double> x(1, g.input_len);
    for (std::size_t i = 0; i < g.input_len; ++i) x(0, i) = whole(0, w.output_start + i);
    const FeatureMap<double> y = forward(spec, params, x);
    REQUIRE(y.length() == g.output_len);
    for (std::size_t j = 0; j < g.output_len && w.output_start + j < n; ++j) {
      CHECK(y(0, j) == full(0, w.output_start + j));
    }
  }
}

TEST_CASE("make_s2p_windows") {
  Rng rng(7);
  const WindowGeometry g = s2p_geometry(599);
  SUBCASE("599 samples: one interior window at the midpoint") {
    const PowerSeries agg = random_series(rng, 599, 100, 3000);
    const WindowBatch b = make_s2p_windows(agg, agg, g);
    CHECK(b.windows.size() == 599);
    std::size_t interior = 0, which = 0;
    for (std::size_t w = 0; w < b.windows.size(); ++w) {
      // Input covers padded[start, start + 599); the series sits at [299, 299 + 599).
      if (b.windows[w].output_start >= 299 && b.windows[w].output_start + 599 <= 299 + 599) {
        ++interior;
        which = w;
      }
    }
    CHECK(interior == 1);
    CHECK(which == 299);
    for (std::size_t i = 0; i < 599; ++i) CHECK(b.padded_aggregate[b.windows[299].output_start + i] == agg.values[i]);
  }
  SUBCASE("one prediction per valid sample") {
    PowerSeries agg = random_series(rng, 2000, 100, 3000);
    PowerSeries app = random_series(rng, 2000, 0, 100);
    for (int k = 0; k < 40; ++k) app.valid[rng.below(2000)] = 0;
    const WindowBatch b = make_s2p_windows(agg, app, g);
    std::size_t valid_targets = 0;
    for (std::size_t i = 0; i < 2000; ++i) valid_targets += app.valid[i];
    CHECK(b.valid_window_count() == valid_targets);
    std::vector<std::uint8_t> mask;
    const FeatureMap<double> y = window_target<double>(b, 1234, kStats, mask);
    CHECK(y.length() == 1);
    if (app.valid[1234]) CHECK(y(0, 0) == s2p_target(app.values[1234], kStats));
  }
  SUBCASE("input gets model zero padding") {
    S2pConfig cfg;
    cfg.window = 31;
    cfg.stages = {{2, 5}, {2, 3}};
    cfg.hidden_units = 4;
    const NetworkSpec spec = build_s2p(cfg);
    const PowerSeries agg = random_series(rng, 100, 100, 3000);
    const WindowBatch b = make_s2p_windows(agg, agg, s2p_geometry(31));
    const FeatureMap<double> x = window_input<double>(b, 50, spec, kStats);
    const auto [left, right] = s2p_padding(spec);
    CHECK(x.length() == left + 31 + right);
    CHECK(x(0, 0) == 0.0);
    CHECK(x(0, left + 15) == doctest::Approx((agg.values[50] - kStats.agg_mean) / kStats.agg_std));
  }
}
