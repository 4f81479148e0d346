#include <doctest.h>

#include <cmath>
#include <vector>

#include "nilm/preprocess.hpp"
#include "nilm/rng.hpp"
#include "nilm/error.hpp"

using namespace nilm;

namespace {

RawSeries raw(std::vector<std::int64_t> t, std::vector<double> v, SensorKind k = SensorKind::aggregate) {
  RawSeries s;
  s.timestamps = std::move(t);
  s.values = std::move(v);
  s.kind = k;
  return s;
}

double value_at(const PowerSeries& s, std::int64_t t) { return s.values.at(static_cast<std::size_t>((t - s.start_time) / s.interval)); }
bool valid_at(const PowerSeries& s, std::int64_t t) { return s.valid.at(static_cast<std::size_t>((t - s.start_time) / s.interval)) != 0; }

}  // namespace

TEST_CASE("merge_aggregate: 4 kW switch and gap filling") {
  const RawSeries s30 = raw({0, 6, 12, 24}, {3500, 4900, 700, 300}, SensorKind::aggregate_30A);
  const RawSeries s100 = raw({0, 6, 12, 18, 24}, {3600, 5000, 720, 1200, 310}, SensorKind::aggregate_100A);
  const RawSeries m = merge_aggregate(s30, s100);
  CHECK(m.timestamps == std::vector<std::int64_t>{0, 6, 12, 18, 24});
  CHECK(m.values == std::vector<double>{3500, 5000, 700, 1200, 300});
}

TEST_CASE("merge_aggregate: nearest-neighbour join within half the 100 A spacing") {
  // 100 A every 6 s with a hole over (12, 30); t=21 is 9 s from both neighbours.
  const RawSeries s30 = raw({2, 21}, {4500, 4500});
  const RawSeries s100 = raw({0, 6, 12, 30, 36}, {4800, 100, 4700, 100, 100});
  const RawSeries m = merge_aggregate(s30, s100);
  CHECK(m.timestamps == std::vector<std::int64_t>{2, 6, 12, 21, 30, 36});
  CHECK(m.values == std::vector<double>{4800, 100, 4700, 4500, 100, 100});
}

TEST_CASE("merge_aggregate: errors") {
  const RawSeries a = raw({0, 6}, {1, 1});
  const RawSeries b = raw({100, 106}, {1, 1});
  try {
    merge_aggregate(a, b);
    FAIL("expected no-overlap");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_overlap);
  }
  CHECK_THROWS_AS(merge_aggregate(RawSeries{}, b), Error);
}

TEST_CASE("fill_gaps: aggregate rule is strictly under one minute") {
  SUBCASE("40 s gap is forward-filled") {
    const PowerSeries s = fill_gaps(raw({0, 40, 41}, {100, 200, 300}), kAggregateGapRule);
    CHECK(s.size() == 42);
    CHECK(s.valid_count() == 42);
    CHECK(value_at(s, 39) == 100);
    CHECK(value_at(s, 40) == 200);
  }
  SUBCASE("300 s gap is invalid inside") {
    const PowerSeries s = fill_gaps(raw({0, 300}, {100, 200}), kAggregateGapRule);
    CHECK(valid_at(s, 0));
    CHECK(value_at(s, 0) == 100);
    for (std::int64_t t = 1; t < 300; ++t) CHECK_FALSE(valid_at(s, t));
    CHECK(valid_at(s, 300));
  }
  SUBCASE("exactly 60 s is not filled") {
    const PowerSeries s = fill_gaps(raw({0, 60}, {100, 200}), kAggregateGapRule);
    CHECK_FALSE(valid_at(s, 30));
  }
  SUBCASE("59 s is filled") {
    const PowerSeries s = fill_gaps(raw({0, 59}, {100, 200}), kAggregateGapRule);
    CHECK(s.valid_count() == 60);
  }
}

TEST_CASE("fill_gaps: IAM rule is inclusive at one hour") {
  const PowerSeries s = fill_gaps(raw({0, 3600, 7201}, {2000, 0, 5}, SensorKind::iam_1s), kIamGapRule);
  CHECK(valid_at(s, 3599));
  CHECK(value_at(s, 3599) == 2000);
  CHECK_FALSE(valid_at(s, 3601));
  CHECK(valid_at(s, 7201));
  CHECK_THROWS_AS(fill_gaps(RawSeries{}, kIamGapRule), Error);
}

TEST_CASE("despike: thresholds and boundary") {
  CHECK(despike(raw({0, 1}, {25000, 19000}), kAggregateSpikeWatts).values == std::vector<double>{0, 19000});
  CHECK(despike(raw({0}, {3000}), appliance_spike_threshold("kettle")).values == std::vector<double>{3000});
  CHECK(despike(raw({0}, {4001}), appliance_spike_threshold("kettle")).values == std::vector<double>{0});
  CHECK(despike(raw({0}, {9000}), appliance_spike_threshold("electric_shower")).values == std::vector<double>{9000});
  CHECK(despike(raw({0}, {15001}), appliance_spike_threshold("electric_cooker")).values == std::vector<double>{0});
  CHECK(appliance_spike_threshold("Electric Shower") == 15000);
  CHECK(appliance_spike_threshold("microwave") == 4000);
  for (double thr : {20000.0, 15000.0, 4000.0}) {
    CHECK(despike(raw({0}, {thr}), thr).values == std::vector<double>{thr});
  }
}

TEST_CASE("despike: idempotent") {
  Rng rng(2);
  RawSeries s;
  for (int i = 0; i < 1000; ++i) {
    s.timestamps.push_back(i);
    s.values.push_back(rng.uniform(0, 30000));
  }
  const RawSeries once = despike(s, kAggregateSpikeWatts);
  CHECK(despike(once, kAggregateSpikeWatts).values == once.values);
}

TEST_CASE("resample: 8 s means") {
  SUBCASE("constant") {
    const PowerSeries s = PowerSeries::from_values(0, 1, std::vector<double>(8, 100.0));
    const PowerSeries r = resample(s);
    CHECK(r.size() == 1);
    CHECK(r.values[0] == 100.0);
    CHECK(r.valid[0] == 1);
  }
  SUBCASE("step") {
    const PowerSeries r = resample(PowerSeries::from_values(0, 1, {0, 0, 0, 0, 800, 800, 800, 800}));
    CHECK(r.values[0] == 400.0);
  }
  SUBCASE("invalid region poisons the bin") {
    PowerSeries s = PowerSeries::from_values(0, 1, std::vector<double>(16, 50.0));
    s.valid[11] = 0;
    const PowerSeries r = resample(s);
    CHECK(r.valid == std::vector<std::uint8_t>{1, 0});
  }
  SUBCASE("bins are epoch aligned; partial bins are invalid") {
    const PowerSeries r = resample(PowerSeries::from_values(4, 1, std::vector<double>(12, 10.0)));
    CHECK(r.start_time == 0);
    CHECK(r.valid == std::vector<std::uint8_t>{0, 1});
  }
  SUBCASE("raw readings average within each bin") {
    const PowerSeries r = resample(raw({1, 3, 9, 30}, {10, 20, 5, 7}));
    CHECK(r.start_time == 0);
    CHECK(r.values == std::vector<double>{15, 5, 0, 7});
    CHECK(r.valid == std::vector<std::uint8_t>{1, 1, 0, 1});
  }
}

TEST_CASE("resample: identity on a fully valid 8 s series") {
  Rng rng(5);
  std::vector<double> v(500);
  for (auto& x : v) x = rng.uniform(0, 3000);
  const PowerSeries s = PowerSeries::from_values(1'500'000'000, 8, v);
  CHECK(resample(s) == s);
}

TEST_CASE("resample: energy is conserved over fully valid regions") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(8 * (50 + rng.below(500)));
    for (auto& x : v) x = rng.uniform(0, 5000);
    const PowerSeries s = PowerSeries::from_values(1'500'000'000, 1, v);
    const PowerSeries r = resample(s);
    REQUIRE(r.valid_count() == r.size());
    double e_in = 0.0, e_out = 0.0;
    for (double x : s.values) e_in += x * 1.0;
    for (double x : r.values) e_out += x * 8.0;
    CHECK(std::abs(e_in - e_out) <= 1e-9 * e_in);
  }
}

TEST_CASE("pipeline masks never gain validity beyond the fill rule") {
  // A 1 s IAM trace with a 2 h hole: samples inside the hole stay invalid after resampling.
  RawSeries s;
  for (std::int64_t t = 0; t < 100; ++t) {
    s.timestamps.push_back(t);
    s.values.push_back(2000);
  }
  for (std::int64_t t = 7300; t < 7400; ++t) {
    s.timestamps.push_back(t);
    s.values.push_back(0);
  }
  const PowerSeries p = preprocess_appliance(s, "kettle");
  CHECK(valid_at(p, 88));
  CHECK_FALSE(valid_at(p, 96));
  CHECK_FALSE(valid_at(p, 4000));
  CHECK(valid_at(p, 7304));
}

TEST_CASE("preprocess_aggregate: merge, despike, fill and resample in order") {
  AggregateSources src;
  // 30 A at 1 s with a spike at t=3 and a 20 s dropout; 100 A every 2 s covers the dropout.
  for (std::int64_t t = 0; t < 40; ++t) {
    if (t >= 10 && t < 30) continue;
    src.s30.timestamps.push_back(t);
    src.s30.values.push_back(t == 3 ? 30000 : 1000);
  }
  src.s100 = RawSeries{};
  for (std::int64_t t = 0; t < 40; t += 2) {
    src.s100->timestamps.push_back(t);
    src.s100->values.push_back(t >= 16 && t < 24 ? 6000 : 1000);
  }
  const PowerSeries p = preprocess_aggregate(src);
  CHECK(p.interval == 8);
  CHECK(p.valid_count() == p.size());
  // Bin [0, 8): seven 1000 W readings and the despiked spike.
  CHECK(p.values[0] == 7000.0 / 8.0);
  // Bin [16, 24): the 100 A readings at 16, 18, 20, 22 carried forward over 1 s gaps.
  CHECK(p.values[2] == 6000.0);
}
