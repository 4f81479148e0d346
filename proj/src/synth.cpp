#include "nilm/synth.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "nilm/error.hpp"
#include "nilm/rng.hpp"
#include "nilm/series_io.hpp"

namespace nilm {

namespace {

constexpr std::int64_t kInterval = 8;
constexpr double kDaySeconds = 86400.0;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::size_t to_samples(double seconds) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(seconds / kInterval)));
}

void validate(const HouseholdSpec& spec) {
  if (spec.days < 1) throw Error(Errc::invalid_argument, "household needs at least one day");
  if (!(spec.noise_std >= 0.0)) throw Error(Errc::invalid_argument, "noise_std must be >= 0");
  if (spec.start_time % kInterval != 0) throw Error(Errc::invalid_argument, "start_time must be a multiple of 8");
  for (const auto& a : spec.appliances) {
    if (a.stages.empty()) throw Error(Errc::invalid_argument, a.name + ": no profile stages");
    for (const auto& s : a.stages) {
      if (s.min_watts < 0 || s.max_watts < s.min_watts || s.min_seconds <= 0 || s.max_seconds < s.min_seconds) {
        throw Error(Errc::invalid_argument, a.name + ": invalid profile stage");
      }
    }
  }
}

// Renders one appliance's events into `trace`.
void render_appliance(const ApplianceArchetype& a, std::size_t days, Rng& rng, std::vector<double>& trace) {
  const std::size_t n = trace.size();
  const std::size_t per_day = static_cast<std::size_t>(kDaySeconds) / kInterval;
  std::size_t busy_until = 0;
  for (std::size_t d = 0; d < days; ++d) {
    const std::uint64_t events = rng.poisson(a.events_per_day);
    std::vector<std::size_t> starts;
    for (std::uint64_t e = 0; e < events; ++e) starts.push_back(d * per_day + rng.below(per_day));
    std::sort(starts.begin(), starts.end());
    for (std::size_t start : starts) {
      if (start < busy_until) continue;  // one run at a time
      std::size_t t = start;
      for (const auto& stage : a.stages) {
        const double level = rng.uniform(stage.min_watts, stage.max_watts);
        const std::size_t len = to_samples(rng.uniform(stage.min_seconds, stage.max_seconds));
        const std::size_t on = stage.cycle_on_seconds > 0 ? to_samples(stage.cycle_on_seconds) : len;
        const std::size_t off = stage.cycle_on_seconds > 0 ? to_samples(stage.cycle_off_seconds) : 0;
        for (std::size_t i = 0; i < len && t < n; ++i, ++t) {
          const bool active = off == 0 || (i % (on + off)) < on;
          const double noise = 1.0 + a.jitter * rng.uniform(-1.0, 1.0);
          if (active) trace[t] = level * noise;
        }
      }
      busy_until = t;
    }
  }
}

}  // namespace

std::pair<double, double> ApplianceArchetype::duration_range() const {
  double lo = 0.0, hi = 0.0;
  for (const auto& s : stages) {
    lo += s.min_seconds;
    hi += s.max_seconds;
  }
  return {lo, hi};
}

double ApplianceArchetype::min_on_watts() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& s : stages) m = std::min(m, s.min_watts * (1.0 - jitter));
  return m;
}

const PowerSeries& Household::truth(const std::string& name) const {
  for (const auto& [n, s] : truths) {
    if (n == name) return s;
  }
  throw Error(Errc::invalid_argument, "household has no appliance '" + name + "'");
}

std::vector<ApplianceArchetype> builtin_archetypes() {
  return {
      {"kettle", {{2500, 3000, 60, 300}}, 4.0, 0.02},
      {"microwave", {{900, 1300, 30, 300}}, 2.0, 0.03},
      {"dishwasher",
       {{1900, 2200, 600, 1200}, {80, 150, 1200, 2400}, {1900, 2200, 300, 900}, {20, 50, 600, 1200}},
       0.5,
       0.03},
      {"washing_machine",
       {{1800, 2200, 600, 1200}, {200, 500, 1800, 3600, 40, 20}, {400, 600, 300, 600}},
       0.6,
       0.05},
      {"electric_shower", {{7500, 9500, 300, 900}}, 0.8, 0.01},
      {"electric_cooker", {{1500, 2500, 1800, 5400, 120, 180}}, 0.5, 0.03},
  };
}

const ApplianceArchetype& builtin_archetype(const std::string& name) {
  static const std::vector<ApplianceArchetype> all = builtin_archetypes();
  for (const auto& a : all) {
    if (a.name == name) return a;
  }
  throw Error(Errc::invalid_argument, "unknown appliance archetype '" + name + "'");
}

Household generate_household(const HouseholdSpec& spec) {
  validate(spec);
  const std::size_t n = spec.days * static_cast<std::size_t>(kDaySeconds) / kInterval;
  Household h;

  std::vector<double> base(n);
  const BaseLoad& b = spec.base_load;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i * kInterval);
    const double phase = 2.0 * std::numbers::pi * std::fmod(t, kDaySeconds) / kDaySeconds;
    double u = b.level - b.daily_amplitude * std::cos(phase);
    if (b.fridge_watts > 0 && b.fridge_period_seconds > 0 &&
        std::fmod(t, b.fridge_period_seconds) < b.fridge_on_seconds) {
      u += b.fridge_watts;
    }
    base[i] = std::max(0.0, u);
  }

  std::vector<double> total = base;
  for (std::size_t k = 0; k < spec.appliances.size(); ++k) {
    Rng rng(splitmix(spec.seed ^ splitmix(k + 1)));
    std::vector<double> trace(n, 0.0);
    render_appliance(spec.appliances[k], spec.days, rng, trace);
    for (std::size_t i = 0; i < n; ++i) total[i] += trace[i];
    h.truths.emplace_back(spec.appliances[k].name, PowerSeries::from_values(spec.start_time, kInterval, std::move(trace)));
  }

  Rng noise(splitmix(spec.seed));
  if (spec.noise_std > 0) {
    for (double& v : total) v = std::max(0.0, v + spec.noise_std * noise.normal());
  }
  h.aggregate = PowerSeries::from_values(spec.start_time, kInterval, std::move(total));
  h.base_load = PowerSeries::from_values(spec.start_time, kInterval, std::move(base));
  return h;
}

std::filesystem::path write_household(const std::filesystem::path& dir, const Household& household,
                                      const HouseholdSpec& spec) {
  std::filesystem::create_directories(dir);
  nlohmann::json files = nlohmann::json::object();
  write_power_csv(dir / "aggregate.csv", household.aggregate);
  files["aggregate"] = "aggregate.csv";
  write_power_csv(dir / "base_load.csv", household.base_load);
  files["base_load"] = "base_load.csv";
  nlohmann::json appliances = nlohmann::json::object();
  for (const auto& [name, series] : household.truths) {
    write_power_csv(dir / (name + ".csv"), series);
    appliances[name] = name + ".csv";
  }
  files["appliances"] = appliances;

  nlohmann::json archetypes = nlohmann::json::array();
  for (const auto& a : spec.appliances) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : a.stages) {
      stages.push_back({{"min_watts", s.min_watts}, {"max_watts", s.max_watts},
                        {"min_seconds", s.min_seconds}, {"max_seconds", s.max_seconds},
                        {"cycle_on_seconds", s.cycle_on_seconds}, {"cycle_off_seconds", s.cycle_off_seconds}});
    }
    archetypes.push_back({{"name", a.name}, {"events_per_day", a.events_per_day}, {"jitter", a.jitter},
                          {"stages", stages}});
  }
  const BaseLoad& b = spec.base_load;
  nlohmann::json manifest = {
      {"files", files},
      {"interval_seconds", kInterval},
      {"samples", household.aggregate.size()},
      {"spec",
       {{"days", spec.days},
        {"seed", spec.seed},
        {"noise_std", spec.noise_std},
        {"start_time", spec.start_time},
        {"base_load",
         {{"level", b.level}, {"daily_amplitude", b.daily_amplitude}, {"fridge_watts", b.fridge_watts},
          {"fridge_on_seconds", b.fridge_on_seconds}, {"fridge_period_seconds", b.fridge_period_seconds}}},
        {"appliances", archetypes}}},
  };
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << manifest.dump(2) << '\n';
  return path;
}

}  // namespace nilm
