#pragma once

// Seeded synthetic households: aggregate = sum of appliance traces + base load
// + zero-mean Gaussian noise, clamped at 0, on the 8-second grid.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "nilm/series.hpp"

namespace nilm {

// One phase of an appliance run. Level is drawn once per event in
// [min_watts, max_watts]; with cycle_on_seconds > 0 the stage alternates
// between that level and 0 W.
struct ProfileStage {
  double min_watts = 0.0;
  double max_watts = 0.0;
  double min_seconds = 0.0;
  double max_seconds = 0.0;
  double cycle_on_seconds = 0.0;
  double cycle_off_seconds = 0.0;
};

struct ApplianceArchetype {
  std::string name;
  std::vector<ProfileStage> stages;
  double events_per_day = 1.0;
  double jitter = 0.0;  // relative amplitude noise, uniform in +-jitter

  std::pair<double, double> duration_range() const;
  double min_on_watts() const;
};

struct BaseLoad {
  double level = 150.0;
  double daily_amplitude = 50.0;
  double fridge_watts = 90.0;
  double fridge_on_seconds = 900.0;
  double fridge_period_seconds = 2700.0;
};

struct HouseholdSpec {
  std::vector<ApplianceArchetype> appliances;
  BaseLoad base_load;
  double noise_std = 10.0;
  std::size_t days = 1;
  std::uint64_t seed = 0;
  std::int64_t start_time = 1'500'000'000;  // multiple of 8
};

struct Household {
  PowerSeries aggregate;
  std::vector<std::pair<std::string, PowerSeries>> truths;
  PowerSeries base_load;

  const PowerSeries& truth(const std::string& name) const;
};

// Kettle, microwave, dishwasher, washing machine, electric shower, electric cooker.
std::vector<ApplianceArchetype> builtin_archetypes();
const ApplianceArchetype& builtin_archetype(const std::string& name);

Household generate_household(const HouseholdSpec& spec);

// Writes aggregate.csv, base_load.csv and <appliance>.csv into `dir` plus a
// manifest.json describing the files and the spec. Returns the manifest path.
std::filesystem::path write_household(const std::filesystem::path& dir, const Household& household,
                                      const HouseholdSpec& spec);

}  // namespace nilm
