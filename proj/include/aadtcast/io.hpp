#pragma once

#include "aadtcast/forecast.hpp"
#include "aadtcast/series.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace aadt {

// ─── CSV ─────────────────────────────────────────────────────────────────────

/// Reads `timestamp,volume` rows. Optional leading `# station=...` and
/// `# functional_class=...` lines set the metadata. `NaN` in any case or an
/// empty cell is missing. Throws MalformedSeries or ZeroVolume with the
/// offending line number.
HourlySeries parse_csv(std::istream& in, const std::string& source = "<input>");
HourlySeries parse_csv_file(const std::string& path);

/// Writes values with the shortest exact decimal so parsing gives back the
/// same bits.
void write_csv(std::ostream& out, const HourlySeries& series);
void write_csv_file(const std::string& path, const HourlySeries& series);

/// Parses `YYYY-MM-DDTHH`, optionally followed by `:MM` or `:MM:SS` of
/// zeros; a space may replace the `T`.
CalendarHour parse_timestamp(std::string_view text);

// ─── Key/value files ─────────────────────────────────────────────────────────

/// `key = value` per line; `#` starts a comment. Later keys win.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in);
std::vector<std::pair<std::string, std::string>> read_key_value_file(const std::string& path);

ForecastConfig read_forecast_config(const std::string& path);

// ─── Synthetic data ──────────────────────────────────────────────────────────

struct EventSpike {
  int day_of_year = 0;  // 0-based
  double multiplier = 1.0;
  int duration_hours = 24;

  friend bool operator==(const EventSpike&, const EventSpike&) = default;
};

enum class GapModel { Mcar, Burst };

struct SyntheticSpec {
  int years = 4;
  int start_year = 2008;
  double base_volume = 500.0;
  double daily_amplitude = 0.5;
  double weekly_amplitude = 0.2;
  double yearly_amplitude = 0.15;
  double growth_rate = 0.02;
  double noise_std = 0.05;
  std::vector<EventSpike> events;
  double missing_rate = 0.0;
  GapModel gap_model = GapModel::Mcar;
  double burst_mean_hours = 12.0;
  std::uint64_t seed = 1;
  std::string station_id = "SYN-1";
  FunctionalClass functional_class = FunctionalClass::RuralInterstate;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Throws InvalidArgument on an out-of-range field.
void validate(const SyntheticSpec& spec);
void apply_synthetic_setting(SyntheticSpec& spec, std::string_view key, std::string_view value);
SyntheticSpec read_synthetic_spec(const std::string& path);

struct SyntheticData {
  HourlySeries gappy;
  HourlySeries truth;

  friend bool operator==(const SyntheticData&, const SyntheticData&) = default;
};

/// Integer hourly volumes of at least 1 with daily, weekly and yearly
/// seasonality, compound growth, log-normal noise and event multipliers.
/// Exactly round(missing_rate * hours) hours are removed from `gappy`.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Seasonal shape terms in [-1, 1].
double daily_profile(int hour_of_day) noexcept;
double weekly_profile(int weekday) noexcept;
double yearly_profile(int day_of_year, int days_in_year) noexcept;

// ─── Prediction tables ───────────────────────────────────────────────────────

/// `timestamp,predicted_volume` rows.
void write_prediction_csv(std::ostream& out, const HourlySeries& predicted);

}  // namespace aadt
