#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aadt {

using OptionalValues = std::vector<std::optional<double>>;
using Mask = std::vector<std::uint8_t>;

inline constexpr int kHoursPerDay = 24;
inline constexpr int kHoursPerYear = 8760;

// ─── Calendar ────────────────────────────────────────────────────────────────

struct CivilHour {
  int year = 1970;
  unsigned month = 1;  // 1..12
  unsigned day = 1;    // 1..31
  int hour = 0;        // 0..23

  friend bool operator==(const CivilHour&, const CivilHour&) = default;
};

/// A UTC calendar hour, stored as whole hours since 1970-01-01T00.
class CalendarHour {
public:
  constexpr CalendarHour() = default;
  constexpr explicit CalendarHour(std::int64_t hours_since_epoch)
      : hours_(hours_since_epoch) {}

  /// Throws InvalidArgument on an impossible date.
  static CalendarHour from_civil(int year, unsigned month, unsigned day, int hour);
  static CalendarHour start_of_year(int year) { return from_civil(year, 1, 1, 0); }

  CivilHour civil() const;
  std::int64_t hours_since_epoch() const noexcept { return hours_; }
  int year() const { return civil().year; }
  int hour_of_day() const noexcept;
  /// 0-based day of the calendar year.
  int day_of_year() const;
  /// 0 = Monday .. 6 = Sunday.
  int weekday() const noexcept;

  /// ISO-8601 at hour resolution, e.g. `2008-01-01T05`.
  std::string iso() const;

  CalendarHour operator+(std::int64_t hours) const noexcept {
    return CalendarHour(hours_ + hours);
  }
  std::int64_t operator-(CalendarHour other) const noexcept { return hours_ - other.hours_; }
  friend auto operator<=>(const CalendarHour&, const CalendarHour&) = default;

private:
  std::int64_t hours_ = 0;
};

bool is_leap_year(int year) noexcept;
int days_in_year(int year) noexcept;

/// Hours covering whole calendar years start_year..end_year inclusive.
std::int64_t hours_in_span(int start_year, int end_year);

// ─── Series ──────────────────────────────────────────────────────────────────

enum class FunctionalClass {
  RuralInterstate,
  UrbanInterstate,
  RuralArterial,
  UrbanArterial,
  RuralCollector,
  UrbanCollector,
  Local,
};

std::string_view functional_class_name(FunctionalClass fc) noexcept;
std::optional<FunctionalClass> parse_functional_class(std::string_view name) noexcept;

/// Consecutive hourly volumes. Missing hours are held in place as empty
/// optionals; positions are never omitted.
class HourlySeries {
public:
  /// Throws InvalidArgument for an empty series and NumericDomain for a
  /// non-finite or negative present value.
  HourlySeries(CalendarHour start, OptionalValues values, std::string station_id = {},
               FunctionalClass functional_class = FunctionalClass::RuralInterstate);

  CalendarHour start() const noexcept { return start_; }
  /// Timestamp one past the last hour.
  CalendarHour end() const noexcept { return start_ + static_cast<std::int64_t>(values_.size()); }
  CalendarHour time_at(std::size_t index) const noexcept {
    return start_ + static_cast<std::int64_t>(index);
  }
  const OptionalValues& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  const std::string& station_id() const noexcept { return station_id_; }
  FunctionalClass functional_class() const noexcept { return functional_class_; }

  std::size_t missing_count() const noexcept;
  double missing_fraction() const noexcept;
  Mask present_mask() const;

  friend bool operator==(const HourlySeries&, const HourlySeries&) = default;

private:
  CalendarHour start_;
  OptionalValues values_;
  std::string station_id_;
  FunctionalClass functional_class_;
};

/// Zero present volumes violate the ingestion contract. Throws ZeroVolume
/// naming the first offending index.
void reject_zero_volumes(const HourlySeries& series);

/// Input/target streams aligned by a forward shift.
struct PredictionDataset {
  CalendarHour input_start;
  OptionalValues inputs;
  OptionalValues targets;
  Mask input_mask;
  Mask target_mask;
  std::int64_t horizon_hours = 0;

  std::size_t size() const noexcept { return inputs.size(); }
  CalendarHour target_start() const noexcept { return input_start + horizon_hours; }
};

/// Pairs each hour with the hour `horizon_hours` later.
PredictionDataset shift_pair(const HourlySeries& series, std::int64_t horizon_hours);

/// Chronological split; the last `test_hours` positions form the test set.
std::pair<PredictionDataset, PredictionDataset> split_train_test(const PredictionDataset& dataset,
                                                                 std::int64_t test_hours);

// ─── Normalization ───────────────────────────────────────────────────────────

/// log(1 + v) followed by min-max scaling with bounds taken from the
/// log-transformed training values.
struct NormalizationParams {
  bool log_applied = true;
  double x_min = 0.0;
  double x_max = 1.0;

  friend bool operator==(const NormalizationParams&, const NormalizationParams&) = default;
};

/// Throws DegenerateNormalizer when fewer than two distinct values are present.
NormalizationParams fit_normalizer(std::span<const std::optional<double>> raw_values);
/// Same fit on values that already went through log(1 + v).
NormalizationParams fit_normalizer_log(std::span<const double> log_values);

double log_volume(double raw);
double exp_volume(double log_value);
double scale_log(double log_value, const NormalizationParams& params);
double unscale_log(double scaled, const NormalizationParams& params);

/// Raw volume to normalized value. Values beyond the fitted range map
/// outside [0, 1]; nothing is clipped.
double transform(double value, const NormalizationParams& params);
double inverse_transform(double value, const NormalizationParams& params);

}  // namespace aadt
