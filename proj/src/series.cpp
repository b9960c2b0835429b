#include "aadtcast/series.hpp"

#include "aadtcast/error.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace aadt {

namespace {

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::NumericDomain, std::string(what) + ": non-finite value");
  }
}

}  // namespace

CalendarHour CalendarHour::from_civil(int year, unsigned month, unsigned day, int hour) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok() || hour < 0 || hour > 23) {
    throw Error(ErrorCode::InvalidArgument, "invalid calendar hour");
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return CalendarHour(static_cast<std::int64_t>(days) * kHoursPerDay + hour);
}

CivilHour CalendarHour::civil() const {
  using namespace std::chrono;
  const std::int64_t days = floor_div(hours_, kHoursPerDay);
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return CivilHour{static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                   static_cast<unsigned>(ymd.day()), hour_of_day()};
}

int CalendarHour::hour_of_day() const noexcept {
  return static_cast<int>(hours_ - floor_div(hours_, kHoursPerDay) * kHoursPerDay);
}

int CalendarHour::day_of_year() const {
  const auto jan1 = start_of_year(year());
  return static_cast<int>(floor_div(hours_ - jan1.hours_, kHoursPerDay));
}

int CalendarHour::weekday() const noexcept {
  // 1970-01-01 was a Thursday.
  const std::int64_t days = floor_div(hours_, kHoursPerDay);
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

std::string CalendarHour::iso() const {
  const CivilHour c = civil();
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02uT%02d", c.year, c.month, c.day, c.hour);
  return buf.data();
}

bool is_leap_year(int year) noexcept {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_year(int year) noexcept { return is_leap_year(year) ? 366 : 365; }

std::int64_t hours_in_span(int start_year, int end_year) {
  if (start_year > end_year) {
    throw Error(ErrorCode::InvalidArgument, "hours_in_span: start year after end year");
  }
  std::int64_t days = 0;
  for (int y = start_year; y <= end_year; ++y) days += days_in_year(y);
  return days * kHoursPerDay;
}

std::string_view functional_class_name(FunctionalClass fc) noexcept {
  switch (fc) {
    case FunctionalClass::RuralInterstate: return "RuralInterstate";
    case FunctionalClass::UrbanInterstate: return "UrbanInterstate";
    case FunctionalClass::RuralArterial: return "RuralArterial";
    case FunctionalClass::UrbanArterial: return "UrbanArterial";
    case FunctionalClass::RuralCollector: return "RuralCollector";
    case FunctionalClass::UrbanCollector: return "UrbanCollector";
    case FunctionalClass::Local: return "Local";
  }
  return "RuralInterstate";
}

std::optional<FunctionalClass> parse_functional_class(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(FunctionalClass::Local); ++i) {
    const auto fc = static_cast<FunctionalClass>(i);
    if (functional_class_name(fc) == name) return fc;
  }
  return std::nullopt;
}

// ─── HourlySeries ────────────────────────────────────────────────────────────

HourlySeries::HourlySeries(CalendarHour start, OptionalValues values, std::string station_id,
                           FunctionalClass functional_class)
    : start_(start),
      values_(std::move(values)),
      station_id_(std::move(station_id)),
      functional_class_(functional_class) {
  if (values_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "hourly series must hold at least one hour");
  }
  for (const auto& v : values_) {
    if (!v) continue;
    require_finite(*v, "hourly series");
    if (*v < 0.0) throw Error(ErrorCode::NumericDomain, "hourly series: negative volume");
  }
}

std::size_t HourlySeries::missing_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](const auto& v) { return !v; }));
}

double HourlySeries::missing_fraction() const noexcept {
  return static_cast<double>(missing_count()) / static_cast<double>(values_.size());
}

Mask HourlySeries::present_mask() const {
  Mask mask(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) mask[i] = values_[i].has_value();
  return mask;
}

void reject_zero_volumes(const HourlySeries& series) {
  const auto& values = series.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] && *values[i] == 0.0) {
      throw Error(ErrorCode::ZeroVolume,
                  "zero volume at hour index " + std::to_string(i) + " (" +
                      series.time_at(i).iso() + ")");
    }
  }
}

// ─── Shift / split ───────────────────────────────────────────────────────────

PredictionDataset shift_pair(const HourlySeries& series, std::int64_t horizon_hours) {
  const auto n = static_cast<std::int64_t>(series.size());
  if (horizon_hours <= 0 || horizon_hours >= n) {
    throw Error(ErrorCode::InvalidHorizon, "horizon of " + std::to_string(horizon_hours) +
                                               " hours does not fit a series of " +
                                               std::to_string(n) + " hours");
  }
  const auto& values = series.values();
  const auto length = static_cast<std::size_t>(n - horizon_hours);
  const auto offset = static_cast<std::size_t>(horizon_hours);

  PredictionDataset out;
  out.input_start = series.start();
  out.horizon_hours = horizon_hours;
  out.inputs.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(length));
  out.targets.assign(values.begin() + static_cast<std::ptrdiff_t>(offset), values.end());
  out.input_mask.resize(length);
  out.target_mask.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    out.input_mask[i] = out.inputs[i].has_value();
    out.target_mask[i] = out.targets[i].has_value();
  }
  return out;
}

std::pair<PredictionDataset, PredictionDataset> split_train_test(const PredictionDataset& dataset,
                                                                 std::int64_t test_hours) {
  const auto n = static_cast<std::int64_t>(dataset.size());
  if (test_hours <= 0 || test_hours >= n) {
    throw Error(ErrorCode::InvalidSplit, "test partition of " + std::to_string(test_hours) +
                                             " hours does not fit a dataset of " +
                                             std::to_string(n) + " hours");
  }
  const auto cut = static_cast<std::ptrdiff_t>(n - test_hours);
  auto slice = [&](std::ptrdiff_t from, std::ptrdiff_t to) {
    PredictionDataset part;
    part.input_start = dataset.input_start + from;
    part.horizon_hours = dataset.horizon_hours;
    part.inputs.assign(dataset.inputs.begin() + from, dataset.inputs.begin() + to);
    part.targets.assign(dataset.targets.begin() + from, dataset.targets.begin() + to);
    part.input_mask.assign(dataset.input_mask.begin() + from, dataset.input_mask.begin() + to);
    part.target_mask.assign(dataset.target_mask.begin() + from, dataset.target_mask.begin() + to);
    return part;
  };
  return {slice(0, cut), slice(cut, static_cast<std::ptrdiff_t>(n))};
}

// ─── Normalization ───────────────────────────────────────────────────────────

double log_volume(double raw) {
  require_finite(raw, "log transform");
  if (raw < 0.0) throw Error(ErrorCode::NumericDomain, "log transform: negative volume");
  return std::log1p(raw);
}

double exp_volume(double log_value) {
  require_finite(log_value, "exp transform");
  return std::expm1(log_value);
}

NormalizationParams fit_normalizer_log(std::span<const double> log_values) {
  if (log_values.empty()) {
    throw Error(ErrorCode::DegenerateNormalizer, "normalizer: no observed training values");
  }
  const auto [lo, hi] = std::minmax_element(log_values.begin(), log_values.end());
  if (!(*hi > *lo)) {
    throw Error(ErrorCode::DegenerateNormalizer, "normalizer: training values are constant");
  }
  return NormalizationParams{true, *lo, *hi};
}

NormalizationParams fit_normalizer(std::span<const std::optional<double>> raw_values) {
  std::vector<double> logs;
  logs.reserve(raw_values.size());
  for (const auto& v : raw_values) {
    if (v) logs.push_back(log_volume(*v));
  }
  return fit_normalizer_log(logs);
}

double scale_log(double log_value, const NormalizationParams& params) {
  require_finite(log_value, "normalize");
  return (log_value - params.x_min) / (params.x_max - params.x_min);
}

double unscale_log(double scaled, const NormalizationParams& params) {
  require_finite(scaled, "denormalize");
  return scaled * (params.x_max - params.x_min) + params.x_min;
}

double transform(double value, const NormalizationParams& params) {
  return scale_log(params.log_applied ? log_volume(value) : value, params);
}

double inverse_transform(double value, const NormalizationParams& params) {
  const double x = unscale_log(value, params);
  return params.log_applied ? exp_volume(x) : x;
}

}  // namespace aadt
