#pragma once

#include "aadtcast/forecast.hpp"
#include "aadtcast/series.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aadt {

inline constexpr std::int64_t kHorizonOneYear = 8760;
inline constexpr std::int64_t kHorizonTwoYears = 17520;
inline constexpr std::int64_t kHorizonThreeYears = 26280;

struct YearBlock {
  int year = 0;
  int n_days = 0;
  double hourly_sum = 0.0;
  double aadt = 0.0;

  friend bool operator==(const YearBlock&, const YearBlock&) = default;
};

/// One block per calendar year. The series must start at Jan 1 hour 0,
/// hold whole years (PartialYear otherwise) and be complete
/// (IncompleteActuals naming the first gappy year).
std::vector<YearBlock> compute_aadt(const HourlySeries& series);

/// 100 * (1 - |predicted - actual| / actual). Throws InvalidActual when
/// actual <= 0.
double accuracy(double predicted_aadt, double actual_aadt);

/// Mean absolute percentage error in percent over hours where both are
/// present and the actual is positive.
double hourly_mape(std::span<const std::optional<double>> predicted,
                   std::span<const std::optional<double>> actual);

struct ReportRow {
  std::string station;
  CellKind cell = CellKind::Lstm;
  Treatment treatment = Treatment::Median;
  std::int64_t horizon_hours = 0;
  int year = 0;
  double predicted_aadt = 0.0;
  double actual_aadt = 0.0;
  double accuracy_pct = 0.0;
  double mape_pct = 0.0;
  /// Missing share of the actual hours in that year.
  double missing_pct = 0.0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct SkipRecord {
  std::int64_t horizon_hours = 0;
  std::string reason;

  friend bool operator==(const SkipRecord&, const SkipRecord&) = default;
};

/// Hourly predictions over the forecast years for one variant.
struct Trend {
  CellKind cell = CellKind::Lstm;
  Treatment treatment = Treatment::Median;
  std::int64_t horizon_hours = 0;
  CalendarHour start;
  std::vector<double> values;

  friend bool operator==(const Trend&, const Trend&) = default;
};

struct EvaluationReport {
  std::string station;
  ForecastConfig base_config;
  double series_missing_pct = 0.0;
  std::vector<ReportRow> rows;
  std::vector<SkipRecord> skipped;
  CalendarHour actual_start;
  std::vector<double> actual_trend;
  std::vector<Trend> trends;

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

struct BestVariant {
  std::int64_t horizon_hours = 0;
  int year = 0;
  CellKind cell = CellKind::Lstm;
  Treatment treatment = Treatment::Median;
  double accuracy_pct = 0.0;

  friend bool operator==(const BestVariant&, const BestVariant&) = default;
};

/// Highest-accuracy successful row per (horizon, year). Ties go to the
/// earlier treatment, then the earlier cell.
std::vector<BestVariant> best_variants(const EvaluationReport& report);

/// Calendar years whose every hour lies in the test partition.
std::vector<int> forecast_years(const HourlySeries& series, const ForecastConfig& config);

/// Scores the model on its forecast years against `truth` when given,
/// otherwise against `series` with each gappy year median-filled.
EvaluationReport evaluate_model(const TrainedModel& model, const HourlySeries& series,
                                const std::optional<HourlySeries>& truth = std::nullopt);

/// All cell x treatment variants of `base`, trained with the same seed.
/// `test_years` empty keeps base.test_years. A failing variant becomes
/// rows with ok = false. `jobs` 0 uses every core.
EvaluationReport run_grid(const HourlySeries& series, const ForecastConfig& base,
                          std::span<const int> test_years = {}, unsigned jobs = 0,
                          const std::optional<HourlySeries>& truth = std::nullopt);

/// Trains and scores `base` once per horizon. A horizon without enough
/// history is skipped with a reason.
EvaluationReport run_multi_horizon(const HourlySeries& series, const ForecastConfig& base,
                                   std::span<const std::int64_t> horizons,
                                   const std::optional<HourlySeries>& truth = std::nullopt);

/// Grid over several horizons; the variant grid is repeated per horizon.
EvaluationReport run_grid_horizons(const HourlySeries& series, const ForecastConfig& base,
                                   std::span<const std::int64_t> horizons, unsigned jobs = 0,
                                   const std::optional<HourlySeries>& truth = std::nullopt);

void write_report_csv(std::ostream& out, const EvaluationReport& report);
void write_report_json(std::ostream& out, const EvaluationReport& report);
/// `timestamp,value` rows.
void write_trend_csv(std::ostream& out, CalendarHour start, std::span<const double> values);
/// Fixed two-decimal table for people.
void write_accuracy_table(std::ostream& out, const EvaluationReport& report);

}  // namespace aadt
