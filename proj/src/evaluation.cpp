#include "aadtcast/evaluation.hpp"

#include "aadtcast/error.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <tuple>

namespace aadt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string shortest(double v) {
  if (!std::isfinite(v)) return {};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return std::string(error_code_name(err->code())) + ": " + err->what();
  }
  return e.what();
}

/// Actual volumes for each forecast year, gaps filled.
struct Actuals {
  std::vector<int> years;
  std::vector<double> aadt;
  std::vector<double> missing_pct;
  /// Raw actual hours per year, gaps kept, for hourly error.
  std::vector<OptionalValues> observed;
  CalendarHour start;
  std::vector<double> filled;
};

std::span<const std::optional<double>> year_slice(const HourlySeries& s, int year) {
  const auto begin = CalendarHour::start_of_year(year) - s.start();
  const auto len = static_cast<std::int64_t>(days_in_year(year)) * kHoursPerDay;
  if (begin < 0 || begin + len > static_cast<std::int64_t>(s.size())) {
    throw Error(ErrorCode::PartialYear, "series does not cover year " + std::to_string(year));
  }
  return std::span<const std::optional<double>>(s.values())
      .subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(len));
}

Actuals collect_actuals(const HourlySeries& series, const ForecastConfig& config,
                        const std::optional<HourlySeries>& truth) {
  Actuals a;
  a.years = forecast_years(series, config);
  if (a.years.empty()) {
    throw Error(ErrorCode::PartialYear, "the test partition holds no whole calendar year");
  }
  const HourlySeries& source = truth ? *truth : series;
  a.start = CalendarHour::start_of_year(a.years.front());
  for (int year : a.years) {
    const auto slice = year_slice(source, year);
    const auto gappy = year_slice(series, year);
    const auto missing = std::count_if(gappy.begin(), gappy.end(), [](const auto& v) { return !v; });
    a.missing_pct.push_back(100.0 * static_cast<double>(missing) / static_cast<double>(gappy.size()));
    a.observed.emplace_back(slice.begin(), slice.end());

    std::vector<double> filled;
    if (std::any_of(slice.begin(), slice.end(), [](const auto& v) { return !v; })) {
      try {
        filled = impute_central(slice, CentralStatistic::Median).filled;
      } catch (const Error&) {
        throw Error(ErrorCode::IncompleteActuals, "no observed actuals in year " + std::to_string(year));
      }
    } else {
      filled.reserve(slice.size());
      for (const auto& v : slice) filled.push_back(*v);
    }
    const HourlySeries complete(CalendarHour::start_of_year(year), OptionalValues(filled.begin(), filled.end()));
    a.aadt.push_back(compute_aadt(complete).front().aadt);
    a.filled.insert(a.filled.end(), filled.begin(), filled.end());
  }
  return a;
}

struct VariantResult {
  std::vector<ReportRow> rows;
  Trend trend;
};

VariantResult score_variant(const HourlySeries& series, const ForecastConfig& config,
                            const Actuals& actuals, const TrainedModel* model) {
  VariantResult out;
  out.trend.cell = config.cell_kind;
  out.trend.treatment = config.treatment;
  out.trend.horizon_hours = config.horizon_hours;
  out.trend.start = actuals.start;

  auto base_row = [&](std::size_t i) {
    ReportRow r;
    r.station = series.station_id();
    r.cell = config.cell_kind;
    r.treatment = config.treatment;
    r.horizon_hours = config.horizon_hours;
    r.year = actuals.years[i];
    r.actual_aadt = actuals.aadt[i];
    r.missing_pct = actuals.missing_pct[i];
    r.seed = config.seed;
    return r;
  };
  auto fail_all = [&](const std::string& message) {
    out.rows.clear();
    out.trend.values.clear();
    for (std::size_t i = 0; i < actuals.years.size(); ++i) {
      ReportRow r = base_row(i);
      r.predicted_aadt = kNaN;
      r.accuracy_pct = kNaN;
      r.mape_pct = kNaN;
      r.ok = false;
      r.error = message;
      out.rows.push_back(std::move(r));
    }
  };

  try {
    TrainedModel trained;
    if (!model) {
      trained = train(series, config);
      model = &trained;
    }
    const HourlySeries predicted = predict(*model, series);
    for (std::size_t i = 0; i < actuals.years.size(); ++i) {
      const auto slice = year_slice(predicted, actuals.years[i]);
      const HourlySeries block(CalendarHour::start_of_year(actuals.years[i]),
                               OptionalValues(slice.begin(), slice.end()));
      ReportRow r = base_row(i);
      r.predicted_aadt = compute_aadt(block).front().aadt;
      r.accuracy_pct = accuracy(r.predicted_aadt, r.actual_aadt);
      r.mape_pct = hourly_mape(slice, actuals.observed[i]);
      out.rows.push_back(std::move(r));
      for (const auto& v : slice) out.trend.values.push_back(*v);
    }
  } catch (const std::exception& e) {
    fail_all(describe(e));
  }
  return out;
}

std::optional<std::string> history_shortfall(const HourlySeries& series, const ForecastConfig& config) {
  const auto n = static_cast<std::int64_t>(series.size());
  const std::int64_t h = config.horizon_hours;
  if (h >= n) return "horizon of " + std::to_string(h) + " hours exceeds the series";
  const std::int64_t test = resolve_test_hours(series, config);
  const std::int64_t train = n - h - test;
  if (train < static_cast<std::int64_t>(config.window_length)) {
    return "horizon of " + std::to_string(h) + " hours leaves " + std::to_string(std::max<std::int64_t>(train, 0)) +
           " training hours, fewer than one window";
  }
  return std::nullopt;
}

EvaluationReport empty_report(const HourlySeries& series, const ForecastConfig& base) {
  EvaluationReport report;
  report.station = series.station_id();
  report.base_config = base;
  report.series_missing_pct = 100.0 * series.missing_fraction();
  return report;
}

void take_actuals(EvaluationReport& report, const Actuals& actuals) {
  if (report.actual_trend.empty()) {
    report.actual_start = actuals.start;
    report.actual_trend = actuals.filled;
  }
}

ForecastConfig with_test_years(const HourlySeries& series, ForecastConfig config, std::span<const int> years) {
  if (years.empty()) return config;
  std::vector<int> sorted(years.begin(), years.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] != sorted[i - 1] + 1) {
      throw Error(ErrorCode::InvalidSplit, "test years must be consecutive");
    }
  }
  if (CalendarHour::start_of_year(sorted.back() + 1) != series.end()) {
    throw Error(ErrorCode::InvalidSplit, "test years must be the final years of the series");
  }
  config.test_hours = hours_in_span(sorted.front(), sorted.back());
  return config;
}

void grid_into(EvaluationReport& report, const HourlySeries& series, const ForecastConfig& base,
               unsigned jobs, const std::optional<HourlySeries>& truth) {
  const Actuals actuals = collect_actuals(series, base, truth);
  take_actuals(report, actuals);

  std::vector<ForecastConfig> variants;
  for (CellKind cell : kAllCells) {
    for (Treatment t : kAllTreatments) {
      ForecastConfig c = base;
      c.cell_kind = cell;
      c.treatment = t;
      variants.push_back(c);
    }
  }
  const unsigned workers = detail::resolve_threads(jobs);
  if (workers > 1) {
    for (auto& c : variants) c.threads = 1;
  }
  std::vector<VariantResult> results(variants.size());
  detail::parallel_for(variants.size(), workers, [&](std::size_t i, unsigned) {
    results[i] = score_variant(series, variants[i], actuals, nullptr);
  });
  for (auto& r : results) {
    report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
    if (!r.trend.values.empty()) report.trends.push_back(std::move(r.trend));
  }
}

}  // namespace

std::vector<YearBlock> compute_aadt(const HourlySeries& series) {
  const CivilHour first = series.start().civil();
  if (first.month != 1 || first.day != 1 || first.hour != 0) {
    throw Error(ErrorCode::PartialYear, "series must start at hour 0 of January 1");
  }
  std::vector<YearBlock> out;
  std::size_t pos = 0;
  int year = first.year;
  while (pos < series.size()) {
    const auto hours = static_cast<std::size_t>(days_in_year(year)) * kHoursPerDay;
    if (pos + hours > series.size()) {
      throw Error(ErrorCode::PartialYear, "year " + std::to_string(year) + " has only " +
                                              std::to_string(series.size() - pos) + " of " +
                                              std::to_string(hours) + " hours");
    }
    YearBlock block{year, days_in_year(year), 0.0, 0.0};
    for (std::size_t i = pos; i < pos + hours; ++i) {
      const auto& v = series.values()[i];
      if (!v) {
        throw Error(ErrorCode::IncompleteActuals, "year " + std::to_string(year) + " has missing hours");
      }
      block.hourly_sum += *v;
    }
    block.aadt = block.hourly_sum / block.n_days;
    out.push_back(block);
    pos += hours;
    ++year;
  }
  return out;
}

double accuracy(double predicted_aadt, double actual_aadt) {
  if (!(actual_aadt > 0.0) || !std::isfinite(actual_aadt)) {
    throw Error(ErrorCode::InvalidActual, "actual AADT must be positive");
  }
  return 100.0 * (1.0 - std::abs(predicted_aadt - actual_aadt) / actual_aadt);
}

double hourly_mape(std::span<const std::optional<double>> predicted,
                   std::span<const std::optional<double>> actual) {
  if (predicted.size() != actual.size()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction and actual lengths differ");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && actual[i] && *actual[i] > 0.0) {
      sum += std::abs(*predicted[i] - *actual[i]) / *actual[i];
      ++n;
    }
  }
  return n ? 100.0 * sum / static_cast<double>(n) : kNaN;
}

std::vector<BestVariant> best_variants(const EvaluationReport& report) {
  std::vector<BestVariant> out;
  auto rank = [](const ReportRow& r) {
    return std::make_tuple(static_cast<int>(r.treatment), static_cast<int>(r.cell));
  };
  std::vector<const ReportRow*> best;
  for (const ReportRow& r : report.rows) {
    if (!r.ok || !std::isfinite(r.accuracy_pct)) continue;
    auto it = std::find_if(best.begin(), best.end(), [&](const ReportRow* b) {
      return b->horizon_hours == r.horizon_hours && b->year == r.year;
    });
    if (it == best.end()) {
      best.push_back(&r);
    } else if (r.accuracy_pct > (*it)->accuracy_pct ||
               (r.accuracy_pct == (*it)->accuracy_pct && rank(r) < rank(**it))) {
      *it = &r;
    }
  }
  std::sort(best.begin(), best.end(), [](const ReportRow* a, const ReportRow* b) {
    return std::tie(a->horizon_hours, a->year) < std::tie(b->horizon_hours, b->year);
  });
  for (const ReportRow* r : best) {
    out.push_back(BestVariant{r->horizon_hours, r->year, r->cell, r->treatment, r->accuracy_pct});
  }
  return out;
}

std::vector<int> forecast_years(const HourlySeries& series, const ForecastConfig& config) {
  const CalendarHour test_begin = series.end() + (-resolve_test_hours(series, config));
  std::vector<int> years;
  for (int y = test_begin.year(); y <= series.end().year(); ++y) {
    const CalendarHour a = CalendarHour::start_of_year(y);
    const CalendarHour b = CalendarHour::start_of_year(y + 1);
    if (a >= test_begin && b <= series.end()) years.push_back(y);
  }
  return years;
}

EvaluationReport evaluate_model(const TrainedModel& model, const HourlySeries& series,
                                const std::optional<HourlySeries>& truth) {
  EvaluationReport report = empty_report(series, model.config);
  const Actuals actuals = collect_actuals(series, model.config, truth);
  take_actuals(report, actuals);
  VariantResult r = score_variant(series, model.config, actuals, &model);
  if (!r.rows.empty() && !r.rows.front().ok) {
    throw Error(ErrorCode::ModelMismatch, r.rows.front().error);
  }
  report.rows = std::move(r.rows);
  report.trends.push_back(std::move(r.trend));
  return report;
}

EvaluationReport run_grid(const HourlySeries& series, const ForecastConfig& base, std::span<const int> test_years,
                          unsigned jobs, const std::optional<HourlySeries>& truth) {
  const ForecastConfig config = with_test_years(series, base, test_years);
  validate(config);
  EvaluationReport report = empty_report(series, config);
  if (auto reason = history_shortfall(series, config)) {
    throw Error(ErrorCode::InsufficientData, *reason);
  }
  grid_into(report, series, config, jobs, truth);
  return report;
}

EvaluationReport run_grid_horizons(const HourlySeries& series, const ForecastConfig& base,
                                   std::span<const std::int64_t> horizons, unsigned jobs,
                                   const std::optional<HourlySeries>& truth) {
  validate(base);
  EvaluationReport report = empty_report(series, base);
  for (std::int64_t h : horizons) {
    ForecastConfig config = base;
    config.horizon_hours = h;
    if (auto reason = history_shortfall(series, config)) {
      report.skipped.push_back(SkipRecord{h, *reason});
      continue;
    }
    grid_into(report, series, config, jobs, truth);
  }
  return report;
}

EvaluationReport run_multi_horizon(const HourlySeries& series, const ForecastConfig& base,
                                   std::span<const std::int64_t> horizons,
                                   const std::optional<HourlySeries>& truth) {
  validate(base);
  EvaluationReport report = empty_report(series, base);
  for (std::int64_t h : horizons) {
    ForecastConfig config = base;
    config.horizon_hours = h;
    if (h <= 0) throw Error(ErrorCode::InvalidHorizon, "horizon must be positive");
    if (auto reason = history_shortfall(series, config)) {
      report.skipped.push_back(SkipRecord{h, *reason});
      continue;
    }
    const Actuals actuals = collect_actuals(series, config, truth);
    take_actuals(report, actuals);
    VariantResult r = score_variant(series, config, actuals, nullptr);
    report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
    if (!r.trend.values.empty()) report.trends.push_back(std::move(r.trend));
  }
  return report;
}

// ─── Output ──────────────────────────────────────────────────────────────────

void write_report_csv(std::ostream& out, const EvaluationReport& report) {
  out << "station,cell,treatment,horizon_hours,year,predicted_aadt,actual_aadt,accuracy_pct,missing_pct,seed\n";
  for (const ReportRow& r : report.rows) {
    out << r.station << ',' << cell_kind_name(r.cell) << ',' << treatment_name(r.treatment) << ','
        << r.horizon_hours << ',' << r.year << ',' << shortest(r.predicted_aadt) << ','
        << shortest(r.actual_aadt) << ',' << shortest(r.accuracy_pct) << ',' << shortest(r.missing_pct)
        << ',' << r.seed << '\n';
  }
}

void write_report_json(std::ostream& out, const EvaluationReport& report) {
  using nlohmann::ordered_json;
  auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };

  ordered_json config = ordered_json::object();
  const std::string text = format_config(report.base_config);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl - pos);
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) config[line.substr(0, eq)] = line.substr(eq + 3);
    pos = nl + 1;
  }

  ordered_json doc;
  doc["station"] = report.station;
  doc["series_missing_pct"] = num(report.series_missing_pct);
  doc["config"] = config;
  doc["rows"] = ordered_json::array();
  for (const ReportRow& r : report.rows) {
    ordered_json row;
    row["station"] = r.station;
    row["cell"] = cell_kind_name(r.cell);
    row["treatment"] = treatment_name(r.treatment);
    row["horizon_hours"] = r.horizon_hours;
    row["year"] = r.year;
    row["predicted_aadt"] = num(r.predicted_aadt);
    row["actual_aadt"] = num(r.actual_aadt);
    row["accuracy_pct"] = num(r.accuracy_pct);
    row["mape_pct"] = num(r.mape_pct);
    row["missing_pct"] = num(r.missing_pct);
    row["seed"] = r.seed;
    row["ok"] = r.ok;
    if (!r.ok) row["error"] = r.error;
    doc["rows"].push_back(row);
  }
  doc["skipped"] = ordered_json::array();
  for (const SkipRecord& s : report.skipped) {
    doc["skipped"].push_back({{"horizon_hours", s.horizon_hours}, {"reason", s.reason}});
  }
  doc["best"] = ordered_json::array();
  for (const BestVariant& b : best_variants(report)) {
    doc["best"].push_back({{"horizon_hours", b.horizon_hours},
                           {"year", b.year},
                           {"cell", cell_kind_name(b.cell)},
                           {"treatment", treatment_name(b.treatment)},
                           {"accuracy_pct", b.accuracy_pct}});
  }
  out << doc.dump(2) << '\n';
}

void write_trend_csv(std::ostream& out, CalendarHour start, std::span<const double> values) {
  out << "timestamp,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << (start + static_cast<std::int64_t>(i)).iso() << ',' << shortest(values[i]) << '\n';
  }
}

void write_accuracy_table(std::ostream& out, const EvaluationReport& report) {
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-8s %8s %6s %14s %14s %10s %9s\n", "cell", "treatment", "horizon",
                "year", "predicted", "actual", "accuracy%", "missing%");
  out << line;
  for (const ReportRow& r : report.rows) {
    const std::string cell(cell_kind_name(r.cell));
    const std::string treat(treatment_name(r.treatment));
    if (r.ok) {
      std::snprintf(line, sizeof line, "%-10s %-8s %8lld %6d %14.2f %14.2f %10.2f %9.2f\n", cell.c_str(),
                    treat.c_str(), static_cast<long long>(r.horizon_hours), r.year, r.predicted_aadt,
                    r.actual_aadt, r.accuracy_pct, r.missing_pct);
    } else {
      std::snprintf(line, sizeof line, "%-10s %-8s %8lld %6d %14s %14.2f %10s %9.2f  (%s)\n", cell.c_str(),
                    treat.c_str(), static_cast<long long>(r.horizon_hours), r.year, "failed", r.actual_aadt,
                    "-", r.missing_pct, r.error.c_str());
    }
    out << line;
  }
}

}  // namespace aadt
