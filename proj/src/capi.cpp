#include "aadtcast/aadtcast.h"

#include "aadtcast/error.hpp"
#include "aadtcast/evaluation.hpp"
#include "aadtcast/forecast.hpp"
#include "aadtcast/impute.hpp"
#include "aadtcast/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <optional>
#include <sstream>
#include <string>

struct aadt_series {
  aadt::HourlySeries value;
};

struct aadt_config {
  aadt::ForecastConfig value;
  std::string text;
};

struct aadt_model {
  aadt::TrainedModel value;
};

struct aadt_report {
  aadt::EvaluationReport value;
  std::vector<aadt::BestVariant> best;
  std::string table;
};

namespace {

thread_local std::string g_message;
thread_local std::string g_code;

int fail(aadt::ErrorCode code, const std::string& message) {
  g_code = std::string(aadt::error_code_name(code));
  g_message = message;
  return static_cast<int>(aadt::error_category(code));
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_code.clear();
    g_message.clear();
    return AADT_OK;
  } catch (const aadt::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return fail(aadt::ErrorCode::InsufficientData, "out of memory");
  } catch (const std::exception& e) {
    return fail(aadt::ErrorCode::InvalidArgument, e.what());
  }
}

void require(const void* p, const char* name) {
  if (!p) throw aadt::Error(aadt::ErrorCode::Usage, std::string(name) + " must not be null");
}

template <std::size_t N>
void copy_text(char (&dst)[N], std::string_view src) {
  const std::size_t n = std::min(N - 1, src.size());
  std::memcpy(dst, src.data(), n);
  dst[n] = '\0';
}

std::optional<aadt::HourlySeries> maybe(const aadt_series* s) {
  if (!s) return std::nullopt;
  return s->value;
}

std::vector<std::int64_t> horizon_list(const int64_t* horizons, size_t count) {
  if (!horizons || count == 0) return {aadt::kHorizonOneYear};
  return std::vector<std::int64_t>(horizons, horizons + count);
}

template <typename Fn>
void write_file(const char* path, Fn&& fn) {
  require(path, "path");
  std::ofstream out(path);
  if (!out) throw aadt::Error(aadt::ErrorCode::Io, std::string("cannot write ") + path);
  fn(out);
  if (!out) throw aadt::Error(aadt::ErrorCode::Io, std::string("failed writing ") + path);
}

}  // namespace

extern "C" {

const char* aadt_last_error(void) { return g_message.c_str(); }
const char* aadt_last_error_code(void) { return g_code.c_str(); }
const char* aadt_version(void) { return "1.0.0"; }

// ─── Series ──────────────────────────────────────────────────────────────────

int aadt_series_create(int64_t start_hours, const double* values, size_t count, const char* station,
                       aadt_series** out) {
  return guarded([&] {
    require(out, "out");
    require(values, "values");
    aadt::OptionalValues v(count);
    for (size_t i = 0; i < count; ++i) {
      if (!std::isnan(values[i])) v[i] = values[i];
    }
    *out = new aadt_series{aadt::HourlySeries(aadt::CalendarHour(start_hours), std::move(v), station ? station : "")};
  });
}

int aadt_series_load_csv(const char* path, aadt_series** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new aadt_series{aadt::parse_csv_file(path)};
  });
}

int aadt_series_save_csv(const aadt_series* series, const char* path) {
  return guarded([&] {
    require(series, "series");
    require(path, "path");
    aadt::write_csv_file(path, series->value);
  });
}

int aadt_series_summary_get(const aadt_series* series, aadt_series_summary* out) {
  return guarded([&] {
    require(series, "series");
    require(out, "out");
    const auto& s = series->value;
    *out = aadt_series_summary{};
    out->length = s.size();
    out->missing = s.missing_count();
    out->missing_pct = 100.0 * s.missing_fraction();
    out->start_hours = s.start().hours_since_epoch();
    copy_text(out->start, s.start().iso());
    copy_text(out->end, s.end().iso());
    copy_text(out->station, s.station_id());
  });
}

int aadt_series_values(const aadt_series* series, double* out, size_t capacity) {
  return guarded([&] {
    require(series, "series");
    require(out, "out");
    const auto& v = series->value.values();
    if (capacity < v.size()) throw aadt::Error(aadt::ErrorCode::Usage, "output buffer too small");
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] ? *v[i] : std::numeric_limits<double>::quiet_NaN();
  });
}

void aadt_series_free(aadt_series* series) { delete series; }

int aadt_synth_from_file(const char* spec_path, aadt_series** gappy, aadt_series** truth) {
  return guarded([&] {
    require(spec_path, "spec_path");
    require(gappy, "gappy");
    require(truth, "truth");
    auto data = aadt::generate_synthetic(aadt::read_synthetic_spec(spec_path));
    auto* g = new aadt_series{std::move(data.gappy)};
    *truth = new aadt_series{std::move(data.truth)};
    *gappy = g;
  });
}

int aadt_impute(const aadt_series* series, const char* method, const aadt_config* config, aadt_series** out,
                size_t* filled) {
  return guarded([&] {
    require(series, "series");
    require(method, "method");
    require(out, "out");
    const auto treatment = aadt::parse_treatment(method);
    if (!treatment) throw aadt::Error(aadt::ErrorCode::Usage, std::string("unknown method '") + method + "'");
    const aadt::ForecastConfig cfg = config ? config->value : aadt::ForecastConfig{};
    const auto& s = series->value;
    aadt::OptionalValues logs(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
      if (s.values()[i]) logs[i] = aadt::log_volume(*s.values()[i]);
    }
    auto [treated, rest] = aadt::treat_log_inputs(*treatment, logs, {}, s.start().hour_of_day(), cfg);
    aadt::OptionalValues raw(treated.size());
    size_t count = 0;
    for (size_t i = 0; i < treated.size(); ++i) {
      if (s.values()[i]) {
        raw[i] = s.values()[i];
      } else if (treated[i]) {
        raw[i] = aadt::exp_volume(*treated[i]);
        ++count;
      }
    }
    *out = new aadt_series{aadt::HourlySeries(s.start(), std::move(raw), s.station_id(), s.functional_class())};
    if (filled) *filled = count;
  });
}

int aadt_imputation_rmse(const aadt_series* filled, const aadt_series* truth, const aadt_series* gappy,
                         double* out) {
  return guarded([&] {
    require(filled, "filled");
    require(truth, "truth");
    require(gappy, "gappy");
    require(out, "out");
    const auto& f = filled->value;
    const auto& t = truth->value;
    const auto& g = gappy->value;
    if (f.size() != t.size() || g.size() != t.size() || f.start() != t.start() || g.start() != t.start()) {
      throw aadt::Error(aadt::ErrorCode::ShapeMismatch, "series do not cover the same hours");
    }
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < t.size(); ++i) {
      if (g.values()[i] || !t.values()[i] || !f.values()[i]) continue;
      const double d = *f.values()[i] - *t.values()[i];
      sum += d * d;
      ++n;
    }
    if (n == 0) throw aadt::Error(aadt::ErrorCode::NoObservedData, "no gap has a known true value");
    *out = std::sqrt(sum / static_cast<double>(n));
  });
}

// ─── Config ──────────────────────────────────────────────────────────────────

int aadt_config_new(aadt_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new aadt_config{};
  });
}

int aadt_config_load(const char* path, aadt_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new aadt_config{aadt::read_forecast_config(path), {}};
  });
}

int aadt_config_set(aadt_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    aadt::ForecastConfig next = config->value;
    aadt::apply_config_setting(next, key, value);
    aadt::validate(next);
    config->value = next;
  });
}

const char* aadt_config_describe(aadt_config* config) {
  if (!config) return "";
  config->text = aadt::format_config(config->value);
  return config->text.c_str();
}

void aadt_config_free(aadt_config* config) { delete config; }

// ─── Models ──────────────────────────────────────────────────────────────────

int aadt_train(const aadt_series* series, const aadt_config* config, aadt_model** out) {
  return guarded([&] {
    require(series, "series");
    require(out, "out");
    const aadt::ForecastConfig cfg = config ? config->value : aadt::ForecastConfig{};
    *out = new aadt_model{aadt::train(series->value, cfg)};
  });
}

int aadt_model_save(const aadt_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    aadt::save_model(path, model->value);
  });
}

int aadt_model_load(const char* path, aadt_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new aadt_model{aadt::load_model(path)};
  });
}

int aadt_model_loss_trace(const aadt_model* model, double* out, size_t capacity, size_t* count) {
  return guarded([&] {
    require(model, "model");
    const auto& trace = model->value.training_loss_trace;
    if (count) *count = trace.size();
    if (out) {
      const size_t n = std::min(capacity, trace.size());
      std::copy(trace.begin(), trace.begin() + static_cast<std::ptrdiff_t>(n), out);
    }
  });
}

int aadt_predict(const aadt_model* model, const aadt_series* series, aadt_series** out) {
  return guarded([&] {
    require(model, "model");
    require(series, "series");
    require(out, "out");
    *out = new aadt_series{aadt::predict(model->value, series->value)};
  });
}

int aadt_prediction_save_csv(const aadt_series* predicted, const char* path) {
  return guarded([&] {
    require(predicted, "predicted");
    write_file(path, [&](std::ostream& o) { aadt::write_prediction_csv(o, predicted->value); });
  });
}

void aadt_model_free(aadt_model* model) { delete model; }

// ─── Evaluation ──────────────────────────────────────────────────────────────

int aadt_evaluate(const aadt_model* model, const aadt_series* series, const aadt_series* truth, aadt_report** out) {
  return guarded([&] {
    require(model, "model");
    require(series, "series");
    require(out, "out");
    auto report = aadt::evaluate_model(model->value, series->value, maybe(truth));
    auto best = aadt::best_variants(report);
    *out = new aadt_report{std::move(report), std::move(best), {}};
  });
}

int aadt_grid(const aadt_series* series, const aadt_config* config, const int64_t* horizons, size_t horizon_count,
              unsigned jobs, const aadt_series* truth, aadt_report** out) {
  return guarded([&] {
    require(series, "series");
    require(out, "out");
    const aadt::ForecastConfig cfg = config ? config->value : aadt::ForecastConfig{};
    const auto h = horizon_list(horizons, horizon_count);
    auto report = aadt::run_grid_horizons(series->value, cfg, h, jobs, maybe(truth));
    auto best = aadt::best_variants(report);
    *out = new aadt_report{std::move(report), std::move(best), {}};
  });
}

int aadt_multi_horizon(const aadt_series* series, const aadt_config* config, const int64_t* horizons,
                       size_t horizon_count, const aadt_series* truth, aadt_report** out) {
  return guarded([&] {
    require(series, "series");
    require(out, "out");
    const aadt::ForecastConfig cfg = config ? config->value : aadt::ForecastConfig{};
    std::vector<std::int64_t> h = horizon_list(horizons, horizon_count);
    if (!horizons || horizon_count == 0) {
      h = {aadt::kHorizonOneYear, aadt::kHorizonTwoYears, aadt::kHorizonThreeYears};
    }
    auto report = aadt::run_multi_horizon(series->value, cfg, h, maybe(truth));
    auto best = aadt::best_variants(report);
    *out = new aadt_report{std::move(report), std::move(best), {}};
  });
}

size_t aadt_report_row_count(const aadt_report* report) { return report ? report->value.rows.size() : 0; }

int aadt_report_row_get(const aadt_report* report, size_t index, aadt_report_row* out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    if (index >= report->value.rows.size()) throw aadt::Error(aadt::ErrorCode::Usage, "row index out of range");
    const auto& r = report->value.rows[index];
    *out = aadt_report_row{};
    copy_text(out->station, r.station);
    copy_text(out->cell, aadt::cell_kind_name(r.cell));
    copy_text(out->treatment, aadt::treatment_name(r.treatment));
    out->horizon_hours = r.horizon_hours;
    out->year = r.year;
    out->predicted_aadt = r.predicted_aadt;
    out->actual_aadt = r.actual_aadt;
    out->accuracy_pct = r.accuracy_pct;
    out->mape_pct = r.mape_pct;
    out->missing_pct = r.missing_pct;
    out->seed = r.seed;
    out->ok = r.ok ? 1 : 0;
    copy_text(out->error, r.error);
  });
}

size_t aadt_report_best_count(const aadt_report* report) { return report ? report->best.size() : 0; }

int aadt_report_best_get(const aadt_report* report, size_t index, aadt_best_variant* out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    if (index >= report->best.size()) throw aadt::Error(aadt::ErrorCode::Usage, "best index out of range");
    const auto& b = report->best[index];
    *out = aadt_best_variant{};
    out->horizon_hours = b.horizon_hours;
    out->year = b.year;
    copy_text(out->cell, aadt::cell_kind_name(b.cell));
    copy_text(out->treatment, aadt::treatment_name(b.treatment));
    out->accuracy_pct = b.accuracy_pct;
  });
}

size_t aadt_report_skip_count(const aadt_report* report) { return report ? report->value.skipped.size() : 0; }

const char* aadt_report_skip_reason(const aadt_report* report, size_t index, int64_t* horizon_hours) {
  if (!report || index >= report->value.skipped.size()) return nullptr;
  const auto& s = report->value.skipped[index];
  if (horizon_hours) *horizon_hours = s.horizon_hours;
  return s.reason.c_str();
}

int aadt_report_save_csv(const aadt_report* report, const char* path) {
  return guarded([&] {
    require(report, "report");
    write_file(path, [&](std::ostream& o) { aadt::write_report_csv(o, report->value); });
  });
}

int aadt_report_save_json(const aadt_report* report, const char* path) {
  return guarded([&] {
    require(report, "report");
    write_file(path, [&](std::ostream& o) { aadt::write_report_json(o, report->value); });
  });
}

int aadt_report_save_trend(const aadt_report* report, long index, const char* path) {
  return guarded([&] {
    require(report, "report");
    const auto& r = report->value;
    if (index < -1 || index >= static_cast<long>(r.trends.size())) {
      throw aadt::Error(aadt::ErrorCode::Usage, "trend index out of range");
    }
    write_file(path, [&](std::ostream& o) {
      if (index == -1) {
        aadt::write_trend_csv(o, r.actual_start, r.actual_trend);
      } else {
        const auto& t = r.trends[static_cast<std::size_t>(index)];
        aadt::write_trend_csv(o, t.start, t.values);
      }
    });
  });
}

const char* aadt_report_table(aadt_report* report) {
  if (!report) return "";
  std::ostringstream os;
  aadt::write_accuracy_table(os, report->value);
  report->table = os.str();
  return report->table.c_str();
}

void aadt_report_free(aadt_report* report) { delete report; }

// ─── Gradient check ──────────────────────────────────────────────────────────

int aadt_gradcheck(const char* cell, int seeds, aadt_gradcheck_result* out) {
  return guarded([&] {
    require(cell, "cell");
    require(out, "out");
    const auto kind = aadt::parse_cell_kind(cell);
    if (!kind) throw aadt::Error(aadt::ErrorCode::Usage, std::string("unknown cell '") + cell + "'");
    if (seeds < 1) throw aadt::Error(aadt::ErrorCode::Usage, "seeds must be positive");
    const auto r = aadt::gradient_check_suite(*kind, seeds);
    *out = aadt_gradcheck_result{};
    copy_text(out->cell, aadt::cell_kind_name(r.cell));
    out->cases = r.cases;
    out->max_relative_error = r.max_relative_error;
    out->passed = r.passed ? 1 : 0;
  });
}

}  // extern "C"
