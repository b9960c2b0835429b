#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aadtcast/aadtcast.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("aadtcast_capi_" + name)).string();
}

/// Three years from 2008 with 2% gaps.
std::string write_spec() {
  const auto path = temp_path("spec.txt");
  std::ofstream out(path);
  out << "years = 3\nstart_year = 2008\nmissing_rate = 0.02\nseed = 4\nstation_id = CAPI-1\n";
  return path;
}

aadt_config* tiny_config() {
  aadt_config* c = nullptr;
  REQUIRE(aadt_config_new(&c) == AADT_OK);
  for (auto [k, v] : {std::pair{"hidden_size", "4"}, {"window_length", "48"}, {"window_stride", "48"},
                      {"epochs", "1"}, {"test_years", "1"}, {"threads", "1"}, {"rf_trees", "3"},
                      {"rf_iters", "1"}, {"mice_cycles", "2"}, {"em_max_iters", "5"}}) {
    REQUIRE(aadt_config_set(c, k, v) == AADT_OK);
  }
  return c;
}

}  // namespace

TEST_CASE("version and error state") {
  CHECK(std::string(aadt_version()) == "1.0.0");
  aadt_series* s = nullptr;
  CHECK(aadt_series_load_csv("/nonexistent/x.csv", &s) == AADT_ERR_DATA);
  CHECK(s == nullptr);
  CHECK(std::string(aadt_last_error_code()) == "io");
  CHECK(std::strlen(aadt_last_error()) > 0);
  CHECK(aadt_series_load_csv(nullptr, &s) == AADT_ERR_USAGE);
  CHECK(std::string(aadt_last_error_code()) == "usage");
}

TEST_CASE("series handles") {
  const double values[] = {10.0, NAN, 30.0, 40.0};
  aadt_series* s = nullptr;
  // 2016-01-01T00 is 403224 hours after the epoch.
  REQUIRE(aadt_series_create(403224, values, 4, "ATR-9", &s) == AADT_OK);
  aadt_series_summary sum{};
  REQUIRE(aadt_series_summary_get(s, &sum) == AADT_OK);
  CHECK(sum.length == 4);
  CHECK(sum.missing == 1);
  CHECK(sum.missing_pct == doctest::Approx(25.0));
  CHECK(std::string(sum.start) == "2016-01-01T00");
  CHECK(std::string(sum.end) == "2016-01-01T04");
  CHECK(std::string(sum.station) == "ATR-9");

  double back[4];
  REQUIRE(aadt_series_values(s, back, 4) == AADT_OK);
  CHECK(back[0] == 10.0);
  CHECK(std::isnan(back[1]));
  CHECK(aadt_series_values(s, back, 2) == AADT_ERR_USAGE);

  const auto path = temp_path("series.csv");
  REQUIRE(aadt_series_save_csv(s, path.c_str()) == AADT_OK);
  aadt_series* loaded = nullptr;
  REQUIRE(aadt_series_load_csv(path.c_str(), &loaded) == AADT_OK);
  double again[4];
  REQUIRE(aadt_series_values(loaded, again, 4) == AADT_OK);
  CHECK(again[3] == 40.0);
  aadt_series_free(loaded);
  aadt_series_free(s);
  std::remove(path.c_str());

  const double bad[] = {1.0, -5.0};
  CHECK(aadt_series_create(0, bad, 2, nullptr, &s) == AADT_ERR_NUMERIC);
  CHECK(std::string(aadt_last_error_code()) == "numeric-domain");
  aadt_series_free(nullptr);
}

TEST_CASE("config handles") {
  aadt_config* c = nullptr;
  REQUIRE(aadt_config_new(&c) == AADT_OK);
  CHECK(aadt_config_set(c, "cell", "gru") == AADT_OK);
  CHECK(aadt_config_set(c, "epochs", "-3") == AADT_ERR_USAGE);
  CHECK(aadt_config_set(c, "nonsense", "1") == AADT_ERR_USAGE);
  const std::string text = aadt_config_describe(c);
  CHECK(text.find("cell_kind = Gru") != std::string::npos);
  aadt_config_free(c);
  CHECK(aadt_config_load("/nonexistent/cfg", &c) == AADT_ERR_DATA);
}

TEST_CASE("synthesis, imputation and scoring") {
  const auto spec = write_spec();
  aadt_series* gappy = nullptr;
  aadt_series* truth = nullptr;
  REQUIRE(aadt_synth_from_file(spec.c_str(), &gappy, &truth) == AADT_OK);
  aadt_series_summary sum{};
  REQUIRE(aadt_series_summary_get(gappy, &sum) == AADT_OK);
  CHECK(sum.missing == static_cast<size_t>(std::llround(0.02 * static_cast<double>(sum.length))));

  aadt_series* filled = nullptr;
  size_t count = 0;
  REQUIRE(aadt_impute(gappy, "median", nullptr, &filled, &count) == AADT_OK);
  CHECK(count == sum.missing);
  double rmse_median = 0.0;
  REQUIRE(aadt_imputation_rmse(filled, truth, gappy, &rmse_median) == AADT_OK);
  CHECK(rmse_median > 0.0);
  aadt_series_free(filled);
  CHECK(aadt_impute(gappy, "magic", nullptr, &filled, &count) == AADT_ERR_USAGE);

  aadt_config* cfg = tiny_config();
  aadt_model* model = nullptr;
  REQUIRE(aadt_train(gappy, cfg, &model) == AADT_OK);
  double trace[4];
  size_t n = 0;
  REQUIRE(aadt_model_loss_trace(model, trace, 4, &n) == AADT_OK);
  CHECK(n == 1);
  CHECK(std::isfinite(trace[0]));

  const auto model_path = temp_path("model.txt");
  REQUIRE(aadt_model_save(model, model_path.c_str()) == AADT_OK);
  aadt_model* loaded = nullptr;
  REQUIRE(aadt_model_load(model_path.c_str(), &loaded) == AADT_OK);

  aadt_series* p1 = nullptr;
  aadt_series* p2 = nullptr;
  REQUIRE(aadt_predict(model, gappy, &p1) == AADT_OK);
  REQUIRE(aadt_predict(loaded, gappy, &p2) == AADT_OK);
  std::vector<double> a(sum.length), b(sum.length);
  REQUIRE(aadt_series_values(p1, a.data(), a.size()) == AADT_OK);
  REQUIRE(aadt_series_values(p2, b.data(), b.size()) == AADT_OK);
  CHECK(a == b);
  CHECK(aadt_predict(model, truth, &p2) == AADT_ERR_DATA);
  CHECK(std::string(aadt_last_error_code()) == "model-mismatch");

  aadt_report* report = nullptr;
  REQUIRE(aadt_evaluate(model, gappy, truth, &report) == AADT_OK);
  REQUIRE(aadt_report_row_count(report) == 1);
  aadt_report_row row{};
  REQUIRE(aadt_report_row_get(report, 0, &row) == AADT_OK);
  CHECK(row.year == 2010);
  CHECK(row.ok == 1);
  CHECK(std::string(row.station) == "CAPI-1");
  CHECK(row.accuracy_pct <= 100.0);
  CHECK(aadt_report_row_get(report, 5, &row) == AADT_ERR_USAGE);
  aadt_report_free(report);

  aadt_series_free(p1);
  aadt_series_free(p2);
  aadt_model_free(loaded);
  aadt_model_free(model);
  aadt_config_free(cfg);
  aadt_series_free(gappy);
  aadt_series_free(truth);
  std::remove(model_path.c_str());
  std::remove(spec.c_str());
}

TEST_CASE("grid and horizons through the C interface") {
  const auto spec = write_spec();
  aadt_series* gappy = nullptr;
  aadt_series* truth = nullptr;
  REQUIRE(aadt_synth_from_file(spec.c_str(), &gappy, &truth) == AADT_OK);
  aadt_config* cfg = tiny_config();

  aadt_report* grid = nullptr;
  REQUIRE(aadt_grid(gappy, cfg, nullptr, 0, 0, nullptr, &grid) == AADT_OK);
  CHECK(aadt_report_row_count(grid) == 21);
  REQUIRE(aadt_report_best_count(grid) == 1);
  aadt_best_variant best{};
  REQUIRE(aadt_report_best_get(grid, 0, &best) == AADT_OK);
  CHECK(best.year == 2010);
  const std::string table = aadt_report_table(grid);
  CHECK(table.find(best.treatment) != std::string::npos);

  const auto csv = temp_path("grid.csv");
  const auto json = temp_path("grid.json");
  const auto trend = temp_path("trend.csv");
  CHECK(aadt_report_save_csv(grid, csv.c_str()) == AADT_OK);
  CHECK(aadt_report_save_json(grid, json.c_str()) == AADT_OK);
  CHECK(aadt_report_save_trend(grid, -1, trend.c_str()) == AADT_OK);
  CHECK(aadt_report_save_trend(grid, 0, trend.c_str()) == AADT_OK);
  CHECK(aadt_report_save_trend(grid, 99, trend.c_str()) == AADT_ERR_USAGE);
  aadt_report_free(grid);

  const int64_t horizons[] = {8760, 17520, 26280};
  aadt_report* multi = nullptr;
  REQUIRE(aadt_multi_horizon(gappy, cfg, horizons, 3, truth, &multi) == AADT_OK);
  CHECK(aadt_report_row_count(multi) == 1);
  REQUIRE(aadt_report_skip_count(multi) == 2);
  int64_t h = 0;
  const char* reason = aadt_report_skip_reason(multi, 1, &h);
  REQUIRE(reason != nullptr);
  CHECK(h == 26280);
  CHECK(aadt_report_skip_reason(multi, 2, &h) == nullptr);
  aadt_report_free(multi);

  aadt_config_free(cfg);
  aadt_series_free(gappy);
  aadt_series_free(truth);
  for (const auto& p : {spec, csv, json, trend}) std::remove(p.c_str());
}

TEST_CASE("gradient check through the C interface") {
  aadt_gradcheck_result r{};
  for (const char* cell : {"rnn", "gru", "lstm"}) {
    REQUIRE(aadt_gradcheck(cell, 5, &r) == AADT_OK);
    CHECK(r.cases == 5);
    CHECK(r.passed == 1);
    CHECK(r.max_relative_error < 1e-4);
  }
  CHECK(aadt_gradcheck("tcn", 5, &r) == AADT_ERR_USAGE);
}
