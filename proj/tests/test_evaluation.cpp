#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aadtcast/error.hpp"
#include "aadtcast/evaluation.hpp"
#include "aadtcast/io.hpp"
#include "aadtcast/random.hpp"

#include <json.hpp>

#include <cmath>
#include <set>
#include <sstream>

using namespace aadt;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an aadt::Error");
  return ErrorCode::Usage;
}

HourlySeries constant(int year, std::size_t hours, double v) {
  return HourlySeries(CalendarHour::start_of_year(year), OptionalValues(hours, v));
}

ForecastConfig tiny_config() {
  ForecastConfig c;
  c.hidden_size = 4;
  c.window_length = 48;
  c.window_stride = 48;
  c.epochs = 1;
  c.batch_size = 32;
  c.test_years = 1;
  c.threads = 1;
  c.rf_trees = 4;
  c.rf_iters = 1;
  c.mice_cycles = 2;
  c.em_max_iters = 5;
  return c;
}

SyntheticData synthetic(int years, double missing, std::uint64_t seed = 5) {
  SyntheticSpec s;
  s.years = years;
  s.missing_rate = missing;
  s.seed = seed;
  return generate_synthetic(s);
}

ReportRow row(CellKind cell, Treatment t, int year, double acc, std::int64_t h = 8760) {
  ReportRow r;
  r.station = "X";
  r.cell = cell;
  r.treatment = t;
  r.horizon_hours = h;
  r.year = year;
  r.accuracy_pct = acc;
  return r;
}

std::string csv_of(const EvaluationReport& r) {
  std::ostringstream os;
  write_report_csv(os, r);
  return os.str();
}

std::string json_of(const EvaluationReport& r) {
  std::ostringstream os;
  write_report_json(os, r);
  return os.str();
}

}  // namespace

TEST_CASE("annual average daily traffic") {
  const auto blocks = compute_aadt(constant(2015, 8760, 100.0));
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].aadt == 2400.0);
  CHECK(blocks[0].n_days == 365);

  const auto leap = compute_aadt(constant(2016, 8784, 1.0));
  CHECK(leap[0].n_days == 366);
  CHECK(leap[0].aadt == 24.0);

  const auto two = compute_aadt(constant(2015, 8760 + 8784, 3.0));
  REQUIRE(two.size() == 2);
  CHECK(two[1].year == 2016);
  CHECK(two[1].aadt == 72.0);

  CHECK(code_of([] { compute_aadt(constant(2015, 8000, 1.0)); }) == ErrorCode::PartialYear);
  CHECK(code_of([] {
          compute_aadt(HourlySeries(CalendarHour::from_civil(2015, 1, 1, 1), OptionalValues(8760, 1.0)));
        }) == ErrorCode::PartialYear);
  OptionalValues gap(8760, 1.0);
  gap[77].reset();
  CHECK(code_of([&] { compute_aadt(HourlySeries(CalendarHour::start_of_year(2015), gap)); }) ==
        ErrorCode::IncompleteActuals);
}

TEST_CASE("aadt is linear in the hourly volumes") {
  Rng rng(8);
  OptionalValues a(8760), b(8760), mix(8760);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.uniform(0.0, 1000.0);
    b[i] = rng.uniform(0.0, 1000.0);
    mix[i] = 2.5 * *a[i] + 0.75 * *b[i];
  }
  const auto start = CalendarHour::start_of_year(2013);
  const double aa = compute_aadt(HourlySeries(start, a))[0].aadt;
  const double ab = compute_aadt(HourlySeries(start, b))[0].aadt;
  const double am = compute_aadt(HourlySeries(start, mix))[0].aadt;
  CHECK(am == doctest::Approx(2.5 * aa + 0.75 * ab).epsilon(1e-12));
}

TEST_CASE("accuracy") {
  CHECK(accuracy(1000.0, 1000.0) == 100.0);
  CHECK(accuracy(985.0, 1000.0) == doctest::Approx(98.5).epsilon(1e-12));
  CHECK(accuracy(1015.0, 1000.0) == doctest::Approx(98.5).epsilon(1e-12));
  CHECK(accuracy(0.0, 1000.0) == 0.0);
  CHECK(code_of([] { accuracy(5.0, 0.0); }) == ErrorCode::InvalidActual);
  CHECK(code_of([] { accuracy(5.0, -3.0); }) == ErrorCode::InvalidActual);

  Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    const double p = rng.uniform(1.0, 1e5);
    const double a = rng.uniform(1.0, 1e5);
    const double k = rng.uniform(0.01, 100.0);
    CHECK(accuracy(p, a) <= 100.0);
    CHECK(accuracy(k * p, k * a) == doctest::Approx(accuracy(p, a)).epsilon(1e-9));
  }
}

TEST_CASE("hourly mape") {
  const OptionalValues pred{110.0, 90.0, std::nullopt, 5.0};
  const OptionalValues act{100.0, 100.0, 100.0, std::nullopt};
  CHECK(hourly_mape(pred, act) == doctest::Approx(10.0));
  CHECK(std::isnan(hourly_mape(OptionalValues{std::nullopt}, OptionalValues{1.0})));
  CHECK(code_of([&] { hourly_mape(pred, OptionalValues{1.0}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("best variant selection and ties") {
  EvaluationReport r;
  r.rows = {
      row(CellKind::SimpleRnn, Treatment::Knn, 2016, 97.0),
      row(CellKind::Lstm, Treatment::Mean, 2016, 97.0),
      row(CellKind::Gru, Treatment::Mean, 2016, 97.0),
      row(CellKind::Lstm, Treatment::Rf, 2016, 96.0),
      row(CellKind::Gru, Treatment::Em, 2017, 91.0),
      row(CellKind::Lstm, Treatment::Masking, 2017, 95.0),
      row(CellKind::Lstm, Treatment::Median, 2015, 80.0, 17520),
  };
  ReportRow failed = row(CellKind::Lstm, Treatment::Mice, 2017, NAN);
  failed.ok = false;
  r.rows.push_back(failed);

  const auto best = best_variants(r);
  REQUIRE(best.size() == 3);
  CHECK(best[0].year == 2016);
  CHECK(best[0].treatment == Treatment::Mean);
  CHECK(best[0].cell == CellKind::Gru);
  CHECK(best[1].year == 2017);
  CHECK(best[1].treatment == Treatment::Masking);
  CHECK(best[2].horizon_hours == 17520);

  // Positive affine rescaling of every accuracy keeps the winners.
  EvaluationReport scaled = r;
  for (auto& x : scaled.rows) x.accuracy_pct = 0.5 * x.accuracy_pct + 3.0;
  const auto again = best_variants(scaled);
  REQUIRE(again.size() == best.size());
  for (std::size_t i = 0; i < best.size(); ++i) {
    CHECK(again[i].cell == best[i].cell);
    CHECK(again[i].treatment == best[i].treatment);
  }
}

TEST_CASE("forecast years lie inside the test partition") {
  const auto s = synthetic(4, 0.0).truth;
  ForecastConfig c;
  CHECK(forecast_years(s, c) == std::vector<int>{2010, 2011});
  c.test_years = 1;
  CHECK(forecast_years(s, c) == std::vector<int>{2011});
  c.test_hours = 8760 + 100;
  CHECK(forecast_years(s, c) == std::vector<int>{2011});
}

TEST_CASE("a model that reproduces each year's mean scores 100") {
  const std::size_t n = 8784 + 8760 + 8760;
  OptionalValues v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (i % 2 == 0) ? 100.0 : 200.0;
  const HourlySeries s(CalendarHour::start_of_year(2008), v, "ALT");

  ForecastConfig c = tiny_config();
  const PreparedData prep = prepare_data(s, c);
  TrainedModel m;
  m.config = c;
  m.normalizer = prep.normalizer;
  m.params = ModelParams(c.cell_kind, c.hidden_size);
  m.params.dense_bias() = transform(150.0, prep.normalizer);
  m.train_input_hours = prep.train.size();
  m.fingerprint = training_fingerprint(s, m.train_input_hours);

  const auto report = evaluate_model(m, s);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].year == 2010);
  CHECK(report.rows[0].actual_aadt == 3600.0);
  CHECK(report.rows[0].accuracy_pct == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(report.rows[0].mape_pct == doctest::Approx(100.0 * (50.0 / 100.0 + 50.0 / 200.0) / 2.0));
  CHECK(report.trends.size() == 1);
  CHECK(report.actual_trend.size() == 8760);

  const HourlySeries other(s.start(), OptionalValues(n, 120.0), "ALT");
  CHECK(code_of([&] { evaluate_model(m, other); }) == ErrorCode::ModelMismatch);
}

TEST_CASE("gappy actuals are median filled") {
  const auto data = synthetic(3, 0.05, 17);
  ForecastConfig c = tiny_config();
  const auto m = train(data.gappy, c);
  const auto vs_gappy = evaluate_model(m, data.gappy);
  const auto vs_truth = evaluate_model(m, data.gappy, data.truth);
  REQUIRE(vs_gappy.rows.size() == 1);
  CHECK(vs_gappy.rows[0].predicted_aadt == vs_truth.rows[0].predicted_aadt);
  CHECK(vs_truth.rows[0].actual_aadt == compute_aadt(HourlySeries(CalendarHour::start_of_year(2010),
                                                                  OptionalValues(data.truth.values().end() - 8760,
                                                                                 data.truth.values().end())))[0]
                                              .aadt);
  // Missing share is measured on the observed series either way.
  CHECK(vs_gappy.rows[0].missing_pct == vs_truth.rows[0].missing_pct);
  CHECK(vs_gappy.rows[0].missing_pct > 3.0);
  CHECK(vs_gappy.rows[0].actual_aadt != vs_truth.rows[0].actual_aadt);
}

TEST_CASE("grid on a gap-free series") {
  const auto s = synthetic(3, 0.0, 2).truth;
  const auto report = run_grid(s, tiny_config(), {}, 0);
  REQUIRE(report.rows.size() == 21);
  std::set<double> per_cell[3];
  for (const auto& r : report.rows) {
    REQUIRE(r.ok);
    per_cell[static_cast<int>(r.cell)].insert(r.accuracy_pct);
    CHECK(r.missing_pct == 0.0);
  }
  for (const auto& set : per_cell) CHECK(set.size() == 1);
  CHECK(report.trends.size() == 21);
  CHECK(best_variants(report).size() == 1);

  const int years[] = {2010};
  CHECK(run_grid(s, tiny_config(), years, 1).rows == report.rows);
  const int bad[] = {2009};
  CHECK(code_of([&] { run_grid(s, tiny_config(), bad); }) == ErrorCode::InvalidSplit);
  const int gap[] = {2008, 2010};
  CHECK(code_of([&] { run_grid(s, tiny_config(), gap); }) == ErrorCode::InvalidSplit);
}

TEST_CASE("failing variants become rows") {
  auto data = synthetic(3, 0.0, 4);
  OptionalValues v = data.truth.values();
  // Hour 5 of every training day is missing: the matrix fills cannot fit.
  for (std::size_t i = 5; i < 8784; i += 24) v[i].reset();
  const HourlySeries s(data.truth.start(), v, "HOLE");
  const auto report = run_grid(s, tiny_config(), {}, 2);
  REQUIRE(report.rows.size() == 21);
  std::size_t failed = 0;
  for (const auto& r : report.rows) {
    const bool matrix = r.treatment == Treatment::Em || r.treatment == Treatment::Mice ||
                        r.treatment == Treatment::Rf || r.treatment == Treatment::Knn;
    CHECK(r.ok != matrix);
    if (!r.ok) {
      ++failed;
      CHECK(std::isnan(r.accuracy_pct));
      CHECK_FALSE(r.error.empty());
    }
  }
  CHECK(failed == 12);
  CHECK(report.trends.size() == 9);
  const std::string csv = csv_of(report);
  // Failed rows leave the predicted and accuracy fields empty.
  CHECK(csv.find(",EM,8760,2010,,") != std::string::npos);
}

TEST_CASE("horizons without enough history are skipped") {
  const auto s = synthetic(3, 0.0, 6).truth;
  const std::int64_t horizons[] = {kHorizonOneYear, kHorizonTwoYears, kHorizonThreeYears};
  const auto report = run_multi_horizon(s, tiny_config(), horizons);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].horizon_hours == kHorizonOneYear);
  REQUIRE(report.skipped.size() == 2);
  CHECK(report.skipped[0].horizon_hours == kHorizonTwoYears);
  CHECK(report.skipped[1].horizon_hours == kHorizonThreeYears);

  const auto grid = run_grid_horizons(s, tiny_config(), horizons, 0);
  CHECK(grid.rows.size() == 21);
  CHECK(grid.skipped == report.skipped);
  CHECK(code_of([&] { run_grid(s, [] {
                        auto c = tiny_config();
                        c.horizon_hours = kHorizonTwoYears;
                        return c;
                      }()); }) == ErrorCode::InsufficientData);
}

TEST_CASE("reports are deterministic and well formed") {
  const auto data = synthetic(3, 0.03, 9);
  const auto a = run_grid(data.gappy, tiny_config(), {}, 3, data.truth);
  const auto b = run_grid(data.gappy, tiny_config(), {}, 1, data.truth);
  CHECK(csv_of(a) == csv_of(b));
  CHECK(json_of(a) == json_of(b));

  std::istringstream csv(csv_of(a));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "station,cell,treatment,horizon_hours,year,predicted_aadt,actual_aadt,accuracy_pct,missing_pct,seed");
  std::size_t lines = 0;
  while (std::getline(csv, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), ',') == 9);
  }
  CHECK(lines == 21);

  const auto j = nlohmann::json::parse(json_of(a));
  CHECK(j.at("station") == "SYN-1");
  CHECK(j.at("rows").size() == 21);
  CHECK(j.at("best").size() == 1);
  CHECK(j.at("rows")[0].contains("mape_pct"));

  std::ostringstream trend;
  write_trend_csv(trend, a.actual_start, a.actual_trend);
  CHECK(trend.str().rfind("timestamp,value\n2010-01-01T00,", 0) == 0);
  std::ostringstream table;
  write_accuracy_table(table, a);
  CHECK(table.str().find("Lstm") != std::string::npos);
}
