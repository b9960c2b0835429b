#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aadtcast/error.hpp"
#include "aadtcast/evaluation.hpp"
#include "aadtcast/io.hpp"
#include "aadtcast/random.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace aadt;

namespace {

struct Caught {
  ErrorCode code = ErrorCode::Usage;
  std::string message;
};

template <typename Fn>
Caught catch_error(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return {e.code(), e.what()};
  }
  FAIL("expected an aadt::Error");
  return {};
}

HourlySeries parse(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in, "mem.csv");
}

std::string to_csv(const HourlySeries& s) {
  std::ostringstream os;
  write_csv(os, s);
  return os.str();
}

SyntheticSpec flat_spec(double base) {
  SyntheticSpec s;
  s.base_volume = base;
  s.daily_amplitude = 0.0;
  s.weekly_amplitude = 0.0;
  s.yearly_amplitude = 0.0;
  s.growth_rate = 0.0;
  s.noise_std = 0.0;
  return s;
}

}  // namespace

TEST_CASE("timestamps") {
  CHECK(parse_timestamp("2016-02-29T13") == CalendarHour::from_civil(2016, 2, 29, 13));
  CHECK(parse_timestamp("2016-02-29T13:00") == CalendarHour::from_civil(2016, 2, 29, 13));
  CHECK(parse_timestamp("2016-02-29 13:00:00") == CalendarHour::from_civil(2016, 2, 29, 13));
  CHECK(parse_timestamp("2016-02-29T13:00:00Z") == CalendarHour::from_civil(2016, 2, 29, 13));
  for (const char* bad : {"2016-02-29T13:30", "2017-02-29T01", "2016/02/29T13", "2016-02-29", "x"}) {
    INFO(bad);
    CHECK(catch_error([&] { parse_timestamp(bad); }).code == ErrorCode::MalformedSeries);
  }
}

TEST_CASE("csv parsing") {
  const auto s = parse(
      "# station=ATR-7\n"
      "# functional_class=UrbanArterial\n"
      "Timestamp,Volume\n"
      "2015-12-31T22,120\n"
      "2015-12-31T23,NaN\n"
      "2016-01-01T00,\n"
      "2016-01-01T01,nan\n"
      "2016-01-01T02,97.5\n");
  CHECK(s.station_id() == "ATR-7");
  CHECK(s.functional_class() == FunctionalClass::UrbanArterial);
  CHECK(s.start() == CalendarHour::from_civil(2015, 12, 31, 22));
  CHECK(s.values() == OptionalValues{120.0, std::nullopt, std::nullopt, std::nullopt, 97.5});
}

TEST_CASE("csv rejections carry line numbers") {
  const std::string header = "timestamp,volume\n";
  auto gap = catch_error([&] { parse(header + "2016-01-01T00,5\n2016-01-01T02,6\n"); });
  CHECK(gap.code == ErrorCode::MalformedSeries);
  CHECK(gap.message.find("mem.csv:3") != std::string::npos);

  auto disorder = catch_error([&] { parse(header + "2016-01-01T03,5\n2016-01-01T02,6\n"); });
  CHECK(disorder.code == ErrorCode::MalformedSeries);
  CHECK(disorder.message.find("out of order") != std::string::npos);

  auto zero = catch_error([&] { parse(header + "2016-01-01T00,5\n2016-01-01T01,6\n2016-01-01T02,0\n"); });
  CHECK(zero.code == ErrorCode::ZeroVolume);
  CHECK(zero.message.find("mem.csv:4") != std::string::npos);

  CHECK(catch_error([&] { parse(header + "2016-01-01T00,-4\n"); }).code == ErrorCode::MalformedSeries);
  CHECK(catch_error([&] { parse(header + "2016-01-01T00,lots\n"); }).code == ErrorCode::MalformedSeries);
  CHECK(catch_error([&] { parse(header + "2016-01-01T00,1,2\n"); }).code == ErrorCode::MalformedSeries);
  CHECK(catch_error([&] { parse("time,count\n2016-01-01T00,1\n"); }).code == ErrorCode::MalformedSeries);
  CHECK(catch_error([&] { parse(header); }).code == ErrorCode::MalformedSeries);
  CHECK(catch_error([] { parse_csv_file("/nonexistent/series.csv"); }).code == ErrorCode::Io);
}

TEST_CASE("csv round trip is exact") {
  Rng rng(31);
  OptionalValues v(500);
  for (auto& x : v) {
    if (rng.uniform() < 0.1) continue;
    x = rng.uniform(1e-3, 1e5);
  }
  const HourlySeries s(CalendarHour::from_civil(2012, 6, 30, 5), v, "RT", FunctionalClass::Local);
  const auto back = parse(to_csv(s));
  CHECK(back == s);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i]) REQUIRE(std::bit_cast<std::uint64_t>(*back.values()[i]) == std::bit_cast<std::uint64_t>(*v[i]));
  }
  CHECK(to_csv(back) == to_csv(s));

  const auto path = (std::filesystem::temp_directory_path() / "aadtcast_io_round_trip.csv").string();
  write_csv_file(path, s);
  CHECK(parse_csv_file(path) == s);
  std::remove(path.c_str());
}

TEST_CASE("key value files") {
  std::istringstream in("# comment\n horizon_years = 2 \n\nepochs=3 # trailing\n");
  const auto kv = parse_key_values(in);
  REQUIRE(kv.size() == 2);
  CHECK(kv[0] == std::pair<std::string, std::string>{"horizon_years", "2"});
  CHECK(kv[1] == std::pair<std::string, std::string>{"epochs", "3"});
  std::istringstream bad("epochs 3\n");
  CHECK(catch_error([&] { parse_key_values(bad); }).code == ErrorCode::Usage);

  SyntheticSpec s;
  apply_synthetic_setting(s, "events", "100:2.5:12; 200:0.5:48");
  REQUIRE(s.events.size() == 2);
  CHECK(s.events[1] == EventSpike{200, 0.5, 48});
  apply_synthetic_setting(s, "gap_model", "burst");
  CHECK(s.gap_model == GapModel::Burst);
  CHECK(catch_error([&] { apply_synthetic_setting(s, "events", "100:2"); }).code == ErrorCode::Usage);
  CHECK(catch_error([&] { apply_synthetic_setting(s, "colour", "red"); }).code == ErrorCode::Usage);
  s.missing_rate = 0.9;
  CHECK(catch_error([&] { validate(s); }).code == ErrorCode::InvalidArgument);
}

TEST_CASE("synthetic series without gaps") {
  SyntheticSpec spec;
  spec.years = 2;
  const auto d = generate_synthetic(spec);
  CHECK(d.gappy == d.truth);
  CHECK(d.truth.size() == static_cast<std::size_t>(hours_in_span(2008, 2009)));
  CHECK(d.truth.station_id() == "SYN-1");
  for (const auto& v : d.truth.values()) {
    REQUIRE(v);
    REQUIRE(*v >= 1.0);
    REQUIRE(*v == std::round(*v));
  }
  CHECK(generate_synthetic(spec) == d);
  spec.seed = 2;
  CHECK_FALSE(generate_synthetic(spec).truth == d.truth);
}

TEST_CASE("constant synthetic series") {
  const auto d = generate_synthetic(flat_spec(250.0));
  for (const auto& b : compute_aadt(d.truth)) CHECK(b.aadt == 24.0 * 250.0);
}

TEST_CASE("seasonal profiles") {
  CHECK(daily_profile(13) == doctest::Approx(1.0));
  CHECK(daily_profile(1) == doctest::Approx(-1.0));
  CHECK(weekly_profile(6) < weekly_profile(0));
  CHECK(yearly_profile(80, 365) == doctest::Approx(0.0));
  for (int h = 0; h < 24; ++h) CHECK(std::abs(daily_profile(h)) <= 1.0);
}

TEST_CASE("events scale the hours they cover") {
  SyntheticSpec spec = flat_spec(100.0);
  spec.years = 1;
  spec.events = {EventSpike{10, 3.0, 30}};
  const auto d = generate_synthetic(spec);
  const std::size_t first = 10 * 24;
  CHECK(*d.truth.values()[first - 1] == 100.0);
  CHECK(*d.truth.values()[first] == 300.0);
  CHECK(*d.truth.values()[first + 29] == 300.0);
  CHECK(*d.truth.values()[first + 30] == 100.0);
}

TEST_CASE("mcar gaps") {
  SyntheticSpec spec;
  spec.missing_rate = 0.03;
  spec.seed = 77;
  const auto d = generate_synthetic(spec);
  const double frac = d.gappy.missing_fraction();
  CHECK(frac >= 0.025);
  CHECK(frac <= 0.035);
  CHECK(d.gappy.missing_count() ==
        static_cast<std::size_t>(std::llround(0.03 * static_cast<double>(d.truth.size()))));
  CHECK(d.truth.missing_count() == 0);
  for (std::size_t i = 0; i < d.gappy.size(); ++i) {
    if (d.gappy.values()[i]) REQUIRE(d.gappy.values()[i] == d.truth.values()[i]);
  }
  CHECK(generate_synthetic(spec) == d);
}

TEST_CASE("burst gaps") {
  SyntheticSpec spec;
  spec.missing_rate = 0.1;
  spec.gap_model = GapModel::Burst;
  spec.burst_mean_hours = 24.0;
  spec.seed = 12;
  const auto d = generate_synthetic(spec);
  const auto target = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(d.truth.size())));
  CHECK(d.gappy.missing_count() == target);
  // Bursts leave far fewer separate runs than scattered gaps would.
  std::size_t runs = 0;
  const auto& v = d.gappy.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i] && (i == 0 || v[i - 1])) ++runs;
  }
  CHECK(runs < target / 5);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i]) REQUIRE(v[i] == d.truth.values()[i]);
  }
}

TEST_CASE("prediction csv") {
  const HourlySeries p(CalendarHour::start_of_year(2020), {1.5, 2.0});
  std::ostringstream os;
  write_prediction_csv(os, p);
  CHECK(os.str() == "timestamp,predicted_volume\n2020-01-01T00,1.5\n2020-01-01T01,2\n");
}
