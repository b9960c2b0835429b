#include "aadtcast/io.hpp"

#include "aadtcast/error.hpp"
#include "aadtcast/random.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace aadt {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

template <typename T>
bool parse_int(std::string_view text, T& out) {
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

bool parse_double(std::string_view text, double& out) {
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

[[noreturn]] void malformed(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedSeries, source + ":" + std::to_string(line) + ": " + what);
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T number_setting(std::string_view key, std::string_view value) {
  T out{};
  bool ok = false;
  if constexpr (std::is_floating_point_v<T>) {
    ok = parse_double(value, out);
  } else {
    ok = parse_int(value, out);
  }
  if (!ok) throw Error(ErrorCode::Usage, "bad value '" + std::string(value) + "' for " + std::string(key));
  return out;
}

std::vector<EventSpike> parse_events(std::string_view text) {
  std::vector<EventSpike> out;
  while (!text.empty()) {
    const auto semi = text.find(';');
    const std::string_view item = trim(text.substr(0, semi));
    text = semi == std::string_view::npos ? std::string_view{} : text.substr(semi + 1);
    if (item.empty()) continue;
    const auto c1 = item.find(':');
    const auto c2 = c1 == std::string_view::npos ? c1 : item.find(':', c1 + 1);
    EventSpike e;
    if (c2 == std::string_view::npos || !parse_int(trim(item.substr(0, c1)), e.day_of_year) ||
        !parse_double(trim(item.substr(c1 + 1, c2 - c1 - 1)), e.multiplier) ||
        !parse_int(trim(item.substr(c2 + 1)), e.duration_hours)) {
      throw Error(ErrorCode::Usage, "event '" + std::string(item) + "' is not day:multiplier:hours");
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace

// ─── CSV ─────────────────────────────────────────────────────────────────────

CalendarHour parse_timestamp(std::string_view text) {
  text = trim(text);
  int year = 0;
  unsigned month = 0;
  unsigned day = 0;
  int hour = 0;
  auto bad = [&]() -> CalendarHour {
    throw Error(ErrorCode::MalformedSeries, "bad timestamp '" + std::string(text) + "'");
  };
  if (text.size() < 13 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ')) return bad();
  if (!parse_int(text.substr(0, 4), year) || !parse_int(text.substr(5, 2), month) ||
      !parse_int(text.substr(8, 2), day) || !parse_int(text.substr(11, 2), hour)) {
    return bad();
  }
  std::string_view rest = text.substr(13);
  if (!rest.empty() && (rest.back() == 'Z' || rest.back() == 'z')) rest.remove_suffix(1);
  if (rest != "" && rest != ":00" && rest != ":00:00") return bad();
  try {
    return CalendarHour::from_civil(year, month, day, hour);
  } catch (const Error&) {
    return bad();
  }
}

HourlySeries parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::string station;
  FunctionalClass fc = FunctionalClass::RuralInterstate;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const std::string_view body = trim(t.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string_view key = trim(body.substr(0, eq));
      const std::string_view value = trim(body.substr(eq + 1));
      if (key == "station") {
        station = std::string(value);
      } else if (key == "functional_class") {
        const auto parsed = parse_functional_class(value);
        if (!parsed) malformed(source, line_no, "unknown functional class '" + std::string(value) + "'");
        fc = *parsed;
      }
      continue;
    }
    const auto comma = t.find(',');
    if (comma == std::string_view::npos || !iequals(trim(t.substr(0, comma)), "timestamp") ||
        !iequals(trim(t.substr(comma + 1)), "volume")) {
      malformed(source, line_no, "expected header 'timestamp,volume'");
    }
    header_seen = true;
    break;
  }
  if (!header_seen) malformed(source, line_no, "missing header 'timestamp,volume'");

  std::optional<CalendarHour> start;
  CalendarHour expected;
  OptionalValues values;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    if (comma == std::string_view::npos || t.find(',', comma + 1) != std::string_view::npos) {
      malformed(source, line_no, "expected two fields");
    }
    CalendarHour stamp;
    try {
      stamp = parse_timestamp(t.substr(0, comma));
    } catch (const Error& e) {
      malformed(source, line_no, e.what());
    }
    if (start && stamp != expected) {
      malformed(source, line_no,
                stamp < expected ? "timestamp " + stamp.iso() + " is out of order"
                                 : "gap: expected " + expected.iso() + ", found " + stamp.iso());
    }
    if (!start) start = stamp;
    expected = stamp + 1;

    const std::string_view cell = trim(t.substr(comma + 1));
    if (cell.empty() || iequals(cell, "nan")) {
      values.emplace_back();
      continue;
    }
    double v = 0.0;
    if (!parse_double(cell, v) || !std::isfinite(v) || v < 0.0) {
      malformed(source, line_no, "volume '" + std::string(cell) + "' is not a non-negative number");
    }
    if (v == 0.0) {
      throw Error(ErrorCode::ZeroVolume, source + ":" + std::to_string(line_no) + ": zero volume at " + stamp.iso());
    }
    values.emplace_back(v);
  }
  if (!start) malformed(source, line_no, "no data rows");
  return HourlySeries(*start, std::move(values), station, fc);
}

HourlySeries parse_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_csv(in, path);
}

void write_csv(std::ostream& out, const HourlySeries& series) {
  if (!series.station_id().empty()) out << "# station=" << series.station_id() << '\n';
  out << "# functional_class=" << functional_class_name(series.functional_class()) << '\n';
  out << "timestamp,volume\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& v = series.values()[i];
    out << series.time_at(i).iso() << ',' << (v ? shortest(*v) : std::string("NaN")) << '\n';
  }
}

void write_csv_file(const std::string& path, const HourlySeries& series) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  write_csv(out, series);
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path);
}

// ─── Key/value files ─────────────────────────────────────────────────────────

std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view t = line;
    if (const auto hash = t.find('#'); hash != std::string_view::npos) t = t.substr(0, hash);
    t = trim(t);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::Usage, "line " + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_key_values(in);
}

ForecastConfig read_forecast_config(const std::string& path) {
  ForecastConfig config;
  for (const auto& [k, v] : read_key_value_file(path)) apply_config_setting(config, k, v);
  validate(config);
  return config;
}

// ─── Synthetic data ──────────────────────────────────────────────────────────

void validate(const SyntheticSpec& s) {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (s.years < 1) fail("years must be positive");
  if (!(s.base_volume > 0.0)) fail("base_volume must be positive");
  if (s.missing_rate < 0.0 || s.missing_rate > 0.5) fail("missing_rate must lie in [0, 0.5]");
  if (s.noise_std < 0.0) fail("noise_std must be non-negative");
  if (s.growth_rate <= -1.0) fail("growth_rate must exceed -1");
  if (s.gap_model == GapModel::Burst && !(s.burst_mean_hours >= 1.0)) fail("burst_mean_hours must be at least 1");
  for (const auto& e : s.events) {
    if (e.day_of_year < 0 || e.day_of_year > 365 || e.duration_hours < 1 || !(e.multiplier > 0.0)) {
      fail("event spikes need a day in 0..365, positive hours and a positive multiplier");
    }
  }
}

void apply_synthetic_setting(SyntheticSpec& s, std::string_view key, std::string_view value) {
  if (key == "years") {
    s.years = number_setting<int>(key, value);
  } else if (key == "start_year") {
    s.start_year = number_setting<int>(key, value);
  } else if (key == "base_volume") {
    s.base_volume = number_setting<double>(key, value);
  } else if (key == "daily_amplitude") {
    s.daily_amplitude = number_setting<double>(key, value);
  } else if (key == "weekly_amplitude") {
    s.weekly_amplitude = number_setting<double>(key, value);
  } else if (key == "yearly_amplitude") {
    s.yearly_amplitude = number_setting<double>(key, value);
  } else if (key == "growth_rate") {
    s.growth_rate = number_setting<double>(key, value);
  } else if (key == "noise_std") {
    s.noise_std = number_setting<double>(key, value);
  } else if (key == "events") {
    s.events = parse_events(value);
  } else if (key == "missing_rate") {
    s.missing_rate = number_setting<double>(key, value);
  } else if (key == "gap_model") {
    if (iequals(value, "mcar")) {
      s.gap_model = GapModel::Mcar;
    } else if (iequals(value, "burst")) {
      s.gap_model = GapModel::Burst;
    } else {
      throw Error(ErrorCode::Usage, "gap_model must be mcar or burst");
    }
  } else if (key == "burst_mean_hours") {
    s.burst_mean_hours = number_setting<double>(key, value);
  } else if (key == "seed") {
    s.seed = number_setting<std::uint64_t>(key, value);
  } else if (key == "station_id" || key == "station") {
    s.station_id = std::string(value);
  } else if (key == "functional_class") {
    const auto fc = parse_functional_class(value);
    if (!fc) throw Error(ErrorCode::Usage, "unknown functional class '" + std::string(value) + "'");
    s.functional_class = *fc;
  } else {
    throw Error(ErrorCode::Usage, "unknown synthetic key '" + std::string(key) + "'");
  }
}

SyntheticSpec read_synthetic_spec(const std::string& path) {
  SyntheticSpec spec;
  for (const auto& [k, v] : read_key_value_file(path)) apply_synthetic_setting(spec, k, v);
  validate(spec);
  return spec;
}

double daily_profile(int hour_of_day) noexcept {
  return std::sin(2.0 * std::numbers::pi * (hour_of_day - 7) / 24.0);
}

double weekly_profile(int weekday) noexcept {
  static constexpr double table[7] = {0.2, 0.2, 0.2, 0.2, 0.3, -0.4, -0.7};
  return table[((weekday % 7) + 7) % 7];
}

double yearly_profile(int day_of_year, int days) noexcept {
  return std::sin(2.0 * std::numbers::pi * (day_of_year - 80) / days);
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  const CalendarHour start = CalendarHour::start_of_year(spec.start_year);
  const auto n = static_cast<std::size_t>(hours_in_span(spec.start_year, spec.start_year + spec.years - 1));

  Rng noise(derive_seed(spec.seed, 1));
  OptionalValues values(n);
  for (std::size_t t = 0; t < n; ++t) {
    const CalendarHour at = start + static_cast<std::int64_t>(t);
    const int doy = at.day_of_year();
    const int hour = at.hour_of_day();
    double event = 1.0;
    for (const auto& e : spec.events) {
      const int offset = (doy - e.day_of_year) * kHoursPerDay + hour;
      if (offset >= 0 && offset < e.duration_hours) event *= e.multiplier;
    }
    const double season = 1.0 + spec.daily_amplitude * daily_profile(hour) +
                          spec.weekly_amplitude * weekly_profile(at.weekday()) +
                          spec.yearly_amplitude * yearly_profile(doy, days_in_year(at.year()));
    const double trend = spec.base_volume * std::pow(1.0 + spec.growth_rate, static_cast<double>(t) / kHoursPerYear);
    const double v = trend * season * event * std::exp(spec.noise_std * noise.normal());
    values[t] = std::max(1.0, std::round(v));
  }

  HourlySeries truth(start, values, spec.station_id, spec.functional_class);
  const auto target = static_cast<std::size_t>(std::llround(spec.missing_rate * static_cast<double>(n)));
  Rng gaps(derive_seed(spec.seed, 2));
  if (spec.gap_model == GapModel::Mcar) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < target; ++i) {
      std::swap(order[i], order[i + gaps.below(n - i)]);
      values[order[i]].reset();
    }
  } else {
    const double p = 1.0 / spec.burst_mean_hours;
    std::size_t removed = 0;
    while (removed < target) {
      std::size_t pos = gaps.below(n);
      double u = gaps.uniform();
      while (u <= 0.0) u = gaps.uniform();
      const auto length =
          p >= 1.0 ? std::size_t{1} : 1 + static_cast<std::size_t>(std::floor(std::log(u) / std::log(1.0 - p)));
      for (std::size_t k = 0; k < length && removed < target && pos < n; ++k, ++pos) {
        if (values[pos]) {
          values[pos].reset();
          ++removed;
        }
      }
    }
  }
  HourlySeries gappy(start, std::move(values), spec.station_id, spec.functional_class);
  return SyntheticData{std::move(gappy), std::move(truth)};
}

// ─── Prediction tables ───────────────────────────────────────────────────────

void write_prediction_csv(std::ostream& out, const HourlySeries& predicted) {
  out << "timestamp,predicted_volume\n";
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto& v = predicted.values()[i];
    out << predicted.time_at(i).iso() << ',' << (v ? shortest(*v) : std::string("NaN")) << '\n';
  }
}

}  // namespace aadt
