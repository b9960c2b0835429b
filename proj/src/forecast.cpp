#include "aadtcast/forecast.hpp"

#include "aadtcast/error.hpp"
#include "aadtcast/random.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace aadt {

namespace {

constexpr std::uint64_t kSeedInit = 11;
constexpr std::uint64_t kSeedShuffle = 12;
constexpr std::uint64_t kSeedForest = 13;

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw Error(ErrorCode::Usage, "bad value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

std::vector<double> extract_rows(const DayMatrix& m, std::size_t first_row, std::size_t padding,
                                 std::size_t length) {
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t slot = first_row * DayMatrix::kColumns + padding + i;
    out[i] = m.value(slot / DayMatrix::kColumns, slot % DayMatrix::kColumns);
  }
  return out;
}

OptionalValues as_optional(const std::vector<double>& v) {
  return OptionalValues(v.begin(), v.end());
}

OptionalValues log_values(std::span<const std::optional<double>> raw) {
  OptionalValues out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i]) out[i] = log_volume(*raw[i]);
  }
  return out;
}

/// Scaled values with a presence mask; absent entries hold 0.0.
void scale_stream(std::span<const std::optional<double>> logs, const NormalizationParams& p,
                  std::vector<double>& values, Mask& mask) {
  values.assign(logs.size(), 0.0);
  mask.assign(logs.size(), 0);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (logs[i]) {
      values[i] = scale_log(*logs[i], p);
      mask[i] = 1;
    }
  }
}

}  // namespace

// ─── Config ──────────────────────────────────────────────────────────────────

void validate(const ForecastConfig& c) {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (c.horizon_hours <= 0) fail("horizon_hours must be positive");
  if (c.hidden_size == 0) fail("hidden_size must be positive");
  if (c.window_length == 0) fail("window_length must be positive");
  if (c.window_stride == 0) fail("window_stride must be positive");
  if (c.epochs < 1) fail("epochs must be at least 1");
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) fail("learning_rate must be positive");
  if (c.test_years < 1 && c.test_hours <= 0) fail("a test partition is required");
  if (c.test_hours < 0) fail("test_hours must be non-negative");
  if (c.knn_k == 0) fail("knn_k must be positive");
  if (c.mice_cycles < 1 || c.em_max_iters < 1 || c.rf_trees < 1 || c.rf_iters < 1) {
    fail("imputation iteration counts must be positive");
  }
  if (!(c.em_tol > 0.0)) fail("em_tol must be positive");
}

std::string format_config(const ForecastConfig& c) {
  std::ostringstream os;
  os << "cell_kind = " << cell_kind_name(c.cell_kind) << '\n'
     << "treatment = " << treatment_name(c.treatment) << '\n'
     << "horizon_hours = " << c.horizon_hours << '\n'
     << "hidden_size = " << c.hidden_size << '\n'
     << "window_length = " << c.window_length << '\n'
     << "window_stride = " << c.window_stride << '\n'
     << "epochs = " << c.epochs << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "learning_rate = " << shortest(c.learning_rate) << '\n'
     << "seed = " << c.seed << '\n'
     << "test_years = " << c.test_years << '\n'
     << "test_hours = " << c.test_hours << '\n'
     << "knn_k = " << c.knn_k << '\n'
     << "mice_cycles = " << c.mice_cycles << '\n'
     << "em_max_iters = " << c.em_max_iters << '\n'
     << "em_tol = " << shortest(c.em_tol) << '\n'
     << "rf_trees = " << c.rf_trees << '\n'
     << "rf_iters = " << c.rf_iters << '\n';
  return os.str();
}

void apply_config_setting(ForecastConfig& c, std::string_view key, std::string_view value) {
  if (key == "cell_kind" || key == "cell") {
    const auto kind = parse_cell_kind(value);
    if (!kind) throw Error(ErrorCode::Usage, "unknown cell kind '" + std::string(value) + "'");
    c.cell_kind = *kind;
  } else if (key == "treatment") {
    const auto t = parse_treatment(value);
    if (!t) throw Error(ErrorCode::Usage, "unknown treatment '" + std::string(value) + "'");
    c.treatment = *t;
  } else if (key == "horizon_hours") {
    c.horizon_hours = parse_number<std::int64_t>(key, value);
  } else if (key == "horizon_years") {
    c.horizon_hours = parse_number<std::int64_t>(key, value) * kHoursPerYear;
  } else if (key == "hidden_size") {
    c.hidden_size = parse_number<std::size_t>(key, value);
  } else if (key == "window_length") {
    c.window_length = parse_number<std::size_t>(key, value);
  } else if (key == "window_stride") {
    c.window_stride = parse_number<std::size_t>(key, value);
  } else if (key == "epochs") {
    c.epochs = parse_number<int>(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "learning_rate") {
    c.learning_rate = parse_number<double>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "test_years") {
    c.test_years = parse_number<int>(key, value);
  } else if (key == "test_hours") {
    c.test_hours = parse_number<std::int64_t>(key, value);
  } else if (key == "threads") {
    c.threads = parse_number<unsigned>(key, value);
  } else if (key == "knn_k") {
    c.knn_k = parse_number<std::size_t>(key, value);
  } else if (key == "mice_cycles") {
    c.mice_cycles = parse_number<int>(key, value);
  } else if (key == "em_max_iters") {
    c.em_max_iters = parse_number<int>(key, value);
  } else if (key == "em_tol") {
    c.em_tol = parse_number<double>(key, value);
  } else if (key == "rf_trees") {
    c.rf_trees = parse_number<int>(key, value);
  } else if (key == "rf_iters") {
    c.rf_iters = parse_number<int>(key, value);
  } else {
    throw Error(ErrorCode::Usage, "unknown configuration key '" + std::string(key) + "'");
  }
}

std::int64_t resolve_test_hours(const HourlySeries& series, const ForecastConfig& config) {
  if (config.test_hours > 0) return config.test_hours;
  const CivilHour end = series.end().civil();
  if (end.month != 1 || end.day != 1 || end.hour != 0) {
    throw Error(ErrorCode::InvalidSplit,
                "series does not end on a year boundary; set test_hours explicitly");
  }
  const int last = end.year - 1;
  return hours_in_span(last - config.test_years + 1, last);
}

// ─── Windows ─────────────────────────────────────────────────────────────────

SequenceView ScaledDataset::view(std::size_t start, std::size_t length) const {
  return SequenceView{std::span<const double>(inputs).subspan(start, length),
                      std::span<const std::uint8_t>(input_mask).subspan(start, length),
                      std::span<const double>(targets).subspan(start, length),
                      std::span<const std::uint8_t>(target_mask).subspan(start, length)};
}

std::vector<Window> make_windows(const ScaledDataset& dataset, std::size_t length, std::size_t stride) {
  if (length == 0 || stride == 0) {
    throw Error(ErrorCode::InvalidWindow, "window length and stride must be positive");
  }
  if (length > dataset.size()) {
    throw Error(ErrorCode::InvalidWindow, "window of " + std::to_string(length) +
                                              " hours exceeds dataset of " +
                                              std::to_string(dataset.size()) + " hours");
  }
  std::vector<Window> out;
  for (std::size_t start = 0; start + length <= dataset.size(); start += stride) {
    out.push_back(Window{start, dataset.view(start, length)});
  }
  return out;
}

// ─── Treatment ───────────────────────────────────────────────────────────────

std::pair<OptionalValues, OptionalValues> treat_log_inputs(Treatment treatment,
                                                           std::span<const std::optional<double>> fit,
                                                           std::span<const std::optional<double>> apply,
                                                           int fit_start_hour_of_day,
                                                           const ForecastConfig& config) {
  OptionalValues fit_out(fit.begin(), fit.end());
  OptionalValues apply_out(apply.begin(), apply.end());
  if (treatment == Treatment::Masking) return {std::move(fit_out), std::move(apply_out)};

  if (treatment == Treatment::Mean || treatment == Treatment::Median) {
    const auto stat = treatment == Treatment::Mean ? CentralStatistic::Mean : CentralStatistic::Median;
    const auto a = impute_central(fit, fit, stat);
    const auto b = impute_central(apply, fit, stat);
    return {as_optional(a.filled), as_optional(b.filled)};
  }

  const auto fit_pad = static_cast<std::size_t>(fit_start_hour_of_day);
  const auto apply_pad = (fit_pad + fit.size()) % DayMatrix::kColumns;
  const DayMatrix fit_matrix = to_day_matrix(fit, fit_start_hour_of_day);
  const DayMatrix matrix =
      apply.empty() ? fit_matrix
                    : DayMatrix::stack(fit_matrix, to_day_matrix(apply, static_cast<int>(apply_pad)));
  const std::size_t fit_rows = fit_matrix.rows();

  ImputationResult result;
  switch (treatment) {
    case Treatment::Em:
      result = impute_em(matrix, EmOptions{config.em_max_iters, config.em_tol, fit_rows}).first;
      break;
    case Treatment::Mice:
      result = impute_mice(matrix, MiceOptions{config.mice_cycles, 1e-8, fit_rows});
      break;
    case Treatment::Knn:
      result = impute_knn(matrix, KnnOptions{config.knn_k, fit_rows});
      break;
    case Treatment::Rf: {
      RfOptions opts;
      opts.trees = config.rf_trees;
      opts.iters = config.rf_iters;
      opts.seed = derive_seed(config.seed, kSeedForest);
      opts.threads = config.threads;
      opts.fit_rows = fit_rows;
      result = impute_rf(matrix, opts);
      break;
    }
    default:
      break;
  }
  const DayMatrix done = completed_matrix(matrix, result);
  return {as_optional(extract_rows(done, 0, fit_pad, fit.size())),
          as_optional(extract_rows(done, fit_rows, apply_pad, apply.size()))};
}

// ─── Preparation ─────────────────────────────────────────────────────────────

PreparedData prepare_data(const HourlySeries& series, const ForecastConfig& config) {
  validate(config);
  PreparedData out;
  out.test_hours = resolve_test_hours(series, config);
  const PredictionDataset paired = shift_pair(series, config.horizon_hours);
  const auto [train_part, test_part] = split_train_test(paired, out.test_hours);

  const auto [train_inputs, test_inputs] =
      treat_log_inputs(config.treatment, log_values(train_part.inputs), log_values(test_part.inputs),
                       train_part.input_start.hour_of_day(), config);
  const OptionalValues train_targets = log_values(train_part.targets);
  const OptionalValues test_targets = log_values(test_part.targets);

  std::vector<double> fit_values;
  fit_values.reserve(train_inputs.size() + train_targets.size());
  for (const auto& v : train_inputs) {
    if (v) fit_values.push_back(*v);
  }
  for (const auto& v : train_targets) {
    if (v) fit_values.push_back(*v);
  }
  out.normalizer = fit_normalizer_log(fit_values);

  auto fill = [&](ScaledDataset& ds, const PredictionDataset& part, const OptionalValues& in,
                  const OptionalValues& tg) {
    ds.input_start = part.input_start;
    ds.horizon_hours = part.horizon_hours;
    scale_stream(in, out.normalizer, ds.inputs, ds.input_mask);
    scale_stream(tg, out.normalizer, ds.targets, ds.target_mask);
  };
  fill(out.train, train_part, train_inputs, train_targets);
  fill(out.test, test_part, test_inputs, test_targets);
  return out;
}

// ─── Training ────────────────────────────────────────────────────────────────

std::uint64_t training_fingerprint(const HourlySeries& series, std::size_t train_input_hours) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (char ch : series.station_id()) mix(static_cast<unsigned char>(ch));
  mix(static_cast<std::uint64_t>(series.start().hours_since_epoch()));
  mix(train_input_hours);
  const std::size_t n = std::min(train_input_hours, series.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = series.values()[i];
    mix(v ? std::bit_cast<std::uint64_t>(*v) : 0x7ff8dead0000beefULL);
  }
  return h;
}

TrainedModel train(const HourlySeries& series, const ForecastConfig& config) {
  const PreparedData data = prepare_data(series, config);
  const auto windows = make_windows(data.train, config.window_length, config.window_stride);

  TrainedModel model;
  model.config = config;
  model.normalizer = data.normalizer;
  model.train_input_hours = data.train.size();
  model.fingerprint = training_fingerprint(series, model.train_input_hours);
  model.params = ModelParams::initialized(config.cell_kind, config.hidden_size,
                                          derive_seed(config.seed, kSeedInit));

  AdamState adam = AdamState::for_params(model.params, config.learning_rate);
  Rng rng(derive_seed(config.seed, kSeedShuffle));
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t batch = std::min(config.batch_size, windows.size());
  const unsigned threads = detail::resolve_threads(config.threads);
  std::vector<ModelParams> slot_grads(batch, ModelParams(config.cell_kind, config.hidden_size));
  std::vector<LossValue> slot_loss(batch);
  std::vector<BpttWorkspace> workspaces(threads);
  ModelParams total(config.cell_kind, config.hidden_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    std::size_t epoch_windows = 0;
    for (std::size_t first = 0; first < order.size(); first += batch) {
      const std::size_t count = std::min(batch, order.size() - first);
      detail::parallel_for(count, threads, [&](std::size_t s, unsigned worker) {
        slot_grads[s].set_zero();
        slot_loss[s] = accumulate_gradient(model.params, windows[order[first + s]].sequence,
                                           slot_grads[s], workspaces[worker]);
      });
      total.set_zero();
      std::size_t contributing = 0;
      for (std::size_t s = 0; s < count; ++s) {
        if (slot_loss[s].count == 0) continue;
        auto acc = total.data();
        const auto g = slot_grads[s].data();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
        epoch_loss += slot_loss[s].loss;
        ++contributing;
      }
      if (contributing == 0) {
        ++model.skipped_batches;
        continue;
      }
      epoch_windows += contributing;
      const double inv = 1.0 / static_cast<double>(contributing);
      for (double& v : total.data()) v *= inv;
      adam_step(model.params, total, adam);
    }
    if (epoch_windows == 0) {
      throw Error(ErrorCode::EmptyLoss, "no training window has a loss-contributing position");
    }
    model.training_loss_trace.push_back(epoch_loss / static_cast<double>(epoch_windows));
  }
  if (!model.params.all_finite()) {
    throw Error(ErrorCode::NumericDomain, "training diverged to non-finite weights");
  }
  return model;
}

// ─── Prediction ──────────────────────────────────────────────────────────────

std::vector<double> predict_scaled(const TrainedModel& model, std::span<const double> inputs,
                                   std::span<const std::uint8_t> input_mask) {
  const std::size_t w = model.config.window_length;
  std::vector<double> out;
  out.reserve(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += w) {
    const std::size_t len = std::min(w, inputs.size() - start);
    const auto mask = input_mask.empty() ? input_mask : input_mask.subspan(start, len);
    const ForwardResult fr = forward(model.params, inputs.subspan(start, len), mask);
    out.insert(out.end(), fr.predictions.begin(), fr.predictions.end());
  }
  return out;
}

HourlySeries predict(const TrainedModel& model, const HourlySeries& series) {
  const std::size_t fit_len = model.train_input_hours;
  if (series.size() < fit_len || training_fingerprint(series, fit_len) != model.fingerprint) {
    throw Error(ErrorCode::ModelMismatch,
                "series does not begin with the training inputs this model was fitted on");
  }
  const OptionalValues logs = log_values(series.values());
  const std::span<const std::optional<double>> all(logs);
  const auto [fit, rest] = treat_log_inputs(model.config.treatment, all.first(fit_len),
                                            all.subspan(fit_len), series.start().hour_of_day(),
                                            model.config);
  OptionalValues treated(fit);
  treated.insert(treated.end(), rest.begin(), rest.end());

  std::vector<double> scaled;
  Mask mask;
  scale_stream(treated, model.normalizer, scaled, mask);
  const std::vector<double> normalized = predict_scaled(model, scaled, mask);

  OptionalValues raw(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    raw[i] = std::max(0.0, inverse_transform(normalized[i], model.normalizer));
  }
  return HourlySeries(series.start() + model.config.horizon_hours, std::move(raw), series.station_id(),
                      series.functional_class());
}

// ─── Serialization ───────────────────────────────────────────────────────────

namespace {

std::string hex(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

double parse_hex(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || !std::isfinite(v)) {
    throw Error(ErrorCode::MalformedModel, "bad numeric token '" + token + "' in model file");
  }
  return v;
}

std::string next_word(std::istream& in, std::string_view expected = {}) {
  std::string word;
  if (!(in >> word) || (!expected.empty() && word != expected)) {
    throw Error(ErrorCode::MalformedModel, "model file: expected '" + std::string(expected) +
                                               "', found '" + word + "'");
  }
  return word;
}

std::uint64_t parse_count(const std::string& token, int base = 10) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v, base);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw Error(ErrorCode::MalformedModel, "bad integer token '" + token + "' in model file");
  }
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void write_model(std::ostream& out, const TrainedModel& m) {
  out << "aadtcast-model 1\n";
  out << "fingerprint " << std::hex << m.fingerprint << std::dec << '\n';
  out << "train_input_hours " << m.train_input_hours << '\n';
  out << "skipped_batches " << m.skipped_batches << '\n';
  out << "normalizer " << (m.normalizer.log_applied ? 1 : 0) << ' ' << hex(m.normalizer.x_min) << ' '
      << hex(m.normalizer.x_max) << '\n';
  out << "config_begin\n" << format_config(m.config) << "config_end\n";
  out << "loss_trace " << m.training_loss_trace.size();
  for (double v : m.training_loss_trace) out << ' ' << hex(v);
  out << '\n';
  write_params(out, m.params);
  out << "end_model\n";
}

TrainedModel read_model(std::istream& in) {
  TrainedModel m;
  next_word(in, "aadtcast-model");
  if (next_word(in) != "1") throw Error(ErrorCode::MalformedModel, "unsupported model version");
  next_word(in, "fingerprint");
  m.fingerprint = parse_count(next_word(in), 16);
  next_word(in, "train_input_hours");
  m.train_input_hours = parse_count(next_word(in));
  next_word(in, "skipped_batches");
  m.skipped_batches = parse_count(next_word(in));
  next_word(in, "normalizer");
  m.normalizer.log_applied = next_word(in) == "1";
  m.normalizer.x_min = parse_hex(next_word(in));
  m.normalizer.x_max = parse_hex(next_word(in));
  if (!(m.normalizer.x_max > m.normalizer.x_min)) {
    throw Error(ErrorCode::MalformedModel, "model file: degenerate normalizer");
  }
  next_word(in, "config_begin");
  std::string line;
  std::getline(in, line);
  while (true) {
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedModel, "model file: unterminated config");
    const std::string t = trim(line);
    if (t == "config_end") break;
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::MalformedModel, "model file: bad config line");
    try {
      apply_config_setting(m.config, trim(std::string_view(t).substr(0, eq)),
                           trim(std::string_view(t).substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedModel, std::string("model file: ") + e.what());
    }
  }
  next_word(in, "loss_trace");
  const std::size_t n = parse_count(next_word(in));
  m.training_loss_trace.resize(n);
  for (auto& v : m.training_loss_trace) v = parse_hex(next_word(in));
  m.params = read_params(in);
  next_word(in, "end_model");
  if (m.params.cell_kind() != m.config.cell_kind || m.params.hidden_size() != m.config.hidden_size) {
    throw Error(ErrorCode::MalformedModel, "model file: weights disagree with config");
  }
  return m;
}

void save_model(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write model file " + path);
  write_model(out, model);
  if (!out) throw Error(ErrorCode::Io, "failed writing model file " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open model file " + path);
  try {
    return read_model(in);
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::MalformedModel, "model file " + path + " is malformed");
  }
}

}  // namespace aadt
