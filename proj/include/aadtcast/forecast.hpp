#pragma once

#include "aadtcast/impute.hpp"
#include "aadtcast/neural.hpp"
#include "aadtcast/series.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aadt {

struct ForecastConfig {
  CellKind cell_kind = CellKind::Lstm;
  Treatment treatment = Treatment::Median;
  std::int64_t horizon_hours = kHoursPerYear;
  std::size_t hidden_size = 64;
  std::size_t window_length = 168;
  std::size_t window_stride = 24;
  int epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  /// Whole calendar years held out at the end of the series.
  int test_years = 2;
  /// Explicit test partition length; 0 derives it from test_years.
  std::int64_t test_hours = 0;
  /// Worker threads for batch gradients and forests; 0 = all cores.
  /// Results do not depend on it.
  unsigned threads = 0;

  std::size_t knn_k = 5;
  int mice_cycles = 10;
  int em_max_iters = 100;
  double em_tol = 1e-8;
  int rf_trees = 50;
  int rf_iters = 5;

  friend bool operator==(const ForecastConfig&, const ForecastConfig&) = default;
};

/// Throws InvalidArgument on a non-positive size, rate or count.
void validate(const ForecastConfig& config);

/// `key = value` lines using the field names above.
std::string format_config(const ForecastConfig& config);
/// Applies one setting; throws Usage for an unknown key or bad value.
void apply_config_setting(ForecastConfig& config, std::string_view key, std::string_view value);

/// Test partition length for `config` on `series`. With test_hours unset
/// the series must end exactly at a year boundary.
std::int64_t resolve_test_hours(const HourlySeries& series, const ForecastConfig& config);

/// Normalized stream ready for the network.
struct ScaledDataset {
  CalendarHour input_start;
  std::int64_t horizon_hours = 0;
  std::vector<double> inputs;
  Mask input_mask;
  std::vector<double> targets;
  Mask target_mask;

  std::size_t size() const noexcept { return inputs.size(); }
  SequenceView view(std::size_t start, std::size_t length) const;

  friend bool operator==(const ScaledDataset&, const ScaledDataset&) = default;
};

struct Window {
  std::size_t start = 0;
  SequenceView sequence;
};

/// Windows of `length` steps starting at 0, stride, 2*stride, ...; a final
/// partial window is dropped. Throws InvalidWindow when length exceeds
/// the dataset.
std::vector<Window> make_windows(const ScaledDataset& dataset, std::size_t length, std::size_t stride);

/// Applies `treatment` to log-space inputs. Only `fit` informs the fill;
/// `apply` continues it in time and is filled from the same fit. Masking
/// returns both untouched.
std::pair<OptionalValues, OptionalValues> treat_log_inputs(Treatment treatment,
                                                           std::span<const std::optional<double>> fit,
                                                           std::span<const std::optional<double>> apply,
                                                           int fit_start_hour_of_day,
                                                           const ForecastConfig& config);

struct PreparedData {
  NormalizationParams normalizer;
  ScaledDataset train;
  ScaledDataset test;
  std::int64_t test_hours = 0;
};

/// Shift, split, treat and scale. Nothing from the final `test_hours`
/// hours of the series enters the normalizer or any imputation fit.
PreparedData prepare_data(const HourlySeries& series, const ForecastConfig& config);

struct TrainedModel {
  ModelParams params;
  NormalizationParams normalizer;
  ForecastConfig config;
  std::vector<double> training_loss_trace;
  /// Identifies the station and training inputs the model was fitted on.
  std::uint64_t fingerprint = 0;
  std::size_t train_input_hours = 0;
  std::size_t skipped_batches = 0;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

std::uint64_t training_fingerprint(const HourlySeries& series, std::size_t train_input_hours);

TrainedModel train(const HourlySeries& series, const ForecastConfig& config);

/// Stateless forward pass in chunks of `window_length`, normalized space.
std::vector<double> predict_scaled(const TrainedModel& model, std::span<const double> inputs,
                                   std::span<const std::uint8_t> input_mask);

/// Predicted raw volumes for every hour of `series`, stamped `horizon_hours`
/// later. The series must begin with the training inputs; otherwise throws
/// ModelMismatch.
HourlySeries predict(const TrainedModel& model, const HourlySeries& series);

void write_model(std::ostream& out, const TrainedModel& model);
TrainedModel read_model(std::istream& in);
void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

}  // namespace aadt
