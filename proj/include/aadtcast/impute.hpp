#pragma once

#include "aadtcast/series.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace aadt {

/// Missing-data treatments, in the order used for tie-breaking.
enum class Treatment { Masking, Mean, Median, Em, Mice, Knn, Rf };

inline constexpr std::array<Treatment, 7> kAllTreatments = {
    Treatment::Masking, Treatment::Mean, Treatment::Median, Treatment::Em,
    Treatment::Mice,    Treatment::Knn,  Treatment::Rf};

std::string_view treatment_name(Treatment t) noexcept;
/// Accepts the canonical names case-insensitively ("masking", "MICE", ...).
std::optional<Treatment> parse_treatment(std::string_view name) noexcept;

// ─── Day x hour matrix ───────────────────────────────────────────────────────

/// One row per day, one column per hour of day. Leading hours before the
/// series start and trailing hours after its end are padding and are
/// never observed.
class DayMatrix {
public:
  static constexpr std::size_t kColumns = 24;

  DayMatrix() = default;
  /// All cells missing.
  explicit DayMatrix(std::size_t rows, std::size_t leading_padding = 0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t leading_padding() const noexcept { return leading_padding_; }

  bool observed(std::size_t r, std::size_t c) const noexcept { return observed_[r * kColumns + c]; }
  double value(std::size_t r, std::size_t c) const noexcept { return cells_[r * kColumns + c]; }
  std::optional<double> cell(std::size_t r, std::size_t c) const noexcept {
    return observed(r, c) ? std::optional<double>(value(r, c)) : std::nullopt;
  }
  void set(std::size_t r, std::size_t c, double v) noexcept {
    cells_[r * kColumns + c] = v;
    observed_[r * kColumns + c] = 1;
  }
  void clear(std::size_t r, std::size_t c) noexcept {
    cells_[r * kColumns + c] = 0.0;
    observed_[r * kColumns + c] = 0;
  }

  std::span<const double> cells() const noexcept { return cells_; }
  const Mask& observed_mask() const noexcept { return observed_; }
  std::size_t missing_count() const noexcept;
  bool complete() const noexcept { return missing_count() == 0; }

  /// Rows of `top` followed by rows of `bottom`; keeps `top`'s padding.
  static DayMatrix stack(const DayMatrix& top, const DayMatrix& bottom);

private:
  std::size_t rows_ = 0;
  std::size_t leading_padding_ = 0;
  std::vector<double> cells_;
  Mask observed_;
};

DayMatrix to_day_matrix(std::span<const std::optional<double>> values, int start_hour_of_day);
/// Throws IncompleteMatrix if any non-padding cell is missing.
std::vector<double> from_day_matrix(const DayMatrix& matrix, std::size_t original_length);

// ─── Results ─────────────────────────────────────────────────────────────────

struct ImputationResult {
  /// Complete values. For matrix methods these are the row-major cells.
  std::vector<double> filled;
  std::vector<std::size_t> filled_positions;
  Treatment method = Treatment::Mean;
  int iterations_used = 0;
  bool converged = true;
  /// KNN only: cells that had fewer than k donor rows.
  std::size_t short_neighbourhoods = 0;
};

/// Original matrix with every missing cell set from `result`.
DayMatrix completed_matrix(const DayMatrix& original, const ImputationResult& result);

struct EmModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::vector<double> log_likelihood_trace;
  int ridge_activations = 0;
};

// ─── Options ─────────────────────────────────────────────────────────────────
// Every matrix method takes `fit_rows`: only rows [0, fit_rows) inform the
// fitted parameters, regressions, donors or forests; all rows are filled.
// Unset means every row.

struct EmOptions {
  int max_iters = 100;
  double tol = 1e-8;
  std::optional<std::size_t> fit_rows;
};

struct MiceOptions {
  int cycles = 10;
  double ridge = 1e-8;
  std::optional<std::size_t> fit_rows;
};

struct KnnOptions {
  std::size_t k = 5;
  std::optional<std::size_t> fit_rows;
};

struct RfOptions {
  int trees = 50;
  int iters = 5;
  std::size_t leaf_size = 5;
  /// 0 means ceil(sqrt(23)).
  std::size_t max_features = 0;
  /// 0 means unbounded.
  int max_depth = 0;
  bool bootstrap = true;
  double stop_change = 1e-4;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::optional<std::size_t> fit_rows;
};

// ─── Operations ──────────────────────────────────────────────────────────────

/// Missing inputs become 0.0 while `input_mask` keeps them flagged.
/// Targets are left alone.
PredictionDataset apply_masking(const PredictionDataset& dataset);

enum class CentralStatistic { Mean, Median };

/// Throws NoObservedData when nothing is present.
double central_statistic(std::span<const std::optional<double>> values, CentralStatistic stat);

ImputationResult impute_central(std::span<const std::optional<double>> series, CentralStatistic stat);
/// Fills `series` with the statistic of `reference`.
ImputationResult impute_central(std::span<const std::optional<double>> series,
                                std::span<const std::optional<double>> reference,
                                CentralStatistic stat);

/// Gaussian maximum-likelihood imputation over the 24 hourly columns.
std::pair<ImputationResult, EmModel> impute_em(const DayMatrix& matrix, const EmOptions& options = {});
ImputationResult impute_mice(const DayMatrix& matrix, const MiceOptions& options = {});
ImputationResult impute_knn(const DayMatrix& matrix, const KnnOptions& options = {});
ImputationResult impute_rf(const DayMatrix& matrix, const RfOptions& options = {});

}  // namespace aadt
