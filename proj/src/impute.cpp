#include "aadtcast/impute.hpp"

#include "aadtcast/error.hpp"
#include "aadtcast/random.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace aadt {

namespace {

constexpr std::size_t kCols = DayMatrix::kColumns;

std::size_t resolve_fit_rows(const DayMatrix& m, const std::optional<std::size_t>& fit_rows) {
  const std::size_t n = fit_rows.value_or(m.rows());
  if (n > m.rows()) {
    throw Error(ErrorCode::InvalidArgument, "fit_rows exceeds matrix rows");
  }
  return n;
}

/// Shared preconditions of EM, MICE and RF.
void require_observability(const DayMatrix& m, std::size_t fit_rows, std::string_view method) {
  std::size_t usable = 0;
  std::array<bool, kCols> seen{};
  for (std::size_t r = 0; r < fit_rows; ++r) {
    bool any = false;
    for (std::size_t c = 0; c < kCols; ++c) {
      if (m.observed(r, c)) {
        any = true;
        seen[c] = true;
      }
    }
    if (any) ++usable;
  }
  for (std::size_t c = 0; c < kCols; ++c) {
    if (!seen[c]) {
      throw Error(ErrorCode::InsufficientData,
                  std::string(method) + ": hour column " + std::to_string(c) + " is never observed");
    }
  }
  if (usable < 25) {
    throw Error(ErrorCode::InsufficientData,
                std::string(method) + ": needs at least 25 days with an observation");
  }
}

std::vector<std::size_t> missing_positions(const DayMatrix& m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.rows() * kCols; ++i) {
    if (!m.observed_mask()[i]) out.push_back(i);
  }
  return out;
}

ImputationResult identity_result(const DayMatrix& m, Treatment method) {
  ImputationResult res;
  res.filled.assign(m.cells().begin(), m.cells().end());
  res.method = method;
  return res;
}

std::array<double, kCols> observed_column_means(const DayMatrix& m, std::size_t fit_rows) {
  std::array<double, kCols> sum{};
  std::array<std::size_t, kCols> count{};
  for (std::size_t r = 0; r < fit_rows; ++r) {
    for (std::size_t c = 0; c < kCols; ++c) {
      if (m.observed(r, c)) {
        sum[c] += m.value(r, c);
        ++count[c];
      }
    }
  }
  std::array<double, kCols> mean{};
  for (std::size_t c = 0; c < kCols; ++c) {
    mean[c] = count[c] ? sum[c] / static_cast<double>(count[c]) : 0.0;
  }
  return mean;
}

/// Working copy with missing cells seeded by the fit-row column means.
std::vector<double> mean_seeded_cells(const DayMatrix& m, std::size_t fit_rows) {
  const auto mean = observed_column_means(m, fit_rows);
  std::vector<double> work(m.cells().begin(), m.cells().end());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < kCols; ++c) {
      if (!m.observed(r, c)) work[r * kCols + c] = mean[c];
    }
  }
  return work;
}

std::vector<std::size_t> columns_with_missing(const DayMatrix& m) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < kCols; ++c) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (!m.observed(r, c)) {
        cols.push_back(c);
        break;
      }
    }
  }
  return cols;
}

}  // namespace

std::string_view treatment_name(Treatment t) noexcept {
  switch (t) {
    case Treatment::Masking: return "Masking";
    case Treatment::Mean: return "Mean";
    case Treatment::Median: return "Median";
    case Treatment::Em: return "EM";
    case Treatment::Mice: return "MICE";
    case Treatment::Knn: return "KNN";
    case Treatment::Rf: return "RF";
  }
  return "Masking";
}

std::optional<Treatment> parse_treatment(std::string_view name) noexcept {
  auto lower = [](std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
  };
  const std::string key = lower(name);
  for (Treatment t : kAllTreatments) {
    if (lower(treatment_name(t)) == key) return t;
  }
  return std::nullopt;
}

// ─── DayMatrix ───────────────────────────────────────────────────────────────

DayMatrix::DayMatrix(std::size_t rows, std::size_t leading_padding)
    : rows_(rows),
      leading_padding_(leading_padding),
      cells_(rows * kColumns, 0.0),
      observed_(rows * kColumns, 0) {
  if (leading_padding >= kColumns) {
    throw Error(ErrorCode::InvalidArgument, "day matrix padding must be below 24 hours");
  }
}

std::size_t DayMatrix::missing_count() const noexcept {
  return static_cast<std::size_t>(std::count(observed_.begin(), observed_.end(), 0));
}

DayMatrix DayMatrix::stack(const DayMatrix& top, const DayMatrix& bottom) {
  DayMatrix out(top.rows_ + bottom.rows_, top.leading_padding_);
  std::copy(top.cells_.begin(), top.cells_.end(), out.cells_.begin());
  std::copy(bottom.cells_.begin(), bottom.cells_.end(),
            out.cells_.begin() + static_cast<std::ptrdiff_t>(top.cells_.size()));
  std::copy(top.observed_.begin(), top.observed_.end(), out.observed_.begin());
  std::copy(bottom.observed_.begin(), bottom.observed_.end(),
            out.observed_.begin() + static_cast<std::ptrdiff_t>(top.observed_.size()));
  return out;
}

DayMatrix to_day_matrix(std::span<const std::optional<double>> values, int start_hour_of_day) {
  if (start_hour_of_day < 0 || start_hour_of_day >= kHoursPerDay) {
    throw Error(ErrorCode::InvalidArgument, "start hour of day must be in 0..23");
  }
  const auto pad = static_cast<std::size_t>(start_hour_of_day);
  const std::size_t rows = (pad + values.size() + kCols - 1) / kCols;
  DayMatrix m(rows, pad);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i]) {
      const std::size_t slot = i + pad;
      m.set(slot / kCols, slot % kCols, *values[i]);
    }
  }
  return m;
}

std::vector<double> from_day_matrix(const DayMatrix& matrix, std::size_t original_length) {
  const std::size_t pad = matrix.leading_padding();
  if (pad + original_length > matrix.rows() * kCols) {
    throw Error(ErrorCode::ShapeMismatch, "day matrix is shorter than the requested length");
  }
  std::vector<double> out(original_length);
  for (std::size_t i = 0; i < original_length; ++i) {
    const std::size_t slot = i + pad;
    if (!matrix.observed(slot / kCols, slot % kCols)) {
      throw Error(ErrorCode::IncompleteMatrix,
                  "day matrix cell for hour index " + std::to_string(i) + " is missing");
    }
    out[i] = matrix.value(slot / kCols, slot % kCols);
  }
  return out;
}

DayMatrix completed_matrix(const DayMatrix& original, const ImputationResult& result) {
  if (result.filled.size() != original.rows() * kCols) {
    throw Error(ErrorCode::ShapeMismatch, "imputation result does not match matrix shape");
  }
  DayMatrix out = original;
  for (std::size_t pos : result.filled_positions) {
    out.set(pos / kCols, pos % kCols, result.filled[pos]);
  }
  return out;
}

// ─── Masking and central fill ────────────────────────────────────────────────

PredictionDataset apply_masking(const PredictionDataset& dataset) {
  PredictionDataset out = dataset;
  for (std::size_t i = 0; i < out.inputs.size(); ++i) {
    if (!out.inputs[i]) {
      out.inputs[i] = 0.0;
      out.input_mask[i] = 0;
    }
  }
  return out;
}

double central_statistic(std::span<const std::optional<double>> values, CentralStatistic stat) {
  std::vector<double> present;
  present.reserve(values.size());
  for (const auto& v : values) {
    if (v) present.push_back(*v);
  }
  if (present.empty()) {
    throw Error(ErrorCode::NoObservedData, "central imputation: no observed values");
  }
  if (stat == CentralStatistic::Mean) {
    return std::accumulate(present.begin(), present.end(), 0.0) /
           static_cast<double>(present.size());
  }
  const std::size_t n = present.size();
  const std::size_t mid = n / 2;
  std::nth_element(present.begin(), present.begin() + static_cast<std::ptrdiff_t>(mid),
                   present.end());
  const double upper = present[mid];
  if (n % 2 == 1) return upper;
  const double lower =
      *std::max_element(present.begin(), present.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

ImputationResult impute_central(std::span<const std::optional<double>> series,
                                std::span<const std::optional<double>> reference,
                                CentralStatistic stat) {
  const double fill = central_statistic(reference, stat);
  ImputationResult res;
  res.method = stat == CentralStatistic::Mean ? Treatment::Mean : Treatment::Median;
  res.filled.resize(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i]) {
      res.filled[i] = *series[i];
    } else {
      res.filled[i] = fill;
      res.filled_positions.push_back(i);
    }
  }
  res.iterations_used = res.filled_positions.empty() ? 0 : 1;
  return res;
}

ImputationResult impute_central(std::span<const std::optional<double>> series, CentralStatistic stat) {
  return impute_central(series, series, stat);
}

// ─── EM ──────────────────────────────────────────────────────────────────────

namespace {

struct RowPattern {
  std::vector<int> obs;
  std::vector<int> mis;
};

RowPattern row_pattern(const DayMatrix& m, std::size_t r) {
  RowPattern p;
  for (std::size_t c = 0; c < kCols; ++c) {
    (m.observed(r, c) ? p.obs : p.mis).push_back(static_cast<int>(c));
  }
  return p;
}

/// Raises the spectrum floor of a covariance; returns true if it had to.
bool apply_ridge_floor(Eigen::MatrixXd& sigma) {
  const double eps = 1e-6 * sigma.trace() / static_cast<double>(kCols);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < eps) {
    sigma.diagonal().array() += std::max(eps, std::numeric_limits<double>::min());
    return true;
  }
  return false;
}

/// Conditional mean of the missing block and its conditional covariance.
struct Conditional {
  Eigen::VectorXd mean;   // kCols, observed entries copied through
  Eigen::MatrixXd cov;    // kCols x kCols, non-zero only on the missing block
  double log_density = 0.0;
};

Conditional condition_row(const DayMatrix& m, std::size_t r, const RowPattern& p,
                          const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                          bool want_cov) {
  Conditional out;
  out.mean = mu;
  if (want_cov) out.cov = Eigen::MatrixXd::Zero(kCols, kCols);
  const auto no = static_cast<Eigen::Index>(p.obs.size());
  const auto nm = static_cast<Eigen::Index>(p.mis.size());

  if (no == 0) {
    if (want_cov) out.cov = sigma;
    return out;
  }

  Eigen::VectorXd diff(no);
  Eigen::MatrixXd s_oo(no, no);
  for (Eigen::Index a = 0; a < no; ++a) {
    diff(a) = m.value(r, static_cast<std::size_t>(p.obs[a])) - mu(p.obs[a]);
    out.mean(p.obs[a]) = m.value(r, static_cast<std::size_t>(p.obs[a]));
    for (Eigen::Index b = 0; b < no; ++b) s_oo(a, b) = sigma(p.obs[a], p.obs[b]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
  const Eigen::VectorXd alpha = llt.solve(diff);
  double logdet = 0.0;
  for (Eigen::Index a = 0; a < no; ++a) logdet += 2.0 * std::log(llt.matrixLLT()(a, a));
  out.log_density = -0.5 * (static_cast<double>(no) * std::log(2.0 * std::numbers::pi) + logdet +
                            diff.dot(alpha));

  if (nm == 0) return out;

  Eigen::MatrixXd s_mo(nm, no);
  for (Eigen::Index a = 0; a < nm; ++a) {
    for (Eigen::Index b = 0; b < no; ++b) s_mo(a, b) = sigma(p.mis[a], p.obs[b]);
  }
  const Eigen::VectorXd cond_mean = s_mo * alpha;
  for (Eigen::Index a = 0; a < nm; ++a) out.mean(p.mis[a]) = mu(p.mis[a]) + cond_mean(a);

  if (want_cov) {
    const Eigen::MatrixXd k = llt.solve(s_mo.transpose());  // no x nm
    for (Eigen::Index a = 0; a < nm; ++a) {
      for (Eigen::Index b = 0; b < nm; ++b) {
        out.cov(p.mis[a], p.mis[b]) = sigma(p.mis[a], p.mis[b]) - s_mo.row(a).dot(k.col(b));
      }
    }
  }
  return out;
}

}  // namespace

std::pair<ImputationResult, EmModel> impute_em(const DayMatrix& matrix, const EmOptions& options) {
  if (options.max_iters <= 0 || !(options.tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "EM: max_iters and tol must be positive");
  }
  const std::size_t fit_rows = resolve_fit_rows(matrix, options.fit_rows);
  require_observability(matrix, fit_rows, "EM");

  std::vector<RowPattern> patterns(matrix.rows());
  for (std::size_t r = 0; r < matrix.rows(); ++r) patterns[r] = row_pattern(matrix, r);

  // Start from observed moments with independent columns.
  const auto col_mean = observed_column_means(matrix, fit_rows);
  Eigen::VectorXd mu(kCols);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(kCols, kCols);
  {
    std::array<double, kCols> ss{};
    std::array<std::size_t, kCols> cnt{};
    for (std::size_t r = 0; r < fit_rows; ++r) {
      for (std::size_t c = 0; c < kCols; ++c) {
        if (!matrix.observed(r, c)) continue;
        const double d = matrix.value(r, c) - col_mean[c];
        ss[c] += d * d;
        ++cnt[c];
      }
    }
    for (std::size_t c = 0; c < kCols; ++c) {
      mu(static_cast<Eigen::Index>(c)) = col_mean[c];
      sigma(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) =
          ss[c] / static_cast<double>(cnt[c]);
    }
  }

  EmModel model;
  if (apply_ridge_floor(sigma)) ++model.ridge_activations;

  bool converged = false;
  int iterations = 0;
  int consecutive_ridge = 0;
  const double n = static_cast<double>(fit_rows);

  for (int it = 0; it < options.max_iters; ++it) {
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(kCols);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(kCols, kCols);
    double ll = 0.0;
    for (std::size_t r = 0; r < fit_rows; ++r) {
      const Conditional cond = condition_row(matrix, r, patterns[r], mu, sigma, true);
      ll += cond.log_density;
      s1 += cond.mean;
      s2.noalias() += cond.mean * cond.mean.transpose();
      s2 += cond.cov;
    }
    model.log_likelihood_trace.push_back(ll);
    ++iterations;

    mu = s1 / n;
    sigma = s2 / n - mu * mu.transpose();
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    if (apply_ridge_floor(sigma)) {
      ++model.ridge_activations;
      ++consecutive_ridge;
    } else {
      consecutive_ridge = 0;
    }

    const auto& trace = model.log_likelihood_trace;
    if (trace.size() >= 2) {
      const double prev = trace[trace.size() - 2];
      const double change = std::abs(ll - prev) / std::max(std::abs(prev), 1e-300);
      if (change < options.tol) {
        converged = true;
        break;
      }
    }
  }
  // A covariance that only stays positive-definite through the floor has
  // not converged in any useful sense.
  if (consecutive_ridge >= 2) converged = false;

  model.mean = mu;
  model.covariance = sigma;

  ImputationResult res = identity_result(matrix, Treatment::Em);
  res.filled_positions = missing_positions(matrix);
  res.iterations_used = iterations;
  res.converged = converged;
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    if (patterns[r].mis.empty()) continue;
    const Conditional cond = condition_row(matrix, r, patterns[r], mu, sigma, false);
    for (int c : patterns[r].mis) res.filled[r * kCols + static_cast<std::size_t>(c)] = cond.mean(c);
  }
  return {std::move(res), std::move(model)};
}

// ─── MICE ────────────────────────────────────────────────────────────────────

ImputationResult impute_mice(const DayMatrix& matrix, const MiceOptions& options) {
  if (options.cycles <= 0) throw Error(ErrorCode::InvalidArgument, "MICE: cycles must be positive");
  const std::size_t fit_rows = resolve_fit_rows(matrix, options.fit_rows);
  if (matrix.complete()) return identity_result(matrix, Treatment::Mice);
  require_observability(matrix, fit_rows, "MICE");

  std::vector<double> work = mean_seeded_cells(matrix, fit_rows);
  const auto targets = columns_with_missing(matrix);
  constexpr std::size_t kFeatures = kCols;  // 23 predictors + intercept

  for (int cycle = 0; cycle < options.cycles; ++cycle) {
    for (std::size_t col : targets) {
      Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(kFeatures, kFeatures);
      Eigen::VectorXd xty = Eigen::VectorXd::Zero(kFeatures);
      Eigen::VectorXd x(kFeatures);
      auto load = [&](std::size_t r) {
        Eigen::Index k = 0;
        for (std::size_t c = 0; c < kCols; ++c) {
          if (c != col) x(k++) = work[r * kCols + c];
        }
        x(k) = 1.0;
      };
      std::size_t used = 0;
      for (std::size_t r = 0; r < fit_rows; ++r) {
        if (!matrix.observed(r, col)) continue;
        load(r);
        xtx.selfadjointView<Eigen::Lower>().rankUpdate(x);
        xty += x * work[r * kCols + col];
        ++used;
      }
      if (used == 0) continue;
      xtx = xtx.selfadjointView<Eigen::Lower>();
      xtx.diagonal().array() += options.ridge;
      const Eigen::VectorXd beta = xtx.ldlt().solve(xty);
      for (std::size_t r = 0; r < matrix.rows(); ++r) {
        if (matrix.observed(r, col)) continue;
        load(r);
        work[r * kCols + col] = x.dot(beta);
      }
    }
  }

  ImputationResult res;
  res.method = Treatment::Mice;
  res.filled = std::move(work);
  res.filled_positions = missing_positions(matrix);
  res.iterations_used = options.cycles;
  return res;
}

// ─── KNN ─────────────────────────────────────────────────────────────────────

ImputationResult impute_knn(const DayMatrix& matrix, const KnnOptions& options) {
  if (options.k == 0) throw Error(ErrorCode::InvalidArgument, "KNN: k must be positive");
  const std::size_t fit_rows = resolve_fit_rows(matrix, options.fit_rows);

  ImputationResult res = identity_result(matrix, Treatment::Knn);
  res.filled_positions = missing_positions(matrix);
  if (res.filled_positions.empty()) return res;
  res.iterations_used = 1;

  std::vector<std::pair<double, std::size_t>> ranked;
  std::vector<double> dist(fit_rows);
  std::size_t current_row = std::numeric_limits<std::size_t>::max();

  for (std::size_t pos : res.filled_positions) {
    const std::size_t i = pos / kCols;
    const std::size_t j = pos % kCols;
    if (i != current_row) {
      current_row = i;
      for (std::size_t r = 0; r < fit_rows; ++r) {
        double ss = 0.0;
        std::size_t shared = 0;
        for (std::size_t c = 0; c < kCols; ++c) {
          if (matrix.observed(i, c) && matrix.observed(r, c)) {
            const double d = matrix.value(i, c) - matrix.value(r, c);
            ss += d * d;
            ++shared;
          }
        }
        dist[r] = shared == 0 ? std::numeric_limits<double>::infinity()
                              : std::sqrt(ss * (static_cast<double>(kCols) / static_cast<double>(shared)));
      }
    }
    ranked.clear();
    for (std::size_t r = 0; r < fit_rows; ++r) {
      if (r != i && matrix.observed(r, j)) ranked.emplace_back(dist[r], r);
    }
    if (ranked.empty()) {
      throw Error(ErrorCode::NoObservedData,
                  "KNN: hour column " + std::to_string(j) + " has no donor rows");
    }
    const std::size_t take = std::min(options.k, ranked.size());
    if (take < options.k) ++res.short_neighbourhoods;
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take),
                      ranked.end());
    double sum = 0.0;
    for (std::size_t a = 0; a < take; ++a) sum += matrix.value(ranked[a].second, j);
    res.filled[pos] = sum / static_cast<double>(take);
  }
  return res;
}

// ─── Random forest ───────────────────────────────────────────────────────────

namespace {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

struct ForestParams {
  std::size_t leaf_size;
  std::size_t max_features;
  int max_depth;
  bool bootstrap;
};

/// Design matrix of one target column: predictors and response.
struct TrainingSet {
  std::vector<double> x;  // rows x (kCols - 1)
  std::vector<double> y;
  std::size_t features = kCols - 1;
  double feature(std::size_t row, std::size_t f) const { return x[row * features + f]; }
};

class RegressionTree {
public:
  void fit(const TrainingSet& data, const ForestParams& params, Rng& rng) {
    const std::size_t n = data.y.size();
    std::vector<std::size_t> sample(n);
    if (params.bootstrap) {
      for (auto& s : sample) s = rng.below(n);
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    nodes_.clear();
    build(data, params, rng, sample, 0, sample.size(), 0);
  }

  double predict(std::span<const double> features) const {
    int idx = 0;
    while (nodes_[static_cast<std::size_t>(idx)].feature >= 0) {
      const auto& node = nodes_[static_cast<std::size_t>(idx)];
      idx = features[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes_[static_cast<std::size_t>(idx)].value;
  }

private:
  int build(const TrainingSet& data, const ForestParams& params, Rng& rng,
            std::vector<std::size_t>& sample, std::size_t lo, std::size_t hi, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const std::size_t n = hi - lo;

    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t a = lo; a < hi; ++a) {
      const double y = data.y[sample[a]];
      sum += y;
      sum_sq += y * y;
    }
    const double mean = sum / static_cast<double>(n);
    nodes_[static_cast<std::size_t>(id)].value = mean;

    const double sse = sum_sq - sum * mean;
    const bool depth_capped = params.max_depth > 0 && depth >= params.max_depth;
    if (n < 2 * params.leaf_size || depth_capped || sse <= 1e-12 * std::max(1.0, sum_sq)) {
      return id;
    }

    // Features are drawn without replacement; past the first mtry draws the
    // search only continues while no valid split has been found.
    std::vector<std::size_t> features(data.features);
    std::iota(features.begin(), features.end(), 0);
    const std::size_t mtry = std::min(params.max_features, data.features);

    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order(sample.begin() + static_cast<std::ptrdiff_t>(lo),
                                   sample.begin() + static_cast<std::ptrdiff_t>(hi));
    const double base = sum * sum / static_cast<double>(n);
    for (std::size_t a = 0; a < data.features; ++a) {
      if (a >= mtry && best_feature >= 0) break;
      std::swap(features[a], features[a + rng.below(data.features - a)]);
      const std::size_t f = features[a];
      std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
        const double xp = data.feature(p, f);
        const double xq = data.feature(q, f);
        return xp < xq || (xp == xq && p < q);
      });
      double left_sum = 0.0;
      for (std::size_t k = 1; k < n; ++k) {
        left_sum += data.y[order[k - 1]];
        if (k < params.leaf_size || n - k < params.leaf_size) continue;
        const double x_prev = data.feature(order[k - 1], f);
        const double x_next = data.feature(order[k], f);
        if (!(x_prev < x_next)) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(k) +
                            right_sum * right_sum / static_cast<double>(n - k) - base;
        if (gain > best_gain + 1e-12 * std::max(1.0, sse)) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (x_prev + x_next);
        }
      }
    }
    if (best_feature < 0) return id;

    const auto mid_it = std::stable_partition(
        sample.begin() + static_cast<std::ptrdiff_t>(lo), sample.begin() + static_cast<std::ptrdiff_t>(hi),
        [&](std::size_t s) {
          return data.feature(s, static_cast<std::size_t>(best_feature)) <= best_threshold;
        });
    const auto mid = static_cast<std::size_t>(mid_it - sample.begin());

    nodes_[static_cast<std::size_t>(id)].feature = best_feature;
    nodes_[static_cast<std::size_t>(id)].threshold = best_threshold;
    const int left = build(data, params, rng, sample, lo, mid, depth + 1);
    const int right = build(data, params, rng, sample, mid, hi, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  std::vector<TreeNode> nodes_;
};

}  // namespace

ImputationResult impute_rf(const DayMatrix& matrix, const RfOptions& options) {
  if (options.trees <= 0 || options.iters <= 0 || options.leaf_size == 0) {
    throw Error(ErrorCode::InvalidArgument, "RF: trees, iters and leaf size must be positive");
  }
  const std::size_t fit_rows = resolve_fit_rows(matrix, options.fit_rows);
  if (matrix.complete()) return identity_result(matrix, Treatment::Rf);
  require_observability(matrix, fit_rows, "RF");

  const ForestParams params{
      options.leaf_size,
      options.max_features ? options.max_features
                           : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(kCols - 1)))),
      options.max_depth, options.bootstrap};

  std::vector<double> work = mean_seeded_cells(matrix, fit_rows);
  const auto targets = columns_with_missing(matrix);

  auto predictors = [&](std::size_t r, std::size_t col, std::span<double> out) {
    std::size_t k = 0;
    for (std::size_t c = 0; c < kCols; ++c) {
      if (c != col) out[k++] = work[r * kCols + c];
    }
  };

  ImputationResult res;
  res.method = Treatment::Rf;
  res.filled_positions = missing_positions(matrix);
  res.converged = false;

  for (int it = 0; it < options.iters; ++it) {
    double change = 0.0;
    std::size_t fit_cells = 0;
    for (std::size_t col : targets) {
      TrainingSet data;
      std::vector<std::size_t> missing_rows;
      std::vector<double> row(kCols - 1);
      for (std::size_t r = 0; r < matrix.rows(); ++r) {
        if (!matrix.observed(r, col)) {
          missing_rows.push_back(r);
        } else if (r < fit_rows) {
          predictors(r, col, row);
          data.x.insert(data.x.end(), row.begin(), row.end());
          data.y.push_back(work[r * kCols + col]);
        }
      }
      if (data.y.empty() || missing_rows.empty()) continue;

      std::vector<double> query(missing_rows.size() * (kCols - 1));
      for (std::size_t a = 0; a < missing_rows.size(); ++a) {
        predictors(missing_rows[a], col, std::span<double>(query).subspan(a * (kCols - 1), kCols - 1));
      }

      // Per-tree predictions, merged in tree order.
      std::vector<std::vector<double>> per_tree(static_cast<std::size_t>(options.trees));
      detail::parallel_for(per_tree.size(), options.threads, [&](std::size_t t, unsigned) {
        Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(it), col, t));
        RegressionTree tree;
        tree.fit(data, params, rng);
        auto& out = per_tree[t];
        out.resize(missing_rows.size());
        for (std::size_t a = 0; a < missing_rows.size(); ++a) {
          out[a] = tree.predict(std::span<const double>(query).subspan(a * (kCols - 1), kCols - 1));
        }
      });
      for (std::size_t a = 0; a < missing_rows.size(); ++a) {
        double sum = 0.0;
        for (const auto& tree_out : per_tree) sum += tree_out[a];
        const double next = sum / static_cast<double>(per_tree.size());
        double& cell = work[missing_rows[a] * kCols + col];
        if (missing_rows[a] < fit_rows) {
          change += std::abs(next - cell);
          ++fit_cells;
        }
        cell = next;
      }
    }
    res.iterations_used = it + 1;
    const double mean_change = fit_cells ? change / static_cast<double>(fit_cells) : 0.0;
    if (mean_change < options.stop_change) {
      res.converged = true;
      break;
    }
  }

  res.filled = std::move(work);
  return res;
}

}  // namespace aadt
