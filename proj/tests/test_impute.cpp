#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aadtcast/error.hpp"
#include "aadtcast/impute.hpp"
#include "aadtcast/random.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace aadt;
using namespace oracle;

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

void check_present_untouched(const DayMatrix& m, const ImputationResult& res) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      if (m.observed(r, c)) {
        REQUIRE(res.filled[r * C + c] == m.value(r, c));
      }
    }
  }
}

}  // namespace

TEST_CASE("day matrix reshaping") {
  OptionalValues v48(48, 1.0);
  const auto m48 = to_day_matrix(v48, 0);
  CHECK(m48.rows() == 2);
  CHECK(m48.missing_count() == 0);

  OptionalValues v50(50);
  for (std::size_t i = 0; i < 50; ++i) v50[i] = 0.1 * static_cast<double>(i) + 1e-17;
  const auto m50 = to_day_matrix(v50, 0);
  CHECK(m50.rows() == 3);
  CHECK(m50.missing_count() == 22);
  CHECK(from_day_matrix(m50, 50).size() == 50);
  DayMatrix holed = m50;
  holed.clear(1, 3);
  CHECK(code_of([&] { from_day_matrix(holed, 50); }) == ErrorCode::IncompleteMatrix);

  const auto shifted = to_day_matrix(v50, 5);
  CHECK(shifted.leading_padding() == 5);
  CHECK(shifted.rows() == 3);
  CHECK(shifted.value(0, 5) == *v50[0]);
  CHECK(shifted.value(1, 0) == *v50[19]);
  CHECK_FALSE(shifted.observed(0, 4));

  DayMatrix filled = m50;
  for (std::size_t c = 2; c < C; ++c) filled.set(2, c, -1.0);
  const auto back = from_day_matrix(filled, 50);
  REQUIRE(back.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) CHECK(back[i] == *v50[i]);
}

TEST_CASE("masking zeroes missing inputs and keeps the mask") {
  PredictionDataset d;
  d.inputs = {0.4, std::nullopt, 0.6};
  d.input_mask = {1, 0, 1};
  d.targets = {std::nullopt, 0.5, 0.7};
  d.target_mask = {0, 1, 1};
  const auto out = apply_masking(d);
  CHECK(out.inputs == OptionalValues{0.4, 0.0, 0.6});
  CHECK(out.input_mask == Mask{1, 0, 1});
  CHECK(out.targets == d.targets);
  CHECK(out.target_mask == d.target_mask);

  PredictionDataset none;
  none.inputs = {std::nullopt, std::nullopt};
  none.input_mask = {0, 0};
  const auto z = apply_masking(none);
  CHECK(z.inputs == OptionalValues{0.0, 0.0});
  CHECK(z.input_mask == Mask{0, 0});
}

TEST_CASE("central fills") {
  const auto mean = impute_central(OptionalValues{1.0, std::nullopt, 3.0}, CentralStatistic::Mean);
  CHECK(mean.filled == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(mean.filled_positions == std::vector<std::size_t>{1});

  const auto med = impute_central(OptionalValues{1.0, std::nullopt, 3.0, 100.0}, CentralStatistic::Median);
  CHECK(med.filled[1] == 3.0);
  CHECK(central_statistic(OptionalValues{4.0, 1.0, 3.0, 2.0}, CentralStatistic::Median) == 2.5);

  CHECK(code_of([] { impute_central(OptionalValues{std::nullopt, std::nullopt}, CentralStatistic::Mean); }) ==
        ErrorCode::NoObservedData);

  // Reference statistic comes from the second argument only.
  const auto ref = impute_central(OptionalValues{std::nullopt, 7.0}, OptionalValues{1.0, 2.0, 3.0},
                                  CentralStatistic::Mean);
  CHECK(ref.filled == std::vector<double>{2.0, 7.0});

  Rng rng(3);
  OptionalValues v(101);
  double s = 0.0;
  std::size_t n = 0;
  for (auto& x : v) {
    if (rng.uniform() < 0.7) {
      x = rng.uniform(0.0, 50.0);
      s += *x;
      ++n;
    }
  }
  const auto r = impute_central(v, CentralStatistic::Mean);
  for (std::size_t p : r.filled_positions) CHECK(r.filled[p] == s / static_cast<double>(n));
}

TEST_CASE("complete matrices pass through every method") {
  const DayMatrix m = gaussian_rows(40, 9, nullptr, 0.0);
  REQUIRE(m.complete());
  const auto em = impute_em(m);
  CHECK(em.first.filled_positions.empty());
  CHECK(std::equal(em.first.filled.begin(), em.first.filled.end(), m.cells().begin()));
  for (const auto& res : {impute_mice(m), impute_knn(m), impute_rf(m)}) {
    CHECK(res.filled_positions.empty());
    CHECK(std::equal(res.filled.begin(), res.filled.end(), m.cells().begin()));
  }

  // EM's moments are the sample moments when nothing is missing.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(C);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < C; ++c) mean(static_cast<Eigen::Index>(c)) += m.value(r, c);
  mean /= static_cast<double>(m.rows());
  CHECK((em.second.mean - mean).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(C, C);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Eigen::VectorXd x(C);
    for (std::size_t c = 0; c < C; ++c) x(static_cast<Eigen::Index>(c)) = m.value(r, c) - mean(static_cast<Eigen::Index>(c));
    cov += x * x.transpose();
  }
  cov /= static_cast<double>(m.rows());
  CHECK((em.second.covariance - cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("EM recovers a Gaussian better than column means") {
  DayMatrix truth;
  const DayMatrix m = gaussian_rows(500, 21, &truth);
  const auto [res, model] = impute_em(m);
  check_present_untouched(m, res);
  const auto& trace = model.log_likelihood_trace;
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-8);
  const DayMatrix filled = completed_matrix(m, res);
  CHECK(rmse_on_missing(m, truth, filled) <= rmse_on_missing(m, truth, column_mean_fill(m)));
  CHECK((model.covariance - model.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("EM conditional mean on an exact linear pair") {
  // Column 1 is exactly twice column 0; the other 22 columns are observed
  // constants.
  DayMatrix m(30);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double x1 = 0.5 + 0.1 * static_cast<double>(r) + 0.03 * static_cast<double>(r * r % 7);
    m.set(r, 0, x1);
    m.set(r, 1, 2.0 * x1);
    for (std::size_t c = 2; c < C; ++c) m.set(r, c, 3.0);
  }
  const double x1 = m.value(17, 0);
  m.clear(17, 1);
  const auto [res, model] = impute_em(m);
  CHECK(std::abs(res.filled[17 * C + 1] - 2.0 * x1) < 1e-6);
  CHECK(model.ridge_activations > 0);
}

TEST_CASE("EM preconditions") {
  DayMatrix small = gaussian_rows(10, 4);
  CHECK(code_of([&] { impute_em(small); }) == ErrorCode::InsufficientData);
  DayMatrix m = gaussian_rows(60, 4);
  for (std::size_t r = 0; r < m.rows(); ++r) m.clear(r, 7);
  CHECK(code_of([&] { impute_em(m); }) == ErrorCode::InsufficientData);
  CHECK(code_of([&] { impute_mice(m); }) == ErrorCode::InsufficientData);
  CHECK(code_of([&] { impute_rf(m); }) == ErrorCode::InsufficientData);
}

TEST_CASE("MICE reproduces an exact linear relation") {
  Rng rng(17);
  DayMatrix m(60);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < C; ++c) m.set(r, c, rng.normal());
    m.set(r, 1, 3.0 * m.value(r, 0) + 1.0);
  }
  const double x1 = m.value(33, 0);
  m.clear(33, 1);
  const auto res = impute_mice(m, MiceOptions{1});
  CHECK(std::abs(res.filled[33 * C + 1] - (3.0 * x1 + 1.0)) < 1e-6);
  check_present_untouched(m, res);
}

TEST_CASE("MICE beats column means on correlated data") {
  DayMatrix truth;
  const DayMatrix m = gaussian_rows(300, 5, &truth);
  const auto res = impute_mice(m);
  check_present_untouched(m, res);
  CHECK(rmse_on_missing(m, truth, completed_matrix(m, res)) <= rmse_on_missing(m, truth, column_mean_fill(m)));
}

TEST_CASE("KNN basics") {
  DayMatrix m(6);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < C; ++c) m.set(r, c, static_cast<double>(r * 10 + c));
  // Row 4 copies row 0 except for the missing cell.
  for (std::size_t c = 0; c < C; ++c) m.set(4, c, m.value(0, c));
  m.set(0, 3, 999.0);
  m.clear(4, 3);
  const auto k1 = impute_knn(m, KnnOptions{1});
  CHECK(k1.filled[4 * C + 3] == 999.0);

  // Equidistant donors resolve to the lowest row indices.
  DayMatrix eq(8);
  for (std::size_t r = 0; r < eq.rows(); ++r) {
    for (std::size_t c = 0; c < C; ++c) eq.set(r, c, 0.0);
    eq.set(r, 5, static_cast<double>(r));
  }
  eq.clear(7, 5);
  const auto tie = impute_knn(eq, KnnOptions{3});
  CHECK(tie.filled[7 * C + 5] == doctest::Approx(1.0));
  CHECK(tie.short_neighbourhoods == 0);

  const auto short_k = impute_knn(eq, KnnOptions{20});
  CHECK(short_k.short_neighbourhoods == 1);
  CHECK(short_k.filled[7 * C + 5] == doctest::Approx(3.0));

  DayMatrix lonely(3);
  for (std::size_t c = 0; c < C; ++c) lonely.set(0, c, 1.0);
  lonely.clear(0, 2);
  CHECK(code_of([&] { impute_knn(lonely); }) == ErrorCode::NoObservedData);
}

TEST_CASE("KNN equals an exhaustive oracle on random small matrices") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 2 + rng.below(11);
    DayMatrix m(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < C; ++c)
        if (rng.uniform() > 0.25) m.set(r, c, std::round(rng.uniform(0.0, 4.0) * 2.0) / 2.0);
    // Every column keeps a donor.
    for (std::size_t c = 0; c < C; ++c) m.set(rng.below(rows), c, rng.uniform(0.0, 4.0));
    const std::size_t k = 1 + rng.below(6);
    ImputationResult res;
    try {
      res = impute_knn(m, KnnOptions{k});
    } catch (const Error& e) {
      // A column observed in a single row leaves that row without donors.
      CHECK(e.code() == ErrorCode::NoObservedData);
      continue;
    }
    for (std::size_t pos : res.filled_positions) {
      REQUIRE(res.filled[pos] == knn_oracle(m, pos / C, pos % C, k));
    }
    check_present_untouched(m, res);
  }
}

TEST_CASE("single shallow tree matches a hand trace") {
  // Six distinct design rows, each repeated five times. Predictor column 0,
  // target column 1, the rest constant. Leaf size 10 here is leaf size 2 on
  // the six distinct rows, leaving cuts after the 2nd, 3rd and 4th row:
  //   after 2: 11^2/2 + 88^2/4 = 1996.5
  //   after 3: 18^2/3 + 81^2/3 = 2295     <- best
  //   after 4: 38^2/4 + 61^2/2 = 2221.5
  // so {1,2,3} go left (mean 6) and {10,11,12} right (mean 27).
  const double x[6] = {1, 2, 3, 10, 11, 12};
  const double y[6] = {5, 6, 7, 20, 21, 40};
  DayMatrix m(32);
  for (std::size_t r = 0; r < 30; ++r) {
    for (std::size_t c = 0; c < C; ++c) m.set(r, c, 1.0);
    m.set(r, 0, x[r % 6]);
    m.set(r, 1, y[r % 6]);
  }
  for (std::size_t r = 30; r < 32; ++r)
    for (std::size_t c = 0; c < C; ++c) m.set(r, c, 1.0);
  m.set(30, 0, 11.0);
  m.clear(30, 1);
  m.set(31, 0, 2.0);
  m.clear(31, 1);

  RfOptions o;
  o.trees = 1;
  o.iters = 1;
  o.max_depth = 1;
  o.bootstrap = false;
  o.max_features = 23;
  o.leaf_size = 10;
  const auto res = impute_rf(m, o);
  CHECK(res.filled[30 * C + 1] == doctest::Approx(27.0));
  CHECK(res.filled[31 * C + 1] == doctest::Approx(6.0));
}

TEST_CASE("forest follows a step function") {
  Rng rng(8);
  DayMatrix m(80);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < C; ++c) m.set(r, c, 2.0);
    const double x1 = rng.uniform(-5.0, 5.0);
    m.set(r, 0, x1);
    m.set(r, 1, x1 > 0 ? 10.0 : -10.0);
  }
  m.set(40, 0, 5.0);
  m.clear(40, 1);
  RfOptions o;
  o.seed = 99;
  const auto res = impute_rf(m, o);
  CHECK(std::abs(res.filled[40 * C + 1] - 10.0) < 1.0);
}

TEST_CASE("forest is reproducible and thread-count independent") {
  DayMatrix truth;
  const DayMatrix m = gaussian_rows(60, 12, &truth);
  RfOptions o;
  o.trees = 10;
  o.iters = 2;
  o.seed = 5;
  const auto a = impute_rf(m, o);
  const auto b = impute_rf(m, o);
  o.threads = 4;
  const auto c = impute_rf(m, o);
  CHECK(a.filled == b.filled);
  CHECK(a.filled == c.filled);
  check_present_untouched(m, a);
  CHECK(rmse_on_missing(m, truth, completed_matrix(m, a)) <= rmse_on_missing(m, truth, column_mean_fill(m)));
}

TEST_CASE("fit rows isolate later rows") {
  DayMatrix truth;
  DayMatrix top = gaussian_rows(40, 31, &truth);
  DayMatrix bottom = gaussian_rows(10, 32);
  DayMatrix poisoned = bottom;
  for (std::size_t r = 0; r < poisoned.rows(); ++r)
    for (std::size_t c = 0; c < C; ++c)
      if (poisoned.observed(r, c)) poisoned.set(r, c, 1e6);
  const DayMatrix a = DayMatrix::stack(top, bottom);
  const DayMatrix b = DayMatrix::stack(top, poisoned);
  const std::size_t fit = top.rows();
  const std::size_t cells = fit * C;
  auto head = [&](const ImputationResult& r) { return std::vector<double>(r.filled.begin(), r.filled.begin() + cells); };

  CHECK(head(impute_em(a, EmOptions{100, 1e-8, fit}).first) == head(impute_em(b, EmOptions{100, 1e-8, fit}).first));
  CHECK(head(impute_mice(a, MiceOptions{10, 1e-8, fit})) == head(impute_mice(b, MiceOptions{10, 1e-8, fit})));
  CHECK(head(impute_knn(a, KnnOptions{5, fit})) == head(impute_knn(b, KnnOptions{5, fit})));
  RfOptions o;
  o.trees = 5;
  o.iters = 2;
  o.fit_rows = fit;
  CHECK(head(impute_rf(a, o)) == head(impute_rf(b, o)));
}

TEST_CASE("treatment names") {
  for (Treatment t : kAllTreatments) {
    const auto p = parse_treatment(treatment_name(t));
    REQUIRE(p);
    CHECK(*p == t);
  }
  CHECK(parse_treatment("mice") == Treatment::Mice);
  CHECK_FALSE(parse_treatment("zero"));
}
