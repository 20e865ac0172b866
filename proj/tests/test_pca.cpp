#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ghlfd/errors.hpp"
#include "ghlfd/evaluate.hpp"
#include "ghlfd/pca.hpp"
#include "test_util.hpp"

namespace ghlfd {
namespace {

TimeSeries series(const Matrix& m) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < m.cols(); ++c) names.push_back("c" + std::to_string(c));
  return TimeSeries(names, m);
}

// Eigenvalues of a symmetric 3x3 matrix from its characteristic cubic
// (trigonometric solution), descending.
std::vector<double> sym3_eigenvalues(const double a[3][3]) {
  const double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
  const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
  const double p2 = (a[0][0] - q) * (a[0][0] - q) + (a[1][1] - q) * (a[1][1] - q) + (a[2][2] - q) * (a[2][2] - q) +
                    2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  double b[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (a[i][j] - (i == j ? q : 0.0)) / p;
  const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                     b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                     b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return {e1, 3.0 * q - e1 - e3, e3};
}

TEST(Pca, RankOneData) {
  std::mt19937_64 gen(31);
  const auto z = testing::random_vector(gen, 500);
  Matrix m(500, 2);
  for (std::size_t t = 0; t < 500; ++t) {
    m(t, 0) = 2.0 * z[t];
    m(t, 1) = -z[t] + 0.5;
  }
  const auto det = pca_fit(series(m), 0.95);
  EXPECT_EQ(det.components(), 1u);
  EXPECT_NEAR(det.explained_fraction, 1.0, 1e-12);
  for (double q : pca_score(det, series(m))) EXPECT_NEAR(q, 0.0, 1e-20 + 1e-12);
}

TEST(Pca, ExplainedFractionReached) {
  std::mt19937_64 gen(32);
  const Matrix m = testing::random_matrix(gen, 4000, 5);
  for (double f : {0.3, 0.5, 0.9, 0.99, 1.0}) {
    const auto det = pca_fit(series(m), f);
    EXPECT_GE(det.explained_fraction, f - 1e-9);
    EXPECT_LE(det.components(), 5u);
  }
  EXPECT_THROW(pca_fit(series(m), 0.0), ConfigError);
}

TEST(Pca, EigenvaluesMatchCharacteristicPolynomial) {
  std::mt19937_64 gen(33);
  for (int k = 0; k < 100; ++k) {
    Matrix m = testing::random_matrix(gen, 200, 3);
    for (std::size_t t = 0; t < 200; ++t) m(t, 2) += 0.7 * m(t, 0);
    double mean[3] = {0, 0, 0};
    for (std::size_t t = 0; t < 200; ++t)
      for (int c = 0; c < 3; ++c) mean[c] += m(t, c) / 200.0;
    double cov[3][3] = {};
    for (std::size_t t = 0; t < 200; ++t)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) cov[i][j] += (m(t, i) - mean[i]) * (m(t, j) - mean[j]) / 200.0;
    const auto want = sym3_eigenvalues(cov);
    const auto det = pca_fit(series(m), 1.0);
    ASSERT_EQ(det.eigenvalues.size(), 3u);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(det.eigenvalues[i], want[i], 1e-8);
    for (std::size_t r = 0; r < det.components(); ++r)
      for (std::size_t s = 0; s < det.components(); ++s) {
        double dot = 0.0;
        for (std::size_t c = 0; c < 3; ++c) dot += det.basis(r, c) * det.basis(s, c);
        EXPECT_NEAR(dot, r == s ? 1.0 : 0.0, 1e-9);
      }
  }
}

TEST(Pca, SeparatesOffSubspaceSegment) {
  std::mt19937_64 gen(34);
  const std::size_t n = 2000;
  const auto z = testing::random_vector(gen, n);
  const auto noise = testing::random_vector(gen, n * 3, -0.01, 0.01);
  Matrix train(n, 3), test(n, 3);
  std::vector<std::uint8_t> danger(n, 0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < 3; ++c) train(t, c) = (c + 1.0) * z[t] + noise[3 * t + c];
    for (std::size_t c = 0; c < 3; ++c) test(t, c) = train(t, c);
    if (t >= 1200 && t < 1400) {
      test(t, 1) += 1.0;
      danger[t] = 1;
    }
  }
  const auto det = pca_fit(series(train), 0.99);
  EXPECT_EQ(det.components(), 1u);
  const auto q = pca_score(det, series(test));
  const TraceErrors tr{"seg", q, danger};
  const auto rep = sweep_thresholds(std::span(&tr, 1), threshold_grid(0.0, 1.0, 101), 50);
  EXPECT_EQ(rep.best().f1, 1.0);
  EXPECT_THROW(pca_score(det, series(Matrix(5, 2))), DataError);
}

TEST(Pca, ConstantInputIsNumericError) {
  Matrix m(100, 3);
  m.fill(0.4);
  EXPECT_THROW(pca_fit(series(m), 0.9), NumericError);
}

}  // namespace
}  // namespace ghlfd
