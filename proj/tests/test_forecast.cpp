#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ghlfd/errors.hpp"
#include "ghlfd/forecast.hpp"
#include "test_util.hpp"

namespace ghlfd {
namespace {

TimeSeries random_series(std::mt19937_64& gen, std::size_t n) {
  return TimeSeries({"a", "b", "c"}, testing::random_matrix(gen, n, 3));
}

LstmModel small_model(std::uint64_t seed) {
  LstmModel m(3, 5, 4, 0.5);
  m.initialize(seed);
  return m;
}

TEST(Forecast, ValidWindowAndNaNElsewhere) {
  std::mt19937_64 gen(41);
  const std::size_t w = 6;
  const auto x = random_series(gen, 3 * w + 4);  // trailing partial batch
  const auto fc = run_forecast(small_model(1), x, w);
  EXPECT_EQ(fc.valid_from, w);
  EXPECT_EQ(fc.valid_to, 3 * w);
  ASSERT_EQ(fc.predicted.length(), x.length());
  for (std::size_t t = 0; t < x.length(); ++t)
    for (std::size_t c = 0; c < 3; ++c) {
      const bool valid = t >= w && t < 3 * w;
      EXPECT_EQ(std::isnan(fc.predicted.values()(t, c)), !valid) << t;
    }
}

TEST(Forecast, NoLookahead) {
  std::mt19937_64 gen(42);
  const std::size_t w = 5;
  const auto x = random_series(gen, 6 * w);
  const auto model = small_model(2);
  const auto base = run_forecast(model, x, w);
  for (std::size_t i = 1; i < 6; ++i) {
    Matrix v = x.values();
    for (std::size_t t = i * w; t < 6 * w; ++t)
      for (std::size_t c = 0; c < 3; ++c) v(t, c) += 3.0;
    const auto mutated = run_forecast(model, TimeSeries(x.channel_names(), v), w);
    // Rows up to the end of batch i are forecast from inputs before i*w.
    for (std::size_t t = w; t < (i + 1) * w; ++t)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(mutated.predicted.values()(t, c), base.predicted.values()(t, c));
  }
}

TEST(Forecast, DeterministicAndModelUntouched) {
  std::mt19937_64 gen(43);
  const auto x = random_series(gen, 40);
  const auto model = small_model(3);
  const auto a = run_forecast(model, x, 8);
  const auto b = run_forecast(model, x, 8);
  for (std::size_t t = 8; t < 40; ++t)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(a.predicted.values()(t, c), b.predicted.values()(t, c));
}

TEST(Forecast, Rejections) {
  std::mt19937_64 gen(44);
  const auto model = small_model(4);
  EXPECT_THROW(run_forecast(model, random_series(gen, 11), 6), DataError);
  EXPECT_NO_THROW(run_forecast(model, random_series(gen, 12), 6));
  const std::vector<std::string> expected{"a", "x", "c"};
  EXPECT_THROW(run_forecast(model, random_series(gen, 30), 6, expected), DataError);
  EXPECT_THROW(run_forecast(model, random_series(gen, 30), 0), ConfigError);
}

TEST(Forecast, LearnsSine) {
  const std::size_t w = 20, n = 2000;
  Matrix v(n, 2);
  for (std::size_t t = 0; t < n; ++t) {
    v(t, 0) = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 40.0);
    v(t, 1) = std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / 40.0);
  }
  const TimeSeries x({"s", "c"}, v);
  LstmModel model(2, 12, 12, 0.0);
  model.initialize(5);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 5e-3;
  cfg.dropout_p = 0.0;
  cfg.seed = 5;
  train(model, x, w, cfg);
  const auto fc = run_forecast(model, x, w);
  double err = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 2 * w; t < fc.valid_to; ++t)
    for (std::size_t c = 0; c < 2; ++c, ++count) err += std::abs(fc.predicted.values()(t, c) - v(t, c));
  EXPECT_LT(err / static_cast<double>(count), 0.1);
}

}  // namespace
}  // namespace ghlfd
