#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <random>
#include <sstream>

#include "ordint/timeseries.hpp"
#include "support.hpp"

using namespace ordint;
using namespace ordint::ts;

namespace {

std::vector<double> white_noise(std::size_t n, Rng& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

std::vector<double> ar1(std::size_t n, double phi, Rng& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  double y = 0.0;
  for (std::size_t i = 0; i < 100 + n; ++i) {
    y = phi * y + nd(rng);
    if (i >= 100) v[i - 100] = y;
  }
  return v;
}

// y_t = 0.8 x_{t-1} + noise
std::pair<std::vector<double>, std::vector<double>> driven(std::size_t n, Rng& rng) {
  auto x = white_noise(n, rng);
  auto e = white_noise(n, rng);
  std::vector<double> y(n);
  y[0] = e[0];
  for (std::size_t t = 1; t < n; ++t) y[t] = 0.8 * x[t - 1] + e[t];
  return {x, y};
}

}  // namespace

TEST(Aggregate, MeanAndInterpolation) {
  const std::vector<double> v{2, 4, 6};
  const std::vector<std::string> loc{"a", "a", "a"};
  const std::vector<YearMonth> m{{2020, 1}, {2020, 1}, {2020, 3}};
  auto s = aggregate_monthly(v, loc, m, "a", SeriesKind::predicate);
  EXPECT_EQ(s.values, (std::vector<double>{3, 4.5, 6}));
  EXPECT_EQ(s.observed, (std::vector<bool>{true, false, true}));
  EXPECT_EQ(s.start, (YearMonth{2020, 1}));
}

TEST(Aggregate, SingleMonthAndConstant) {
  const std::vector<std::string> loc{"a", "a"};
  const std::vector<YearMonth> one{{2021, 5}, {2021, 5}};
  EXPECT_EQ(aggregate_monthly(std::vector<double>{1, 3}, loc, one, "a", SeriesKind::quantifier).values,
            (std::vector<double>{2}));
  const std::vector<YearMonth> two{{2021, 5}, {2021, 9}};
  auto s = aggregate_monthly(std::vector<double>{7, 7}, loc, two, "a", SeriesKind::quantifier);
  EXPECT_EQ(s.size(), 5u);
  for (double v : s.values) EXPECT_EQ(v, 7.0);
}

TEST(Aggregate, EdgesUseNearestValue) {
  const std::vector<std::string> loc{"a", "a"};
  const std::vector<YearMonth> m{{2020, 3}, {2020, 4}};
  auto s = aggregate_monthly(std::vector<double>{1, 2}, loc, m, "a", SeriesKind::external, YearMonth{2020, 1},
                             YearMonth{2020, 6});
  EXPECT_EQ(s.values, (std::vector<double>{1, 1, 1, 2, 2, 2}));
}

TEST(Aggregate, LatentMeansAreRescaledOverAllEvents) {
  const std::vector<std::string> loc{"a", "b", "b"};
  const std::vector<YearMonth> m{{2020, 1}, {2020, 1}, {2020, 1}};
  auto s = aggregate_monthly(std::vector<double>{2.0, 1.0, 3.0}, loc, m, "a", SeriesKind::latent);
  EXPECT_DOUBLE_EQ(s.values[0], 0.5);
}

TEST(Aggregate, OrderInvariantAndMissingLocation) {
  std::vector<double> v{1, 5, 2, 8, 3};
  std::vector<std::string> loc{"a", "a", "b", "a", "a"};
  std::vector<YearMonth> m{{2020, 1}, {2020, 4}, {2020, 2}, {2020, 1}, {2020, 4}};
  auto s1 = aggregate_monthly(v, loc, m, "a", SeriesKind::external);
  std::reverse(v.begin(), v.end());
  std::reverse(loc.begin(), loc.end());
  std::reverse(m.begin(), m.end());
  auto s2 = aggregate_monthly(v, loc, m, "a", SeriesKind::external);
  ASSERT_EQ(s1.size(), s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) EXPECT_NEAR(s1.values[i], s2.values[i], 1e-15);
  EXPECT_THROW(aggregate_monthly(v, loc, m, "zz", SeriesKind::external), DataError);
}

TEST(Difference, Examples) {
  EXPECT_EQ(difference(std::vector<double>{1, 2, 4}), (std::vector<double>{1, 2}));
  EXPECT_EQ(difference(std::vector<double>{3, 3, 3}), (std::vector<double>{0, 0}));
  std::vector<double> line(10);
  for (std::size_t t = 0; t < 10; ++t) line[t] = 2.0 + 0.5 * static_cast<double>(t);
  for (double d : difference(line)) EXPECT_DOUBLE_EQ(d, 0.5);
  EXPECT_THROW(difference(std::vector<double>{1}), DataError);
}

TEST(Difference, InvertsCumulativeSum) {
  Rng rng(1);
  auto x = white_noise(30, rng);
  std::vector<double> c(x.size());
  std::partial_sum(x.begin(), x.end(), c.begin());
  auto d = difference(c);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(d[i], x[i + 1], 1e-12);
}

TEST(Adf, DegenerateAndShort) {
  EXPECT_TRUE(adf_test(std::vector<double>(40, 1.0)).degenerate);
  EXPECT_THROW(adf_test(std::vector<double>(19, 1.0)), DataError);
}

TEST(Adf, NoiseVersusRandomWalk) {
  int noise_rejects = 0, walk_accepts = 0;
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    auto e = white_noise(200, rng);
    noise_rejects += adf_test(e).stationary;
    std::vector<double> w(e.size());
    std::partial_sum(e.begin(), e.end(), w.begin());
    walk_accepts += !adf_test(w).stationary;
  }
  EXPECT_GE(noise_rejects, 47);
  EXPECT_GE(walk_accepts, 44);
}

TEST(Var, ArRecoversCoefficient) {
  Rng rng(3);
  auto y = ar1(500, 0.8, rng);
  auto fit = fit_ar(y, 6);
  EXPECT_EQ(fit.lag, 1u);
  EXPECT_NEAR(fit.coefficients[0](0, 0), 0.8, 0.05);
  EXPECT_EQ(fit.variables, 1u);
}

TEST(Var, WhiteNoiseCoefficientsNearZero) {
  Rng rng(4);
  auto fit = fit_ar(white_noise(500, rng), 4);
  for (const auto& A : fit.coefficients) EXPECT_LT(std::abs(A(0, 0)), 0.1);
}

TEST(Var, IndependentPairHasSmallCrossTerms) {
  Rng rng(5);
  const std::vector<std::vector<double>> s{ar1(500, 0.5, rng), ar1(500, 0.5, rng)};
  auto fit = fit_var(s, 4);
  EXPECT_EQ(fit.variables, 2u);
  for (const auto& A : fit.coefficients) {
    EXPECT_LT(std::abs(A(0, 1)), 0.1);
    EXPECT_LT(std::abs(A(1, 0)), 0.1);
  }
  EXPECT_EQ(fit.residual_cov.rows(), 2);
}

TEST(Var, RejectsBadShapes) {
  EXPECT_THROW(fit_ar(std::vector<double>(12, 0.0), 4), DataError);
  const std::vector<std::vector<double>> uneven{std::vector<double>(50), std::vector<double>(49)};
  EXPECT_THROW(fit_var(uneven, 2), DataError);
}

TEST(ForecastCv, NoiselessRecursion) {
  std::vector<double> y(80);
  y[0] = 1.0;
  for (std::size_t t = 1; t < y.size(); ++t) y[t] = 0.5 * y[t - 1];
  const std::vector<std::vector<double>> s{y};
  EXPECT_LT(forecast_cv(s, 0, 24, 3), 1e-10);
}

TEST(ForecastCv, LaggedDriverHelps) {
  int wins = 0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(static_cast<std::uint64_t>(100 + seed));
    auto [x, y] = driven(150, rng);
    const std::vector<std::vector<double>> ar{y}, var{y, x};
    wins += forecast_cv(var, 0, 24, 4) < forecast_cv(ar, 0, 24, 4);
  }
  EXPECT_GE(wins, 18);
}

TEST(ForecastCv, TooShort) {
  const std::vector<std::vector<double>> s{std::vector<double>(30, 1.0)};
  EXPECT_THROW(forecast_cv(s, 0, 24, 2), DataError);
}

TEST(Granger, DetectsLaggedCause) {
  Rng rng(7);
  auto [x, y] = driven(300, rng);
  auto g = granger_test(x, y, 1);
  EXPECT_FALSE(g.degenerate);
  EXPECT_LT(g.p_value, 0.01);
}

TEST(Granger, SelfCauseIsDegenerate) {
  Rng rng(8);
  auto y = ar1(100, 0.5, rng);
  auto g = granger_test(y, y, 2);
  EXPECT_TRUE(g.degenerate);
  EXPECT_EQ(g.p_value, 1.0);
}

TEST(Granger, AffineInvariant) {
  Rng rng(9);
  auto [x, y] = driven(120, rng);
  const double p = granger_test(x, y, 2).p_value;
  std::vector<double> x2 = x, y2 = y;
  for (auto& v : x2) v = 3.0 * v - 7.0;
  for (auto& v : y2) v = 0.01 * v + 100.0;
  EXPECT_NEAR(granger_test(x2, y2, 2).p_value, p, 1e-8);
}

TEST(Granger, NullMedian) {
  std::vector<double> ps;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(static_cast<std::uint64_t>(500 + seed));
    auto a = white_noise(150, rng), b = white_noise(150, rng);
    ps.push_back(granger_test(a, b, 2).p_value);
  }
  std::nth_element(ps.begin(), ps.begin() + 50, ps.end());
  EXPECT_GT(ps[50], 0.3);
  EXPECT_LT(ps[50], 0.7);
}

TEST(Pearson, Examples) {
  const std::vector<double> a{1, 2, 3}, b{1, 2, 4}, neg{-1, -2, -3};
  EXPECT_NEAR(pearson(a, a).r, 1.0, 1e-15);
  EXPECT_NEAR(pearson(a, neg).r, -1.0, 1e-15);
  EXPECT_NEAR(pearson(a, b).r, 0.9820, 1e-4);
  EXPECT_FALSE(pearson(a, std::vector<double>{2, 2, 2}).defined);
  EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DataError);
}

TEST(Pearson, PositiveAffineInvariant) {
  Rng rng(10);
  auto a = white_noise(40, rng), b = white_noise(40, rng);
  const double r = pearson(a, b).r;
  for (auto& v : a) v = 5.0 * v + 1.0;
  EXPECT_NEAR(pearson(a, b).r, r, 1e-12);
}

TEST(SeriesCsv, RoundTrip) {
  IntensitySeries s;
  s.start = {2019, 11};
  s.values = {0.25, 1.0 / 3.0, -2.0};
  s.observed = {true, true, true};
  std::stringstream ss;
  write_series(ss, s);
  auto back = read_series(ss);
  EXPECT_EQ(back.start, s.start);
  EXPECT_EQ(back.values, s.values);
  std::stringstream gap("month,value\n2020-01,1\n2020-03,2\n");
  EXPECT_THROW(read_series(gap), DataError);
}

TEST(SeriesCsv, AlignsOverlap) {
  IntensitySeries a, b;
  a.start = {2020, 1};
  a.values = {1, 2, 3, 4};
  b.start = {2020, 3};
  b.values = {30, 40, 50};
  auto [x, y] = align(a, b);
  EXPECT_EQ(x, (std::vector<double>{3, 4}));
  EXPECT_EQ(y, (std::vector<double>{30, 40}));
}

TEST(LeakageSafe, ExcludesLocationFromFit) {
  Rng rng(11);
  auto sim = generate(test::separated_three_class(), 400, rng);
  std::set<YearMonth> held_months;
  for (std::size_t n = 0; n < sim.tuples.size(); ++n) {
    auto& e = sim.tuples[n];
    e.location = n % 4 == 0 ? "target" : "other";
    e.month = YearMonth{2020, 1 + static_cast<int>(n % 24) / 3};
    if (e.location == "target") held_months.insert(e.month);
  }
  Hyperparams h;
  h.classes = 3;
  SamplerConfig cfg;
  cfg.draws = 60;
  cfg.warmup = 60;
  cfg.chains = 1;
  cfg.seed = 4;
  auto r = leakage_safe_z(sim.tuples, "target", h, cfg);
  EXPECT_EQ(r.train_events, 300u);
  EXPECT_EQ(r.train_events_from_location, 0u);
  EXPECT_EQ(r.monthly.size(), held_months.size());
  for (double v : r.series.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(leakage_safe_z(sim.tuples, "nowhere", h, cfg), DataError);
}
