#include <gtest/gtest.h>

#include <sstream>

#include "ordint/infer.hpp"
#include "support.hpp"

using namespace ordint;

namespace {

struct PriorOnly {
  Hyperparams h;
  std::size_t dim() const { return Layout(h).dim(); }
  double operator()(std::span<const double> x, std::span<double> g) const {
    std::fill(g.begin(), g.end(), 0.0);
    return log_prior(x, h, g);
  }
};

// Correlated bivariate normal.
struct Gaussian2 {
  double s1 = 1.0, s2 = 3.0, r = 0.7;
  std::size_t dim() const { return 2; }
  double operator()(std::span<const double> x, std::span<double> g) const {
    const double det = s1 * s1 * s2 * s2 * (1 - r * r);
    const double a = s2 * s2 / det, b = -r * s1 * s2 / det, d = s1 * s1 / det;
    g[0] = -(a * x[0] + b * x[1]);
    g[1] = -(b * x[0] + d * x[1]);
    return -0.5 * (a * x[0] * x[0] + 2 * b * x[0] * x[1] + d * x[1] * x[1]);
  }
};

struct NanGradient {
  std::size_t dim() const { return 2; }
  double operator()(std::span<const double> x, std::span<double> g) const {
    g[0] = -x[0];
    g[1] = std::nan("");
    return -0.5 * x[0] * x[0];
  }
};

}  // namespace

TEST(Nuts, PriorRecovery) {
  PriorOnly target;
  target.h.classes = 3;
  target.h.mu = 0.0;
  target.h.sigma = 1.0;
  SamplerConfig cfg;
  cfg.draws = 1000;
  cfg.warmup = 200;
  cfg.chains = 4;
  cfg.seed = 11;
  auto chains = run_chains(target, [&](Rng& rng) { return initial_point(target.h, rng); }, cfg);
  const Layout L(target.h);
  for (std::size_t off : {L.omega(), L.delta(), L.b()}) {
    for (std::size_t c = 0; c < 3; ++c) {
      double m = 0.0;
      std::size_t n = 0;
      for (const auto& ch : chains)
        for (const auto& x : ch.draws) m += x[off + c], ++n;
      EXPECT_NEAR(m / static_cast<double>(n), 0.0, 0.1) << L.name(off + c);
    }
  }
}

TEST(Nuts, CorrelatedGaussianCovariance) {
  Gaussian2 target;
  SamplerConfig cfg;
  cfg.draws = 2500;
  cfg.warmup = 500;
  cfg.chains = 4;
  cfg.seed = 5;
  auto chains = run_chains(target, [](Rng&) { return std::vector<double>{0.5, -0.5}; }, cfg);
  double m0 = 0, m1 = 0, n = 0;
  for (const auto& ch : chains)
    for (const auto& x : ch.draws) m0 += x[0], m1 += x[1], n += 1;
  m0 /= n, m1 /= n;
  double v0 = 0, v1 = 0, c01 = 0;
  for (const auto& ch : chains)
    for (const auto& x : ch.draws) {
      v0 += (x[0] - m0) * (x[0] - m0);
      v1 += (x[1] - m1) * (x[1] - m1);
      c01 += (x[0] - m0) * (x[1] - m1);
    }
  v0 /= n - 1, v1 /= n - 1, c01 /= n - 1;
  EXPECT_NEAR(v0, 1.0, 0.05);
  EXPECT_NEAR(v1, 9.0, 0.45);
  EXPECT_NEAR(c01, 0.7 * 3.0, 0.05 * 2.1 + 0.05);
}

TEST(Nuts, LeapfrogErrorShrinksWithStep) {
  Rng rng(3);
  Hyperparams h;
  h.classes = 3;
  auto sim = generate(test::separated_three_class(), 200, rng);
  const ModelDensity density(sim.tuples, h);
  auto x0 = initial_point(h, rng);
  nuts::Sampler<ModelDensity> s(density, x0, {}, rng);
  auto mean_error = [&](double eps) {
    Rng r2(9);
    double total = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      auto z = s.state();
      std::normal_distribution<double> nd;
      for (auto& p : z.p) p = nd(r2);
      const double H0 = s.hamiltonian(z);
      for (int k = 0; k < static_cast<int>(0.05 / eps); ++k) s.leapfrog(z, eps);
      total += std::abs(s.hamiltonian(z) - H0);
    }
    return total / 20;
  };
  EXPECT_LT(mean_error(0.0025), mean_error(0.005));
}

TEST(Nuts, NonFiniteGradientNamesCoordinate) {
  NanGradient target;
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.draws = 5;
  cfg.warmup = 0;
  try {
    run_chains(target, [](Rng&) { return std::vector<double>{0.0, 0.0}; }, cfg,
               [](std::size_t i) { return "coord" + std::to_string(i); });
    FAIL();
  } catch (const SamplerError& e) {
    EXPECT_NE(std::string(e.what()).find("coord1"), std::string::npos);
  }
}

TEST(Nuts, WindowSchedule) {
  auto w = nuts::metric_window_ends(200);
  ASSERT_FALSE(w.empty());
  EXPECT_EQ(w.back(), 180u);
  for (std::size_t i = 1; i < w.size(); ++i) EXPECT_GT(w[i], w[i - 1]);
  EXPECT_GT(w.front(), 30u);
  EXPECT_TRUE(nuts::metric_window_ends(10).empty());
}

TEST(Diagnostics, ConstantChainsAreFlagged) {
  diag::Chains c(4, std::vector<double>(100, 2.5));
  EXPECT_TRUE(std::isnan(diag::split_rhat(c)));
  EXPECT_TRUE(std::isnan(diag::bulk_ess(c)));
  EXPECT_TRUE(diag::summarize("x", c).flagged);
}

TEST(Diagnostics, IidChains) {
  Rng rng(1);
  std::normal_distribution<double> nd;
  diag::Chains c(4, std::vector<double>(1000));
  for (auto& ch : c)
    for (auto& v : ch) v = nd(rng);
  const double r = diag::split_rhat(c);
  EXPECT_GE(r, 0.99);
  EXPECT_LE(r, 1.01);
  const double ess = diag::bulk_ess(c);
  EXPECT_GT(ess, 3000.0);
  EXPECT_LT(ess, 5000.0);
}

TEST(Diagnostics, TrendingChainFlagged) {
  Rng rng(2);
  std::normal_distribution<double> nd;
  diag::Chains c(4, std::vector<double>(500));
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t i = 0; i < 500; ++i) c[j][i] = nd(rng) + (j == 0 ? 0.01 * i : 0.0);
  EXPECT_GT(diag::split_rhat(c), 1.1);
  EXPECT_TRUE(diag::summarize("x", c).flagged);
}

TEST(Diagnostics, Ar1EssMatchesTheory) {
  Rng rng(4);
  std::normal_distribution<double> nd;
  const double phi = 0.5;
  diag::Chains c(4, std::vector<double>(5000));
  for (auto& ch : c) {
    double y = nd(rng);
    for (auto& v : ch) v = y = phi * y + std::sqrt(1 - phi * phi) * nd(rng);
  }
  // (1 - phi) / (1 + phi) of the draw count
  EXPECT_NEAR(diag::bulk_ess(c) / 20000.0, 1.0 / 3.0, 0.05);
}

TEST(Scoring, SummaryExamples) {
  auto one = summarize_mass({0.0, 0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(one.mean, 3.0);
  EXPECT_EQ(one.mode, 3u);
  auto tie = summarize_mass({1.0, 1.0});
  EXPECT_DOUBLE_EQ(tie.mean, 1.5);
  EXPECT_EQ(tie.mode, 1u);
}

TEST(Scoring, AveragesDraws) {
  // two draws whose responsibilities are (1,0) and (0,1)
  ParamsConstrained a;
  a.pi_z = {1.0 - 1e-300, 1e-300};
  a.pi_s = {{0.5, 0.5}, {0.5, 0.5}};
  a.pi_o = a.pi_s;
  a.omega = {0.4, 0.6};
  a.kappa = {5, 5};
  a.delta = {0.5, 0.4};
  a.b = {0.5, 0.4};
  ParamsConstrained b = a;
  b.pi_z = {1e-300, 1.0 - 1e-300};
  std::vector<ParamsConstrained> draws{a, b};
  std::vector<EventTuple> ev(1);
  auto est = score_events(std::span<const ParamsConstrained>(draws), ev, SiteMask::none());
  EXPECT_NEAR(est[0].mean, 1.5, 1e-12);
  EXPECT_EQ(est[0].mode, 1u);
}

class FittedSmall : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    Rng rng(77);
    sim_ = new Synthetic(generate(test::separated_three_class(), 600, rng));
    Hyperparams h;
    h.classes = 3;
    SamplerConfig cfg;
    cfg.draws = 200;
    cfg.warmup = 150;
    cfg.chains = 2;
    cfg.seed = 3;
    post_ = new PosteriorSamples(sample_posterior(sim_->tuples, h, cfg));
  }
  static void TearDownTestSuite() {
    delete sim_;
    delete post_;
  }
  static Synthetic* sim_;
  static PosteriorSamples* post_;
};
Synthetic* FittedSmall::sim_ = nullptr;
PosteriorSamples* FittedSmall::post_ = nullptr;

TEST_F(FittedSmall, DrawsHonourInvariants) {
  EXPECT_EQ(post_->size(), 400u);
  EXPECT_EQ(post_->diagnostics.invariant_violations, 0u);
  for (const auto& t : post_->thetas) EXPECT_NO_THROW(t.validate());
}

TEST_F(FittedSmall, RecoversLabels) {
  auto est = score_events(*post_, sim_->tuples);
  std::size_t hit = 0;
  for (std::size_t n = 0; n < est.size(); ++n) hit += est[n].mode == sim_->labels[n] + 1;
  EXPECT_GE(static_cast<double>(hit) / est.size(), 0.9);
  for (const auto& e : est) {
    EXPECT_GE(e.mean, 1.0);
    EXPECT_LE(e.mean, 3.0);
  }
}

TEST_F(FittedSmall, JsonLinesRoundTrip) {
  std::stringstream ss;
  write_posterior(ss, *post_);
  auto back = read_posterior(ss);
  ASSERT_EQ(back.size(), post_->size());
  EXPECT_EQ(back.unconstrained[17], post_->unconstrained[17]);
  EXPECT_EQ(back.thetas[5].omega, post_->thetas[5].omega);
  EXPECT_EQ(back.chain.back(), 1u);
  std::stringstream again;
  write_posterior(again, back);
  std::stringstream first;
  write_posterior(first, *post_);
  EXPECT_EQ(first.str(), again.str());
}

TEST(SamplePosterior, DeterministicAcrossWorkerCounts) {
  Rng rng(8);
  auto sim = generate(test::separated_three_class(), 150, rng);
  Hyperparams h;
  h.classes = 3;
  SamplerConfig cfg;
  cfg.draws = 30;
  cfg.warmup = 30;
  cfg.chains = 3;
  cfg.seed = 21;
  auto a = sample_posterior(sim.tuples, h, cfg);
  cfg.workers = 3;
  auto b = sample_posterior(sim.tuples, h, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.unconstrained[i], b.unconstrained[i]);
  cfg.seed = 22;
  auto c = sample_posterior(sim.tuples, h, cfg);
  EXPECT_NE(a.unconstrained.back(), c.unconstrained.back());
}

TEST(SamplePosterior, RejectsBadInput) {
  Hyperparams h;
  SamplerConfig cfg;
  EXPECT_THROW(sample_posterior({}, h, cfg), DataError);
  std::vector<EventTuple> one(1);
  cfg.target_accept = 1.5;
  EXPECT_THROW(sample_posterior(one, h, cfg), ConfigError);
}
