#pragma once

// No-U-Turn sampler over a differentiable log density with a diagonal metric.
// Trajectories use multinomial sampling (biased progressive at the top level)
// and the generalized U-turn check on momentum sums, including the checks
// across the seam between merged subtrees. Warmup runs dual-averaging step
// size adaptation throughout and estimates the metric in doubling windows
// over the middle 75%.
//
// A target is any type with
//   double operator()(std::span<const double> x, std::span<double> grad) const
//   std::size_t dim() const

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ordint/error.hpp"

namespace ordint::nuts {

struct Config {
  std::size_t draws = 1000;
  std::size_t warmup = 200;
  double target_accept = 0.8;
  int max_depth = 10;
  double max_delta_h = 1000.0;
};

struct TransitionStats {
  double accept_stat = 0.0;
  int tree_depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
  double energy = 0.0;
  double lp = 0.0;
  double step_size = 0.0;
};

struct ChainResult {
  std::vector<std::vector<double>> draws;  // unconstrained, post-warmup
  std::vector<TransitionStats> stats;
  std::vector<double> inv_metric;
  double step_size = 0.0;
  std::size_t warmup_divergences = 0;
};

// Windowed schedule: indices (0-based, exclusive) where each metric window ends.
inline std::vector<std::size_t> metric_window_ends(std::size_t warmup) {
  std::vector<std::size_t> ends;
  if (warmup < 20) return ends;
  const auto init = static_cast<std::size_t>(0.15 * static_cast<double>(warmup));
  const auto term = static_cast<std::size_t>(0.10 * static_cast<double>(warmup));
  const std::size_t slow_end = warmup - term;
  std::size_t size = std::max<std::size_t>(5, std::min<std::size_t>(25, (slow_end - init) / 3));
  std::size_t start = init;
  while (start < slow_end) {
    std::size_t end = start + size;
    // stretch the last window rather than leave a short remnant
    if (end + 2 * size > slow_end) end = slow_end;
    ends.push_back(end);
    start = end;
    size *= 2;
  }
  return ends;
}

class DualAveraging {
 public:
  explicit DualAveraging(double target) : target_(target) {}

  void restart(double step) {
    mu_ = std::log(10.0 * step);
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }

  double update(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double n = static_cast<double>(counter_);
    const double eta = 1.0 / (n + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(n) / kGamma;
    const double w = std::pow(n, -kKappa);
    x_bar_ = (1.0 - w) * x_bar_ + w * x;
    return std::exp(x);
  }

  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05, kT0 = 10.0, kKappa = 0.75;
  double target_;
  double mu_ = 0.0;
  std::size_t counter_ = 0;
  double s_bar_ = 0.0, x_bar_ = 0.0;
};

// Running mean and variance per coordinate.
class Welford {
 public:
  explicit Welford(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}
  void add(std::span<const double> x) {
    ++n_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean_[i];
      mean_[i] += d / static_cast<double>(n_);
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }
  std::size_t count() const { return n_; }
  // Sample variance shrunk toward 1e-3.
  std::vector<double> regularized_variance() const {
    const double n = static_cast<double>(n_);
    std::vector<double> v(m2_.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = (n / (n + 5.0)) * (m2_[i] / (n - 1.0)) + 1e-3 * (5.0 / (n + 5.0));
    return v;
  }
  void reset() {
    n_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> mean_, m2_;
};

template <class Target>
class Sampler {
 public:
  using Namer = std::function<std::string(std::size_t)>;

  Sampler(const Target& target, std::vector<double> init, Config cfg, std::mt19937_64& rng,
          Namer namer = {})
      : f_(target), cfg_(cfg), rng_(rng), namer_(std::move(namer)), dim_(target.dim()) {
    if (init.size() != dim_) throw SamplerError("initial point has the wrong dimension");
    z_.x = std::move(init);
    z_.p.assign(dim_, 0.0);
    z_.g.assign(dim_, 0.0);
    evaluate(z_);
    if (!std::isfinite(z_.lp)) throw SamplerError("log density is not finite at the initial point");
    inv_metric_.assign(dim_, 1.0);
  }

  // Hamiltonian dynamics applied to a point, exposed for testing.
  struct Point {
    std::vector<double> x, p, g;
    double lp = 0.0;
  };

  double hamiltonian(const Point& z) const {
    double k = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) k += z.p[i] * z.p[i] * inv_metric_[i];
    return -z.lp + 0.5 * k;
  }

  void leapfrog(Point& z, double eps) const {
    for (std::size_t i = 0; i < dim_; ++i) z.p[i] += 0.5 * eps * z.g[i];
    for (std::size_t i = 0; i < dim_; ++i) z.x[i] += eps * inv_metric_[i] * z.p[i];
    evaluate(z);
    for (std::size_t i = 0; i < dim_; ++i) z.p[i] += 0.5 * eps * z.g[i];
  }

  const Point& state() const { return z_; }
  void set_momentum(std::vector<double> p) { z_.p = std::move(p); }
  double step_size() const { return eps_; }
  void set_step_size(double e) { eps_ = e; }
  const std::vector<double>& inv_metric() const { return inv_metric_; }
  void set_inv_metric(std::vector<double> m) { inv_metric_ = std::move(m); }

  ChainResult run() {
    ChainResult out;
    find_reasonable_step();
    DualAveraging da(cfg_.target_accept);
    da.restart(eps_);
    const auto windows = metric_window_ends(cfg_.warmup);
    const std::size_t init_buffer =
        static_cast<std::size_t>(0.15 * static_cast<double>(cfg_.warmup));
    std::size_t next_window = 0;
    Welford acc(dim_);
    for (std::size_t it = 0; it < cfg_.warmup; ++it) {
      const auto st = transition();
      if (st.divergent) ++out.warmup_divergences;
      eps_ = da.update(st.accept_stat);
      if (next_window < windows.size() && it >= init_buffer) {
        acc.add(z_.x);
        if (it + 1 == windows[next_window]) {
          if (acc.count() >= 3) inv_metric_ = acc.regularized_variance();
          acc.reset();
          ++next_window;
          find_reasonable_step();
          da.restart(eps_);
        }
      }
    }
    if (cfg_.warmup > 0) eps_ = da.final_step();
    out.draws.reserve(cfg_.draws);
    out.stats.reserve(cfg_.draws);
    for (std::size_t it = 0; it < cfg_.draws; ++it) {
      out.stats.push_back(transition());
      out.draws.push_back(z_.x);
    }
    out.inv_metric = inv_metric_;
    out.step_size = eps_;
    return out;
  }

  // One NUTS transition from the current state.
  TransitionStats transition() {
    sample_momentum(z_);
    const double H0 = hamiltonian(z_);

    Point z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;
    std::vector<double> p_sharp_fwd_bck = sharp(z_.p), p_sharp_fwd_fwd = p_sharp_fwd_bck,
                        p_sharp_bck_fwd = p_sharp_fwd_bck, p_sharp_bck_bck = p_sharp_fwd_bck;
    std::vector<double> p_fwd_bck = z_.p, p_fwd_fwd = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    std::vector<double> rho = z_.p;
    double log_sum_weight = 0.0;
    int depth = 0;
    Tree tree{H0};

    while (depth < cfg_.max_depth) {
      std::vector<double> rho_fwd(dim_, 0.0), rho_bck(dim_, 0.0);
      double log_sum_weight_subtree = kNegInf;
      bool valid;
      if (uniform() > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                           p_fwd_fwd, 1.0, log_sum_weight_subtree, tree);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                           p_bck_bck, -1.0, log_sum_weight_subtree, tree);
        z_bck = z_;
      }
      if (!valid) break;
      ++depth;
      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform() < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_add(log_sum_weight, log_sum_weight_subtree);
      for (std::size_t i = 0; i < dim_; ++i) rho[i] = rho_bck[i] + rho_fwd[i];

      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      std::vector<double> ext(dim_);
      for (std::size_t i = 0; i < dim_; ++i) ext[i] = rho_bck[i] + p_fwd_bck[i];
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, ext);
      for (std::size_t i = 0; i < dim_; ++i) ext[i] = rho_fwd[i] + p_bck_fwd[i];
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, ext);
      if (!persist) break;
    }

    z_ = z_sample;
    TransitionStats st;
    st.n_leapfrog = tree.n_leapfrog;
    st.accept_stat = tree.n_leapfrog > 0 ? tree.sum_metro_prob / tree.n_leapfrog : 0.0;
    st.tree_depth = depth;
    st.divergent = tree.divergent;
    st.lp = z_.lp;
    st.energy = hamiltonian(z_);
    st.step_size = eps_;
    return st;
  }

 private:
  static constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  struct Tree {
    double H0;
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    bool divergent = false;
  };

  static double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  void evaluate(Point& z) const {
    z.lp = f_(z.x, z.g);
    if (std::isnan(z.lp)) z.lp = kNegInf;
    if (!std::isfinite(z.lp)) return;
    for (std::size_t i = 0; i < dim_; ++i)
      if (!std::isfinite(z.g[i]))
        throw SamplerError("non-finite gradient in coordinate " +
                           (namer_ ? namer_(i) : std::to_string(i)));
  }

  void sample_momentum(Point& z) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < dim_; ++i) z.p[i] = nd(rng_) / std::sqrt(inv_metric_[i]);
  }

  std::vector<double> sharp(const std::vector<double>& p) const {
    std::vector<double> s(dim_);
    for (std::size_t i = 0; i < dim_; ++i) s[i] = inv_metric_[i] * p[i];
    return s;
  }

  static bool criterion(const std::vector<double>& sharp_minus, const std::vector<double>& sharp_plus,
                        const std::vector<double>& rho) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      a += sharp_plus[i] * rho[i];
      b += sharp_minus[i] * rho[i];
    }
    return a > 0.0 && b > 0.0;
  }

  bool build_tree(int depth, Point& z_propose, std::vector<double>& p_sharp_beg,
                  std::vector<double>& p_sharp_end, std::vector<double>& rho,
                  std::vector<double>& p_beg, std::vector<double>& p_end, double sign,
                  double& log_sum_weight, Tree& tree) {
    if (depth == 0) {
      leapfrog(z_, sign * eps_);
      ++tree.n_leapfrog;
      double h = hamiltonian(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - tree.H0 > cfg_.max_delta_h) tree.divergent = true;
      log_sum_weight = log_add(log_sum_weight, tree.H0 - h);
      tree.sum_metro_prob += tree.H0 - h > 0.0 ? 1.0 : std::exp(tree.H0 - h);
      z_propose = z_;
      p_sharp_beg = sharp(z_.p);
      p_sharp_end = p_sharp_beg;
      for (std::size_t i = 0; i < dim_; ++i) rho[i] += z_.p[i];
      p_beg = z_.p;
      p_end = p_beg;
      return !tree.divergent;
    }

    std::vector<double> p_sharp_init_end(dim_), p_init_end(dim_), rho_init(dim_, 0.0);
    double lsw_init = kNegInf;
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                    p_init_end, sign, lsw_init, tree))
      return false;

    Point z_propose_final = z_;
    std::vector<double> p_sharp_final_beg(dim_), p_final_beg(dim_), rho_final(dim_, 0.0);
    double lsw_final = kNegInf;
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                    p_final_beg, p_end, sign, lsw_final, tree))
      return false;

    const double lsw_subtree = log_add(lsw_init, lsw_final);
    log_sum_weight = log_add(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree || uniform() < std::exp(lsw_final - lsw_subtree))
      z_propose = std::move(z_propose_final);

    std::vector<double> rho_subtree(dim_), ext(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      rho_subtree[i] = rho_init[i] + rho_final[i];
      rho[i] += rho_subtree[i];
    }
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    for (std::size_t i = 0; i < dim_; ++i) ext[i] = rho_init[i] + p_final_beg[i];
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, ext);
    for (std::size_t i = 0; i < dim_; ++i) ext[i] = rho_final[i] + p_init_end[i];
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, ext);
    return persist;
  }

  // Doubles or halves eps until a single leapfrog step crosses acceptance 0.8.
  void find_reasonable_step() {
    const Point z_init = z_;
    auto delta_h = [&] {
      z_ = z_init;
      sample_momentum(z_);
      const double H0 = hamiltonian(z_);
      leapfrog(z_, eps_);
      double h = hamiltonian(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      return H0 - h;
    };
    const double threshold = std::log(0.8);
    const int direction = delta_h() > threshold ? 1 : -1;
    for (int guard = 0; guard < 200; ++guard) {
      const double dh = delta_h();
      if (direction == 1 && !(dh > threshold)) break;
      if (direction == -1 && !(dh < threshold)) break;
      eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw SamplerError("step size diverged to infinity; posterior may be improper");
      if (eps_ < 1e-300) throw SamplerError("step size collapsed to zero");
    }
    z_ = z_init;
  }

  const Target& f_;
  Config cfg_;
  std::mt19937_64& rng_;
  Namer namer_;
  std::size_t dim_;
  Point z_;
  std::vector<double> inv_metric_;
  double eps_ = 1.0;
};

}  // namespace ordint::nuts
