#pragma once

// Log-density kernels with analytic parameter gradients, the simplex
// (stick-breaking) transform, and seeded samplers for the six families the
// model uses.

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ordint/error.hpp"
#include "ordint/ordered.hpp"

namespace ordint {

using Rng = std::mt19937_64;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline const double kLogSqrt2Pi = 0.5 * std::log(2.0 * M_PI);

inline double lgamma(double x) { return boost::math::lgamma(x); }
inline double digamma(double x) { return boost::math::digamma(x); }

inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

// Beta distribution in mode/concentration form; kappa > 2 keeps it unimodal.
class BetaModeConc {
 public:
  BetaModeConc(double mode, double concentration) : mode_(mode), conc_(concentration) {
    if (!(mode > 0.0 && mode < 1.0)) throw DomainError("Beta mode must lie in (0,1)");
    if (!(concentration > 2.0)) throw DomainError("Beta concentration must exceed 2");
  }
  double mode() const { return mode_; }
  double concentration() const { return conc_; }
  double alpha() const { return mode_ * (conc_ - 2.0) + 1.0; }
  double beta() const { return (1.0 - mode_) * (conc_ - 2.0) + 1.0; }
  double mean() const { return alpha() / (alpha() + beta()); }

 private:
  double mode_;
  double conc_;
};

class ZeroInflGeom {
 public:
  ZeroInflGeom(double gate, double success) : gate_(gate), success_(success) {
    // The closed ends are allowed so degenerate cases stay expressible.
    if (!(gate >= 0.0 && gate <= 1.0)) throw DomainError("zero-inflation gate must lie in [0,1]");
    if (!(success > 0.0 && success <= 1.0))
      throw DomainError("geometric success probability must lie in (0,1]");
  }
  double gate() const { return gate_; }
  double success() const { return success_; }
  double mean() const { return (1.0 - gate_) * (1.0 - success_) / success_; }

 private:
  double gate_;
  double success_;
};

struct BetaGrad {
  double d_mode = 0.0;
  double d_conc = 0.0;
};

inline double beta_logpdf(double p, const BetaModeConc& d, BetaGrad* grad = nullptr) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("beta_logpdf: p outside (0,1)");
  const double a = d.alpha(), b = d.beta();
  const double lp = std::log(p), l1mp = std::log1p(-p);
  if (grad) {
    const double psi_ab = digamma(a + b);
    const double da = lp - digamma(a) + psi_ab;
    const double db = l1mp - digamma(b) + psi_ab;
    grad->d_mode = (d.concentration() - 2.0) * (da - db);
    grad->d_conc = d.mode() * da + (1.0 - d.mode()) * db;
  }
  return (a - 1.0) * lp + (b - 1.0) * l1mp - (lgamma(a) + lgamma(b) - lgamma(a + b));
}

struct ZigGrad {
  double d_gate = 0.0;
  double d_success = 0.0;
};

// Counts failures before the first success, so P(q = 0 | no inflation) = b.
inline double zig_logpmf(long long q, const ZeroInflGeom& d, ZigGrad* grad = nullptr) {
  if (q < 0) throw DomainError("zig_logpmf: negative count");
  const double g = d.gate(), b = d.success();
  if (q == 0) {
    const double m0 = g + (1.0 - g) * b;
    if (grad) {
      grad->d_gate = (1.0 - b) / m0;
      grad->d_success = (1.0 - g) / m0;
    }
    return std::log(m0);
  }
  if (grad) {
    grad->d_gate = -1.0 / (1.0 - g);
    grad->d_success = 1.0 / b - static_cast<double>(q) / (1.0 - b);
  }
  return std::log1p(-g) + static_cast<double>(q) * std::log1p(-b) + std::log(b);
}

inline double categorical_logpmf(std::size_t k, std::span<const double> probs) {
  if (k >= probs.size()) throw DomainError("categorical_logpmf: class index out of range");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw DomainError("categorical_logpmf: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("categorical_logpmf: probabilities do not sum to 1");
  return probs[k] > 0.0 ? std::log(probs[k]) : kNegInf;
}

inline double normal_logpdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

// Gamma with shape k and rate eta.
inline double gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double dirichlet_logpdf(std::span<const double> x, std::span<const double> alpha) {
  double s = 0.0, a0 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    a0 += alpha[i];
    s += (alpha[i] - 1.0) * std::log(x[i]) - lgamma(alpha[i]);
  }
  return s + lgamma(a0);
}

// Stick-breaking map from R^{K-1} to the open K-simplex. y = 0 is the
// uniform point thanks to the log(K-k-1) offsets.
namespace simplex {

inline std::vector<double> forward(std::span<const double> y, double* log_jac = nullptr) {
  const std::size_t K = y.size() + 1;
  std::vector<double> x(K);
  double stick = 1.0, lj = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double adj = y[k] - std::log(static_cast<double>(K - k - 1));
    const double z = sigmoid(adj);
    x[k] = stick * z;
    // log z + log(1 - z) computed stably
    lj += std::log(stick) - std::log1p(std::exp(-std::abs(adj))) * 2.0 - std::abs(adj);
    stick *= sigmoid(-adj);
  }
  x[K - 1] = stick;
  if (log_jac) *log_jac = lj;
  return x;
}

inline std::vector<double> inverse(std::span<const double> x) {
  const std::size_t K = x.size();
  std::vector<double> y(K - 1);
  double used = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double z = x[k] / (1.0 - used);
    y[k] = logit(z) + std::log(static_cast<double>(K - k - 1));
    used += x[k];
  }
  return y;
}

// Gradient of f(forward(y)) (+ log_jac(y) when jacobian is set) with
// respect to y, given df/dx.
inline void backprop(std::span<const double> y, std::span<const double> d_x,
                     std::span<double> d_y, bool jacobian = true) {
  const std::size_t K = y.size() + 1;
  std::vector<double> z(K - 1), stick(K);
  stick[0] = 1.0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    z[k] = sigmoid(y[k] - std::log(static_cast<double>(K - k - 1)));
    stick[k + 1] = stick[k] * (1.0 - z[k]);
  }
  // adjoint of stick[k]; the last stick is x[K-1]
  double a_next = d_x[K - 1];
  for (std::size_t k = K - 1; k-- > 0;) {
    d_y[k] = (d_x[k] - a_next) * stick[k] * z[k] * (1.0 - z[k]);
    if (jacobian) d_y[k] += 1.0 - z[k] * static_cast<double>(K - k);
    a_next = d_x[k] * z[k] + a_next * (1.0 - z[k]);
  }
}

// Gradient of sum_k w_k log x_k (+ log_jac(y)) with respect to y, in a form
// that stays finite when parts of the simplex underflow.
inline void backprop_log(std::span<const double> y, std::span<const double> w,
                         std::span<double> d_y, bool jacobian = true) {
  const std::size_t K = y.size() + 1;
  double tail = w[K - 1];
  for (std::size_t k = K - 1; k-- > 0;) {
    tail += w[k];
    const double z = sigmoid(y[k] - std::log(static_cast<double>(K - k - 1)));
    d_y[k] = w[k] - z * tail;
    if (jacobian) d_y[k] += 1.0 - z * static_cast<double>(K - k);
  }
}

}  // namespace simplex

// Samplers; the rng is always caller-owned.

inline double sample_normal(double mu, double sigma, Rng& rng) {
  return std::normal_distribution<double>(mu, sigma)(rng);
}

inline double sample_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0 && rate > 0.0)) throw DomainError("gamma parameters must be positive");
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> x(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    x[i] = sample_gamma(alpha[i], 1.0, rng);
    total += x[i];
  }
  for (auto& v : x) v /= total;
  return x;
}

inline std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  std::size_t last = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    last = k;
    if (u < probs[k]) return k;
    u -= probs[k];
  }
  return last;
}

inline double sample_beta(const BetaModeConc& d, Rng& rng) {
  const double x = sample_gamma(d.alpha(), 1.0, rng);
  const double y = sample_gamma(d.beta(), 1.0, rng);
  return x / (x + y);
}

inline long long sample_zig(const ZeroInflGeom& d, Rng& rng) {
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < d.gate()) return 0;
  if (d.success() >= 1.0) return 0;
  return std::geometric_distribution<long long>(d.success())(rng);
}

}  // namespace ordint
