#pragma once

// Ordering bijection: lambda_1 = x_1, lambda_c = x_1 + sum_{i=2..c} exp(x_i).
// All ordered priors are defined on x, so no Jacobian enters the sampler's
// density; log_det_jacobian is exposed for checking only.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ordint/error.hpp"

namespace ordint {

// Strictly increasing values.
struct OrderedVector {
  std::vector<double> values;
};

// Strictly decreasing values.
struct ReverseOrderedVector {
  std::vector<double> values;
};

namespace detail {

inline void require_finite(std::span<const double> x, const char* what) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      throw DomainError(std::string(what) + ": non-finite entry at index " + std::to_string(i));
}

}  // namespace detail

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline OrderedVector ord(std::span<const double> x) {
  detail::require_finite(x, "ord");
  OrderedVector out;
  out.values.resize(x.size());
  double acc = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    acc += c == 0 ? x[0] : std::exp(x[c]);
    out.values[c] = acc;
  }
  return out;
}

inline std::vector<double> ord_inverse(std::span<const double> lambda) {
  detail::require_finite(lambda, "ord_inverse");
  std::vector<double> x(lambda.size());
  for (std::size_t c = 0; c < lambda.size(); ++c) {
    if (c == 0) {
      x[0] = lambda[0];
      continue;
    }
    const double gap = lambda[c] - lambda[c - 1];
    if (!(gap > 0.0))
      throw DomainError("ord_inverse: input not strictly increasing at index " + std::to_string(c));
    x[c] = std::log(gap);
  }
  return x;
}

inline std::vector<double> ord_inverse(const OrderedVector& lambda) {
  return ord_inverse(std::span<const double>(lambda.values));
}

inline ReverseOrderedVector ord_reversed(std::span<const double> x) {
  auto v = ord(x).values;
  std::reverse(v.begin(), v.end());
  return {std::move(v)};
}

inline std::vector<double> ord_reversed_inverse(std::span<const double> lambda) {
  std::vector<double> fwd(lambda.rbegin(), lambda.rend());
  return ord_inverse(std::span<const double>(fwd));
}

// Element-wise sigmoid of ord(x), or of ord_reversed(x) when reversed.
inline std::vector<double> sigmoid_ord(std::span<const double> x, bool reversed = false) {
  auto v = reversed ? ord_reversed(x).values : ord(x).values;
  for (auto& e : v) e = sigmoid(e);
  return v;
}

inline std::vector<double> sigmoid_ord_inverse(std::span<const double> p, bool reversed = false) {
  std::vector<double> lambda(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0 && p[i] < 1.0)) throw DomainError("sigmoid_ord_inverse: entry outside (0,1)");
    lambda[i] = logit(p[i]);
  }
  return reversed ? ord_reversed_inverse(lambda) : ord_inverse(std::span<const double>(lambda));
}

// log|det d ord / dx| = sum_{i>=2} x_i (lower-triangular Jacobian).
inline double ord_log_det_jacobian(std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += x[i];
  return s;
}

// Pull a gradient with respect to sigmoid_ord(x) back to x.
inline void sigmoid_ord_backprop(std::span<const double> x, std::span<const double> d_out,
                                 std::span<double> d_x, bool reversed = false) {
  const std::size_t n = x.size();
  const auto lambda = ord(x).values;
  // gradient with respect to lambda in forward (increasing) order
  std::vector<double> d_lambda(n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t out_idx = reversed ? n - 1 - c : c;
    const double s = sigmoid(lambda[c]);
    d_lambda[c] = d_out[out_idx] * s * (1.0 - s);
  }
  double tail = 0.0;
  for (std::size_t c = n; c-- > 0;) {
    tail += d_lambda[c];
    d_x[c] = c == 0 ? tail : tail * std::exp(x[c]);
  }
}

}  // namespace ordint
