#pragma once

// Shared helpers for the test suites: finite differences and a few fixed
// synthetic parameter packs.

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ordint/model.hpp"

namespace ordint::test {

inline std::vector<double> central_diff(const std::function<double(std::span<const double>)>& f,
                                        std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Relative error with a unit floor on the denominator.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

// Well-separated three-class truth: omega increasing, delta and b decreasing.
inline ParamsConstrained separated_three_class() {
  ParamsConstrained t;
  t.pi_z = {0.3, 0.4, 0.3};
  t.pi_s = {{0.7, 0.1, 0.1, 0.1}, {0.1, 0.1, 0.7, 0.1}, {0.1, 0.7, 0.1, 0.1}};
  t.pi_o = {{0.1, 0.1, 0.1, 0.7}, {0.7, 0.1, 0.1, 0.1}, {0.1, 0.1, 0.7, 0.1}};
  t.omega = {0.1, 0.5, 0.9};
  t.kappa = {30.0, 30.0, 30.0};
  t.delta = {0.9, 0.5, 0.1};
  t.b = {0.9, 0.5, 0.1};
  return t;
}

inline ParamsConstrained separated_four_class() {
  ParamsConstrained t;
  t.pi_z = {0.25, 0.25, 0.25, 0.25};
  t.pi_s = {{0.7, 0.1, 0.1, 0.1}, {0.1, 0.7, 0.1, 0.1}, {0.1, 0.1, 0.7, 0.1}, {0.1, 0.1, 0.1, 0.7}};
  t.pi_o = {{0.1, 0.1, 0.1, 0.7}, {0.1, 0.1, 0.7, 0.1}, {0.1, 0.7, 0.1, 0.1}, {0.7, 0.1, 0.1, 0.1}};
  t.omega = {0.1, 0.35, 0.65, 0.9};
  t.kappa = {30.0, 30.0, 30.0, 30.0};
  t.delta = {0.9, 0.6, 0.3, 0.1};
  t.b = {0.8, 0.5, 0.25, 0.1};
  return t;
}

inline ParamsConstrained separated_five_class() {
  ParamsConstrained t;
  t.pi_z = {0.2, 0.2, 0.2, 0.2, 0.2};
  t.pi_s = {{0.7, 0.1, 0.1, 0.1}, {0.1, 0.7, 0.1, 0.1}, {0.1, 0.1, 0.7, 0.1}, {0.1, 0.1, 0.1, 0.7},
            {0.4, 0.1, 0.1, 0.4}};
  t.pi_o = {{0.1, 0.1, 0.1, 0.7}, {0.1, 0.1, 0.7, 0.1}, {0.1, 0.7, 0.1, 0.1}, {0.7, 0.1, 0.1, 0.1},
            {0.1, 0.4, 0.4, 0.1}};
  t.omega = {0.1, 0.3, 0.5, 0.7, 0.9};
  t.kappa = {30.0, 30.0, 30.0, 30.0, 30.0};
  t.delta = {0.9, 0.7, 0.5, 0.3, 0.1};
  t.b = {0.9, 0.6, 0.4, 0.2, 0.1};
  return t;
}

}  // namespace ordint::test
