#pragma once

// Convergence diagnostics over several chains of one scalar quantity:
// split-chain R-hat and bulk effective sample size (rank-normalized, Geyer's
// initial monotone sequence).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace ordint::diag {

using Chains = std::vector<std::vector<double>>;  // chains x draws

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline Chains split_chains(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    // odd lengths drop the middle draw
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

inline bool is_constant(const Chains& chains) {
  for (const auto& c : chains)
    for (double v : c)
      if (v != chains.front().front()) return false;
  return true;
}

// Classic potential scale reduction on split chains. NaN when undefined
// (fewer than 2 chains, fewer than 4 draws, or zero within-chain variance).
inline double split_rhat(const Chains& chains) {
  if (chains.size() < 2 || chains.front().size() < 4) return kNaN;
  const Chains s = split_chains(chains);
  const double m = static_cast<double>(s.size());
  const double n = static_cast<double>(s.front().size());
  std::vector<double> means, vars;
  for (const auto& c : s) {
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : c) ss += (v - mean) * (v - mean);
    means.push_back(mean);
    vars.push_back(ss / (n - 1.0));
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double B = 0.0;
  for (double mu : means) B += (mu - grand) * (mu - grand);
  B *= n / (m - 1.0);
  const double W = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  if (!(W > 0.0)) return kNaN;
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

// Autocovariance of one chain at lags 0..max_lag (biased, mean-centred).
inline std::vector<double> autocovariance(const std::vector<double>& x, std::size_t max_lag) {
  const std::size_t n = x.size();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::vector<double> acov(max_lag + 1, 0.0);
  for (std::size_t t = 0; t <= max_lag && t < n; ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) s += (x[i] - mean) * (x[i + t] - mean);
    acov[t] = s / static_cast<double>(n);
  }
  return acov;
}

// ESS of already-split chains of equal length.
inline double ess_raw(const Chains& chains) {
  const std::size_t m = chains.size();
  if (m == 0) return kNaN;
  const std::size_t n = chains.front().size();
  if (n < 4 || is_constant(chains)) return kNaN;
  const double nd = static_cast<double>(n);
  std::vector<std::vector<double>> acov(m);
  std::vector<double> chain_mean(m);
  double mean_var = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    acov[j] = autocovariance(chains[j], n - 1);
    chain_mean[j] = std::accumulate(chains[j].begin(), chains[j].end(), 0.0) / nd;
    mean_var += acov[j][0] * nd / (nd - 1.0);
  }
  mean_var /= static_cast<double>(m);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) {
    const double gm = std::accumulate(chain_mean.begin(), chain_mean.end(), 0.0) / m;
    double v = 0.0;
    for (double c : chain_mean) v += (c - gm) * (c - gm);
    var_plus += v / static_cast<double>(m - 1);
  }
  if (!(var_plus > 0.0)) return kNaN;
  auto rho_at = [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += acov[j][t];
    return 1.0 - (mean_var - s / static_cast<double>(m)) / var_plus;
  };
  std::vector<double> rho(n, 0.0);
  rho[0] = 1.0;
  double even = 1.0, odd = rho_at(1);
  rho[1] = odd;
  std::size_t t = 1;
  while (t + 5 < n && even + odd > 0.0) {
    even = rho_at(t + 1);
    odd = rho_at(t + 2);
    if (even + odd >= 0.0) {
      rho[t + 1] = even;
      rho[t + 2] = odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (even > 0.0 && max_t + 1 < n) rho[max_t + 1] = even;
  // initial monotone sequence
  for (std::size_t k = 1; k + 3 <= max_t; k += 2) {
    if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
      rho[k + 1] = (rho[k - 1] + rho[k]) / 2.0;
      rho[k + 2] = rho[k + 1];
    }
  }
  const double total = static_cast<double>(m) * nd;
  double tau = -1.0;
  for (std::size_t k = 0; k <= max_t && k < n; ++k) tau += 2.0 * rho[k];
  if (max_t + 1 < n) tau += rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

// Normal scores of pooled ranks (average ranks for ties).
inline Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t j = 0; j < chains.size(); ++j)
    for (std::size_t i = 0; i < chains[j].size(); ++i) all.push_back({chains[j][i], all.size()});
  std::sort(all.begin(), all.end());
  const double S = static_cast<double>(all.size());
  std::vector<double> z(all.size());
  const boost::math::normal_distribution<double> normal;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t k = i;
    while (k < all.size() && all[k].first == all[i].first) ++k;
    const double rank = (static_cast<double>(i + k - 1)) / 2.0 + 1.0;
    const double q = boost::math::quantile(normal, (rank - 3.0 / 8.0) / (S + 1.0 / 4.0));
    for (std::size_t r = i; r < k; ++r) z[all[r].second] = q;
    i = k;
  }
  Chains out;
  std::size_t pos = 0;
  for (const auto& c : chains) {
    out.emplace_back(z.begin() + static_cast<std::ptrdiff_t>(pos),
                     z.begin() + static_cast<std::ptrdiff_t>(pos + c.size()));
    pos += c.size();
  }
  return out;
}

inline double bulk_ess(const Chains& chains) {
  if (chains.empty() || chains.front().size() < 4 || is_constant(chains)) return kNaN;
  return ess_raw(rank_normalize(split_chains(chains)));
}

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0, q50 = 0.0, q95 = 0.0;
  double rhat = kNaN;   // NaN when undefined
  double ess_bulk = kNaN;
  bool flagged = false;  // R-hat or ESS undefined, or R-hat > 1.05
};

inline ParamSummary summarize(std::string name, const Chains& chains) {
  ParamSummary s;
  s.name = std::move(name);
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  if (pooled.empty()) return s;
  const double n = static_cast<double>(pooled.size());
  s.mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : pooled) ss += (v - s.mean) * (v - s.mean);
  s.sd = pooled.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(pooled.begin(), pooled.end());
  auto quant = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, pooled.size() - 1);
    return pooled[lo] + (pos - static_cast<double>(lo)) * (pooled[hi] - pooled[lo]);
  };
  s.q05 = quant(0.05);
  s.q50 = quant(0.5);
  s.q95 = quant(0.95);
  s.rhat = split_rhat(chains);
  s.ess_bulk = bulk_ess(chains);
  s.flagged = std::isnan(s.ess_bulk) || (chains.size() >= 2 && !(s.rhat <= 1.05));
  return s;
}

}  // namespace ordint::diag
