#pragma once

// Monthly intensity series and the forecasting toolkit run over them:
// aggregation with interpolation, differencing, the augmented Dickey-Fuller
// test, AR/VAR fitting with BIC lag choice, expanding-window forecast
// cross-validation, Granger causality and Pearson correlation.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "ordint/csv.hpp"
#include "ordint/data.hpp"
#include "ordint/error.hpp"
#include "ordint/infer.hpp"

namespace ordint::ts {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class SeriesKind { latent, predicate, quantifier, external };

inline std::string_view to_string(SeriesKind k) {
  switch (k) {
    case SeriesKind::latent: return "latent";
    case SeriesKind::predicate: return "predicate";
    case SeriesKind::quantifier: return "quantifier";
    case SeriesKind::external: return "external";
  }
  return "unknown";
}

struct IntensitySeries {
  std::string location;
  YearMonth start;
  std::vector<double> values;      // one per month from start, no gaps
  std::vector<bool> observed;      // false where the value was filled in
  SeriesKind kind = SeriesKind::external;

  std::size_t size() const { return values.size(); }
  YearMonth month(std::size_t i) const { return YearMonth::from_index(start.index() + static_cast<int>(i)); }
};

// Rescales to [0,1] by the observed minimum and maximum; a constant input
// maps to all zeros.
inline std::vector<double> min_max(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  if (v.empty()) return out;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  for (auto& x : out) x = range > 0.0 ? (x - *lo) / range : 0.0;
  return out;
}

// Mean of the per-event values in each month that has events for `location`.
inline std::map<YearMonth, double> monthly_means(std::span<const double> values,
                                                 std::span<const std::string> locations,
                                                 std::span<const YearMonth> months, const std::string& location) {
  if (values.size() != locations.size() || values.size() != months.size())
    throw DataError("values, locations and months must have equal length");
  std::map<YearMonth, std::pair<double, std::size_t>> acc;
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (locations[n] != location) continue;
    auto& a = acc[months[n]];
    a.first += values[n];
    a.second += 1;
  }
  std::map<YearMonth, double> out;
  for (const auto& [m, a] : acc) out[m] = a.first / static_cast<double>(a.second);
  return out;
}

// Monthly series for one location. Empty interior months are linearly
// interpolated and empty edge months copy the nearest observed month. Latent
// class means are min-max rescaled over every event before averaging.
inline IntensitySeries aggregate_monthly(std::span<const double> values, std::span<const std::string> locations,
                                         std::span<const YearMonth> months, const std::string& location,
                                         SeriesKind kind, std::optional<YearMonth> first = {},
                                         std::optional<YearMonth> last = {}) {
  const std::vector<double> scaled =
      kind == SeriesKind::latent ? min_max(values) : std::vector<double>(values.begin(), values.end());
  const auto means = monthly_means(scaled, locations, months, location);
  if (means.empty()) throw DataError("no events for location '" + location + "'");
  const YearMonth lo = first ? std::min(*first, means.begin()->first) : means.begin()->first;
  const YearMonth hi = last ? std::max(*last, means.rbegin()->first) : means.rbegin()->first;
  IntensitySeries s;
  s.location = location;
  s.start = lo;
  s.kind = kind;
  const std::size_t L = static_cast<std::size_t>(hi.index() - lo.index() + 1);
  s.values.assign(L, 0.0);
  s.observed.assign(L, false);
  for (const auto& [m, v] : means) {
    const auto i = static_cast<std::size_t>(m.index() - lo.index());
    s.values[i] = v;
    s.observed[i] = true;
  }
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < L; ++i) {
    if (!s.observed[i]) continue;
    if (!prev) {
      for (std::size_t j = 0; j < i; ++j) s.values[j] = s.values[i];
    } else {
      const double a = s.values[*prev], b = s.values[i];
      const double gap = static_cast<double>(i - *prev);
      for (std::size_t j = *prev + 1; j < i; ++j) s.values[j] = a + (b - a) * static_cast<double>(j - *prev) / gap;
    }
    prev = i;
  }
  for (std::size_t j = *prev + 1; j < L; ++j) s.values[j] = s.values[*prev];
  return s;
}

inline std::vector<double> difference(std::span<const double> x) {
  if (x.size() < 2) throw DataError("differencing needs at least two values");
  std::vector<double> out(x.size() - 1);
  for (std::size_t t = 0; t + 1 < x.size(); ++t) out[t] = x[t + 1] - x[t];
  return out;
}

inline IntensitySeries difference(const IntensitySeries& s) {
  IntensitySeries d = s;
  d.values = difference(s.values);
  d.observed.assign(s.observed.begin() + 1, s.observed.end());
  d.start = s.month(1);
  return d;
}

struct LeastSquares {
  Eigen::MatrixXd beta;      // regressors x targets
  Eigen::MatrixXd residuals;
  Eigen::MatrixXd xtx_inv;
  bool ridge = false;        // rank-deficient design; ridge penalty applied
  bool rank_deficient = false;
};

inline LeastSquares least_squares(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double ridge = 1e-8) {
  LeastSquares f;
  const auto k = X.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  Eigen::MatrixXd xtx = X.transpose() * X;
  if (qr.rank() < k) {
    f.rank_deficient = true;
    f.ridge = true;
    xtx += ridge * Eigen::MatrixXd::Identity(k, k);
    f.beta = xtx.ldlt().solve(X.transpose() * Y);
  } else {
    f.beta = qr.solve(Y);
  }
  f.xtx_inv = xtx.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  f.residuals = Y - X * f.beta;
  return f;
}

// Regressors for Delta y_t on [1, y_{t-1}, Delta y_{t-1..t-p}], rows t from
// `first` so different p can share a sample.
inline void adf_design(std::span<const double> y, std::size_t p, std::size_t first, Eigen::MatrixXd& X,
                       Eigen::VectorXd& dy) {
  const std::vector<double> d = difference(y);  // d[t-1] = y_t - y_{t-1}
  const std::size_t n = d.size() - first;
  X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 + p));
  dy.resize(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = first + r;  // index into d
    const auto row = static_cast<Eigen::Index>(r);
    dy(row) = d[i];
    X(row, 0) = 1.0;
    X(row, 1) = y[i];
    for (std::size_t j = 1; j <= p; ++j) X(row, static_cast<Eigen::Index>(1 + j)) = d[i - j];
  }
}

struct AdfResult {
  double statistic = kNaN;
  double critical_5 = kNaN;
  std::size_t lag = 0;
  std::size_t nobs = 0;
  bool stationary = false;  // unit root rejected at 5%
  bool degenerate = false;  // constant series
};

// Constant-only regression; the lag (0..floor((L-1)^(1/3))) minimizes BIC on
// a common sample, then the chosen regression is refit on all usable rows.
inline AdfResult adf_test(std::span<const double> y) {
  if (y.size() < 20) throw DataError("ADF test needs at least 20 values");
  AdfResult r;
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); })) {
    r.degenerate = true;
    return r;
  }
  const auto max_lag = static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(y.size() - 1))));
  double best_bic = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd X;
  Eigen::VectorXd dy;
  for (std::size_t p = 0; p <= max_lag; ++p) {
    adf_design(y, p, max_lag, X, dy);
    const auto fit = least_squares(X, dy);
    const double n = static_cast<double>(X.rows());
    const double ssr = fit.residuals.squaredNorm();
    const double bic = n * std::log(ssr / n) + static_cast<double>(X.cols()) * std::log(n);
    if (bic < best_bic) {
      best_bic = bic;
      r.lag = p;
    }
  }
  adf_design(y, r.lag, r.lag, X, dy);
  const auto fit = least_squares(X, dy);
  const double n = static_cast<double>(X.rows());
  const double s2 = fit.residuals.squaredNorm() / (n - static_cast<double>(X.cols()));
  const double se = std::sqrt(s2 * fit.xtx_inv(1, 1));
  r.nobs = static_cast<std::size_t>(X.rows());
  if (!(se > 0.0)) {
    r.degenerate = true;
    return r;
  }
  r.statistic = fit.beta(1, 0) / se;
  // MacKinnon (2010) response surface, constant only, 5%
  r.critical_5 = -2.86154 - 2.8903 / n - 4.234 / (n * n) - 40.040 / (n * n * n);
  r.stationary = r.statistic < r.critical_5;
  return r;
}

struct VarFit {
  std::size_t variables = 1;
  std::size_t lag = 1;
  Eigen::VectorXd intercept;
  std::vector<Eigen::MatrixXd> coefficients;  // one k x k matrix per lag
  Eigen::MatrixXd residual_cov;
  double bic = kNaN;
  bool ridge = false;

  // One-step forecast from the final `lag` rows of `history` (one series per
  // variable, equal lengths).
  Eigen::VectorXd forecast(std::span<const std::vector<double>> history) const {
    Eigen::VectorXd y = intercept;
    const std::size_t L = history.front().size();
    for (std::size_t j = 1; j <= lag; ++j)
      for (std::size_t a = 0; a < variables; ++a)
        for (std::size_t b = 0; b < variables; ++b)
          y(static_cast<Eigen::Index>(a)) +=
              coefficients[j - 1](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * history[b][L - j];
    return y;
  }
};

namespace detail {

inline void check_series_set(std::span<const std::vector<double>> series) {
  if (series.empty() || series.size() > 2) throw DataError("AR/VAR take one or two series");
  for (const auto& s : series)
    if (s.size() != series.front().size()) throw DataError("series must have equal length");
}

// Rows t = first..L-1; columns [1, y_{t-1} (all vars), ..., y_{t-p}].
inline void var_design(std::span<const std::vector<double>> series, std::size_t p, std::size_t first,
                       Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
  const std::size_t k = series.size(), L = series.front().size(), n = L - first;
  X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(1 + k * p));
  Y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t t = first + r;
    const auto row = static_cast<Eigen::Index>(r);
    X(row, 0) = 1.0;
    for (std::size_t j = 1; j <= p; ++j)
      for (std::size_t v = 0; v < k; ++v)
        X(row, static_cast<Eigen::Index>(1 + (j - 1) * k + v)) = series[v][t - j];
    for (std::size_t v = 0; v < k; ++v) Y(row, static_cast<Eigen::Index>(v)) = series[v][t];
  }
}

inline VarFit var_at_lag(std::span<const std::vector<double>> series, std::size_t p, std::size_t first) {
  Eigen::MatrixXd X, Y;
  var_design(series, p, first, X, Y);
  const auto fit = least_squares(X, Y);
  const std::size_t k = series.size();
  VarFit v;
  v.variables = k;
  v.lag = p;
  v.ridge = fit.ridge;
  v.intercept = fit.beta.row(0).transpose();
  for (std::size_t j = 1; j <= p; ++j)
    v.coefficients.push_back(
        fit.beta.middleRows(static_cast<Eigen::Index>(1 + (j - 1) * k), static_cast<Eigen::Index>(k)).transpose());
  const double n = static_cast<double>(X.rows());
  v.residual_cov = fit.residuals.transpose() * fit.residuals / n;
  const double free = static_cast<double>(k * (1 + k * p));
  v.bic = n * std::log(v.residual_cov.determinant()) + free * std::log(n);
  return v;
}

}  // namespace detail

// Least-squares VAR (AR for one series) with the lag in 1..max_lag that
// minimizes BIC on the common sample starting at max_lag; the chosen lag is
// then refit on every usable row.
inline VarFit fit_var(std::span<const std::vector<double>> series, std::size_t max_lag) {
  detail::check_series_set(series);
  if (max_lag < 1) throw ConfigError("max_lag must be at least 1");
  if (series.front().size() < max_lag + 10) throw DataError("series too short for the lag range");
  std::size_t best = 1;
  double best_bic = std::numeric_limits<double>::infinity();
  for (std::size_t p = 1; p <= max_lag; ++p) {
    const auto v = detail::var_at_lag(series, p, max_lag);
    if (v.bic < best_bic) {
      best_bic = v.bic;
      best = p;
    }
  }
  return detail::var_at_lag(series, best, best);
}

inline VarFit fit_ar(std::span<const double> y, std::size_t max_lag) {
  const std::vector<std::vector<double>> one{std::vector<double>(y.begin(), y.end())};
  return fit_var(one, max_lag);
}

// Expanding-window one-step forecasts over the last `folds` values of
// series[target]; each fold refits (including lag choice) on its prefix.
inline double forecast_cv(std::span<const std::vector<double>> series, std::size_t target, std::size_t folds = 24,
                          std::size_t max_lag = 6) {
  detail::check_series_set(series);
  if (target >= series.size()) throw ConfigError("target index out of range");
  if (folds < 1) throw ConfigError("folds must be at least 1");
  const std::size_t L = series.front().size();
  if (L < folds + max_lag + 10) throw DataError("series too short for " + std::to_string(folds) + " folds");
  double total = 0.0;
  for (std::size_t j = 1; j <= folds; ++j) {
    const std::size_t train = L - folds + j - 1;
    std::vector<std::vector<double>> prefix;
    for (const auto& s : series) prefix.emplace_back(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(train));
    const auto fit = fit_var(prefix, max_lag);
    const double err = fit.forecast(prefix)(static_cast<Eigen::Index>(target)) - series[target][train];
    total += err * err;
  }
  return total / static_cast<double>(folds);
}

struct GrangerResult {
  double f = kNaN;
  double p_value = 1.0;
  double df1 = 0.0, df2 = 0.0;
  bool degenerate = false;  // restricted and unrestricted fits cannot be told apart
};

// F test of whether `lag` lags of `cause` improve a least-squares
// autoregression of `effect` on its own `lag` lags.
inline GrangerResult granger_test(std::span<const double> cause, std::span<const double> effect, std::size_t lag) {
  if (cause.size() != effect.size()) throw DataError("Granger test needs equal lengths");
  if (lag < 1) throw ConfigError("lag must be at least 1");
  const std::size_t L = effect.size();
  if (L < 3 * lag + 2) throw DataError("series too short for the lag");
  const std::size_t n = L - lag;
  Eigen::MatrixXd Xr(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(1 + lag));
  Eigen::MatrixXd Xu(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(1 + 2 * lag));
  Eigen::MatrixXd y(static_cast<Eigen::Index>(n), 1);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t t = lag + r;
    const auto row = static_cast<Eigen::Index>(r);
    y(row, 0) = effect[t];
    Xr(row, 0) = Xu(row, 0) = 1.0;
    for (std::size_t j = 1; j <= lag; ++j) {
      Xr(row, static_cast<Eigen::Index>(j)) = Xu(row, static_cast<Eigen::Index>(j)) = effect[t - j];
      Xu(row, static_cast<Eigen::Index>(lag + j)) = cause[t - j];
    }
  }
  GrangerResult g;
  g.df1 = static_cast<double>(lag);
  g.df2 = static_cast<double>(n) - 2.0 * static_cast<double>(lag) - 1.0;
  const auto fr = least_squares(Xr, y);
  const auto fu = least_squares(Xu, y);
  const double rss_r = fr.residuals.squaredNorm(), rss_u = fu.residuals.squaredNorm();
  if (fu.rank_deficient || !(rss_u > 0.0) || !(g.df2 > 0.0)) {
    g.degenerate = true;
    return g;
  }
  g.f = std::max(0.0, (rss_r - rss_u) / g.df1 / (rss_u / g.df2));
  boost::math::fisher_f_distribution<double> dist(g.df1, g.df2);
  g.p_value = boost::math::cdf(boost::math::complement(dist, g.f));
  return g;
}

struct Correlation {
  double r = kNaN;
  bool defined = false;  // false when either series has zero variance
};

inline Correlation pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 3) throw DataError("Pearson needs equal lengths of at least 3");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  Correlation c;
  if (!(saa > 0.0) || !(sbb > 0.0)) return c;
  c.defined = true;
  c.r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  return c;
}

struct LeakageSafeSeries {
  IntensitySeries series;
  std::size_t train_events = 0;
  std::size_t train_events_from_location = 0;
  std::map<YearMonth, double> monthly;  // before interpolation
};

// Fits on every event outside `location`, scores all events with that
// posterior, and aggregates the location's latent class means.
inline LeakageSafeSeries leakage_safe_z(std::span<const EventTuple> data, const std::string& location,
                                        const Hyperparams& hyper, const SamplerConfig& cfg) {
  std::vector<EventTuple> train;
  bool present = false;
  for (const auto& e : data) {
    if (e.location == location) {
      present = true;
    } else {
      train.push_back(e);
    }
  }
  if (!present) throw DataError("location '" + location + "' not in data");
  LeakageSafeSeries out;
  out.train_events = train.size();
  out.train_events_from_location = static_cast<std::size_t>(
      std::count_if(train.begin(), train.end(), [&](const EventTuple& e) { return e.location == location; }));
  const auto post = sample_posterior(train, hyper, cfg);
  const auto est = score_events(post, data);
  std::vector<double> z;
  std::vector<std::string> locs;
  std::vector<YearMonth> months;
  for (std::size_t n = 0; n < data.size(); ++n) {
    z.push_back(est[n].mean);
    locs.push_back(data[n].location);
    months.push_back(data[n].month);
  }
  out.monthly = monthly_means(min_max(z), locs, months, location);
  out.series = aggregate_monthly(z, locs, months, location, SeriesKind::latent);
  return out;
}

inline void write_series(std::ostream& out, const IntensitySeries& s) {
  csv::write_row(out, {"month", "value"});
  for (std::size_t i = 0; i < s.size(); ++i) csv::write_row(out, {to_string(s.month(i)), csv::fmt(s.values[i])});
}

// Two-column (month, value) CSV; months must be contiguous and ascending.
inline IntensitySeries read_series(std::istream& in, std::string location = "external",
                                   SeriesKind kind = SeriesKind::external) {
  const auto t = csv::read(in);
  const auto cm = t.require("month"), cv = t.require("value");
  IntensitySeries s;
  s.location = std::move(location);
  s.kind = kind;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = " on line " + std::to_string(t.line_numbers[r]);
    if (row.size() <= std::max(cm, cv)) throw DataError("short row" + where);
    const auto m = parse_month(row[cm]);
    if (!m) throw DataError("bad month '" + row[cm] + "'" + where);
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(row[cv], &used);
      if (used != row[cv].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("bad value '" + row[cv] + "'" + where);
    }
    if (!std::isfinite(v)) throw DataError("non-finite value" + where);
    if (s.values.empty()) {
      s.start = *m;
    } else if (m->index() != s.start.index() + static_cast<int>(s.values.size())) {
      throw DataError("months must be contiguous and ascending" + where);
    }
    s.values.push_back(v);
    s.observed.push_back(true);
  }
  if (s.values.empty()) throw DataError("series file has no rows");
  return s;
}

// Restricts two series to their overlapping months.
inline std::pair<std::vector<double>, std::vector<double>> align(const IntensitySeries& a, const IntensitySeries& b) {
  const int lo = std::max(a.start.index(), b.start.index());
  const int hi = std::min(a.start.index() + static_cast<int>(a.size()), b.start.index() + static_cast<int>(b.size()));
  std::pair<std::vector<double>, std::vector<double>> out;
  for (int m = lo; m < hi; ++m) {
    out.first.push_back(a.values[static_cast<std::size_t>(m - a.start.index())]);
    out.second.push_back(b.values[static_cast<std::size_t>(m - b.start.index())]);
  }
  return out;
}

}  // namespace ordint::ts
