#pragma once

// Held-out evaluation: the scaled pointwise predictive density (SPPD), site
// imputation with weighted F1 or MSE, the naive, prior and linear-regression
// baselines, and the sweep over the class count.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ordint/error.hpp"
#include "ordint/infer.hpp"
#include "ordint/model.hpp"

namespace ordint {

struct SppdResult {
  double value = 0.0;      // exp(mean_n log mean_t p_nt)
  double log_value = 0.0;
  bool zero_density = false;  // some event had zero density under every draw
};

// Rows are events, columns are draws; entries are log densities.
inline SppdResult sppd_from_log(const std::vector<std::vector<double>>& log_dens) {
  if (log_dens.empty() || log_dens.front().empty()) throw DomainError("SPPD needs N, T >= 1");
  SppdResult r;
  double acc = 0.0;
  for (const auto& row : log_dens) {
    const double l = log_sum_exp(row) - std::log(static_cast<double>(row.size()));
    if (l == kNegInf) r.zero_density = true;
    acc += l;
  }
  if (r.zero_density) {
    r.log_value = kNegInf;
    r.value = 0.0;
    return r;
  }
  r.log_value = acc / static_cast<double>(log_dens.size());
  r.value = std::exp(r.log_value);
  return r;
}

inline SppdResult sppd(const std::vector<std::vector<double>>& dens) {
  std::vector<std::vector<double>> l(dens.size());
  for (std::size_t n = 0; n < dens.size(); ++n) {
    l[n].reserve(dens[n].size());
    for (double p : dens[n]) {
      if (!(p >= 0.0)) throw DomainError("densities must be non-negative");
      l[n].push_back(p > 0.0 ? std::log(p) : kNegInf);
    }
  }
  return sppd_from_log(l);
}

inline double mse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) throw DomainError("mse needs equal non-empty inputs");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

// Per-class F1 weighted by true-class support.
inline double weighted_f1(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                          std::size_t classes) {
  if (truth.size() != pred.size() || truth.empty())
    throw DomainError("weighted_f1 needs equal non-empty inputs");
  std::vector<double> tp(classes, 0), fp(classes, 0), fn(classes, 0), support(classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    support[truth[i]] += 1;
    if (truth[i] == pred[i]) {
      tp[truth[i]] += 1;
    } else {
      fp[pred[i]] += 1;
      fn[truth[i]] += 1;
    }
  }
  double f = 0.0;
  for (std::size_t k = 0; k < classes; ++k) {
    const double denom = 2 * tp[k] + fp[k] + fn[k];
    if (support[k] > 0 && denom > 0) f += support[k] * (2 * tp[k] / denom);
  }
  return f / static_cast<double>(truth.size());
}

inline bool categorical_site(Site s) { return s == Site::subject || s == Site::object; }

inline std::size_t site_class(const EventTuple& e, Site s) {
  return static_cast<std::size_t>(s == Site::subject ? e.subject : e.object);
}

inline double site_value(const EventTuple& e, Site s) {
  switch (s) {
    case Site::subject: return static_cast<double>(e.subject);
    case Site::predicate: return e.predicate;
    case Site::quantifier: return static_cast<double>(e.quantifier);
    case Site::object: return static_cast<double>(e.object);
  }
  return 0.0;
}

struct ImputationResult {
  Site site = Site::subject;
  std::string method;
  std::optional<double> sppd;  // absent for methods without a density
  bool zero_density = false;
  std::string metric;          // "weighted_f1" or "mse"
  double error = 0.0;
  std::vector<double> predictions;  // class index or real value per event
};

// Imputes `site` of every held-out event from draws of theta, conditioning
// on the sites in `given` (normally every other site).
inline ImputationResult impute(std::span<const ParamsConstrained> thetas,
                               std::span<const EventTuple> heldout, Site site, SiteMask given,
                               std::string method = "model") {
  if (thetas.empty()) throw DataError("imputation needs at least one draw");
  if (heldout.empty()) throw DataError("imputation needs held-out events");
  if (given.has(site)) throw ConfigError("the imputed site cannot also be conditioned on");
  const std::size_t C = thetas.front().classes();
  const bool categorical = categorical_site(site);
  const std::size_t K = categorical ? (site == Site::subject ? thetas.front().subject_classes()
                                                            : thetas.front().object_classes())
                                    : 0;
  std::vector<ClassTerms> terms;
  terms.reserve(thetas.size());
  for (const auto& t : thetas) terms.emplace_back(t);
  // per-draw, per-class predictive expectations for cardinal sites
  std::vector<std::vector<double>> expect(thetas.size(), std::vector<double>(C));
  for (std::size_t d = 0; d < thetas.size(); ++d)
    for (std::size_t c = 0; c < C; ++c)
      expect[d][c] = site == Site::predicate
                         ? BetaModeConc(thetas[d].omega[c], thetas[d].kappa[c]).mean()
                         : ZeroInflGeom(thetas[d].delta[c], thetas[d].b[c]).mean();

  ImputationResult res;
  res.site = site;
  res.method = std::move(method);
  res.metric = categorical ? "weighted_f1" : "mse";
  std::vector<std::vector<double>> log_dens(heldout.size(), std::vector<double>(thetas.size()));
  std::vector<std::size_t> truth_cls, pred_cls;
  std::vector<double> truth_val;
  for (std::size_t n = 0; n < heldout.size(); ++n) {
    const auto& e = heldout[n];
    std::vector<double> probs(K, 0.0);
    double expectation = 0.0;
    for (std::size_t d = 0; d < thetas.size(); ++d) {
      const auto& t = thetas[d];
      const auto r = responsibilities(terms[d], e, given);
      std::vector<double> l(C);
      for (std::size_t c = 0; c < C; ++c) {
        double site_lp = 0.0;
        switch (site) {
          case Site::subject: site_lp = std::log(t.pi_s[c][site_class(e, site)]); break;
          case Site::object: site_lp = std::log(t.pi_o[c][site_class(e, site)]); break;
          case Site::predicate: site_lp = beta_logpdf(e.predicate, BetaModeConc(t.omega[c], t.kappa[c])); break;
          case Site::quantifier: site_lp = zig_logpmf(e.quantifier, ZeroInflGeom(t.delta[c], t.b[c])); break;
        }
        l[c] = (r[c] > 0.0 ? std::log(r[c]) : kNegInf) + site_lp;
        if (categorical) {
          const auto& row = site == Site::subject ? t.pi_s[c] : t.pi_o[c];
          for (std::size_t k = 0; k < K; ++k) probs[k] += r[c] * row[k];
        } else {
          expectation += r[c] * expect[d][c];
        }
      }
      log_dens[n][d] = log_sum_exp(l);
    }
    if (categorical) {
      const auto best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
      pred_cls.push_back(best);
      truth_cls.push_back(site_class(e, site));
      res.predictions.push_back(static_cast<double>(best));
    } else {
      res.predictions.push_back(expectation / static_cast<double>(thetas.size()));
      truth_val.push_back(site_value(e, site));
    }
  }
  const auto s = sppd_from_log(log_dens);
  res.sppd = s.value;
  res.zero_density = s.zero_density;
  res.error = categorical ? weighted_f1(truth_cls, pred_cls, K) : mse(res.predictions, truth_val);
  return res;
}

inline ImputationResult impute(std::span<const ParamsConstrained> thetas,
                               std::span<const EventTuple> heldout, Site site) {
  return impute(thetas, heldout, site, SiteMask::all_but(site));
}

inline ImputationResult impute(const PosteriorSamples& s, std::span<const EventTuple> heldout, Site site) {
  return impute(std::span<const ParamsConstrained>(s.thetas), heldout, site);
}

// Naive baseline: the model fitted to one site alone; predictions ignore
// every other site.
inline PosteriorSamples baseline_naive(std::span<const EventTuple> train, Site site,
                                       const Hyperparams& hyper, const SamplerConfig& cfg) {
  return sample_posterior(train, hyper, cfg, SiteMask::only(site));
}

inline ImputationResult impute_naive(const PosteriorSamples& naive, std::span<const EventTuple> heldout,
                                     Site site) {
  return impute(std::span<const ParamsConstrained>(naive.thetas), heldout, site, SiteMask::none(), "naive");
}

// Prior baseline: parameter packs drawn straight from the prior.
inline std::vector<ParamsConstrained> baseline_prior(const Hyperparams& hyper, std::size_t draws,
                                                     std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ParamsConstrained> out;
  out.reserve(draws);
  for (std::size_t i = 0; i < draws; ++i) out.push_back(sample_prior(hyper, rng));
  return out;
}

struct OlsFit {
  Eigen::MatrixXd coef;  // features x targets
  bool ridge = false;    // singular design; a 1e-6 ridge was added
};

inline OlsFit ols(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  OlsFit f;
  const Eigen::MatrixXd XtX = X.transpose() * X;
  const Eigen::MatrixXd XtY = X.transpose() * Y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() == X.cols()) {
    f.coef = qr.solve(Y);
  } else {
    f.ridge = true;
    const Eigen::MatrixXd reg = XtX + 1e-6 * Eigen::MatrixXd::Identity(X.cols(), X.cols());
    f.coef = reg.ldlt().solve(XtY);
  }
  return f;
}

// Linear-regression baseline: least squares from the other three sites
// (categoricals dummy coded against their first level, cardinals raw) to the
// target; categorical targets are one-vs-rest with argmax decoding.
class LinearBaseline {
 public:
  LinearBaseline(std::span<const EventTuple> train, Site site, std::size_t S = kActorClasses,
                 std::size_t O = kActorClasses)
      : site_(site), S_(S), O_(O) {
    if (train.empty()) throw DataError("linear baseline needs training events");
    const Eigen::MatrixXd X = design(train);
    Eigen::MatrixXd Y;
    if (categorical_site(site)) {
      const std::size_t K = site == Site::subject ? S_ : O_;
      Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(K));
      for (std::size_t n = 0; n < train.size(); ++n)
        Y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(site_class(train[n], site))) = 1.0;
    } else {
      Y.resize(static_cast<Eigen::Index>(train.size()), 1);
      for (std::size_t n = 0; n < train.size(); ++n)
        Y(static_cast<Eigen::Index>(n), 0) = site_value(train[n], site);
    }
    fit_ = ols(X, Y);
  }

  const OlsFit& fit() const { return fit_; }

  ImputationResult evaluate(std::span<const EventTuple> heldout) const {
    ImputationResult res;
    res.site = site_;
    res.method = "lr";
    const Eigen::MatrixXd P = design(heldout) * fit_.coef;
    if (categorical_site(site_)) {
      res.metric = "weighted_f1";
      std::vector<std::size_t> truth, pred;
      for (Eigen::Index n = 0; n < P.rows(); ++n) {
        Eigen::Index best = 0;
        P.row(n).maxCoeff(&best);
        pred.push_back(static_cast<std::size_t>(best));
        truth.push_back(site_class(heldout[static_cast<std::size_t>(n)], site_));
        res.predictions.push_back(static_cast<double>(best));
      }
      res.error = weighted_f1(truth, pred, static_cast<std::size_t>(P.cols()));
    } else {
      res.metric = "mse";
      std::vector<double> truth;
      for (Eigen::Index n = 0; n < P.rows(); ++n) {
        res.predictions.push_back(P(n, 0));
        truth.push_back(site_value(heldout[static_cast<std::size_t>(n)], site_));
      }
      res.error = mse(res.predictions, truth);
    }
    return res;
  }

  Eigen::MatrixXd design(std::span<const EventTuple> data) const {
    std::size_t cols = 1;
    for (Site s : kAllSites) {
      if (s == site_) continue;
      cols += categorical_site(s) ? (s == Site::subject ? S_ : O_) - 1 : 1;
    }
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.size()),
                                              static_cast<Eigen::Index>(cols));
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto row = static_cast<Eigen::Index>(n);
      Eigen::Index col = 0;
      X(row, col++) = 1.0;
      for (Site s : kAllSites) {
        if (s == site_) continue;
        if (categorical_site(s)) {
          const std::size_t K = s == Site::subject ? S_ : O_;
          const std::size_t k = site_class(data[n], s);
          if (k > 0) X(row, col + static_cast<Eigen::Index>(k - 1)) = 1.0;
          col += static_cast<Eigen::Index>(K - 1);
        } else {
          X(row, col++) = site_value(data[n], s);
        }
      }
    }
    return X;
  }

 private:
  Site site_;
  std::size_t S_, O_;
  OlsFit fit_;
};

// Joint four-site predictive SPPD of held-out events.
inline SppdResult joint_sppd(std::span<const ParamsConstrained> thetas, std::span<const EventTuple> heldout) {
  if (thetas.empty() || heldout.empty()) throw DataError("joint SPPD needs draws and events");
  std::vector<ClassTerms> terms;
  for (const auto& t : thetas) terms.emplace_back(t);
  const std::size_t C = thetas.front().classes();
  std::vector<std::vector<double>> log_dens(heldout.size(), std::vector<double>(thetas.size()));
  std::vector<double> l(C);
  for (std::size_t n = 0; n < heldout.size(); ++n) {
    const auto& e = heldout[n];
    for (std::size_t d = 0; d < terms.size(); ++d) {
      terms[d].joint(static_cast<std::size_t>(e.subject), std::log(e.predicate), std::log1p(-e.predicate),
                     e.quantifier, static_cast<std::size_t>(e.object), SiteMask::all(), l);
      log_dens[n][d] = log_sum_exp(l);
    }
  }
  return sppd_from_log(log_dens);
}

struct SelectRow {
  std::size_t classes = 0;
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> values;  // one per successful seed
  std::vector<std::string> failures;
};

// Fits every (C, seed) cell and summarizes held-out joint SPPD per C; a
// failing cell is recorded and the sweep continues.
inline std::vector<SelectRow> select_C(std::span<const EventTuple> train, std::span<const EventTuple> heldout,
                                       const Hyperparams& hyper, std::span<const std::size_t> class_counts,
                                       std::span<const std::uint64_t> seeds, const SamplerConfig& cfg) {
  if (seeds.empty()) throw ConfigError("select_C needs at least one seed");
  std::vector<SelectRow> rows;
  for (std::size_t C : class_counts) {
    SelectRow row;
    row.classes = C;
    Hyperparams h = hyper;
    h.classes = C;
    h.alpha_z.clear();
    for (std::uint64_t seed : seeds) {
      SamplerConfig c = cfg;
      c.seed = seed;
      try {
        const auto post = sample_posterior(train, h, c);
        row.values.push_back(joint_sppd(post.thetas, heldout).value);
      } catch (const Error& e) {
        row.failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
      }
    }
    if (!row.values.empty()) {
      const double n = static_cast<double>(row.values.size());
      for (double v : row.values) row.mean += v / n;
      if (row.values.size() > 1) {
        double ss = 0.0;
        for (double v : row.values) ss += (v - row.mean) * (v - row.mean);
        row.sd = std::sqrt(ss / (n - 1.0));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ordint
