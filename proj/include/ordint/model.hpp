#pragma once

// The ordinal latent class model. Each event draws a class z from pi_z; given
// z, the subject and object are categorical, the predicate is Beta
// (mode omega, concentration kappa) and the casualty count is zero-inflated
// Geometric (gate delta, success b). omega increases with z while delta and b
// decrease, so higher classes mean more intense events.
//
// The sampler works on a flat unconstrained vector; z is summed out of the
// likelihood and recovered afterwards from per-event responsibilities.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ordint/data.hpp"
#include "ordint/dists.hpp"
#include "ordint/error.hpp"
#include "ordint/ordered.hpp"

namespace ordint {

struct Hyperparams {
  std::size_t classes = 5;
  double mu = -1.0;     // Ordered Normal location
  double sigma = 1.0;   // Ordered Normal scale
  double k = 1.0;       // Gamma shape on kappa - 2
  double eta = 1.0;     // Gamma rate on kappa - 2
  std::vector<double> alpha_z;  // Dirichlet on pi_z; empty means all ones
  std::size_t subject_classes = kActorClasses;
  std::size_t object_classes = kActorClasses;

  void validate() const {
    if (classes < 1) throw ConfigError("class count must be at least 1");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(k > 0.0) || !(eta > 0.0)) throw ConfigError("Gamma shape and rate must be positive");
    if (!alpha_z.empty()) {
      if (alpha_z.size() != classes) throw ConfigError("alpha_z length must equal the class count");
      for (double a : alpha_z)
        if (!(a > 0.0)) throw ConfigError("alpha_z entries must be positive");
    }
    if (subject_classes < 2 || object_classes < 2)
      throw ConfigError("subject and object need at least two classes");
  }

  std::vector<double> concentration_z() const {
    return alpha_z.empty() ? std::vector<double>(classes, 1.0) : alpha_z;
  }
};

inline void to_json(nlohmann::json& j, const Hyperparams& h) {
  j = {{"classes", h.classes}, {"mu", h.mu},   {"sigma", h.sigma},
       {"k", h.k},             {"eta", h.eta}, {"alpha_z", h.concentration_z()},
       {"subject_classes", h.subject_classes}, {"object_classes", h.object_classes}};
}

inline void from_json(const nlohmann::json& j, Hyperparams& h) {
  h = Hyperparams{};
  h.classes = j.value("classes", h.classes);
  h.mu = j.value("mu", h.mu);
  h.sigma = j.value("sigma", h.sigma);
  h.k = j.value("k", h.k);
  h.eta = j.value("eta", h.eta);
  h.alpha_z = j.value("alpha_z", std::vector<double>{});
  h.subject_classes = j.value("subject_classes", h.subject_classes);
  h.object_classes = j.value("object_classes", h.object_classes);
}

struct ParamsConstrained {
  std::vector<double> pi_z;
  std::vector<std::vector<double>> pi_s;  // C rows over subject classes
  std::vector<std::vector<double>> pi_o;  // C rows over object classes
  std::vector<double> omega;  // increasing, in (0,1)
  std::vector<double> kappa;  // > 2
  std::vector<double> delta;  // decreasing, in (0,1)
  std::vector<double> b;      // decreasing, in (0,1)

  std::size_t classes() const { return pi_z.size(); }
  std::size_t subject_classes() const { return pi_s.empty() ? 0 : pi_s[0].size(); }
  std::size_t object_classes() const { return pi_o.empty() ? 0 : pi_o[0].size(); }

  std::size_t scalar_count() const {
    std::size_t n = pi_z.size() + omega.size() + kappa.size() + delta.size() + b.size();
    for (const auto& r : pi_s) n += r.size();
    for (const auto& r : pi_o) n += r.size();
    return n;
  }

  // Throws DomainError naming the first violated invariant.
  void validate() const {
    const std::size_t C = classes();
    auto simplex_ok = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) {
        if (!(x >= 0.0 && x <= 1.0)) return false;
        s += x;
      }
      return std::abs(s - 1.0) <= 1e-9;
    };
    if (C == 0) throw DomainError("parameter pack has no classes");
    if (pi_s.size() != C || pi_o.size() != C || omega.size() != C || kappa.size() != C ||
        delta.size() != C || b.size() != C)
      throw DomainError("parameter blocks disagree on the class count");
    if (!simplex_ok(pi_z)) throw DomainError("pi_z is not a simplex");
    for (std::size_t c = 0; c < C; ++c) {
      if (pi_s[c].size() != subject_classes() || !simplex_ok(pi_s[c]))
        throw DomainError("pi_s row " + std::to_string(c) + " is not a simplex");
      if (pi_o[c].size() != object_classes() || !simplex_ok(pi_o[c]))
        throw DomainError("pi_o row " + std::to_string(c) + " is not a simplex");
      auto unit = [](double x) { return x > 0.0 && x < 1.0; };
      if (!unit(omega[c]) || !unit(delta[c]) || !unit(b[c]))
        throw DomainError("omega/delta/b outside (0,1) at class " + std::to_string(c));
      if (!(kappa[c] > 2.0)) throw DomainError("kappa not above 2 at class " + std::to_string(c));
      if (c > 0) {
        if (!(omega[c] > omega[c - 1])) throw DomainError("omega not strictly increasing");
        if (!(delta[c] < delta[c - 1])) throw DomainError("delta not strictly decreasing");
        if (!(b[c] < b[c - 1])) throw DomainError("b not strictly decreasing");
      }
    }
  }

  bool ordered() const {
    for (std::size_t c = 1; c < classes(); ++c)
      if (!(omega[c] > omega[c - 1]) || !(delta[c] < delta[c - 1]) || !(b[c] < b[c - 1]))
        return false;
    return true;
  }
};

inline constexpr int kParamsVersion = 1;

inline void to_json(nlohmann::json& j, const ParamsConstrained& t) {
  j = {{"pi_z", t.pi_z},   {"pi_s", t.pi_s},   {"pi_o", t.pi_o}, {"omega", t.omega},
       {"kappa", t.kappa}, {"delta", t.delta}, {"b", t.b}};
}

inline void from_json(const nlohmann::json& j, ParamsConstrained& t) {
  j.at("pi_z").get_to(t.pi_z);
  j.at("pi_s").get_to(t.pi_s);
  j.at("pi_o").get_to(t.pi_o);
  j.at("omega").get_to(t.omega);
  j.at("kappa").get_to(t.kappa);
  j.at("delta").get_to(t.delta);
  j.at("b").get_to(t.b);
}

// Versioned standalone document: {"version", "hyper", "theta"}.
inline nlohmann::json params_document(const ParamsConstrained& t, const Hyperparams& h) {
  return {{"version", kParamsVersion}, {"hyper", h}, {"theta", t}};
}

inline std::pair<ParamsConstrained, Hyperparams> parse_params_document(const nlohmann::json& j) {
  if (j.value("version", 0) != kParamsVersion)
    throw DataError("unsupported parameter document version");
  auto t = j.at("theta").get<ParamsConstrained>();
  auto h = j.at("hyper").get<Hyperparams>();
  t.validate();
  return {std::move(t), std::move(h)};
}

// Offsets of each block inside the unconstrained vector.
struct Layout {
  std::size_t C, S, O;

  explicit Layout(const Hyperparams& h)
      : C(h.classes), S(h.subject_classes), O(h.object_classes) {}

  std::size_t pi_z() const { return 0; }
  std::size_t pi_s() const { return C - 1; }
  std::size_t pi_o() const { return pi_s() + C * (S - 1); }
  std::size_t omega() const { return pi_o() + C * (O - 1); }
  std::size_t kappa() const { return omega() + C; }
  std::size_t delta() const { return kappa() + C; }
  std::size_t b() const { return delta() + C; }
  std::size_t dim() const { return b() + C; }

  // Human-readable coordinate name for diagnostics.
  std::string name(std::size_t i) const {
    auto idx = [](const char* block, std::size_t k) {
      return std::string(block) + "[" + std::to_string(k) + "]";
    };
    if (i < pi_s()) return idx("u_pi_z", i);
    if (i < pi_o()) return idx("u_pi_s", i - pi_s());
    if (i < omega()) return idx("u_pi_o", i - pi_o());
    if (i < kappa()) return idx("u_omega", i - omega());
    if (i < delta()) return idx("u_kappa", i - kappa());
    if (i < b()) return idx("u_delta", i - delta());
    return idx("u_b", i - b());
  }
};

namespace detail {

inline void require_dim(std::span<const double> x, const Layout& L) {
  if (x.size() != L.dim())
    throw DomainError("unconstrained vector has length " + std::to_string(x.size()) +
                      ", expected " + std::to_string(L.dim()));
  require_finite(x, "unconstrained parameters");
}

}  // namespace detail

inline ParamsConstrained constrain(std::span<const double> x, const Hyperparams& h) {
  const Layout L(h);
  detail::require_dim(x, L);
  ParamsConstrained t;
  const std::size_t C = L.C;
  t.pi_z = simplex::forward(x.subspan(L.pi_z(), C - 1));
  t.pi_s.resize(C);
  t.pi_o.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    t.pi_s[c] = simplex::forward(x.subspan(L.pi_s() + c * (L.S - 1), L.S - 1));
    t.pi_o[c] = simplex::forward(x.subspan(L.pi_o() + c * (L.O - 1), L.O - 1));
  }
  t.omega = sigmoid_ord(x.subspan(L.omega(), C), false);
  t.kappa.resize(C);
  for (std::size_t c = 0; c < C; ++c) t.kappa[c] = 2.0 + std::exp(x[L.kappa() + c]);
  t.delta = sigmoid_ord(x.subspan(L.delta(), C), true);
  t.b = sigmoid_ord(x.subspan(L.b(), C), true);
  return t;
}

inline std::vector<double> unconstrain(const ParamsConstrained& t) {
  t.validate();
  Hyperparams h;
  h.classes = t.classes();
  h.subject_classes = t.subject_classes();
  h.object_classes = t.object_classes();
  const Layout L(h);
  std::vector<double> x;
  x.reserve(L.dim());
  auto append = [&](const std::vector<double>& v) { x.insert(x.end(), v.begin(), v.end()); };
  append(simplex::inverse(t.pi_z));
  for (const auto& r : t.pi_s) append(simplex::inverse(r));
  for (const auto& r : t.pi_o) append(simplex::inverse(r));
  append(sigmoid_ord_inverse(t.omega, false));
  for (double k : t.kappa) x.push_back(std::log(k - 2.0));
  append(sigmoid_ord_inverse(t.delta, true));
  append(sigmoid_ord_inverse(t.b, true));
  return x;
}

enum class Site : std::uint8_t { subject = 0, predicate = 1, quantifier = 2, object = 3 };

inline constexpr std::array<Site, 4> kAllSites = {Site::subject, Site::predicate, Site::quantifier,
                                                  Site::object};

inline std::string_view to_string(Site s) {
  switch (s) {
    case Site::subject: return "subject";
    case Site::predicate: return "predicate";
    case Site::quantifier: return "quantifier";
    case Site::object: return "object";
  }
  return "unknown";
}

inline Site site_from_string(std::string_view s) {
  for (Site site : kAllSites)
    if (to_string(site) == s) return site;
  throw ConfigError("unknown site '" + std::string(s) + "'");
}

// Which of the four observed sites a computation conditions on.
class SiteMask {
 public:
  constexpr SiteMask() = default;
  static constexpr SiteMask all() { return SiteMask(0b1111); }
  static constexpr SiteMask none() { return SiteMask(0); }
  static constexpr SiteMask only(Site s) { return SiteMask(bit(s)); }
  static constexpr SiteMask all_but(Site s) { return SiteMask(0b1111 & ~bit(s)); }

  constexpr bool has(Site s) const { return (bits_ & bit(s)) != 0; }
  constexpr bool operator==(const SiteMask&) const = default;

 private:
  constexpr explicit SiteMask(unsigned bits) : bits_(bits) {}
  static constexpr unsigned bit(Site s) { return 1u << static_cast<unsigned>(s); }
  unsigned bits_ = 0b1111;
};

// Per-class constants of the site log-densities, computed once per theta.
class ClassTerms {
 public:
  ClassTerms(const ParamsConstrained& t) : C_(t.classes()), S_(t.subject_classes()), O_(t.object_classes()) {
    log_pi_.resize(C_);
    log_s_.resize(C_ * S_);
    log_o_.resize(C_ * O_);
    am1_.resize(C_);
    bm1_.resize(C_);
    log_norm_.resize(C_);
    log_zero_.resize(C_);
    log_nonzero_.resize(C_);
    log_fail_.resize(C_);
    for (std::size_t c = 0; c < C_; ++c) {
      log_pi_[c] = std::log(t.pi_z[c]);
      for (std::size_t j = 0; j < S_; ++j) log_s_[c * S_ + j] = std::log(t.pi_s[c][j]);
      for (std::size_t j = 0; j < O_; ++j) log_o_[c * O_ + j] = std::log(t.pi_o[c][j]);
      const BetaModeConc beta(t.omega[c], t.kappa[c]);
      const double a = beta.alpha(), bb = beta.beta();
      am1_[c] = a - 1.0;
      bm1_[c] = bb - 1.0;
      log_norm_[c] = lgamma(a + bb) - lgamma(a) - lgamma(bb);
      const double g = t.delta[c], s = t.b[c];
      log_zero_[c] = std::log(g + (1.0 - g) * s);
      log_nonzero_[c] = std::log1p(-g) + std::log(s);
      log_fail_[c] = std::log1p(-s);
    }
  }

  std::size_t classes() const { return C_; }

  // log pi_c + sum over masked-in sites of log p(site | c).
  void joint(std::size_t subject, double log_p, double log_1mp, long long q, std::size_t object,
             SiteMask mask, std::span<double> out) const {
    for (std::size_t c = 0; c < C_; ++c) {
      double l = log_pi_[c];
      if (mask.has(Site::subject)) l += log_s_[c * S_ + subject];
      if (mask.has(Site::predicate)) l += am1_[c] * log_p + bm1_[c] * log_1mp + log_norm_[c];
      if (mask.has(Site::quantifier))
        l += q == 0 ? log_zero_[c] : log_nonzero_[c] + static_cast<double>(q) * log_fail_[c];
      if (mask.has(Site::object)) l += log_o_[c * O_ + object];
      out[c] = l;
    }
  }

 private:
  std::size_t C_, S_, O_;
  std::vector<double> log_pi_, log_s_, log_o_, am1_, bm1_, log_norm_, log_zero_, log_nonzero_,
      log_fail_;
};

// Event data as a feature matrix F (N x (S+O+5)): one-hot subject, one-hot
// object, log p, log(1-p), 1[q=0], q, 1. Every class log-joint is linear in
// these features, so all of them come from one product F * B(theta).
struct PreparedData {
  std::size_t S = 0, O = 0;
  Eigen::MatrixXd features;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  Eigen::Index col_subject(std::size_t j) const { return static_cast<Eigen::Index>(j); }
  Eigen::Index col_object(std::size_t j) const { return static_cast<Eigen::Index>(S + j); }
  Eigen::Index col_log_p() const { return static_cast<Eigen::Index>(S + O); }
  Eigen::Index col_log_1mp() const { return col_log_p() + 1; }
  Eigen::Index col_zero() const { return col_log_p() + 2; }
  Eigen::Index col_q() const { return col_log_p() + 3; }
  Eigen::Index col_one() const { return col_log_p() + 4; }

  PreparedData() = default;
  PreparedData(std::span<const EventTuple> data, std::size_t S_, std::size_t O_) : S(S_), O(O_) {
    const auto N = static_cast<Eigen::Index>(data.size());
    features = Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(S + O + 5));
    for (Eigen::Index n = 0; n < N; ++n) {
      const auto& e = data[static_cast<std::size_t>(n)];
      auto bad = [&](const char* why) {
        return DataError("event " + std::to_string(n) + ": " + why);
      };
      const auto s = static_cast<std::size_t>(e.subject), o = static_cast<std::size_t>(e.object);
      if (s >= S) throw bad("subject class out of range");
      if (o >= O) throw bad("object class out of range");
      if (!(e.predicate > 0.0 && e.predicate < 1.0)) throw bad("predicate outside (0,1)");
      if (e.quantifier < 0) throw bad("negative quantifier");
      features(n, col_subject(s)) = 1.0;
      features(n, col_object(o)) = 1.0;
      features(n, col_log_p()) = std::log(e.predicate);
      features(n, col_log_1mp()) = std::log1p(-e.predicate);
      features(n, col_zero()) = e.quantifier == 0 ? 1.0 : 0.0;
      features(n, col_q()) = static_cast<double>(e.quantifier);
      features(n, col_one()) = 1.0;
    }
  }
};

// log p(x): Normal on the pre-ordering coordinates, Dirichlet on every
// simplex plus the stick-breaking Jacobian, Gamma on kappa - 2 plus the log
// Jacobian. Adds into grad when given.
inline double log_prior(std::span<const double> x, const Hyperparams& h,
                        std::span<double> grad = {}) {
  const Layout L(h);
  detail::require_dim(x, L);
  const std::size_t C = L.C;
  const bool want_grad = !grad.empty();
  double lp = 0.0;

  auto simplex_block = [&](std::size_t off, std::size_t K, std::span<const double> alpha) {
    double lj = 0.0;
    auto y = x.subspan(off, K - 1);
    const auto v = simplex::forward(y, &lj);
    lp += dirichlet_logpdf(v, alpha) + lj;
    if (want_grad) {
      std::vector<double> w(K), dy(K - 1);
      for (std::size_t i = 0; i < K; ++i) w[i] = alpha[i] - 1.0;
      simplex::backprop_log(y, w, dy);
      for (std::size_t i = 0; i + 1 < K; ++i) grad[off + i] += dy[i];
    }
  };
  const auto alpha_z = h.concentration_z();
  simplex_block(L.pi_z(), C, alpha_z);
  const std::vector<double> ones_s(L.S, 1.0), ones_o(L.O, 1.0);
  for (std::size_t c = 0; c < C; ++c) {
    simplex_block(L.pi_s() + c * (L.S - 1), L.S, ones_s);
    simplex_block(L.pi_o() + c * (L.O - 1), L.O, ones_o);
  }
  for (std::size_t off : {L.omega(), L.delta(), L.b()}) {
    for (std::size_t c = 0; c < C; ++c) {
      const double u = x[off + c];
      lp += normal_logpdf(u, h.mu, h.sigma);
      if (want_grad) grad[off + c] += -(u - h.mu) / (h.sigma * h.sigma);
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    const double v = x[L.kappa() + c];
    const double e = std::exp(v);
    lp += gamma_logpdf(e, h.k, h.eta) + v;
    if (want_grad) grad[L.kappa() + c] += h.k - h.eta * e;
  }
  return lp;
}

struct LogJoint {
  double value = 0.0;
  std::vector<double> grad;
};

// True when every parameter is strictly inside its support, which
// floating-point saturation of the transforms can violate far in the tails.
inline bool interior(const ParamsConstrained& t) {
  auto unit = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double p) { return p > 0.0 && p < 1.0; });
  };
  auto positive = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double p) { return p > 0.0; });
  };
  if (!unit(t.omega) || !unit(t.delta) || !unit(t.b) || !positive(t.pi_z)) return false;
  for (std::size_t c = 0; c < t.classes(); ++c)
    if (!positive(t.pi_s[c]) || !positive(t.pi_o[c]) || !(t.kappa[c] > 2.0) ||
        !std::isfinite(t.kappa[c]))
      return false;
  return true;
}

namespace detail {

// Marginal log-likelihood sum_n log sum_c exp(l_nc) and its gradient with
// respect to x, accumulated from class responsibilities.
inline double log_likelihood(std::span<const double> x, const PreparedData& d,
                             const Hyperparams& h, SiteMask sites, std::span<double> grad) {
  const Layout L(h);
  const std::size_t C = L.C, S = L.S, O = L.O;
  const ParamsConstrained t = constrain(x, h);
  // saturated transforms put theta on the boundary of its support
  if (!interior(t)) return kNegInf;

  const auto Cn = static_cast<Eigen::Index>(C);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(d.features.cols(), Cn);
  for (Eigen::Index c = 0; c < Cn; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    double constant = std::log(t.pi_z[cc]);
    if (sites.has(Site::subject))
      for (std::size_t j = 0; j < S; ++j) B(d.col_subject(j), c) = std::log(t.pi_s[cc][j]);
    if (sites.has(Site::object))
      for (std::size_t j = 0; j < O; ++j) B(d.col_object(j), c) = std::log(t.pi_o[cc][j]);
    if (sites.has(Site::predicate)) {
      const BetaModeConc beta(t.omega[cc], t.kappa[cc]);
      const double a = beta.alpha(), bb = beta.beta();
      B(d.col_log_p(), c) = a - 1.0;
      B(d.col_log_1mp(), c) = bb - 1.0;
      constant += lgamma(a + bb) - lgamma(a) - lgamma(bb);
    }
    if (sites.has(Site::quantifier)) {
      const double g = t.delta[cc], s = t.b[cc];
      const double log_nonzero = std::log1p(-g) + std::log(s);
      B(d.col_zero(), c) = std::log(g + (1.0 - g) * s) - log_nonzero;
      B(d.col_q(), c) = std::log1p(-s);
      constant += log_nonzero;
    }
    B(d.col_one(), c) = constant;
  }

  Eigen::MatrixXd W = d.features * B;  // N x C log joints
  const Eigen::VectorXd m = W.rowwise().maxCoeff();
  W.colwise() -= m;
  W = W.array().exp();
  const Eigen::VectorXd norm = W.rowwise().sum();
  const double total = m.sum() + norm.array().log().sum();
  if (grad.empty() || !std::isfinite(total)) return total;
  W.array().colwise() /= norm.array();

  // sufficient statistics: row k of F^T W holds sum_n w_nc F_nk
  const Eigen::MatrixXd T = d.features.transpose() * W;
  auto stat = [&](Eigen::Index row, std::size_t c) { return T(row, static_cast<Eigen::Index>(c)); };
  std::vector<double> R(C);
  for (std::size_t c = 0; c < C; ++c) R[c] = stat(d.col_one(), c);

  {
    std::vector<double> dy(C - 1);
    simplex::backprop_log(x.subspan(L.pi_z(), C - 1), R, dy, false);
    for (std::size_t i = 0; i + 1 < C; ++i) grad[L.pi_z() + i] += dy[i];
  }
  auto rows = [&](std::size_t K, std::size_t off, auto col) {
    std::vector<double> counts(K), dy(K - 1);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < K; ++j) counts[j] = stat(col(j), c);
      simplex::backprop_log(x.subspan(off + c * (K - 1), K - 1), counts, dy, false);
      for (std::size_t i = 0; i + 1 < K; ++i) grad[off + c * (K - 1) + i] += dy[i];
    }
  };
  if (sites.has(Site::subject)) rows(S, L.pi_s(), [&](std::size_t j) { return d.col_subject(j); });
  if (sites.has(Site::object)) rows(O, L.pi_o(), [&](std::size_t j) { return d.col_object(j); });

  if (sites.has(Site::predicate)) {
    std::vector<double> d_omega(C), d_kappa(C);
    for (std::size_t c = 0; c < C; ++c) {
      const BetaModeConc beta(t.omega[c], t.kappa[c]);
      const double a = beta.alpha(), bb = beta.beta(), psi_ab = digamma(a + bb);
      const double da = stat(d.col_log_p(), c) - R[c] * (digamma(a) - psi_ab);
      const double db = stat(d.col_log_1mp(), c) - R[c] * (digamma(bb) - psi_ab);
      d_omega[c] = (t.kappa[c] - 2.0) * (da - db);
      d_kappa[c] = t.omega[c] * da + (1.0 - t.omega[c]) * db;
    }
    std::vector<double> du(C);
    sigmoid_ord_backprop(x.subspan(L.omega(), C), d_omega, du, false);
    for (std::size_t c = 0; c < C; ++c) {
      grad[L.omega() + c] += du[c];
      grad[L.kappa() + c] += d_kappa[c] * (t.kappa[c] - 2.0);
    }
  }
  if (sites.has(Site::quantifier)) {
    std::vector<double> d_delta(C), d_b(C), du(C);
    for (std::size_t c = 0; c < C; ++c) {
      const double g = t.delta[c], s = t.b[c];
      const double m0 = g + (1.0 - g) * s;
      const double Z = stat(d.col_zero(), c), NZ = R[c] - Z, Q = stat(d.col_q(), c);
      d_delta[c] = Z * (1.0 - s) / m0 - NZ / (1.0 - g);
      d_b[c] = Z * (1.0 - g) / m0 + NZ / s - Q / (1.0 - s);
    }
    sigmoid_ord_backprop(x.subspan(L.delta(), C), d_delta, du, true);
    for (std::size_t c = 0; c < C; ++c) grad[L.delta() + c] += du[c];
    sigmoid_ord_backprop(x.subspan(L.b(), C), d_b, du, true);
    for (std::size_t c = 0; c < C; ++c) grad[L.b() + c] += du[c];
  }
  return total;
}

}  // namespace detail

// Log posterior (up to a constant) of the unconstrained parameters, reusable
// across evaluations on the same data. `sites` restricts the likelihood to a
// subset of the observed sites.
class ModelDensity {
 public:
  ModelDensity(std::span<const EventTuple> data, Hyperparams h, SiteMask sites = SiteMask::all())
      : hyper_(std::move(h)), sites_(sites) {
    hyper_.validate();
    data_ = PreparedData(data, hyper_.subject_classes, hyper_.object_classes);
  }

  std::size_t dim() const { return Layout(hyper_).dim(); }
  const Hyperparams& hyper() const { return hyper_; }
  SiteMask sites() const { return sites_; }

  // Returns log density; overwrites grad (size dim()).
  double operator()(std::span<const double> x, std::span<double> grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); })) return kNegInf;
    const double lp = log_prior(x, hyper_, grad);
    return lp + detail::log_likelihood(x, data_, hyper_, sites_, grad);
  }

  double value(std::span<const double> x) const {
    return log_prior(x, hyper_) + detail::log_likelihood(x, data_, hyper_, sites_, {});
  }

 private:
  Hyperparams hyper_;
  SiteMask sites_;
  PreparedData data_;
};

inline LogJoint log_joint(std::span<const double> x, std::span<const EventTuple> data,
                          const Hyperparams& h, SiteMask sites = SiteMask::all()) {
  if (data.empty()) throw DataError("log_joint needs at least one event");
  const ModelDensity density(data, h, sites);
  LogJoint out;
  out.grad.assign(density.dim(), 0.0);
  out.value = density(x, out.grad);
  return out;
}

// Posterior class probabilities of one event given the masked-in sites.
inline std::vector<double> responsibilities(const ClassTerms& terms, const EventTuple& e,
                                            SiteMask mask) {
  if (!(e.predicate > 0.0 && e.predicate < 1.0) && mask.has(Site::predicate))
    throw DomainError("predicate outside (0,1)");
  if (e.quantifier < 0) throw DomainError("negative quantifier");
  std::vector<double> l(terms.classes());
  const double lp = e.predicate > 0.0 && e.predicate < 1.0 ? std::log(e.predicate) : 0.0;
  const double l1mp = e.predicate > 0.0 && e.predicate < 1.0 ? std::log1p(-e.predicate) : 0.0;
  terms.joint(static_cast<std::size_t>(e.subject), lp, l1mp, e.quantifier,
              static_cast<std::size_t>(e.object), mask, l);
  const double m = *std::max_element(l.begin(), l.end());
  double s = 0.0;
  for (auto& v : l) {
    v = std::exp(v - m);
    s += v;
  }
  for (auto& v : l) v /= s;
  return l;
}

inline std::vector<double> responsibilities(const ParamsConstrained& t, const EventTuple& e,
                                            SiteMask mask) {
  return responsibilities(ClassTerms(t), e, mask);
}

struct Synthetic {
  std::vector<EventTuple> tuples;
  std::vector<std::size_t> labels;  // 0-based true classes
};

inline Synthetic generate(const ParamsConstrained& t, std::size_t n, Rng& rng) {
  t.validate();
  Synthetic out;
  out.tuples.reserve(n);
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t z = sample_categorical(t.pi_z, rng);
    EventTuple e;
    e.subject = static_cast<ActorClass>(sample_categorical(t.pi_s[z], rng));
    // keep draws inside the open support
    e.predicate = std::clamp(sample_beta(BetaModeConc(t.omega[z], t.kappa[z]), rng), 1e-12,
                             1.0 - 1e-12);
    e.quantifier = sample_zig(ZeroInflGeom(t.delta[z], t.b[z]), rng);
    e.object = static_cast<ActorClass>(sample_categorical(t.pi_o[z], rng));
    e.location = "sim";
    e.month = YearMonth{2000, 1};
    out.tuples.push_back(std::move(e));
    out.labels.push_back(z);
  }
  return out;
}

// A well-separated truth for simulation: each class favours its own subject
// and object type and the ordered blocks are evenly spaced.
inline ParamsConstrained separated_params(std::size_t C, std::size_t S = kActorClasses,
                                          std::size_t O = kActorClasses) {
  if (C < 1) throw ConfigError("class count must be at least 1");
  ParamsConstrained t;
  t.pi_z.assign(C, 1.0 / static_cast<double>(C));
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<double> s(S, 0.3 / static_cast<double>(S - 1)), o(O, 0.3 / static_cast<double>(O - 1));
    s[c % S] = 0.7;
    o[(O - 1) - c % O] = 0.7;
    t.pi_s.push_back(s);
    t.pi_o.push_back(o);
    const double u = C == 1 ? 0.5 : static_cast<double>(c) / static_cast<double>(C - 1);
    t.omega.push_back(0.1 + 0.8 * u);
    t.kappa.push_back(30.0);
    t.delta.push_back(0.9 - 0.8 * u);
    t.b.push_back(0.9 - 0.8 * u);
  }
  return t;
}

// One draw from the prior, following the generative definition of each block.
inline ParamsConstrained sample_prior(const Hyperparams& h, Rng& rng) {
  h.validate();
  const std::size_t C = h.classes;
  ParamsConstrained t;
  t.pi_z = sample_dirichlet(h.concentration_z(), rng);
  const std::vector<double> ones_s(h.subject_classes, 1.0), ones_o(h.object_classes, 1.0);
  for (std::size_t c = 0; c < C; ++c) {
    t.pi_s.push_back(sample_dirichlet(ones_s, rng));
    t.pi_o.push_back(sample_dirichlet(ones_o, rng));
  }
  auto ordered_block = [&](bool reversed) {
    std::vector<double> u(C);
    for (auto& v : u) v = sample_normal(h.mu, h.sigma, rng);
    return sigmoid_ord(u, reversed);
  };
  t.omega = ordered_block(false);
  t.kappa.resize(C);
  for (auto& k : t.kappa) k = 2.0 + sample_gamma(h.k, h.eta, rng);
  t.delta = ordered_block(true);
  t.b = ordered_block(true);
  return t;
}

}  // namespace ordint
