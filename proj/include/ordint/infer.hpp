#pragma once

// Posterior sampling for the ordinal model: independent NUTS chains over the
// unconstrained parameters, diagnostics, event scoring and the JSON-lines
// posterior dump.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <mutex>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ordint/diagnostics.hpp"
#include "ordint/error.hpp"
#include "ordint/model.hpp"
#include "ordint/nuts.hpp"

namespace ordint {

struct SamplerConfig {
  std::size_t draws = 1000;
  std::size_t warmup = 200;
  std::size_t chains = 4;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 0;
  std::size_t workers = 1;  // chains run at most this many at a time

  void validate() const {
    if (draws < 1) throw ConfigError("draws must be at least 1");
    if (chains < 1) throw ConfigError("chains must be at least 1");
    if (!(target_accept > 0.0 && target_accept < 1.0))
      throw ConfigError("target_accept must lie in (0,1)");
    if (max_tree_depth < 1 || max_tree_depth > 30) throw ConfigError("max_tree_depth must lie in [1,30]");
    if (workers < 1) throw ConfigError("workers must be at least 1");
  }

  nuts::Config nuts() const {
    nuts::Config c;
    c.draws = draws;
    c.warmup = warmup;
    c.target_accept = target_accept;
    c.max_depth = max_tree_depth;
    return c;
  }
};

// workers is left out on purpose: it never changes the draws.
inline void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = {{"draws", c.draws},
       {"warmup", c.warmup},
       {"chains", c.chains},
       {"target_accept", c.target_accept},
       {"max_tree_depth", c.max_tree_depth},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SamplerConfig& c) {
  c = SamplerConfig{};
  c.draws = j.value("draws", c.draws);
  c.warmup = j.value("warmup", c.warmup);
  c.chains = j.value("chains", c.chains);
  c.target_accept = j.value("target_accept", c.target_accept);
  c.max_tree_depth = j.value("max_tree_depth", c.max_tree_depth);
  c.seed = j.value("seed", c.seed);
}

namespace nuts {

inline void to_json(nlohmann::json& j, const TransitionStats& s) {
  j = {{"accept_stat", s.accept_stat}, {"tree_depth", s.tree_depth}, {"n_leapfrog", s.n_leapfrog},
       {"divergent", s.divergent},     {"energy", s.energy},         {"lp", s.lp},
       {"step_size", s.step_size}};
}

inline void from_json(const nlohmann::json& j, TransitionStats& s) {
  s.accept_stat = j.value("accept_stat", 0.0);
  s.tree_depth = j.value("tree_depth", 0);
  s.n_leapfrog = j.value("n_leapfrog", 0);
  s.divergent = j.value("divergent", false);
  s.energy = j.value("energy", 0.0);
  s.lp = j.value("lp", 0.0);
  s.step_size = j.value("step_size", 0.0);
}

}  // namespace nuts

struct Diagnostics {
  std::vector<diag::ParamSummary> params;  // one per unconstrained coordinate
  std::size_t divergences = 0;             // post-warmup
  double divergence_rate = 0.0;
  double mean_accept = 0.0;
  double max_rhat = diag::kNaN;
  double min_ess = diag::kNaN;
  std::size_t invariant_violations = 0;  // retained draws failing ParamsConstrained::validate
  std::vector<double> step_sizes;        // per chain
  std::vector<std::string> notices;
};

inline nlohmann::json to_json_value(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline void to_json(nlohmann::json& j, const Diagnostics& d) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : d.params)
    params.push_back({{"name", p.name},
                      {"mean", p.mean},
                      {"sd", p.sd},
                      {"q05", p.q05},
                      {"q50", p.q50},
                      {"q95", p.q95},
                      {"rhat", to_json_value(p.rhat)},
                      {"ess_bulk", to_json_value(p.ess_bulk)},
                      {"flagged", p.flagged}});
  j = {{"divergences", d.divergences},
       {"divergence_rate", d.divergence_rate},
       {"mean_accept", d.mean_accept},
       {"max_rhat", to_json_value(d.max_rhat)},
       {"min_ess_bulk", to_json_value(d.min_ess)},
       {"invariant_violations", d.invariant_violations},
       {"step_sizes", d.step_sizes},
       {"notices", d.notices},
       {"params", params}};
}

struct PosteriorSamples {
  Hyperparams hyper;
  SamplerConfig config;
  std::vector<ParamsConstrained> thetas;
  std::vector<std::vector<double>> unconstrained;
  std::vector<std::size_t> chain;  // chain index of each draw
  std::vector<nuts::TransitionStats> stats;
  Diagnostics diagnostics;

  std::size_t size() const { return thetas.size(); }
  bool empty() const { return thetas.empty(); }
};

// Starting point: ordered coordinates from their prior, simplexes at the
// flat point, kappa = 3.
inline std::vector<double> initial_point(const Hyperparams& h, Rng& rng) {
  const Layout L(h);
  std::vector<double> x(L.dim(), 0.0);
  for (std::size_t off : {L.omega(), L.delta(), L.b()})
    for (std::size_t c = 0; c < L.C; ++c) x[off + c] = sample_normal(h.mu, h.sigma, rng);
  return x;
}

inline Rng chain_rng(std::uint64_t seed, std::size_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain)};
  return Rng(seq);
}

// Runs independent chains of any target, at most `workers` at a time.
template <class Target, class Init>
std::vector<nuts::ChainResult> run_chains(const Target& target, Init init, const SamplerConfig& cfg,
                                          typename nuts::Sampler<Target>::Namer namer = {}) {
  cfg.validate();
  std::vector<nuts::ChainResult> results(cfg.chains);
  std::vector<std::exception_ptr> errors(cfg.chains);
  auto one = [&](std::size_t c) {
    try {
      Rng rng = chain_rng(cfg.seed, c);
      std::vector<double> x0 = init(rng);
      nuts::Sampler<Target> s(target, std::move(x0), cfg.nuts(), rng, namer);
      results[c] = s.run();
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (cfg.workers <= 1 || cfg.chains == 1) {
    for (std::size_t c = 0; c < cfg.chains; ++c) one(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(cfg.workers, cfg.chains); ++w)
      pool.emplace_back([&] {
        for (std::size_t c; (c = next.fetch_add(1)) < cfg.chains;) one(c);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

inline Diagnostics diagnose(const std::vector<nuts::ChainResult>& chains, const Layout& L) {
  Diagnostics d;
  const std::size_t dim = L.dim();
  std::size_t total = 0;
  double accept = 0.0;
  for (const auto& ch : chains) {
    d.step_sizes.push_back(ch.step_size);
    for (const auto& s : ch.stats) {
      d.divergences += s.divergent ? 1 : 0;
      accept += s.accept_stat;
      ++total;
    }
  }
  d.divergence_rate = total ? static_cast<double>(d.divergences) / static_cast<double>(total) : 0.0;
  d.mean_accept = total ? accept / static_cast<double>(total) : 0.0;
  if (chains.size() < 2) d.notices.push_back("R-hat omitted: needs at least two chains");
  if (d.divergence_rate > 0.10)
    d.notices.push_back("warning: " + std::to_string(d.divergences) +
                        " divergent transitions after warmup (more than 10%)");
  for (std::size_t i = 0; i < dim; ++i) {
    diag::Chains per(chains.size());
    for (std::size_t c = 0; c < chains.size(); ++c) {
      per[c].reserve(chains[c].draws.size());
      for (const auto& x : chains[c].draws) per[c].push_back(x[i]);
    }
    auto s = diag::summarize(L.name(i), per);
    if (chains.size() < 2) s.flagged = std::isnan(s.ess_bulk);
    if (!std::isnan(s.rhat) && !(s.rhat <= d.max_rhat)) d.max_rhat = s.rhat;
    if (!std::isnan(s.ess_bulk) && !(s.ess_bulk >= d.min_ess)) d.min_ess = s.ess_bulk;
    d.params.push_back(std::move(s));
  }
  return d;
}

inline PosteriorSamples sample_posterior(std::span<const EventTuple> data, const Hyperparams& hyper,
                                         const SamplerConfig& cfg,
                                         SiteMask sites = SiteMask::all()) {
  if (data.empty()) throw DataError("cannot fit an empty data set");
  cfg.validate();
  const ModelDensity density(data, hyper, sites);
  const Layout L(hyper);
  auto chains = run_chains(
      density, [&](Rng& rng) { return initial_point(hyper, rng); }, cfg,
      [L](std::size_t i) { return L.name(i); });

  PosteriorSamples out;
  out.hyper = hyper;
  out.config = cfg;
  out.diagnostics = diagnose(chains, L);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t t = 0; t < chains[c].draws.size(); ++t) {
      auto theta = constrain(chains[c].draws[t], hyper);
      try {
        theta.validate();
      } catch (const DomainError&) {
        ++out.diagnostics.invariant_violations;
      }
      out.thetas.push_back(std::move(theta));
      out.unconstrained.push_back(std::move(chains[c].draws[t]));
      out.chain.push_back(c);
      out.stats.push_back(chains[c].stats[t]);
    }
  }
  if (out.diagnostics.invariant_violations > 0)
    out.diagnostics.notices.push_back(
        "warning: " + std::to_string(out.diagnostics.invariant_violations) +
        " draws violate ordering or simplex invariants (numerical saturation)");
  return out;
}

// Element-wise posterior mean; ordering and simplex constraints survive
// averaging because they are convex.
inline ParamsConstrained posterior_mean(const PosteriorSamples& s) {
  if (s.empty()) throw DataError("no posterior draws");
  ParamsConstrained m = s.thetas.front();
  auto zero = [](auto& v) { std::fill(v.begin(), v.end(), 0.0); };
  zero(m.pi_z), zero(m.omega), zero(m.kappa), zero(m.delta), zero(m.b);
  for (auto& r : m.pi_s) zero(r);
  for (auto& r : m.pi_o) zero(r);
  const double w = 1.0 / static_cast<double>(s.size());
  auto acc = [w](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
  };
  for (const auto& t : s.thetas) {
    acc(m.pi_z, t.pi_z), acc(m.omega, t.omega), acc(m.kappa, t.kappa);
    acc(m.delta, t.delta), acc(m.b, t.b);
    for (std::size_t c = 0; c < m.pi_s.size(); ++c) acc(m.pi_s[c], t.pi_s[c]), acc(m.pi_o[c], t.pi_o[c]);
  }
  return m;
}

struct IntensityEstimate {
  double mean = 1.0;       // in [1, C]
  std::size_t mode = 1;    // 1-based class
  std::vector<double> mass;
};

// Averages a per-draw class distribution into an estimate; ties in the mode
// go to the smallest class.
inline IntensityEstimate summarize_mass(std::vector<double> mass) {
  IntensityEstimate e;
  double total = 0.0;
  for (double v : mass) total += v;
  for (auto& v : mass) v /= total;
  e.mean = 0.0;
  std::size_t best = 0;
  for (std::size_t c = 0; c < mass.size(); ++c) {
    e.mean += static_cast<double>(c + 1) * mass[c];
    if (mass[c] > mass[best]) best = c;
  }
  e.mode = best + 1;
  e.mass = std::move(mass);
  return e;
}

inline std::vector<IntensityEstimate> score_events(std::span<const ParamsConstrained> thetas,
                                                   std::span<const EventTuple> data,
                                                   SiteMask mask = SiteMask::all()) {
  if (thetas.empty()) throw DataError("no posterior draws to score with");
  std::vector<ClassTerms> terms;
  terms.reserve(thetas.size());
  for (const auto& t : thetas) terms.emplace_back(t);
  const std::size_t C = thetas.front().classes();
  std::vector<IntensityEstimate> out;
  out.reserve(data.size());
  for (const auto& e : data) {
    std::vector<double> mass(C, 0.0);
    for (const auto& ct : terms) {
      const auto r = responsibilities(ct, e, mask);
      for (std::size_t c = 0; c < C; ++c) mass[c] += r[c];
    }
    out.push_back(summarize_mass(std::move(mass)));
  }
  return out;
}

inline std::vector<IntensityEstimate> score_events(const PosteriorSamples& s,
                                                   std::span<const EventTuple> data,
                                                   SiteMask mask = SiteMask::all()) {
  return score_events(std::span<const ParamsConstrained>(s.thetas), data, mask);
}

inline constexpr int kPosteriorVersion = 1;

// JSON lines: a header, then one object per retained draw.
inline void write_posterior(std::ostream& out, const PosteriorSamples& s,
                            const nlohmann::json& provenance = nlohmann::json::object()) {
  nlohmann::json header = {{"type", "header"},
                           {"version", kPosteriorVersion},
                           {"hyper", s.hyper},
                           {"sampler", s.config},
                           {"provenance", provenance}};
  out << header.dump() << '\n';
  std::vector<std::size_t> per_chain(s.config.chains, 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    nlohmann::json line = {{"chain", s.chain[i]},
                           {"draw", per_chain[s.chain[i]]++},
                           {"theta", s.thetas[i]},
                           {"unconstrained", s.unconstrained[i]},
                           {"stats", s.stats[i]}};
    out << line.dump() << '\n';
  }
}

inline PosteriorSamples read_posterior(std::istream& in) {
  PosteriorSamples s;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("posterior line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_header) {
      if (j.value("type", "") != "header" || j.value("version", 0) != kPosteriorVersion)
        throw DataError("posterior file lacks a supported header");
      s.hyper = j.at("hyper").get<Hyperparams>();
      s.config = j.at("sampler").get<SamplerConfig>();
      have_header = true;
      continue;
    }
    try {
      s.thetas.push_back(j.at("theta").get<ParamsConstrained>());
      s.unconstrained.push_back(j.at("unconstrained").get<std::vector<double>>());
      s.chain.push_back(j.at("chain").get<std::size_t>());
      s.stats.push_back(j.value("stats", nlohmann::json::object()).get<nuts::TransitionStats>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("posterior line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw DataError("empty posterior file");
  if (s.thetas.empty()) throw DataError("posterior file has no draws");
  return s;
}

}  // namespace ordint
