#pragma once

// The ordint command-line tool. Options come from flags and an optional
// TOML or JSON config file (flags win); ORDINT_CONFIG names a default file.
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 sampler failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ordint/data.hpp"
#include "ordint/eval.hpp"
#include "ordint/infer.hpp"
#include "ordint/model.hpp"
#include "ordint/timeseries.hpp"

namespace ordint::cli {

inline constexpr const char* kConfigEnv = "ORDINT_CONFIG";

// Reads config files written as JSON objects; nested objects address
// subcommand sections, arrays give multi-valued options.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_configurable() && !opt->get_lnames().empty()) {
        const auto& res = opt->results();
        if (!res.empty()) {
          j[opt->get_lnames().front()] = res.size() == 1 ? nlohmann::json(res.front()) : nlohmann::json(res);
        } else if (default_also && !opt->get_default_str().empty()) {
          j[opt->get_lnames().front()] = opt->get_default_str();
        }
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config JSON must be an object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const nlohmann::json& obj, std::vector<std::string> parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, v] : obj.items()) {
      if (v.is_null()) continue;
      if (v.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(v, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array()) {
        for (const auto& e : v) item.inputs.push_back(scalar(e));
      } else {
        item.inputs.push_back(scalar(v));
      }
      items.push_back(std::move(item));
    }
  }
};

struct Options {
  std::string input;
  std::string output;
  std::uint64_t seed = 1;
  Hyperparams hyper;
  SamplerConfig sampler;
  std::vector<std::string> sites;
  std::vector<std::string> locations;
  std::size_t folds = 24;
  std::size_t max_lag = 6;
  std::size_t workers = 0;  // 0 means one per hardware thread

  // ingest
  std::string mapping;
  std::string report;
  // fit
  std::string diagnostics;
  // score, correlate
  std::string posterior;
  // impute, select-c
  std::string baselines = "naive,prior,lr";
  double train_fraction = 0.7;
  std::optional<std::uint64_t> split_seed;
  std::string summary;
  std::size_t c_min = 3, c_max = 7, n_seeds = 5;
  // correlate
  std::vector<std::string> external;
  // simulate
  std::size_t events = 1000;
  std::string truth = "separated";
  std::string labels;
  std::size_t n_locations = 3;
  std::size_t n_months = 48;
};

namespace detail {

class Output {
 public:
  explicit Output(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw ConfigError("cannot write '" + path + "'");
      out_ = file_.get();
    }
  }
  std::ostream& operator*() { return *out_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_;
};

inline std::ifstream open_in(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing --") + what);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return in;
}

inline std::vector<EventTuple> load_tuples(const Options& o) {
  auto in = open_in(o.input, "input");
  auto t = read_tuples(in);
  if (t.empty()) throw DataError("no tuples in '" + o.input + "'");
  return t;
}

inline void write_provenance(std::ostream& out, const nlohmann::json& prov) {
  out << "# ordint " << prov.value("command", "") << '\n';
  out << "# provenance: " << prov.dump() << '\n';
}

inline std::vector<Site> parse_sites(const std::vector<std::string>& names) {
  if (names.empty() || (names.size() == 1 && names.front() == "all"))
    return {kAllSites.begin(), kAllSites.end()};
  std::vector<Site> out;
  for (const auto& n : names) out.push_back(site_from_string(n));
  return out;
}

inline std::set<std::string> parse_list(const std::string& s) {
  std::set<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!csv::trim(item).empty()) out.insert(csv::trim(item));
  return out;
}

inline std::string fmt_opt(double v) { return std::isfinite(v) ? csv::fmt(v) : ""; }

}  // namespace detail

class Runner {
 public:
  Runner(Options o, std::ostream& out, std::ostream& err, std::string command)
      : o_(std::move(o)), out_(out), err_(err), command_(std::move(command)) {
    o_.sampler.seed = o_.seed;
    o_.sampler.workers = o_.workers > 0 ? o_.workers
                                        : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    o_.hyper.validate();
    o_.sampler.validate();
  }

  nlohmann::json provenance(nlohmann::json extra = nlohmann::json::object()) const {
    nlohmann::json p = {{"command", command_},
                        {"seed", o_.seed},
                        {"hyper", o_.hyper},
                        {"sampler", o_.sampler},
                        {"input", o_.input}};
    for (const auto& [k, v] : extra.items()) p[k] = v;
    return p;
  }

  int ingest() {
    MappingTables tables;
    ColumnMap cols;
    if (!o_.mapping.empty()) {
      auto in = detail::open_in(o_.mapping, "mapping");
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mapping JSON: ") + e.what());
      }
      tables = MappingTables::from_json(j);
      if (j.contains("columns")) cols = ColumnMap::from_json(j.at("columns"));
    }
    auto in = detail::open_in(o_.input, "input");
    const auto loaded = load_raw(in, cols, tables);
    std::vector<EventTuple> tuples;
    std::vector<SkippedRow> skipped = loaded.report.skipped;
    for (std::size_t i = 0; i < loaded.records.size(); ++i) {
      try {
        tuples.push_back(make_event_tuple(loaded.records[i], tables.actors, tables.goldstein));
      } catch (const DataError& e) {
        skipped.push_back({0, std::string("record ") + std::to_string(i + 1) + ": " + e.what()});
      }
    }
    detail::Output out(o_.output, out_);
    detail::write_provenance(*out, provenance({{"mapping", o_.mapping}}));
    write_tuples(*out, tuples);
    nlohmann::json rep = {{"kept", tuples.size()},
                          {"skipped", skipped.size()},
                          {"missing_casualties", loaded.report.missing_casualties},
                          {"rows", nlohmann::json::array()}};
    for (const auto& s : skipped) rep["rows"].push_back({{"line", s.line}, {"reason", s.reason}});
    if (!o_.report.empty()) {
      detail::Output r(o_.report, out_);
      *r << rep.dump(2) << '\n';
    }
    err_ << "ingest: kept " << tuples.size() << ", skipped " << skipped.size() << ", blank casualties read as 0: "
         << loaded.report.missing_casualties << '\n';
    return 0;
  }

  int fit() {
    if (o_.output.empty() || o_.output == "-") throw ConfigError("fit needs --output for the posterior file");
    const auto data = detail::load_tuples(o_);
    const auto post = sample_posterior(data, o_.hyper, o_.sampler);
    {
      detail::Output out(o_.output, out_);
      write_posterior(*out, post, provenance());
    }
    const std::string diag_path = o_.diagnostics.empty() ? o_.output + ".diagnostics.json" : o_.diagnostics;
    detail::Output d(diag_path, out_);
    nlohmann::json dj = post.diagnostics;
    dj["provenance"] = provenance();
    *d << dj.dump(2) << '\n';
    report_diagnostics(post.diagnostics);
    return 0;
  }

  int score() {
    const auto data = detail::load_tuples(o_);
    auto pin = detail::open_in(o_.posterior, "posterior");
    const auto post = read_posterior(pin);
    const auto est = score_events(post, data);
    detail::Output out(o_.output, out_);
    detail::write_provenance(*out, provenance({{"posterior", o_.posterior}, {"hyper", post.hyper}}));
    std::vector<std::string> header{"event", "location", "month", "zbar", "zdot"};
    const std::size_t C = post.hyper.classes;
    for (std::size_t c = 1; c <= C; ++c) header.push_back("mass_" + std::to_string(c));
    csv::write_row(*out, header);
    for (std::size_t n = 0; n < est.size(); ++n) {
      std::vector<std::string> row{std::to_string(n + 1), data[n].location, to_string(data[n].month),
                                   csv::fmt(est[n].mean), std::to_string(est[n].mode)};
      for (double m : est[n].mass) row.push_back(csv::fmt(m));
      csv::write_row(*out, row);
    }
    return 0;
  }

  int impute() {
    const auto data = detail::load_tuples(o_);
    const auto [train, held] = split(data, o_.train_fraction, o_.split_seed.value_or(o_.seed));
    if (train.empty() || held.empty()) throw DataError("split left an empty train or held-out set");
    const auto sites = detail::parse_sites(o_.sites);
    const auto baselines = detail::parse_list(o_.baselines);
    for (const auto& b : baselines)
      if (b != "naive" && b != "prior" && b != "lr") throw ConfigError("unknown baseline '" + b + "'");
    const auto post = sample_posterior(train, o_.hyper, o_.sampler);
    report_diagnostics(post.diagnostics);
    const std::size_t T = o_.sampler.draws * o_.sampler.chains;
    std::vector<ParamsConstrained> prior;
    if (baselines.count("prior")) prior = baseline_prior(o_.hyper, T, o_.seed);

    std::vector<ImputationResult> results;
    for (Site s : sites) {
      results.push_back(ordint::impute(post, held, s));
      if (baselines.count("naive")) {
        const auto naive = baseline_naive(train, s, o_.hyper, o_.sampler);
        results.push_back(impute_naive(naive, held, s));
      }
      if (baselines.count("prior"))
        results.push_back(ordint::impute(std::span<const ParamsConstrained>(prior), held, s,
                                         SiteMask::all_but(s), "prior"));
      if (baselines.count("lr")) {
        LinearBaseline lr(train, s, o_.hyper.subject_classes, o_.hyper.object_classes);
        if (lr.fit().ridge)
          err_ << "impute: singular design for the " << to_string(s) << " regression; used ridge 1e-6\n";
        results.push_back(lr.evaluate(held));
      }
    }
    const auto prov = provenance({{"train_fraction", o_.train_fraction},
                                  {"split_seed", o_.split_seed.value_or(o_.seed)},
                                  {"train_events", train.size()},
                                  {"heldout_events", held.size()}});
    detail::Output out(o_.output, out_);
    detail::write_provenance(*out, prov);
    csv::write_row(*out, {"site", "method", "metric", "value", "sppd", "seed"});
    nlohmann::json summary = {{"provenance", prov}, {"results", nlohmann::json::array()}};
    for (const auto& r : results) {
      csv::write_row(*out, {std::string(to_string(r.site)), r.method, r.metric, csv::fmt(r.error),
                            r.sppd ? csv::fmt(*r.sppd) : "", std::to_string(o_.seed)});
      summary["results"].push_back({{"site", to_string(r.site)},
                                    {"method", r.method},
                                    {"metric", r.metric},
                                    {"value", r.error},
                                    {"sppd", r.sppd ? nlohmann::json(*r.sppd) : nlohmann::json()},
                                    {"zero_density", r.zero_density}});
    }
    if (!o_.summary.empty()) {
      detail::Output s(o_.summary, out_);
      *s << summary.dump(2) << '\n';
    }
    return 0;
  }

  int select_c() {
    if (o_.c_min < 1 || o_.c_max < o_.c_min) throw ConfigError("need 1 <= c-min <= c-max");
    if (o_.n_seeds < 1) throw ConfigError("need at least one seed");
    const auto data = detail::load_tuples(o_);
    const auto [train, held] = split(data, o_.train_fraction, o_.split_seed.value_or(o_.seed));
    std::vector<std::size_t> Cs;
    for (std::size_t c = o_.c_min; c <= o_.c_max; ++c) Cs.push_back(c);
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < o_.n_seeds; ++i) seeds.push_back(o_.seed + i);
    const auto rows = select_C(train, held, o_.hyper, Cs, seeds, o_.sampler);
    detail::Output out(o_.output, out_);
    detail::write_provenance(*out, provenance({{"c_min", o_.c_min},
                                               {"c_max", o_.c_max},
                                               {"seeds", seeds},
                                               {"train_fraction", o_.train_fraction},
                                               {"split_seed", o_.split_seed.value_or(o_.seed)}}));
    csv::write_row(*out, {"classes", "sppd_mean", "sppd_sd", "fits", "failures"});
    for (const auto& r : rows) {
      for (const auto& f : r.failures) err_ << "select-c: C=" << r.classes << " " << f << '\n';
      csv::write_row(*out, {std::to_string(r.classes), r.values.empty() ? "" : csv::fmt(r.mean),
                            r.values.empty() ? "" : csv::fmt(r.sd), std::to_string(r.values.size()),
                            std::to_string(r.failures.size())});
    }
    return 0;
  }

  int forecast() {
    const auto data = detail::load_tuples(o_);
    const auto locations = chosen_locations(data);
    detail::Output out(o_.output, out_);
    detail::write_provenance(*out, provenance({{"folds", o_.folds}, {"max_lag", o_.max_lag}}));
    csv::write_row(*out, {"location", "experiment", "metric", "value"});
    auto [values_p, values_q, locs, months] = columns(data);
    for (const auto& loc : locations) {
      const auto z = ts::leakage_safe_z(data, loc, o_.hyper, o_.sampler);
      const auto p = ts::aggregate_monthly(values_p, locs, months, loc, ts::SeriesKind::predicate);
      const auto q = ts::aggregate_monthly(values_q, locs, months, loc, ts::SeriesKind::quantifier);
      const std::map<std::string, std::vector<double>> d = {
          {"p", ts::difference(p.values)}, {"q", ts::difference(q.values)}, {"z", ts::difference(z.series.values)}};
      auto row = [&](const std::string& exp, const std::string& metric, double v) {
        csv::write_row(*out, {loc, exp, metric, detail::fmt_opt(v)});
      };
      for (const auto& [name, series] : d) {
        const auto adf = ts::adf_test(series);
        row("adf:" + name, "statistic", adf.statistic);
        row("adf:" + name, "stationary", adf.stationary ? 1.0 : 0.0);
      }
      for (const std::string target : {"p", "q"}) {
        const std::string other = target == "p" ? "q" : "p";
        const std::vector<std::vector<double>> ar{d.at(target)};
        row(target + "->" + target, "mse", ts::forecast_cv(ar, 0, o_.folds, o_.max_lag));
        for (const std::string& extra : {other, std::string("z")}) {
          const std::vector<std::vector<double>> var{d.at(target), d.at(extra)};
          const std::string exp = target + "," + extra + "->" + target;
          row(exp, "mse", ts::forecast_cv(var, 0, o_.folds, o_.max_lag));
          const auto lag = ts::fit_var(var, o_.max_lag).lag;
          const auto g = ts::granger_test(d.at(extra), d.at(target), lag);
          row(exp, "granger_p", g.p_value);
          row(exp, "lag", static_cast<double>(lag));
        }
      }
    }
    return 0;
  }

  int correlate() {
    const auto data = detail::load_tuples(o_);
    if (o_.locations.size() != 1) throw ConfigError("correlate needs exactly one --location");
    const std::string loc = o_.locations.front();
    PosteriorSamples post;
    if (!o_.posterior.empty()) {
      auto pin = detail::open_in(o_.posterior, "posterior");
      post = read_posterior(pin);
    } else {
      post = sample_posterior(data, o_.hyper, o_.sampler);
    }
    const auto est = score_events(post, data);
    auto [values_p, values_q, locs, months] = columns(data);
    std::vector<double> zbar;
    for (const auto& e : est) zbar.push_back(e.mean);
    std::vector<std::pair<std::string, ts::IntensitySeries>> series;
    series.emplace_back("p", ts::aggregate_monthly(values_p, locs, months, loc, ts::SeriesKind::predicate));
    series.emplace_back("q", ts::aggregate_monthly(values_q, locs, months, loc, ts::SeriesKind::quantifier));
    series.emplace_back("z", ts::aggregate_monthly(zbar, locs, months, loc, ts::SeriesKind::latent));
    for (const auto& spec : o_.external) {
      const auto eq = spec.find('=');
      const std::string name = eq == std::string::npos ? "external" + std::to_string(series.size() - 2)
                                                       : spec.substr(0, eq);
      const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
      auto in = detail::open_in(path, "external");
      series.emplace_back(name, ts::read_series(in, name));
    }
    int lo = series.front().second.start.index(), hi = lo + static_cast<int>(series.front().second.size());
    for (const auto& [name, s] : series) {
      lo = std::max(lo, s.start.index());
      hi = std::min(hi, s.start.index() + static_cast<int>(s.size()));
    }
    if (hi - lo < 3) throw DataError("series overlap is shorter than 3 months");
    auto window = [&](const ts::IntensitySeries& s) {
      const auto off = static_cast<std::ptrdiff_t>(lo - s.start.index());
      return std::vector<double>(s.values.begin() + off, s.values.begin() + off + (hi - lo));
    };
    detail::Output out(o_.output, out_);
    detail::write_provenance(*out, provenance({{"location", loc},
                                               {"external", o_.external},
                                               {"posterior", o_.posterior},
                                               {"first_month", to_string(YearMonth::from_index(lo))},
                                               {"months", hi - lo}}));
    std::vector<std::string> header{"series"};
    for (const auto& [name, s] : series) header.push_back(name);
    csv::write_row(*out, header);
    for (const auto& [a, sa] : series) {
      std::vector<std::string> row{a};
      for (const auto& [b, sb] : series) {
        const auto c = ts::pearson(window(sa), window(sb));
        row.push_back(c.defined ? csv::fmt(c.r) : "");
      }
      csv::write_row(*out, row);
    }
    return 0;
  }

  int simulate() {
    if (o_.events < 1) throw ConfigError("events must be at least 1");
    if (o_.n_locations < 1 || o_.n_months < 1) throw ConfigError("locations and months must be at least 1");
    Rng rng(o_.seed);
    ParamsConstrained truth;
    if (o_.truth == "separated") {
      truth = separated_params(o_.hyper.classes, o_.hyper.subject_classes, o_.hyper.object_classes);
    } else if (o_.truth == "prior") {
      truth = sample_prior(o_.hyper, rng);
    } else {
      throw ConfigError("truth must be 'separated' or 'prior'");
    }
    auto sim = generate(truth, o_.events, rng);
    std::uniform_int_distribution<std::size_t> loc(1, o_.n_locations), month(0, o_.n_months - 1);
    for (auto& e : sim.tuples) {
      e.location = "L" + std::to_string(loc(rng));
      e.month = YearMonth::from_index(YearMonth{2000, 1}.index() + static_cast<int>(month(rng)));
    }
    const auto prov = provenance({{"truth", truth}, {"truth_kind", o_.truth}, {"events", o_.events}});
    {
      detail::Output out(o_.output, out_);
      detail::write_provenance(*out, prov);
      write_tuples(*out, sim.tuples);
    }
    std::string labels = o_.labels;
    if (labels.empty() && !o_.output.empty() && o_.output != "-") labels = o_.output + ".labels.csv";
    if (!labels.empty()) {
      detail::Output l(labels, out_);
      detail::write_provenance(*l, prov);
      csv::write_row(*l, {"event", "label"});
      for (std::size_t n = 0; n < sim.labels.size(); ++n)
        csv::write_row(*l, {std::to_string(n + 1), std::to_string(sim.labels[n] + 1)});
    }
    return 0;
  }

 private:
  void report_diagnostics(const Diagnostics& d) {
    err_ << "sampler: " << d.divergences << " divergences, mean accept " << d.mean_accept << ", max R-hat "
         << d.max_rhat << ", min bulk ESS " << d.min_ess << '\n';
    for (const auto& n : d.notices) err_ << "sampler: " << n << '\n';
  }

  std::vector<std::string> chosen_locations(const std::vector<EventTuple>& data) const {
    std::set<std::string> present;
    for (const auto& e : data) present.insert(e.location);
    if (o_.locations.empty()) return {present.begin(), present.end()};
    for (const auto& l : o_.locations)
      if (!present.count(l)) throw DataError("location '" + l + "' not in data");
    return o_.locations;
  }

  static std::tuple<std::vector<double>, std::vector<double>, std::vector<std::string>, std::vector<YearMonth>>
  columns(const std::vector<EventTuple>& data) {
    std::vector<double> p, q;
    std::vector<std::string> l;
    std::vector<YearMonth> m;
    for (const auto& e : data) {
      p.push_back(e.predicate);
      q.push_back(static_cast<double>(e.quantifier));
      l.push_back(e.location);
      m.push_back(e.month);
    }
    return {p, q, l, m};
  }

  Options o_;
  std::ostream& out_;
  std::ostream& err_;
  std::string command_;
};

// Chooses the config reader from the file extension before parsing.
inline std::string config_path(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  if (const char* env = std::getenv(kConfigEnv)) return env;
  return {};
}

inline int exit_code(ErrorKind k) { return static_cast<int>(k); }

inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Ordinal latent intensity model for conflict event data", "ordint"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;

  const std::string cfg = config_path(argc, argv);
  if (cfg.size() >= 5 && cfg.compare(cfg.size() - 5, 5, ".json") == 0)
    app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "TOML or JSON config file; flags override it")->envname(kConfigEnv);

  app.add_option("--input", o.input, "Input file");
  app.add_option("--output", o.output, "Output file ('-' or omitted for standard output)");
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--classes", o.hyper.classes, "Number of latent intensity classes")->capture_default_str();
  app.add_option("--mu", o.hyper.mu, "Ordered Normal location")->capture_default_str();
  app.add_option("--sigma", o.hyper.sigma, "Ordered Normal scale")->capture_default_str();
  app.add_option("--kappa-shape", o.hyper.k, "Gamma shape for concentrations")->capture_default_str();
  app.add_option("--kappa-rate", o.hyper.eta, "Gamma rate for concentrations")->capture_default_str();
  app.add_option("--draws", o.sampler.draws, "Retained draws per chain")->capture_default_str();
  app.add_option("--warmup", o.sampler.warmup, "Warmup iterations per chain")->capture_default_str();
  app.add_option("--chains", o.sampler.chains, "Number of chains")->capture_default_str();
  app.add_option("--target-accept", o.sampler.target_accept, "Target acceptance rate")->capture_default_str();
  app.add_option("--max-depth", o.sampler.max_tree_depth, "Maximum tree depth")->capture_default_str();
  app.add_option("--workers", o.workers, "Concurrent chains (0: one per hardware thread)")->capture_default_str();
  app.add_option("--site", o.sites, "Site(s): subject, predicate, quantifier, object or all");
  app.add_option("--location", o.locations, "Location id(s)");
  app.add_option("--folds", o.folds, "Forecast cross-validation folds")->capture_default_str();
  app.add_option("--max-lag", o.max_lag, "Largest AR/VAR lag considered")->capture_default_str();
  app.add_option("--posterior", o.posterior, "Posterior JSON-lines file from fit");
  app.add_option("--train-fraction", o.train_fraction, "Training share of the split")->capture_default_str();
  app.add_option("--split-seed", o.split_seed, "Seed of the train/held-out split (default: --seed)");

  auto* ingest = app.add_subcommand("ingest", "Raw event CSV to canonical tuples");
  ingest->add_option("--mapping", o.mapping, "JSON with actors, goldstein and columns overrides");
  ingest->add_option("--report", o.report, "Skip report JSON path");
  auto* fit = app.add_subcommand("fit", "Sample the posterior");
  fit->add_option("--diagnostics", o.diagnostics, "Diagnostics JSON path (default: <output>.diagnostics.json)");
  app.add_subcommand("score", "Per-event intensity scores");
  auto* impute = app.add_subcommand("impute", "Held-out site imputation against baselines");
  impute->add_option("--baselines", o.baselines, "Comma-separated subset of naive,prior,lr")->capture_default_str();
  impute->add_option("--summary", o.summary, "JSON summary path");
  auto* select = app.add_subcommand("select-c", "Held-out SPPD across class counts");
  select->add_option("--c-min", o.c_min, "Smallest class count")->capture_default_str();
  select->add_option("--c-max", o.c_max, "Largest class count")->capture_default_str();
  select->add_option("--seeds", o.n_seeds, "Seeds per class count")->capture_default_str();
  app.add_subcommand("forecast", "AR/VAR forecasting and Granger tests per location");
  auto* correlate = app.add_subcommand("correlate", "Pearson correlations of monthly series");
  correlate->add_option("--external", o.external, "External series as name=path (month,value CSV)");
  auto* simulate = app.add_subcommand("simulate", "Synthetic tuples with true labels");
  simulate->add_option("--events", o.events, "Number of events")->capture_default_str();
  simulate->add_option("--truth", o.truth, "separated or prior")->capture_default_str();
  simulate->add_option("--labels", o.labels, "Labels CSV path (default: <output>.labels.csv)");
  simulate->add_option("--locations", o.n_locations, "Number of locations")->capture_default_str();
  simulate->add_option("--months", o.n_months, "Number of months")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "ordint: " << e.what() << '\n';
    return exit_code(ErrorKind::config);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Runner r(o, out, err, command);
    if (command == "ingest") return r.ingest();
    if (command == "fit") return r.fit();
    if (command == "score") return r.score();
    if (command == "impute") return r.impute();
    if (command == "select-c") return r.select_c();
    if (command == "forecast") return r.forecast();
    if (command == "correlate") return r.correlate();
    return r.simulate();
  } catch (const Error& e) {
    err << "ordint " << command << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "ordint " << command << ": " << e.what() << '\n';
    return exit_code(ErrorKind::data);
  }
}

}  // namespace ordint::cli
