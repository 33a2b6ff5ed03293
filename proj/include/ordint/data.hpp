#pragma once

// Event ingestion: CAMEO-coded records to model-ready (subject, predicate,
// quantifier, object) tuples.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ordint/csv.hpp"
#include "ordint/error.hpp"

namespace ordint {

enum class ActorClass : std::uint8_t { civilian = 0, military = 1, governmental = 2, political = 3 };

inline constexpr std::size_t kActorClasses = 4;

inline std::string_view to_string(ActorClass a) {
  switch (a) {
    case ActorClass::civilian: return "civilian";
    case ActorClass::military: return "military";
    case ActorClass::governmental: return "governmental";
    case ActorClass::political: return "political";
  }
  return "unknown";
}

inline std::optional<ActorClass> actor_class_from_string(std::string_view s) {
  if (s == "civilian") return ActorClass::civilian;
  if (s == "military") return ActorClass::military;
  if (s == "governmental" || s == "government") return ActorClass::governmental;
  if (s == "political") return ActorClass::political;
  return std::nullopt;
}

struct YearMonth {
  int year = 1970;
  int month = 1;  // 1..12

  // Months since year 0; consecutive months differ by one.
  int index() const { return year * 12 + (month - 1); }
  static YearMonth from_index(int idx) { return {idx / 12, idx % 12 + 1}; }

  friend auto operator<=>(const YearMonth& a, const YearMonth& b) {
    return a.index() <=> b.index();
  }
  friend bool operator==(const YearMonth&, const YearMonth&) = default;
};

inline std::string to_string(YearMonth m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", m.year, m.month);
  return buf;
}

namespace detail {

inline std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

// Accepts YYYY-MM-DD, YYYY-MM, YYYY/MM/DD and M/D/YYYY.
inline std::optional<YearMonth> parse_month(std::string_view s) {
  auto valid = [](long long y, long long m) -> std::optional<YearMonth> {
    if (y < 1 || y > 9999 || m < 1 || m > 12) return std::nullopt;
    return YearMonth{static_cast<int>(y), static_cast<int>(m)};
  };
  for (char sep : {'-', '/'}) {
    auto p1 = s.find(sep);
    if (p1 == std::string_view::npos) continue;
    auto p2 = s.find(sep, p1 + 1);
    auto first = detail::parse_int(s.substr(0, p1));
    auto second = detail::parse_int(
        s.substr(p1 + 1, p2 == std::string_view::npos ? std::string_view::npos : p2 - p1 - 1));
    if (!first || !second) return std::nullopt;
    if (p1 == 4) return valid(*first, *second);
    if (sep == '/' && p2 != std::string_view::npos) {
      auto third = detail::parse_int(s.substr(p2 + 1));
      if (third) return valid(*third, *first);
    }
    return std::nullopt;
  }
  return std::nullopt;
}

struct RawEventRecord {
  int action_code = 0;
  std::string actor_code;
  std::string target_code;
  long long fatalities = 0;
  long long wounded = 0;
  std::string location;
  YearMonth date;
};

struct EventTuple {
  ActorClass subject = ActorClass::civilian;
  double predicate = 0.5;   // in (0,1), 1 most conflictual
  long long quantifier = 0; // casualties
  ActorClass object = ActorClass::civilian;
  std::string location;
  YearMonth month;
};

using ActorClassMap = std::map<std::string, ActorClass>;
using GoldsteinMap = std::map<int, double>;

// Generic CAMEO actor types and their 4-class grouping.
inline const ActorClassMap& default_actor_map() {
  static const ActorClassMap table = {
      {"REB", ActorClass::military},     {"MIL", ActorClass::military},
      {"GOV", ActorClass::governmental}, {"ETH", ActorClass::civilian},
      {"REL", ActorClass::civilian},     {"COP", ActorClass::military},
      {"JUD", ActorClass::political},    {"OPP", ActorClass::political},
      {"LLY", ActorClass::governmental}, {"ACT", ActorClass::political},
      {"NON", ActorClass::military},     {"SPY", ActorClass::military},
      {"UAF", ActorClass::military},     {"UNS", ActorClass::civilian},
      {"NGO", ActorClass::political},    {"BUS", ActorClass::civilian},
      {"CVL", ActorClass::civilian},     {"IND", ActorClass::civilian},
      {"EDU", ActorClass::civilian},     {"STU", ActorClass::civilian},
      {"YTH", ActorClass::civilian},     {"ELI", ActorClass::civilian},
      {"LAB", ActorClass::civilian},     {"LEG", ActorClass::political},
      {"PTY", ActorClass::political},    {"MED", ActorClass::civilian},
      {"REF", ActorClass::civilian},     {"IGO", ActorClass::political},
      {"NGM", ActorClass::political},    {"MNC", ActorClass::civilian},
      {"INT", ActorClass::political},    {"TOP", ActorClass::political},
      {"MID", ActorClass::political},    {"HAR", ActorClass::political},
      {"MOD", ActorClass::political},
  };
  return table;
}

// Goldstein value of each top-level CAMEO action category.
inline const GoldsteinMap& default_goldstein_map() {
  static const GoldsteinMap table = {
      {1, 0.0},   {2, 3.0},   {3, 4.0},   {4, 1.0},   {5, 3.5},
      {6, 6.0},   {7, 7.0},   {8, 5.0},   {9, -2.0},  {10, -5.0},
      {11, -2.0}, {12, -4.0}, {13, -6.0}, {14, -6.5}, {15, -7.2},
      {16, -4.0}, {17, -7.0}, {18, -9.0}, {19, -10.0}, {20, -10.0},
  };
  return table;
}

// Tables overridable from JSON: {"actors": {"REB": "military", ...},
// "goldstein": {"19": -10.0, ...}}. Missing keys keep the defaults.
struct MappingTables {
  ActorClassMap actors = default_actor_map();
  GoldsteinMap goldstein = default_goldstein_map();

  static MappingTables from_json(const nlohmann::json& j) {
    MappingTables t;
    if (j.contains("actors")) {
      t.actors.clear();
      for (const auto& [code, cls] : j.at("actors").items()) {
        auto a = actor_class_from_string(cls.get<std::string>());
        if (!a) throw ConfigError("unknown actor class '" + cls.get<std::string>() + "'");
        t.actors[detail::upper(code)] = *a;
      }
    }
    if (j.contains("goldstein")) {
      t.goldstein.clear();
      for (const auto& [code, value] : j.at("goldstein").items()) {
        auto c = detail::parse_int(code);
        if (!c) throw ConfigError("bad action code '" + code + "' in goldstein table");
        t.goldstein[static_cast<int>(*c)] = value.get<double>();
      }
      if (t.goldstein.size() < 2) throw ConfigError("goldstein table needs at least two entries");
    }
    return t;
  }
};

struct UnmappableActor : DataError {
  explicit UnmappableActor(const std::string& code)
      : DataError("unmappable actor '" + code + "'") {}
};

inline ActorClass map_actor(std::string_view code, const ActorClassMap& table) {
  std::string c = detail::upper(csv::trim(std::string(code)));
  if (c.empty()) throw UnmappableActor(c);
  if (auto it = table.find(c.substr(0, 3)); it != table.end()) return it->second;
  if (c.size() >= 6) {
    if (auto it = table.find(c.substr(3, 3)); it != table.end()) return it->second;
  }
  if (auto it = table.find(c); it != table.end()) return it->second;
  throw UnmappableActor(c);
}

inline constexpr double kPredicateFloor = 1e-3;

// Rescale to [0,1] over the table's extrema, invert so 1 is most conflictual,
// and clamp away from the Beta support boundary.
inline double goldstein_to_predicate(int action_code, const GoldsteinMap& table) {
  auto it = table.find(action_code);
  if (it == table.end())
    throw DomainError("no Goldstein value for action code " + std::to_string(action_code));
  auto [lo, hi] = std::minmax_element(table.begin(), table.end(),
                                      [](auto& a, auto& b) { return a.second < b.second; });
  const double g_min = lo->second, g_max = hi->second;
  double p = 1.0 - (it->second - g_min) / (g_max - g_min);
  return std::clamp(p, kPredicateFloor, 1.0 - kPredicateFloor);
}

inline EventTuple make_event_tuple(const RawEventRecord& r, const ActorClassMap& actors,
                             const GoldsteinMap& goldstein) {
  if (r.fatalities < 0 || r.wounded < 0) throw DomainError("negative casualty count");
  EventTuple t;
  t.subject = map_actor(r.actor_code, actors);
  t.object = map_actor(r.target_code, actors);
  t.predicate = goldstein_to_predicate(r.action_code, goldstein);
  t.quantifier = r.fatalities + r.wounded;
  t.location = r.location;
  t.month = r.date;
  return t;
}

struct ColumnMap {
  std::string action = "verb10";
  std::string actor = "actor3";
  std::string actor_alt = "actor6";
  std::string target = "target3";
  std::string target_alt = "target6";
  std::string fatalities = "fatalities";
  std::string wounded = "wounded";
  std::string location = "location";
  std::string date = "date";

  static ColumnMap from_json(const nlohmann::json& j) {
    ColumnMap m;
    auto get = [&](const char* key, std::string& field) {
      if (j.contains(key)) field = j.at(key).get<std::string>();
    };
    get("action", m.action);
    get("actor", m.actor);
    get("actor_alt", m.actor_alt);
    get("target", m.target);
    get("target_alt", m.target_alt);
    get("fatalities", m.fatalities);
    get("wounded", m.wounded);
    get("location", m.location);
    get("date", m.date);
    return m;
  }
};

struct SkippedRow {
  std::size_t line = 0;
  std::string reason;
};

struct IngestReport {
  std::vector<SkippedRow> skipped;
  std::size_t missing_casualties = 0;  // blank casualty fields read as 0
};

struct LoadResult {
  std::vector<RawEventRecord> records;
  IngestReport report;
};

// Rows are kept only if every field parses and both actors map; everything
// else lands in the skip report with a reason.
inline LoadResult load_raw(std::istream& in, const ColumnMap& cols = {},
                           const MappingTables& tables = {}) {
  const csv::Table t = csv::read(in);
  const std::size_t c_action = t.require(cols.action);
  const std::size_t c_actor = t.require(cols.actor);
  const std::size_t c_target = t.require(cols.target);
  const std::size_t c_fatal = t.require(cols.fatalities);
  const std::size_t c_wounded = t.require(cols.wounded);
  const std::size_t c_loc = t.require(cols.location);
  const std::size_t c_date = t.require(cols.date);
  const auto c_actor_alt = t.column(cols.actor_alt);
  const auto c_target_alt = t.column(cols.target_alt);

  LoadResult out;
  auto mappable = [&](const std::string& code) {
    try {
      map_actor(code, tables.actors);
      return true;
    } catch (const UnmappableActor&) {
      return false;
    }
  };
  auto pick_actor = [&](const std::vector<std::string>& row, std::size_t primary,
                        std::optional<std::size_t> alt) -> std::optional<std::string> {
    if (mappable(row[primary])) return row[primary];
    if (alt && *alt < row.size() && mappable(row[*alt])) return row[*alt];
    return std::nullopt;
  };
  auto count = [&](const std::string& s, long long& dst) -> bool {
    if (s.empty() || s == "NA" || s == "." ) {
      ++out.report.missing_casualties;
      dst = 0;
      return true;
    }
    auto v = detail::parse_int(s);
    if (!v) {
      auto d = detail::parse_double(s);
      if (!d || *d != static_cast<long long>(*d)) return false;
      v = static_cast<long long>(*d);
    }
    if (*v < 0) return false;
    dst = *v;
    return true;
  };

  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = t.line_numbers[i];
    auto skip = [&](std::string reason) { out.report.skipped.push_back({line, std::move(reason)}); };
    if (row.size() < t.header.size()) {
      skip("malformed row");
      continue;
    }
    RawEventRecord r;
    auto code = detail::parse_int(row[c_action]);
    if (!code) {
      auto d = detail::parse_double(row[c_action]);
      if (d && *d == static_cast<long long>(*d)) code = static_cast<long long>(*d);
    }
    if (!code) {
      skip("unparsable action code");
      continue;
    }
    if (!tables.goldstein.contains(static_cast<int>(*code))) {
      skip("unscored category");
      continue;
    }
    r.action_code = static_cast<int>(*code);
    auto actor = pick_actor(row, c_actor, c_actor_alt);
    auto target = pick_actor(row, c_target, c_target_alt);
    if (!actor || !target) {
      skip("unmappable actor");
      continue;
    }
    r.actor_code = *actor;
    r.target_code = *target;
    if (!count(row[c_fatal], r.fatalities) || !count(row[c_wounded], r.wounded)) {
      skip("bad casualty count");
      continue;
    }
    auto month = parse_month(row[c_date]);
    if (!month) {
      skip("bad date");
      continue;
    }
    r.date = *month;
    r.location = row[c_loc];
    out.records.push_back(std::move(r));
  }
  return out;
}

inline std::pair<std::vector<EventTuple>, std::vector<EventTuple>> split(
    const std::vector<EventTuple>& tuples, double train_fraction, std::uint64_t seed) {
  if (tuples.empty()) throw DataError("cannot split an empty tuple set");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0,1)");
  std::vector<std::size_t> idx(tuples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(tuples.size())));
  std::pair<std::vector<EventTuple>, std::vector<EventTuple>> out;
  out.first.reserve(n_train);
  out.second.reserve(tuples.size() - n_train);
  for (std::size_t k = 0; k < idx.size(); ++k)
    (k < n_train ? out.first : out.second).push_back(tuples[idx[k]]);
  return out;
}

// Canonical tuple dump: subject,predicate,quantifier,object,location,month.
inline void write_tuples(std::ostream& out, const std::vector<EventTuple>& tuples) {
  csv::write_row(out, {"subject", "predicate", "quantifier", "object", "location", "month"});
  for (const auto& t : tuples)
    csv::write_row(out, {std::string(to_string(t.subject)), csv::fmt(t.predicate),
                         std::to_string(t.quantifier), std::string(to_string(t.object)),
                         t.location, to_string(t.month)});
}

inline std::vector<EventTuple> read_tuples(std::istream& in) {
  const csv::Table t = csv::read(in);
  const auto cs = t.require("subject"), cp = t.require("predicate"),
             cq = t.require("quantifier"), co = t.require("object");
  const auto cl = t.column("location");
  const auto cm = t.column("month");
  std::vector<EventTuple> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    auto where = [&] { return " on line " + std::to_string(t.line_numbers[i]); };
    if (row.size() < t.header.size()) throw DataError("malformed tuple row" + where());
    EventTuple e;
    auto s = actor_class_from_string(row[cs]);
    auto o = actor_class_from_string(row[co]);
    auto p = detail::parse_double(row[cp]);
    auto q = detail::parse_int(row[cq]);
    if (!s || !o || !p || !q) throw DataError("unparsable tuple" + where());
    if (!(*p > 0.0 && *p < 1.0)) throw DataError("predicate outside (0,1)" + where());
    if (*q < 0) throw DataError("negative quantifier" + where());
    e.subject = *s;
    e.object = *o;
    e.predicate = *p;
    e.quantifier = *q;
    if (cl) e.location = row[*cl];
    if (cm) {
      auto m = parse_month(row[*cm]);
      if (!m) throw DataError("bad month" + where());
      e.month = *m;
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<EventTuple> read_tuples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_tuples(in);
}

}  // namespace ordint
