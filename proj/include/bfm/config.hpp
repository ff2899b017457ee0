#pragma once

// Experiment configuration: a versioned JSON document parsed into typed
// specs. Every schema problem becomes a ConfigError carrying a JSON pointer.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bfm/connections.hpp"
#include "bfm/integrator.hpp"
#include "json.hpp"

namespace bfm {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct MetricSuiteSpec {
  std::string space = kDefaultSpace;
  std::size_t triples = 10000;
  std::size_t convexity_samples = 10000;
  std::size_t oracle_samples = 1000;
  std::vector<double> radii{0.01, 0.1, 0.3};
  double tol = 1e-12;
};

struct OperatorSpec {
  std::string name;
  LinearMap map = LinearMap::zero();
};

struct OpsSuiteSpec {
  std::string space = kDefaultSpace;
  std::size_t budget = 300;
  std::size_t pairs = 200;
  std::vector<OperatorSpec> items;
};

struct Jet2Example {
  std::string theta;  // 1-coordinate expression
  GradedVector x, v, w;
  std::vector<double> expect;
  double tol = 1e-8;
  double additivity_threshold = 0.1;
};

struct AtlasSuiteSpec {
  std::size_t samples = 100;
  double cocycle_tol = 1e-9;
  double roundtrip_tol = 1e-10;
  std::vector<Jet2Example> jet2_examples;
};

struct CompatPair {
  std::string connection;
  std::string to;
};

struct CompatSuiteSpec {
  std::size_t samples = 100;
  double tol = 1e-7;
  double identity_tol = 1e-12;
  std::vector<CompatPair> pairs;
};

struct SplitSuiteSpec {
  std::string connection;
  std::size_t jets = 100;
  double tol = 1e-12;
};

struct OdeTransferSpec {
  std::string phi_inverse;
  double t_lo = -1, t_hi = 1;
};

struct OdeSpec {
  std::string name;
  std::vector<std::vector<std::string>> matrix;
  double t_lo = -1, t_hi = 1;
  std::optional<OdeTransferSpec> transfer;
};

struct OdeSuiteSpec {
  std::size_t samples = 100;
  double transfer_tol = 1e-9;
  std::vector<OdeSpec> systems;
};

struct FieldSpec {
  std::string name, chart;
  std::vector<std::string> components;
  std::optional<double> L_sup, R_lip;
};

struct IntegrateSpec {
  std::string name, field;
  GradedVector p0;
  double t0 = 0, r = 1, grid_step = 1e-3, tol = 1e-12;
  std::size_t max_iters = 30;
  std::vector<std::string> exact;  // per coordinate, expressions in t
  bool csv = true;
};

struct FlowSpec {
  std::string name, field;
  GradedVector p0, q;
  double r = 1, t = 0, grid_step = 1e-3, tol = 1e-12;
  std::size_t max_iters = 30;
  std::vector<double> expected;
  bool semigroup = true;
};

struct UniquenessSpec {
  std::string name;
  std::optional<Atlas> atlas;  // falls back to the top-level atlas
  std::map<std::string, std::string> fields;  // chart -> field name
  std::string alpha, beta;
  GradedVector p;
  double r = 1, grid_step = 1e-3, tol = 1e-12, deviation_tol = 1e-6;
  std::size_t max_iters = 30;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::optional<std::uint64_t> seed;
  std::map<std::string, FrechetSpace> spaces;
  std::optional<Atlas> atlas;
  std::map<std::string, ChristoffelField> connections;
  std::map<std::string, FieldSpec> fields;

  std::optional<MetricSuiteSpec> metric;
  std::optional<OpsSuiteSpec> operators;
  std::optional<AtlasSuiteSpec> atlas_checks;
  std::optional<CompatSuiteSpec> compat;
  std::optional<SplitSuiteSpec> split;
  std::optional<OdeSuiteSpec> odes;
  std::vector<IntegrateSpec> integrate;
  std::vector<FlowSpec> flows;
  std::vector<UniquenessSpec> uniqueness;
  std::vector<std::string> suites;  // default selection for `all`; empty = every configured suite

  const FrechetSpace& space(const std::string& id, const std::string& ptr) const {
    auto it = spaces.find(id);
    if (it == spaces.end()) throw ConfigError(ptr, "unknown space '" + id + "'");
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// JSON helpers

namespace cfg {

inline std::string child(const std::string& ptr, const std::string& key) { return ptr + "/" + key; }
inline std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

inline const json& require(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(child(ptr, key), "required field is missing");
  return *it;
}

inline const json* optional_field(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw ConfigError(ptr, "expected a number");
  return j.get<double>();
}

inline std::size_t count(const json& j, const std::string& ptr) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(ptr, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

inline std::string text(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw ConfigError(ptr, "expected a string");
  return j.get<std::string>();
}

inline bool boolean(const json& j, const std::string& ptr) {
  if (!j.is_boolean()) throw ConfigError(ptr, "expected true or false");
  return j.get<bool>();
}

inline std::vector<double> numbers(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], child(ptr, i)));
  return out;
}

inline std::vector<std::string> texts(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(text(j[i], child(ptr, i)));
  return out;
}

inline GradedVector vec(const json& j, const std::string& ptr, const std::string& space = kDefaultSpace) {
  return GradedVector(numbers(j, ptr), space);
}

inline double number_or(const json& j, const std::string& key, const std::string& ptr, double def) {
  const json* p = optional_field(j, key, ptr);
  return p ? number(*p, child(ptr, key)) : def;
}

inline std::size_t count_or(const json& j, const std::string& key, const std::string& ptr, std::size_t def) {
  const json* p = optional_field(j, key, ptr);
  return p ? count(*p, child(ptr, key)) : def;
}

inline std::string text_or(const json& j, const std::string& key, const std::string& ptr, const std::string& def) {
  const json* p = optional_field(j, key, ptr);
  return p ? text(*p, child(ptr, key)) : def;
}

inline Ball ball(const json& j, const std::string& ptr) {
  const GradedVector c = vec(require(j, "center", ptr), child(ptr, "center"));
  const double r = number(require(j, "radius", ptr), child(ptr, "radius"));
  if (!(r > 0)) throw ConfigError(child(ptr, "radius"), "radius must be positive");
  return {c, r};
}

/// Runs `f`, turning library errors raised while building an object into
/// ConfigErrors at `ptr`.
template <class F>
auto guarded(const std::string& ptr, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(ptr, e.what());
  }
}

}  // namespace cfg

// ---------------------------------------------------------------------------
// section parsers

inline bool has_chart(const Atlas& a, const std::string& label) {
  for (const auto& c : a.charts())
    if (c.label == label) return true;
  return false;
}

inline FrechetSpace parse_space(const std::string& id, const json& j, const std::string& ptr) {
  using namespace cfg;
  const json& a = require(j, "alphas", ptr);
  const std::string aptr = child(ptr, "alphas");
  const std::string rule = text(require(a, "rule", aptr), child(aptr, "rule"));
  const double c = number_or(a, "c", aptr, 1.0);
  AlphaSequence alphas = guarded(aptr, [&] {
    if (rule == "geometric") return AlphaSequence::geometric(c, number(require(a, "q", aptr), child(aptr, "q")));
    if (rule == "power") return AlphaSequence::power(c, number(require(a, "p", aptr), child(aptr, "p")));
    throw ConfigError(child(aptr, "rule"), "unknown alpha rule '" + rule + "'");
  });
  SeminormFamily family = SeminormFamily::prefix_sup();
  if (const json* s = optional_field(j, "seminorms", ptr)) {
    const std::string sptr = child(ptr, "seminorms");
    const std::string kind = text(require(*s, "family", sptr), child(sptr, "family"));
    if (kind == "weighted_prefix_sup") {
      const json& w = require(*s, "weight", sptr);
      const std::string wptr = child(sptr, "weight");
      const std::string wr = text(require(w, "rule", wptr), child(wptr, "rule"));
      const double param = number(require(w, "param", wptr), child(wptr, "param"));
      family = guarded(wptr, [&] {
        if (wr == "power") return SeminormFamily::weighted_prefix_sup(WeightRule::power(param));
        if (wr == "geometric") return SeminormFamily::weighted_prefix_sup(WeightRule::geometric(param));
        throw ConfigError(child(wptr, "rule"), "unknown weight rule '" + wr + "'");
      });
    } else if (kind != "prefix_sup") {
      throw ConfigError(child(sptr, "family"), "unknown seminorm family '" + kind + "'");
    }
  }
  return FrechetSpace(id, family, alphas);
}

inline LinearMap parse_operator(const json& j, const std::string& ptr, const std::string& space) {
  using namespace cfg;
  const std::string kind = text(require(j, "kind", ptr), child(ptr, "kind"));
  return guarded(ptr, [&]() -> LinearMap {
    if (kind == "zero") return LinearMap::zero(space);
    if (kind == "identity") return LinearMap::identity(space);
    if (kind == "scalar") return LinearMap::scalar(number(require(j, "c", ptr), child(ptr, "c")), space);
    if (kind == "shift") {
      const std::string d = text(require(j, "direction", ptr), child(ptr, "direction"));
      if (d != "left" && d != "right") throw ConfigError(child(ptr, "direction"), "expected left or right");
      return LinearMap::shift(d == "left" ? LinearMap::Direction::left : LinearMap::Direction::right, space);
    }
    if (kind == "diagonal") {
      const std::string rule = text(require(j, "rule", ptr), child(ptr, "rule"));
      const double c = number_or(j, "c", ptr, 1.0);
      if (rule == "constant") return LinearMap::diagonal(DiagonalRule::constant(c), space);
      const double p = number(require(j, "param", ptr), child(ptr, "param"));
      if (rule == "geometric") return LinearMap::diagonal(DiagonalRule::geometric(c, p), space);
      if (rule == "index_power") return LinearMap::diagonal(DiagonalRule::index_power(c, p), space);
      throw ConfigError(child(ptr, "rule"), "unknown diagonal rule '" + rule + "'");
    }
    if (kind == "matrix") {
      const std::size_t k = count(require(j, "k", ptr), child(ptr, "k"));
      return LinearMap::finite_matrix(k, numbers(require(j, "entries", ptr), child(ptr, "entries")), space, space);
    }
    if (kind == "compose" || kind == "sum") {
      const json& parts = require(j, "of", ptr);
      if (!parts.is_array() || parts.empty()) throw ConfigError(child(ptr, "of"), "expected a nonempty array");
      std::vector<LinearMap> maps;
      for (std::size_t i = 0; i < parts.size(); ++i)
        maps.push_back(parse_operator(parts[i], child(child(ptr, "of"), i), space));
      return kind == "sum" ? LinearMap::sum(std::move(maps)) : LinearMap::composition(std::move(maps));
    }
    throw ConfigError(child(ptr, "kind"), "unknown operator kind '" + kind + "'");
  });
}

inline Atlas parse_atlas(const json& j, const std::string& ptr) {
  using namespace cfg;
  if (const json* preset = optional_field(j, "preset", ptr)) {
    const std::string name = text(*preset, child(ptr, "preset"));
    if (name == "three_chart") return three_chart_atlas();
    throw ConfigError(child(ptr, "preset"), "unknown atlas preset '" + name + "'");
  }
  const json& cs = require(j, "charts", ptr);
  if (!cs.is_array() || cs.empty()) throw ConfigError(child(ptr, "charts"), "expected a nonempty array");
  std::vector<Chart> charts;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const std::string cptr = child(child(ptr, "charts"), i);
    const json& c = cs[i];
    const std::string label = text(require(c, "label", cptr), child(cptr, "label"));
    const auto forward = texts(require(c, "forward", cptr), child(cptr, "forward"));
    std::vector<std::string> inverse;
    if (const json* inv = optional_field(c, "inverse", cptr)) inverse = texts(*inv, child(cptr, "inverse"));
    const Ball domain = ball(require(c, "domain", cptr), child(cptr, "domain"));
    std::optional<Ball> ref;
    if (const json* r = optional_field(c, "reference_domain", cptr)) ref = ball(*r, child(cptr, "reference_domain"));
    charts.push_back(guarded(cptr, [&] { return expression_chart(label, forward, forward.size(), domain, inverse, ref); }));
  }
  std::vector<Overlap> overlaps;
  if (const json* os = optional_field(j, "overlaps", ptr)) {
    if (!os->is_array()) throw ConfigError(child(ptr, "overlaps"), "expected an array");
    for (std::size_t i = 0; i < os->size(); ++i) {
      const std::string optr = child(child(ptr, "overlaps"), i);
      const json& o = (*os)[i];
      overlaps.push_back({text(require(o, "a", optr), child(optr, "a")), text(require(o, "b", optr), child(optr, "b")),
                          ball(require(o, "in_a", optr), child(optr, "in_a")),
                          ball(require(o, "in_b", optr), child(optr, "in_b"))});
    }
  }
  return guarded(ptr, [&] { return Atlas(std::move(charts), std::move(overlaps)); });
}

inline ChristoffelField parse_connection(const json& j, const std::string& ptr) {
  using namespace cfg;
  const std::string chart = text(require(j, "chart", ptr), child(ptr, "chart"));
  const std::size_t degree = count(require(j, "degree", ptr), child(ptr, "degree"));
  const std::size_t base_dim = count_or(j, "base_dim", ptr, degree);
  const json& cs = require(j, "coefficients", ptr);
  if (!cs.is_array()) throw ConfigError(child(ptr, "coefficients"), "expected an array");
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::string> coeffs;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const std::string e = child(child(ptr, "coefficients"), i);
    coeffs[{count(require(cs[i], "i", e), child(e, "i")), count(require(cs[i], "j", e), child(e, "j")),
            count(require(cs[i], "k", e), child(e, "k"))}] = text(require(cs[i], "expr", e), child(e, "expr"));
  }
  return guarded(ptr, [&] { return christoffel_from_coefficients(chart, degree, base_dim, coeffs); });
}

inline OdeSpec parse_ode(const json& j, const std::string& ptr) {
  using namespace cfg;
  OdeSpec s;
  s.name = text(require(j, "name", ptr), child(ptr, "name"));
  const json& m = require(j, "matrix", ptr);
  if (!m.is_array() || m.empty()) throw ConfigError(child(ptr, "matrix"), "expected a nonempty array of rows");
  for (std::size_t i = 0; i < m.size(); ++i) s.matrix.push_back(texts(m[i], child(child(ptr, "matrix"), i)));
  const auto tr = numbers(require(j, "t_range", ptr), child(ptr, "t_range"));
  if (tr.size() != 2 || !(tr[0] < tr[1])) throw ConfigError(child(ptr, "t_range"), "expected [lo, hi] with lo < hi");
  s.t_lo = tr[0];
  s.t_hi = tr[1];
  guarded(child(ptr, "matrix"), [&] { return ode_from_expressions(s.matrix, s.t_lo, s.t_hi); });
  if (const json* t = optional_field(j, "transfer", ptr)) {
    const std::string tptr = child(ptr, "transfer");
    OdeTransferSpec ts;
    ts.phi_inverse = text(require(*t, "phi_inverse", tptr), child(tptr, "phi_inverse"));
    guarded(child(tptr, "phi_inverse"), [&] { return expr::parse(ts.phi_inverse, {.dimension = 1, .allow_t = false}); });
    const auto r = numbers(require(*t, "t_range", tptr), child(tptr, "t_range"));
    if (r.size() != 2 || !(r[0] < r[1])) throw ConfigError(child(tptr, "t_range"), "expected [lo, hi] with lo < hi");
    ts.t_lo = r[0];
    ts.t_hi = r[1];
    s.transfer = ts;
  }
  return s;
}

inline FieldSpec parse_field(const std::string& name, const json& j, const std::string& ptr) {
  using namespace cfg;
  FieldSpec f;
  f.name = name;
  f.chart = text_or(j, "chart", ptr, "id");
  f.components = texts(require(j, "components", ptr), child(ptr, "components"));
  if (f.components.empty()) throw ConfigError(child(ptr, "components"), "at least one component required");
  for (std::size_t i = 0; i < f.components.size(); ++i)
    guarded(child(child(ptr, "components"), i), [&] {
      return expr::parse(f.components[i], {.dimension = static_cast<int>(f.components.size()), .allow_t = false});
    });
  if (const json* L = optional_field(j, "L_sup", ptr)) f.L_sup = number(*L, child(ptr, "L_sup"));
  if (const json* R = optional_field(j, "R_lip", ptr)) f.R_lip = number(*R, child(ptr, "R_lip"));
  return f;
}

inline std::string field_ref(const ExperimentConfig& c, const json& j, const std::string& key, const std::string& ptr) {
  const std::string name = cfg::text(cfg::require(j, key, ptr), cfg::child(ptr, key));
  if (!c.fields.count(name)) throw ConfigError(cfg::child(ptr, key), "unknown field '" + name + "'");
  return name;
}

inline ExperimentConfig parse_config(const json& root) {
  using namespace cfg;
  const std::string P;  // root pointer is the empty string
  if (!root.is_object()) throw ConfigError("", "config must be a JSON object");
  ExperimentConfig c;
  const json& ver = require(root, "schema_version", P);
  if (!ver.is_number_integer() || ver.get<int>() != kSchemaVersion)
    throw ConfigError("/schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  if (const json* s = optional_field(root, "seed", P)) c.seed = count(*s, "/seed");

  static const std::vector<std::string> known{"schema_version", "seed",   "spaces",   "metric",     "operators",
                                              "atlas",          "atlas_checks", "connections", "compat", "split",
                                              "odes",           "fields", "integrate", "flow",      "uniqueness",
                                              "suites"};
  for (auto it = root.begin(); it != root.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("/" + it.key(), "unknown top-level field");

  const json& spaces = require(root, "spaces", P);
  if (!spaces.is_object() || spaces.empty()) throw ConfigError("/spaces", "expected a nonempty object");
  for (auto it = spaces.begin(); it != spaces.end(); ++it)
    c.spaces.emplace(it.key(), parse_space(it.key(), it.value(), "/spaces/" + it.key()));

  if (const json* m = optional_field(root, "metric", P)) {
    MetricSuiteSpec s;
    s.space = text_or(*m, "space", "/metric", kDefaultSpace);
    c.space(s.space, "/metric/space");
    s.triples = count_or(*m, "triples", "/metric", s.triples);
    s.convexity_samples = count_or(*m, "convexity_samples", "/metric", s.convexity_samples);
    s.oracle_samples = count_or(*m, "oracle_samples", "/metric", s.oracle_samples);
    if (const json* r = optional_field(*m, "radii", "/metric")) s.radii = numbers(*r, "/metric/radii");
    for (double r : s.radii)
      if (!(r > 0)) throw ConfigError("/metric/radii", "radii must be positive");
    s.tol = number_or(*m, "tol", "/metric", s.tol);
    c.metric = s;
  }

  if (const json* o = optional_field(root, "operators", P)) {
    OpsSuiteSpec s;
    s.space = text_or(*o, "space", "/operators", kDefaultSpace);
    c.space(s.space, "/operators/space");
    s.budget = count_or(*o, "budget", "/operators", s.budget);
    if (s.budget == 0) throw ConfigError("/operators/budget", "budget must be >= 1");
    s.pairs = count_or(*o, "pairs", "/operators", s.pairs);
    if (const json* items = optional_field(*o, "items", "/operators")) {
      if (!items->is_array()) throw ConfigError("/operators/items", "expected an array");
      for (std::size_t i = 0; i < items->size(); ++i) {
        const std::string ip = child("/operators/items", i);
        s.items.push_back({text(require((*items)[i], "name", ip), child(ip, "name")),
                           parse_operator((*items)[i], ip, s.space)});
      }
    }
    c.operators = s;
  }

  if (const json* a = optional_field(root, "atlas", P)) c.atlas = parse_atlas(*a, "/atlas");

  if (const json* a = optional_field(root, "atlas_checks", P)) {
    if (!c.atlas) throw ConfigError("/atlas", "required by /atlas_checks");
    AtlasSuiteSpec s;
    s.samples = count_or(*a, "samples", "/atlas_checks", s.samples);
    s.cocycle_tol = number_or(*a, "cocycle_tol", "/atlas_checks", s.cocycle_tol);
    s.roundtrip_tol = number_or(*a, "roundtrip_tol", "/atlas_checks", s.roundtrip_tol);
    if (const json* ex = optional_field(*a, "jet2_examples", "/atlas_checks")) {
      if (!ex->is_array()) throw ConfigError("/atlas_checks/jet2_examples", "expected an array");
      for (std::size_t i = 0; i < ex->size(); ++i) {
        const std::string ep = child("/atlas_checks/jet2_examples", i);
        const json& e = (*ex)[i];
        Jet2Example je;
        je.theta = text(require(e, "theta", ep), child(ep, "theta"));
        guarded(child(ep, "theta"), [&] { return expr::parse(je.theta, {.dimension = 1, .allow_t = false}); });
        je.x = vec(require(e, "x", ep), child(ep, "x"));
        je.v = vec(require(e, "v", ep), child(ep, "v"));
        je.w = vec(require(e, "w", ep), child(ep, "w"));
        if (const json* ex2 = optional_field(e, "expect", ep)) {
          je.expect = numbers(*ex2, child(ep, "expect"));
          if (je.expect.size() != 3) throw ConfigError(child(ep, "expect"), "expected [x, v, w]");
        }
        je.tol = number_or(e, "tol", ep, je.tol);
        je.additivity_threshold = number_or(e, "additivity_threshold", ep, je.additivity_threshold);
        s.jet2_examples.push_back(je);
      }
    }
    c.atlas_checks = s;
  }

  if (const json* cs = optional_field(root, "connections", P)) {
    if (!cs->is_object()) throw ConfigError("/connections", "expected an object keyed by name");
    for (auto it = cs->begin(); it != cs->end(); ++it) {
      const std::string ptr = "/connections/" + it.key();
      ChristoffelField G = parse_connection(it.value(), ptr);
      if (c.atlas && !has_chart(*c.atlas, G.chart)) throw ConfigError(ptr + "/chart", "unknown chart '" + G.chart + "'");
      c.connections.emplace(it.key(), std::move(G));
    }
  }

  auto connection_ref = [&](const json& j, const std::string& ptr) {
    const std::string name = text(require(j, "connection", ptr), child(ptr, "connection"));
    if (!c.connections.count(name)) throw ConfigError(child(ptr, "connection"), "unknown connection '" + name + "'");
    return name;
  };

  if (const json* cp = optional_field(root, "compat", P)) {
    if (!c.atlas) throw ConfigError("/atlas", "required by /compat");
    CompatSuiteSpec s;
    s.samples = count_or(*cp, "samples", "/compat", s.samples);
    s.tol = number_or(*cp, "tol", "/compat", s.tol);
    s.identity_tol = number_or(*cp, "identity_tol", "/compat", s.identity_tol);
    const json& pairs = require(*cp, "pairs", "/compat");
    if (!pairs.is_array()) throw ConfigError("/compat/pairs", "expected an array");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::string pp = child("/compat/pairs", i);
      CompatPair pr{connection_ref(pairs[i], pp), text(require(pairs[i], "to", pp), child(pp, "to"))};
      if (!has_chart(*c.atlas, pr.to)) throw ConfigError(child(pp, "to"), "unknown chart '" + pr.to + "'");
      if (!has_chart(*c.atlas, c.connections.at(pr.connection).chart))
        throw ConfigError(child(pp, "connection"), "connection lives on a chart outside /atlas");
      if (!c.atlas->overlap(c.connections.at(pr.connection).chart, pr.to))
        throw ConfigError(child(pp, "to"), "no overlap between '" + c.connections.at(pr.connection).chart + "' and '" +
                                               pr.to + "'");
      s.pairs.push_back(pr);
    }
    c.compat = s;
  }

  if (const json* sp = optional_field(root, "split", P)) {
    SplitSuiteSpec s;
    s.connection = connection_ref(*sp, "/split");
    s.jets = count_or(*sp, "jets", "/split", s.jets);
    s.tol = number_or(*sp, "tol", "/split", s.tol);
    c.split = s;
  }

  if (const json* od = optional_field(root, "odes", P)) {
    OdeSuiteSpec s;
    s.samples = count_or(*od, "samples", "/odes", s.samples);
    s.transfer_tol = number_or(*od, "transfer_tol", "/odes", s.transfer_tol);
    const json& sys = require(*od, "systems", "/odes");
    if (!sys.is_array()) throw ConfigError("/odes/systems", "expected an array");
    for (std::size_t i = 0; i < sys.size(); ++i) s.systems.push_back(parse_ode(sys[i], child("/odes/systems", i)));
    c.odes = s;
  }

  if (const json* fs = optional_field(root, "fields", P)) {
    if (!fs->is_object()) throw ConfigError("/fields", "expected an object keyed by name");
    for (auto it = fs->begin(); it != fs->end(); ++it)
      c.fields.emplace(it.key(), parse_field(it.key(), it.value(), "/fields/" + it.key()));
  }

  if (const json* in = optional_field(root, "integrate", P)) {
    if (!in->is_array()) throw ConfigError("/integrate", "expected an array");
    for (std::size_t i = 0; i < in->size(); ++i) {
      const std::string ip = child("/integrate", i);
      const json& e = (*in)[i];
      IntegrateSpec s;
      s.name = text(require(e, "name", ip), child(ip, "name"));
      s.field = field_ref(c, e, "field", ip);
      s.p0 = vec(require(e, "p0", ip), child(ip, "p0"));
      s.t0 = number_or(e, "t0", ip, s.t0);
      s.r = number(require(e, "r", ip), child(ip, "r"));
      s.grid_step = number_or(e, "grid_step", ip, s.grid_step);
      s.tol = number_or(e, "tol", ip, s.tol);
      s.max_iters = count_or(e, "max_iters", ip, s.max_iters);
      if (const json* ex = optional_field(e, "exact", ip)) {
        s.exact = texts(*ex, child(ip, "exact"));
        for (std::size_t k = 0; k < s.exact.size(); ++k)
          guarded(child(child(ip, "exact"), k), [&] { return expr::parse(s.exact[k], {.dimension = 0}); });
      }
      if (const json* csv = optional_field(e, "csv", ip)) s.csv = boolean(*csv, child(ip, "csv"));
      c.integrate.push_back(s);
    }
  }

  if (const json* fl = optional_field(root, "flow", P)) {
    if (!fl->is_array()) throw ConfigError("/flow", "expected an array");
    for (std::size_t i = 0; i < fl->size(); ++i) {
      const std::string ip = child("/flow", i);
      const json& e = (*fl)[i];
      FlowSpec s;
      s.name = text(require(e, "name", ip), child(ip, "name"));
      s.field = field_ref(c, e, "field", ip);
      s.p0 = vec(require(e, "p0", ip), child(ip, "p0"));
      s.q = vec(require(e, "q", ip), child(ip, "q"));
      s.r = number(require(e, "r", ip), child(ip, "r"));
      s.t = number(require(e, "t", ip), child(ip, "t"));
      s.grid_step = number_or(e, "grid_step", ip, s.grid_step);
      s.tol = number_or(e, "tol", ip, s.tol);
      s.max_iters = count_or(e, "max_iters", ip, s.max_iters);
      if (const json* ex = optional_field(e, "expected", ip)) s.expected = numbers(*ex, child(ip, "expected"));
      if (const json* sg = optional_field(e, "semigroup", ip)) s.semigroup = boolean(*sg, child(ip, "semigroup"));
      c.flows.push_back(s);
    }
  }

  if (const json* un = optional_field(root, "uniqueness", P)) {
    if (!un->is_array()) throw ConfigError("/uniqueness", "expected an array");
    for (std::size_t i = 0; i < un->size(); ++i) {
      const std::string ip = child("/uniqueness", i);
      const json& e = (*un)[i];
      UniquenessSpec s;
      s.name = text(require(e, "name", ip), child(ip, "name"));
      if (const json* a = optional_field(e, "atlas", ip)) s.atlas = parse_atlas(*a, child(ip, "atlas"));
      if (!s.atlas && !c.atlas) throw ConfigError(child(ip, "atlas"), "no atlas given here or at /atlas");
      const Atlas& atlas = s.atlas ? *s.atlas : *c.atlas;
      const json& fm = require(e, "fields", ip);
      if (!fm.is_object()) throw ConfigError(child(ip, "fields"), "expected an object chart -> field");
      for (auto it = fm.begin(); it != fm.end(); ++it) {
        const std::string fp = child(child(ip, "fields"), it.key());
        if (!has_chart(atlas, it.key())) throw ConfigError(fp, "unknown chart '" + it.key() + "'");
        const std::string fname = text(it.value(), fp);
        if (!c.fields.count(fname)) throw ConfigError(fp, "unknown field '" + fname + "'");
        s.fields[it.key()] = fname;
      }
      s.alpha = text(require(e, "alpha", ip), child(ip, "alpha"));
      s.beta = text(require(e, "beta", ip), child(ip, "beta"));
      for (const auto* k : {&s.alpha, &s.beta})
        if (!s.fields.count(*k)) throw ConfigError(child(ip, "fields"), "no field for chart '" + *k + "'");
      if (s.alpha != s.beta && !atlas.overlap(s.alpha, s.beta))
        throw ConfigError(child(ip, "beta"), "charts '" + s.alpha + "' and '" + s.beta + "' do not overlap");
      s.p = vec(require(e, "p", ip), child(ip, "p"));
      s.r = number(require(e, "r", ip), child(ip, "r"));
      s.grid_step = number_or(e, "grid_step", ip, s.grid_step);
      s.tol = number_or(e, "tol", ip, s.tol);
      s.deviation_tol = number_or(e, "deviation_tol", ip, s.deviation_tol);
      s.max_iters = count_or(e, "max_iters", ip, s.max_iters);
      c.uniqueness.push_back(s);
    }
  }

  if (const json* su = optional_field(root, "suites", P)) c.suites = texts(*su, "/suites");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(root);
}

}  // namespace bfm
