#pragma once

// Invariant suites driven by an ExperimentConfig, and report assembly.
// Every suite returns named checks (pass flag, value, threshold, witness);
// reports are sorted by suite and check name so output bytes depend only on
// (config, seed).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bfm/config.hpp"

namespace bfm {

struct Check {
  std::string name;
  bool pass = false;
  json value;
  json threshold;
  json witness;  // null when there is nothing to show
};

struct SuiteResult {
  explicit SuiteResult(std::string n = {}) : name(std::move(n)) {}

  std::string name;
  std::vector<Check> checks;
  json details = json::object();
  std::vector<std::string> files;  // written outputs, relative to the out dir

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  void add(std::string n, bool ok, json value, json threshold, json witness = nullptr) {
    checks.push_back({std::move(n), ok, std::move(value), std::move(threshold), std::move(witness)});
  }
};

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::optional<double> grid_step;    // overrides every integration grid step
  std::optional<double> tol;          // overrides every Picard tolerance
  std::filesystem::path out_dir = "out";
  bool write_files = true;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"verify-metric", "verify-ops",  "verify-atlas",
                                              "compat-check",  "split-roundtrip", "ode-roundtrip",
                                              "integrate",     "flow",        "uniqueness"};
  return names;
}

inline bool is_suite_name(const std::string& s) {
  const auto& n = suite_names();
  return std::find(n.begin(), n.end(), s) != n.end();
}

// ---------------------------------------------------------------------------
// small helpers

inline json to_json(const GradedVector& v) {
  json a = json::array();
  for (std::size_t i = 1; i <= v.degree(); ++i) a.push_back(v.coord(i));
  return a;
}

/// Non-finite values become strings so reports stay valid JSON.
inline json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) { return Rng::stream(seed, salt).next(); }

/// Counts violations over a sample loop and keeps the first witness.
struct Tally {
  std::size_t samples = 0, violations = 0;
  double worst = 0.0;
  json witness = nullptr;

  void add(bool ok, double residual, const std::function<json()>& w) {
    ++samples;
    if (std::isnan(residual)) ok = false;
    else worst = std::max(worst, residual);
    if (!ok && violations++ == 0) witness = w();
  }
  json value() const { return {{"samples", samples}, {"violations", violations}, {"worst", num(worst)}}; }
  bool pass() const { return violations == 0 && samples > 0; }
};

inline void add_tally(SuiteResult& r, const std::string& name, const Tally& t, double tol) {
  r.add(name, t.pass(), t.value(), num(tol), t.witness);
}

inline double scaled_gap(const GradedVector& a, const GradedVector& b) {
  return sup_distance(a, b) / (1.0 + std::max(a.sup_norm(), b.sup_norm()));
}

namespace gen {

inline LinearMap random_structured(Rng& rng, const std::string& space = kDefaultSpace) {
  switch (rng.index(7)) {
    case 0: return LinearMap::identity(space);
    case 1: return LinearMap::scalar(rng.uniform(-3, 3), space);
    case 2: return LinearMap::diagonal(DiagonalRule::geometric(rng.uniform(0.2, 2.0), rng.uniform(0.3, 1.0)), space);
    case 3:
      return LinearMap::shift(rng.uniform() < 0.5 ? LinearMap::Direction::left : LinearMap::Direction::right, space);
    case 4: {
      const std::size_t k = 1 + rng.index(3);
      std::vector<double> e(k * k);
      for (double& x : e) x = rng.uniform(-2, 2);
      return LinearMap::finite_matrix(k, e, space, space);
    }
    case 5: return LinearMap::diagonal(DiagonalRule::constant(rng.uniform(-2, 2)), space);
    default: return LinearMap::sum({LinearMap::identity(space), LinearMap::scalar(rng.uniform(-1, 1), space)});
  }
}

inline MultilinearMap random_bilinear(Rng& rng, const std::string& space = kDefaultSpace) {
  std::vector<MultilinearTerm> t;
  const std::size_t n = 1 + rng.index(6);
  for (std::size_t i = 0; i < n; ++i)
    t.push_back({1 + rng.index(3), {1 + rng.index(3), 1 + rng.index(3)}, rng.uniform(-2, 2)});
  return MultilinearMap::on_space(2, t, space);
}

inline GradedVector in_ball(Rng& rng, const Ball& b, std::size_t dim, double shrink = 0.999) {
  std::vector<double> c(dim);
  for (std::size_t i = 0; i < dim; ++i) c[i] = b.center.coord(i + 1) + shrink * b.radius * rng.uniform(-1.0, 1.0);
  return GradedVector(c, b.center.space());
}

inline GradedVector cube(Rng& rng, std::size_t dim, double r, const std::string& space = kDefaultSpace) {
  std::vector<double> c(dim);
  for (double& x : c) x = rng.uniform(-r, r);
  return GradedVector(c, space);
}

}  // namespace gen

// ---------------------------------------------------------------------------
// verify-metric

inline SuiteResult run_metric(const ExperimentConfig& c, std::uint64_t seed) {
  const MetricSuiteSpec& s = *c.metric;
  const FrechetSpace& F = c.space(s.space, "/metric/space");
  SuiteResult r{"verify-metric"};
  Rng rng(derive_seed(seed, 1));
  Tally ident, pos, sym, tri, trans, bounded;
  for (std::size_t k = 0; k < s.triples; ++k) {
    const GradedVector e = random_vector(rng, 8, F.id()), f = random_vector(rng, 8, F.id()),
                       g = random_vector(rng, 8, F.id()), h = random_vector(rng, 8, F.id());
    const double ef = F.distance(e, f), fe = F.distance(f, e);
    const auto w3 = [&] { return json{{"e", to_json(e)}, {"f", to_json(f)}, {"g", to_json(g)}, {"h", to_json(h)}}; };
    ident.add(F.distance(e, e) == 0.0, F.distance(e, e), w3);
    pos.add(e == f || ef > 0.0, 0.0, w3);
    sym.add(ef == fe, std::abs(ef - fe), w3);
    const double excess = F.distance(e, g) - (ef + F.distance(f, g));
    tri.add(excess <= s.tol, std::max(0.0, excess), w3);
    const double shift = std::abs(F.distance(e + h, f + h) - ef);
    trans.add(shift <= s.tol, shift, w3);
    bounded.add(ef <= F.alphas()(1), std::max(0.0, ef - F.alphas()(1)), w3);
  }
  add_tally(r, "axioms/identity", ident, 0.0);
  add_tally(r, "axioms/positivity", pos, 0.0);
  add_tally(r, "axioms/symmetry", sym, 0.0);
  add_tally(r, "axioms/triangle", tri, s.tol);
  add_tally(r, "axioms/translation_invariance", trans, s.tol);
  add_tally(r, "axioms/bounded_by_alpha1", bounded, 0.0);

  std::size_t conv_samples = 0, conv_violations = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();
  json conv_witness = nullptr;
  for (std::size_t i = 0; i < s.radii.size(); ++i) {
    const auto rep = check_absolutely_convex(F, s.radii[i], s.convexity_samples, derive_seed(seed, 10 + i), s.tol);
    conv_samples += rep.samples;
    conv_violations += rep.violations;
    worst_margin = std::max(worst_margin, rep.worst_margin);
    if (rep.violations > 0 && conv_witness.is_null())
      conv_witness = {{"radius", s.radii[i]},
                      {"e", to_json(*rep.witness_e)},
                      {"f", to_json(*rep.witness_f)},
                      {"lambda", rep.witness_lambda},
                      {"mu", rep.witness_mu}};
  }
  r.add("absolute_convexity", conv_violations == 0 && conv_samples > 0,
        {{"samples", conv_samples}, {"violations", conv_violations}, {"worst_margin", num(worst_margin)},
         {"radii", s.radii}},
        num(s.tol), conv_witness);

  Tally oracle;
  Rng orng(derive_seed(seed, 2));
  for (std::size_t k = 0; k < s.oracle_samples; ++k) {
    const GradedVector e = random_vector(orng, 12, F.id(), -8, 8), f = random_vector(orng, 12, F.id(), -8, 8);
    const double fast = metric_distance(F, e, f), slow = term_enumeration_norm(F, e - f);
    oracle.add(fast == slow, std::abs(fast - slow), [&] { return json{{"e", to_json(e)}, {"f", to_json(f)}}; });
  }
  add_tally(r, "term_enumeration_agreement", oracle, 0.0);
  r.details = {{"space", F.id()}};
  return r;
}

// ---------------------------------------------------------------------------
// verify-ops

inline SuiteResult run_ops(const ExperimentConfig& c, std::uint64_t seed) {
  const OpsSuiteSpec& s = *c.operators;
  const FrechetSpace& F = c.space(s.space, "/operators/space");
  const std::string& sp = F.id();
  SuiteResult r{"verify-ops"};

  const auto id = lip_norm_estimate(LinearMap::identity(sp), F, F, s.budget, derive_seed(seed, 1));
  r.add("identity_lower_bound", id.lower_bound == 1.0, num(id.lower_bound), 1.0, to_json(id.witness.front()));
  const auto two = lip_norm_estimate(LinearMap::scalar(2.0, sp), F, F, s.budget, derive_seed(seed, 2));
  r.add("scalar2_lower_bound", two.lower_bound >= 1.99 && two.lower_bound <= 2.0,
        {{"lower_bound", num(two.lower_bound)}, {"estimate", num(two.estimate)}}, 1.99, to_json(two.witness.front()));

  Tally sub, factor;
  Rng rng(derive_seed(seed, 3));
  for (std::size_t k = 0; k < s.pairs; ++k) {
    const LinearMap L = gen::random_structured(rng, sp), H = gen::random_structured(rng, sp);
    const auto lh = lip_norm_estimate(compose(L, H), F, F, s.budget, derive_seed(seed, 1000 + k));
    const auto l = lip_norm_estimate(L, F, F, s.budget, derive_seed(seed, 2000 + k));
    const auto h = lip_norm_estimate(H, F, F, s.budget, derive_seed(seed, 3000 + k));
    const double excess = lh.lower_bound - l.estimate * h.estimate;
    auto w = [&] {
      return json{{"L", L.describe()}, {"H", H.describe()}, {"lower_bound_LH", lh.lower_bound},
                  {"estimate_L", l.estimate}, {"estimate_H", h.estimate}};
    };
    sub.add(excess <= 1e-12, std::max(0.0, excess), w);
    if (lh.lower_bound > 0.0) {
      // the certificate factors through H: ratio_L(Hx) * ratio_H(x)
      const GradedVector& x = lh.witness.front();
      const double f = lip_ratio(L, F, F, H(x)) * lip_ratio(H, F, F, x);
      const double gap = std::abs(f - lh.lower_bound);
      factor.add(gap <= 1e-12 * (1 + lh.lower_bound), gap, w);
    }
  }
  add_tally(r, "submultiplicativity", sub, 1e-12);
  add_tally(r, "submultiplicativity_witness_factorization", factor, 1e-12);

  Tally round, transfer;
  Rng brng(derive_seed(seed, 4));
  const std::vector<FrechetSpace> spaces{F, F};
  for (std::size_t k = 0; k < 30; ++k) {
    const MultilinearMap B = gen::random_bilinear(brng, sp);
    for (int a = 0; a < 10; ++a) {
      const std::vector<GradedVector> args{random_vector(brng, 3, sp), random_vector(brng, 3, sp)};
      const GradedVector flat = B(args);
      const bool ok = curry(B).evaluate_nested(args) == flat && uncurry(curry(B))(args) == flat;
      round.add(ok, ok ? 0.0 : sup_distance(curry(B).evaluate_nested(args), flat),
                [&] { return json{{"x", to_json(args[0])}, {"y", to_json(args[1])}}; });
    }
    const auto est = multilinear_norm_estimate(B, spaces, F, s.budget, derive_seed(seed, 4000 + k));
    const double curried = multilinear_ratio(curry(B), spaces, F, est.witness);
    const double gap = std::abs(curried - est.lower_bound);
    transfer.add(gap <= 1e-12, gap, [&] {
      return json{{"x", to_json(est.witness[0])}, {"y", to_json(est.witness[1])}, {"flat", est.lower_bound},
                  {"curried", curried}};
    });
  }
  add_tally(r, "curry_roundtrip", round, 0.0);
  add_tally(r, "curry_witness_transfer", transfer, 1e-12);

  for (std::size_t i = 0; i < s.items.size(); ++i) {
    const auto& it = s.items[i];
    const auto est = lip_norm_estimate(it.map, F, F, s.budget, derive_seed(seed, 5000 + i));
    bool ok = std::isfinite(est.estimate) && est.lower_bound <= est.estimate;
    json w = nullptr;
    if (!est.witness.empty()) {
      const double again = lip_ratio(it.map, F, F, est.witness.front());
      ok = ok && std::abs(again - est.lower_bound) <= 1e-12 * (1 + est.lower_bound);
      w = to_json(est.witness.front());
    }
    r.add("operator/" + it.name, ok,
          {{"map", it.map.describe()}, {"lower_bound", num(est.lower_bound)}, {"estimate", num(est.estimate)}},
          "lower_bound <= estimate, witness reproduces lower_bound", w);
  }
  r.details = {{"space", sp}, {"budget", s.budget}};
  return r;
}

// ---------------------------------------------------------------------------
// verify-atlas

inline SuiteResult run_atlas(const ExperimentConfig& c, std::uint64_t seed) {
  const AtlasSuiteSpec& s = *c.atlas_checks;
  const Atlas& atlas = *c.atlas;
  SuiteResult r{"verify-atlas"};

  for (std::size_t i = 0; i < atlas.charts().size(); ++i) {
    const Chart& ch = atlas.charts()[i];
    const double res = chart_roundtrip_residual(ch, s.samples, derive_seed(seed, 100 + i));
    r.add("chart_roundtrip/" + ch.label, res <= s.roundtrip_tol, num(res), s.roundtrip_tol);
  }

  const CocycleReport co = cocycle_check(atlas, s.samples, derive_seed(seed, 1), s.cocycle_tol);
  json cw = nullptr;
  if (!co.violations.empty()) {
    const auto& v = co.violations.front();
    cw = {{"alpha", v.alpha}, {"beta", v.beta}, {"gamma", v.gamma}, {"point", to_json(v.point)},
          {"residual", num(v.residual)}, {"what", v.what}};
  }
  r.add("cocycle", co.pass(),
        {{"triples", co.triples_checked}, {"points", co.points_checked}, {"max_residual", num(co.max_residual)},
         {"min_pivot", num(co.min_pivot)}, {"max_solve_residual", num(co.max_solve_residual)}},
        s.cocycle_tol, cw);

  // every declared overlap, both orientations
  Rng rng(derive_seed(seed, 2));
  for (const auto& o : atlas.overlaps())
    for (int dir = 0; dir < 2; ++dir) {
      const std::string from = dir ? o.b : o.a, to = dir ? o.a : o.b;
      const Ball& region = dir ? o.in_b : o.in_a;
      const std::size_t n = atlas.chart(from).forward.dim;
      Tally lin, round;
      for (std::size_t k = 0; k < s.samples; ++k) {
        const GradedVector x = gen::in_ball(rng, region, n), v1 = gen::cube(rng, n, 2), v2 = gen::cube(rng, n, 2);
        const double cc = rng.uniform(-3, 3);
        const auto T = [&](const GradedVector& v) { return change_chart(atlas, Jet1{from, x, v}, to).v; };
        const GradedVector lhs = T(v1 + cc * v2), rhs = T(v1) + cc * T(v2);
        const double gap = scaled_gap(lhs, rhs);
        auto w = [&] { return json{{"x", to_json(x)}, {"v1", to_json(v1)}, {"v2", to_json(v2)}, {"c", cc}}; };
        lin.add(gap <= 1e-12, gap, w);
        const Jet1 there = change_chart(atlas, Jet1{from, x, v1}, to);
        const Jet1 back = change_chart(atlas, there, from);
        const double rt = std::max(sup_distance(back.x, x), sup_distance(back.v, v1));
        round.add(rt <= s.roundtrip_tol, rt, w);
      }
      add_tally(r, "jet1_linear_in_velocity/" + from + "->" + to, lin, 1e-12);
      add_tally(r, "jet1_roundtrip/" + from + "->" + to, round, s.roundtrip_tol);
    }

  for (std::size_t i = 0; i < s.jet2_examples.size(); ++i) {
    const Jet2Example& e = s.jet2_examples[i];
    const MCMap theta = expression_map("theta", {e.theta}, 1);
    const std::string tag = "jet2_example/" + std::to_string(i);
    const Jet2 t = jet2_transition(theta, {"", e.x, e.v, e.w});
    const json got = {t.x.coord(1), t.v.coord(1), t.w.coord(1)};
    if (!e.expect.empty()) {
      const double err = std::max({std::abs(t.x.coord(1) - e.expect[0]), std::abs(t.v.coord(1) - e.expect[1]),
                                   std::abs(t.w.coord(1) - e.expect[2])});
      r.add(tag + "/value", err <= e.tol, {{"theta", e.theta}, {"image", got}, {"error", num(err)}}, e.tol,
            json{{"expect", e.expect}});
    }
    const auto wit = jet2_additivity_witness(theta, e.x, s.samples, derive_seed(seed, 200 + i), e.additivity_threshold);
    json w = nullptr;
    if (wit.found)
      w = {{"first", {{"v", to_json(wit.first.v)}, {"w", to_json(wit.first.w)}}},
           {"second", {{"v", to_json(wit.second.v)}, {"w", to_json(wit.second.w)}}}};
    r.add(tag + "/additivity_violation", wit.found && wit.residual > e.additivity_threshold, num(wit.residual),
          e.additivity_threshold, w);
  }
  r.details = {{"charts", atlas.charts().size()}, {"overlaps", atlas.overlaps().size()}};
  return r;
}

// ---------------------------------------------------------------------------
// compat-check

inline SuiteResult run_compat(const ExperimentConfig& c, std::uint64_t seed) {
  const CompatSuiteSpec& s = *c.compat;
  const Atlas& atlas = *c.atlas;
  SuiteResult r{"compat-check"};
  const FrechetSpace F = FrechetSpace::standard();

  auto witness = [](const CompatibilityReport& rep) {
    return json{{"f", to_json(rep.f)}, {"g", to_json(rep.g)}, {"h", to_json(rep.h)}};
  };

  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    const CompatPair& p = s.pairs[i];
    const ChristoffelField& Gb = c.connections.at(p.connection);
    const std::string tag = "pushforward/" + p.connection + "->" + p.to;
    const MCMap theta = transition(atlas, p.to, Gb.chart), inv = transition(atlas, Gb.chart, p.to);
    const ChristoffelField Ga = pushforward_christoffel(Gb, theta, inv, p.to);
    const Ball region = atlas.overlap(p.to, Gb.chart)->in_b;
    const auto rep = compatibility_residual(Ga, Gb, theta, region, s.samples, derive_seed(seed, 10 + i), F);
    r.add(tag, rep.max_residual < s.tol, {{"max_residual", num(rep.max_residual)}, {"samples", rep.samples}}, s.tol,
          witness(rep));
  }

  std::size_t k = 0;
  for (const auto& [name, G] : c.connections) {
    ++k;
    const std::size_t n = std::max(G.base_dim, G.degree);
    std::vector<std::string> comps;
    for (std::size_t i = 1; i <= G.base_dim; ++i) comps.push_back("x" + std::to_string(i));
    const Ball region = has_chart(atlas, G.chart) ? atlas.chart(G.chart).domain
                                                  : Ball{GradedVector::zero(G.space), 1.0};
    const MCMap id = expression_map("id", comps, G.base_dim, region, G.space);
    const ChristoffelField Gi = pushforward_christoffel(G, id, id, G.chart);
    const auto rep = compatibility_residual(Gi, G, id, region, s.samples, derive_seed(seed, 500 + k), F);
    r.add("identity_pushforward/" + name, rep.max_residual <= s.identity_tol, num(rep.max_residual), s.identity_tol,
          witness(rep));

    // polarization of the diagonal u -> Gamma(u, u)
    auto Q = [G](const GradedVector& x, const GradedVector& u) { return G(x, u, u); };
    Tally diag, symm, agree;
    try {
      const ChristoffelField P = christoffel_from_diagonal(Q, G.chart, G.degree, G.base_dim, region,
                                                           derive_seed(seed, 900 + k));
      Rng rng(derive_seed(seed, 700 + k));
      for (std::size_t j = 0; j < s.samples; ++j) {
        const GradedVector x = gen::in_ball(rng, region, G.base_dim, 0.9), u = gen::cube(rng, G.degree, 1, G.space),
                           v = gen::cube(rng, G.degree, 1, G.space);
        auto w = [&] { return json{{"x", to_json(x)}, {"u", to_json(u)}, {"v", to_json(v)}}; };
        diag.add(P(x, u, u) == Q(x, u), sup_distance(P(x, u, u), Q(x, u)), w);
        symm.add(P(x, u, v) == P(x, v, u), sup_distance(P(x, u, v), P(x, v, u)), w);
        const GradedVector sym = 0.5 * (G(x, u, v) + G(x, v, u));
        const double gap = scaled_gap(P(x, u, v), sym);
        agree.add(gap <= 1e-12, gap, w);
      }
      add_tally(r, "polarization_diagonal/" + name, diag, 0.0);
      add_tally(r, "polarization_symmetry/" + name, symm, 0.0);
      add_tally(r, "polarization_recovers_symmetric_part/" + name, agree, 1e-12);
    } catch (const DomainError& e) {
      r.add("polarization_diagonal/" + name, false, nullptr, 0.0, e.what());
    }
    (void)n;
  }
  return r;
}

// ---------------------------------------------------------------------------
// split-roundtrip

inline SuiteResult run_split(const ExperimentConfig& c, std::uint64_t seed) {
  const SplitSuiteSpec& s = *c.split;
  const ChristoffelField& G = c.connections.at(s.connection);
  SuiteResult r{"split-roundtrip"};
  const Ball region = c.atlas && has_chart(*c.atlas, G.chart) ? c.atlas->chart(G.chart).domain
                                                              : Ball{GradedVector::zero(G.space), 1.0};
  Rng rng(derive_seed(seed, 1));
  Tally ms, sm, fiber;
  for (std::size_t k = 0; k < s.jets; ++k) {
    const Jet2 j{G.chart, gen::in_ball(rng, region, G.base_dim, 0.5), gen::cube(rng, G.degree, 2, G.space),
                 gen::cube(rng, G.degree, 2, G.space)};
    auto w = [&] { return json{{"x", to_json(j.x)}, {"v", to_json(j.v)}, {"w", to_json(j.w)}}; };
    const auto [a, b] = split_second_tangent(G, j);
    const Jet2 back = merge_second_tangent(G, a, b);
    const double g1 = std::max(scaled_gap(back.w, j.w), sup_distance(back.v, j.v) + sup_distance(back.x, j.x));
    ms.add(g1 <= s.tol, g1, w);
    const auto [a2, b2] = split_second_tangent(G, back);
    const double g2 = std::max(scaled_gap(b2.v, b.v), sup_distance(a2.v, a.v));
    sm.add(g2 <= s.tol, g2, w);
    // the first component is the 1-jet projection, untouched by the connection
    fiber.add(a.v == j.v && a.x == j.x && b.x == j.x, 0.0, w);
  }
  add_tally(r, "merge_after_split", ms, s.tol);
  add_tally(r, "split_after_merge", sm, s.tol);
  add_tally(r, "first_component_is_projection", fiber, 0.0);
  r.details = {{"connection", s.connection}, {"chart", G.chart}};
  return r;
}

// ---------------------------------------------------------------------------
// ode-roundtrip

inline SuiteResult run_ode(const ExperimentConfig& c, std::uint64_t seed) {
  const OdeSuiteSpec& s = *c.odes;
  SuiteResult r{"ode-roundtrip"};
  for (std::size_t i = 0; i < s.systems.size(); ++i) {
    const OdeSpec& o = s.systems[i];
    const OdeSystem sys = ode_from_expressions(o.matrix, o.t_lo, o.t_hi);
    const ChristoffelField G = ode_to_connection(sys, o.name);
    const OdeSystem again = connection_to_ode(G, o.t_lo, o.t_hi);
    const ChristoffelField G2 = ode_to_connection(again, o.name);
    Rng rng(derive_seed(seed, 10 + i));
    Tally ode_id, conn_id;
    for (std::size_t k = 0; k < s.samples; ++k) {
      const double t = rng.uniform(o.t_lo, o.t_hi);
      const GradedVector u = gen::cube(rng, sys.degree, 2), sv{rng.uniform(-2, 2)};
      auto w = [&] { return json{{"t", t}, {"u", to_json(u)}, {"s", to_json(sv)}}; };
      const GradedVector a = sys.at(t).apply(u), b = again.at(t).apply(u);
      ode_id.add(a == b, sup_distance(a, b), w);
      const GradedVector ga = G(GradedVector{t}, u, sv), gb = G2(GradedVector{t}, u, sv);
      conn_id.add(ga == gb, sup_distance(ga, gb), w);
    }
    add_tally(r, "ode_connection_ode/" + o.name, ode_id, 0.0);
    add_tally(r, "connection_ode_connection/" + o.name, conn_id, 0.0);

    if (o.transfer) {
      const OdeTransferSpec& tr = *o.transfer;
      const MCMap phi_inv = expression_map("phi_inverse", {tr.phi_inverse}, 1);
      const OdeSystem moved = transfer_ode(sys, phi_inv, tr.t_lo, tr.t_hi);
      // reference: symbolic derivative of the chart inverse, matrix entries evaluated directly
      const expr::Expr pe = expr::parse(tr.phi_inverse, {.dimension = 1, .allow_t = false});
      const expr::Expr dpe = expr::differentiate(pe, 1);
      std::vector<expr::Expr> entries;
      for (const auto& row : o.matrix)
        for (const auto& e : row) entries.push_back(expr::parse(e, {.dimension = 0}));
      Tally law;
      for (std::size_t k = 0; k < s.samples; ++k) {
        const double t = rng.uniform(tr.t_lo, tr.t_hi);
        const GradedVector u = gen::cube(rng, sys.degree, 2);
        const std::vector<double> tv{t};
        const double src = expr::eval(pe, tv), ds = expr::eval(dpe, tv);
        std::vector<double> ref(sys.degree, 0.0);
        for (std::size_t a = 0; a < sys.degree; ++a)
          for (std::size_t b = 0; b < sys.degree; ++b)
            ref[a] += ds * expr::eval(entries[a * sys.degree + b], std::span<const double>{}, src) * u.coord(b + 1);
        const GradedVector got = moved.at(t).apply(u), want(ref);
        const double gap = scaled_gap(got, want);
        law.add(gap <= s.transfer_tol, gap, [&] { return json{{"t", t}, {"u", to_json(u)}}; });
      }
      add_tally(r, "chart_transfer/" + o.name, law, s.transfer_tol);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// integrate / flow / uniqueness

/// Builds the local field; missing bounds are estimated on B_r(p0) by
/// sampling, inflated by 10%, and flagged heuristic.
inline VectorFieldLocal build_field(const FieldSpec& fs, const GradedVector& p0, double r, std::uint64_t seed,
                                    std::string chart = {}) {
  VectorFieldLocal f = expression_field(chart.empty() ? fs.chart : chart, fs.components, fs.L_sup.value_or(0.0),
                                        fs.R_lip.value_or(0.0));
  if (!fs.L_sup || !fs.R_lip) {
    const auto [L, R] = estimate_bounds(f, p0, r, 4096, seed);
    if (!fs.L_sup) f.L_sup = 1.1 * L + 1e-12;
    if (!fs.R_lip) f.R_lip = 1.1 * R + 1e-12;
    f.heuristic_bounds = true;
  }
  return f;
}

inline json number_list(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline json certificate_json(const CurveSolution& sol, const PicardProblem& p) {
  return {{"parameters",
           {{"p0", to_json(p.p0)}, {"t0", p.t0}, {"r", p.r}, {"m", sol.m}, {"grid_step", sol.step},
            {"tol", p.tol}, {"L_sup", p.field.L_sup}, {"R_lip", p.field.R_lip}}},
          {"iterations", sol.n_iters},
          {"certified_bound", number_list(sol.certified_bound)},
          {"successive_diff", number_list(sol.successive_diff)},
          {"successive_diff_d", number_list(sol.successive_diff_d)},
          {"tail", num(sol.tail)},
          {"quadrature_error_estimate", num(sol.quadrature_error_estimate)},
          {"refinement_diff", num(sol.refinement_diff)},
          {"residual_max", num(sol.residual_max)},
          {"certificate", num(sol.certificate())},
          {"heuristic_bounds", sol.heuristic_bounds}};
}

inline std::string format_csv_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_curve_csv(const std::filesystem::path& path, const CurveSolution& sol) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::size_t dim = sol.final().empty() ? 0 : std::max<std::size_t>(1, sol.final().front().degree());
  std::size_t n = dim;
  for (const auto& p : sol.final()) n = std::max(n, p.degree());
  out << "t";
  for (std::size_t i = 1; i <= n; ++i) out << ",x" << i;
  out << "\n";
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    out << format_csv_number(sol.times[k]);
    for (std::size_t i = 1; i <= n; ++i) out << "," << format_csv_number(sol.final()[k].coord(i));
    out << "\n";
  }
}

inline SuiteResult run_integrate(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& opt) {
  SuiteResult r{"integrate"};
  json details = json::object();
  for (std::size_t i = 0; i < c.integrate.size(); ++i) {
    const IntegrateSpec& s = c.integrate[i];
    const std::string tag = s.name;
    try {
      PicardProblem p;
      p.field = build_field(c.fields.at(s.field), s.p0, s.r, derive_seed(seed, 50 + i));
      p.p0 = s.p0;
      p.t0 = s.t0;
      p.r = s.r;
      p.grid_step = opt.grid_step.value_or(s.grid_step);
      p.tol = opt.tol.value_or(s.tol);
      p.seed = derive_seed(seed, 100 + i);
      const CurveSolution sol = picard_solve(p, s.max_iters);
      details[tag] = certificate_json(sol, p);
      r.add(tag + "/bound_soundness", sol.sound(),
            {{"successive_diff", number_list(sol.successive_diff)}},
            number_list(sol.certified_bound));
      r.add(tag + "/certificate_finite", std::isfinite(sol.certificate()), num(sol.certificate()), "finite");
      if (!s.exact.empty()) {
        std::vector<expr::Expr> ex;
        for (const auto& e : s.exact) ex.push_back(expr::parse(e, {.dimension = 0}));
        double err = 0.0, t_worst = s.t0;
        for (std::size_t k = 0; k < sol.times.size(); ++k) {
          const double t = sol.times[k];
          for (std::size_t d = 0; d < ex.size(); ++d) {
            const double e = std::abs(sol.final()[k].coord(d + 1) - expr::eval(ex[d], std::span<const double>{}, t));
            if (e > err) {
              err = e;
              t_worst = t;
            }
          }
        }
        r.add(tag + "/sup_error_within_certificate", err <= sol.certificate(),
              {{"sup_error", num(err)}, {"t_worst", t_worst}}, num(sol.certificate()));
      }
      if (s.csv && opt.write_files) {
        const std::string file = s.name + ".csv";
        write_curve_csv(opt.out_dir / file, sol);
        r.files.push_back(file);
      }
    } catch (const std::exception& e) {
      r.add(tag + "/error", false, nullptr, nullptr, e.what());
    }
  }
  r.details = details;
  return r;
}

inline SuiteResult run_flow(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& opt) {
  SuiteResult r{"flow"};
  json details = json::object();
  for (std::size_t i = 0; i < c.flows.size(); ++i) {
    const FlowSpec& s = c.flows[i];
    try {
      PicardProblem base;
      base.field = build_field(c.fields.at(s.field), s.p0, s.r, derive_seed(seed, 50 + i));
      base.p0 = s.p0;
      base.r = s.r;
      base.grid_step = opt.grid_step.value_or(s.grid_step);
      base.tol = opt.tol.value_or(s.tol);
      base.seed = derive_seed(seed, 100 + i);
      const FlowResult f = flow(base.field, s.q, s.t, base, s.max_iters);
      details[s.name] = {{"point", to_json(f.point)}, {"certificate", num(f.certificate)},
                         {"heuristic_bounds", base.field.heuristic_bounds}};
      r.add(s.name + "/certificate_finite", std::isfinite(f.certificate), num(f.certificate), "finite");
      if (!s.expected.empty()) {
        const double err = sup_distance(f.point, GradedVector(s.expected, f.point.space()));
        r.add(s.name + "/matches_expected", err <= f.certificate, {{"error", num(err)}, {"point", to_json(f.point)}},
              num(f.certificate), json{{"expected", s.expected}});
      }
      if (s.semigroup && s.t != 0.0) {
        // flow(flow(q, t/2), t/2) against flow(q, t); the first half's error is
        // carried along by at most exp(R |t| / 2)
        const FlowResult half = flow(base.field, s.q, s.t / 2, base, s.max_iters);
        const FlowResult twice = flow(base.field, half.point, s.t / 2, base, s.max_iters);
        const double gap = sup_distance(twice.point, f.point);
        const double tol = half.certificate * std::exp(base.field.R_lip * std::abs(s.t) / 2) + twice.certificate +
                           f.certificate;
        r.add(s.name + "/semigroup", gap <= tol, num(gap), num(tol));
      }
    } catch (const std::exception& e) {
      r.add(s.name + "/error", false, nullptr, nullptr, e.what());
    }
  }
  r.details = details;
  return r;
}

inline SuiteResult run_uniqueness(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& opt) {
  SuiteResult r{"uniqueness"};
  json details = json::object();
  for (std::size_t i = 0; i < c.uniqueness.size(); ++i) {
    const UniquenessSpec& s = c.uniqueness[i];
    try {
      const Atlas& atlas = s.atlas ? *s.atlas : *c.atlas;
      const MCMap theta = transition(atlas, s.alpha, s.beta);
      const Matrix D = differential_matrix(theta, s.p, theta.dim);
      const double lip = D.rowwise().lpNorm<1>().maxCoeff();
      std::map<std::string, VectorFieldLocal> fields;
      for (const auto& [chart, fname] : s.fields) {
        // heuristic bounds are sampled around the start point in that chart
        const bool is_alpha = chart == s.alpha && s.alpha != s.beta;
        const GradedVector p = is_alpha ? theta(s.p) : s.p;
        const double rr = is_alpha ? s.r * lip : s.r;
        fields.emplace(chart, build_field(c.fields.at(fname), p, rr, derive_seed(seed, 50 + i), chart));
      }
      PicardProblem params;
      params.r = s.r;
      params.grid_step = opt.grid_step.value_or(s.grid_step);
      params.tol = opt.tol.value_or(s.tol);
      params.seed = derive_seed(seed, 100 + i);
      const UniquenessReport rep = uniqueness_overlap_check(atlas, fields, s.alpha, s.beta, s.p, params, 1e-8,
                                                            s.max_iters);
      details[s.name] = {{"deviation", num(rep.deviation)},
                         {"tolerance", num(rep.tolerance)},
                         {"t_worst", rep.t_worst},
                         {"nodes", rep.nodes},
                         {"transformation_residual", num(rep.transformation_residual)}};
      r.add(s.name + "/deviation_within_certificate", rep.pass(), num(rep.deviation), num(rep.tolerance),
            json{{"t_worst", rep.t_worst}});
      r.add(s.name + "/deviation_below_threshold", rep.deviation < s.deviation_tol, num(rep.deviation),
            s.deviation_tol, json{{"t_worst", rep.t_worst}});
    } catch (const std::exception& e) {
      r.add(s.name + "/error", false, nullptr, nullptr, e.what());
    }
  }
  r.details = details;
  return r;
}

// ---------------------------------------------------------------------------
// dispatch and report

/// Config pointer of the section a suite needs, or empty when configured.
inline std::string missing_section(const ExperimentConfig& c, const std::string& suite) {
  if (suite == "verify-metric") return c.metric ? "" : "/metric";
  if (suite == "verify-ops") return c.operators ? "" : "/operators";
  if (suite == "verify-atlas") return c.atlas_checks ? "" : "/atlas_checks";
  if (suite == "compat-check") return c.compat ? "" : "/compat";
  if (suite == "split-roundtrip") return c.split ? "" : "/split";
  if (suite == "ode-roundtrip") return c.odes ? "" : "/odes";
  if (suite == "integrate") return c.integrate.empty() ? "/integrate" : "";
  if (suite == "flow") return c.flows.empty() ? "/flow" : "";
  if (suite == "uniqueness") return c.uniqueness.empty() ? "/uniqueness" : "";
  throw ConfigError("", "unknown suite '" + suite + "'");
}

inline std::uint64_t resolve_seed(const ExperimentConfig& c, const RunOptions& opt, const std::string& suite) {
  if (opt.seed) return *opt.seed;
  if (c.seed) return *c.seed;
  throw ConfigError("/seed", "suite '" + suite + "' is randomized and needs a seed (config or --seed)");
}

/// Runs one configured suite; unexpected exceptions become a failed check.
inline SuiteResult run_suite(const ExperimentConfig& c, const std::string& suite, const RunOptions& opt) {
  const std::uint64_t seed = resolve_seed(c, opt, suite);
  try {
    if (suite == "verify-metric") return run_metric(c, seed);
    if (suite == "verify-ops") return run_ops(c, seed);
    if (suite == "verify-atlas") return run_atlas(c, seed);
    if (suite == "compat-check") return run_compat(c, seed);
    if (suite == "split-roundtrip") return run_split(c, seed);
    if (suite == "ode-roundtrip") return run_ode(c, seed);
    if (suite == "integrate") return run_integrate(c, seed, opt);
    if (suite == "flow") return run_flow(c, seed, opt);
    if (suite == "uniqueness") return run_uniqueness(c, seed, opt);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    SuiteResult r{suite};
    r.add("error", false, nullptr, nullptr, e.what());
    return r;
  }
  throw ConfigError("", "unknown suite '" + suite + "'");
}

struct Skip {
  std::string suite, reason;
};

struct Report {
  std::string subcommand;
  std::uint64_t seed = 0;
  std::vector<SuiteResult> suites;
  std::vector<Skip> skipped;

  bool pass() const {
    for (const auto& s : suites)
      if (!s.pass()) return false;
    return true;
  }

  json to_json() const {
    std::vector<const SuiteResult*> order;
    for (const auto& s : suites) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->name < b->name; });
    json js = json::array();
    std::size_t total = 0, failed = 0;
    for (const auto* s : order) {
      std::vector<const Check*> cs;
      for (const auto& ch : s->checks) cs.push_back(&ch);
      std::stable_sort(cs.begin(), cs.end(), [](auto* a, auto* b) { return a->name < b->name; });
      json checks = json::array();
      for (const auto* ch : cs) {
        checks.push_back({{"name", ch->name}, {"pass", ch->pass}, {"value", ch->value}, {"threshold", ch->threshold},
                          {"witness", ch->witness}});
        ++total;
        failed += ch->pass ? 0 : 1;
      }
      js.push_back({{"name", s->name}, {"pass", s->pass()}, {"checks", checks}, {"details", s->details},
                    {"files", s->files}});
    }
    std::vector<Skip> sk = skipped;
    std::sort(sk.begin(), sk.end(), [](const Skip& a, const Skip& b) { return a.suite < b.suite; });
    json jk = json::array();
    for (const auto& s : sk) jk.push_back({{"suite", s.suite}, {"reason", s.reason}});
    return {{"schema_version", kSchemaVersion},
            {"subcommand", subcommand},
            {"seed", seed},
            {"pass", pass()},
            {"summary", {{"checks", total}, {"failed", failed}, {"suites", suites.size()}, {"skipped", sk.size()}}},
            {"suites", js},
            {"skipped", jk}};
  }
};

/// `all` runs the selected suites (or every suite) and reports the rest as
/// skipped; a named subcommand runs exactly that suite and requires its
/// config section.
inline Report run_experiment(const ExperimentConfig& c, const std::string& subcommand,
                             const std::vector<std::string>& selection, const RunOptions& opt) {
  Report rep;
  rep.subcommand = subcommand;
  std::vector<std::string> chosen;
  if (subcommand == "all") {
    const std::vector<std::string>& sel = !selection.empty() ? selection : c.suites;
    for (const auto& s : sel)
      if (!is_suite_name(s)) throw ConfigError(selection.empty() ? "/suites" : "", "unknown suite '" + s + "'");
    for (const auto& s : suite_names()) {
      const bool wanted = sel.empty() || std::find(sel.begin(), sel.end(), s) != sel.end();
      if (!wanted) {
        rep.skipped.push_back({s, "not selected"});
        continue;
      }
      const std::string missing = missing_section(c, s);
      if (!missing.empty()) {
        if (!sel.empty()) throw ConfigError(missing, "suite '" + s + "' was selected but is not configured");
        rep.skipped.push_back({s, "not configured (" + missing + " absent)"});
        continue;
      }
      chosen.push_back(s);
    }
  } else {
    if (!is_suite_name(subcommand)) throw ConfigError("", "unknown subcommand '" + subcommand + "'");
    for (const auto& s : selection)
      if (s != subcommand) throw ConfigError("", "--suite " + s + " conflicts with subcommand " + subcommand);
    const std::string missing = missing_section(c, subcommand);
    if (!missing.empty()) throw ConfigError(missing, "required by " + subcommand);
    chosen.push_back(subcommand);
  }
  if (!chosen.empty()) rep.seed = resolve_seed(c, opt, chosen.front());
  if (opt.write_files && !chosen.empty()) std::filesystem::create_directories(opt.out_dir);
  for (const auto& s : chosen) rep.suites.push_back(run_suite(c, s, opt));
  return rep;
}

}  // namespace bfm
