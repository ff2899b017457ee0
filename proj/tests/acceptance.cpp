// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
// Thresholds are fixed here, not read from a config.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "bfm/bfm.hpp"
#include "bfm/experiment.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace bfm;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream note;

  void need(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note << " [failed: " << what << "]";
    }
  }
};

std::vector<double> raw(const GradedVector& v) { return {v.coords().begin(), v.coords().end()}; }

double half_pow(std::size_t n) { return std::pow(0.5, static_cast<double>(n)); }

double scaled(const GradedVector& a, const GradedVector& b) {
  return sup_distance(a, b) / (1.0 + std::max(a.sup_norm(), b.sup_norm()));
}

GradedVector box(Rng& rng, std::size_t n, double r) {
  std::vector<double> c(n);
  for (double& x : c) x = rng.uniform(-r, r);
  return GradedVector(c);
}

// ---------------------------------------------------------------------------

void metric(Outcome& o) {
  const FrechetSpace F = FrechetSpace::standard();
  Rng rng(101);
  std::size_t bad_axiom = 0;
  double worst_tri = 0.0, worst_shift = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const GradedVector e = random_vector(rng, 8, F.id()), f = random_vector(rng, 8, F.id()),
                       g = random_vector(rng, 8, F.id()), h = random_vector(rng, 8, F.id());
    const double ef = F.distance(e, f);
    if (F.distance(e, e) != 0.0 || ef != F.distance(f, e) || (!(e == f) && !(ef > 0.0))) ++bad_axiom;
    worst_tri = std::max(worst_tri, F.distance(e, g) - ef - F.distance(f, g));
    worst_shift = std::max(worst_shift, std::abs(F.distance(e + h, f + h) - ef));
  }
  o.need(bad_axiom == 0, "identity/symmetry/positivity");
  o.need(worst_tri <= 1e-12, "triangle");
  o.need(worst_shift <= 1e-12, "translation invariance");

  std::size_t conv_bad = 0;
  for (double radius : {0.01, 0.1, 0.3}) conv_bad += check_absolutely_convex(F, radius, 10000, 102, 1e-12).violations;
  o.need(conv_bad == 0, "ball convexity");

  std::size_t mismatch = 0;
  for (int k = 0; k < 1000; ++k) {
    const GradedVector e = random_vector(rng, 12, F.id(), -8, 8), f = random_vector(rng, 12, F.id(), -8, 8);
    if (metric_distance(F, e, f) != oracle::standard_norm(raw(e - f), half_pow)) ++mismatch;
  }
  o.need(mismatch == 0, "term enumeration");
  o.note << "triangle excess " << worst_tri << ", translation " << worst_shift << ", convexity violations "
         << conv_bad << ", oracle mismatches " << mismatch << "/1000";
}

void operators(Outcome& o) {
  const FrechetSpace F = FrechetSpace::standard();
  const std::string sp = F.id();
  const auto id = lip_norm_estimate(LinearMap::identity(sp), F, F, 300, 201);
  const auto two = lip_norm_estimate(LinearMap::scalar(2.0, sp), F, F, 300, 202);
  o.need(id.lower_bound == 1.0, "identity lower bound");
  o.need(two.lower_bound >= 1.99 && two.lower_bound <= 2.0, "scalar(2) lower bound");

  Rng rng(203);
  std::size_t sub_bad = 0;
  for (int k = 0; k < 200; ++k) {
    const LinearMap L = gen::random_structured(rng, sp), H = gen::random_structured(rng, sp);
    const double lh = lip_norm_estimate(compose(L, H), F, F, 300, 1000 + k).lower_bound;
    const double l = lip_norm_estimate(L, F, F, 300, 2000 + k).estimate;
    const double h = lip_norm_estimate(H, F, F, 300, 3000 + k).estimate;
    if (lh > l * h + 1e-12) ++sub_bad;
  }
  o.need(sub_bad == 0, "submultiplicativity");

  std::size_t curry_bad = 0;
  double transfer = 0.0;
  const std::vector<FrechetSpace> spaces{F, F};
  for (int k = 0; k < 30; ++k) {
    const MultilinearMap B = gen::random_bilinear(rng, sp);
    for (int a = 0; a < 10; ++a) {
      const std::vector<GradedVector> args{random_vector(rng, 3, sp), random_vector(rng, 3, sp)};
      if (!(curry(B).evaluate_nested(args) == B(args)) || !(uncurry(curry(B))(args) == B(args))) ++curry_bad;
    }
    const auto est = multilinear_norm_estimate(B, spaces, F, 300, 4000 + k);
    transfer = std::max(transfer, std::abs(multilinear_ratio(curry(B), spaces, F, est.witness) - est.lower_bound));
  }
  o.need(curry_bad == 0, "curry roundtrip");
  o.need(transfer <= 1e-12, "witness transfer");
  o.note << "id " << id.lower_bound << ", 2*id " << two.lower_bound << ", submult violations " << sub_bad
         << "/200, curry mismatches " << curry_bad << ", transfer gap " << transfer;
}

void calculus(Outcome& o) {
  const MapCatalog cat = standard_catalog();
  FdOptions fd;
  fd.use_analytic = false;
  Rng rng(301);
  double fd_gap = 0.0, fd_oracle = 0.0;
  int samples = 0;
  for (const auto& name : cat.names()) {
    const MCMap& P = cat.at(name);
    for (int s = 0; s < 15; ++s, ++samples) {
      const GradedVector p = box(rng, P.dim, 1.5), h = box(rng, P.dim, 1.0);
      const GradedVector exact = apply_matrix(P.jacobian(p), h, P.codomain_space);
      fd_gap = std::max(fd_gap, sup_distance(directional_derivative(P, p, h, fd).value, exact) /
                                    (1 + exact.sup_norm()));
      // independent: five-point stencil of t -> P(p + t h)
      for (std::size_t i = 1; i <= P.dim; ++i) {
        const double ref = oracle::five_point([&](double t) { return P.fn(p + t * h).coord(i); }, 0.0);
        fd_oracle = std::max(fd_oracle, std::abs(ref - exact.coord(i)) / (1 + std::abs(ref)));
      }
    }
  }
  o.need(samples >= 100 && fd_gap <= 1e-8, "finite differences vs analytic");
  o.need(fd_oracle <= 1e-7, "five-point oracle");

  double chain = 0.0;
  for (const auto& [gn, hn] : std::vector<std::pair<std::string, std::string>>{
           {"trig_mix", "rational"}, {"rational", "trig_mix"}, {"log_mix", "product"}, {"square_first", "linear"}}) {
    const MCMap gh = compose_maps(cat.at(gn), cat.at(hn)), plain = compose_maps(cat.at(gn), cat.at(hn), false);
    for (int s = 0; s < 25; ++s) {
      const GradedVector p = box(rng, 2, 0.3), h = box(rng, 2, 1.0);
      chain = std::max(chain, sup_distance(apply_matrix(gh.jacobian(p), h, gh.codomain_space),
                                           directional_derivative(plain, p, h, fd).value));
    }
  }
  o.need(chain < 1e-7, "chain rule");

  double sym = 0.0;
  for (const auto& name : cat.names()) {
    const MCMap& P = cat.at(name);
    for (int s = 0; s < 12; ++s) {
      const GradedVector p = box(rng, P.dim, 1.2), h = box(rng, P.dim, 1.0), g = box(rng, P.dim, 1.0);
      sym = std::max(sym, sup_distance(second_differential(P, p, h, g, fd), second_differential(P, p, g, h, fd)));
    }
  }
  o.need(sym < 1e-6, "second differential symmetry");
  o.note << samples << " samples, fd gap " << fd_gap << ", oracle gap " << fd_oracle << ", chain " << chain
         << ", D2 asymmetry " << sym;
}

void jets(Outcome& o) {
  const Atlas atlas = three_chart_atlas();
  Rng rng(401);
  double lin = 0.0;
  for (const auto& ov : atlas.overlaps())
    for (int dir = 0; dir < 2; ++dir) {
      const std::string from = dir ? ov.b : ov.a, to = dir ? ov.a : ov.b;
      const Ball& region = dir ? ov.in_b : ov.in_a;
      const std::size_t n = atlas.chart(from).forward.dim;
      for (int k = 0; k < 100; ++k) {
        const GradedVector x = gen::in_ball(rng, region, n), v1 = box(rng, n, 2), v2 = box(rng, n, 2);
        const double c = rng.uniform(-3, 3);
        const auto T = [&](const GradedVector& v) { return change_chart(atlas, Jet1{from, x, v}, to).v; };
        lin = std::max(lin, scaled(T(v1 + c * v2), T(v1) + c * T(v2)));
      }
    }
  o.need(lin <= 1e-12, "1-jet linearity");

  const MCMap theta = expression_map("theta", {"x1^3 + x1"}, 1);
  const Jet2 img = jet2_transition(theta, {"", GradedVector{1.0}, GradedVector{1.0}, GradedVector{}});
  // hand values of x^3 + x at 1: value 2, first derivative 4, second 6
  const auto f = [](double x) { return x * x * x + x; };
  const double d1 = oracle::five_point(f, 1.0);
  const double d2 = oracle::five_point([&](double x) { return oracle::five_point(f, x); }, 1.0);
  const double err = std::max({std::abs(img.x.coord(1) - 2), std::abs(img.v.coord(1) - 4), std::abs(img.w.coord(1) - 6)});
  o.need(err <= 1e-8, "2-jet example");
  o.need(std::abs(d1 - 4) < 1e-8 && std::abs(d2 - 6) < 1e-6, "2-jet oracle");

  const auto wit = jet2_additivity_witness(theta, GradedVector{1.0}, 100, 402, 0.1);
  o.need(wit.found && wit.residual > 0.1, "additivity witness");
  const CocycleReport co = cocycle_check(atlas, 100, 403, 1e-9);
  o.need(co.pass() && co.max_residual < 1e-9, "cocycle");
  o.note << "linearity gap " << lin << ", jet2 (" << img.x.coord(1) << ", " << img.v.coord(1) << ", "
         << img.w.coord(1) << "), additivity residual " << wit.residual << ", cocycle " << co.max_residual;
}

void connections(Outcome& o) {
  const Atlas atlas = three_chart_atlas();
  const FrechetSpace F = FrechetSpace::standard();
  const ChristoffelField flat = zero_christoffel("id", 1);
  const ChristoffelField curved = christoffel_from_coefficients("id", 1, 1, {{{1, 1, 1}, "x1^2 - 0.5"}});
  const ChristoffelField curved_cubic = christoffel_from_coefficients("cubic", 1, 1, {{{1, 1, 1}, "sin(x1)"}});
  double compat = 0.0;
  std::uint64_t seed = 501;
  for (const auto& [G, to] : std::vector<std::pair<ChristoffelField, std::string>>{
           {flat, "cubic"}, {curved, "quintic"}, {curved_cubic, "quintic"}}) {
    const MCMap theta = transition(atlas, to, G.chart), inv = transition(atlas, G.chart, to);
    const ChristoffelField Ga = pushforward_christoffel(G, theta, inv, to);
    compat = std::max(compat,
                      compatibility_residual(Ga, G, theta, atlas.overlap(to, G.chart)->in_b, 100, seed++, F).max_residual);
  }
  o.need(compat < 1e-7, "compatibility");

  // independent closed form for a one-coordinate change y = x^3 + x
  const MCMap cube = expression_map("theta", {"x1^3 + x1"}, 1, Ball{GradedVector::zero(), 1.0});
  const MCMap cube_inv = numeric_inverse(cube, "inv", Ball{GradedVector::zero(), 2.0}, GradedVector::zero());
  const ChristoffelField pushed = pushforward_christoffel(
      christoffel_from_coefficients("beta", 1, 1, {{{1, 1, 1}, "x1^2 - 0.5"}}), cube, cube_inv, "alpha");
  double closed = 0.0;
  for (int i = -10; i <= 10; ++i) {
    const double y = 0.15 * i;
    const double x = oracle::bisect_increasing([](double s) { return s * s * s + s; }, y, -1.0, 1.0);
    const double a = 3 * x * x + 1, b = 6 * x, c = x * x - 0.5;
    const double want = (a * c - b) / (a * a);
    closed = std::max(closed, std::abs(pushed(GradedVector{y}, GradedVector{1.0}, GradedVector{1.0}).coord(1) - want) /
                                  (1 + std::abs(want)));
  }
  o.need(closed <= 1e-9, "closed-form pushforward");

  double ident = 0.0;
  for (const auto& G : {flat, curved}) {
    const Ball region = atlas.chart("id").domain;
    const MCMap id = expression_map("id", {"x1"}, 1, region);
    ident = std::max(ident,
                     compatibility_residual(pushforward_christoffel(G, id, id, "id"), G, id, region, 100, seed++, F)
                         .max_residual);
  }
  o.need(ident <= 1e-12, "identity pushforward");

  Rng rng(502);
  double split = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Jet2 j{"id", box(rng, 1, 0.5), box(rng, 1, 2), box(rng, 1, 2)};
    const auto [a, b] = split_second_tangent(curved, j);
    const Jet2 back = merge_second_tangent(curved, a, b);
    split = std::max({split, scaled(back.w, j.w), sup_distance(back.v, j.v) + sup_distance(back.x, j.x)});
  }
  o.need(split <= 1e-12, "split/merge");

  auto Q = [curved](const GradedVector& x, const GradedVector& u) { return curved(x, u, u); };
  const ChristoffelField P = christoffel_from_diagonal(Q, "id", 1, 1, atlas.chart("id").domain, 503);
  std::size_t diag_bad = 0;
  for (int k = 0; k < 100; ++k) {
    const GradedVector x = box(rng, 1, 0.9), u = box(rng, 1, 1);
    if (!(P(x, u, u) == Q(x, u))) ++diag_bad;
  }
  o.need(diag_bad == 0, "polarization diagonal");
  o.note << "compat " << compat << ", closed form " << closed << ", identity " << ident << ", split " << split
         << ", diagonal mismatches " << diag_bad;
}

void odes(Outcome& o) {
  const OdeSystem sys = ode_from_expressions({{"sin(t)", "1"}, {"t^2", "-exp(t)"}}, -1, 1);
  const OdeSystem back = connection_to_ode(ode_to_connection(sys, "id"), -1, 1);
  Rng rng(601);
  std::size_t bad = 0;
  for (int k = 0; k < 100; ++k) {
    const double t = rng.uniform(-1, 1);
    const GradedVector u = box(rng, 2, 3);
    if (!(back.at(t).apply(u) == sys.at(t).apply(u))) ++bad;
  }
  o.need(bad == 0, "ODE roundtrip");

  // phi(t) = t/2 has inverse 2t; the moved system is 2 A(2t)
  const OdeSystem src = ode_from_expressions({{"cos(t)", "t"}, {"0", "t^3 - 1"}}, -2, 2);
  const OdeSystem moved =
      transfer_ode(src, expression_map("phi_inv", {"2*x1"}, 1, Ball{GradedVector::zero(), 1.0}), -0.99, 0.99);
  double gap = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double t = rng.uniform(-0.99, 0.99);
    const GradedVector u = box(rng, 2, 1);
    const GradedVector want{2 * (std::cos(2 * t) * u.coord(1) + 2 * t * u.coord(2)),
                            2 * (8 * t * t * t - 1) * u.coord(2)};
    gap = std::max(gap, sup_distance(moved.at(t).apply(u), want));
  }
  o.need(gap <= 1e-9, "chart transfer");
  o.note << "roundtrip mismatches " << bad << "/100, transfer gap " << gap;
}

void integration(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  PicardProblem p;
  p.field = expression_field("id", {"x1"}, 2.0, 1.0);
  p.p0 = GradedVector{1.0};
  p.r = 1.0;
  p.grid_step = 1e-3;
  p.tol = 1e-12;
  const CurveSolution sol = picard_solve(p, 8);
  o.need(sol.m == 0.5, "horizon m = 0.5");
  o.need(sol.n_iters == 8, "8 iterations");
  const double quad = sol.quadrature_error_estimate;

  double err = 0.0, iterate_gap = 0.0;
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    const double t = sol.times[k];
    err = std::max(err, std::abs(sol.final()[k].coord(1) - std::exp(t)));
    // Picard iterates of x' = x from 1 are the exponential partial sums
    for (std::size_t n = 0; n < sol.iterates.size(); ++n)
      iterate_gap = std::max(iterate_gap, std::abs(sol.iterates[n][k].coord(1) - oracle::exp_partial_sum(t, static_cast<int>(n))));
  }
  const double bound = error_bound(2, 1, 8, 0.5) + quad;
  o.need(err <= bound, "sup error within bound");
  o.need(iterate_gap <= quad, "iterates match partial sums");

  std::size_t unsound = 0;
  for (std::size_t n = 0; n < sol.successive_diff.size(); ++n)
    if (sol.successive_diff[n] > error_bound(2, 1, static_cast<int>(n), 0.5) + quad) ++unsound;
  o.need(unsound == 0 && sol.successive_diff.size() == 8, "per-iteration soundness");

  PicardProblem base = p;
  const FlowResult fl = flow(p.field, GradedVector{1.0}, 0.1, base);
  const double flow_err = std::abs(fl.point.coord(1) - std::exp(0.1));
  o.need(flow_err <= fl.certificate, "flow(1, 0.1)");

  const ExperimentConfig cfg = load_config(std::string(BFM_CONFIG_DIR) + "/default.json");
  const UniquenessSpec& u = cfg.uniqueness.at(1);
  std::map<std::string, VectorFieldLocal> fields;
  for (const auto& [chart, name] : u.fields) {
    const FieldSpec& fs = cfg.fields.at(name);
    fields.emplace(chart, expression_field(chart, fs.components, *fs.L_sup, *fs.R_lip));
  }
  PicardProblem params;
  params.r = u.r;
  params.grid_step = 1e-3;
  params.tol = 1e-12;
  const UniquenessReport rep = uniqueness_overlap_check(*u.atlas, fields, u.alpha, u.beta, u.p, params);
  o.need(rep.deviation < 1e-6, "two-chart uniqueness");

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.need(secs < 5.0, "runtime");
  o.note << "m " << sol.m << ", sup error " << err << " <= " << bound << ", iterate gap " << iterate_gap
         << ", flow error " << flow_err << ", uniqueness deviation " << rep.deviation << ", " << secs << " s";
}

expr::Expr random_tree(Rng& rng, int depth) {
  using namespace expr;
  if (depth == 0 || rng.uniform() < 0.25) {
    if (rng.index(2) == 0) return number(std::round(rng.uniform(0, 5) * 8) / 8);
    return variable(static_cast<int>(rng.index(3)));
  }
  switch (rng.index(9)) {
    case 0: return unary(Op::neg, random_tree(rng, depth - 1));
    case 1: return binary(Op::add, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 2: return binary(Op::sub, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 3: return binary(Op::mul, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 4: return binary(Op::div, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    case 5: return power(random_tree(rng, depth - 1), static_cast<int>(rng.index(7)) - 3);
    case 6: return call(rng.uniform() < 0.5 ? Func::sin : Func::cos, random_tree(rng, depth - 1));
    case 7: return call(Func::tanh, random_tree(rng, depth - 1));
    default: return call(Func::exp, random_tree(rng, depth - 1));
  }
}

void dsl(Outcome& o) {
  Rng rng(801);
  std::size_t round_bad = 0;
  for (int k = 0; k < 1000; ++k) {
    const expr::Expr e = random_tree(rng, 5);
    if (!expr::equal(expr::parse(expr::to_string(e)), e)) ++round_bad;
  }
  o.need(round_bad == 0, "parse/print roundtrip");

  const std::vector<std::string> catalog{"x1^2 + x2",        "x1*x2",          "sin(x1) + x2^2",
                                         "x1*x2 + exp(x2)",  "x1/(1 + x2^2)",  "tanh(x1 - x2)",
                                         "log(2 + x1^2)",    "x2*cos(x1)",     "x1^3 + x1",
                                         "log(2 + x1*x3)",  "exp(0.5*x1) - x2^2", "sin(x3)*x1 + t*x2"};
  double worst = 0.0;
  std::size_t points = 0;
  for (const auto& src : catalog) {
    const expr::Expr e = expr::parse(src, {.dimension = 3});
    for (int k = 0; k < 100; ++k, ++points) {
      const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const double t = rng.uniform(-1, 1);
      for (int var = 0; var <= 3; ++var) {
        const auto f = [&](double v) {
          std::vector<double> y = x;
          double tt = t;
          (var == 0 ? tt : y[static_cast<std::size_t>(var - 1)]) = v;
          return expr::eval(e, y, tt);
        };
        const double fd = oracle::five_point(f, var == 0 ? t : x[static_cast<std::size_t>(var - 1)]);
        const double sym = expr::eval(expr::differentiate(e, var), x, t);
        worst = std::max(worst, std::abs(sym - fd) / (1 + std::abs(fd)));
      }
    }
  }
  o.need(worst <= 1e-7, "symbolic vs five-point");
  o.note << "roundtrip mismatches " << round_bad << "/1000, " << catalog.size() << " expressions x 100 points, worst gap "
         << worst;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void determinism(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / ("bfm_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<fs::path> dirs{root / "a", root / "b"};
  for (const auto& d : dirs) {
    fs::create_directories(d);
    const std::string cmd = std::string("\"") + BFM_CLI_PATH + "\" all --config \"" + BFM_CONFIG_DIR +
                            "/default.json\" --out \"" + d.string() + "\" > \"" + (d / "stdout.txt").string() +
                            "\" 2>&1";
    const int status = std::system(cmd.c_str());
    o.need(status == 0, "cli exit status 0 in " + d.filename().string());
  }
  std::size_t files = 0, differ = 0;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    if (entry.path().filename() == "stdout.txt") continue;
    ++files;
    const fs::path other = dirs[1] / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++differ;
  }
  o.need(files > 0 && differ == 0, "byte-identical outputs");
  o.need(slurp(dirs[0] / "all.json").find("\"seed\": 20240601") != std::string::npos, "seed recorded");
  fs::remove_all(root);
  o.note << files << " files compared, " << differ << " differ";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"metric axioms, ball convexity, term enumeration", metric},
      {"operator norm certificates and currying", operators},
      {"differentials, chain rule, second differential symmetry", calculus},
      {"jet transitions and cocycle", jets},
      {"Christoffel pushforward, splitting, polarization", connections},
      {"linear ODE correspondence and chart transfer", odes},
      {"certified Picard integration, flow, uniqueness", integration},
      {"expression DSL roundtrip and derivatives", dsl},
      {"CLI determinism under a fixed seed", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << " [exception: " << e.what() << "]";
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " -- "
              << o.note.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
