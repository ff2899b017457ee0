#pragma once

// Picard iteration for chart-local vector fields with a priori bounds,
// flows near a point, and a two-chart uniqueness check.
//
// Bounds are taken in the coordinate sup norm on the truncation: L_sup bounds
// |xi| on the working ball and R_lip is a Lipschitz constant there. The
// metric d is reported alongside but not used for certification, since its
// norm is not homogeneous and the integral estimate behind the bound needs
// |int f| <= int |f|.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bfm/charts.hpp"

namespace bfm {

struct VectorFieldLocal {
  std::string chart;
  std::size_t dim = 1;
  std::string space = kDefaultSpace;
  std::function<GradedVector(const GradedVector&)> xi;
  double L_sup = 0.0;
  double R_lip = 0.0;
  bool heuristic_bounds = false;  // bounds came from sampling, not from the user
};

inline VectorFieldLocal expression_field(std::string chart, const std::vector<std::string>& components, double L_sup,
                                         double R_lip, const std::string& space = kDefaultSpace) {
  const MCMap m = expression_map(chart + ".xi", components, components.size(), std::nullopt, space);
  VectorFieldLocal f;
  f.chart = std::move(chart);
  f.dim = components.size();
  f.space = space;
  f.xi = m.fn;
  f.L_sup = L_sup;
  f.R_lip = R_lip;
  return f;
}

inline double horizon(double R_lip, double L_sup, double r) {
  if (!(R_lip > 0) || !(L_sup > 0) || !(r > 0)) throw DomainError("horizon: R, L and r must be positive");
  return std::min(1.0 / R_lip, r / L_sup);
}

inline double flow_horizon(double R_lip, double L_sup, double r) {
  if (!(R_lip > 0) || !(L_sup > 0) || !(r > 0)) throw DomainError("flow horizon: R, L and r must be positive");
  return std::min(1.0 / R_lip, r / (2.0 * L_sup));
}

/// L R^n / (n+1)! dt^(n+1)
inline double error_bound(double L_sup, double R_lip, int n, double dt) {
  if (n < 0 || dt < 0) throw DomainError("error_bound: n and dt must be nonnegative");
  if (dt == 0 || L_sup == 0) return 0.0;
  if (n == 0) return L_sup * dt;
  if (R_lip == 0) return 0.0;
  return L_sup * std::exp(n * std::log(R_lip) + (n + 1) * std::log(dt) - std::lgamma(n + 2.0));
}

/// sum_{k >= n} error_bound(L, R, k, dt), a bound on the distance from l_n to the limit.
inline double tail_bound(double L_sup, double R_lip, int n, double dt) {
  if (dt == 0) return 0.0;
  // summed directly: the closed form cancels badly for large n
  double sum = 0.0;
  for (int k = n; k < n + 200; ++k) {
    const double term = error_bound(L_sup, R_lip, k, dt);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

struct BoundsCheck {
  bool ok = true;
  std::string what;
  GradedVector p, q;
  double observed = 0.0;  // |xi(p)| or the Lipschitz ratio
};

namespace detail {
inline GradedVector sample_ball(Rng& rng, const GradedVector& c, double r, std::size_t dim, const std::string& space) {
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < dim; ++i) x[i] = c.coord(i + 1) + r * rng.uniform(-1.0, 1.0);
  return GradedVector(x, space);
}
}  // namespace detail

/// Spot check of the declared bounds on the closed ball B_r(p0).
inline BoundsCheck check_field_bounds(const VectorFieldLocal& f, const GradedVector& p0, double r, std::size_t samples,
                                      std::uint64_t seed) {
  BoundsCheck out;
  Rng rng(seed);
  const double slack = 1e-9;
  for (std::size_t s = 0; s < samples && out.ok; ++s) {
    const GradedVector p = detail::sample_ball(rng, p0, r, f.dim, f.space);
    const GradedVector q = detail::sample_ball(rng, p0, r, f.dim, f.space);
    const GradedVector xp = f.xi(p), xq = f.xi(q);
    if (xp.sup_norm() > f.L_sup * (1 + slack)) out = {false, "L_sup", p, q, xp.sup_norm()};
    const double dpq = sup_distance(p, q);
    if (out.ok && dpq > 0) {
      const double ratio = sup_distance(xp, xq) / dpq;
      if (ratio > f.R_lip * (1 + slack) + slack) out = {false, "R_lip", p, q, ratio};
    }
  }
  return out;
}

/// Lower estimates of L_sup and R_lip from samples; runs using them are
/// marked heuristic.
inline std::pair<double, double> estimate_bounds(const VectorFieldLocal& f, const GradedVector& p0, double r,
                                                 std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  double L = 0.0, R = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const GradedVector p = detail::sample_ball(rng, p0, r, f.dim, f.space);
    const GradedVector q = detail::sample_ball(rng, p0, r, f.dim, f.space);
    const GradedVector xp = f.xi(p);
    L = std::max(L, xp.sup_norm());
    const double dpq = sup_distance(p, q);
    if (dpq > 0) R = std::max(R, sup_distance(xp, f.xi(q)) / dpq);
  }
  return {L, R};
}

struct PicardProblem {
  VectorFieldLocal field;
  GradedVector p0;
  double t0 = 0.0;
  double r = 1.0;
  double m = 0.0;          // 0: use the horizon
  double grid_step = 1e-3;
  double tol = 1e-10;
  std::size_t bound_samples = 64;
  std::uint64_t seed = 1;
};

struct CurveSolution {
  std::vector<double> times;
  std::vector<std::vector<GradedVector>> iterates;  // l_0 .. l_n on the grid
  std::size_t n_iters = 0;
  std::size_t t0_index = 0;
  double m = 0.0, step = 0.0;
  std::vector<double> certified_bound;  // error_bound(L, R, n, m) for n < n_iters
  std::vector<double> successive_diff;  // sup_t |l_{n+1} - l_n|
  std::vector<double> successive_diff_d;  // same in the metric d
  double tail = 0.0;  // bound on sup |l_inf - l_n_iters|
  double quadrature_error_estimate = 0.0;
  double refinement_diff = 0.0;  // sup |l(step) - l(step/2)| on common nodes
  double interpolation_error_estimate = 0.0;
  double residual_max = 0.0;  // sup |l' - xi(l)| at interior nodes
  double residual_C = 0.0;    // residual_max / step^2
  bool heuristic_bounds = false;

  const std::vector<GradedVector>& final() const { return iterates.back(); }

  /// Certificate for |l(t) - true solution| at grid nodes.
  double certificate() const { return tail + quadrature_error_estimate; }

  /// Bound soundness: successive differences stay below the certified sequence.
  bool sound() const {
    for (std::size_t n = 0; n < successive_diff.size(); ++n)
      if (successive_diff[n] > certified_bound[n] + quadrature_error_estimate) return false;
    return true;
  }

  std::size_t node_of(double t) const {
    const double k = std::round((t - times.front()) / step);
    if (k < 0 || k > static_cast<double>(times.size() - 1) || std::abs(times[static_cast<std::size_t>(k)] - t) > 1e-9 * step)
      throw DomainError("time is not a grid node");
    return static_cast<std::size_t>(k);
  }

  /// Piecewise-linear evaluation of the final iterate.
  GradedVector at(double t) const {
    if (t < times.front() - 1e-12 || t > times.back() + 1e-12) throw DomainError("time outside the solved interval");
    const double u = std::clamp((t - times.front()) / step, 0.0, static_cast<double>(times.size() - 1));
    const auto i = std::min(static_cast<std::size_t>(u), times.size() - 2);
    const double w = u - static_cast<double>(i);
    if (w == 0.0) return final()[i];
    return (1.0 - w) * final()[i] + w * final()[i + 1];
  }
};

namespace detail {

/// Cumulative integral from node k0 to every node: Simpson on node pairs,
/// a three-point end correction for odd offsets.
inline std::vector<GradedVector> cumulative_simpson(const std::vector<GradedVector>& f, std::size_t k0, double h,
                                                    const std::string& space) {
  std::vector<GradedVector> I(f.size(), GradedVector::zero(space));
  auto sweep = [&](int dir) {
    const double hs = dir * h;
    const auto idx = [&](std::size_t j) { return static_cast<std::size_t>(static_cast<long>(k0) + dir * static_cast<long>(j)); };
    const std::size_t len = dir > 0 ? f.size() - 1 - k0 : k0;
    for (std::size_t j = 2; j <= len; j += 2)
      I[idx(j)] = I[idx(j - 2)] + (hs / 3.0) * (f[idx(j - 2)] + 4.0 * f[idx(j - 1)] + f[idx(j)]);
    for (std::size_t j = 1; j <= len; j += 2) {
      if (j + 1 <= len)
        I[idx(j)] = I[idx(j - 1)] + (hs / 12.0) * (5.0 * f[idx(j - 1)] + 8.0 * f[idx(j)] - f[idx(j + 1)]);
      else if (j >= 2)
        I[idx(j)] = I[idx(j - 1)] + (hs / 12.0) * (8.0 * f[idx(j - 1)] + 5.0 * f[idx(j)] - f[idx(j - 2)]);
      else
        I[idx(j)] = I[idx(j - 1)] + (hs / 2.0) * (f[idx(j - 1)] + f[idx(j)]);
    }
  };
  sweep(+1);
  sweep(-1);
  return I;
}

struct Grid {
  std::vector<double> times;
  std::size_t k0 = 0;
  double h = 0.0;
};

inline Grid make_grid(double t0, double m, double step) {
  if (!(step > 0)) throw DomainError("grid step must be positive");
  const double ratio = m / step;
  auto K = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
  K = std::max<std::size_t>(K, 1);
  Grid g;
  g.h = m / static_cast<double>(K);
  g.k0 = K;
  g.times.resize(2 * K + 1);
  for (std::size_t i = 0; i <= 2 * K; ++i)
    g.times[i] = t0 + (static_cast<double>(i) - static_cast<double>(K)) * g.h;
  g.times[K] = t0;
  return g;
}

struct RawRun {
  std::vector<std::vector<GradedVector>> iterates;
  std::size_t n = 0;
};

inline RawRun picard_iterate(const PicardProblem& prob, const Grid& g, double m, std::size_t max_iters) {
  const VectorFieldLocal& F = prob.field;
  RawRun run;
  run.iterates.push_back(std::vector<GradedVector>(g.times.size(), prob.p0));
  for (std::size_t n = 0; n < max_iters; ++n) {
    const auto& cur = run.iterates.back();
    std::vector<GradedVector> fx(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (sup_distance(cur[i], prob.p0) > 2.0 * prob.r)
        throw InconsistentBounds("iterate " + std::to_string(n) + " left B_r(p0) at t=" + expr::format_number(g.times[i]) +
                                 "; declared L_sup/R_lip are too small");
      try {
        fx[i] = F.xi(cur[i]);
      } catch (const DomainError& e) {
        throw InconsistentBounds("field not evaluable on iterate " + std::to_string(n) + " at t=" +
                                 expr::format_number(g.times[i]) + ": " + e.what());
      }
    }
    const auto I = cumulative_simpson(fx, g.k0, g.h, F.space);
    std::vector<GradedVector> next(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) next[i] = prob.p0 + I[i];
    run.iterates.push_back(std::move(next));
    run.n = n + 1;
    if (error_bound(F.L_sup, F.R_lip, static_cast<int>(n), m) < prob.tol) break;
  }
  return run;
}

}  // namespace detail

/// l_0 = p0, l_{n+1}(t) = p0 + int_{t0}^t xi(l_n(u)) du on a uniform grid over
/// [t0 - m, t0 + m]. Stops once error_bound(n) < tol or after max_iters.
inline CurveSolution picard_solve(const PicardProblem& prob, std::size_t max_iters) {
  const VectorFieldLocal& F = prob.field;
  if (!F.xi) throw DomainError("vector field has no principal part");
  if (max_iters == 0) throw DomainError("max_iters must be >= 1");
  if (!(prob.tol > 0)) throw DomainError("tol must be positive");
  const double hz = horizon(F.R_lip, F.L_sup, prob.r);
  const double m = prob.m > 0 ? prob.m : hz;
  if (m > hz * (1 + 1e-12)) throw DomainError("m exceeds the horizon min{1/R, r/L} = " + expr::format_number(hz));

  const BoundsCheck bc = check_field_bounds(F, prob.p0, prob.r, prob.bound_samples, prob.seed);
  if (!bc.ok)
    throw InconsistentBounds("declared " + bc.what + " violated: observed " + expr::format_number(bc.observed) +
                             " at p1=" + expr::format_number(bc.p.coord(1)));

  const detail::Grid g = detail::make_grid(prob.t0, m, prob.grid_step);
  detail::RawRun run = detail::picard_iterate(prob, g, m, max_iters);

  CurveSolution sol;
  sol.times = g.times;
  sol.t0_index = g.k0;
  sol.m = m;
  sol.step = g.h;
  sol.n_iters = run.n;
  sol.heuristic_bounds = F.heuristic_bounds;
  const FrechetSpace dspace = FrechetSpace::standard(F.space);
  for (std::size_t n = 0; n < run.n; ++n) {
    sol.certified_bound.push_back(error_bound(F.L_sup, F.R_lip, static_cast<int>(n), m));
    double sd = 0.0, sdd = 0.0;
    for (std::size_t i = 0; i < g.times.size(); ++i) {
      const GradedVector diff = run.iterates[n + 1][i] - run.iterates[n][i];
      sd = std::max(sd, diff.sup_norm());
      sdd = std::max(sdd, dspace.norm(diff));
    }
    sol.successive_diff.push_back(sd);
    sol.successive_diff_d.push_back(sdd);
  }
  sol.tail = tail_bound(F.L_sup, F.R_lip, static_cast<int>(run.n), m);

  // Same iteration count on the halved grid; every node of g is a node there.
  detail::Grid fine;
  fine.h = g.h / 2;
  fine.k0 = 2 * g.k0;
  fine.times.resize(2 * g.times.size() - 1);
  for (std::size_t i = 0; i < fine.times.size(); ++i)
    fine.times[i] = prob.t0 + (static_cast<double>(i) - static_cast<double>(fine.k0)) * fine.h;
  PicardProblem fine_prob = prob;
  fine_prob.tol = 0.0;  // never stop early; match n
  const detail::RawRun fine_run = detail::picard_iterate(fine_prob, fine, m, run.n);
  double scale = 0.0;
  for (std::size_t i = 0; i < g.times.size(); ++i) {
    sol.refinement_diff = std::max(sol.refinement_diff, sup_distance(run.iterates.back()[i], fine_run.iterates.back()[2 * i]));
    scale = std::max(scale, run.iterates.back()[i].sup_norm());
  }
  // Richardson for a fourth order rule gives 16/15 of the difference; doubled
  // for safety, plus a rounding floor.
  const double rounding = 1e-15 * (1.0 + scale) * static_cast<double>(g.times.size());
  sol.quadrature_error_estimate = 2.0 * sol.refinement_diff + rounding;

  sol.iterates = std::move(run.iterates);
  const auto& fin = sol.final();
  double second = 0.0;
  for (std::size_t i = 1; i + 1 < fin.size(); ++i) {
    const GradedVector deriv = (1.0 / (2.0 * g.h)) * (fin[i + 1] - fin[i - 1]);
    sol.residual_max = std::max(sol.residual_max, sup_distance(deriv, F.xi(fin[i])));
    second = std::max(second, (fin[i + 1] - 2.0 * fin[i] + fin[i - 1]).sup_norm() / (g.h * g.h));
  }
  sol.residual_C = sol.residual_max / (g.h * g.h);
  sol.interpolation_error_estimate = g.h * g.h / 8.0 * second;

  for (std::size_t n = 0; n < sol.iterates.size(); ++n)
    for (std::size_t i = 0; i < fin.size(); ++i)
      if (sup_distance(sol.iterates[n][i], prob.p0) > prob.r + sol.quadrature_error_estimate)
        throw InconsistentBounds("iterate " + std::to_string(n) + " leaves the closed ball B_r(p0) at t=" +
                                 expr::format_number(sol.times[i]) + " (distance " +
                                 expr::format_number(sup_distance(sol.iterates[n][i], prob.p0)) + ")");
  return sol;
}

// ---------------------------------------------------------------------------
// flow near p0

struct FlowResult {
  GradedVector point;
  double certificate = 0.0;  // tail + quadrature estimate of the solve
  CurveSolution solution;
};

/// l(t) with l(0) = q, solved on the ball of radius r/2 about q. Requires
/// |q - p0| <= r/2 and |t| < min{1/R, r/(2L)}.
inline FlowResult flow(const VectorFieldLocal& field, const GradedVector& q, double t, const PicardProblem& base,
                       std::size_t max_iters = 30) {
  if (sup_distance(q, base.p0) > base.r / 2) throw DomainError("flow: q outside the ball of radius r/2 about p0");
  const double alpha = flow_horizon(field.R_lip, field.L_sup, base.r);
  if (std::abs(t) >= alpha) throw DomainError("flow: |t| must be below " + expr::format_number(alpha));
  PicardProblem prob = base;
  prob.field = field;
  prob.p0 = q;
  prob.t0 = 0.0;
  prob.r = base.r / 2;
  // grid chosen so that t is a node
  const double at = std::abs(t);
  const double h = at > 0 ? at / std::ceil(at / base.grid_step - 1e-9) : base.grid_step;
  auto K = static_cast<std::size_t>(std::floor(alpha / h));
  if (static_cast<double>(K) * h >= alpha) --K;
  K = std::max<std::size_t>(K, 1);
  prob.m = static_cast<double>(K) * h;
  prob.grid_step = h;
  FlowResult out;
  out.solution = picard_solve(prob, max_iters);
  out.point = out.solution.final()[out.solution.node_of(t)];
  out.certificate = out.solution.certificate();
  return out;
}

// ---------------------------------------------------------------------------
// uniqueness across two charts

struct UniquenessReport {
  double transformation_residual = 0.0;
  double deviation = 0.0;
  double tolerance = 0.0;
  double t_worst = 0.0;
  std::size_t nodes = 0;
  bool pass() const { return deviation <= tolerance; }
};

/// max over samples x in the beta side of the overlap of
/// |xi_alpha(Theta x) - DTheta(x) xi_beta(x)|, scaled by 1 + |DTheta xi_beta|.
inline std::pair<double, GradedVector> field_transformation_residual(const MCMap& theta, const VectorFieldLocal& fa,
                                                                     const VectorFieldLocal& fb, std::size_t samples,
                                                                     std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  GradedVector witness;
  const Ball dom = theta.domain.value_or(Ball{GradedVector::zero(fb.space), 1.0});
  for (std::size_t s = 0; s < samples; ++s) {
    const GradedVector x = detail::sample_ball(rng, dom.center, 0.999 * dom.radius, fb.dim, fb.space);
    const GradedVector rhs = apply_matrix(differential_matrix(theta, x, fb.dim), fb.xi(x), fa.space);
    const double r = sup_distance(fa.xi(theta(x)), rhs) / (1.0 + rhs.sup_norm());
    if (s == 0 || r > worst) {
      worst = r;
      witness = x;
    }
  }
  return {worst, witness};
}

/// Integrates xi_beta from p (beta coordinates) and xi_alpha from Theta(p) on
/// a common grid, maps the beta curve through Theta and reports the sup
/// deviation against the combined certificates.
inline UniquenessReport uniqueness_overlap_check(const Atlas& atlas, const std::map<std::string, VectorFieldLocal>& fields,
                                                 const std::string& alpha, const std::string& beta,
                                                 const GradedVector& p, const PicardProblem& params,
                                                 double transform_tol = 1e-8, std::size_t max_iters = 30) {
  const auto fa_it = fields.find(alpha), fb_it = fields.find(beta);
  if (fa_it == fields.end() || fb_it == fields.end()) throw DomainError("uniqueness check: missing field for a chart");
  const VectorFieldLocal &fa = fa_it->second, &fb = fb_it->second;
  const MCMap theta = transition(atlas, alpha, beta);
  if (!theta.contains(p)) throw DomainError("uniqueness check: p is not in the overlap");

  UniquenessReport rep;
  const auto [tr, witness] = field_transformation_residual(theta, fa, fb, 64, params.seed);
  rep.transformation_residual = tr;
  if (tr > transform_tol) {
    std::string at;
    for (std::size_t i = 1; i <= fb.dim; ++i) at += (i > 1 ? ", " : "") + expr::format_number(witness.coord(i));
    throw DomainError("fields are not related by the transition " + theta.name + " (residual " +
                      expr::format_number(tr) + " at (" + at + "))");
  }

  PicardProblem pb = params, pa = params;
  pb.field = fb;
  pb.p0 = p;
  pa.field = fa;
  pa.p0 = theta(p);
  // alpha ball: image radius grows with the differential
  const Matrix D = differential_matrix(theta, p, fb.dim);
  const double lip = D.rowwise().lpNorm<1>().maxCoeff();
  pa.r = params.r * std::max(lip, 1e-300);
  const double m = std::min(horizon(fb.R_lip, fb.L_sup, pb.r), horizon(fa.R_lip, fa.L_sup, pa.r));
  pa.m = pb.m = m;

  const CurveSolution sb = picard_solve(pb, max_iters);
  const CurveSolution sa = picard_solve(pa, max_iters);
  double lip_curve = 0.0;
  for (std::size_t i = 0; i < sb.times.size(); ++i) {
    const GradedVector& xb = sb.final()[i];
    if (!theta.contains(xb)) throw DomainError("uniqueness check: the beta curve leaves the overlap");
    const double d = sup_distance(theta(xb), sa.final()[i]);
    if (d > rep.deviation || i == 0) {
      rep.deviation = std::max(rep.deviation, d);
      rep.t_worst = sb.times[i];
    }
    lip_curve = std::max(lip_curve, differential_matrix(theta, xb, fb.dim).rowwise().lpNorm<1>().maxCoeff());
  }
  rep.nodes = sb.times.size();
  rep.tolerance = sa.certificate() + lip_curve * sb.certificate();
  return rep;
}

}  // namespace bfm
