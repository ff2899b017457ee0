#pragma once

// Christoffel fields, connection maps, the compatibility law under chart
// changes, the second tangent splitting and linear ODEs as connections over
// a one-coordinate base.

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bfm/charts.hpp"
#include "bfm/expr.hpp"

namespace bfm {

/// Gamma(x)(u, v), bilinear in (u, v), on a truncation of size `degree`.
struct ChristoffelField {
  std::string chart;
  std::size_t degree = 1;    // fiber truncation
  std::size_t base_dim = 1;  // number of base coordinates
  std::string space = kDefaultSpace;
  std::function<GradedVector(const GradedVector& x, const GradedVector& u, const GradedVector& v)> eval;
  bool symmetric = false;

  GradedVector operator()(const GradedVector& x, const GradedVector& u, const GradedVector& v) const {
    return eval(x, u, v);
  }

  /// Coefficients Gamma(x)(e_j, e_k) as a bilinear map.
  MultilinearMap at(const GradedVector& x) const {
    std::vector<MultilinearTerm> terms;
    for (std::size_t j = 1; j <= degree; ++j)
      for (std::size_t k = 1; k <= degree; ++k) {
        const GradedVector c = eval(x, GradedVector::basis(j, space), GradedVector::basis(k, space));
        for (std::size_t i = 1; i <= c.degree(); ++i)
          if (c.coord(i) != 0.0) terms.push_back({i, {j, k}, c.coord(i)});
      }
    return MultilinearMap::on_space(2, std::move(terms), space);
  }
};

inline ChristoffelField zero_christoffel(std::string chart, std::size_t degree, std::size_t base_dim = 1,
                                         const std::string& space = kDefaultSpace) {
  ChristoffelField G{std::move(chart), degree, base_dim, space, nullptr, true};
  G.eval = [space](const GradedVector&, const GradedVector&, const GradedVector&) { return GradedVector::zero(space); };
  return G;
}

/// Gamma^i_{jk}(x) given as expressions in x1..x_base_dim, keyed (i, j, k), 1-based.
inline ChristoffelField christoffel_from_coefficients(
    std::string chart, std::size_t degree, std::size_t base_dim,
    const std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::string>& coeffs,
    const std::string& space = kDefaultSpace) {
  expr::ParseOptions opt;
  opt.dimension = static_cast<int>(base_dim);
  opt.allow_t = false;
  struct Term {
    std::size_t i, j, k;
    expr::Expr e;
  };
  std::vector<Term> terms;
  for (const auto& [key, src] : coeffs) {
    const auto [i, j, k] = key;
    if (i == 0 || j == 0 || k == 0 || i > degree || j > degree || k > degree)
      throw DomainError("Christoffel index out of range for degree " + std::to_string(degree));
    terms.push_back({i, j, k, expr::parse(src, opt)});
  }
  bool symmetric = true;
  for (const auto& [key, src] : coeffs) {
    const auto [i, j, k] = key;
    auto it = coeffs.find({i, k, j});
    if (it == coeffs.end() || !expr::equal(expr::parse(it->second, opt), expr::parse(src, opt))) symmetric = false;
  }
  ChristoffelField G{std::move(chart), degree, base_dim, space, nullptr, symmetric};
  G.eval = [terms, degree, base_dim, space](const GradedVector& x, const GradedVector& u, const GradedVector& v) {
    const std::vector<double> xs = x.dense(base_dim);
    std::vector<double> out(degree, 0.0);
    for (const auto& t : terms) out[t.i - 1] += expr::eval(t.e, xs) * u.coord(t.j) * v.coord(t.k);
    return GradedVector(std::move(out), space);
  };
  return G;
}

struct QuadraticProbe {
  bool ok = true;
  GradedVector x, u, v;
  double c = 0.0;
  double residual = 0.0;
  std::string what;
};

/// Checks Q(x)(c u) = c^2 Q(x)(u) and the parallelogram law on samples.
inline QuadraticProbe probe_quadratic(const std::function<GradedVector(const GradedVector&, const GradedVector&)>& Q,
                                      const Ball& region, std::size_t degree, std::size_t base_dim,
                                      std::size_t samples, std::uint64_t seed, double tol = 1e-9) {
  QuadraticProbe worst;
  Rng rng(seed);
  const std::string sp = region.center.space();
  auto rv = [&](std::size_t n, double r, const GradedVector& c) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = c.coord(i + 1) + r * rng.uniform(-1.0, 1.0);
    return GradedVector(out, sp);
  };
  for (std::size_t s = 0; s < samples; ++s) {
    const GradedVector x = rv(base_dim, 0.999 * region.radius, region.center);
    const GradedVector u = rv(degree, 1.0, GradedVector::zero(sp)), v = rv(degree, 1.0, GradedVector::zero(sp));
    const double c = rng.uniform(-3.0, 3.0);
    const GradedVector qu = Q(x, u);
    const double scale = 1.0 + qu.sup_norm() * (1.0 + c * c);
    const double hom = sup_distance(Q(x, c * u), (c * c) * qu) / scale;
    const double par = sup_distance(Q(x, u + v) + Q(x, u - v), 2.0 * (qu + Q(x, v))) / scale;
    const double r = std::max(hom, par);
    if (r > worst.residual) worst = {true, x, u, v, c, r, hom >= par ? "homogeneity" : "parallelogram"};
  }
  worst.ok = worst.residual <= tol;
  return worst;
}

/// Bilinear symmetric Gamma with Gamma(x)(u, u) = Q(x)(u), by polarization
/// Gamma(u, v) = (Q(u + v) - (Q(u) + Q(v))) / 2. Rejects Q failing the
/// quadratic probe on `region`.
inline ChristoffelField christoffel_from_diagonal(std::function<GradedVector(const GradedVector&, const GradedVector&)> Q,
                                                  std::string chart, std::size_t degree, std::size_t base_dim,
                                                  const Ball& region, std::uint64_t seed = 1) {
  const QuadraticProbe probe = probe_quadratic(Q, region, degree, base_dim, 64, seed);
  if (!probe.ok)
    throw DomainError("diagonal map is not quadratic (" + probe.what + " residual " + std::to_string(probe.residual) +
                      " at x1=" + std::to_string(probe.x.coord(1)) + ", u1=" + std::to_string(probe.u.coord(1)) + ")");
  const std::string space = region.center.space();
  ChristoffelField G{std::move(chart), degree, base_dim, space, nullptr, true};
  G.eval = [Q](const GradedVector& x, const GradedVector& u, const GradedVector& v) {
    if (u == v) return Q(x, u);
    return 0.5 * (Q(x, u + v) - (Q(x, u) + Q(x, v)));
  };
  return G;
}

// ---------------------------------------------------------------------------
// connection maps

/// Per-chart tau_alpha(f, g), a linear map acting on the fiber slot h.
struct ConnectionMap {
  struct Local {
    std::function<LinearMap(const GradedVector& f, const GradedVector& g)> tau;
    std::optional<Ball> domain;
  };
  std::map<std::string, Local> charts;
  bool linear_in_second = true;
};

/// tau(f, g) h = Gamma(f)(g, h).
inline ConnectionMap::Local local_from_christoffel(const ChristoffelField& G, std::optional<Ball> domain = std::nullopt) {
  return {[G](const GradedVector& f, const GradedVector& g) {
            return LinearMap::callable(
                "tau", [G, f, g](const GradedVector& h) { return G(f, g, h); }, G.space, G.space);
          },
          std::move(domain)};
}

/// K_alpha(f, g, h, k) = (f, k + tau_alpha(f, g) h).
inline std::pair<GradedVector, GradedVector> connection_apply(const ConnectionMap& K, const std::string& alpha,
                                                              const GradedVector& f, const GradedVector& g,
                                                              const GradedVector& h, const GradedVector& k) {
  auto it = K.charts.find(alpha);
  if (it == K.charts.end()) throw DomainError("connection has no chart '" + alpha + "'");
  if (it->second.domain && !it->second.domain->contains(f))
    throw DomainError("connection_apply: base point outside chart '" + alpha + "'");
  return {f, k + it->second.tau(f, g).apply(h)};
}

// ---------------------------------------------------------------------------
// compatibility under a chart change Theta: beta -> alpha

namespace detail {
inline Eigen::FullPivLU<Matrix> invertible_differential(const MCMap& theta, const GradedVector& f, std::size_t n) {
  Eigen::FullPivLU<Matrix> lu(differential_matrix(theta, f, n));
  if (!lu.isInvertible()) {
    std::string at;
    for (std::size_t i = 1; i <= std::max(n, f.degree()); ++i) at += (i > 1 ? ", " : "") + expr::format_number(f.coord(i));
    throw DomainError(theta.name + ": differential is singular on the truncation at (" + at + ")");
  }
  return lu;
}
}  // namespace detail

/// Gamma_alpha(Theta f)(g', h') = DTheta Gamma_beta(f)(a, b) - D2Theta(f)(b, a),
/// a = DTheta^-1 g', b = DTheta^-1 h', f = Theta^-1(y).
inline ChristoffelField pushforward_christoffel(const ChristoffelField& Gb, const MCMap& theta,
                                                const MCMap& theta_inverse, std::string label) {
  const std::size_t n = Gb.degree;
  ChristoffelField Ga{std::move(label), n, Gb.base_dim, Gb.space, nullptr, Gb.symmetric};
  Ga.eval = [Gb, theta, theta_inverse, n](const GradedVector& y, const GradedVector& gp, const GradedVector& hp) {
    const GradedVector f = theta_inverse(y);
    const auto lu = detail::invertible_differential(theta, f, n);
    const GradedVector a = vector_of(lu.solve(dense_of(gp, n)), Gb.space);
    const GradedVector b = vector_of(lu.solve(dense_of(hp, n)), Gb.space);
    const GradedVector transported = apply_matrix(differential_matrix(theta, f, n), Gb(f, a, b), Gb.space);
    return transported - second_differential(theta, f, b, a);
  };
  return Ga;
}

struct CompatibilityReport {
  double max_residual = 0.0;  // in the standard metric norm of the space
  GradedVector f, g, h;       // worst sample
  std::size_t samples = 0;
};

/// max over samples of || Gamma_a(Theta f)(DTheta g, DTheta h) + D2Theta(f)(h, g) - DTheta Gamma_b(f)(g, h) ||_d
/// with f drawn from `region` (beta coordinates).
inline CompatibilityReport compatibility_residual(const ChristoffelField& Ga, const ChristoffelField& Gb,
                                                  const MCMap& theta, const Ball& region, std::size_t samples,
                                                  std::uint64_t seed,
                                                  const FrechetSpace& space = FrechetSpace::standard()) {
  CompatibilityReport rep;
  Rng rng(seed);
  const std::size_t n = Gb.degree;
  for (std::size_t s = 0; s < samples; ++s) {
    std::vector<double> fc(Gb.base_dim), gc(n), hc(n);
    for (std::size_t i = 0; i < fc.size(); ++i)
      fc[i] = region.center.coord(i + 1) + 0.999 * region.radius * rng.uniform(-1.0, 1.0);
    for (double& v : gc) v = rng.uniform(-1.0, 1.0);
    for (double& v : hc) v = rng.uniform(-1.0, 1.0);
    const GradedVector f(fc, Gb.space), g(gc, Gb.space), h(hc, Gb.space);
    const Matrix D = differential_matrix(theta, f, n);
    const GradedVector Dg = apply_matrix(D, g, Gb.space), Dh = apply_matrix(D, h, Gb.space);
    const GradedVector lhs = Ga(theta(f), Dg, Dh) + second_differential(theta, f, h, g);
    const GradedVector rhs = apply_matrix(D, Gb(f, g, h), Gb.space);
    const double r = space.norm(lhs - rhs);
    ++rep.samples;
    if (s == 0 || r > rep.max_residual) {
      rep.max_residual = r;
      rep.f = f;
      rep.g = g;
      rep.h = h;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// second tangent splitting

/// (x, v, w) -> ((x, v), (x, w + Gamma(x)(v, v))).
inline std::pair<Jet1, Jet1> split_second_tangent(const ChristoffelField& G, const Jet2& j) {
  if (j.chart != G.chart) throw DomainError("jet chart '" + j.chart + "' differs from connection chart '" + G.chart + "'");
  return {Jet1{j.chart, j.x, j.v}, Jet1{j.chart, j.x, j.w + G(j.x, j.v, j.v)}};
}

/// ((x, v), (x, u)) -> (x, v, u - Gamma(x)(v, v)).
inline Jet2 merge_second_tangent(const ChristoffelField& G, const Jet1& a, const Jet1& b) {
  if (a.chart != b.chart || !(a.x == b.x)) throw DomainError("merge: the two tangent vectors have different base points");
  if (a.chart != G.chart) throw DomainError("jet chart '" + a.chart + "' differs from connection chart '" + G.chart + "'");
  return {a.chart, a.x, a.v, b.v - G(a.x, a.v, a.v)};
}

// ---------------------------------------------------------------------------
// linear ODEs over an interval

struct OdeSystem {
  std::function<LinearMap(double)> A;
  double t_lo = -1.0, t_hi = 1.0;
  std::string space = kDefaultSpace;
  std::size_t degree = 1;

  LinearMap at(double t) const {
    if (t < t_lo || t > t_hi) throw DomainError("ODE time outside [t_lo, t_hi]");
    return A(t);
  }
};

/// A(t) u = Gamma(t)(u, 1).
inline OdeSystem connection_to_ode(const ChristoffelField& G, double t_lo, double t_hi) {
  if (G.base_dim != 1)
    throw UnsupportedConfiguration("linear ODE correspondence needs a 1-coordinate base; got " +
                                   std::to_string(G.base_dim));
  OdeSystem sys;
  sys.t_lo = t_lo;
  sys.t_hi = t_hi;
  sys.space = G.space;
  sys.degree = G.degree;
  sys.A = [G](double t) {
    return LinearMap::callable(
        "A", [G, t](const GradedVector& u) { return G(GradedVector({t}, G.space), u, GradedVector({1.0}, G.space)); },
        G.space, G.space);
  };
  return sys;
}

/// Gamma(t)(u, s) = s A(t) u.
inline ChristoffelField ode_to_connection(const OdeSystem& sys, std::string chart) {
  ChristoffelField G{std::move(chart), sys.degree, 1, sys.space, nullptr, false};
  G.eval = [sys](const GradedVector& x, const GradedVector& u, const GradedVector& s) {
    return s.coord(1) * sys.at(x.coord(1)).apply(u);
  };
  return G;
}

/// A_beta(t) = (phi_beta^-1)'(t) A(phi_beta^-1(t)), for a 1-coordinate chart
/// given through its inverse.
inline OdeSystem transfer_ode(const OdeSystem& sys, const MCMap& phi_inverse, double t_lo, double t_hi) {
  if (phi_inverse.dim != 1)
    throw UnsupportedConfiguration("ODE chart transfer needs a 1-coordinate chart; got " +
                                   std::to_string(phi_inverse.dim));
  OdeSystem out = sys;
  out.t_lo = t_lo;
  out.t_hi = t_hi;
  out.A = [sys, phi_inverse](double t) {
    const GradedVector tv({t}, phi_inverse.domain_space);
    const double s = phi_inverse(tv).coord(1);
    const double ds = differential_matrix(phi_inverse, tv, 1)(0, 0);
    const LinearMap inner = sys.at(s);
    return LinearMap::callable(
        "A_beta", [inner, ds](const GradedVector& u) { return ds * inner.apply(u); }, sys.space, sys.space);
  };
  return out;
}

/// A(t) given as a dense matrix of expressions in t.
inline OdeSystem ode_from_expressions(const std::vector<std::vector<std::string>>& entries, double t_lo, double t_hi,
                                      const std::string& space = kDefaultSpace) {
  const std::size_t n = entries.size();
  expr::ParseOptions opt;
  opt.dimension = 0;
  std::vector<expr::Expr> parsed;
  for (const auto& row : entries) {
    if (row.size() != n) throw DomainError("ODE matrix must be square");
    for (const auto& e : row) parsed.push_back(expr::parse(e, opt));
  }
  OdeSystem sys;
  sys.t_lo = t_lo;
  sys.t_hi = t_hi;
  sys.space = space;
  sys.degree = n;
  sys.A = [parsed, n, space](double t) {
    std::vector<double> m(n * n);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = expr::eval(parsed[i], std::span<const double>{}, t);
    return LinearMap::finite_matrix(n, std::move(m), space, space);
  };
  return sys;
}

}  // namespace bfm
