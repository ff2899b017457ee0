#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bfm/error.hpp"
#include "bfm/expr.hpp"
#include "bfm/frechet.hpp"
#include "bfm/graded_vector.hpp"
#include "bfm/lipschitz.hpp"
#include "bfm/random.hpp"

namespace bfm {

using Matrix = Eigen::MatrixXd;
/// Second derivative on a truncation: one symmetric dim x dim block per output coordinate.
using Hessian = std::vector<Matrix>;

/// Open ball in the coordinate sup norm.
struct Ball {
  GradedVector center;
  double radius = 0.0;

  bool contains(const GradedVector& p) const { return sup_distance(p, center) < radius; }
};

/// Map between open subsets of graded spaces acting on coordinates 1..dim.
/// Analytic derivatives are optional; when present they are used by
/// `differential` and `second_differential`.
struct MCMap {
  std::string name;
  std::size_t dim = 1;
  std::string domain_space = kDefaultSpace;
  std::string codomain_space = kDefaultSpace;
  std::function<GradedVector(const GradedVector&)> fn;
  std::function<Matrix(const GradedVector&)> jacobian;
  std::function<Hessian(const GradedVector&)> hessian;
  int smoothness = 2;
  std::optional<Ball> domain;

  bool contains(const GradedVector& p) const { return !domain || domain->contains(p); }

  GradedVector operator()(const GradedVector& p) const {
    if (p.space() != domain_space) throw DomainError(name + ": point of space '" + p.space() + "'");
    if (!contains(p)) throw DomainError(name + ": point outside the domain");
    return fn(p);
  }

  bool has_jacobian() const { return static_cast<bool>(jacobian); }
  bool has_hessian() const { return static_cast<bool>(hessian); }

  std::optional<LinearMap> analytic_jacobian(const GradedVector& p) const;
  std::optional<MultilinearMap> analytic_second(const GradedVector& p) const;
};

// ---------------------------------------------------------------------------
// dense helpers on the truncation

inline Eigen::VectorXd dense_of(const GradedVector& v, std::size_t n) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = v.coord(i + 1);
  return out;
}

inline GradedVector vector_of(const Eigen::VectorXd& v, const std::string& space) {
  return GradedVector(std::vector<double>(v.data(), v.data() + v.size()), space);
}

inline GradedVector apply_matrix(const Matrix& a, const GradedVector& v, const std::string& space) {
  return vector_of(a * dense_of(v, static_cast<std::size_t>(a.cols())), space);
}

/// (H(u, v))_i = u^T H_i v.
inline GradedVector apply_hessian(const Hessian& h, const GradedVector& u, const GradedVector& v,
                                  const std::string& space) {
  if (h.empty()) return GradedVector::zero(space);
  const auto n = static_cast<std::size_t>(h.front().cols());
  const Eigen::VectorXd du = dense_of(u, n), dv = dense_of(v, n);
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = du.dot(h[i] * dv);
  return GradedVector(std::move(out), space);
}

inline LinearMap matrix_map(const Matrix& a, const std::string& domain, const std::string& codomain) {
  const auto k = static_cast<std::size_t>(std::max(a.rows(), a.cols()));
  std::vector<double> e(k * k, 0.0);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) e[static_cast<std::size_t>(i) * k + static_cast<std::size_t>(j)] = a(i, j);
  return LinearMap::finite_matrix(k, std::move(e), domain, codomain);
}

inline MultilinearMap hessian_map(const Hessian& h, const std::string& domain, const std::string& codomain) {
  std::vector<MultilinearTerm> terms;
  for (std::size_t i = 0; i < h.size(); ++i)
    for (Eigen::Index j = 0; j < h[i].rows(); ++j)
      for (Eigen::Index k = 0; k < h[i].cols(); ++k)
        if (h[i](j, k) != 0.0)
          terms.push_back({i + 1, {static_cast<std::size_t>(j) + 1, static_cast<std::size_t>(k) + 1}, h[i](j, k)});
  return MultilinearMap(2, std::move(terms), {domain, domain}, codomain);
}

inline Matrix resized(const Matrix& a, std::size_t n) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const Eigen::Index r = std::min<Eigen::Index>(a.rows(), out.rows());
  const Eigen::Index c = std::min<Eigen::Index>(a.cols(), out.cols());
  out.topLeftCorner(r, c) = a.topLeftCorner(r, c);
  return out;
}

inline std::optional<LinearMap> MCMap::analytic_jacobian(const GradedVector& p) const {
  if (!jacobian) return std::nullopt;
  return matrix_map(jacobian(p), domain_space, codomain_space);
}

inline std::optional<MultilinearMap> MCMap::analytic_second(const GradedVector& p) const {
  if (!hessian) return std::nullopt;
  return hessian_map(hessian(p), domain_space, codomain_space);
}

// ---------------------------------------------------------------------------
// construction

/// Coordinatewise expression map x -> (e_1(x), ..., e_m(x)) in x1..x_dim, with
/// symbolic first and second derivatives.
inline MCMap expression_map(std::string name, const std::vector<std::string>& components, std::size_t dim,
                            std::optional<Ball> domain = std::nullopt, const std::string& space = kDefaultSpace) {
  if (components.empty()) throw DomainError(name + ": no components");
  expr::ParseOptions opt;
  opt.dimension = static_cast<int>(dim);
  opt.allow_t = false;
  std::vector<expr::Expr> f;
  for (const auto& c : components) f.push_back(expr::parse(c, opt));
  const std::size_t m = f.size();
  std::vector<std::vector<expr::Expr>> df(m, std::vector<expr::Expr>(dim));
  std::vector<std::vector<std::vector<expr::Expr>>> d2f(m, std::vector<std::vector<expr::Expr>>(dim, std::vector<expr::Expr>(dim)));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      df[i][j] = expr::differentiate(f[i], static_cast<int>(j + 1));
      for (std::size_t k = j; k < dim; ++k) d2f[i][j][k] = expr::differentiate(df[i][j], static_cast<int>(k + 1));
    }
  const std::size_t n = std::max(m, dim);

  MCMap P;
  P.name = std::move(name);
  P.dim = n;
  P.domain_space = space;
  P.codomain_space = space;
  P.domain = std::move(domain);
  P.fn = [f, dim, space](const GradedVector& p) {
    const std::vector<double> x = p.dense(dim);
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = expr::eval(f[i], x);
    return GradedVector(std::move(out), space);
  };
  P.jacobian = [df, dim, n](const GradedVector& p) {
    const std::vector<double> x = p.dense(dim);
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < df.size(); ++i)
      for (std::size_t j = 0; j < dim; ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = expr::eval(df[i][j], x);
    return a;
  };
  P.hessian = [d2f, dim, n](const GradedVector& p) {
    const std::vector<double> x = p.dense(dim);
    Hessian h(n, Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    for (std::size_t i = 0; i < d2f.size(); ++i)
      for (std::size_t j = 0; j < dim; ++j)
        for (std::size_t k = j; k < dim; ++k) {
          const double v = expr::eval(d2f[i][j][k], x);
          h[i](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
          h[i](static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
        }
    return h;
  };
  return P;
}

/// Affine map x -> L x + b on a truncation of size dim.
inline MCMap affine_map(std::string name, const LinearMap& L, const GradedVector& b, std::size_t dim) {
  MCMap P;
  P.name = std::move(name);
  P.dim = dim;
  P.domain_space = L.domain();
  P.codomain_space = L.codomain();
  P.fn = [L, b](const GradedVector& x) { return L.apply(x) + b; };
  const auto dense = to_dense(L, dim);
  P.jacobian = [dense, dim](const GradedVector&) {
    Matrix a(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dense[i * dim + j];
    return a;
  };
  P.hessian = [dim](const GradedVector&) {
    return Hessian(dim, Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
  };
  P.smoothness = 1000;
  return P;
}

inline MCMap identity_map(std::size_t dim, const std::string& space = kDefaultSpace) {
  return affine_map("identity", LinearMap::identity(space), GradedVector::zero(space), dim);
}

/// g o h. With `chain_rule` the analytic derivatives of both factors are
/// combined; otherwise the result carries none and falls back to finite
/// differences.
inline MCMap compose_maps(const MCMap& g, const MCMap& h, bool chain_rule = true) {
  if (h.codomain_space != g.domain_space) throw DomainError("compose_maps: space mismatch");
  MCMap P;
  P.name = g.name + "∘" + h.name;
  P.dim = std::max(g.dim, h.dim);
  P.domain_space = h.domain_space;
  P.codomain_space = g.codomain_space;
  P.domain = h.domain;
  P.smoothness = std::min(g.smoothness, h.smoothness);
  P.fn = [g, h](const GradedVector& x) { return g(h(x)); };
  if (chain_rule && g.has_jacobian() && h.has_jacobian()) {
    const std::size_t n = P.dim;
    P.jacobian = [g, h, n](const GradedVector& x) {
      return Matrix(resized(g.jacobian(h(x)), n) * resized(h.jacobian(x), n));
    };
    if (g.has_hessian() && h.has_hessian()) {
      // D2(g o h)(u, v) = D2g(Dh u, Dh v) + Dg D2h(u, v)
      P.hessian = [g, h, n](const GradedVector& x) {
        const GradedVector y = h(x);
        const Matrix jh = resized(h.jacobian(x), n);
        const Matrix jg = resized(g.jacobian(y), n);
        Hessian hg = g.hessian(y), hh = h.hessian(x);
        hg.resize(n, Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
        hh.resize(n, Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
        for (auto& m : hg) m = resized(m, n);
        for (auto& m : hh) m = resized(m, n);
        Hessian out(n);
        for (std::size_t i = 0; i < n; ++i) {
          Matrix acc = jh.transpose() * hg[i] * jh;
          for (std::size_t l = 0; l < n; ++l) acc += jg(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) * hh[l];
          out[i] = acc;
        }
        return out;
      };
    }
  }
  return P;
}

// ---------------------------------------------------------------------------
// finite differences

struct FdOptions {
  double step_factor = 1e-3;  // t0 = step_factor * (1 + ||h||_inf)
  bool use_analytic = true;
};

struct DerivativeEstimate {
  GradedVector value;
  double error_indicator = 0.0;
};

namespace detail {

// Picks the largest t = t0 / 2^j whose stencil p +- t h (and p +- t h / 4)
// stays in the domain.
inline double usable_step(const MCMap& P, const GradedVector& p, const GradedVector& h, double t0) {
  double t = t0;
  for (int j = 0; j < 40; ++j, t *= 0.5)
    if (P.contains(p + t * h) && P.contains(p - t * h)) return t;
  throw DomainError(P.name + ": no usable finite-difference step inside the domain");
}

inline GradedVector central(const MCMap& P, const GradedVector& p, const GradedVector& h, double t) {
  return (1.0 / (2.0 * t)) * (P(p + t * h) - P(p - t * h));
}

}  // namespace detail

/// d_pP(h) by central differences at t0, t0/2, t0/4 with two Richardson
/// levels. The error indicator is the sup-norm gap between the last two
/// extrapolation levels.
inline DerivativeEstimate directional_derivative(const MCMap& P, const GradedVector& p, const GradedVector& h,
                                                 const FdOptions& opt = {}) {
  if (!P.contains(p)) throw DomainError(P.name + ": base point outside the domain");
  if (h.is_zero()) return {GradedVector::zero(P.codomain_space), 0.0};
  const double t = detail::usable_step(P, p, h, opt.step_factor * (1.0 + h.sup_norm()));
  const GradedVector d1 = detail::central(P, p, h, t);
  const GradedVector d2 = detail::central(P, p, h, 0.5 * t);
  const GradedVector d4 = detail::central(P, p, h, 0.25 * t);
  const GradedVector r1a = (1.0 / 3.0) * (4.0 * d2 - d1);
  const GradedVector r1b = (1.0 / 3.0) * (4.0 * d4 - d2);
  const GradedVector r2 = (1.0 / 15.0) * (16.0 * r1b - r1a);
  return {r2, sup_distance(r2, r1b)};
}

/// Jacobian on e_1..e_degree as a finite_matrix map.
inline Matrix differential_matrix(const MCMap& P, const GradedVector& p, std::size_t degree, const FdOptions& opt = {}) {
  if (degree == 0) throw DomainError("differential degree must be >= 1");
  if (opt.use_analytic && P.has_jacobian()) {
    if (!P.contains(p)) throw DomainError(P.name + ": base point outside the domain");
    return resized(P.jacobian(p), degree);
  }
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(degree), static_cast<Eigen::Index>(degree));
  for (std::size_t j = 1; j <= degree; ++j) {
    const GradedVector col = directional_derivative(P, p, GradedVector::basis(j, P.domain_space), opt).value;
    for (std::size_t i = 1; i <= degree; ++i) a(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1)) = col.coord(i);
  }
  return a;
}

inline LinearMap differential(const MCMap& P, const GradedVector& p, std::size_t degree, const FdOptions& opt = {}) {
  return matrix_map(differential_matrix(P, p, degree, opt), P.domain_space, P.codomain_space);
}

/// D2P(p)(h, g): analytic when available, otherwise central differences in
/// direction g of the directional derivative in direction h, with one
/// Richardson level.
inline GradedVector second_differential(const MCMap& P, const GradedVector& p, const GradedVector& h,
                                        const GradedVector& g, const FdOptions& opt = {}) {
  if (!P.contains(p)) throw DomainError(P.name + ": base point outside the domain");
  if (opt.use_analytic && P.has_hessian()) return apply_hessian(P.hessian(p), h, g, P.codomain_space);
  if (h.is_zero() || g.is_zero()) return GradedVector::zero(P.codomain_space);
  // Outer step is kept well above the inner one so inner truncation noise
  // is not amplified.
  const double s0 = detail::usable_step(P, p, g, 2e-2 * (1.0 + g.sup_norm()));
  auto outer = [&](double s) {
    const GradedVector plus = directional_derivative(P, p + s * g, h, opt).value;
    const GradedVector minus = directional_derivative(P, p - s * g, h, opt).value;
    return (1.0 / (2.0 * s)) * (plus - minus);
  };
  const GradedVector a = outer(s0), b = outer(0.5 * s0), c = outer(0.25 * s0);
  const GradedVector r1a = (1.0 / 3.0) * (4.0 * b - a);
  const GradedVector r1b = (1.0 / 3.0) * (4.0 * c - b);
  return (1.0 / 15.0) * (16.0 * r1b - r1a);
}

/// Second differential on e_1..e_degree as a dense per-output block.
inline Hessian second_differential_blocks(const MCMap& P, const GradedVector& p, std::size_t degree,
                                          const FdOptions& opt = {}) {
  const auto n = static_cast<Eigen::Index>(degree);
  if (opt.use_analytic && P.has_hessian()) {
    if (!P.contains(p)) throw DomainError(P.name + ": base point outside the domain");
    Hessian h = P.hessian(p);
    h.resize(degree, Matrix::Zero(n, n));
    for (auto& m : h) m = resized(m, degree);
    return h;
  }
  Hessian h(degree, Matrix::Zero(n, n));
  for (std::size_t j = 1; j <= degree; ++j)
    for (std::size_t k = j; k <= degree; ++k) {
      const GradedVector v = second_differential(P, p, GradedVector::basis(j, P.domain_space),
                                                 GradedVector::basis(k, P.domain_space), opt);
      for (std::size_t i = 1; i <= degree; ++i) {
        h[i - 1](static_cast<Eigen::Index>(j - 1), static_cast<Eigen::Index>(k - 1)) = v.coord(i);
        h[i - 1](static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(j - 1)) = v.coord(i);
      }
    }
  return h;
}

// ---------------------------------------------------------------------------
// smoothness probe

struct ModulusSample {
  double distance;        // d(p, p')
  double modulus;         // lower bound of D(P^(j)(p), P^(j)(p'))
  double local_modulus;   // same ratio probed only at scales <= 10^-6
};

struct SmoothnessOrder {
  int order = 1;
  bool probed = false;
  std::string note;
  std::vector<std::vector<ModulusSample>> sequences;  // one shrinking sequence per base point
  double max_slope = 0.0;                             // max modulus / distance at the finest level
  double max_local_slope = 0.0;                       // same for local_modulus
  bool decays = true;                                 // in the metric D
  bool local_decays = true;
};

struct SmoothnessReport {
  std::vector<SmoothnessOrder> orders;
  bool pass() const {
    for (const auto& o : orders)
      if (o.probed && !o.decays) return false;
    return true;
  }
  bool local_pass() const {
    for (const auto& o : orders)
      if (o.probed && !o.local_decays) return false;
    return true;
  }
};

struct SmoothnessOptions {
  std::size_t levels = 6;          // p' = p + delta_j u, delta_j = radius/4 * 2^-j
  std::size_t probe_budget = 160;  // per op_metric evaluation
  ProbeOptions local{8, -8, -6};   // scale window for local_modulus
};

/// Continuity moduli of p -> P'(p) (order 1) and p -> P''(p) (order 2) in the
/// operator metrics, along shrinking sequences. Orders above 2 are reported
/// as not probed.
///
/// D is not homogeneous: ||c A|| tends to a nonzero limit as c -> 0 for most
/// A, since large inputs saturate both norms. Non-vanishing derivative
/// differences therefore keep D moduli near a constant, and `decays` is
/// false for every map whose derivative is not locally constant. The local
/// modulus restricts probes to small scales, where the ratio is homogeneous.
inline SmoothnessReport mc_smoothness_probe(const MCMap& P, const Ball& region, int k, std::size_t samples,
                                            std::uint64_t seed, const FrechetSpace& dom, const FrechetSpace& cod,
                                            const SmoothnessOptions& opt = {}) {
  if (k < 1) throw DomainError("smoothness order must be >= 1");
  SmoothnessReport rep;
  Rng rng(seed);
  const std::size_t n = P.dim;
  std::vector<FrechetSpace> pair_spaces{dom, dom};
  for (int order = 1; order <= k; ++order) {
    SmoothnessOrder o;
    o.order = order;
    if (order > 2) {
      o.note = "not probed: finite-difference moduli above order 2 are not computed";
      rep.orders.push_back(std::move(o));
      continue;
    }
    o.probed = true;
    for (std::size_t s = 0; s < samples; ++s) {
      std::vector<double> c(n), u(n);
      for (std::size_t i = 0; i < n; ++i) {
        c[i] = region.center.coord(i + 1) + 0.5 * region.radius * rng.uniform(-1.0, 1.0);
        u[i] = rng.uniform(-1.0, 1.0);
      }
      const GradedVector p(c, dom.id());
      const GradedVector dir = (1.0 / std::max(GradedVector(u).sup_norm(), 1e-12)) * GradedVector(u, dom.id());
      std::vector<ModulusSample> seq;
      for (std::size_t j = 0; j < opt.levels; ++j) {
        const double delta = 0.25 * region.radius * std::ldexp(1.0, -static_cast<int>(j));
        const GradedVector q = p + delta * dir;
        const std::uint64_t sub = seed + s * 131 + j;
        double modulus = 0.0, local = 0.0;
        if (order == 1) {
          const LinearMap a = differential(P, p, n), b = differential(P, q, n);
          modulus = op_metric(a, b, dom, cod, opt.probe_budget, sub).lower_bound;
          local = op_metric(a, b, dom, cod, opt.probe_budget, sub, opt.local).lower_bound;
        } else {
          const Hessian a = second_differential_blocks(P, p, n);
          const Hessian b = second_differential_blocks(P, q, n);
          Hessian diff(n);
          for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
          const MultilinearMap B = hessian_map(diff, dom.id(), cod.id());
          modulus = multilinear_norm_estimate(B, pair_spaces, cod, opt.probe_budget, sub).lower_bound;
          local = multilinear_norm_estimate(B, pair_spaces, cod, opt.probe_budget, sub, opt.local).lower_bound;
        }
        seq.push_back({dom.distance(p, q), modulus, local});
      }
      const ModulusSample& first = seq.front();
      const ModulusSample& last = seq.back();
      if (last.distance > 0.0) {
        o.max_slope = std::max(o.max_slope, last.modulus / last.distance);
        o.max_local_slope = std::max(o.max_local_slope, last.local_modulus / last.distance);
      }
      // Non-decay: the finest modulus should be well below the coarsest.
      if (first.modulus > 1e-12 && last.modulus > 0.5 * first.modulus) o.decays = false;
      if (first.local_modulus > 1e-12 && last.local_modulus > 0.5 * first.local_modulus) o.local_decays = false;
      if (!std::isfinite(o.max_slope) || !std::isfinite(o.max_local_slope)) o.decays = o.local_decays = false;
      o.sequences.push_back(std::move(seq));
    }
    rep.orders.push_back(std::move(o));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// catalog

/// Named maps used by the probes. Registration rejects maps declared less
/// than C^2 and maps with a detectable kink in the second derivative.
class MapCatalog {
 public:
  void add(MCMap P, std::uint64_t seed = 7) {
    if (P.smoothness < 2)
      throw DomainError(P.name + ": declared smoothness " + std::to_string(P.smoothness) + " is below the catalog minimum 2");
    kink_probe(P, seed);
    const std::string key = P.name;
    maps_.insert_or_assign(key, std::move(P));
  }

  const MCMap& at(const std::string& name) const {
    auto it = maps_.find(name);
    if (it == maps_.end()) throw DomainError("no catalog map named '" + name + "'");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : maps_) out.push_back(k);
    return out;
  }

 private:
  static void kink_probe(const MCMap& P, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradedVector> points;
    const GradedVector center = P.domain ? P.domain->center : GradedVector::zero(P.domain_space);
    const double radius = P.domain ? P.domain->radius : 1.0;
    points.push_back(center);
    for (int i = 0; i < 4; ++i) {
      std::vector<double> c(P.dim);
      for (std::size_t j = 0; j < P.dim; ++j) c[j] = center.coord(j + 1) + 0.5 * radius * rng.uniform(-1.0, 1.0);
      points.emplace_back(c, P.domain_space);
    }
    FdOptions fd;
    fd.use_analytic = false;
    const double s = 1e-4 * radius;
    for (const auto& p : points)
      for (std::size_t j = 1; j <= P.dim; ++j) {
        const GradedVector e = GradedVector::basis(j, P.domain_space);
        const GradedVector mid = directional_derivative(P, p, e, fd).value;
        const GradedVector fwd = (1.0 / s) * (directional_derivative(P, p + s * e, e, fd).value - mid);
        const GradedVector bwd = (1.0 / s) * (mid - directional_derivative(P, p - s * e, e, fd).value);
        const double gap = sup_distance(fwd, bwd);
        if (gap > 1e-2 * (1.0 + fwd.sup_norm() + bwd.sup_norm()))
          throw DomainError(P.name + ": second derivative jumps near a sampled point (one-sided gap " +
                            std::to_string(gap) + "); map is not C^2");
      }
  }

  std::map<std::string, MCMap> maps_;
};

/// Smooth maps used across the test and CLI suites.
inline MapCatalog standard_catalog() {
  MapCatalog cat;
  const Ball unit{GradedVector::zero(), 2.0};
  cat.add(expression_map("square_first", {"x1^2", "x2"}, 2, unit));
  cat.add(expression_map("product", {"x1*x2", "0"}, 2, unit));
  cat.add(expression_map("trig_mix", {"sin(x1) + x2^2", "x1*x2 + exp(x2)"}, 2, unit));
  cat.add(expression_map("rational", {"x1/(1 + x2^2)", "tanh(x1 - x2)"}, 2, unit));
  cat.add(expression_map("log_mix", {"log(2 + x1^2)", "x2*cos(x1)"}, 2, unit));
  cat.add(expression_map("linear", {"x1 + 2*x2", "3*x1 + 4*x2"}, 2, unit));
  cat.add(expression_map("cubic", {"x1^3 + x1"}, 1, unit));
  cat.add(expression_map("quintic", {"x1 + x1^3 + 0.01*x1^5"}, 1, unit));
  cat.add(expression_map("three_d", {"x1*x2 + x3", "sin(x3)*x1", "exp(0.5*x1) - x2^2"}, 3, unit));
  return cat;
}

}  // namespace bfm
