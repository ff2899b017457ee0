#pragma once

// Charts, atlases, transition maps and first/second order jets in chart
// coordinates.
//
// Points of the manifold are carried in reference coordinates. A chart maps
// reference coordinates to its own model coordinates (`forward`) and back
// (`inverse`); `domain` is the ball of model coordinates the chart covers.
// Overlaps are declared, not discovered: a ball in each chart's coordinates.

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bfm/calculus.hpp"

namespace bfm {

struct Chart {
  std::string label;
  std::string model_space = kDefaultSpace;
  Ball domain;      // in model coordinates
  MCMap forward;    // reference -> model
  MCMap inverse;    // model -> reference, defined on `domain`
};

struct Overlap {
  std::string a, b;
  Ball in_a;  // overlap region in chart a coordinates
  Ball in_b;  // the same region in chart b coordinates
};

/// Inverse of f by damped Newton on the first `f.dim` coordinates, starting
/// from `start`. Derivatives come from the implicit function rule:
/// D(f^-1)(y) = Df(x)^-1 and D2(f^-1)(y)(a, b) = -Df^-1 D2f(x)(Df^-1 a, Df^-1 b).
inline MCMap numeric_inverse(const MCMap& f, std::string name, std::optional<Ball> domain, GradedVector start) {
  if (!f.has_jacobian()) throw DomainError(f.name + ": numeric inverse needs an analytic Jacobian");
  const std::size_t n = f.dim;
  MCMap g;
  g.name = std::move(name);
  g.dim = n;
  g.domain_space = f.codomain_space;
  g.codomain_space = f.domain_space;
  g.smoothness = f.smoothness;
  g.domain = std::move(domain);
  auto solve = [f, n, start](const GradedVector& y) {
    GradedVector x = start;
    const double scale = 1.0 + y.sup_norm();
    double res = sup_distance(f(x), y);
    for (int it = 0; it < 200 && res > 1e-15 * scale; ++it) {
      const Eigen::VectorXd r = dense_of(f(x) - y, n);
      const Eigen::FullPivLU<Matrix> lu(resized(f.jacobian(x), n));
      if (!lu.isInvertible()) throw DomainError(f.name + ": singular Jacobian during inversion");
      const GradedVector dx = vector_of(lu.solve(r), f.domain_space);
      double lambda = 1.0;
      bool moved = false;
      for (int k = 0; k < 60; ++k, lambda *= 0.5) {
        const GradedVector cand = x - lambda * dx;
        if (!f.contains(cand)) continue;
        const double r2 = sup_distance(f(cand), y);
        if (r2 < res) {
          x = cand;
          res = r2;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    if (res > 1e-10 * scale) throw DomainError(f.name + ": inverse did not converge");
    return x;
  };
  g.fn = solve;
  g.jacobian = [f, n, solve](const GradedVector& y) {
    const Eigen::FullPivLU<Matrix> lu(resized(f.jacobian(solve(y)), n));
    if (!lu.isInvertible()) throw DomainError(f.name + ": singular Jacobian");
    return Matrix(lu.inverse());
  };
  if (f.has_hessian()) {
    g.hessian = [f, n, solve](const GradedVector& y) {
      const GradedVector x = solve(y);
      const Eigen::FullPivLU<Matrix> lu(resized(f.jacobian(x), n));
      if (!lu.isInvertible()) throw DomainError(f.name + ": singular Jacobian");
      const Matrix inv = lu.inverse();
      Hessian hf = f.hessian(x);
      hf.resize(n, Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
      Hessian out(n, Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
      for (std::size_t l = 0; l < n; ++l) {
        const Matrix m = inv.transpose() * resized(hf[l], n) * inv;
        for (std::size_t i = 0; i < n; ++i) out[i] -= inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) * m;
      }
      return out;
    };
  }
  return g;
}

/// Chart whose forward map is given by expressions; the inverse is the
/// given expressions if any, otherwise numeric.
inline Chart expression_chart(std::string label, const std::vector<std::string>& forward, std::size_t dim, Ball domain,
                              const std::vector<std::string>& inverse = {},
                              std::optional<Ball> reference_domain = std::nullopt,
                              const std::string& space = kDefaultSpace) {
  Chart c;
  c.label = label;
  c.model_space = space;
  c.domain = domain;
  c.forward = expression_map(label + ".forward", forward, dim, std::move(reference_domain), space);
  if (inverse.empty())
    c.inverse = numeric_inverse(c.forward, label + ".inverse", domain, GradedVector::zero(space));
  else
    c.inverse = expression_map(label + ".inverse", inverse, dim, domain, space);
  return c;
}

/// Max of |phi(phi^-1(y)) - y| and |phi^-1(phi(x)) - x| over sampled y in the chart ball.
inline double chart_roundtrip_residual(const Chart& c, std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    std::vector<double> y(c.forward.dim);
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = c.domain.center.coord(i + 1) + 0.999 * c.domain.radius * rng.uniform(-1.0, 1.0);
    const GradedVector yv(y, c.model_space);
    const GradedVector x = c.inverse(yv);
    worst = std::max(worst, sup_distance(c.forward(x), yv));
    worst = std::max(worst, sup_distance(c.inverse(c.forward(x)), x));
  }
  return worst;
}

class Atlas {
 public:
  Atlas() = default;
  Atlas(std::vector<Chart> charts, std::vector<Overlap> overlaps) {
    for (auto& c : charts) add_chart(std::move(c));
    for (auto& o : overlaps) add_overlap(std::move(o));
  }

  void add_chart(Chart c) {
    if (index_.count(c.label)) throw DomainError("duplicate chart label '" + c.label + "'");
    index_[c.label] = charts_.size();
    charts_.push_back(std::move(c));
  }

  void add_overlap(Overlap o) {
    chart(o.a);
    chart(o.b);
    if (o.a == o.b) throw DomainError("overlap of a chart with itself is implicit");
    overlaps_.push_back(std::move(o));
  }

  const Chart& chart(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw DomainError("no chart labelled '" + label + "'");
    return charts_[it->second];
  }

  /// Overlap oriented as (a, b); a chart overlaps itself on its whole domain.
  std::optional<Overlap> overlap(const std::string& a, const std::string& b) const {
    if (a == b) {
      const Chart& c = chart(a);
      return Overlap{a, a, c.domain, c.domain};
    }
    for (const auto& o : overlaps_) {
      if (o.a == a && o.b == b) return o;
      if (o.a == b && o.b == a) return Overlap{a, b, o.in_b, o.in_a};
    }
    return std::nullopt;
  }

  const std::vector<Chart>& charts() const noexcept { return charts_; }
  const std::vector<Overlap>& overlaps() const noexcept { return overlaps_; }

 private:
  std::vector<Chart> charts_;
  std::vector<Overlap> overlaps_;
  std::map<std::string, std::size_t> index_;
};

/// Theta_{alpha beta} = phi_alpha o phi_beta^-1 on the overlap, in beta coordinates.
inline MCMap transition(const Atlas& atlas, const std::string& alpha, const std::string& beta) {
  const auto ov = atlas.overlap(alpha, beta);
  if (!ov) throw DomainError("charts '" + alpha + "' and '" + beta + "' have no declared overlap");
  if (alpha == beta) {
    MCMap id = identity_map(atlas.chart(alpha).forward.dim, atlas.chart(alpha).model_space);
    id.name = "Theta[" + alpha + "," + alpha + "]";
    id.domain = ov->in_b;
    return id;
  }
  MCMap t = compose_maps(atlas.chart(alpha).forward, atlas.chart(beta).inverse);
  t.name = "Theta[" + alpha + "," + beta + "]";
  t.domain = ov->in_b;
  return t;
}

// ---------------------------------------------------------------------------
// jets

struct Jet1 {
  std::string chart;
  GradedVector x;  // phi(p)
  GradedVector v;  // (phi o f)'(0)
};

struct Jet2 {
  std::string chart;
  GradedVector x;
  GradedVector v;  // (phi o f)'(0)
  GradedVector w;  // (phi o f)''(0)
};

/// Point of T(TM) in chart coordinates: base (x, v), fiber (a, b).
struct SecondTangentPoint {
  GradedVector x, v, a, b;
};

/// Embedding of a 2-jet into T(TM): (x, v) -> (x, v, v, w).
inline SecondTangentPoint embed(const Jet2& j) { return {j.x, j.v, j.v, j.w}; }

/// The embedded image is the locus where the fiber velocity equals the base
/// velocity (pi_2 = T pi_M).
inline bool on_second_order_locus(const SecondTangentPoint& p) { return p.v == p.a; }

inline Jet1 pi12(const Jet2& j) { return {j.chart, j.x, j.v}; }
inline GradedVector pi2(const Jet2& j) { return j.x; }

namespace detail {
inline std::size_t jet_degree(const MCMap& h, const GradedVector& x, const GradedVector& v) {
  return std::max({h.dim, x.degree(), v.degree(), std::size_t{1}});
}
}  // namespace detail

/// (x, v) -> (h(x), Dh(x) v).
inline Jet1 tangent_map(const MCMap& h, const Jet1& j, std::string target = {}) {
  if (!h.contains(j.x)) throw DomainError(h.name + ": jet base point outside the domain");
  const std::size_t n = detail::jet_degree(h, j.x, j.v);
  const Matrix D = differential_matrix(h, j.x, n);
  return {target.empty() ? h.name : std::move(target), h(j.x), apply_matrix(D, j.v, h.codomain_space)};
}

/// (x, v, w) -> (T(x), DT(x) v, D2T(x)(v, v) + DT(x) w).
inline Jet2 jet2_transition(const MCMap& theta, const Jet2& j, std::string target = {}) {
  if (!theta.contains(j.x)) throw DomainError(theta.name + ": jet base point outside the domain");
  const std::size_t n = std::max(detail::jet_degree(theta, j.x, j.v), j.w.degree());
  const Matrix D = differential_matrix(theta, j.x, n);
  const GradedVector quad = second_differential(theta, j.x, j.v, j.v);
  return {target.empty() ? theta.name : std::move(target), theta(j.x), apply_matrix(D, j.v, theta.codomain_space),
          quad + apply_matrix(D, j.w, theta.codomain_space)};
}

/// Jet transforms between charts of an atlas.
inline Jet1 change_chart(const Atlas& atlas, const Jet1& j, const std::string& to) {
  return tangent_map(transition(atlas, to, j.chart), j, to);
}
inline Jet2 change_chart(const Atlas& atlas, const Jet2& j, const std::string& to) {
  return jet2_transition(transition(atlas, to, j.chart), j, to);
}

struct AdditivityWitness {
  bool found = false;
  Jet2 first, second;
  double residual = 0.0;  // sup |T(j1 + j2).w - T(j1).w - T(j2).w|
};

/// Searches for two 2-jets over the same base point whose fiberwise sum is
/// not mapped to the sum of images. Candidates: equal basis velocities,
/// then random (v, w) pairs.
inline AdditivityWitness jet2_additivity_witness(const MCMap& theta, const GradedVector& x, std::size_t samples,
                                                 std::uint64_t seed, double threshold = 0.1) {
  AdditivityWitness best;
  const std::string sp = theta.domain_space;
  auto residual = [&](const Jet2& a, const Jet2& b) {
    const Jet2 sum{a.chart, x, a.v + b.v, a.w + b.w};
    const Jet2 ta = jet2_transition(theta, a), tb = jet2_transition(theta, b), ts = jet2_transition(theta, sum);
    return std::max(sup_distance(ts.w, ta.w + tb.w), sup_distance(ts.v, ta.v + tb.v));
  };
  auto consider = [&](const Jet2& a, const Jet2& b) {
    const double r = residual(a, b);
    if (r > best.residual) {
      best.residual = r;
      best.first = a;
      best.second = b;
    }
  };
  for (std::size_t i = 1; i <= theta.dim; ++i) {
    const GradedVector e = GradedVector::basis(i, sp);
    consider({"", x, e, GradedVector::zero(sp)}, {"", x, e, GradedVector::zero(sp)});
  }
  Rng rng(seed);
  for (std::size_t s = 0; s < samples && best.residual <= threshold; ++s) {
    auto rv = [&] {
      std::vector<double> c(theta.dim);
      for (double& v : c) v = rng.uniform(-1.0, 1.0);
      return GradedVector(c, sp);
    };
    consider({"", x, rv(), rv()}, {"", x, rv(), rv()});
  }
  best.found = best.residual > threshold;
  return best;
}

// ---------------------------------------------------------------------------
// cocycle

struct CocycleViolation {
  std::string alpha, beta, gamma;
  GradedVector point;  // in gamma coordinates
  double residual = 0.0;
  std::string what;
};

struct CocycleReport {
  std::size_t triples_checked = 0;
  std::size_t points_checked = 0;
  double max_residual = 0.0;
  double min_pivot = 0.0;  // smallest |pivot| of DTheta LU over samples; > 0 means invertible
  double max_solve_residual = 0.0;
  std::vector<CocycleViolation> violations;
  bool pass() const { return violations.empty(); }
};

/// For all ordered triples with pairwise overlaps, samples y in the (beta,
/// gamma) overlap and compares Theta_{alpha gamma}(y) with
/// Theta_{alpha beta}(Theta_{beta gamma}(y)); points outside any of the three
/// overlaps are skipped. Each DTheta_{beta gamma}(y) is checked invertible by
/// solving DTheta u = e_i.
inline CocycleReport cocycle_check(const Atlas& atlas, std::size_t samples, std::uint64_t seed, double tol = 1e-9) {
  CocycleReport rep;
  rep.min_pivot = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  const auto& cs = atlas.charts();
  for (const auto& a : cs)
    for (const auto& b : cs)
      for (const auto& g : cs) {
        if (a.label == b.label || b.label == g.label || a.label == g.label) continue;
        const auto ab = atlas.overlap(a.label, b.label), bg = atlas.overlap(b.label, g.label),
                   ag = atlas.overlap(a.label, g.label);
        if (!ab || !bg || !ag) continue;
        ++rep.triples_checked;
        const MCMap t_ag = transition(atlas, a.label, g.label), t_ab = transition(atlas, a.label, b.label),
                    t_bg = transition(atlas, b.label, g.label);
        const std::size_t n = std::max({t_ag.dim, t_ab.dim, t_bg.dim});
        for (std::size_t s = 0; s < samples; ++s) {
          std::vector<double> c(n);
          for (std::size_t i = 0; i < n; ++i)
            c[i] = bg->in_b.center.coord(i + 1) + 0.999 * bg->in_b.radius * rng.uniform(-1.0, 1.0);
          const GradedVector y(c, g.model_space);
          if (!ag->in_b.contains(y)) continue;
          const GradedVector z = t_bg(y);
          if (!ab->in_b.contains(z)) continue;
          ++rep.points_checked;
          const double r = sup_distance(t_ag(y), t_ab(z));
          rep.max_residual = std::max(rep.max_residual, r);
          if (r > tol) rep.violations.push_back({a.label, b.label, g.label, y, r, "cocycle residual"});
          const Matrix J = resized(differential_matrix(t_bg, y, n), n);
          const Eigen::FullPivLU<Matrix> lu(J);
          double pivot = std::numeric_limits<double>::infinity();
          for (Eigen::Index i = 0; i < lu.matrixLU().rows(); ++i) pivot = std::min(pivot, std::abs(lu.matrixLU()(i, i)));
          rep.min_pivot = std::min(rep.min_pivot, pivot);
          if (!lu.isInvertible()) {
            rep.violations.push_back({a.label, b.label, g.label, y, 0.0, "singular transition differential"});
            continue;
          }
          for (std::size_t i = 0; i < n; ++i) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
            e[static_cast<Eigen::Index>(i)] = 1.0;
            const Eigen::VectorXd u = lu.solve(e);
            rep.max_solve_residual = std::max(rep.max_solve_residual, (J * u - e).cwiseAbs().maxCoeff());
          }
        }
      }
  if (rep.points_checked == 0) rep.min_pivot = 0.0;
  if (rep.max_solve_residual > tol)
    rep.violations.push_back({"", "", "", GradedVector::zero(), rep.max_solve_residual, "inverse solve residual"});
  return rep;
}

/// One-coordinate atlas with charts id, x^3 + x and x + x^3 + 0.01 x^5 around 0.
inline Atlas three_chart_atlas() {
  const Ball ref{GradedVector::zero(), 2.0};
  std::vector<Chart> charts{
      expression_chart("id", {"x1"}, 1, {GradedVector::zero(), 2.0}, {"x1"}, ref),
      expression_chart("cubic", {"x1^3 + x1"}, 1, {GradedVector::zero(), 8.0}, {}, ref),
      expression_chart("quintic", {"x1 + x1^3 + 0.01*x1^5"}, 1, {GradedVector::zero(), 8.0}, {}, ref)};
  // |x| < 0.5 in reference coordinates; images under the two odd maps.
  const Ball in_id{GradedVector::zero(), 0.5};
  const Ball in_cubic{GradedVector::zero(), 0.625};
  const Ball in_quintic{GradedVector::zero(), 0.5 + 0.125 + 0.01 * 0.03125};
  std::vector<Overlap> overlaps{{"id", "cubic", in_id, in_cubic},
                                {"id", "quintic", in_id, in_quintic},
                                {"cubic", "quintic", in_cubic, in_quintic}};
  return Atlas(std::move(charts), std::move(overlaps));
}

}  // namespace bfm
