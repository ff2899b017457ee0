#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "bfm/error.hpp"
#include "bfm/graded_vector.hpp"
#include "bfm/random.hpp"

namespace bfm {

/// Positive weight w_i attached to coordinate i of a weighted seminorm.
struct WeightRule {
  enum class Kind { power, geometric };

  Kind kind = Kind::power;
  double param = 0.0;  // exponent p for i^p, base b for b^i

  static WeightRule power(double p) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("power weight needs p >= 0");
    return {Kind::power, p};
  }
  static WeightRule geometric(double b) {
    if (!(b > 0.0) || !std::isfinite(b)) throw DomainError("geometric weight needs b > 0");
    return {Kind::geometric, b};
  }

  double operator()(std::size_t i) const {
    const double x = static_cast<double>(i);
    return kind == Kind::power ? std::pow(x, param) : std::pow(param, x);
  }
};

/// Monotone, stabilizing seminorm family rho_n(v) = max_{i<=n} w_i |v_i|.
/// For a vector of degree D, rho_n = rho_D for every n >= D.
class SeminormFamily {
 public:
  enum class Kind { prefix_sup, weighted_prefix_sup };

  static SeminormFamily prefix_sup() { return SeminormFamily(Kind::prefix_sup, WeightRule::power(0.0)); }
  static SeminormFamily weighted_prefix_sup(WeightRule w) { return SeminormFamily(Kind::weighted_prefix_sup, w); }

  Kind kind() const noexcept { return kind_; }
  const WeightRule& weight() const noexcept { return weight_; }

  /// |v_i| scaled by the weight of index i.
  double weighted_abs(std::size_t i, double vi) const {
    return kind_ == Kind::prefix_sup ? std::abs(vi) : weight_(i) * std::abs(vi);
  }

  double operator()(std::size_t n, const GradedVector& v) const {
    if (n == 0) throw DomainError("seminorm index is 1-based");
    double m = 0.0;
    const std::size_t top = std::min(n, v.degree());
    for (std::size_t i = 1; i <= top; ++i) m = std::max(m, weighted_abs(i, v.coord(i)));
    return m;
  }

 private:
  SeminormFamily(Kind k, WeightRule w) : kind_(k), weight_(w) {}

  Kind kind_;
  WeightRule weight_;
};

/// Closed-form positive sequence alpha_n, strictly decreasing to zero. The
/// rule parameters are validated once on construction, which is what makes
/// those three properties hold for every n.
class AlphaSequence {
 public:
  enum class Rule { geometric, power };

  /// c * q^n with c > 0, 0 < q < 1.
  static AlphaSequence geometric(double c, double q) {
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("alpha rule needs c > 0");
    if (!(q > 0.0 && q < 1.0)) throw DomainError("geometric alpha rule needs 0 < q < 1");
    return AlphaSequence(Rule::geometric, c, q);
  }

  /// c / n^p with c > 0, p > 0.
  static AlphaSequence power(double c, double p) {
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("alpha rule needs c > 0");
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("power alpha rule needs p > 0");
    return AlphaSequence(Rule::power, c, p);
  }

  Rule rule() const noexcept { return rule_; }
  double c() const noexcept { return c_; }
  double param() const noexcept { return param_; }

  double operator()(std::size_t n) const {
    if (n == 0) throw DomainError("alpha index is 1-based");
    const double x = static_cast<double>(n);
    return rule_ == Rule::geometric ? c_ * std::pow(param_, x) : c_ / std::pow(x, param_);
  }

 private:
  AlphaSequence(Rule r, double c, double p) : rule_(r), c_(c), param_(p) {}

  Rule rule_;
  double c_;
  double param_;
};

/// Truncated Frechet space with the standard metric
///   d(e, f) = sup_n alpha_n rho_n(e - f) / (1 + rho_n(e - f)).
class FrechetSpace {
 public:
  FrechetSpace(std::string id, SeminormFamily seminorms, AlphaSequence alphas)
      : id_(std::move(id)), seminorms_(seminorms), alphas_(alphas) {}

  /// alpha_n = 2^-n with the prefix-sup family.
  static FrechetSpace standard(std::string id = kDefaultSpace) {
    return FrechetSpace(std::move(id), SeminormFamily::prefix_sup(), AlphaSequence::geometric(1.0, 0.5));
  }

  const std::string& id() const noexcept { return id_; }
  const SeminormFamily& seminorms() const noexcept { return seminorms_; }
  const AlphaSequence& alphas() const noexcept { return alphas_; }

  void require_member(const GradedVector& v) const {
    if (v.space() != id_) throw DomainError("vector of space '" + v.space() + "' used in space '" + id_ + "'");
  }

  double seminorm(std::size_t n, const GradedVector& v) const {
    require_member(v);
    return seminorms_(n, v);
  }

  /// Exact sup: the family stabilizes at D = deg(v) and alpha decreases, so
  /// every term with n > D is strictly below the n = D term.
  double norm(const GradedVector& v) const {
    require_member(v);
    double best = 0.0;
    double rho = 0.0;
    for (std::size_t n = 1; n <= v.degree(); ++n) {
      rho = std::max(rho, seminorms_.weighted_abs(n, v.coord(n)));
      best = std::max(best, alphas_(n) * (rho / (1.0 + rho)));
    }
    return best;
  }

  double distance(const GradedVector& e, const GradedVector& f) const {
    require_member(e);
    require_member(f);
    return norm(e - f);
  }

 private:
  std::string id_;
  SeminormFamily seminorms_;
  AlphaSequence alphas_;
};

inline double seminorm_eval(const FrechetSpace& space, std::size_t n, const GradedVector& v) {
  return space.seminorm(n, v);
}

inline double metric_distance(const FrechetSpace& space, const GradedVector& e, const GradedVector& f) {
  return space.distance(e, f);
}

inline double metric_norm(const FrechetSpace& space, const GradedVector& f) { return space.norm(f); }

/// The same sup evaluated term by term: every rho_n recomputed from scratch
/// for n up to deg + extra. Slow; used as a cross-check of `norm`.
inline double term_enumeration_norm(const FrechetSpace& space, const GradedVector& v, std::size_t extra = 64) {
  double best = 0.0;
  for (std::size_t n = 1; n <= v.degree() + extra; ++n) {
    const double rho = space.seminorm(n, v);
    best = std::max(best, space.alphas()(n) * (rho / (1.0 + rho)));
  }
  return best;
}

// ---------------------------------------------------------------------------
// sampling helpers shared by the property probes

/// Random vector of degree in [1, max_degree], entries uniform in [-1, 1]
/// times a log-uniform magnitude 10^[lo_exp, hi_exp].
inline GradedVector random_vector(Rng& rng, std::size_t max_degree, const std::string& space, double lo_exp = -3.0,
                                  double hi_exp = 3.0) {
  const std::size_t deg = 1 + rng.index(max_degree);
  const double scale = rng.log_scale(lo_exp, hi_exp);
  std::vector<double> c(deg);
  for (double& x : c) x = scale * rng.uniform(-1.0, 1.0);
  return GradedVector(std::move(c), space);
}

/// Largest s in [0, 1] (by bisection) with ||s v||_d <= radius; returns s v.
inline GradedVector shrink_into_ball(const FrechetSpace& space, const GradedVector& v, double radius) {
  if (space.norm(v) <= radius) return v;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (space.norm(mid * v) <= radius ? lo : hi) = mid;
  }
  return lo * v;
}

struct ConvexityReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_margin = -1.0;  // max over samples of ||lambda e + mu f||_d - radius
  std::optional<GradedVector> witness_e, witness_f;
  double witness_lambda = 0.0, witness_mu = 0.0;
};

/// Probe absolute convexity of the closed d-ball of the given radius.
inline ConvexityReport check_absolutely_convex(const FrechetSpace& space, double radius, std::size_t sample_count,
                                               std::uint64_t seed, double tol = 1e-12) {
  if (!(radius > 0.0)) throw DomainError("radius must be positive");
  if (sample_count == 0) throw DomainError("sample_count must be >= 1");
  Rng rng(seed);
  ConvexityReport rep;
  rep.worst_margin = -radius;
  for (std::size_t s = 0; s < sample_count; ++s) {
    const GradedVector e = shrink_into_ball(space, random_vector(rng, 8, space.id()), radius);
    const GradedVector f = shrink_into_ball(space, random_vector(rng, 8, space.id()), radius);
    double lambda = rng.uniform(-1.0, 1.0);
    double mu = rng.uniform(-1.0, 1.0);
    const double total = std::abs(lambda) + std::abs(mu);
    if (total > 1.0) {
      lambda /= total;
      mu /= total;
    }
    const double margin = space.norm(lambda * e + mu * f) - radius;
    ++rep.samples;
    if (margin > rep.worst_margin) rep.worst_margin = margin;
    if (margin > tol) {
      if (rep.violations++ == 0) {
        rep.witness_e = e;
        rep.witness_f = f;
        rep.witness_lambda = lambda;
        rep.witness_mu = mu;
      }
    }
  }
  return rep;
}

}  // namespace bfm
