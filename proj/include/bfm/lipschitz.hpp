#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bfm/error.hpp"
#include "bfm/frechet.hpp"
#include "bfm/graded_vector.hpp"
#include "bfm/random.hpp"

namespace bfm {

/// Named coefficient rule for diagonal operators, n -> value.
struct DiagonalRule {
  std::string name;
  std::function<double(std::size_t)> value;

  static DiagonalRule index_power(double c, double p) {
    return {"index_power", [c, p](std::size_t n) { return c * std::pow(static_cast<double>(n), p); }};
  }
  static DiagonalRule geometric(double c, double q) {
    return {"geometric", [c, q](std::size_t n) { return c * std::pow(q, static_cast<double>(n)); }};
  }
  static DiagonalRule constant(double c) {
    return {"constant", [c](std::size_t) { return c; }};
  }
};

/// Structured linear map between graded spaces. Immutable; copies share the
/// representation. Sums and compositions stay symbolic so differences and
/// products are exact in structure.
class LinearMap {
 public:
  enum class Kind { zero, identity, scalar, diagonal, finite_matrix, shift, sum, composition, callable };
  enum class Direction { left, right };

  static LinearMap zero(std::string domain, std::string codomain) {
    Node n{Kind::zero, std::move(domain), std::move(codomain)};
    return LinearMap(std::move(n));
  }
  static LinearMap zero(const std::string& space = kDefaultSpace) { return zero(space, space); }

  static LinearMap identity(const std::string& space = kDefaultSpace) {
    return LinearMap(Node{Kind::identity, space, space});
  }

  static LinearMap scalar(double c, const std::string& space = kDefaultSpace) {
    Node n{Kind::scalar, space, space};
    n.scalar = c;
    return LinearMap(std::move(n));
  }

  static LinearMap diagonal(DiagonalRule rule, const std::string& space = kDefaultSpace) {
    Node n{Kind::diagonal, space, space};
    n.rule = std::move(rule);
    return LinearMap(std::move(n));
  }

  /// k x k block acting on coordinates 1..k (row-major entries); zero on
  /// every other coordinate and zero output beyond k.
  static LinearMap finite_matrix(std::size_t k, std::vector<double> entries, std::string domain = kDefaultSpace,
                                 std::string codomain = kDefaultSpace) {
    if (entries.size() != k * k) throw DomainError("finite_matrix needs k*k entries");
    Node n{Kind::finite_matrix, std::move(domain), std::move(codomain)};
    n.k = k;
    n.matrix = std::move(entries);
    return LinearMap(std::move(n));
  }

  static LinearMap shift(Direction d, const std::string& space = kDefaultSpace) {
    Node n{Kind::shift, space, space};
    n.direction = d;
    return LinearMap(std::move(n));
  }

  static LinearMap sum(std::vector<LinearMap> parts) {
    if (parts.empty()) throw DomainError("sum of no maps");
    for (const auto& p : parts)
      if (p.domain() != parts.front().domain() || p.codomain() != parts.front().codomain())
        throw DomainError("sum of maps with different spaces");
    Node n{Kind::sum, parts.front().domain(), parts.front().codomain()};
    n.parts = std::move(parts);
    return LinearMap(std::move(n));
  }

  /// factors[0] o factors[1] o ... ; applied right to left.
  static LinearMap composition(std::vector<LinearMap> factors) {
    if (factors.empty()) throw DomainError("composition of no maps");
    for (std::size_t i = 0; i + 1 < factors.size(); ++i)
      if (factors[i].domain() != factors[i + 1].codomain())
        throw DomainError("composition space mismatch: '" + factors[i].domain() + "' vs '" +
                          factors[i + 1].codomain() + "'");
    Node n{Kind::composition, factors.back().domain(), factors.front().codomain()};
    n.parts = std::move(factors);
    return LinearMap(std::move(n));
  }

  /// Opaque map given by a function; used for maps derived from connection
  /// data. Linearity is the caller's contract.
  static LinearMap callable(std::string name, std::function<GradedVector(const GradedVector&)> fn,
                            std::string domain = kDefaultSpace, std::string codomain = kDefaultSpace) {
    Node n{Kind::callable, std::move(domain), std::move(codomain)};
    n.name = std::move(name);
    n.fn = std::move(fn);
    return LinearMap(std::move(n));
  }

  Kind kind() const noexcept { return node_->kind; }
  const std::string& domain() const noexcept { return node_->domain; }
  const std::string& codomain() const noexcept { return node_->codomain; }
  double scalar_value() const noexcept { return node_->scalar; }
  std::size_t block_size() const noexcept { return node_->k; }
  const std::vector<double>& entries() const noexcept { return node_->matrix; }
  const std::vector<LinearMap>& parts() const noexcept { return node_->parts; }

  GradedVector apply(const GradedVector& x) const {
    if (x.space() != domain())
      throw DomainError("map with domain '" + domain() + "' applied to vector of '" + x.space() + "'");
    const Node& n = *node_;
    switch (n.kind) {
      case Kind::zero:
        return GradedVector::zero(n.codomain);
      case Kind::identity:
        return x;
      case Kind::scalar:
        return n.scalar * x;
      case Kind::diagonal: {
        std::vector<double> c(x.coords().begin(), x.coords().end());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] *= n.rule.value(i + 1);
        return GradedVector(std::move(c), n.codomain);
      }
      case Kind::finite_matrix: {
        std::vector<double> c(n.k, 0.0);
        for (std::size_t i = 0; i < n.k; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n.k; ++j) acc += n.matrix[i * n.k + j] * x.coord(j + 1);
          c[i] = acc;
        }
        return GradedVector(std::move(c), n.codomain);
      }
      case Kind::shift: {
        std::vector<double> c;
        if (n.direction == Direction::right) {
          if (x.is_zero()) return GradedVector::zero(n.codomain);
          c.reserve(x.degree() + 1);
          c.push_back(0.0);
          c.insert(c.end(), x.coords().begin(), x.coords().end());
        } else if (x.degree() > 1) {
          c.assign(x.coords().begin() + 1, x.coords().end());
        }
        return GradedVector(std::move(c), n.codomain);
      }
      case Kind::sum: {
        GradedVector acc = n.parts.front().apply(x);
        for (std::size_t i = 1; i < n.parts.size(); ++i) acc += n.parts[i].apply(x);
        return acc;
      }
      case Kind::composition: {
        GradedVector y = x;
        for (auto it = n.parts.rbegin(); it != n.parts.rend(); ++it) y = it->apply(y);
        return y;
      }
      case Kind::callable: {
        GradedVector y = n.fn(x);
        if (y.space() != n.codomain) y = y.in_space(n.codomain);
        return y;
      }
    }
    throw DomainError("unreachable");
  }

  GradedVector operator()(const GradedVector& x) const { return apply(x); }

  /// Largest coordinate index the map reads or writes, when finite; 0 means
  /// "acts on every coordinate".
  std::size_t active_degree() const {
    const Node& n = *node_;
    switch (n.kind) {
      case Kind::finite_matrix:
        return n.k;
      case Kind::sum:
      case Kind::composition: {
        std::size_t d = 0;
        for (const auto& p : n.parts) {
          const std::size_t pd = p.active_degree();
          if (pd == 0) return 0;
          d = std::max(d, pd);
        }
        return d;
      }
      case Kind::zero:
        return 1;
      default:
        return 0;
    }
  }

  std::string describe() const {
    const Node& n = *node_;
    switch (n.kind) {
      case Kind::zero: return "zero";
      case Kind::identity: return "identity";
      case Kind::scalar: return "scalar(" + std::to_string(n.scalar) + ")";
      case Kind::diagonal: return "diagonal(" + n.rule.name + ")";
      case Kind::finite_matrix: return "finite_matrix(" + std::to_string(n.k) + ")";
      case Kind::shift: return n.direction == Direction::left ? "shift(left)" : "shift(right)";
      case Kind::callable: return "callable(" + n.name + ")";
      case Kind::sum:
      case Kind::composition: {
        std::string s = n.kind == Kind::sum ? "sum[" : "compose[";
        for (std::size_t i = 0; i < n.parts.size(); ++i) s += (i ? ", " : "") + n.parts[i].describe();
        return s + "]";
      }
    }
    return "?";
  }

 private:
  struct Node {
    Kind kind;
    std::string domain, codomain;
    double scalar = 0.0;
    DiagonalRule rule{};
    std::size_t k = 0;
    std::vector<double> matrix{};
    Direction direction = Direction::right;
    std::vector<LinearMap> parts{};
    std::string name{};
    std::function<GradedVector(const GradedVector&)> fn{};
  };

  explicit LinearMap(Node n) : node_(std::make_shared<const Node>(std::move(n))) {}

  std::shared_ptr<const Node> node_;
};

inline GradedVector apply_linear(const LinearMap& L, const GradedVector& x) { return L.apply(x); }

inline LinearMap compose(const LinearMap& L, const LinearMap& H) {
  if (H.codomain() != L.domain()) throw DomainError("compose: codomain of H is not the domain of L");
  return LinearMap::composition({L, H});
}

/// L - H as a sum with the negated second operand.
inline LinearMap difference(const LinearMap& L, const LinearMap& H) {
  return LinearMap::sum({L, LinearMap::composition({LinearMap::scalar(-1.0, H.codomain()), H})});
}

/// Dense n x n block of L on coordinates 1..n (column j = L e_j truncated).
/// Used only by oracles and solvers; L itself stays structured.
inline std::vector<double> to_dense(const LinearMap& L, std::size_t n) {
  std::vector<double> a(n * n, 0.0);
  for (std::size_t j = 1; j <= n; ++j) {
    const GradedVector col = L.apply(GradedVector::basis(j, L.domain()));
    for (std::size_t i = 1; i <= n; ++i) a[(i - 1) * n + (j - 1)] = col.coord(i);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Lipschitz norm estimation

struct LipNormEstimate {
  double lower_bound = 0.0;  // realized by `witness`
  double estimate = 0.0;     // >= lower_bound; includes small/large-scale extrapolation
  std::size_t probes_used = 0;
  std::uint64_t seed = 0;
  std::vector<GradedVector> witness;  // one vector for linear maps, a tuple for k-linear
};

struct ProbeOptions {
  std::size_t basis_degree = 8;  // e_1 .. e_basis_degree are probed at every scale
  int min_exp = -6;              // scales 10^min_exp .. 10^max_exp
  int max_exp = 6;
};

/// ||L x||_d / ||x||_g; 0 for x with ||x||_g == 0.
inline double lip_ratio(const LinearMap& L, const FrechetSpace& domain, const FrechetSpace& codomain,
                        const GradedVector& x) {
  const double nx = domain.norm(x);
  if (nx == 0.0) return 0.0;
  return codomain.norm(L.apply(x)) / nx;
}

namespace detail {

// Deterministic probe sequence: basis vectors on the log scale grid, then
// alternating random vectors and perturbations of the best witness so far.
// The k-th probe depends only on (seed, probes 0..k-1), never on the budget,
// which makes the lower bound monotone in the budget.
template <class Ratio, class Tuple>
LipNormEstimate run_probes(std::size_t budget, std::uint64_t seed, const std::vector<Tuple>& structured,
                           const std::function<Tuple(Rng&)>& random_probe,
                           const std::function<Tuple(Rng&, const Tuple&)>& perturb, Ratio ratio) {
  LipNormEstimate est;
  est.seed = seed;
  Rng rng(seed);
  std::vector<GradedVector> best_tuple;
  double best = -1.0;
  auto consider = [&](const Tuple& t) {
    const double r = ratio(t);
    ++est.probes_used;
    if (r > best) {
      best = r;
      best_tuple = t;
    }
  };
  std::size_t k = 0;
  for (; k < budget && k < structured.size(); ++k) consider(structured[k]);
  for (; k < budget; ++k) {
    if (k % 2 == 0 || best_tuple.empty())
      consider(random_probe(rng));
    else
      consider(perturb(rng, best_tuple));
  }
  est.lower_bound = std::max(best, 0.0);
  est.estimate = est.lower_bound;
  est.witness = best_tuple;
  return est;
}

// Rescales v so its sup norm lies in [10^min_exp, 10^max_exp]; perturbations
// would otherwise drift out of the probed scale window.
inline GradedVector clamp_scale(const GradedVector& v, const ProbeOptions& opt) {
  const double m = v.sup_norm();
  if (m == 0.0) return v;
  const double lo = std::pow(10.0, opt.min_exp), hi = std::pow(10.0, opt.max_exp);
  if (m > hi) return (hi / m) * v;
  if (m < lo) return (lo / m) * v;
  return v;
}

inline std::vector<double> scale_grid(const ProbeOptions& opt) {
  std::vector<double> s;
  for (int e = opt.min_exp; e <= opt.max_exp; ++e) s.push_back(std::pow(10.0, e));
  return s;
}

// Linear extrapolation of a ratio curve to its s -> 0 and s -> infinity limits.
template <class Ratio>
double extrapolated_limits(Ratio ratio_at_scale, const ProbeOptions& opt) {
  const double s_small = std::pow(10.0, opt.min_exp);
  const double s_large = std::pow(10.0, opt.max_exp);
  const double small = 2.0 * ratio_at_scale(0.5 * s_small) - ratio_at_scale(s_small);
  const double large = 2.0 * ratio_at_scale(2.0 * s_large) - ratio_at_scale(s_large);
  return std::max(small, large);
}

// Coordinate ascent on the ratio from x, over the first deg coordinates and
// the overall scale, with step halving. Deterministic; feeds the estimate
// only, so the lower bound stays a plain function of the probe prefix.
template <class Ratio>
GradedVector refine_direction(const GradedVector& x, std::size_t deg, Ratio ratio) {
  const std::size_t n = std::max(deg, x.degree());
  std::vector<double> c = x.dense(n);
  const std::string space = x.space();
  double best = ratio(x);
  double step = 0.25;
  for (int round = 0; round < 12; ++round, step *= 0.5) {
    for (int sweep = 0; sweep < 4; ++sweep) {
      bool moved = false;
      const double mag = GradedVector(c, space).sup_norm();
      for (std::size_t i = 0; i <= n; ++i) {
        for (double sign : {1.0, -1.0}) {
          std::vector<double> t = c;
          if (i < n)
            t[i] += sign * step * mag;
          else
            for (double& v : t) v *= std::exp(sign * step * 4.0);
          const double r = ratio(GradedVector(t, space));
          if (r > best) {
            best = r;
            c = std::move(t);
            moved = true;
          }
        }
      }
      if (!moved) break;
    }
  }
  return GradedVector(c, space);
}

}  // namespace detail

/// Lower bound (with witness) and estimate of ||L||_{g,d}. The true sup is
/// not computable in general; only the lower bound is guaranteed.
inline LipNormEstimate lip_norm_estimate(const LinearMap& L, const FrechetSpace& domain, const FrechetSpace& codomain,
                                         std::size_t probe_budget, std::uint64_t seed, ProbeOptions opt = {}) {
  if (probe_budget == 0) throw DomainError("probe_budget must be >= 1");
  if (L.domain() != domain.id() || L.codomain() != codomain.id())
    throw DomainError("lip_norm_estimate: spaces do not match the map");
  if (L.kind() == LinearMap::Kind::zero) {
    LipNormEstimate z;
    z.seed = seed;
    return z;
  }
  const std::size_t active = L.active_degree();
  const std::size_t deg = std::max(opt.basis_degree, active == 0 ? std::size_t{0} : active + 1);
  const auto scales = detail::scale_grid(opt);

  using Tuple = std::vector<GradedVector>;
  std::vector<Tuple> structured;
  for (std::size_t n = 1; n <= deg; ++n)
    for (double s : scales) structured.push_back({GradedVector::basis(n, domain.id(), s)});

  auto ratio = [&](const Tuple& t) { return lip_ratio(L, domain, codomain, t.front()); };
  std::function<Tuple(Rng&)> random_probe = [&](Rng& rng) {
    return Tuple{random_vector(rng, deg, domain.id(), opt.min_exp, opt.max_exp)};
  };
  std::function<Tuple(Rng&, const Tuple&)> perturb = [&](Rng& rng, const Tuple& best) {
    const GradedVector& b = best.front();
    const double mag = std::max(b.sup_norm(), 1e-300);
    const double step = mag * std::pow(2.0, -static_cast<double>(rng.index(30)));
    GradedVector dir = random_vector(rng, std::max(deg, b.degree()), domain.id(), 0.0, 0.0);
    GradedVector cand = rng.uniform() < 0.5 ? b + step * dir : (1.0 + rng.uniform(-0.5, 0.5)) * b;
    return Tuple{detail::clamp_scale(cand, opt)};
  };

  LipNormEstimate est = detail::run_probes(probe_budget, seed, structured, random_probe, perturb, ratio);
  if (est.witness.empty() || est.witness.front().is_zero()) return est;

  // Extrapolate along the witness direction and each basis direction.
  double limit = est.lower_bound;
  auto along = [&](const GradedVector& v) {
    const double vn = v.sup_norm();
    const GradedVector unit = (1.0 / vn) * v;
    return detail::extrapolated_limits([&](double s) { return lip_ratio(L, domain, codomain, s * unit); }, opt);
  };
  limit = std::max(limit, along(est.witness.front()));
  for (std::size_t n = 1; n <= deg; ++n) limit = std::max(limit, along(GradedVector::basis(n, domain.id())));
  // Ratios can plateau at large scales, so ascent also starts from the
  // witness direction pulled down to the smallest probed scale.
  const GradedVector& w = est.witness.front();
  const double small = std::pow(10.0, opt.min_exp);
  for (const GradedVector& start : {w, (small / w.sup_norm()) * w}) {
    const GradedVector refined =
        detail::refine_direction(start, deg, [&](const GradedVector& v) { return lip_ratio(L, domain, codomain, v); });
    limit = std::max({limit, lip_ratio(L, domain, codomain, refined), along(refined)});
  }
  est.estimate = std::max(est.lower_bound, limit);
  return est;
}

/// D(L, H) = ||L - H||, estimated on the difference map.
inline LipNormEstimate op_metric(const LinearMap& L, const LinearMap& H, const FrechetSpace& domain,
                                 const FrechetSpace& codomain, std::size_t probe_budget, std::uint64_t seed,
                                 ProbeOptions opt = {}) {
  if (L.domain() != H.domain() || L.codomain() != H.codomain())
    throw DomainError("op_metric: maps do not share domain and codomain");
  return lip_norm_estimate(difference(L, H), domain, codomain, probe_budget, seed, opt);
}

/// Records (||x - x'||_g, ||L x - L x'||_d) along x' = x + 2^-j u.
inline std::vector<std::pair<double, double>> evaluation_continuity_probe(const LinearMap& L,
                                                                          const FrechetSpace& domain,
                                                                          const FrechetSpace& codomain,
                                                                          const GradedVector& x,
                                                                          const GradedVector& u, int steps = 40) {
  std::vector<std::pair<double, double>> out;
  const GradedVector lx = L.apply(x);
  for (int j = 0; j < steps; ++j) {
    const GradedVector xp = x + std::ldexp(1.0, -j) * u;
    out.emplace_back(domain.distance(x, xp), codomain.distance(lx, L.apply(xp)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multilinear maps

/// One coefficient of a k-linear map: out_{out} += coeff * x1_{in[0]} * ... * xk_{in[k-1]}.
struct MultilinearTerm {
  std::size_t out;
  std::vector<std::size_t> in;
  double coeff;
};

/// k-linear map given by sparse coefficients on a truncation, plus a slot
/// permutation and a nesting structure. Nesting {k} is the flat map
/// L(F1,...,Fk; F); {1, k-1} is the curried L(F1, L(F2,...,Fk; F)).
class MultilinearMap {
 public:
  MultilinearMap(std::size_t arity, std::vector<MultilinearTerm> terms, std::vector<std::string> factor_spaces,
                 std::string codomain)
      : arity_(arity),
        terms_(std::make_shared<const std::vector<MultilinearTerm>>(std::move(terms))),
        factor_spaces_(std::move(factor_spaces)),
        codomain_(std::move(codomain)),
        slot_order_(arity),
        nesting_{arity} {
    if (arity == 0) throw DomainError("multilinear map needs arity >= 1");
    if (factor_spaces_.size() != arity) throw DomainError("one factor space per slot required");
    std::iota(slot_order_.begin(), slot_order_.end(), std::size_t{0});
    for (const auto& t : *terms_)
      if (t.in.size() != arity || t.out == 0 || std::find(t.in.begin(), t.in.end(), 0) != t.in.end())
        throw DomainError("malformed multilinear term");
  }

  /// Same-space convenience constructor.
  static MultilinearMap on_space(std::size_t arity, std::vector<MultilinearTerm> terms,
                                 const std::string& space = kDefaultSpace) {
    return MultilinearMap(arity, std::move(terms), std::vector<std::string>(arity, space), space);
  }

  std::size_t arity() const noexcept { return arity_; }
  const std::vector<std::size_t>& nesting() const noexcept { return nesting_; }
  const std::vector<std::size_t>& slot_order() const noexcept { return slot_order_; }
  const std::vector<MultilinearTerm>& terms() const noexcept { return *terms_; }
  const std::string& codomain() const noexcept { return codomain_; }
  /// Space of external slot i.
  const std::string& factor_space(std::size_t i) const { return factor_spaces_[slot_order_[i]]; }
  bool is_curried() const noexcept { return nesting_.size() > 1; }

  /// Flat evaluation on an external-order tuple.
  GradedVector operator()(std::span<const GradedVector> args) const {
    if (args.size() != arity_) throw DomainError("multilinear map called with wrong number of arguments");
    std::vector<const GradedVector*> internal(arity_);
    for (std::size_t i = 0; i < arity_; ++i) {
      if (args[i].space() != factor_space(i)) throw DomainError("multilinear argument space mismatch");
      internal[slot_order_[i]] = &args[i];
    }
    std::size_t top = 0;
    for (const auto& t : *terms_) top = std::max(top, t.out);
    std::vector<double> c(top, 0.0);
    for (const auto& t : *terms_) {
      double p = t.coeff;
      for (std::size_t s = 0; s < arity_; ++s) p *= internal[s]->coord(t.in[s]);
      c[t.out - 1] += p;
    }
    return GradedVector(std::move(c), codomain_);
  }

  GradedVector operator()(std::initializer_list<GradedVector> args) const {
    return (*this)(std::span<const GradedVector>(args.begin(), args.size()));
  }

  /// Fix the first external slot: returns the (k-1)-linear map B(f1, ...).
  /// Coefficients keep their order and are multiplied by f1 first, so
  /// nested evaluation performs the same floating-point operations as flat
  /// evaluation.
  MultilinearMap partial(const GradedVector& f1) const {
    if (arity_ < 2) throw DomainError("partial application needs arity >= 2");
    if (f1.space() != factor_space(0)) throw DomainError("partial argument space mismatch");
    const std::size_t fixed = slot_order_[0];
    if (fixed != 0) return canonical().partial(f1);
    std::vector<MultilinearTerm> t2;
    t2.reserve(terms_->size());
    for (const auto& t : *terms_) {
      MultilinearTerm u{t.out, std::vector<std::size_t>(t.in.begin() + 1, t.in.end()), t.coeff * f1.coord(t.in[0])};
      t2.push_back(std::move(u));
    }
    std::vector<std::string> spaces;
    for (std::size_t i = 1; i < arity_; ++i) spaces.push_back(factor_space(i));
    return MultilinearMap(arity_ - 1, std::move(t2), std::move(spaces), codomain_);
  }

  /// Nested evaluation B(f1)(f2, ..., fk) for a curried map; flat otherwise.
  GradedVector evaluate_nested(std::span<const GradedVector> args) const {
    if (!is_curried()) return (*this)(args);
    if (args.size() != arity_) throw DomainError("multilinear map called with wrong number of arguments");
    return partial(args[0])(args.subspan(1));
  }

  /// Partially applied arity-1 result as a linear map h -> B(h).
  LinearMap as_linear_map(std::string name = "multilinear") const {
    if (arity_ != 1) throw DomainError("as_linear_map needs arity 1");
    MultilinearMap self = *this;
    return LinearMap::callable(
        std::move(name), [self](const GradedVector& h) { return self({h}); }, factor_space(0), codomain_);
  }

  /// Same map with slots reordered: result(y_0..y_{k-1}) = B(y_{perm^-1}...),
  /// i.e. external slot i of the result is external slot perm[i] of *this.
  MultilinearMap permuted(const std::vector<std::size_t>& perm) const {
    if (perm.size() != arity_) throw DomainError("permutation size mismatch");
    std::vector<bool> seen(arity_, false);
    for (auto p : perm) {
      if (p >= arity_ || seen[p]) throw DomainError("not a permutation");
      seen[p] = true;
    }
    MultilinearMap out = *this;
    for (std::size_t i = 0; i < arity_; ++i) out.slot_order_[i] = slot_order_[perm[i]];
    out.nesting_ = {arity_};
    return out;
  }

 private:
  // Rewrites terms so external order equals internal order.
  MultilinearMap canonical() const {
    std::vector<MultilinearTerm> t2;
    for (const auto& t : *terms_) {
      MultilinearTerm u{t.out, std::vector<std::size_t>(arity_), t.coeff};
      for (std::size_t i = 0; i < arity_; ++i) u.in[i] = t.in[slot_order_[i]];
      t2.push_back(std::move(u));
    }
    std::vector<std::string> spaces;
    for (std::size_t i = 0; i < arity_; ++i) spaces.push_back(factor_space(i));
    MultilinearMap out(arity_, std::move(t2), std::move(spaces), codomain_);
    out.nesting_ = nesting_;
    return out;
  }

  friend MultilinearMap curry(const MultilinearMap& B);
  friend MultilinearMap uncurry(const MultilinearMap& C);

  std::size_t arity_;
  std::shared_ptr<const std::vector<MultilinearTerm>> terms_;
  std::vector<std::string> factor_spaces_;
  std::string codomain_;
  std::vector<std::size_t> slot_order_;  // external slot i -> internal slot
  std::vector<std::size_t> nesting_;
};

/// L(F1,...,Fk; F) -> L(F1, L(F2,...,Fk; F)).
inline MultilinearMap curry(const MultilinearMap& B) {
  if (B.arity_ < 2) throw DomainError("curry needs arity >= 2");
  if (B.is_curried()) throw DomainError("map is already curried");
  MultilinearMap C = B;
  C.nesting_ = {1, B.arity_ - 1};
  return C;
}

inline MultilinearMap uncurry(const MultilinearMap& C) {
  if (!C.is_curried()) throw DomainError("uncurry needs a curried map");
  MultilinearMap B = C;
  B.nesting_ = {C.arity_};
  return B;
}

/// ||B(f1..fk)||_d / prod ||fi||; evaluated through the nesting of B.
inline double multilinear_ratio(const MultilinearMap& B, std::span<const FrechetSpace> factors,
                                const FrechetSpace& codomain, std::span<const GradedVector> args) {
  double denom = 1.0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const double n = factors[i].norm(args[i]);
    if (n == 0.0) return 0.0;
    denom *= n;
  }
  return codomain.norm(B.evaluate_nested(args)) / denom;
}

inline LipNormEstimate multilinear_norm_estimate(const MultilinearMap& B, std::span<const FrechetSpace> factors,
                                                 const FrechetSpace& codomain, std::size_t probe_budget,
                                                 std::uint64_t seed, ProbeOptions opt = {}) {
  if (probe_budget == 0) throw DomainError("probe_budget must be >= 1");
  if (factors.size() != B.arity()) throw DomainError("one factor space per slot required");
  std::size_t deg = 1;
  for (const auto& t : B.terms())
    for (auto i : t.in) deg = std::max(deg, i);
  deg = std::min<std::size_t>(std::max<std::size_t>(deg, 2), opt.basis_degree);
  const auto scales = detail::scale_grid(opt);
  using Tuple = std::vector<GradedVector>;
  const std::size_t k = B.arity();

  // Same-index basis tuples (e_n, ..., e_n) at every scale, then mixed
  // index tuples at unit and small scale.
  std::vector<Tuple> structured;
  for (std::size_t n = 1; n <= deg; ++n)
    for (double s : scales) {
      Tuple t;
      for (std::size_t i = 0; i < k; ++i) t.push_back(GradedVector::basis(n, factors[i].id(), s));
      structured.push_back(std::move(t));
    }
  std::size_t combos = 1;
  for (std::size_t i = 0; i < k; ++i) combos *= deg;
  for (double s : {1.0, scales.front()})
    for (std::size_t c = 0; c < combos; ++c) {
      Tuple t;
      std::size_t code = c;
      for (std::size_t i = 0; i < k; ++i) {
        t.push_back(GradedVector::basis(1 + code % deg, factors[i].id(), s));
        code /= deg;
      }
      structured.push_back(std::move(t));
    }

  auto ratio = [&](const Tuple& t) { return multilinear_ratio(B, factors, codomain, t); };
  std::function<Tuple(Rng&)> random_probe = [&](Rng& rng) {
    Tuple t;
    for (std::size_t i = 0; i < k; ++i) t.push_back(random_vector(rng, deg, factors[i].id(), opt.min_exp, opt.max_exp));
    return t;
  };
  std::function<Tuple(Rng&, const Tuple&)> perturb = [&](Rng& rng, const Tuple& best) {
    Tuple t = best;
    const std::size_t slot = rng.index(k);
    t[slot] = detail::clamp_scale((1.0 + rng.uniform(-0.5, 0.5)) * t[slot], opt);
    return t;
  };
  LipNormEstimate est = detail::run_probes(probe_budget, seed, structured, random_probe, perturb, ratio);
  return est;
}

}  // namespace bfm
