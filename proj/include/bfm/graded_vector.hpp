#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bfm/error.hpp"

namespace bfm {

inline const std::string kDefaultSpace = "F";

/// Finitely supported element of a graded sequence space. Coordinates are
/// 1-based; every index above degree() is zero. Trailing zeros are dropped
/// on construction so degree() is minimal.
class GradedVector {
 public:
  GradedVector() : space_(kDefaultSpace) {}

  explicit GradedVector(std::vector<double> coords, std::string space = kDefaultSpace)
      : coords_(std::move(coords)), space_(std::move(space)) {
    normalize();
  }

  GradedVector(std::initializer_list<double> coords, std::string space = kDefaultSpace)
      : GradedVector(std::vector<double>(coords), std::move(space)) {}

  static GradedVector zero(std::string space = kDefaultSpace) { return GradedVector({}, std::move(space)); }

  /// scale * e_n
  static GradedVector basis(std::size_t n, std::string space = kDefaultSpace, double scale = 1.0) {
    if (n == 0) throw DomainError("basis index is 1-based");
    std::vector<double> c(n, 0.0);
    c[n - 1] = scale;
    return GradedVector(std::move(c), std::move(space));
  }

  std::size_t degree() const noexcept { return coords_.size(); }
  bool is_zero() const noexcept { return coords_.empty(); }
  const std::string& space() const noexcept { return space_; }
  std::span<const double> coords() const noexcept { return coords_; }

  /// 1-based coordinate access; zero beyond degree().
  double coord(std::size_t n) const noexcept { return (n >= 1 && n <= coords_.size()) ? coords_[n - 1] : 0.0; }

  /// Coordinates 1..n as a dense vector (zero padded or truncated).
  std::vector<double> dense(std::size_t n) const {
    std::vector<double> out(n, 0.0);
    std::copy_n(coords_.begin(), std::min(n, coords_.size()), out.begin());
    return out;
  }

  GradedVector truncated(std::size_t n) const { return GradedVector(dense(n), space_); }

  GradedVector in_space(std::string space) const { return GradedVector(coords_, std::move(space)); }

  /// max_i |x_i| over stored coordinates.
  double sup_norm() const noexcept {
    double m = 0.0;
    for (double c : coords_) m = std::max(m, std::abs(c));
    return m;
  }

  friend bool operator==(const GradedVector& a, const GradedVector& b) {
    return a.space_ == b.space_ && a.coords_ == b.coords_;
  }

  friend GradedVector operator+(const GradedVector& a, const GradedVector& b) {
    a.require_same_space(b);
    std::vector<double> c(std::max(a.degree(), b.degree()), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a.coord(i + 1) + b.coord(i + 1);
    return GradedVector(std::move(c), a.space_);
  }

  friend GradedVector operator-(const GradedVector& a, const GradedVector& b) {
    a.require_same_space(b);
    std::vector<double> c(std::max(a.degree(), b.degree()), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a.coord(i + 1) - b.coord(i + 1);
    return GradedVector(std::move(c), a.space_);
  }

  friend GradedVector operator*(double s, const GradedVector& a) {
    std::vector<double> c(a.coords_);
    for (double& x : c) x *= s;
    return GradedVector(std::move(c), a.space_);
  }

  friend GradedVector operator-(const GradedVector& a) { return -1.0 * a; }

  GradedVector& operator+=(const GradedVector& b) { return *this = *this + b; }
  GradedVector& operator-=(const GradedVector& b) { return *this = *this - b; }

  void require_same_space(const GradedVector& other) const {
    if (space_ != other.space_) throw DomainError("space mismatch: '" + space_ + "' vs '" + other.space_ + "'");
  }

 private:
  void normalize() {
    while (!coords_.empty() && coords_.back() == 0.0) coords_.pop_back();
    // -0.0 compares equal to 0.0 above; canonicalize the survivors too.
    for (double& c : coords_)
      if (c == 0.0) c = 0.0;
  }

  std::vector<double> coords_;
  std::string space_;
};

/// Sup-norm distance on stored coordinates.
inline double sup_distance(const GradedVector& a, const GradedVector& b) { return (a - b).sup_norm(); }

}  // namespace bfm
