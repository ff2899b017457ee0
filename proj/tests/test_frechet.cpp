#include <gtest/gtest.h>

#include <cmath>

#include "bfm/frechet.hpp"
#include "oracles.hpp"

namespace bfm {
namespace {

std::vector<double> raw(const GradedVector& v) { return {v.coords().begin(), v.coords().end()}; }

const auto half_pow = [](std::size_t n) { return std::pow(0.5, static_cast<double>(n)); };

TEST(GradedVector, TrailingZerosAreDropped) {
  GradedVector v{1.0, 0.0, 2.0, 0.0, 0.0};
  EXPECT_EQ(v.degree(), 3u);
  EXPECT_EQ(v.coord(7), 0.0);
  EXPECT_TRUE(GradedVector({0.0, 0.0}).is_zero());
  EXPECT_EQ(GradedVector({1.0}) - GradedVector({1.0}), GradedVector::zero());
}

TEST(GradedVector, MixedSpacesAreRejected) {
  GradedVector a({1.0}, "E"), b({1.0}, "F");
  EXPECT_THROW(a + b, DomainError);
  EXPECT_EQ((2.0 * a).space(), "E");
}

TEST(Seminorm, PrefixSupExamples) {
  const auto F = FrechetSpace::standard();
  EXPECT_EQ(seminorm_eval(F, 3, GradedVector{1.0, -2.0, 0.0}), 2.0);
  EXPECT_EQ(seminorm_eval(F, 1, GradedVector{0.0, 3.0}), 0.0);
  EXPECT_EQ(seminorm_eval(F, 5, GradedVector{0.0, 3.0}), 3.0);
}

TEST(Seminorm, SpaceMismatchIsADomainError) {
  const auto F = FrechetSpace::standard("F");
  EXPECT_THROW(seminorm_eval(F, 1, GradedVector({1.0}, "E")), DomainError);
  EXPECT_THROW(metric_distance(F, GradedVector({1.0}, "E"), GradedVector({1.0}, "E")), DomainError);
}

TEST(Seminorm, FamilyPropertiesOnSamples) {
  Rng rng(11);
  const FrechetSpace spaces[] = {FrechetSpace::standard(),
                                 FrechetSpace("F", SeminormFamily::weighted_prefix_sup(WeightRule::power(1.5)),
                                              AlphaSequence::geometric(1.0, 0.5))};
  for (const auto& F : spaces) {
    for (int s = 0; s < 500; ++s) {
      const GradedVector u = random_vector(rng, 10, "F"), v = random_vector(rng, 10, "F");
      const double c = rng.uniform(-3, 3);
      for (std::size_t n = 1; n <= 12; ++n) {
        EXPECT_EQ(F.seminorm(n, GradedVector::zero()), 0.0);
        EXPECT_NEAR(F.seminorm(n, c * v), std::abs(c) * F.seminorm(n, v), 1e-12 * (1 + F.seminorm(n, v)));
        EXPECT_LE(F.seminorm(n, u + v), F.seminorm(n, u) + F.seminorm(n, v) + 1e-12);
        EXPECT_LE(F.seminorm(n, v), F.seminorm(n + 1, v));
        if (n >= v.degree()) {
          EXPECT_EQ(F.seminorm(n, v), F.seminorm(v.degree(), v));
        }
      }
    }
  }
}

TEST(AlphaSequence, RulesAreValidatedOnce) {
  EXPECT_THROW(AlphaSequence::geometric(1.0, 1.0), DomainError);
  EXPECT_THROW(AlphaSequence::geometric(-1.0, 0.5), DomainError);
  EXPECT_THROW(AlphaSequence::power(1.0, 0.0), DomainError);
  const auto a = AlphaSequence::power(2.0, 1.0);
  EXPECT_DOUBLE_EQ(a(4), 0.5);
  EXPECT_GT(a(1), a(2));
}

// Expected values from term enumeration over n <= 10.
TEST(Metric, DistanceExamples) {
  const auto F = FrechetSpace::standard();
  const GradedVector e1{1.0}, e2{0.0, 3.0};
  EXPECT_DOUBLE_EQ(oracle::standard_norm(raw(e1), half_pow, 10), 0.25);
  EXPECT_DOUBLE_EQ(oracle::standard_norm(raw(e2), half_pow, 10), 0.1875);
  EXPECT_EQ(metric_distance(F, e1, GradedVector::zero()), 0.25);
  EXPECT_EQ(metric_distance(F, e2, GradedVector::zero()), 0.1875);
  EXPECT_EQ(metric_distance(F, e2, e2), 0.0);
  EXPECT_EQ(metric_norm(F, GradedVector::zero()), 0.0);
  EXPECT_EQ(metric_norm(F, e1), 0.25);
}

TEST(Metric, MatchesTermEnumerationExactly) {
  Rng rng(5);
  const auto F = FrechetSpace::standard();
  const auto W = FrechetSpace("F", SeminormFamily::weighted_prefix_sup(WeightRule::geometric(1.3)),
                              AlphaSequence::geometric(1.0, 0.5));
  const auto w = [](std::size_t i) { return std::pow(1.3, static_cast<double>(i)); };
  for (int s = 0; s < 1000; ++s) {
    const GradedVector e = random_vector(rng, 12, "F", -8, 8), f = random_vector(rng, 12, "F", -8, 8);
    EXPECT_EQ(metric_distance(F, e, f), oracle::standard_norm(raw(e - f), half_pow));
    EXPECT_EQ(metric_distance(W, e, f), oracle::standard_norm(raw(e - f), half_pow, 64, w));
  }
}

TEST(Metric, AxiomsOnSamples) {
  Rng rng(99);
  const auto F = FrechetSpace::standard();
  for (int s = 0; s < 2000; ++s) {
    const GradedVector e = random_vector(rng, 8, "F"), f = random_vector(rng, 8, "F"), g = random_vector(rng, 8, "F"),
                       h = random_vector(rng, 8, "F");
    EXPECT_EQ(F.distance(e, e), 0.0);
    EXPECT_GT(F.distance(e, f), 0.0);
    EXPECT_EQ(F.distance(e, f), F.distance(f, e));
    EXPECT_LE(F.distance(e, g), F.distance(e, f) + F.distance(f, g) + 1e-12);
    EXPECT_NEAR(F.distance(e + h, f + h), F.distance(e, f), 1e-12);
    EXPECT_LE(F.norm(e), F.alphas()(1));
    const double c = rng.uniform(-1, 1);
    EXPECT_LE(F.norm(c * e), F.norm(e) + 1e-12);
  }
}

TEST(AbsoluteConvexity, NoViolationsOnStandardSpaces) {
  const auto F = FrechetSpace::standard();
  for (double radius : {0.01, 0.1, 0.3}) {
    const auto rep = check_absolutely_convex(F, radius, 2000, 3);
    EXPECT_EQ(rep.samples, 2000u);
    EXPECT_EQ(rep.violations, 0u) << "radius " << radius << " margin " << rep.worst_margin;
  }
  const auto P = FrechetSpace("F", SeminormFamily::weighted_prefix_sup(WeightRule::power(2.0)),
                              AlphaSequence::power(1.0, 2.0));
  EXPECT_EQ(check_absolutely_convex(P, 0.05, 2000, 4).violations, 0u);
}

TEST(AbsoluteConvexity, DegenerateScalarsNeverViolate) {
  const auto F = FrechetSpace::standard();
  Rng rng(8);
  for (int s = 0; s < 200; ++s) {
    const GradedVector e = shrink_into_ball(F, random_vector(rng, 6, "F"), 0.1);
    EXPECT_LE(F.norm(1.0 * e + 0.0 * e), 0.1);
    EXPECT_EQ(F.norm(0.0 * e), 0.0);
  }
  EXPECT_THROW(check_absolutely_convex(F, 0.0, 10, 1), DomainError);
}

TEST(AbsoluteConvexity, ReportIsDeterministic) {
  const auto F = FrechetSpace::standard();
  const auto a = check_absolutely_convex(F, 0.2, 300, 42);
  const auto b = check_absolutely_convex(F, 0.2, 300, 42);
  EXPECT_EQ(a.worst_margin, b.worst_margin);
}

}  // namespace
}  // namespace bfm
