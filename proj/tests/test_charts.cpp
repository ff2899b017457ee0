#include <gtest/gtest.h>

#include <cmath>

#include "bfm/charts.hpp"
#include "oracles.hpp"

namespace bfm {
namespace {

const Ball wide{GradedVector::zero(), 4.0};

Atlas scaling_atlas() {
  std::vector<Chart> charts{expression_chart("id", {"x1"}, 1, wide, {"x1"}),
                            expression_chart("double", {"2*x1"}, 1, {GradedVector::zero(), 8.0}, {"x1/2"})};
  return Atlas(std::move(charts), {{"id", "double", {GradedVector::zero(), 1.0}, {GradedVector::zero(), 2.0}}});
}

// x^3 + x is increasing, so its inverse is found by bisection.
double cubic_inverse(double y) {
  return oracle::bisect_increasing([](double x) { return x * x * x + x; }, y, -10.0, 10.0);
}

TEST(Transition, SameChartIsIdentity) {
  const Atlas atlas = three_chart_atlas();
  const MCMap t = transition(atlas, "cubic", "cubic");
  EXPECT_EQ(t(GradedVector{0.3}), GradedVector{0.3});
  EXPECT_EQ(t(GradedVector{-1.5}), GradedVector{-1.5});
}

TEST(Transition, ScalingCharts) {
  const Atlas atlas = scaling_atlas();
  EXPECT_EQ(transition(atlas, "double", "id")(GradedVector{0.25}), GradedVector{0.5});
  EXPECT_EQ(transition(atlas, "id", "double")(GradedVector{0.5}), GradedVector{0.25});
  EXPECT_THROW(transition(atlas, "double", "id")(GradedVector{1.5}), DomainError);
}

TEST(Transition, CubicChartAgainstBisection) {
  const Atlas atlas = three_chart_atlas();
  const MCMap fwd = transition(atlas, "cubic", "id");
  const MCMap back = transition(atlas, "id", "cubic");
  Rng rng(51);
  for (int s = 0; s < 200; ++s) {
    const double x = rng.uniform(-0.49, 0.49);
    EXPECT_NEAR(fwd(GradedVector{x}).coord(1), x * x * x + x, 1e-15);
    EXPECT_NEAR(differential_matrix(fwd, GradedVector{x}, 1)(0, 0), 3 * x * x + 1, 1e-12);
    const double y = rng.uniform(-0.62, 0.62);
    EXPECT_NEAR(back(GradedVector{y}).coord(1), cubic_inverse(y), 1e-14);
    EXPECT_NEAR(differential_matrix(back, GradedVector{y}, 1)(0, 0), 1 / (3 * cubic_inverse(y) * cubic_inverse(y) + 1),
                1e-12);
  }
}

TEST(Transition, MissingOverlapIsADomainError) {
  std::vector<Chart> charts{expression_chart("a", {"x1"}, 1, wide, {"x1"}),
                            expression_chart("b", {"x1"}, 1, wide, {"x1"})};
  const Atlas atlas(std::move(charts), {});
  EXPECT_THROW(transition(atlas, "a", "b"), DomainError);
  EXPECT_THROW(atlas.chart("c"), DomainError);
}

TEST(Chart, InverseRoundTrips) {
  const Atlas atlas = three_chart_atlas();
  for (const auto& c : atlas.charts()) EXPECT_LT(chart_roundtrip_residual(c, 200, 3), 1e-10) << c.label;
  const Chart two_d = expression_chart("shear", {"x1 + 0.3*x2^2", "x2 + 0.1*sin(x1)"}, 2, {GradedVector::zero(), 1.0});
  EXPECT_LT(chart_roundtrip_residual(two_d, 200, 4), 1e-10);
}

TEST(TangentMap, Examples) {
  const Jet1 j{"id", GradedVector{1.0}, GradedVector{3.0}};
  const Jet1 same = tangent_map(identity_map(1), j);
  EXPECT_EQ(same.x, j.x);
  EXPECT_EQ(same.v, j.v);
  const Jet1 doubled = tangent_map(expression_map("double", {"2*x1"}, 1), j);
  EXPECT_EQ(doubled.x, GradedVector{2.0});
  EXPECT_EQ(doubled.v, GradedVector{6.0});
  const MCMap& cubic = standard_catalog().at("cubic");
  EXPECT_THROW(tangent_map(cubic, {"id", GradedVector{2.5}, GradedVector{1.0}}), DomainError);
}

TEST(TangentMap, FunctorialOnCatalogPairs) {
  const MapCatalog cat = standard_catalog();
  Rng rng(52);
  for (const auto& [gn, hn] : std::vector<std::pair<std::string, std::string>>{
           {"trig_mix", "rational"}, {"log_mix", "trig_mix"}, {"rational", "square_first"}}) {
    const MCMap& g = cat.at(gn);
    const MCMap& h = cat.at(hn);
    const MCMap gh = compose_maps(g, h);
    for (int s = 0; s < 30; ++s) {
      const Jet1 j{"ref", GradedVector{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)},
                   GradedVector{rng.uniform(-1, 1), rng.uniform(-1, 1)}};
      const Jet1 direct = tangent_map(gh, j);
      const Jet1 stepwise = tangent_map(g, tangent_map(h, j));
      // Oracle: Jacobians multiplied by hand.
      const Eigen::Vector2d v(j.v.coord(1), j.v.coord(2));
      const Eigen::Vector2d expected = resized(g.jacobian(h(j.x)), 2) * (resized(h.jacobian(j.x), 2) * v);
      EXPECT_LT(sup_distance(direct.x, stepwise.x), 1e-14);
      EXPECT_LT(sup_distance(direct.v, stepwise.v), 1e-8);
      EXPECT_NEAR(direct.v.coord(1), expected[0], 1e-12);
      EXPECT_NEAR(direct.v.coord(2), expected[1], 1e-12);
    }
  }
}

TEST(TangentMap, InverseOfDiffeomorphismIsInverseTangentMap) {
  const Chart c = expression_chart("shear", {"x1 + 0.3*x2^2", "x2 + 0.1*sin(x1)"}, 2, {GradedVector::zero(), 1.0});
  Rng rng(53);
  for (int s = 0; s < 50; ++s) {
    const Jet1 j{"ref", GradedVector{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)},
                 GradedVector{rng.uniform(-1, 1), rng.uniform(-1, 1)}};
    const Jet1 back = tangent_map(c.inverse, tangent_map(c.forward, j));
    EXPECT_LT(sup_distance(back.x, j.x), 1e-12);
    EXPECT_LT(sup_distance(back.v, j.v), 1e-12);
  }
}

TEST(Jet1, ChangeOfChartIsLinearInVelocity) {
  const Atlas atlas = three_chart_atlas();
  Rng rng(54);
  for (int s = 0; s < 200; ++s) {
    const GradedVector x{rng.uniform(-0.45, 0.45)};
    const GradedVector v1{rng.uniform(-2, 2)}, v2{rng.uniform(-2, 2)};
    const double c = rng.uniform(-3, 3);
    const auto T = [&](const GradedVector& v) { return change_chart(atlas, Jet1{"id", x, v}, "cubic").v; };
    const GradedVector lhs = T(v1 + c * v2), rhs = T(v1) + c * T(v2);
    EXPECT_LE(sup_distance(lhs, rhs), 1e-12 * (1 + lhs.sup_norm()));
  }
}

TEST(Jet1, RoundTripBetweenCharts) {
  const Atlas atlas = three_chart_atlas();
  Rng rng(55);
  for (int s = 0; s < 100; ++s) {
    const Jet1 j{"cubic", GradedVector{rng.uniform(-0.6, 0.6)}, GradedVector{rng.uniform(-2, 2)}};
    const Jet1 there = change_chart(atlas, j, "quintic");
    EXPECT_EQ(there.chart, "quintic");
    const Jet1 back = change_chart(atlas, there, "cubic");
    EXPECT_LT(sup_distance(back.x, j.x), 1e-9);
    EXPECT_LT(sup_distance(back.v, j.v), 1e-9);
  }
}

TEST(Jet2, CubicTransitionExamples) {
  const MCMap theta = expression_map("theta", {"x1^3 + x1"}, 1);
  // Symbolic oracle for D theta and D2 theta.
  const expr::Expr e = expr::parse("x1^3 + x1");
  const expr::Expr d1 = expr::differentiate(e, 1), d2 = expr::differentiate(d1, 1);
  for (double x : {0.0, 1.0, -0.7}) {
    const std::vector<double> xs{x};
    const Jet2 j{"id", GradedVector{x}, GradedVector{1.0}, GradedVector::zero()};
    const Jet2 t = jet2_transition(theta, j);
    EXPECT_NEAR(t.x.coord(1), expr::eval(e, xs), 1e-8);
    EXPECT_NEAR(t.v.coord(1), expr::eval(d1, xs), 1e-8);
    EXPECT_NEAR(t.w.coord(1), expr::eval(d2, xs), 1e-8);
  }
  const Jet2 at_one = jet2_transition(theta, {"id", GradedVector{1.0}, GradedVector{1.0}, GradedVector::zero()});
  EXPECT_NEAR(at_one.x.coord(1), 2.0, 1e-8);
  EXPECT_NEAR(at_one.v.coord(1), 4.0, 1e-8);
  EXPECT_NEAR(at_one.w.coord(1), 6.0, 1e-8);
  const Jet2 at_zero = jet2_transition(theta, {"id", GradedVector::zero(), GradedVector{1.0}, GradedVector::zero()});
  EXPECT_EQ(at_zero.x, GradedVector::zero());
  EXPECT_EQ(at_zero.v, GradedVector{1.0});
  EXPECT_EQ(at_zero.w, GradedVector::zero());
}

TEST(Jet2, LinearTransitionIsFiberwiseLinear) {
  const MCMap theta = affine_map("lin", LinearMap::finite_matrix(2, {2, 1, 0, 3}), GradedVector::zero(), 2);
  const Jet2 j{"id", GradedVector{0.5, -1.0}, GradedVector{1.0, 2.0}, GradedVector{-1.0, 4.0}};
  const Jet2 t = jet2_transition(theta, j);
  EXPECT_EQ(t.v, (GradedVector{4.0, 6.0}));
  EXPECT_EQ(t.w, (GradedVector{2.0, 12.0}));
  EXPECT_LT(jet2_additivity_witness(theta, j.x, 200, 1).residual, 1e-12);
}

TEST(Jet2, AdditivityFailsForCubicTransition) {
  const MCMap theta = expression_map("theta", {"x1^3 + x1"}, 1);
  const auto w = jet2_additivity_witness(theta, GradedVector{1.0}, 100, 7);
  ASSERT_TRUE(w.found);
  EXPECT_GT(w.residual, 0.1);
  // Recompute the witness residual independently: 2 * 6x * v1 * v2 at x = 1.
  const double v1 = w.first.v.coord(1), v2 = w.second.v.coord(1);
  EXPECT_NEAR(w.residual, std::abs(12.0 * v1 * v2), 1e-8);
}

// Oracle: push a reference curve through each chart and take five-point
// derivatives of the coordinate curve at 0.
TEST(Jet2, ChartChangeMatchesCurveDerivatives) {
  const Atlas atlas = three_chart_atlas();
  Rng rng(56);
  for (int s = 0; s < 50; ++s) {
    const double a = rng.uniform(-0.3, 0.3), b = rng.uniform(-1, 1), c = rng.uniform(-1, 1);
    const auto curve = [&](double t) { return a + b * t + c * t * t; };
    for (const std::string to : {"cubic", "quintic"}) {
      const Chart& ch = atlas.chart(to);
      const auto coord = [&](double t) { return ch.forward(GradedVector{curve(t)}).coord(1); };
      const double v = oracle::five_point(coord, 0.0, 1e-3);
      const double w = oracle::five_point([&](double t) { return oracle::five_point(coord, t, 1e-3); }, 0.0, 1e-3);
      const Jet2 j{"id", GradedVector{a}, GradedVector{b}, GradedVector{2 * c}};
      const Jet2 t = change_chart(atlas, j, to);
      EXPECT_NEAR(t.x.coord(1), coord(0.0), 1e-12);
      EXPECT_NEAR(t.v.coord(1), v, 1e-8);
      EXPECT_NEAR(t.w.coord(1), w, 1e-6);
      const Jet2 back = change_chart(atlas, t, "id");
      EXPECT_LT(sup_distance(back.w, j.w), 1e-8);
    }
  }
}

TEST(Jet2, EmbeddingAndProjections) {
  const Jet2 j{"id", GradedVector{0.2}, GradedVector{1.0, 2.0}, GradedVector{3.0}};
  const auto p = embed(j);
  EXPECT_TRUE(on_second_order_locus(p));
  EXPECT_EQ(p.x, j.x);
  EXPECT_EQ(p.a, j.v);
  EXPECT_EQ(p.b, j.w);
  EXPECT_FALSE(on_second_order_locus({j.x, j.v, j.w, j.w}));
  const Jet1 j1 = pi12(j);
  EXPECT_EQ(j1.x, j.x);
  EXPECT_EQ(j1.v, j.v);
  EXPECT_EQ(pi2(j), j.x);
}

TEST(Cocycle, ThreeChartAtlasPasses) {
  const auto rep = cocycle_check(three_chart_atlas(), 100, 9);
  EXPECT_TRUE(rep.pass());
  EXPECT_EQ(rep.triples_checked, 6u);
  EXPECT_GT(rep.points_checked, 300u);
  EXPECT_LT(rep.max_residual, 1e-9);
  EXPECT_GT(rep.min_pivot, 0.5);
}

TEST(Cocycle, TrivialAtlases) {
  std::vector<Chart> one{expression_chart("only", {"x1"}, 1, wide, {"x1"})};
  const auto single = cocycle_check(Atlas(std::move(one), {}), 10, 1);
  EXPECT_TRUE(single.pass());
  EXPECT_EQ(single.points_checked, 0u);

  const Ball b1{GradedVector::zero(), 1.0}, b2{GradedVector::zero(), 2.0};
  std::vector<Chart> lin{expression_chart("a", {"x1"}, 1, wide, {"x1"}),
                         expression_chart("b", {"2*x1"}, 1, {GradedVector::zero(), 8.0}, {"x1/2"}),
                         expression_chart("c", {"4*x1"}, 1, {GradedVector::zero(), 16.0}, {"x1/4"})};
  const Atlas atlas(std::move(lin), {{"a", "b", b1, b2}, {"a", "c", b1, {GradedVector::zero(), 4.0}},
                                     {"b", "c", b2, {GradedVector::zero(), 4.0}}});
  const auto rep = cocycle_check(atlas, 50, 2);
  EXPECT_TRUE(rep.pass());
  EXPECT_EQ(rep.max_residual, 0.0);
}

TEST(Cocycle, InconsistentChartIsReported) {
  // Inverse that does not invert the forward map breaks the cocycle.
  std::vector<Chart> charts{expression_chart("a", {"x1"}, 1, wide, {"x1"}),
                            expression_chart("b", {"x1 + 0.1*x1^2"}, 1, wide, {"x1"}),
                            expression_chart("c", {"x1^3 + x1"}, 1, {GradedVector::zero(), 8.0})};
  const Ball r{GradedVector::zero(), 0.5};
  const Atlas atlas(std::move(charts), {{"a", "b", r, r}, {"a", "c", r, r}, {"b", "c", r, r}});
  const auto rep = cocycle_check(atlas, 50, 3);
  EXPECT_FALSE(rep.pass());
  EXPECT_GT(rep.max_residual, 1e-4);
}

}  // namespace
}  // namespace bfm
