#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <zofl/problems.hpp>

using namespace zofl;

namespace {

// Independent reference for min_{x in simplex} <b,x> + ||x||_inf: for a cap t
// on every coordinate the best x fills the smallest b_i up to t; scan t finely.
double scan_reference(const DenseVector& b) {
  std::vector<double> s(b.begin(), b.end());
  std::sort(s.begin(), s.end());
  const std::size_t d = s.size();
  double best = 1e300;
  const int steps = 200000;
  for (int i = 0; i <= steps; ++i) {
    const double t = 1.0 / d + (1.0 - 1.0 / d) * i / steps;
    double mass = 1.0, v = t;
    for (std::size_t k = 0; k < d && mass > 0; ++k) {
      const double w = std::min(t, mass);
      v += w * s[k];
      mass -= w;
    }
    best = std::min(best, v);
  }
  return best;
}

}  // namespace

TEST(Noise, NoneIsExact) {
  const auto p = make_simplex_test_problem(5, 3);
  ZerothOrderOracle o(p, NoiseModel::none());
  const DenseVector x(5, 0.2);
  EXPECT_EQ(o.value(x, 7), p.value(x, 7));
}

TEST(Noise, BoundedForAllKinds) {
  const auto p = make_simplex_test_problem(6, 4);
  const double D = 1e-3;
  RngStream r(1);
  const std::vector<NoiseModel> kinds{NoiseModel::uniform(D), NoiseModel::hash(D),
                                      NoiseModel::directional(D, DenseVector(6, 0.1), DenseVector(6, 0.4))};
  for (const auto& n : kinds) {
    ZerothOrderOracle o(p, n);
    for (int i = 0; i < 10000; ++i) {
      DenseVector x(6);
      for (auto& v : x) v = r.uniform();
      EXPECT_LE(std::abs(o.value(x, 0) - p.objective(x)), D * (1 + 1e-12));
    }
  }
}

TEST(Noise, UniformReachesTheLevel) {
  const auto p = make_simplex_test_problem(3, 4);
  ZerothOrderOracle o(p, NoiseModel::uniform(6e-5), std::numeric_limits<double>::infinity(), RngStream(99));
  const DenseVector x{0.2, 0.3, 0.5};
  const double f = p.objective(x);
  double worst = 0;
  for (int i = 0; i < 100000; ++i) worst = std::max(worst, std::abs(o.value(x, 0) - f));
  EXPECT_GT(worst, 5.9e-5);
  EXPECT_LE(worst, 6e-5);
}

TEST(Noise, HashIsDeterministicInX) {
  const NoiseModel n = NoiseModel::hash(1.0);
  RngStream r(0);
  const DenseVector a{0.1, 0.2}, b{0.1, 0.2000001};
  EXPECT_EQ(n(a, r), n(a, r));
  EXPECT_EQ(std::abs(n(b, r)), 1.0);
}

TEST(Noise, RejectsNegativeLevel) { EXPECT_THROW(NoiseModel::uniform(-1), config_error); }

TEST(Oracle, CountsCallsAndChecksDomain) {
  const auto p = make_simplex_test_problem(4, 1);
  ZerothOrderOracle o(p, NoiseModel::none(), 0.1);
  DenseVector x(4, 0.25);
  o.value(x, 0);
  x[0] += 0.05;
  o.value(x, 0);
  EXPECT_EQ(o.calls(), 2u);
  x[0] += 1.0;
  EXPECT_THROW(o.value(x, 0), domain_error);
  EXPECT_EQ(o.calls(), 2u);
  EXPECT_THROW(o.value(DenseVector(3, 0.3), 0), config_error);
}

TEST(SimplexProblem, KnownMinima) {
  EXPECT_NEAR(brute_force_min(make_simplex_test_problem(DenseVector{0, 0}), 0).value, 0.5, 1e-15);
  EXPECT_NEAR(brute_force_min(make_simplex_test_problem(DenseVector{0, 0, 0}), 0).value, 1.0 / 3, 1e-15);
  EXPECT_NEAR(brute_force_min(make_simplex_test_problem(DenseVector{0, 1})).value, 1.0, 1e-12);
  const MinResult r = brute_force_min(make_simplex_test_problem(DenseVector{0, 0, 1}));
  EXPECT_NEAR(r.value, 0.5, 1e-12);
}

TEST(SimplexProblem, BruteForceMatchesScan) {
  const auto p = make_simplex_test_problem(100, 2024);
  const MinResult r = brute_force_min(p, 20000);
  EXPECT_NEAR(r.value, scan_reference(*p.linear_part), 1e-4);
  double s = 0;
  for (double v : r.point) {
    EXPECT_GE(v, 0.0);
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-9);
  EXPECT_NEAR(p.objective(r.point), r.value, 1e-9);
}

TEST(SimplexProblem, Metadata) {
  const auto p = make_simplex_test_problem(DenseVector{0.5, 0.25});
  EXPECT_DOUBLE_EQ(p.M2, std::sqrt(0.3125) + 1.0);
  EXPECT_DOUBLE_EQ(*p.G, 1.5);
  const auto q = make_simplex_test_problem(50, 7), q2 = make_simplex_test_problem(50, 7);
  EXPECT_EQ(*q.linear_part, *q2.linear_part);
  for (double v : *q.linear_part) EXPECT_TRUE(v > 0.0 && v < 1.0);
}

TEST(GeneralProblem, SubgradientSearch) {
  const auto p = make_quadratic_ball_problem(5, 1.0);
  EXPECT_NEAR(brute_force_min(p).value, 0.0, 1e-12);
  auto lin = make_linear_problem(DenseVector{1.0, -2.0});
  lin.set = L2Ball{1.0};
  EXPECT_NEAR(brute_force_min(lin, 50000).value, -std::sqrt(5.0), 1e-3);
}

TEST(Game, GapExamples) {
  const auto g = make_bilinear_game(Matrix::from_rows({{0, 1}, {1, 0}}));
  EXPECT_NEAR(exact_gap(g, DenseVector{0.5, 0.5, 0.5, 0.5}), 0.0, 1e-15);
  EXPECT_NEAR(exact_gap(g, DenseVector{1, 0, 1, 0}), 1.0, 1e-15);
  EXPECT_NEAR(g.value(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}, 0), 0.5, 1e-15);
  const auto z = make_bilinear_game(Matrix::from_rows({{0, 0}, {0, 0}}));
  EXPECT_EQ(exact_gap(z, DenseVector{0.3, 0.7, 0.9, 0.1}), 0.0);
  const auto h = make_bilinear_game(Matrix::from_rows({{1, 0}, {0, 0}}));
  EXPECT_NEAR(exact_gap(h, DenseVector{0, 1, 0, 1}), 0.0, 1e-15);
  EXPECT_NEAR(h.value(std::vector<double>{0, 1}, std::vector<double>{0, 1}, 0), 0.0, 1e-15);
}

TEST(Game, GapIsNonNegative) {
  RngStream r(3);
  Matrix A(3, 4);
  for (auto& v : A.a) v = r.normal();
  const auto g = make_bilinear_game(A);
  for (int i = 0; i < 10000; ++i) {
    DenseVector z(7);
    double sx = 0, sy = 0;
    for (int k = 0; k < 3; ++k) sx += (z[k] = r.exponential());
    for (int k = 3; k < 7; ++k) sy += (z[k] = r.exponential());
    for (int k = 0; k < 3; ++k) z[k] /= sx;
    for (int k = 3; k < 7; ++k) z[k] /= sy;
    EXPECT_GE(exact_gap(g, z), -1e-12);
  }
}

TEST(Game, Constants) {
  const auto g = make_bilinear_game(Matrix::from_rows({{0, 2}, {1, 0}}));
  EXPECT_DOUBLE_EQ(g.L, 2.0);
  EXPECT_NEAR(g.L_euclidean, 2.0, 1e-9);
  const auto F = g.exact_operator(std::vector<double>{1, 0}, std::vector<double>{0, 1});
  EXPECT_EQ(F, (DenseVector{2, 0, 0, -2}));
}

TEST(Json, ProblemRoundTrip) {
  const auto p = make_simplex_test_problem(8, 11);
  const auto q = problem_from_json(json::parse(p.spec.dump()));
  EXPECT_EQ(*p.linear_part, *q.linear_part);
  const auto n = noise_from_json(noise_to_json(NoiseModel::uniform(6e-5)));
  EXPECT_EQ(n.kind, NoiseKind::Uniform);
  EXPECT_EQ(n.level, 6e-5);
  EXPECT_THROW(noise_from_json(json{{"kind", "uniform"}, {"lvl", 1}}), config_error);
  EXPECT_THROW(problem_from_json(json{{"kind", "nope"}}), config_error);
  const auto g = game_from_json(json{{"kind", "bilinear"}, {"matrix", {{0, 1}, {1, 0}}}});
  EXPECT_EQ(g.dx, 2u);
}
