#pragma once

// Monte Carlo checks of the sampling, smoothing and estimator properties.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "estimators.hpp"
#include "planner.hpp"
#include "problems.hpp"
#include "vecspace.hpp"

namespace zofl {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string detail;
};

inline void print_check(std::ostream& os, const CheckResult& c) {
  os << (c.passed ? "PASS " : "FAIL ") << c.name << "  measured=" << c.measured << " bound=" << c.bound;
  if (!c.detail.empty()) os << "  (" << c.detail << ")";
  os << '\n';
}

// A random point of the simplex (normalized exponentials).
inline DenseVector random_simplex_point(std::size_t d, RngStream& rng) {
  DenseVector x(d);
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += (x[i] = rng.exponential());
  x /= s;
  return x;
}

inline std::vector<CheckResult> check_sphere_norms(std::uint64_t n, std::uint64_t seed = 11) {
  std::vector<CheckResult> out;
  for (Norm p : {Norm::L1, Norm::L2}) {
    RngStream rng(seed, {0, static_cast<std::uint64_t>(p)});
    double worst = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(norm(sample_sphere(10, p, rng), p) - 1.0));
    out.push_back({std::string("sphere norm ") + (p == Norm::L1 ? "l1" : "l2"), worst <= 1e-12, worst, 1e-12, "d=10"});
  }
  return out;
}

// E[e e^T] = I/d on the l2 sphere, d = 5.
inline CheckResult check_sphere_isotropy(std::uint64_t n, std::uint64_t seed = 12) {
  const std::size_t d = 5;
  RngStream rng(seed);
  std::vector<detail::Welford> w(d * d);
  for (std::uint64_t k = 0; k < n; ++k) {
    const DenseVector e = sample_sphere(d, Norm::L2, rng);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) w[i * d + j].add(e[i] * e[j]);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const McEstimate m = w[i * d + j].result();
      const double target = i == j ? 1.0 / d : 0.0;
      worst = std::max(worst, std::abs(m.mean - target) / std::max(m.se, 1e-300));
    }
  return {"sphere isotropy l2", worst <= 4.0, worst, 4.0, "max |C - I/d| in SE units, d=5"};
}

// P(||u|| <= 1/2) = 2^-d for u uniform in the unit ball, d = 3.
inline std::vector<CheckResult> check_ball_radial(std::uint64_t n, std::uint64_t seed = 13) {
  std::vector<CheckResult> out;
  const std::size_t d = 3;
  const double target = 0.125;
  for (Norm p : {Norm::L1, Norm::L2}) {
    RngStream rng(seed, {0, static_cast<std::uint64_t>(p)});
    std::uint64_t hit = 0;
    for (std::uint64_t i = 0; i < n; ++i) hit += norm(sample_ball(d, p, rng), p) <= 0.5;
    const double f = static_cast<double>(hit) / static_cast<double>(n);
    const double se = std::sqrt(target * (1 - target) / static_cast<double>(n));
    out.push_back({std::string("ball radial cdf ") + (p == Norm::L1 ? "l1" : "l2"), std::abs(f - target) <= 3 * se,
                   f, target, "3 SE = " + std::to_string(3 * se)});
  }
  return out;
}

// Mean of n estimates of grad <c, x> at x = 0 is within 3 SE of c (l2 norm).
inline std::vector<CheckResult> check_unbiasedness(std::uint64_t n, std::size_t d = 50, std::uint64_t seed = 14) {
  std::vector<CheckResult> out;
  RngStream crng(seed, {0, 0, stream_tag::setup});
  DenseVector c(d);
  for (std::size_t i = 0; i < d; ++i) c[i] = crng.normal();
  const StochasticProblem prob = make_linear_problem(c);
  const DenseVector x(d, 0.0);
  for (Feedback fb : {Feedback::TwoPoint, Feedback::OnePoint}) {
    for (Scheme sc : {Scheme::L1, Scheme::L2}) {
      ZerothOrderOracle oracle(prob, NoiseModel::none());
      RngStream rng(seed, {1, static_cast<std::uint64_t>(sc), static_cast<std::uint64_t>(fb)});
      const SmoothingConfig cfg{sc, fb, 0.1};
      std::vector<detail::Welford> w(d);
      for (std::uint64_t k = 0; k < n; ++k) {
        const DenseVector g = estimate_grad(oracle, x, cfg, rng).g;
        for (std::size_t i = 0; i < d; ++i) w[i].add(g[i]);
      }
      double dev2 = 0.0, se2 = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const McEstimate m = w[i].result();
        dev2 += (m.mean - c[i]) * (m.mean - c[i]);
        se2 += m.se * m.se;
      }
      const double dev = std::sqrt(dev2), se = std::sqrt(se2);
      out.push_back({"unbiased " + to_string(sc) + " " + to_string(fb), dev <= 3 * se, dev, 3 * se,
                     "||mean - c||_2 vs 3 SE, d=" + std::to_string(d)});
    }
  }
  return out;
}

// f <= f_gamma <= f + gamma*M2 (l2) or f + (2/sqrt(d)) gamma*M2 (l1) on the
// simplex test problem at random simplex points.
inline std::vector<CheckResult> check_sandwich(std::uint64_t n, std::size_t points = 20, std::size_t d = 100,
                                               double eps = 0.1, std::uint64_t seed = 15) {
  std::vector<CheckResult> out;
  const StochasticProblem prob = make_simplex_test_problem(d, seed);
  ProblemConstants c;
  c.d = static_cast<double>(d);
  c.M = prob.M;
  c.M2 = prob.M2;
  c.R = std::sqrt(2.0);
  c.eps = eps;
  for (Scheme sc : {Scheme::L1, Scheme::L2}) {
    const double gamma = smoothing_gamma(c, sc);
    const double slack = sc == Scheme::L2 ? gamma * prob.M2 : 2.0 / std::sqrt(c.d) * gamma * prob.M2;
    RngStream prng(seed, {2, static_cast<std::uint64_t>(sc), stream_tag::setup});
    std::size_t ok = 0;
    double worst = -1e300;
    for (std::size_t k = 0; k < points; ++k) {
      const DenseVector x = random_simplex_point(d, prng);
      RngStream rng(seed, {3 + k, static_cast<std::uint64_t>(sc)});
      const McEstimate m = mc_smoothed_value(prob, x, {sc, Feedback::TwoPoint, gamma}, n, rng);
      const double f = prob.objective(x);
      const double tol = 3 * m.se + 1e-12;
      const bool pass = m.mean >= f - tol && m.mean <= f + slack + tol;
      ok += pass;
      worst = std::max(worst, std::max(f - m.mean, m.mean - f - slack) / std::max(m.se, 1e-300));
    }
    out.push_back({"smoothing sandwich " + to_string(sc), ok == points, static_cast<double>(ok),
                   static_cast<double>(points), "points passing; worst excess " + std::to_string(worst) + " SE"});
  }
  return out;
}

// Measured E||g||_q^2 against the planner bound. p = 1 for l1 randomization,
// p = 2 for l2; the weakest of the available bound forms is used.
inline std::vector<CheckResult> check_second_moments(std::uint64_t n, double eps = 0.1, std::uint64_t seed = 16) {
  std::vector<CheckResult> out;
  for (std::size_t d : {std::size_t{10}, std::size_t{100}}) {
    const StochasticProblem prob = make_simplex_test_problem(d, seed + d);
    RngStream prng(seed, {4, d, stream_tag::setup});
    const DenseVector x = random_simplex_point(d, prng);
    ProblemConstants c;
    c.d = static_cast<double>(d);
    c.M = prob.M;
    c.M2 = prob.M2;
    c.G = prob.G;
    c.R = std::sqrt(2.0);
    c.eps = eps;
    for (Scheme sc : {Scheme::L1, Scheme::L2}) {
      for (Feedback fb : {Feedback::TwoPoint, Feedback::OnePoint}) {
        const int p = sc == Scheme::L1 ? 1 : 2;
        const Norm q = p == 1 ? Norm::Linf : Norm::L2;
        const double gamma = smoothing_gamma(c, sc);
        const double dmax = max_noise(c, Algorithm::MbASGD, sc, fb);
        for (double delta : {0.0, 0.5 * dmax}) {
          ZerothOrderOracle oracle(prob, NoiseModel::hash(delta));
          RngStream rng(seed, {5 + d, static_cast<std::uint64_t>(sc) * 2 + static_cast<std::uint64_t>(fb),
                               delta > 0.0});
          const McEstimate m = second_moment_estimate(oracle, x, {sc, fb, gamma}, q, n, rng);
          const double bound =
              second_moment_bound(p, c.d, sc, fb, c.M2, c.G, gamma, delta).weakest();
          char buf[160];
          std::snprintf(buf, sizeof buf, "d=%zu p=%d delta=%.3g ratio=%.3f", d, p, delta, m.mean / bound);
          out.push_back({"second moment " + to_string(sc) + " " + to_string(fb), m.mean - 3 * m.se <= bound,
                         m.mean, bound, buf});
        }
      }
    }
  }
  return out;
}

// Slope of the estimator bias along a unit direction r against delta, under the
// adversary delta(z) = delta * sign(<z - x, r>). Expected scale d/gamma (l1) and
// sqrt(d)/gamma (l2); the check accepts a factor of 3 either way.
inline std::vector<CheckResult> check_noise_bias(std::uint64_t n, std::size_t d = 100, double gamma = 0.05,
                                                 std::uint64_t seed = 17) {
  std::vector<CheckResult> out;
  const std::vector<double> deltas{0.0, 1e-5, 3e-5, 1e-4, 3e-4, 1e-3};
  DenseVector c(d, 1.0 / std::sqrt(static_cast<double>(d)));
  const StochasticProblem prob = make_linear_problem(c);
  const DenseVector x(d, 0.0);
  for (Scheme sc : {Scheme::L1, Scheme::L2}) {
    const double ref = sc == Scheme::L1 ? d / gamma : std::sqrt(static_cast<double>(d)) / gamma;
    for (int dir = 0; dir < 2; ++dir) {
      DenseVector r(d, 0.0);
      if (dir == 0) r[0] = 1.0;
      else r = DenseVector(d, 1.0 / std::sqrt(static_cast<double>(d)));
      std::vector<double> bias;
      for (double delta : deltas) {
        ZerothOrderOracle oracle(prob, NoiseModel::directional(delta, x, r));
        RngStream rng(seed, {6, static_cast<std::uint64_t>(sc), static_cast<std::uint64_t>(dir)});
        const GradientSample s = batch_grad(oracle, x, {sc, Feedback::TwoPoint, gamma}, n, rng);
        DenseVector dev = s.g;
        dev -= c;
        bias.push_back(std::abs(dev.dot(r)));
      }
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < deltas.size(); ++i) {
        mx += deltas[i];
        my += bias[i];
      }
      mx /= deltas.size();
      my /= deltas.size();
      double sxy = 0, sxx = 0;
      for (std::size_t i = 0; i < deltas.size(); ++i) {
        sxy += (deltas[i] - mx) * (bias[i] - my);
        sxx += (deltas[i] - mx) * (deltas[i] - mx);
      }
      const double slope = sxy / sxx;
      const double ratio = slope / ref;
      out.push_back({"noise bias slope " + to_string(sc) + (dir == 0 ? " e1" : " diag"),
                     ratio >= 1.0 / 3.0 && ratio <= 3.0, slope, ref,
                     "ratio " + std::to_string(ratio) + ", gamma=" + std::to_string(gamma)});
    }
  }
  return out;
}

enum class ValidateDepth { Quick, Full };

inline std::uint64_t samples_for(ValidateDepth d) { return d == ValidateDepth::Quick ? 10000 : 100000; }

inline std::vector<CheckResult> run_validation(ValidateDepth depth) {
  const std::uint64_t n = samples_for(depth);
  std::vector<CheckResult> all;
  auto add = [&](std::vector<CheckResult> v) { all.insert(all.end(), v.begin(), v.end()); };
  add(check_sphere_norms(std::min<std::uint64_t>(n, 10000)));
  all.push_back(check_sphere_isotropy(n));
  add(check_ball_radial(n));
  add(check_unbiasedness(n));
  add(check_sandwich(n));
  add(check_second_moments(n));
  add(check_noise_bias(n));
  return all;
}

}  // namespace zofl
