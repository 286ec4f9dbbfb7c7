#pragma once

#include <cmath>
#include <cstdint>

#include "problems.hpp"
#include "rng.hpp"
#include "types.hpp"
#include "vecspace.hpp"

namespace zofl {

struct SmoothingConfig {
  Scheme scheme = Scheme::L2;
  Feedback feedback = Feedback::TwoPoint;
  double gamma = 0.0;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw config_error("smoothing radius must be positive");
  }
  // Norm whose unit sphere the random directions live on.
  Norm sphere() const { return scheme == Scheme::L1 ? Norm::L1 : Norm::L2; }
};

struct GradientSample {
  DenseVector g;
  std::uint64_t calls = 0;
};

namespace detail {

// Multiplies by sign(e) for l1 randomization, by e for l2.
inline void scale_direction(DenseVector& out, const DenseVector& e, double c, Scheme s) {
  if (s == Scheme::L1) {
    for (std::size_t i = 0; i < e.size(); ++i) out[i] = c * static_cast<double>((e[i] > 0.0) - (e[i] < 0.0));
  } else {
    for (std::size_t i = 0; i < e.size(); ++i) out[i] = c * e[i];
  }
}

}  // namespace detail

inline GradientSample two_point_grad(ZerothOrderOracle& oracle, const DenseVector& x,
                                     const SmoothingConfig& cfg, RngStream& rng) {
  cfg.validate();
  const std::size_t d = x.size();
  const DenseVector e = sample_sphere(d, cfg.sphere(), rng);
  const std::uint64_t xi = rng.next_u64();
  DenseVector xp = x, xm = x;
  xp.axpy(cfg.gamma, e);
  xm.axpy(-cfg.gamma, e);
  const double diff = oracle.value(xp, xi) - oracle.value(xm, xi);
  GradientSample s{DenseVector(d), 2};
  detail::scale_direction(s.g, e, static_cast<double>(d) * diff / (2.0 * cfg.gamma), cfg.scheme);
  return s;
}

inline GradientSample one_point_grad(ZerothOrderOracle& oracle, const DenseVector& x,
                                     const SmoothingConfig& cfg, RngStream& rng) {
  cfg.validate();
  const std::size_t d = x.size();
  const DenseVector e = sample_sphere(d, cfg.sphere(), rng);
  const std::uint64_t xi = rng.next_u64();
  DenseVector xp = x;
  xp.axpy(cfg.gamma, e);
  const double v = oracle.value(xp, xi);
  GradientSample s{DenseVector(d), 1};
  detail::scale_direction(s.g, e, static_cast<double>(d) * v / cfg.gamma, cfg.scheme);
  return s;
}

inline GradientSample estimate_grad(ZerothOrderOracle& oracle, const DenseVector& x,
                                    const SmoothingConfig& cfg, RngStream& rng) {
  return cfg.feedback == Feedback::TwoPoint ? two_point_grad(oracle, x, cfg, rng)
                                            : one_point_grad(oracle, x, cfg, rng);
}

// Mean of m independent estimates at x.
inline GradientSample batch_grad(ZerothOrderOracle& oracle, const DenseVector& x,
                                 const SmoothingConfig& cfg, std::uint64_t m, RngStream& rng) {
  if (m == 0) throw config_error("batch size must be positive");
  GradientSample acc{DenseVector(x.size()), 0};
  for (std::uint64_t i = 0; i < m; ++i) {
    GradientSample s = estimate_grad(oracle, x, cfg, rng);
    acc.g += s.g;
    acc.calls += s.calls;
  }
  acc.g /= static_cast<double>(m);
  return acc;
}

// Operator estimate (grad_x, -grad_y) for a saddle problem. Both blocks are
// perturbed together, so a two-point estimate costs two oracle calls.
inline GradientSample saddle_operator_estimate(SaddleOracle& oracle, const DenseVector& x,
                                               const DenseVector& y, const SmoothingConfig& cx,
                                               const SmoothingConfig& cy, RngStream& rng) {
  cx.validate();
  cy.validate();
  const std::size_t dx = x.size(), dy = y.size();
  const DenseVector ex = sample_sphere(dx, cx.sphere(), rng);
  const DenseVector ey = sample_sphere(dy, cy.sphere(), rng);
  const std::uint64_t xi = rng.next_u64();
  DenseVector xp = x, yp = y;
  xp.axpy(cx.gamma, ex);
  yp.axpy(cy.gamma, ey);
  double val;
  double fx, fy;
  std::uint64_t calls;
  if (cx.feedback == Feedback::TwoPoint) {
    DenseVector xm = x, ym = y;
    xm.axpy(-cx.gamma, ex);
    ym.axpy(-cy.gamma, ey);
    val = oracle.value(xp, yp, xi) - oracle.value(xm, ym, xi);
    fx = static_cast<double>(dx) / (2.0 * cx.gamma);
    fy = static_cast<double>(dy) / (2.0 * cy.gamma);
    calls = 2;
  } else {
    val = oracle.value(xp, yp, xi);
    fx = static_cast<double>(dx) / cx.gamma;
    fy = static_cast<double>(dy) / cy.gamma;
    calls = 1;
  }
  DenseVector gx(dx), gy(dy);
  detail::scale_direction(gx, ex, fx * val, cx.scheme);
  detail::scale_direction(gy, ey, -fy * val, cy.scheme);
  GradientSample s{DenseVector(dx + dy), calls};
  for (std::size_t i = 0; i < dx; ++i) s.g[i] = gx[i];
  for (std::size_t j = 0; j < dy; ++j) s.g[dx + j] = gy[j];
  return s;
}

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
  std::uint64_t n = 0;
};

namespace detail {

struct Welford {
  std::uint64_t n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double v) {
    ++n;
    const double dlt = v - mean;
    mean += dlt / static_cast<double>(n);
    m2 += dlt * (v - mean);
  }
  McEstimate result() const {
    const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n)), n};
  }
};

}  // namespace detail

// Monte Carlo value of the smoothed function f_gamma(x) = E f(x + gamma * u),
// u uniform in the unit ball of the scheme's norm.
inline McEstimate mc_smoothed_value(const StochasticProblem& p, const DenseVector& x,
                                    const SmoothingConfig& cfg, std::uint64_t n, RngStream& rng) {
  cfg.validate();
  if (n == 0) throw config_error("sample count must be positive");
  detail::Welford w;
  DenseVector z(x.size());
  for (std::uint64_t i = 0; i < n; ++i) {
    const DenseVector u = sample_ball(x.size(), cfg.sphere(), rng);
    for (std::size_t k = 0; k < x.size(); ++k) z[k] = x[k] + cfg.gamma * u[k];
    w.add(p.objective(z));
  }
  return w.result();
}

// Monte Carlo estimate of E ||g||_q^2 for the configured estimator.
inline McEstimate second_moment_estimate(ZerothOrderOracle& oracle, const DenseVector& x,
                                         const SmoothingConfig& cfg, Norm q, std::uint64_t n,
                                         RngStream& rng) {
  if (n == 0) throw config_error("sample count must be positive");
  detail::Welford w;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double v = norm(estimate_grad(oracle, x, cfg, rng).g, q);
    w.add(v * v);
  }
  return w.result();
}

}  // namespace zofl
