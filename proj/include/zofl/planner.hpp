#pragma once

// Closed-form parameter plans for the zeroth-order federated algorithms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "types.hpp"

namespace zofl {

struct ProblemConstants {
  double d = 0.0;
  double M = 0.0;
  double M2 = 0.0;
  std::optional<double> G;
  double R = 0.0;
  double eps = 0.0;

  void validate() const {
    auto pos = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw config_error(std::string(name) + " must be positive and finite");
    };
    pos(d, "d");
    pos(M, "M");
    pos(M2, "M2");
    pos(R, "R");
    pos(eps, "eps");
    if (G) pos(*G, "G");
    if (d < 2) throw config_error("d must be at least 2");
  }

  double require_G() const {
    if (!G) throw config_error("G is required for one-point feedback");
    return *G;
  }

  bool degenerate() const { return eps >= M2 * R; }
};

namespace detail {

inline double q_or_log(int p, double d) {
  // min{q, ln d}, q the conjugate exponent (q = inf for p = 1)
  if (p == 1) return std::log(d);
  if (p == 2) return std::min(2.0, std::log(d));
  throw unsupported_error("p must be 1 or 2");
}

inline void check_p(int p) {
  if (p != 1 && p != 2) throw unsupported_error("p must be 1 or 2");
}

// Ceiling that ignores rounding noise just above an integer.
inline std::uint64_t ceil_count(double v) {
  if (!std::isfinite(v)) throw config_error("plan formula produced a non-finite count");
  if (v >= 9.0e18) throw config_error("plan count overflows");
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(v - 8 * std::numeric_limits<double>::epsilon() * std::abs(v))));
}

}  // namespace detail

// Second-moment constant kappa(p, d).
inline double kappa(int p, double d, Scheme scheme, Feedback feedback) {
  detail::check_p(p);
  if (d < 2) throw config_error("d must be at least 2");
  const double e = 2.0 - 2.0 / p;
  const double c1 = 48.0 * (1.0 + std::sqrt(2.0)) * (1.0 + std::sqrt(2.0));
  if (feedback == Feedback::TwoPoint) {
    if (scheme == Scheme::L1) return c1 * std::pow(d, e);
    return std::sqrt(2.0) * detail::q_or_log(p, d) * std::pow(d, e);
  }
  if (scheme == Scheme::L1) return std::pow(d, 4.0 - 2.0 / p);
  return detail::q_or_log(p, d) * std::pow(d, 3.0 - 2.0 / p);
}

// Variant of the l2 two-point constant carried through the longer derivation,
// sqrt(2) min{q, ln d} d^(2/q - 1), which multiplies d*M2^2 instead of M2^2.
inline double kappa_l2_long_form(int p, double d) {
  detail::check_p(p);
  const double two_over_q = p == 1 ? 0.0 : 1.0;
  return std::sqrt(2.0) * detail::q_or_log(p, d) * std::pow(d, two_over_q - 1.0);
}

inline double smoothing_gamma(const ProblemConstants& c, Scheme scheme) {
  if (!(c.eps > 0.0) || !(c.M2 > 0.0)) throw config_error("eps and M2 must be positive");
  if (scheme == Scheme::L1) return std::sqrt(c.d) * c.eps / (4.0 * c.M2);
  return c.eps / (2.0 * c.M2);
}

// Lipschitz constant of the smoothed gradient at the planned radius.
inline double grad_lipschitz(const ProblemConstants& c, Scheme scheme) {
  const double g = smoothing_gamma(c, scheme);
  if (scheme == Scheme::L1) return c.d * c.M / (2.0 * g);
  return std::sqrt(c.d) * c.M / g;
}

inline double sigma_sq_bound(const ProblemConstants& c, Scheme scheme, Feedback feedback, int p) {
  detail::check_p(p);
  const double d = c.d;
  if (feedback == Feedback::TwoPoint) {
    if (scheme == Scheme::L1) return kappa(p, d, scheme, feedback) * c.M2 * c.M2;
    return 2.0 * std::sqrt(2.0) * detail::q_or_log(p, d) * std::pow(d, 2.0 - 2.0 / p) * c.M2 * c.M2;
  }
  const double G = c.require_G();
  const double tail = G * G * c.M2 * c.M2 / (c.eps * c.eps);
  if (scheme == Scheme::L1) return 32.0 * std::pow(d, 3.0 - 2.0 / p) * tail;
  return 8.0 * detail::q_or_log(p, d) * std::pow(d, 3.0 - 2.0 / p) * tail;
}

// Largest tolerable noise level eps^2 / (c sqrt(d) M2 R).
inline double max_noise(const ProblemConstants& c, Algorithm alg, Scheme scheme, Feedback feedback) {
  double k;
  if (feedback == Feedback::TwoPoint && scheme == Scheme::L1) {
    k = 24.0;
  } else if (is_smp(alg)) {
    k = 8.0;
  } else if (alg == Algorithm::FedAc) {
    k = 16.0;
  } else {
    k = 12.0;
  }
  return c.eps * c.eps / (k * std::sqrt(c.d) * c.M2 * c.R);
}

// Candidate forms of the second-moment bound E||g||_q^2 at smoothing radius
// gamma and noise level delta. `strongest` is their minimum, `weakest` the max.
struct SecondMomentBound {
  std::vector<double> forms;
  double weakest() const { return *std::max_element(forms.begin(), forms.end()); }
  double strongest() const { return *std::min_element(forms.begin(), forms.end()); }
};

inline SecondMomentBound second_moment_bound(int p, double d, Scheme scheme, Feedback feedback,
                                             double M2, std::optional<double> G, double gamma,
                                             double delta) {
  const double k = kappa(p, d, scheme, feedback);
  SecondMomentBound b;
  if (feedback == Feedback::TwoPoint) {
    const double c = scheme == Scheme::L1 ? 12.0 * (1.0 + std::sqrt(2.0)) * (1.0 + std::sqrt(2.0))
                                          : std::sqrt(2.0);
    const double noise = d * d * delta * delta / (c * gamma * gamma);
    b.forms.push_back(k * (M2 * M2 + noise));
    b.forms.push_back(2.0 * k * M2 * M2 + (delta > 0.0 ? 2.0 * k * noise : 0.0));
    if (scheme == Scheme::L2) {
      const double kl = kappa_l2_long_form(p, d);
      b.forms.push_back(kl * (d * M2 * M2 + d * d * delta * delta / (std::sqrt(2.0) * gamma * gamma)));
    }
  } else {
    if (!G) throw config_error("G is required for one-point feedback");
    b.forms.push_back(k * (*G * *G + delta * delta) / (gamma * gamma));
    b.forms.push_back(2.0 * k * (*G * *G + delta * delta) / (gamma * gamma));
  }
  return b;
}

struct FedPlan {
  Algorithm algorithm = Algorithm::MbASGD;
  Scheme scheme = Scheme::L2;
  Feedback feedback = Feedback::TwoPoint;
  int p = 1;
  double kappa = 0.0;
  double gamma = 0.0;
  double L = 0.0;
  double sigma_sq = 0.0;
  double delta_max = 0.0;
  std::uint64_t N = 1, K = 1, B = 1, T = 1;
  bool implemented = true;
  std::vector<std::string> notes;
  nlohmann::json extra = nlohmann::json::object();
};

inline FedPlan plan(Algorithm alg, const ProblemConstants& c, Scheme scheme, Feedback feedback, int p = 1) {
  c.validate();
  detail::check_p(p);
  if (feedback == Feedback::OnePoint) c.require_G();

  FedPlan pl;
  pl.algorithm = alg;
  pl.scheme = scheme;
  pl.feedback = feedback;
  pl.p = p;
  pl.kappa = kappa(p, c.d, scheme, feedback);
  pl.gamma = smoothing_gamma(c, scheme);
  pl.L = grad_lipschitz(c, scheme);
  pl.sigma_sq = sigma_sq_bound(c, scheme, feedback, p);
  pl.delta_max = max_noise(c, alg, scheme, feedback);

  const bool two = feedback == Feedback::TwoPoint;
  const double k = pl.kappa;
  // Work unit: kappa M2^2 R^2 / eps^2, times G^2 / eps^2 for one-point feedback.
  double W = k * c.M2 * c.M2 * c.R * c.R / (c.eps * c.eps);
  if (!two) W *= c.require_G() * c.require_G() / (c.eps * c.eps);
  const double c_sgd = two ? 1152.0 : 2304.0;
  const double c_smp = two ? 1568.0 : 3136.0;
  const double n_coef = (two && scheme == Scheme::L1) ? 4.0 * std::sqrt(6.0) : 4.0 * std::sqrt(3.0);
  const double rounds = n_coef * std::pow(c.d, 0.25) * std::sqrt(c.M * c.M2) * c.R / c.eps;

  switch (alg) {
    case Algorithm::MbASGD:
      pl.N = detail::ceil_count(rounds);
      pl.K = 1;
      pl.B = detail::ceil_count(c_sgd * W / static_cast<double>(pl.K * pl.N));
      if (two && scheme == Scheme::L2) {
        pl.extra["B_with_extra_d_factor"] =
            detail::ceil_count(c_sgd * W * c.d / static_cast<double>(pl.K * pl.N));
      }
      break;
    case Algorithm::SmASGD:
      pl.N = 1;
      pl.K = detail::ceil_count(c_sgd * W);
      pl.B = 1;
      break;
    case Algorithm::LocalACSA:
      pl.N = 1;
      pl.K = detail::ceil_count(rounds);
      pl.B = detail::ceil_count(c_sgd * W / static_cast<double>(pl.K * pl.N));
      pl.implemented = false;
      break;
    case Algorithm::FedAc: {
      const double g = pl.gamma;
      const double L = scheme == Scheme::L1 ? c.d * c.M / g : std::sqrt(c.d) * c.M / g;
      double s2 = two ? 2.0 * k * c.M2 * c.M2 : 4.0 * k * c.M2 * c.M2 * c.require_G() * c.require_G() / (c.eps * c.eps);
      pl.B = 1;
      pl.N = detail::ceil_count(std::max(std::sqrt(8.0 * L * c.R * c.R / c.eps), L * c.eps / (8.0 * s2)));
      pl.K = detail::ceil_count(64.0 * s2 * c.R * c.R / (static_cast<double>(pl.B * pl.N) * c.eps * c.eps));
      pl.implemented = false;
      pl.extra["fedac_L"] = L;
      pl.extra["fedac_sigma_sq"] = s2;
      break;
    }
    case Algorithm::MbSMP:
      pl.N = 1;
      pl.K = 1;
      pl.B = detail::ceil_count(c_smp * W);
      break;
    case Algorithm::SmSMP:
      pl.N = 1;
      pl.K = detail::ceil_count(c_smp * W);
      pl.B = 1;
      break;
  }
  pl.T = pl.N * pl.K * pl.B;
  if (!pl.implemented) pl.notes.push_back("planner-only: no simulator recursion for this algorithm");
  if (c.degenerate()) pl.notes.push_back("degenerate: eps >= M2*R");
  return pl;
}

inline nlohmann::json to_json(const FedPlan& p) {
  nlohmann::json j{{"algorithm", to_string(p.algorithm)},
                   {"scheme", to_string(p.scheme)},
                   {"feedback", to_string(p.feedback)},
                   {"p", p.p},
                   {"kappa", p.kappa},
                   {"gamma", p.gamma},
                   {"L", p.L},
                   {"sigma_sq", p.sigma_sq},
                   {"delta_max", p.delta_max},
                   {"N", p.N},
                   {"K", p.K},
                   {"B", p.B},
                   {"T", p.T},
                   {"implemented", p.implemented},
                   {"notes", p.notes}};
  if (!p.extra.empty()) j["extra"] = p.extra;
  return j;
}

}  // namespace zofl
