#pragma once

// Federated simulation engine: minibatch and single-machine accelerated SGD
// driven by zeroth-order estimates, and stochastic mirror prox for saddle
// problems.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "estimators.hpp"
#include "planner.hpp"
#include "problems.hpp"
#include "rng.hpp"
#include "types.hpp"
#include "vecspace.hpp"

namespace zofl {

struct FedTopology {
  std::uint64_t B = 1;  // workers
  std::uint64_t K = 1;  // local oracle samples per round
  std::uint64_t N = 1;  // communication rounds

  void validate() const {
    if (B == 0 || K == 0 || N == 0) throw config_error("B, K and N must be positive");
  }
  std::uint64_t total() const { return B * K * N; }
};

// ---- traces ------------------------------------------------------------------

struct TraceRow {
  std::uint64_t round = 0;
  std::uint64_t calls = 0;
  double value = 0.0;
  double gap = std::numeric_limits<double>::quiet_NaN();
  double elapsed_ms = 0.0;
};

inline constexpr const char* trace_csv_header = "round,calls,value,gap,elapsed_ms,seed,config_hash";

struct Trace {
  std::vector<TraceRow> rows;
  std::uint64_t seed = 0;
  std::string config_hash;
  DenseVector final_point;
  std::uint64_t total_calls = 0;
  bool aborted = false;
  std::string diagnostic;

  double final_value() const { return rows.empty() ? std::numeric_limits<double>::quiet_NaN() : rows.back().value; }
  double final_gap() const { return rows.empty() ? std::numeric_limits<double>::quiet_NaN() : rows.back().gap; }

  void write_csv(std::ostream& os, bool header = true) const {
    if (header) os << trace_csv_header << '\n';
    char buf[64];
    auto num = [&](double v) -> std::string {
      if (std::isnan(v)) return "";
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return buf;
    };
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%.3f", r.elapsed_ms);
      const std::string ms = buf;
      os << r.round << ',' << r.calls << ',' << (std::isnan(r.value) ? "nan" : num(r.value)) << ','
         << num(r.gap) << ',' << ms << ',' << seed << ',' << config_hash << '\n';
    }
  }
};

// ---- aggregation -------------------------------------------------------------

struct WorkerPartial {
  std::uint64_t worker = 0;
  DenseVector mean;         // worker-local average
  std::uint64_t count = 0;  // samples behind the average
};

// Count-weighted mean, summed in ascending worker order.
inline DenseVector aggregate_round(std::vector<WorkerPartial> parts) {
  if (parts.empty()) throw config_error("no worker partials to aggregate");
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.worker < b.worker; });
  DenseVector acc(parts.front().mean.size());
  std::uint64_t n = 0;
  for (const auto& p : parts) {
    acc.axpy(static_cast<double>(p.count), p.mean);
    n += p.count;
  }
  if (n == 0) throw config_error("aggregate over zero samples");
  acc /= static_cast<double>(n);
  return acc;
}

namespace detail {

// Runs fn(i) for i in [0, n) over `lanes` threads. Each index writes only its
// own slot, so the result does not depend on the lane count.
template <class Fn>
void parallel_for(std::uint64_t n, unsigned lanes, Fn&& fn) {
  if (lanes <= 1 || n <= 1) {
    for (std::uint64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const unsigned used = static_cast<unsigned>(std::min<std::uint64_t>(lanes, n));
  std::vector<std::thread> pool;
  pool.reserve(used);
  std::exception_ptr err;
  std::mutex m;
  for (unsigned l = 0; l < used; ++l) {
    pool.emplace_back([&, l] {
      try {
        for (std::uint64_t i = l; i < n; i += used) fn(i);
      } catch (...) {
        std::lock_guard lk(m);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

class Stopwatch {
 public:
  explicit Stopwatch(bool on) : on_(on), t0_(std::chrono::steady_clock::now()) {}
  double ms() const {
    if (!on_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace detail

// ---- accelerated SGD ---------------------------------------------------------

enum class StepRule {
  AcSa,   // alpha_t = 2/(t+1), eta_t = (t+1)/2 * eta_bar
  Plain,  // alpha_t = 2/(t+2), eta_t = min{1/(2L), c R / (sigma_b sqrt(t))}
};

inline StepRule parse_step_rule(std::string_view s) {
  if (s == "acsa") return StepRule::AcSa;
  if (s == "plain") return StepRule::Plain;
  throw config_error("unknown step rule '" + std::string(s) + "'");
}

struct AcSgdStepPolicy {
  StepRule rule = StepRule::AcSa;
  double L = 1.0;      // Lipschitz constant of the smoothed gradient
  double sigma = 0.0;  // per-sample standard deviation bound
  double R = 1.0;
  double scale = 1.0;

  void validate() const {
    if (!(L > 0.0) || !(R > 0.0) || !(sigma >= 0.0) || !(scale > 0.0))
      throw config_error("step policy needs L, R, scale > 0 and sigma >= 0");
  }

  double alpha(std::uint64_t t) const {
    return rule == StepRule::AcSa ? 2.0 / static_cast<double>(t + 1) : 2.0 / static_cast<double>(t + 2);
  }

  // Step at iteration t (1-based) of `horizon`, with `batch` samples per step.
  double eta(std::uint64_t t, std::uint64_t horizon, std::uint64_t batch) const {
    const double sb = sigma / std::sqrt(static_cast<double>(batch));
    const double cap = 1.0 / (2.0 * L);
    if (rule == StepRule::AcSa) {
      double base = cap;
      if (sb > 0.0) {
        const double n = static_cast<double>(horizon);
        base = std::min(base, scale * R * std::sqrt(6.0 / (n * (n + 1.0) * (n + 2.0))) / sb);
      }
      return 0.5 * static_cast<double>(t + 1) * base;
    }
    if (sb == 0.0) return cap;
    return std::min(cap, scale * R / (sb * std::sqrt(static_cast<double>(t))));
  }
};

// Step policy built from the planner bounds at p = 2 (Euclidean steps).
inline AcSgdStepPolicy default_step_policy(const ProblemConstants& c, Scheme scheme, Feedback feedback,
                                           StepRule rule = StepRule::AcSa) {
  AcSgdStepPolicy p;
  p.rule = rule;
  p.L = grad_lipschitz(c, scheme);
  p.sigma = std::sqrt(sigma_sq_bound(c, scheme, feedback, 2));
  p.R = c.R;
  return p;
}

struct RunOptions {
  std::uint64_t seed = 0;
  unsigned lanes = 1;
  std::string config_hash;
  std::optional<DenseVector> start;
  std::optional<double> f_star;  // fills the gap column
  bool timing = false;
  // l2 slack for the oracle domain check; defaults to the smoothing radius
  std::optional<double> domain_slack;
};

namespace detail {

inline DenseVector checked_start(const StochasticProblem& p, const RunOptions& opt) {
  DenseVector x = opt.start ? *opt.start : center(p.set, p.dim);
  if (x.size() != p.dim) throw config_error("start point has wrong dimension");
  if (!x.all_finite() || !contains(x, p.set, 1e-9)) throw domain_error("infeasible start point");
  return x;
}

inline TraceRow objective_row(const StochasticProblem& p, const DenseVector& x, std::uint64_t round,
                              std::uint64_t calls, const RunOptions& opt, double ms) {
  TraceRow r;
  r.round = round;
  r.calls = calls;
  r.value = p.objective(x);
  if (opt.f_star) r.gap = r.value - *opt.f_star;
  r.elapsed_ms = ms;
  return r;
}

inline bool abort_if_nonfinite(Trace& tr, const DenseVector& x, std::uint64_t round, std::uint64_t calls) {
  if (x.all_finite()) return false;
  TraceRow r;
  r.round = round;
  r.calls = calls;
  r.value = std::numeric_limits<double>::quiet_NaN();
  tr.rows.push_back(r);
  tr.aborted = true;
  tr.diagnostic = "non-finite iterate at round " + std::to_string(round);
  return true;
}

}  // namespace detail

// Minibatch accelerated SGD: every round the B workers each average K
// estimates at the same point and the server takes one step with batch B*K.
inline Trace run_minibatch_acc_sgd(const StochasticProblem& problem, const FedTopology& topo,
                                   const SmoothingConfig& cfg, const NoiseModel& noise,
                                   const AcSgdStepPolicy& policy, const RunOptions& opt) {
  topo.validate();
  cfg.validate();
  policy.validate();
  const double slack = opt.domain_slack.value_or(cfg.gamma);
  Trace tr;
  tr.seed = opt.seed;
  tr.config_hash = opt.config_hash;
  DenseVector x = detail::checked_start(problem, opt);
  DenseVector x_ag = x;
  std::vector<ZerothOrderOracle> oracles;
  oracles.reserve(topo.B);
  for (std::uint64_t w = 0; w < topo.B; ++w) oracles.emplace_back(problem, noise, slack);
  detail::Stopwatch clock(opt.timing);
  std::uint64_t calls = 0;
  std::vector<WorkerPartial> parts(topo.B);
  for (std::uint64_t t = 1; t <= topo.N; ++t) {
    const double a = policy.alpha(t);
    const double eta = policy.eta(t, topo.N, topo.B * topo.K);
    DenseVector x_md = (1.0 - a) * x_ag;
    x_md.axpy(a, x);
    detail::parallel_for(topo.B, opt.lanes, [&](std::uint64_t w) {
      RngStream dirs(opt.seed, {w, t, stream_tag::directions});
      oracles[w].reseed_noise(RngStream(opt.seed, {w, t, stream_tag::noise}));
      GradientSample s = batch_grad(oracles[w], x_md, cfg, topo.K, dirs);
      parts[w] = WorkerPartial{w, std::move(s.g), topo.K};
    });
    const DenseVector g = aggregate_round(parts);
    x.axpy(-eta, g);
    project_inplace(x.span(), problem.set);
    x_ag *= (1.0 - a);
    x_ag.axpy(a, x);
    calls = 0;
    for (const auto& o : oracles) calls += o.calls();
    if (detail::abort_if_nonfinite(tr, x_ag, t, calls)) break;
    tr.rows.push_back(detail::objective_row(problem, x_ag, t, calls, opt, clock.ms()));
  }
  tr.final_point = x_ag;
  tr.total_calls = calls;
  return tr;
}

// Single-machine accelerated SGD: one worker takes K*N sequential steps with
// one estimate each; B is ignored. A trace row is written every K steps.
inline Trace run_single_machine_acc_sgd(const StochasticProblem& problem, const FedTopology& topo,
                                        const SmoothingConfig& cfg, const NoiseModel& noise,
                                        const AcSgdStepPolicy& policy, const RunOptions& opt) {
  topo.validate();
  cfg.validate();
  policy.validate();
  const double slack = opt.domain_slack.value_or(cfg.gamma);
  Trace tr;
  tr.seed = opt.seed;
  tr.config_hash = opt.config_hash;
  DenseVector x = detail::checked_start(problem, opt);
  DenseVector x_ag = x;
  ZerothOrderOracle oracle(problem, noise, slack);
  detail::Stopwatch clock(opt.timing);
  const std::uint64_t steps = topo.K * topo.N;
  for (std::uint64_t t = 1; t <= steps; ++t) {
    const double a = policy.alpha(t);
    const double eta = policy.eta(t, steps, 1);
    DenseVector x_md = (1.0 - a) * x_ag;
    x_md.axpy(a, x);
    RngStream dirs(opt.seed, {0, t, stream_tag::directions});
    oracle.reseed_noise(RngStream(opt.seed, {0, t, stream_tag::noise}));
    const GradientSample s = estimate_grad(oracle, x_md, cfg, dirs);
    x.axpy(-eta, s.g);
    project_inplace(x.span(), problem.set);
    x_ag *= (1.0 - a);
    x_ag.axpy(a, x);
    if (detail::abort_if_nonfinite(tr, x_ag, (t + topo.K - 1) / topo.K, oracle.calls())) break;
    if (t % topo.K == 0)
      tr.rows.push_back(detail::objective_row(problem, x_ag, t / topo.K, oracle.calls(), opt, clock.ms()));
  }
  tr.final_point = x_ag;
  tr.total_calls = oracle.calls();
  return tr;
}

// Diagnostic only: K local projected SGD steps per worker followed by
// averaging. Not one of the analysed methods; kept for side-by-side checks.
inline Trace run_local_sgd_diagnostic(const StochasticProblem& problem, const FedTopology& topo,
                                      const SmoothingConfig& cfg, const NoiseModel& noise, double eta,
                                      const RunOptions& opt) {
  topo.validate();
  cfg.validate();
  if (!(eta > 0.0)) throw config_error("step must be positive");
  Trace tr;
  tr.seed = opt.seed;
  tr.config_hash = opt.config_hash;
  DenseVector x = detail::checked_start(problem, opt);
  std::vector<ZerothOrderOracle> oracles;
  for (std::uint64_t w = 0; w < topo.B; ++w)
    oracles.emplace_back(problem, noise, opt.domain_slack.value_or(cfg.gamma));
  std::vector<WorkerPartial> parts(topo.B);
  detail::Stopwatch clock(opt.timing);
  std::uint64_t calls = 0;
  for (std::uint64_t t = 1; t <= topo.N; ++t) {
    detail::parallel_for(topo.B, opt.lanes, [&](std::uint64_t w) {
      RngStream dirs(opt.seed, {w, t, stream_tag::directions});
      oracles[w].reseed_noise(RngStream(opt.seed, {w, t, stream_tag::noise}));
      DenseVector xl = x;
      for (std::uint64_t k = 0; k < topo.K; ++k) {
        xl.axpy(-eta, estimate_grad(oracles[w], xl, cfg, dirs).g);
        project_inplace(xl.span(), problem.set);
      }
      parts[w] = WorkerPartial{w, std::move(xl), 1};
    });
    x = aggregate_round(parts);
    calls = 0;
    for (const auto& o : oracles) calls += o.calls();
    if (detail::abort_if_nonfinite(tr, x, t, calls)) break;
    tr.rows.push_back(detail::objective_row(problem, x, t, calls, opt, clock.ms()));
  }
  tr.final_point = x;
  tr.total_calls = calls;
  return tr;
}

// ---- stochastic mirror prox --------------------------------------------------

struct ProductGeometry {
  Geometry x;
  Geometry y;
  std::size_t dx = 0;

  static ProductGeometry make(const SaddleProblem& g, ProxKind kind) {
    if (kind == ProxKind::Entropy) return {Geometry::entropy(g.set_x), Geometry::entropy(g.set_y), g.dx};
    return {Geometry::euclidean(g.set_x), Geometry::euclidean(g.set_y), g.dx};
  }

  DenseVector prox(const DenseVector& r, const DenseVector& xi, double eta) const {
    const std::size_t dy = r.size() - dx;
    DenseVector rx(dx), ry(dy), gx(dx), gy(dy);
    for (std::size_t i = 0; i < dx; ++i) {
      rx[i] = r[i];
      gx[i] = xi[i];
    }
    for (std::size_t j = 0; j < dy; ++j) {
      ry[j] = r[dx + j];
      gy[j] = xi[dx + j];
    }
    const DenseVector zx = prox_step(rx, gx, eta, x), zy = prox_step(ry, gy, eta, y);
    DenseVector z(r.size());
    for (std::size_t i = 0; i < dx; ++i) z[i] = zx[i];
    for (std::size_t j = 0; j < dy; ++j) z[dx + j] = zy[j];
    return z;
  }
};

struct SmpState {
  DenseVector r;
  DenseVector weighted_sum;
  double weight_total = 0.0;
  std::uint64_t steps = 0;

  static SmpState start(DenseVector r0) {
    SmpState s;
    s.weighted_sum = DenseVector(r0.size());
    s.r = std::move(r0);
    return s;
  }

  // Step-weighted average of the extrapolation points.
  DenseVector average() const {
    if (weight_total <= 0.0) return r;
    DenseVector z = weighted_sum;
    z /= weight_total;
    return z;
  }
};

using OperatorEstimate = std::function<DenseVector(const DenseVector&)>;

// w = P_r(eta F(r)); r' = P_r(eta F(w)); the average accumulates eta * w.
inline SmpState smp_step(const SmpState& s, double eta, const OperatorEstimate& at_r,
                         const OperatorEstimate& at_w, const ProductGeometry& geom) {
  if (!(eta > 0.0)) throw config_error("SMP step must be positive");
  const DenseVector w = geom.prox(s.r, at_r(s.r), eta);
  SmpState n;
  n.r = geom.prox(s.r, at_w(w), eta);
  n.weighted_sum = s.weighted_sum;
  n.weighted_sum.axpy(eta, w);
  n.weight_total = s.weight_total + eta;
  n.steps = s.steps + 1;
  return n;
}

enum class SmpMode { Minibatch, SingleMachine };

inline double smp_step_size(SmpMode mode, double L, double sigma, double V, double R, const FedTopology& topo) {
  if (!(L > 0.0)) throw config_error("SMP needs L > 0");
  const double cap = 1.0 / (std::sqrt(3.0) * L);
  const double s = V * V + 2.0 * sigma * sigma;
  if (s == 0.0) return cap;
  const double B = static_cast<double>(topo.B), K = static_cast<double>(topo.K), N = static_cast<double>(topo.N);
  if (mode == SmpMode::Minibatch) return std::min(cap, 7.0 * R * std::sqrt(2.0 * B * K / (7.0 * N * s)));
  return std::min(cap, 7.0 * R * std::sqrt(2.0 / (7.0 * K * N * s)));
}

// Guaranteed bound on the expected error of the averaged point.
inline double smp_error_bound(SmpMode mode, double L, double sigma, double V, double R, const FedTopology& topo) {
  const double B = static_cast<double>(topo.B), K = static_cast<double>(topo.K), N = static_cast<double>(topo.N);
  const double s = V * V + 2.0 * sigma * sigma;
  if (mode == SmpMode::Minibatch)
    return std::max(1.75 * L * R * R / N, 7.0 * R * std::sqrt(s / (3.0 * B * K * N)));
  return std::max(1.75 * L * R * R / (K * N), 7.0 * R * std::sqrt(s / (3.0 * K * N)));
}

// Planner sigma for the stacked operator estimate (blocks measured in l2).
inline double saddle_sigma(const SaddleProblem& g, Scheme scheme, Feedback feedback, double gamma_x,
                           double gamma_y) {
  auto block = [&](double d, double M2, double gamma) {
    ProblemConstants c;
    c.d = d;
    c.M = c.M2 = M2 > 0.0 ? M2 : 1.0;
    c.R = 1.0;
    c.G = g.matrix ? std::max(g.matrix->max_abs(), 1e-12) : 1.0;
    // invert the planned radius to recover the matching eps
    c.eps = scheme == Scheme::L1 ? 4.0 * c.M2 * gamma / std::sqrt(d) : 2.0 * c.M2 * gamma;
    return sigma_sq_bound(c, scheme, feedback, 2);
  };
  return std::sqrt(block(static_cast<double>(g.dx), g.M2x, gamma_x) +
                   block(static_cast<double>(g.dy), g.M2y, gamma_y));
}

struct SmpOptions {
  Scheme scheme = Scheme::L2;
  Feedback feedback = Feedback::TwoPoint;
  double gamma_x = 0.05;
  double gamma_y = 0.05;
  bool exact_operator = false;
  ProxKind prox = ProxKind::Euclidean;
  std::optional<double> L, sigma, V, R;  // defaults derived from the game
  std::optional<DenseVector> start;
  NoiseModel noise;
  std::uint64_t seed = 0;
  unsigned lanes = 1;
  std::string config_hash;
  bool timing = false;
};

struct SmpResolved {
  double L, sigma, V, R;
};

inline SmpResolved resolve_smp(const SaddleProblem& g, const SmpOptions& o) {
  SmpResolved r;
  r.L = o.L.value_or(o.prox == ProxKind::Entropy ? g.L : g.L_euclidean);
  r.V = o.V.value_or(o.exact_operator ? 0.0 : g.V);
  r.sigma = o.sigma.value_or(o.exact_operator ? 0.0 : saddle_sigma(g, o.scheme, o.feedback, o.gamma_x, o.gamma_y));
  const double dx = diameter(g.set_x, g.dx), dy = diameter(g.set_y, g.dy);
  r.R = o.R.value_or(std::sqrt(dx * dx + dy * dy));
  if (!std::isfinite(r.R)) throw config_error("R must be given for unbounded sets");
  return r;
}

namespace detail {

inline DenseVector saddle_start(const SaddleProblem& g, const std::optional<DenseVector>& start) {
  if (start) {
    if (start->size() != g.dim()) throw config_error("start point has wrong dimension");
    DenseVector x(g.dx), y(g.dy);
    for (std::size_t i = 0; i < g.dx; ++i) x[i] = (*start)[i];
    for (std::size_t j = 0; j < g.dy; ++j) y[j] = (*start)[g.dx + j];
    if (!contains(x, g.set_x) || !contains(y, g.set_y)) throw domain_error("infeasible start point");
    return *start;
  }
  DenseVector z(g.dim());
  const DenseVector cx = center(g.set_x, g.dx), cy = center(g.set_y, g.dy);
  for (std::size_t i = 0; i < g.dx; ++i) z[i] = cx[i];
  for (std::size_t j = 0; j < g.dy; ++j) z[g.dx + j] = cy[j];
  return z;
}

inline TraceRow saddle_row(const SaddleProblem& g, const DenseVector& z, std::uint64_t round,
                           std::uint64_t calls, double ms) {
  TraceRow r;
  r.round = round;
  r.calls = calls;
  std::span<const double> s = z.span();
  r.value = g.value(s.first(g.dx), s.subspan(g.dx), 0);
  if (g.matrix) r.gap = exact_gap(g, z);
  r.elapsed_ms = ms;
  return r;
}

// Batched operator estimate at z from `workers` workers with `per_worker` samples each.
struct SaddleSampler {
  const SaddleProblem& game;
  const SmpOptions& opt;
  std::vector<SaddleOracle>& oracles;

  DenseVector operator()(const DenseVector& z, std::uint64_t stream_round, std::uint64_t workers,
                         std::uint64_t per_worker) const {
    if (opt.exact_operator) {
      std::span<const double> s = z.span();
      return game.exact_operator(s.first(game.dx), s.subspan(game.dx));
    }
    SmoothingConfig cx{opt.scheme, opt.feedback, opt.gamma_x}, cy{opt.scheme, opt.feedback, opt.gamma_y};
    DenseVector x(game.dx), y(game.dy);
    for (std::size_t i = 0; i < game.dx; ++i) x[i] = z[i];
    for (std::size_t j = 0; j < game.dy; ++j) y[j] = z[game.dx + j];
    std::vector<WorkerPartial> parts(workers);
    parallel_for(workers, opt.lanes, [&](std::uint64_t w) {
      RngStream dirs(opt.seed, {w, stream_round, stream_tag::directions});
      oracles[w].reseed_noise(RngStream(opt.seed, {w, stream_round, stream_tag::noise}));
      DenseVector acc(game.dim());
      for (std::uint64_t k = 0; k < per_worker; ++k)
        acc += saddle_operator_estimate(oracles[w], x, y, cx, cy, dirs).g;
      acc /= static_cast<double>(per_worker);
      parts[w] = WorkerPartial{w, std::move(acc), per_worker};
    });
    return aggregate_round(std::move(parts));
  }
};

}  // namespace detail

// Minibatch SMP: N rounds, each operator evaluation averages B*K estimates.
inline Trace run_minibatch_smp(const SaddleProblem& game, const FedTopology& topo, const SmpOptions& opt) {
  topo.validate();
  if (opt.exact_operator && !game.exact_operator) throw unsupported_error("game has no exact operator");
  const SmpResolved par = resolve_smp(game, opt);
  const double eta = smp_step_size(SmpMode::Minibatch, par.L, par.sigma, par.V, par.R, topo);
  const ProductGeometry geom = ProductGeometry::make(game, opt.prox);
  std::vector<SaddleOracle> oracles;
  for (std::uint64_t w = 0; w < topo.B; ++w) oracles.emplace_back(game, opt.noise, opt.gamma_x, opt.gamma_y);
  detail::SaddleSampler sample{game, opt, oracles};
  Trace tr;
  tr.seed = opt.seed;
  tr.config_hash = opt.config_hash;
  SmpState st = SmpState::start(detail::saddle_start(game, opt.start));
  detail::Stopwatch clock(opt.timing);
  std::uint64_t calls = 0;
  for (std::uint64_t t = 1; t <= topo.N; ++t) {
    st = smp_step(
        st, eta, [&](const DenseVector& z) { return sample(z, 2 * t, topo.B, topo.K); },
        [&](const DenseVector& z) { return sample(z, 2 * t + 1, topo.B, topo.K); }, geom);
    calls = 0;
    for (const auto& o : oracles) calls += o.calls();
    const DenseVector avg = st.average();
    if (detail::abort_if_nonfinite(tr, avg, t, calls)) break;
    tr.rows.push_back(detail::saddle_row(game, avg, t, calls, clock.ms()));
  }
  tr.final_point = st.average();
  tr.total_calls = calls;
  return tr;
}

// Single-machine SMP: one worker, K*N steps with one estimate per evaluation.
// B is ignored.
inline Trace run_single_machine_smp(const SaddleProblem& game, const FedTopology& topo, const SmpOptions& opt) {
  topo.validate();
  if (opt.exact_operator && !game.exact_operator) throw unsupported_error("game has no exact operator");
  const SmpResolved par = resolve_smp(game, opt);
  const double eta = smp_step_size(SmpMode::SingleMachine, par.L, par.sigma, par.V, par.R, topo);
  const ProductGeometry geom = ProductGeometry::make(game, opt.prox);
  std::vector<SaddleOracle> oracles;
  oracles.emplace_back(game, opt.noise, opt.gamma_x, opt.gamma_y);
  detail::SaddleSampler sample{game, opt, oracles};
  Trace tr;
  tr.seed = opt.seed;
  tr.config_hash = opt.config_hash;
  SmpState st = SmpState::start(detail::saddle_start(game, opt.start));
  detail::Stopwatch clock(opt.timing);
  const std::uint64_t steps = topo.K * topo.N;
  for (std::uint64_t t = 1; t <= steps; ++t) {
    st = smp_step(
        st, eta, [&](const DenseVector& z) { return sample(z, 2 * t, 1, 1); },
        [&](const DenseVector& z) { return sample(z, 2 * t + 1, 1, 1); }, geom);
    if (t % topo.K == 0) {
      const DenseVector avg = st.average();
      if (detail::abort_if_nonfinite(tr, avg, t / topo.K, oracles[0].calls())) break;
      tr.rows.push_back(detail::saddle_row(game, avg, t / topo.K, oracles[0].calls(), clock.ms()));
    }
  }
  tr.final_point = st.average();
  tr.total_calls = oracles[0].calls();
  return tr;
}

}  // namespace zofl
