#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "rng.hpp"
#include "vecspace.hpp"

namespace zofl {

using json = nlohmann::json;

// ---- noise -------------------------------------------------------------------

enum class NoiseKind { None, Uniform, Hash, Directional };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::None: return "none";
    case NoiseKind::Uniform: return "uniform";
    case NoiseKind::Hash: return "hash";
    case NoiseKind::Directional: return "directional";
  }
  return "?";
}

inline NoiseKind parse_noise_kind(std::string_view s) {
  if (s == "none") return NoiseKind::None;
  if (s == "uniform") return NoiseKind::Uniform;
  if (s == "hash") return NoiseKind::Hash;
  if (s == "directional") return NoiseKind::Directional;
  throw config_error("unknown noise kind '" + std::string(s) + "'");
}

// Bounded additive corruption |delta(x)| <= level.
//   uniform     i.i.d. U[-level, level] per call
//   hash        +-level chosen by a hash of the quantized query point
//   directional level * sign(<z - anchor, direction>)
struct NoiseModel {
  NoiseKind kind = NoiseKind::None;
  double level = 0.0;
  double quantum = 1e-9;
  DenseVector anchor;
  DenseVector direction;

  static NoiseModel none() { return {}; }

  static NoiseModel uniform(double level) { return make(NoiseKind::Uniform, level); }

  static NoiseModel hash(double level, double quantum = 1e-9) {
    NoiseModel n = make(NoiseKind::Hash, level);
    if (!(quantum > 0.0)) throw config_error("hash noise quantum must be positive");
    n.quantum = quantum;
    return n;
  }

  static NoiseModel directional(double level, DenseVector anchor, DenseVector direction) {
    NoiseModel n = make(NoiseKind::Directional, level);
    anchor.check_same(direction);
    n.anchor = std::move(anchor);
    n.direction = std::move(direction);
    return n;
  }

  double operator()(std::span<const double> z, RngStream& rng) const {
    switch (kind) {
      case NoiseKind::None: return 0.0;
      case NoiseKind::Uniform: return level * (2.0 * rng.uniform() - 1.0);
      case NoiseKind::Hash: {
        std::uint64_t h = 0x243f6a8885a308d3ULL;
        for (double v : z) {
          const auto q = static_cast<std::int64_t>(std::llround(v / quantum));
          h = hash_combine(h, static_cast<std::uint64_t>(q));
        }
        return (h >> 63) ? level : -level;
      }
      case NoiseKind::Directional: {
        if (z.size() != anchor.size()) throw config_error("directional noise dimension mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) s += (z[i] - anchor[i]) * direction[i];
        return level * static_cast<double>((s > 0.0) - (s < 0.0));
      }
    }
    return 0.0;
  }

 private:
  static NoiseModel make(NoiseKind k, double level) {
    if (!(level >= 0.0) || !std::isfinite(level)) throw config_error("noise level must be finite and >= 0");
    NoiseModel n;
    n.kind = level == 0.0 ? NoiseKind::None : k;
    n.level = level;
    return n;
  }
};

// ---- convex problems ---------------------------------------------------------

using ValueFn = std::function<double(std::span<const double>, std::uint64_t)>;
using ObjectiveFn = std::function<double(std::span<const double>)>;
using SubgradientFn = std::function<DenseVector(std::span<const double>)>;

struct StochasticProblem {
  std::string name;
  std::size_t dim = 0;
  ValueFn value;          // f(x, xi)
  ObjectiveFn objective;  // E_xi f(x, xi), used for traces and reference values
  SubgradientFn subgradient;  // optional
  FeasibleSet set = Unconstrained{};
  // l2 Lipschitz constant of the part of f that carries curvature. It only
  // enters the smoothness bound; a linear term does not contribute.
  double M = 0.0;
  double M2 = 0.0;  // Lipschitz constant of f in l2
  std::optional<double> G;  // bound on |f| for one-point feedback
  std::optional<double> f_star;
  std::optional<DenseVector> linear_part;  // b for the simplex test family
  json spec;
};

inline double dot_span(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// f(x) = <b, x> + ||x||_inf over the probability simplex, b ~ U[0,1]^d.
inline StochasticProblem make_simplex_test_problem(const DenseVector& b) {
  StochasticProblem p;
  p.name = "simplex_l1inf";
  p.dim = b.size();
  auto f = [b](std::span<const double> x) {
    double s = 0.0, m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      s += b[i] * x[i];
      m = std::max(m, std::abs(x[i]));
    }
    return s + m;
  };
  p.objective = f;
  p.value = [f](std::span<const double> x, std::uint64_t) { return f(x); };
  p.subgradient = [b](std::span<const double> x) {
    DenseVector g = b;
    std::size_t k = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
      if (std::abs(x[i]) > std::abs(x[k])) k = i;
    g[k] += x[k] >= 0.0 ? 1.0 : -1.0;
    return g;
  };
  p.set = Simplex{};
  p.M2 = norm(b, Norm::L2) + 1.0;
  p.M = 1.0;  // ||x||_inf; <b, x> is linear
  p.G = norm(b, Norm::Linf) + 1.0;
  p.linear_part = b;
  p.spec = json{{"kind", "simplex_l1inf"}, {"d", b.size()}, {"b", b.values()}};
  return p;
}

inline StochasticProblem make_simplex_test_problem(std::size_t d, std::uint64_t seed) {
  if (d < 2) throw config_error("simplex test problem needs d >= 2");
  RngStream rng(seed, {0, 0, stream_tag::setup});
  DenseVector b(d);
  for (std::size_t i = 0; i < d; ++i) b[i] = rng.uniform();
  StochasticProblem p = make_simplex_test_problem(b);
  p.spec["seed"] = seed;
  return p;
}

// f(x, xi) = ||x||^2 / 2 + s <z(xi), x> with z(xi) standard normal, on an l2 ball.
inline StochasticProblem make_quadratic_ball_problem(std::size_t d, double radius, double noise_scale = 0.0) {
  if (d == 0) throw config_error("vector dimension must be positive");
  if (!(radius > 0.0)) throw config_error("ball radius must be positive");
  StochasticProblem p;
  p.name = "quadratic_ball";
  p.dim = d;
  p.objective = [](std::span<const double> x) { return 0.5 * dot_span(x, x); };
  p.value = [noise_scale](std::span<const double> x, std::uint64_t xi) {
    double v = 0.5 * dot_span(x, x);
    if (noise_scale != 0.0) {
      RngStream r(xi);
      double s = 0.0;
      for (double xv : x) s += r.normal() * xv;
      v += noise_scale * s;
    }
    return v;
  };
  p.subgradient = [](std::span<const double> x) {
    return DenseVector(std::vector<double>(x.begin(), x.end()));
  };
  p.set = L2Ball{radius};
  p.M = p.M2 = radius;
  p.G = 0.5 * radius * radius;
  p.f_star = 0.0;
  p.spec = json{{"kind", "quadratic_ball"}, {"d", d}, {"radius", radius}, {"noise_scale", noise_scale}};
  return p;
}

// f(x) = <c, x> on R^d. The smoothed function equals f.
inline StochasticProblem make_linear_problem(const DenseVector& c) {
  StochasticProblem p;
  p.name = "linear";
  p.dim = c.size();
  p.objective = [c](std::span<const double> x) { return dot_span(c.span(), x); };
  p.value = [c](std::span<const double> x, std::uint64_t) { return dot_span(c.span(), x); };
  p.subgradient = [c](std::span<const double>) { return c; };
  p.set = Unconstrained{};
  p.M = p.M2 = norm(c, Norm::L2);
  p.spec = json{{"kind", "linear"}, {"c", c.values()}};
  return p;
}

// ---- saddle problems ---------------------------------------------------------

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;  // row major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rs) {
    if (rs.empty() || rs[0].empty()) throw config_error("matrix must be non-empty");
    Matrix m(rs.size(), rs[0].size());
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (rs[i].size() != m.cols) throw config_error("ragged matrix rows");
      for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rs[i][j];
    }
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  // A y
  DenseVector mul(std::span<const double> y) const {
    DenseVector r(rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) r[i] += (*this)(i, j) * y[j];
    return r;
  }
  // A^T x
  DenseVector tmul(std::span<const double> x) const {
    DenseVector r(cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) r[j] += (*this)(i, j) * x[i];
    return r;
  }

  double bilinear(std::span<const double> x, std::span<const double> y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) s += x[i] * (*this)(i, j) * y[j];
    return s;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
  }

  double spectral_norm(int iters = 500) const {
    DenseVector v(cols, 1.0 / std::sqrt(static_cast<double>(cols)));
    double s = 0.0;
    for (int k = 0; k < iters; ++k) {
      DenseVector w = tmul(mul(v));
      const double n = norm(w, Norm::L2);
      if (n == 0.0) return 0.0;
      w /= n;
      v = w;
      s = std::sqrt(n);
    }
    return s;
  }

  std::vector<std::vector<double>> to_rows() const {
    std::vector<std::vector<double>> r(rows, std::vector<double>(cols));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) r[i][j] = (*this)(i, j);
    return r;
  }
};

using SaddleValueFn =
    std::function<double(std::span<const double>, std::span<const double>, std::uint64_t)>;
using SaddleOperatorFn = std::function<DenseVector(std::span<const double>, std::span<const double>)>;

// min over x, max over y of f(x, y). Operator F(z) = (grad_x f, -grad_y f).
struct SaddleProblem {
  std::string name;
  std::size_t dx = 0, dy = 0;
  SaddleValueFn value;
  SaddleOperatorFn exact_operator;  // optional
  FeasibleSet set_x = Simplex{}, set_y = Simplex{};
  double M2x = 0.0, M2y = 0.0;  // Lipschitz constants of f in each block (l2)
  double L = 0.0;               // operator Lipschitz constant in the l1 setup
  double L_euclidean = 0.0;     // same in the l2 setup
  double V = 0.0;               // bound on ||F(z)||
  std::optional<Matrix> matrix;
  json spec;

  std::size_t dim() const { return dx + dy; }
};

inline SaddleProblem make_bilinear_game(const Matrix& A) {
  if (A.rows == 0 || A.cols == 0) throw config_error("matrix must be non-empty");
  SaddleProblem g;
  g.name = "bilinear";
  g.dx = A.rows;
  g.dy = A.cols;
  g.value = [A](std::span<const double> x, std::span<const double> y, std::uint64_t) {
    return A.bilinear(x, y);
  };
  g.exact_operator = [A](std::span<const double> x, std::span<const double> y) {
    DenseVector ay = A.mul(y), atx = A.tmul(x);
    DenseVector F(ay.size() + atx.size());
    for (std::size_t i = 0; i < ay.size(); ++i) F[i] = ay[i];
    for (std::size_t j = 0; j < atx.size(); ++j) F[ay.size() + j] = -atx[j];
    return F;
  };
  g.set_x = Simplex{};
  g.set_y = Simplex{};
  double cmax = 0.0, rmax = 0.0;
  for (std::size_t j = 0; j < A.cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < A.rows; ++i) s += A(i, j) * A(i, j);
    cmax = std::max(cmax, std::sqrt(s));
  }
  for (std::size_t i = 0; i < A.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < A.cols; ++j) s += A(i, j) * A(i, j);
    rmax = std::max(rmax, std::sqrt(s));
  }
  g.M2x = cmax;
  g.M2y = rmax;
  g.L = A.max_abs();
  g.L_euclidean = A.spectral_norm();
  g.V = std::sqrt(cmax * cmax + rmax * rmax);
  g.matrix = A;
  g.spec = json{{"kind", "bilinear"}, {"matrix", A.to_rows()}};
  return g;
}

// Duality gap of a bilinear game on simplex x simplex.
inline double exact_gap(const SaddleProblem& game, std::span<const double> x, std::span<const double> y) {
  if (!game.matrix || !std::holds_alternative<Simplex>(game.set_x) ||
      !std::holds_alternative<Simplex>(game.set_y))
    throw unsupported_error("exact gap is available only for bilinear games on simplices");
  const Matrix& A = *game.matrix;
  DenseVector atx = A.tmul(x), ay = A.mul(y);
  return *std::max_element(atx.begin(), atx.end()) - *std::min_element(ay.begin(), ay.end());
}

inline double exact_gap(const SaddleProblem& game, const DenseVector& z) {
  if (z.size() != game.dim()) throw config_error("saddle point dimension mismatch");
  std::span<const double> s = z.span();
  return exact_gap(game, s.first(game.dx), s.subspan(game.dx));
}

// ---- oracles -----------------------------------------------------------------

namespace detail {

// True when z lies within l2 distance `slack` of the set (up to rounding).
inline bool within_enlarged(std::span<const double> z, const FeasibleSet& set, double slack) {
  if (!std::isfinite(slack) || std::holds_alternative<Unconstrained>(set)) return true;
  const double tol = slack * (1.0 + 1e-9) + 1e-12;
  if (std::holds_alternative<Simplex>(set)) {
    // cheap bounds before the exact projection
    double sum = 0.0, neg2 = 0.0, possum = 0.0;
    for (double v : z) {
      sum += v;
      if (v < 0.0) neg2 += v * v;
      else possum += v;
    }
    const double n = static_cast<double>(z.size());
    if (std::abs(sum - 1.0) / std::sqrt(n) > tol || std::sqrt(neg2) > tol) return false;
    if (possum > 0.0) {
      double d2 = 0.0;
      for (double v : z) {
        const double p = std::max(v, 0.0) / possum;
        d2 += (v - p) * (v - p);
      }
      if (std::sqrt(d2) <= tol) return true;
    }
  }
  std::vector<double> p(z.begin(), z.end());
  project_inplace(p, set);
  double d2 = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) d2 += (z[i] - p[i]) * (z[i] - p[i]);
  return std::sqrt(d2) <= tol;
}

}  // namespace detail

// Noisy, counted access to f. Both evaluations of a two-point query share xi.
class ZerothOrderOracle {
 public:
  ZerothOrderOracle(const StochasticProblem& problem, NoiseModel noise,
                    double domain_slack = std::numeric_limits<double>::infinity(),
                    RngStream noise_rng = RngStream(0, {0, 0, stream_tag::noise}))
      : problem_(&problem), noise_(std::move(noise)), slack_(domain_slack), rng_(noise_rng) {}

  double value(std::span<const double> x, std::uint64_t xi) {
    if (x.size() != problem_->dim) throw config_error("oracle query has wrong dimension");
    if (!detail::within_enlarged(x, problem_->set, slack_))
      throw domain_error("query point outside the enlarged feasible set");
    ++calls_;
    return problem_->value(x, xi) + noise_(x, rng_);
  }

  std::uint64_t calls() const noexcept { return calls_; }
  void reseed_noise(RngStream r) { rng_ = r; }
  std::size_t dim() const noexcept { return problem_->dim; }
  const StochasticProblem& problem() const noexcept { return *problem_; }
  const NoiseModel& noise() const noexcept { return noise_; }

 private:
  const StochasticProblem* problem_;
  NoiseModel noise_;
  double slack_;
  RngStream rng_;
  std::uint64_t calls_ = 0;
};

inline double noisy_value(ZerothOrderOracle& oracle, std::span<const double> x, std::uint64_t xi) {
  return oracle.value(x, xi);
}

class SaddleOracle {
 public:
  SaddleOracle(const SaddleProblem& game, NoiseModel noise,
               double slack_x = std::numeric_limits<double>::infinity(),
               double slack_y = std::numeric_limits<double>::infinity(),
               RngStream noise_rng = RngStream(0, {0, 0, stream_tag::noise}))
      : game_(&game), noise_(std::move(noise)), slack_x_(slack_x), slack_y_(slack_y), rng_(noise_rng) {}

  double value(std::span<const double> x, std::span<const double> y, std::uint64_t xi) {
    if (x.size() != game_->dx || y.size() != game_->dy)
      throw config_error("oracle query has wrong dimension");
    if (!detail::within_enlarged(x, game_->set_x, slack_x_) ||
        !detail::within_enlarged(y, game_->set_y, slack_y_))
      throw domain_error("query point outside the enlarged feasible set");
    ++calls_;
    double delta = 0.0;
    if (noise_.kind != NoiseKind::None) {
      std::vector<double> z(x.begin(), x.end());
      z.insert(z.end(), y.begin(), y.end());
      delta = noise_(z, rng_);
    }
    return game_->value(x, y, xi) + delta;
  }

  std::uint64_t calls() const noexcept { return calls_; }
  void reseed_noise(RngStream r) { rng_ = r; }
  const SaddleProblem& problem() const noexcept { return *game_; }

 private:
  const SaddleProblem* game_;
  NoiseModel noise_;
  double slack_x_, slack_y_;
  RngStream rng_;
  std::uint64_t calls_ = 0;
};

// ---- reference minimum -------------------------------------------------------

struct MinResult {
  double value = 0.0;
  DenseVector point;
};

namespace detail {

inline DenseVector numeric_subgradient(const StochasticProblem& p, std::span<const double> x) {
  const double h = 1e-7;
  DenseVector g(x.size());
  std::vector<double> z(x.begin(), x.end());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double keep = z[i];
    z[i] = keep + h;
    const double fp = p.objective(z);
    z[i] = keep - h;
    const double fm = p.objective(z);
    z[i] = keep;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

inline MinResult refine_subgradient(const StochasticProblem& p, DenseVector x, std::size_t steps,
                                    double radius) {
  MinResult best{p.objective(x), x};
  const double gnorm0 = std::max(p.M2, 1e-12);
  for (std::size_t t = 1; t <= steps; ++t) {
    DenseVector g = p.subgradient ? p.subgradient(x) : numeric_subgradient(p, x);
    const double gn = norm(g, Norm::L2);
    if (gn == 0.0) break;
    x.axpy(-radius / (std::max(gn, gnorm0 * 1e-6) * std::sqrt(static_cast<double>(t))), g);
    project_inplace(x.span(), p.set);
    const double v = p.objective(x);
    if (v < best.value) best = {v, x};
  }
  return best;
}

}  // namespace detail

// Reference minimum. The simplex test family is solved by enumerating the
// candidate vertices (uniform weight on the k smallest b_i) and then refined;
// other problems use projected subgradient from 16 starts.
inline MinResult brute_force_min(const StochasticProblem& p, std::size_t budget = 100000) {
  if (p.f_star && !p.linear_part) {
    return {*p.f_star, center(p.set, p.dim)};
  }
  const double radius = std::isfinite(diameter(p.set, p.dim)) ? diameter(p.set, p.dim) : 1.0;
  if (p.name == "simplex_l1inf" && p.linear_part) {
    const DenseVector& b = *p.linear_part;
    const std::size_t d = b.size();
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return b[i] < b[j]; });
    MinResult best{std::numeric_limits<double>::infinity(), DenseVector(d)};
    double prefix = 0.0;
    for (std::size_t k = 1; k <= d; ++k) {
      prefix += b[order[k - 1]];
      const double v = prefix / static_cast<double>(k) + 1.0 / static_cast<double>(k);
      if (v < best.value) {
        DenseVector x(d, 0.0);
        for (std::size_t i = 0; i < k; ++i) x[order[i]] = 1.0 / static_cast<double>(k);
        best = {v, x};
      }
    }
    if (budget > 0) {
      MinResult r = detail::refine_subgradient(p, best.point, budget, 1e-3 * radius);
      if (r.value < best.value) best = r;
    }
    return best;
  }
  MinResult best{std::numeric_limits<double>::infinity(), center(p.set, p.dim)};
  RngStream rng(0x6272757465ULL, {0, 0, stream_tag::setup});
  const std::size_t per_start = std::max<std::size_t>(budget / 16, 1);
  for (int s = 0; s < 16; ++s) {
    DenseVector x0 = center(p.set, p.dim);
    if (s > 0) {
      for (std::size_t i = 0; i < p.dim; ++i) x0[i] += radius * 0.5 * rng.normal() / std::sqrt(double(p.dim));
      project_inplace(x0.span(), p.set);
    }
    MinResult r = detail::refine_subgradient(p, x0, per_start, 0.5 * radius);
    if (r.value < best.value) best = r;
  }
  return best;
}

// ---- JSON descriptions -------------------------------------------------------

inline json noise_to_json(const NoiseModel& n) {
  json j{{"kind", to_string(n.kind)}, {"level", n.level}};
  if (n.kind == NoiseKind::Hash) j["quantum"] = n.quantum;
  if (n.kind == NoiseKind::Directional) {
    j["anchor"] = n.anchor.values();
    j["direction"] = n.direction.values();
  }
  return j;
}

inline NoiseModel noise_from_json(const json& j) {
  for (auto& [k, v] : j.items())
    if (k != "kind" && k != "level" && k != "quantum" && k != "anchor" && k != "direction")
      throw config_error("unknown noise key '" + k + "'");
  const NoiseKind kind = parse_noise_kind(j.at("kind").get<std::string>());
  const double level = j.value("level", 0.0);
  switch (kind) {
    case NoiseKind::None: return NoiseModel::none();
    case NoiseKind::Uniform: return NoiseModel::uniform(level);
    case NoiseKind::Hash: return NoiseModel::hash(level, j.value("quantum", 1e-9));
    case NoiseKind::Directional:
      return NoiseModel::directional(level, DenseVector(j.at("anchor").get<std::vector<double>>()),
                                     DenseVector(j.at("direction").get<std::vector<double>>()));
  }
  return NoiseModel::none();
}

// Rebuild a convex problem from its JSON description.
inline StochasticProblem problem_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "simplex_l1inf") {
    if (j.contains("b")) {
      StochasticProblem p = make_simplex_test_problem(DenseVector(j.at("b").get<std::vector<double>>()));
      if (j.contains("seed")) p.spec["seed"] = j.at("seed");
      return p;
    }
    return make_simplex_test_problem(j.at("d").get<std::size_t>(), j.value("seed", std::uint64_t{1}));
  }
  if (kind == "quadratic_ball")
    return make_quadratic_ball_problem(j.at("d").get<std::size_t>(), j.value("radius", 1.0),
                                       j.value("noise_scale", 0.0));
  if (kind == "linear") return make_linear_problem(DenseVector(j.at("c").get<std::vector<double>>()));
  throw config_error("unknown problem kind '" + kind + "'");
}

inline SaddleProblem game_from_json(const json& j) {
  if (j.at("kind").get<std::string>() != "bilinear") throw config_error("unknown game kind");
  return make_bilinear_game(Matrix::from_rows(j.at("matrix").get<std::vector<std::vector<double>>>()));
}

}  // namespace zofl
