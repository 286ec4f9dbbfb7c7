#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace zofl {

class DenseVector {
 public:
  DenseVector() = default;

  explicit DenseVector(std::size_t d, double fill = 0.0) : v_(d, fill) {
    if (d == 0) throw config_error("vector dimension must be positive");
  }

  DenseVector(std::initializer_list<double> xs) : v_(xs) {
    if (v_.empty()) throw config_error("vector dimension must be positive");
    require_finite();
  }

  explicit DenseVector(std::vector<double> xs) : v_(std::move(xs)) {
    if (v_.empty()) throw config_error("vector dimension must be positive");
    require_finite();
  }

  std::size_t size() const noexcept { return v_.size(); }
  bool empty() const noexcept { return v_.empty(); }

  double& operator[](std::size_t i) noexcept { return v_[i]; }
  double operator[](std::size_t i) const noexcept { return v_[i]; }

  double* data() noexcept { return v_.data(); }
  const double* data() const noexcept { return v_.data(); }
  auto begin() noexcept { return v_.begin(); }
  auto end() noexcept { return v_.end(); }
  auto begin() const noexcept { return v_.begin(); }
  auto end() const noexcept { return v_.end(); }

  std::span<const double> span() const noexcept { return v_; }
  std::span<double> span() noexcept { return v_; }
  operator std::span<const double>() const noexcept { return v_; }

  const std::vector<double>& values() const noexcept { return v_; }

  DenseVector& operator+=(const DenseVector& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  DenseVector& operator-=(const DenseVector& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  DenseVector& operator*=(double a) noexcept {
    for (auto& x : v_) x *= a;
    return *this;
  }
  DenseVector& operator/=(double a) noexcept {
    for (auto& x : v_) x /= a;
    return *this;
  }

  // this += a * o
  DenseVector& axpy(double a, const DenseVector& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * o.v_[i];
    return *this;
  }

  double dot(const DenseVector& o) const {
    check_same(o);
    double s = 0.0;
    for (std::size_t i = 0; i < v_.size(); ++i) s += v_[i] * o.v_[i];
    return s;
  }

  bool all_finite() const noexcept {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
  }

  void require_finite() const {
    if (!all_finite()) throw runtime_failure("non-finite vector component");
  }

  void check_same(const DenseVector& o) const {
    if (o.v_.size() != v_.size())
      throw config_error("dimension mismatch: " + std::to_string(v_.size()) + " vs " +
                         std::to_string(o.v_.size()));
  }

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  std::vector<double> v_;
};

inline DenseVector operator+(DenseVector a, const DenseVector& b) { return a += b; }
inline DenseVector operator-(DenseVector a, const DenseVector& b) { return a -= b; }
inline DenseVector operator*(double s, DenseVector a) { return a *= s; }
inline DenseVector operator*(DenseVector a, double s) { return a *= s; }

enum class Norm { L1, L2, Linf };

inline double norm(std::span<const double> x, Norm p) {
  switch (p) {
    case Norm::L1: {
      double s = 0.0;
      for (double v : x) s += std::abs(v);
      return s;
    }
    case Norm::L2: {
      double s = 0.0;
      for (double v : x) s += v * v;
      return std::sqrt(s);
    }
    case Norm::Linf: {
      double s = 0.0;
      for (double v : x) s = std::max(s, std::abs(v));
      return s;
    }
  }
  return 0.0;
}

// Norm of the dual pair (p, q) with 1/p + 1/q = 1, p in {1, 2}.
inline Norm dual_norm(Norm p) {
  switch (p) {
    case Norm::L1: return Norm::Linf;
    case Norm::L2: return Norm::L2;
    case Norm::Linf: return Norm::L1;
  }
  return Norm::L2;
}

inline DenseVector sign_vector(const DenseVector& x) {
  DenseVector s(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) s[i] = (x[i] > 0.0) - (x[i] < 0.0);
  return s;
}

// Uniform draw from the unit sphere of the l1 or l2 norm. For p = 1 this is the
// normalized i.i.d. Laplace vector, which has the cone measure of the l1 sphere.
inline DenseVector sample_sphere(std::size_t d, Norm p, RngStream& rng) {
  if (d == 0) throw config_error("vector dimension must be positive");
  if (p == Norm::Linf) throw config_error("sphere sampling supports only l1 and l2");
  DenseVector e(d);
  for (;;) {
    if (p == Norm::L2) {
      for (std::size_t i = 0; i < d; ++i) e[i] = rng.normal();
    } else {
      for (std::size_t i = 0; i < d; ++i) e[i] = rng.laplace();
    }
    const double n = norm(e, p);
    if (n > 0.0 && std::isfinite(n)) {
      e /= n;
      return e;
    }
  }
}

inline DenseVector sample_ball(std::size_t d, Norm p, RngStream& rng) {
  DenseVector e = sample_sphere(d, p, rng);
  const double r = std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  e *= r;
  return e;
}

// ---- feasible sets ----------------------------------------------------------

struct Unconstrained {};
struct Simplex {};
struct Box {
  double lo = 0.0;
  double hi = 1.0;
};
struct L2Ball {
  double radius = 1.0;
};

using FeasibleSet = std::variant<Unconstrained, Simplex, Box, L2Ball>;

inline std::string set_name(const FeasibleSet& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Unconstrained>) return "unconstrained";
        else if constexpr (std::is_same_v<T, Simplex>) return "simplex";
        else if constexpr (std::is_same_v<T, Box>) return "box";
        else return "l2ball";
      },
      s);
}

// Euclidean projection onto the probability simplex (sort based).
inline void project_simplex_inplace(std::span<double> x) {
  const std::size_t d = x.size();
  std::vector<double> u(x.begin(), x.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    cumsum += u[k];
    const double t = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) tau = t;
  }
  for (auto& v : x) v = std::max(v - tau, 0.0);
}

inline void project_inplace(std::span<double> x, const FeasibleSet& set) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Simplex>) {
          project_simplex_inplace(x);
        } else if constexpr (std::is_same_v<T, Box>) {
          for (auto& v : x) v = std::clamp(v, s.lo, s.hi);
        } else if constexpr (std::is_same_v<T, L2Ball>) {
          const double n = norm(x, Norm::L2);
          if (n > s.radius) {
            const double f = s.radius / n;
            for (auto& v : x) v *= f;
          }
        }
      },
      set);
}

inline DenseVector project(DenseVector x, const FeasibleSet& set) {
  project_inplace(x.span(), set);
  return x;
}

inline double distance_to_set(const DenseVector& x, const FeasibleSet& set) {
  DenseVector p = project(x, set);
  p -= x;
  return norm(p, Norm::L2);
}

inline bool contains(const DenseVector& x, const FeasibleSet& set, double tol = 1e-9) {
  return distance_to_set(x, set) <= tol;
}

// Natural starting point: barycenter of the simplex, box midpoint, origin otherwise.
inline DenseVector center(const FeasibleSet& set, std::size_t d) {
  return std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Simplex>) return DenseVector(d, 1.0 / static_cast<double>(d));
        else if constexpr (std::is_same_v<T, Box>) return DenseVector(d, 0.5 * (s.lo + s.hi));
        else return DenseVector(d, 0.0);
      },
      set);
}

// l2 diameter; infinite for unconstrained sets.
inline double diameter(const FeasibleSet& set, std::size_t d) {
  return std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Simplex>) return d > 1 ? std::sqrt(2.0) : 0.0;
        else if constexpr (std::is_same_v<T, Box>) return (s.hi - s.lo) * std::sqrt(static_cast<double>(d));
        else if constexpr (std::is_same_v<T, L2Ball>) return 2.0 * s.radius;
        else return std::numeric_limits<double>::infinity();
      },
      set);
}

// ---- prox geometry -----------------------------------------------------------

enum class ProxKind { Euclidean, Entropy };

class Geometry {
 public:
  static Geometry euclidean(FeasibleSet set) { return Geometry(ProxKind::Euclidean, set); }

  // Negative entropy prox; only defined on the simplex.
  static Geometry entropy(FeasibleSet set = Simplex{}) {
    if (!std::holds_alternative<Simplex>(set))
      throw config_error("entropy geometry requires the simplex");
    return Geometry(ProxKind::Entropy, set);
  }

  ProxKind kind() const noexcept { return kind_; }
  const FeasibleSet& set() const noexcept { return set_; }

 private:
  Geometry(ProxKind k, FeasibleSet s) : kind_(k), set_(s) {}
  ProxKind kind_;
  FeasibleSet set_;
};

// argmin_z { <eta*xi, z> + V(r, z) } over the set of the geometry.
inline DenseVector prox_step(const DenseVector& r, const DenseVector& xi, double eta,
                             const Geometry& geom) {
  r.check_same(xi);
  if (geom.kind() == ProxKind::Euclidean) {
    DenseVector z = r;
    z.axpy(-eta, xi);
    project_inplace(z.span(), geom.set());
    return z;
  }
  const std::size_t d = r.size();
  std::vector<double> w(d);
  double wmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d; ++i) {
    if (!(r[i] > 0.0)) throw domain_error("entropy prox needs a strictly positive point");
    w[i] = std::log(r[i]) - eta * xi[i];
    wmax = std::max(wmax, w[i]);
  }
  double total = 0.0;
  for (auto& v : w) {
    v = std::exp(v - wmax);
    total += v;
  }
  DenseVector z(d);
  constexpr double floor = 1e-300;
  double s2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    z[i] = std::max(w[i] / total, floor);
    s2 += z[i];
  }
  z /= s2;
  return z;
}

}  // namespace zofl
