#pragma once

// Counter-based random streams. Every (seed, worker, round, tag) tuple maps to
// an independent xoshiro256** generator, so results never depend on thread
// scheduling.

#include <array>
#include <cmath>
#include <cstdint>

namespace zofl {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept {
  std::uint64_t s = h ^ (v + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2));
  return splitmix64(s);
}

struct StreamId {
  std::uint64_t worker = 0;
  std::uint64_t round = 0;
  std::uint64_t tag = 0;
};

// Tags separating independent purposes inside one (worker, round) cell.
namespace stream_tag {
inline constexpr std::uint64_t directions = 0;
inline constexpr std::uint64_t noise = 1;
inline constexpr std::uint64_t setup = 2;
}  // namespace stream_tag

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, StreamId id = {}) : seed_(seed), id_(id) {
    std::uint64_t key = hash_combine(seed, 0x5a0f1ULL);
    key = hash_combine(key, id.worker);
    key = hash_combine(key, id.round);
    key = hash_combine(key, id.tag);
    for (auto& w : s_) w = splitmix64(key);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t next_u64() noexcept {
    ++draws_;
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Standard normal, Marsaglia polar method.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  double exponential() noexcept { return -std::log(uniform()); }

  // Standard Laplace (density exp(-|t|)/2).
  double laplace() noexcept {
    const std::uint64_t bits = next_u64();
    const double mag = -std::log((static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53);
    return (bits & 1) ? mag : -mag;
  }

  std::uint64_t draws() const noexcept { return draws_; }
  std::uint64_t seed() const noexcept { return seed_; }
  StreamId id() const noexcept { return id_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
  std::uint64_t seed_ = 0;
  StreamId id_{};
  std::uint64_t draws_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace zofl
