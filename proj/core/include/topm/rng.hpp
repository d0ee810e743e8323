#pragma once

// Counter-based random streams. Every value is a pure function of
// (key, counter), so identical (seed, macro, alternative, draw-index)
// tuples produce identical draws no matter how work is scheduled across
// threads. The mixing function is the SplitMix64 finalizer.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace topm::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds an arbitrary list of ids into a stream key. Used to carve
// independent streams out of one experiment seed, e.g.
// derive_key(seed, tag, macro, alternative).
template <class... Ids>
constexpr std::uint64_t derive_key(std::uint64_t seed, Ids... ids) noexcept {
  std::uint64_t k = mix64(seed + kGolden);
  ((k = mix64(k ^ (static_cast<std::uint64_t>(ids) + kGolden))), ...);
  return k;
}

// Stream tags so different purposes never share a stream.
enum StreamTag : std::uint64_t {
  kTagObservation = 1,
  kTagTrueMeans = 2,
  kTagPolicy = 3,
  kTagPosteriorMc = 4,
  kTagTruth = 5,
  kTagTest = 6,
};

inline std::uint64_t word_at(std::uint64_t key, std::uint64_t ctr) noexcept {
  return mix64(key + ctr * kGolden);
}

// Uniform in the open interval (0,1); never returns an endpoint.
inline double u01_at(std::uint64_t key, std::uint64_t ctr) noexcept {
  return (static_cast<double>(word_at(key, ctr) >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller; consumes counters 2n and 2n+1.
inline double normal_at(std::uint64_t key, std::uint64_t n) noexcept {
  const double u1 = u01_at(key, 2 * n);
  const double u2 = u01_at(key, 2 * n + 1);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

// Stateful cursor over one counter stream, for consumers that need a
// variable number of draws (Monte Carlo loops, simulations).
class Sequence {
 public:
  explicit Sequence(std::uint64_t key) : key_(key) {}

  double u01() { return u01_at(key_, cursor_++); }

  double normal() {
    const double u1 = u01();
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double lognormal(double mu_log, double sd_log) {
    return std::exp(mu_log + sd_log * normal());
  }

  // Uniform integer in [0, n), n >= 1.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t w = word_at(key_, cursor_++);
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(w) * n) >> 64);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t cursor_ = 0;
};

}  // namespace topm::rng
