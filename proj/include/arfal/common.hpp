#ifndef ARFAL_COMMON_HPP
#define ARFAL_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace arfal {

// Error taxonomy. Structural errors are interface/shape violations detected
// before any numerics run; the others name the phase that failed.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StructuralError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& what, std::size_t pos)
      : Error(what + " (at position " + std::to_string(pos) + ")"), position(pos) {}
  std::size_t position;
};

struct HorizonError : Error {
  using Error::Error;
};

struct SingularFitError : Error {
  using Error::Error;
};

struct DivergenceError : Error {
  using Error::Error;
};

struct ModelExecutionError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Seeded random source with fully specified output. mt19937_64 is seeded
// directly; uniform and gaussian draws are derived here rather than through
// std::*_distribution, whose sequences vary between standard libraries.
// Reports must be byte-identical across reruns of the same seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  // Standard normal via Marsaglia polar; one spare cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline bool nearly_integer(double x, double tol = 1e-9) {
  return std::abs(x - std::llround(x)) <= tol * std::max(1.0, std::abs(x));
}

}  // namespace arfal

#endif  // ARFAL_COMMON_HPP
