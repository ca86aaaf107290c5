#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace coretherm {

// Error taxonomy. The CLI maps these onto its exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };  // exit code 2
struct DataError : Error { using Error::Error; };    // exit code 3

// Model file integrity failure (truncation, bit rot, bad version field).
struct ChecksumError : DataError { using DataError::DataError; };

// The covariance system of an identification window is numerically rank
// deficient: the inputs did not excite the dynamics enough to pin a model.
struct ExcitationDeficient : Error {
  ExcitationDeficient(const std::string& msg, double cond)
      : Error(msg), cond_r(cond) {}
  double cond_r;
};

struct NumericalError : Error { using Error::Error; };

// Deterministic random source. Wraps mt19937_64 with hand-rolled draws so
// streams do not depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1).
  double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = u01();
    if (u1 < 1e-300) u1 = 1e-300;
    const double u2 = u01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  // Inclusive on both ends, rejection sampled (unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  bool bernoulli(double p) { return u01() < p; }

  // Derive an independent child stream seed.
  std::uint64_t next_seed() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace coretherm
