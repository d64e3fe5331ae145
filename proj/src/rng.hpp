#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include <random>

#include "error.hpp"

namespace ffinet {

// Deterministic random stream. mt19937_64 state transitions are fully
// specified by the standard; the distributions below are hand-rolled because
// std::uniform_real_distribution and friends are implementation-defined and
// would break bit-exact reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive [lo, hi]
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    check(lo <= hi, ErrKind::contract, "uniform_int: empty range");
    std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(gen_());  // full 64-bit range
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % range);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % range);
  }

  // Box-Muller, cached second value.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::string save() const {
    std::ostringstream os;
    os << gen_ << " " << (has_spare_ ? 1 : 0) << " ";
    os.precision(17);
    os << spare_;
    return os.str();
  }

  void restore(const std::string& state) {
    std::istringstream is(state);
    int spare_flag = 0;
    is >> gen_ >> spare_flag >> spare_;
    check(!is.fail(), ErrKind::format, "Rng::restore: malformed state string");
    has_spare_ = spare_flag != 0;
  }

  // splitmix64-style mixer for deriving independent child seeds.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 1 | b >> 63);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ffinet
