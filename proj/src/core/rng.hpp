#pragma once

#include <cmath>
#include <cstdint>

namespace bs {

// Counter-based generator: value(i) is the splitmix64 output stream seeded by
// mixing (seed, stream). Stateless lookups make parallel draws reproducible.
// Algorithm identifier recorded in output metadata: "splitmix64-counter-v1".
inline constexpr const char* kRngAlgorithm = "splitmix64-counter-v1";

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

class CounterRng {
  public:
    CounterRng(uint64_t seed, uint64_t stream = 0)
        : key_(detail::splitmix64(seed ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

    uint64_t next_u64() { return at(counter_++); }

    // Random access without advancing the counter.
    uint64_t at(uint64_t counter) const {
        return detail::splitmix64(key_ + counter * 0x9e3779b97f4a7c15ULL);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; consumes two draws.
    double normal() {
        const double u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1 + 1e-300));
        return r * std::cos(2.0 * M_PI * u2);
    }

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

  private:
    uint64_t key_;
    uint64_t counter_ = 0;
};

}  // namespace bs
