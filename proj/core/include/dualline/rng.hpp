#pragma once

#include <cmath>
#include <cstdint>

namespace dualline {

// SplitMix64. Chosen because the whole pipeline must be reproducible from
// 64-bit seeds alone; std::mt19937 + std::normal_distribution are not
// portable across standard libraries.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

// Derives an independent stream seed from (base, stream). Used to split one
// run seed into world/query/noise/token streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    SplitMix64 g(base ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    return g.next();
}

// Deterministic double-precision generator: 53-bit uniforms and Box-Muller
// normals on top of SplitMix64.
class DeterministicRng {
  public:
    explicit DeterministicRng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_.next(); }

    // Uniform in (0, 1]; never returns 0 so log() below is safe.
    double uniform01() {
        return static_cast<double>((gen_.next() >> 11) + 1) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    SplitMix64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dualline
