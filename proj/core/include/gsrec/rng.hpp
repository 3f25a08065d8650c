#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace gsrec {

/// splitmix64 generator. Self-contained so streams are reproducible across
/// platforms and standard-library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    uint32_t uniform_int(uint32_t n) {
        return n == 0 ? 0 : static_cast<uint32_t>(next_u64() % n);
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = next_u64() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Stable mix for deriving independent substream seeds.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    Rng r(seed ^ (0x517cc1b727220a95ULL * (stream + 1)));
    return r.next_u64();
}

}  // namespace gsrec
