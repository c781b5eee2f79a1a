#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace tvreg {

// Deterministic random source. The engine is mt19937_64 (fully specified by
// the standard) and every distribution is implemented explicitly here, so a
// given seed produces the same stream on every platform and compiler.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(mix(seed)) {}

    // Independent substream: hashes (master, stream) into a fresh seed.
    static Rng substream(std::uint64_t master, std::uint64_t stream) {
        return Rng(mix(master + 0x9E3779B97F4A7C15ULL * (stream + 1)));
    }

    // Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }

    // Box-Muller, no state carried between calls.
    double normal(double mean = 0.0, double sd = 1.0) {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sd * r * std::cos(6.283185307179586477 * u2);
    }

    // Draws an index given inclusive cumulative probabilities (back() == 1).
    int categorical(const std::vector<double>& cum) {
        const double u = uniform();
        for (std::size_t i = 0; i + 1 < cum.size(); ++i)
            if (u < cum[i]) return static_cast<int>(i);
        return static_cast<int>(cum.size()) - 1;
    }

    std::uint64_t next_u64() { return eng_(); }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 eng_;
};

inline std::vector<double> cumulative(const std::vector<double>& probs) {
    std::vector<double> cum(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        cum[i] = acc;
    }
    if (!cum.empty()) cum.back() = 1.0;
    return cum;
}

}  // namespace tvreg
