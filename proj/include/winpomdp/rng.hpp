#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace winpomdp {

// Deterministic seeded RNG. Sampling primitives are hand-rolled on top of
// std::mt19937_64 so that draws do not depend on the standard library's
// unspecified distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Index sampled from an (unnormalized-tolerant) probability vector.
    int categorical(std::span<const double> probs) {
        double total = 0.0;
        for (double p : probs) total += p;
        const double u = uniform01() * total;
        double cum = 0.0;
        int last_positive = 0;
        for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
            if (probs[i] > 0.0) last_positive = i;
            cum += probs[i];
            if (u < cum) return probs[i] > 0.0 ? i : last_positive;
        }
        return last_positive;
    }

    // Symmetric Dirichlet(1) draw of the given dimension.
    std::vector<double> dirichlet_uniform(int n) {
        std::vector<double> row(static_cast<std::size_t>(n));
        double total = 0.0;
        for (double& v : row) {
            double u;
            do {
                u = uniform01();
            } while (u <= 0.0);
            v = -std::log(u);
            total += v;
        }
        for (double& v : row) v /= total;
        return row;
    }

private:
    std::mt19937_64 engine_;
};

// SplitMix64 step, used to derive independent seed streams.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t s = mix_seed(base ^ 0x6a09e667f3bcc908ULL);
    s = mix_seed(s ^ a);
    s = mix_seed(s ^ b);
    s = mix_seed(s ^ c);
    return s;
}

}  // namespace winpomdp
