#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gnmr {

// Error taxonomy; the CLI maps these onto exit codes.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derive an independent stream seed from a master seed and a purpose tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return splitmix64(seed ^ h);
}

// Deterministic 64-bit generator (splitmix-seeded xorshift) with portable
// floating-point and integer draws. std::mt19937_64 would also be
// deterministic, but the distribution adapters in libstdc++ are not pinned
// by the standard; doing the transforms by hand keeps outputs identical
// across compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // splitmix expansion avoids correlated low-entropy states
        std::uint64_t s = seed;
        for (auto& w : state_) {
            s = splitmix64(s);
            w = s;
        }
    }

    std::uint64_t next_u64() {
        // xoshiro256**
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased uniform index in [0, n)
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: n == 0");
        const std::uint64_t bound = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t x = next_u64();
        while (x >= bound) x = next_u64();
        return static_cast<std::size_t>(x % n);
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller; 1-u keeps the log argument in (0,1]
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace gnmr
