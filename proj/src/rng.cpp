#include "sdm/rng.hpp"

#include <cmath>

#include "sdm/error.hpp"

namespace sdm {

static uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
    // 53 random mantissa bits -> [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

int Rng::uniform_int(int n) {
    if (n <= 0) throw DomainError("uniform_int: n must be positive");
    // Toy scale: modulo bias over 2^64 is negligible for small n.
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
}

double Rng::uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

Matrix Rng::normal_matrix(int rows, int cols) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = normal();
    return m;
}

Rng Rng::split() { return Rng(next_u64()); }

uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t state = a ^ (0x2545F4914F6CDD1DULL * (b + 0x9E3779B97F4A7C15ULL));
    splitmix64(state);
    return splitmix64(state);
}

uint64_t stream_seed(uint64_t root, std::string_view name) {
    // FNV-1a over the stream name, then mixed with the root seed.
    uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return mix_seed(root, h);
}

}  // namespace sdm
