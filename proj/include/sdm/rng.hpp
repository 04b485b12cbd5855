#pragma once

#include <cstdint>
#include <string_view>

#include "sdm/matrix.hpp"

namespace sdm {

// Counter-based deterministic RNG (splitmix64 core). Cheap to seed, so every
// stream/chunk gets its own independently derived instance; identical seeds
// give bit-identical draw sequences on any platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();
    double uniform();  // [0, 1)
    double normal();   // standard normal, Box-Muller
    int uniform_int(int n);  // [0, n)
    double uniform_range(double lo, double hi);

    Matrix normal_matrix(int rows, int cols);

    // Derives an independent child generator; advances this one by one draw.
    Rng split();

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Seed mixing for named sub-streams and per-chunk counters.
uint64_t mix_seed(uint64_t a, uint64_t b);
uint64_t stream_seed(uint64_t root, std::string_view name);

}  // namespace sdm
