#pragma once

#include <cstdint>
#include <vector>

#include "sdm/matrix.hpp"

namespace sdm {

// Rotary position parameters for one attention head.
struct RopeParams {
    int head_dim = 0;
    double base = 10000.0;
};

// Rotates each row of x by its position: consecutive dimension pairs
// (2i, 2i+1) turn by angle pos * base^(-2i/head_dim). Position 0 is the
// identity and every rotation preserves row norms. x may hold several heads
// side by side (cols must be a multiple of head_dim); each head block is
// rotated identically.
Matrix rope_rotate(const Matrix& x, const std::vector<int64_t>& positions, const RopeParams& params);

// Inverse rotation (angle negated); used by reverse-mode differentiation.
Matrix rope_rotate_inverse(const Matrix& x, const std::vector<int64_t>& positions, const RopeParams& params);

}  // namespace sdm
