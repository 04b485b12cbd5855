#include "sdm/rope.hpp"

#include <cmath>
#include <string>

#include "sdm/error.hpp"

namespace sdm {

static Matrix rope_apply(const Matrix& x, const std::vector<int64_t>& positions,
                         const RopeParams& params, double sign) {
    if (params.head_dim <= 0 || params.head_dim % 2 != 0) {
        throw ConfigError("rope: head_dim must be positive and even, got " +
                          std::to_string(params.head_dim));
    }
    if (x.cols % params.head_dim != 0) {
        throw ShapeError("rope: cols " + std::to_string(x.cols) +
                         " not a multiple of head_dim " + std::to_string(params.head_dim));
    }
    if (x.rows != static_cast<int>(positions.size())) {
        throw ShapeError("rope: rows " + std::to_string(x.rows) + " vs positions " +
                         std::to_string(positions.size()));
    }
    const int d = params.head_dim;
    const int n_heads = x.cols / d;
    Matrix out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double pos = static_cast<double>(positions[static_cast<size_t>(i)]);
        for (int p = 0; p < d / 2; ++p) {
            const double freq = std::pow(params.base, -2.0 * p / d);
            const double angle = sign * pos * freq;
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            for (int h = 0; h < n_heads; ++h) {
                const int j = h * d + 2 * p;
                const double x0 = x(i, j);
                const double x1 = x(i, j + 1);
                out(i, j) = x0 * c - x1 * s;
                out(i, j + 1) = x0 * s + x1 * c;
            }
        }
    }
    return out;
}

Matrix rope_rotate(const Matrix& x, const std::vector<int64_t>& positions, const RopeParams& params) {
    return rope_apply(x, positions, params, 1.0);
}

Matrix rope_rotate_inverse(const Matrix& x, const std::vector<int64_t>& positions,
                           const RopeParams& params) {
    return rope_apply(x, positions, params, -1.0);
}

}  // namespace sdm
