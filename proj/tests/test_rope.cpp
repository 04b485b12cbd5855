#include <doctest.h>

#include <cmath>

#include "sdm/error.hpp"
#include "sdm/rng.hpp"
#include "sdm/rope.hpp"

using namespace sdm;

TEST_CASE("position zero is the identity rotation") {
    Rng rng(stream_seed(1, "rope-zero"));
    Matrix x = rng.normal_matrix(1, 8);
    Matrix y = rope_rotate(x, {0}, RopeParams{8, 10000.0});
    CHECK(max_abs(sub(x, y)) == 0.0);
}

TEST_CASE("rotation preserves row norms") {
    Rng rng(stream_seed(2, "rope-norm"));
    RopeParams rp{8, 10000.0};
    for (int trial = 0; trial < 20; ++trial) {
        Matrix x = rng.normal_matrix(3, 16);  // two heads
        std::vector<int64_t> pos = {rng.uniform_int(1000), rng.uniform_int(1000),
                                    rng.uniform_int(1000)};
        Matrix y = rope_rotate(x, pos, rp);
        for (int i = 0; i < 3; ++i) {
            double nx = 0.0, ny = 0.0;
            for (int j = 0; j < x.cols; ++j) {
                nx += x(i, j) * x(i, j);
                ny += y(i, j) * y(i, j);
            }
            CHECK(std::abs(std::sqrt(nx) - std::sqrt(ny)) < 1e-12);
        }
    }
}

TEST_CASE("position 3 head_dim 4 matches direct trig oracle") {
    Rng rng(stream_seed(3, "rope-trig"));
    Matrix x = rng.normal_matrix(1, 4);
    Matrix y = rope_rotate(x, {3}, RopeParams{4, 10000.0});

    // pair (x0, x1) turns by 3 * 10000^0 = 3 rad; pair (x2, x3) by 3 * 10000^-0.5
    const double a0 = 3.0;
    const double a1 = 3.0 * std::pow(10000.0, -0.5);
    CHECK(std::abs(y(0, 0) - (x(0, 0) * std::cos(a0) - x(0, 1) * std::sin(a0))) < 1e-12);
    CHECK(std::abs(y(0, 1) - (x(0, 0) * std::sin(a0) + x(0, 1) * std::cos(a0))) < 1e-12);
    CHECK(std::abs(y(0, 2) - (x(0, 2) * std::cos(a1) - x(0, 3) * std::sin(a1))) < 1e-12);
    CHECK(std::abs(y(0, 3) - (x(0, 2) * std::sin(a1) + x(0, 3) * std::cos(a1))) < 1e-12);
}

TEST_CASE("odd head_dim is a config error") {
    Matrix x(1, 3);
    CHECK_THROWS_AS(rope_rotate(x, {0}, RopeParams{3, 10000.0}), ConfigError);
}

TEST_CASE("inverse rotation undoes the forward rotation") {
    Rng rng(stream_seed(4, "rope-inverse"));
    RopeParams rp{6, 10000.0};
    Matrix x = rng.normal_matrix(2, 6);
    Matrix y = rope_rotate_inverse(rope_rotate(x, {5, 9}, rp), {5, 9}, rp);
    CHECK(max_abs(sub(x, y)) < 1e-12);
}
