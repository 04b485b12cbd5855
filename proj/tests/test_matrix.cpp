#include <doctest.h>

#include <cmath>

#include "sdm/error.hpp"
#include "sdm/matrix.hpp"
#include "sdm/rng.hpp"

using namespace sdm;

TEST_CASE("matmul identity and hand arithmetic") {
    Matrix a(2, 2);
    a(0, 0) = 1;
    a(0, 1) = 2;
    a(1, 0) = 3;
    a(1, 1) = 4;
    Matrix r = matmul(Matrix::identity(2), a);
    CHECK(r == a);

    Matrix row = Matrix::row_vector({1, 2});
    Matrix col(2, 1);
    col(0, 0) = 3;
    col(1, 0) = 4;
    Matrix prod = matmul(row, col);
    CHECK(prod.rows == 1);
    CHECK(prod.cols == 1);
    CHECK(prod(0, 0) == 11.0);
}

TEST_CASE("matmul matches triple-loop oracle on random input") {
    Rng rng(stream_seed(7, "matmul-oracle"));
    Matrix a = rng.normal_matrix(5, 4);
    Matrix b = rng.normal_matrix(4, 3);
    Matrix c = matmul(a, b);

    // independent naive oracle
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
            CHECK(std::abs(c(i, j) - s) < 1e-12);
        }
    }
}

TEST_CASE("matmul dimension mismatch throws shape error") {
    Matrix a(2, 3), b(2, 3);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("softmax symmetric and stable rows") {
    Matrix a = Matrix::row_vector({0, 0});
    Matrix p = softmax_rows(a);
    CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

    Matrix big = Matrix::row_vector({1000, 0});
    Matrix q = softmax_rows(big);
    CHECK(q.all_finite());
    CHECK(q(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(q(0, 1) < 1e-300);
}

TEST_CASE("softmax matches direct exp/sum oracle") {
    Matrix a = Matrix::row_vector({1, 2, 3});
    Matrix p = softmax_rows(a);
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(p(0, j) - std::exp(1.0 + j) / z) < 1e-12);
    }
}

TEST_CASE("softmax rows sum to one and shift invariance") {
    Rng rng(stream_seed(11, "softmax-props"));
    for (int trial = 0; trial < 50; ++trial) {
        Matrix a = rng.normal_matrix(4, 7);
        Matrix p = softmax_rows(a);
        for (int i = 0; i < p.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < p.cols; ++j) s += p(i, j);
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
        const double c = rng.normal() * 10.0;
        Matrix shifted = a;
        for (int j = 0; j < a.cols; ++j) shifted(1, j) += c;
        Matrix p2 = softmax_rows(shifted);
        for (int j = 0; j < a.cols; ++j) {
            CHECK(std::abs(p2(1, j) - p(1, j)) <= 1e-12);
        }
    }
}

TEST_CASE("masked softmax puts exact zero on masked entries") {
    Matrix a = Matrix::row_vector({5, 1, 3});
    Matrix mask = Matrix::row_vector({1, 0, 1});
    Matrix p = softmax_rows_masked(a, mask);
    CHECK(p(0, 1) == 0.0);
    CHECK(std::abs(p(0, 0) + p(0, 2) - 1.0) <= 1e-12);
}

TEST_CASE("concat and slice round trips") {
    Rng rng(stream_seed(3, "concat"));
    Matrix a = rng.normal_matrix(3, 2);
    Matrix b = rng.normal_matrix(3, 4);
    Matrix c = concat_cols(a, b);
    CHECK(slice_cols(c, 0, 2) == a);
    CHECK(slice_cols(c, 2, 6) == b);

    Matrix d = rng.normal_matrix(2, 5);
    Matrix e = rng.normal_matrix(4, 5);
    Matrix f = concat_rows(d, e);
    CHECK(slice_rows(f, 0, 2) == d);
    CHECK(slice_rows(f, 2, 6) == e);
}

TEST_CASE("rng determinism and stream separation") {
    Rng a(stream_seed(42, "distill"));
    Rng b(stream_seed(42, "distill"));
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(stream_seed(42, "rollout"));
    bool any_diff = false;
    Rng d(stream_seed(42, "distill"));
    for (int i = 0; i < 10; ++i) any_diff |= (c.next_u64() != d.next_u64());
    CHECK(any_diff);
}

TEST_CASE("rng normal moments are sane") {
    Rng rng(stream_seed(5, "normal-moments"));
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}
