#pragma once

#include <vector>

namespace sdm {

// Dense row-major matrix of doubles. Values are immutable by convention once
// a matrix has been handed to another component; all library operations
// return fresh matrices.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    static Matrix zeros(int r, int c) { return Matrix(r, c); }
    static Matrix filled(int r, int c, double v);
    static Matrix identity(int n);
    static Matrix row_vector(const std::vector<double>& v);

    double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool all_finite() const;
};

bool operator==(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// Row-stable softmax: per-row max subtraction, each row sums to 1.
Matrix softmax_rows(const Matrix& a);
// Masked variant: entries with mask == 0 get weight exactly 0 and never enter
// the max/normalizer. Every row must have at least one unmasked entry.
Matrix softmax_rows_masked(const Matrix& a, const Matrix& mask);

Matrix concat_rows(const Matrix& top, const Matrix& bottom);
Matrix concat_cols(const Matrix& left, const Matrix& right);
Matrix slice_rows(const Matrix& a, int r0, int r1);
Matrix slice_cols(const Matrix& a, int c0, int c1);

double sum_all(const Matrix& a);
double max_abs(const Matrix& a);
double frobenius_norm(const Matrix& a);

}  // namespace sdm
