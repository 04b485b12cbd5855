#include "sdm/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sdm/error.hpp"

namespace sdm {

Matrix Matrix::filled(int r, int c, double v) {
    Matrix m(r, c);
    std::fill(m.data.begin(), m.data.end(), v);
    return m;
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::row_vector(const std::vector<double>& v) {
    Matrix m(1, static_cast<int>(v.size()));
    m.data = v;
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

static std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: " + shape_str(a) + " by " + shape_str(b));
    }
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
        double* crow = &c.data[static_cast<size_t>(i) * c.cols];
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
            for (int j = 0; j < b.cols; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < a.cols; ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("add: " + shape_str(a) + " vs " + shape_str(b));
    Matrix c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("sub: " + shape_str(a) + " vs " + shape_str(b));
    Matrix c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("hadamard: " + shape_str(a) + " vs " + shape_str(b));
    Matrix c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.data) v *= s;
    return c;
}

Matrix softmax_rows(const Matrix& a) {
    Matrix p(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < a.cols; ++j) m = std::max(m, a(i, j));
        double z = 0.0;
        for (int j = 0; j < a.cols; ++j) {
            const double w = std::exp(a(i, j) - m);
            p(i, j) = w;
            z += w;
        }
        for (int j = 0; j < a.cols; ++j) p(i, j) /= z;
    }
    return p;
}

Matrix softmax_rows_masked(const Matrix& a, const Matrix& mask) {
    if (!a.same_shape(mask)) {
        throw ShapeError("softmax_rows_masked: " + shape_str(a) + " vs mask " + shape_str(mask));
    }
    Matrix p(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (int j = 0; j < a.cols; ++j) {
            if (mask(i, j) != 0.0) {
                m = std::max(m, a(i, j));
                any = true;
            }
        }
        if (!any) throw ContractError("softmax_rows_masked: fully masked row " + std::to_string(i));
        double z = 0.0;
        for (int j = 0; j < a.cols; ++j) {
            if (mask(i, j) != 0.0) {
                const double w = std::exp(a(i, j) - m);
                p(i, j) = w;
                z += w;
            }
        }
        for (int j = 0; j < a.cols; ++j) {
            if (mask(i, j) != 0.0) p(i, j) /= z;
        }
    }
    return p;
}

Matrix concat_rows(const Matrix& top, const Matrix& bottom) {
    if (top.empty()) return bottom;
    if (bottom.empty()) return top;
    if (top.cols != bottom.cols) {
        throw ShapeError("concat_rows: " + shape_str(top) + " over " + shape_str(bottom));
    }
    Matrix c(top.rows + bottom.rows, top.cols);
    std::copy(top.data.begin(), top.data.end(), c.data.begin());
    std::copy(bottom.data.begin(), bottom.data.end(), c.data.begin() + top.data.size());
    return c;
}

Matrix concat_cols(const Matrix& left, const Matrix& right) {
    if (left.empty()) return right;
    if (right.empty()) return left;
    if (left.rows != right.rows) {
        throw ShapeError("concat_cols: " + shape_str(left) + " beside " + shape_str(right));
    }
    Matrix c(left.rows, left.cols + right.cols);
    for (int i = 0; i < c.rows; ++i) {
        for (int j = 0; j < left.cols; ++j) c(i, j) = left(i, j);
        for (int j = 0; j < right.cols; ++j) c(i, left.cols + j) = right(i, j);
    }
    return c;
}

Matrix slice_rows(const Matrix& a, int r0, int r1) {
    if (r0 < 0 || r1 > a.rows || r0 >= r1) throw ShapeError("slice_rows: bad range");
    Matrix c(r1 - r0, a.cols);
    std::copy(a.data.begin() + static_cast<size_t>(r0) * a.cols,
              a.data.begin() + static_cast<size_t>(r1) * a.cols, c.data.begin());
    return c;
}

Matrix slice_cols(const Matrix& a, int c0, int c1) {
    if (c0 < 0 || c1 > a.cols || c0 >= c1) throw ShapeError("slice_cols: bad range");
    Matrix c(a.rows, c1 - c0);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = c0; j < c1; ++j) c(i, j - c0) = a(i, j);
    }
    return c;
}

double sum_all(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v;
    return s;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::abs(v));
    return m;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

}  // namespace sdm
