#include "aita/kernels.hpp"

#include <cassert>
#include <cmath>

namespace aita::kernels {

namespace {
// Below this many multiply-adds the OpenMP fork costs more than it saves;
// the small path must not touch the OpenMP runtime at all, since these
// kernels also run inside outer parallel fan-outs.
constexpr long kParallelFlops = 1 << 15;
} // namespace

double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

namespace {

inline void matmul_row_range(const Mat& A, const Mat& B, Mat& C, int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
        const double* arow = A.row(i);
        double* crow = C.row(i);
        for (int k = 0; k < A.cols; ++k) {
            const double aik = arow[k];
            const double* brow = B.row(k);
            for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
        }
    }
}

inline void matmul_nt_row_range(const Mat& A, const Mat& B, Mat& C, int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
        const double* arow = A.row(i);
        double* crow = C.row(i);
        for (int j = 0; j < B.rows; ++j) crow[j] = dot(arow, B.row(j), A.cols);
    }
}

inline void matmul_tn_row_range(const Mat& A, const Mat& B, Mat& C, int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
        double* crow = C.row(i);
        for (int k = 0; k < A.rows; ++k) {
            const double aki = A(k, i);
            const double* brow = B.row(k);
            for (int j = 0; j < B.cols; ++j) crow[j] += aki * brow[j];
        }
    }
}

inline void softmax_row(double* r, int n) {
    double mx = r[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, r[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
        r[j] = std::exp(r[j] - mx);
        z += r[j];
    }
    for (int j = 0; j < n; ++j) r[j] /= z;
}

} // namespace

void matmul(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.rows);
    C = Mat(A.rows, B.cols);
    const long work = static_cast<long>(A.rows) * A.cols * B.cols;
    if (work > kParallelFlops) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < A.rows; ++i) matmul_row_range(A, B, C, i, i + 1);
    } else {
        matmul_row_range(A, B, C, 0, A.rows);
    }
}

void matmul_nt(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.cols);
    C = Mat(A.rows, B.rows);
    const long work = static_cast<long>(A.rows) * A.cols * B.rows;
    if (work > kParallelFlops) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < A.rows; ++i) matmul_nt_row_range(A, B, C, i, i + 1);
    } else {
        matmul_nt_row_range(A, B, C, 0, A.rows);
    }
}

void matmul_tn(const Mat& A, const Mat& B, Mat& C) {
    assert(A.rows == B.rows);
    C = Mat(A.cols, B.cols);
    const long work = static_cast<long>(A.rows) * A.cols * B.cols;
    if (work > kParallelFlops) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < A.cols; ++i) matmul_tn_row_range(A, B, C, i, i + 1);
    } else {
        matmul_tn_row_range(A, B, C, 0, A.cols);
    }
}

void matvec(const Mat& A, const Vec& x, Vec& y) {
    assert(static_cast<int>(x.size()) == A.cols);
    y.assign(A.rows, 0.0);
    const long work = static_cast<long>(A.rows) * A.cols;
    if (work > kParallelFlops) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < A.rows; ++i) y[i] = dot(A.row(i), x.data(), A.cols);
    } else {
        for (int i = 0; i < A.rows; ++i) y[i] = dot(A.row(i), x.data(), A.cols);
    }
}

void matvec_t(const Mat& A, const Vec& x, Vec& y) {
    assert(static_cast<int>(x.size()) == A.rows);
    y.assign(A.cols, 0.0);
    const long work = static_cast<long>(A.rows) * A.cols;
    if (work > kParallelFlops) {
#pragma omp parallel for schedule(static)
        for (int j = 0; j < A.cols; ++j) {
            double s = 0.0;
            for (int i = 0; i < A.rows; ++i) s += A(i, j) * x[i];
            y[j] = s;
        }
    } else {
        for (int j = 0; j < A.cols; ++j) {
            double s = 0.0;
            for (int i = 0; i < A.rows; ++i) s += A(i, j) * x[i];
            y[j] = s;
        }
    }
}

void softmax_rows(Mat& X) {
    const long work = static_cast<long>(X.rows) * X.cols;
    if (work > kParallelFlops) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < X.rows; ++i) softmax_row(X.row(i), X.cols);
    } else {
        for (int i = 0; i < X.rows; ++i) softmax_row(X.row(i), X.cols);
    }
}

Vec softmax(const Vec& x) {
    Vec p = x;
    softmax_row(p.data(), static_cast<int>(p.size()));
    return p;
}

namespace ref {

void matmul(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.rows);
    C = Mat(A.rows, B.cols);
    matmul_row_range(A, B, C, 0, A.rows);
}

void matmul_nt(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.cols);
    C = Mat(A.rows, B.rows);
    matmul_nt_row_range(A, B, C, 0, A.rows);
}

void matmul_tn(const Mat& A, const Mat& B, Mat& C) {
    assert(A.rows == B.rows);
    C = Mat(A.cols, B.cols);
    matmul_tn_row_range(A, B, C, 0, A.cols);
}

void matvec(const Mat& A, const Vec& x, Vec& y) {
    y.assign(A.rows, 0.0);
    for (int i = 0; i < A.rows; ++i) y[i] = dot(A.row(i), x.data(), A.cols);
}

void matvec_t(const Mat& A, const Vec& x, Vec& y) {
    y.assign(A.cols, 0.0);
    for (int j = 0; j < A.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < A.rows; ++i) s += A(i, j) * x[i];
        y[j] = s;
    }
}

void softmax_rows(Mat& X) {
    for (int i = 0; i < X.rows; ++i) softmax_row(X.row(i), X.cols);
}

} // namespace ref

} // namespace aita::kernels
