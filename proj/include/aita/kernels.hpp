#pragma once

#include "aita/mat.hpp"

namespace aita::kernels {

// Production kernels. Parallel loops split only over independent output rows
// and keep the per-row accumulation order identical to the serial reference,
// so results are bitwise equal to kernels::ref for any thread count.

// C = A * B
void matmul(const Mat& A, const Mat& B, Mat& C);
// C = A * B^T
void matmul_nt(const Mat& A, const Mat& B, Mat& C);
// C = A^T * B
void matmul_tn(const Mat& A, const Mat& B, Mat& C);

// y = A * x
void matvec(const Mat& A, const Vec& x, Vec& y);
// y = A^T * x
void matvec_t(const Mat& A, const Vec& x, Vec& y);

// In-place row-wise softmax with max subtraction.
void softmax_rows(Mat& X);

// Max-subtracted softmax of a vector.
Vec softmax(const Vec& x);

double dot(const double* a, const double* b, int n);

// Serial reference implementations, kept for equivalence tests and the
// kernel benchmark.
namespace ref {
void matmul(const Mat& A, const Mat& B, Mat& C);
void matmul_nt(const Mat& A, const Mat& B, Mat& C);
void matmul_tn(const Mat& A, const Mat& B, Mat& C);
void matvec(const Mat& A, const Vec& x, Vec& y);
void matvec_t(const Mat& A, const Vec& x, Vec& y);
void softmax_rows(Mat& X);
} // namespace ref

} // namespace aita::kernels
