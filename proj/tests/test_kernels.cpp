#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aita/kernels.hpp"
#include "aita/rng.hpp"

using namespace aita;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
    Mat m(r, c);
    for (double& v : m.a) v = rng.uniform(-1.0, 1.0);
    return m;
}

bool bitwise_equal(const Mat& a, const Mat& b) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.a[i] != b.a[i]) return false;
    return true;
}

} // namespace

TEST_CASE("matmul matches a hand example") {
    Mat A(2, 3), B(3, 2);
    A.a = {1, 2, 3, 4, 5, 6};
    B.a = {7, 8, 9, 10, 11, 12};
    Mat C;
    kernels::matmul(A, B, C);
    CHECK(C.rows == 2);
    CHECK(C.cols == 2);
    CHECK(C(0, 0) == doctest::Approx(58));
    CHECK(C(0, 1) == doctest::Approx(64));
    CHECK(C(1, 0) == doctest::Approx(139));
    CHECK(C(1, 1) == doctest::Approx(154));
}

TEST_CASE("parallel kernels are bitwise equal to the serial reference") {
    Rng rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 17 + 40 * trial, k = 23 + 30 * trial, m = 11 + 50 * trial;
        Mat A = random_mat(n, k, rng);
        Mat B = random_mat(k, m, rng);
        Mat Bt = random_mat(m, k, rng);
        Mat An = random_mat(n, k, rng);

        Mat c1, c2;
        kernels::matmul(A, B, c1);
        kernels::ref::matmul(A, B, c2);
        CHECK(bitwise_equal(c1, c2));

        kernels::matmul_nt(A, Bt, c1);
        kernels::ref::matmul_nt(A, Bt, c2);
        CHECK(bitwise_equal(c1, c2));

        kernels::matmul_tn(A, An, c1);
        kernels::ref::matmul_tn(A, An, c2);
        CHECK(bitwise_equal(c1, c2));

        Vec x(k);
        for (double& v : x) v = rng.uniform(-1, 1);
        Vec y1, y2;
        kernels::matvec(A, x, y1);
        kernels::ref::matvec(A, x, y2);
        CHECK(y1 == y2);

        Vec xr(n);
        for (double& v : xr) v = rng.uniform(-1, 1);
        kernels::matvec_t(A, xr, y1);
        kernels::ref::matvec_t(A, xr, y2);
        CHECK(y1 == y2);

        Mat S1 = random_mat(n, m, rng);
        Mat S2 = S1;
        kernels::softmax_rows(S1);
        kernels::ref::softmax_rows(S2);
        CHECK(bitwise_equal(S1, S2));
    }
}

TEST_CASE("transpose variants agree with explicit transposition") {
    Rng rng(7);
    Mat A = random_mat(5, 4, rng);
    Mat B = random_mat(6, 4, rng);
    Mat At(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) At(j, i) = A(i, j);
    Mat Bt(B.cols, B.rows);
    for (int i = 0; i < B.rows; ++i)
        for (int j = 0; j < B.cols; ++j) Bt(j, i) = B(i, j);

    Mat r1, r2;
    kernels::matmul_nt(A, B, r1); // A * B^T
    kernels::matmul(A, Bt, r2);
    for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1.a[i] == doctest::Approx(r2.a[i]));

    Mat C = random_mat(5, 3, rng);
    kernels::matmul_tn(A, C, r1); // A^T * C
    kernels::matmul(At, C, r2);
    for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1.a[i] == doctest::Approx(r2.a[i]));
}

TEST_CASE("softmax rows are stable distributions") {
    Mat X(2, 3);
    X.a = {1000.0, 1001.0, 1002.0, -5.0, 0.0, 5.0};
    kernels::softmax_rows(X);
    for (int i = 0; i < 2; ++i) {
        double s = 0;
        for (int j = 0; j < 3; ++j) {
            CHECK(X(i, j) >= 0.0);
            s += X(i, j);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}
