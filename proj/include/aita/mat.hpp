#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace aita {

using Vec = std::vector<double>;

// Dense row-major matrix. All model parameters and activations use this;
// checkpoints narrow to float32 on disk.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

    double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }

    std::size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

inline Vec mat_row_copy(const Mat& m, int r) {
    return Vec(m.row(r), m.row(r) + m.cols);
}

} // namespace aita
