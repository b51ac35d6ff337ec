#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "wsindy/core_data.hpp"

namespace testing_support {

// Small seeded generator for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
    bool coin() { return integer(0, 1) == 1; }

    Eigen::MatrixXd matrix(int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < rows; ++i) m(i, j) = normal();
        return m;
    }
    Eigen::VectorXd vector(int n) { return matrix(n, 1).col(0); }

    // Sparse vector with entries of magnitude in [lo, hi] on a random support.
    Eigen::VectorXd sparse_vector(int n, int nnz, double lo, double hi) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), eng_);
        for (int k = 0; k < nnz; ++k) w(idx[k]) = (coin() ? 1.0 : -1.0) * uniform(lo, hi);
        return w;
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

// Dataset on a grid with values from f(point coordinates) for a scalar state.
template <class F>
wsindy::Dataset scalar_dataset(const wsindy::Grid& grid, F f) {
    wsindy::Dataset d;
    d.grid = grid;
    d.state_dim = 1;
    d.values.resize(grid.num_points());
    const auto strides = grid.strides();
    std::vector<double> x(grid.dims());
    for (std::size_t p = 0; p < grid.num_points(); ++p) {
        for (std::size_t q = 0; q < grid.dims(); ++q) x[q] = grid.coordinate(q, (p / strides[q]) % grid.counts[q]);
        d.values[p] = f(x);
    }
    return d;
}

inline double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace testing_support
