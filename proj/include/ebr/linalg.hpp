#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace ebr {

// Row-major dense matrix of doubles; the training-time numeric type.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {v.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {v.data() + r * cols, cols}; }

  void zero() { std::fill(v.begin(), v.end(), 0.0); }
  bool operator==(const Mat&) const = default;
};

// C = A * B
Mat matmul(const Mat& a, const Mat& b);
// C = A * B^T
Mat matmul_bt(const Mat& a, const Mat& b);
// C += A^T * B
void add_matmul_at(const Mat& a, const Mat& b, Mat& c);

// y = W x + b for a single vector; W is (out x in), b has out entries.
void affine(const Mat& w, std::span<const double> b, std::span<const double> x, std::span<double> y);

// Adds bias (1 x cols) to every row.
void add_row_bias(Mat& m, std::span<const double> bias);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace ebr
