#include "ebr/linalg.hpp"

namespace ebr {

Mat matmul(const Mat& a, const Mat& b) {
  assert(a.cols == b.rows);
  Mat c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* ci = c.v.data() + i * c.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      const double* bk = b.v.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Mat matmul_bt(const Mat& a, const Mat& b) {
  assert(a.cols == b.cols);
  Mat c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) c(i, j) = dot(a.row(i), b.row(j));
  }
  return c;
}

void add_matmul_at(const Mat& a, const Mat& b, Mat& c) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* bk = b.v.data() + k * b.cols;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* ci = c.v.data() + i * c.cols;
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
    }
  }
}

void affine(const Mat& w, std::span<const double> b, std::span<const double> x, std::span<double> y) {
  assert(w.cols == x.size() && w.rows == y.size() && b.size() == y.size());
  for (std::size_t r = 0; r < w.rows; ++r) y[r] = b[r] + dot(w.row(r), x);
}

void add_row_bias(Mat& m, std::span<const double> bias) {
  assert(bias.size() == m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) += bias[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace ebr
