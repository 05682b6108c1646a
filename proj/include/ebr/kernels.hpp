#pragma once

// Data-parallel similarity kernels. Every kernel has a serial reference and an
// OpenMP variant; both produce bitwise-identical output because each output
// element is computed by the same scalar routine, only the loop is split.

#include <cstddef>
#include <cstdint>
#include <span>

namespace ebr::kernels {

// 64-bit accumulation of a float dot product. Four interleaved partial sums;
// the order is fixed so every caller sees the same rounding.
inline double dot(const float* a, const float* b, std::size_t dim) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= dim; i += 4) {
    s0 += static_cast<double>(a[i]) * b[i];
    s1 += static_cast<double>(a[i + 1]) * b[i + 1];
    s2 += static_cast<double>(a[i + 2]) * b[i + 2];
    s3 += static_cast<double>(a[i + 3]) * b[i + 3];
  }
  for (; i < dim; ++i) s0 += static_cast<double>(a[i]) * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline double clamp_unit(double x) { return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x); }

namespace serial {

// out[r] = clamp(query . rows[r]) for every row of a row-major n x dim block.
void dot_rows(std::span<const float> query, std::span<const float> rows, std::size_t dim,
              std::span<double> out);

// out[i*n + j] = clamp(rows[i] . rows[j]); symmetric, computed on the upper triangle.
void gram(std::span<const float> rows, std::size_t dim, std::span<double> out);

// For each row, the index of the centroid with maximum dot product (ties -> lower
// index) and that dot product.
void assign_nearest(std::span<const float> rows, std::span<const float> centroids, std::size_t dim,
                    std::span<std::uint32_t> assignment, std::span<double> best);

}  // namespace serial

namespace omp {

void dot_rows(std::span<const float> query, std::span<const float> rows, std::size_t dim,
              std::span<double> out);
void gram(std::span<const float> rows, std::size_t dim, std::span<double> out);
void assign_nearest(std::span<const float> rows, std::span<const float> centroids, std::size_t dim,
                    std::span<std::uint32_t> assignment, std::span<double> best);

}  // namespace omp

// Dispatch used by the library: OpenMP when compiled in, serial otherwise.
#if defined(EBR_HAVE_OPENMP)
namespace active = omp;
#else
namespace active = serial;
#endif

}  // namespace ebr::kernels
