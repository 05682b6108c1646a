#include "ebr/kernels.hpp"

#include <cassert>
#include <cstdint>
#include <limits>

namespace ebr::kernels::omp {

void dot_rows(std::span<const float> query, std::span<const float> rows, std::size_t dim,
              std::span<double> out) {
  assert(query.size() == dim);
  const auto n = static_cast<std::int64_t>(out.size());
  assert(rows.size() == out.size() * dim);
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::int64_t r = 0; r < n; ++r) {
    out[r] = clamp_unit(dot(query.data(), rows.data() + r * dim, dim));
  }
}

void gram(std::span<const float> rows, std::size_t dim, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(dim == 0 ? 0 : rows.size() / dim);
  assert(out.size() == static_cast<std::size_t>(n * n));
  // Rows of the upper triangle shrink; dynamic scheduling balances them.
#pragma omp parallel for schedule(dynamic, 16) if (n > 128)
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i; j < n; ++j) {
      const double s = clamp_unit(dot(rows.data() + i * dim, rows.data() + j * dim, dim));
      out[i * n + j] = s;
      out[j * n + i] = s;
    }
  }
}

void assign_nearest(std::span<const float> rows, std::span<const float> centroids, std::size_t dim,
                    std::span<std::uint32_t> assignment, std::span<double> best) {
  const auto n = static_cast<std::int64_t>(assignment.size());
  const std::size_t k = centroids.size() / dim;
  assert(rows.size() == assignment.size() * dim && best.size() == assignment.size());
#pragma omp parallel for schedule(static) if (n > 1024)
  for (std::int64_t r = 0; r < n; ++r) {
    double best_sim = -std::numeric_limits<double>::infinity();
    std::uint32_t best_c = 0;
    const float* row = rows.data() + r * dim;
    for (std::size_t c = 0; c < k; ++c) {
      const double s = dot(row, centroids.data() + c * dim, dim);
      if (s > best_sim) {
        best_sim = s;
        best_c = static_cast<std::uint32_t>(c);
      }
    }
    assignment[r] = best_c;
    best[r] = best_sim;
  }
}

}  // namespace ebr::kernels::omp
