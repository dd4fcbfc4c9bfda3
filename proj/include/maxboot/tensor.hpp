#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace maxboot {

/// Dense order-m tensor with every axis of length dim; entries are stored
/// with the last index fastest.
struct DenseTensor {
  int order = 0;
  std::size_t dim = 0;
  std::vector<double> entries;

  DenseTensor() = default;
  DenseTensor(int order_, std::size_t dim_) : order(order_), dim(dim_) {
    if (order < 1) throw std::invalid_argument("DenseTensor: order must be >= 1");
    std::size_t size = 1;
    for (int k = 0; k < order; ++k) size *= dim;
    entries.assign(size, 0.0);
  }

  [[nodiscard]] std::size_t offset(std::span<const std::size_t> idx) const {
    std::size_t off = 0;
    for (std::size_t k : idx) off = off * dim + k;
    return off;
  }
  [[nodiscard]] double at(std::initializer_list<std::size_t> idx) const {
    return entries[offset({idx.begin(), idx.size()})];
  }

  /// Multi-index of flat position `off`.
  [[nodiscard]] std::vector<std::size_t> index_of(std::size_t off) const {
    std::vector<std::size_t> idx(static_cast<std::size_t>(order));
    for (int k = order - 1; k >= 0; --k) {
      idx[static_cast<std::size_t>(k)] = off % dim;
      off /= dim;
    }
    return idx;
  }

  [[nodiscard]] double l1_norm() const {
    double s = 0.0;
    for (double v : entries) s += std::abs(v);
    return s;
  }
  [[nodiscard]] double max_norm() const {
    double s = 0.0;
    for (double v : entries) s = std::max(s, std::abs(v));
    return s;
  }
};

/// Largest |a - b| over matching entries.
inline double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  if (a.order != b.order || a.dim != b.dim) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < a.entries.size(); ++k) d = std::max(d, std::abs(a.entries[k] - b.entries[k]));
  return d;
}

/// Accumulates weight * v^{(x)order} into t.
inline void add_outer_power(DenseTensor& t, std::span<const double> v, double weight) {
  const std::size_t p = t.dim;
  switch (t.order) {
    case 1:
      for (std::size_t a = 0; a < p; ++a) t.entries[a] += weight * v[a];
      return;
    case 2:
      for (std::size_t a = 0; a < p; ++a) {
        const double wa = weight * v[a];
        double* out = t.entries.data() + a * p;
        for (std::size_t b = 0; b < p; ++b) out[b] += wa * v[b];
      }
      return;
    case 3:
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b) {
          const double wab = weight * v[a] * v[b];
          double* out = t.entries.data() + (a * p + b) * p;
          for (std::size_t c = 0; c < p; ++c) out[c] += wab * v[c];
        }
      return;
    case 4:
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b)
          for (std::size_t c = 0; c < p; ++c) {
            const double wabc = weight * v[a] * v[b] * v[c];
            double* out = t.entries.data() + ((a * p + b) * p + c) * p;
            for (std::size_t d = 0; d < p; ++d) out[d] += wabc * v[d];
          }
      return;
    default:
      throw std::invalid_argument("add_outer_power: order must be 1..4");
  }
}

}  // namespace maxboot
