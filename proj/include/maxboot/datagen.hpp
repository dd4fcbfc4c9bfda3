#pragma once

// Gaussian-copula data with gamma marginals.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "maxboot/distributions.hpp"
#include "maxboot/rng.hpp"

namespace maxboot {

enum class CopulaStructure { Equicorrelated, AR1 };

struct CopulaSpec {
  CopulaStructure structure = CopulaStructure::AR1;
  double rho = 0.0;
  double shape_alpha = 1.0;

  void validate() const {
    if (!(rho >= 0.0 && rho < 1.0)) {
      throw std::invalid_argument("copula rho must lie in [0, 1), got " + std::to_string(rho));
    }
    detail::check_shape(shape_alpha);
  }
};

/// Row-major n x p matrix of independent rows.
class DataMatrix {
 public:
  DataMatrix(std::size_t n, std::size_t p, std::vector<double> values,
             std::optional<std::vector<double>> known_mean = std::nullopt)
      : n_(n), p_(p), values_(std::move(values)), known_mean_(std::move(known_mean)) {
    if (n_ < 1 || p_ < 1) throw std::invalid_argument("DataMatrix needs n >= 1 and p >= 1");
    if (values_.size() != n_ * p_) {
      throw std::invalid_argument("DataMatrix: expected " + std::to_string(n_ * p_) +
                                  " values, got " + std::to_string(values_.size()));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw std::invalid_argument("DataMatrix entries must be finite");
    }
    if (known_mean_ && known_mean_->size() != p_) {
      throw std::invalid_argument("DataMatrix: known_mean must have length p");
    }
  }

  [[nodiscard]] std::size_t n() const { return n_; }
  [[nodiscard]] std::size_t p() const { return p_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * p_, p_};
  }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return values_[i * p_ + j]; }
  [[nodiscard]] const std::optional<std::vector<double>>& known_mean() const { return known_mean_; }

  [[nodiscard]] std::vector<double> column_means() const {
    std::vector<double> mean(p_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto r = row(i);
      for (std::size_t j = 0; j < p_; ++j) mean[j] += r[j];
    }
    for (double& m : mean) m /= static_cast<double>(n_);
    return mean;
  }

 private:
  std::size_t n_;
  std::size_t p_;
  std::vector<double> values_;
  std::optional<std::vector<double>> known_mean_;
};

/// The latent N(0, Sigma) rows behind `sample_gaussian_copula` (same stream).
inline DataMatrix sample_gaussian_latent(const CopulaSpec& spec, std::size_t n, std::size_t p,
                                         SeedSpec seed) {
  spec.validate();
  if (n < 1 || p < 1) throw std::invalid_argument("sample_gaussian_copula: n and p must be >= 1");
  Stream rng(seed);
  std::vector<double> y(n * p);
  const double rho = spec.rho;
  if (spec.structure == CopulaStructure::Equicorrelated) {
    const double common = std::sqrt(rho);
    const double own = std::sqrt(1.0 - rho);
    for (std::size_t i = 0; i < n; ++i) {
      const double z0 = rng.normal();
      double* out = y.data() + i * p;
      for (std::size_t j = 0; j < p; ++j) out[j] = common * z0 + own * rng.normal();
    }
  } else {
    const double innovation = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < n; ++i) {
      double* out = y.data() + i * p;
      out[0] = rng.normal();
      for (std::size_t j = 1; j < p; ++j) out[j] = rho * out[j - 1] + innovation * rng.normal();
    }
  }
  return DataMatrix(n, p, std::move(y));
}

/// Rows X_i with X_ij = F^{-1}(Phi(Y_ij)), F = gamma(shape_alpha, 1),
/// Y_i ~ N(0, Sigma). known_mean is set to shape_alpha in every column.
inline DataMatrix sample_gaussian_copula(const CopulaSpec& spec, std::size_t n, std::size_t p,
                                         SeedSpec seed) {
  const DataMatrix latent = sample_gaussian_latent(spec, n, p, seed);
  std::vector<double> x(n * p);
  const auto y = latent.values();
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = gamma_quantile_of_normal(y[k], spec.shape_alpha);
  return DataMatrix(n, p, std::move(x), std::vector<double>(p, spec.shape_alpha));
}

}  // namespace maxboot
