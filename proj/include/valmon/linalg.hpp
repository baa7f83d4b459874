#pragma once

// Dense linear-algebra building blocks shared by the outlier detectors, the
// shift metrics and the matching procedures.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <numeric>

#include "valmon/error.hpp"

namespace valmon {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Per-column mean and sample standard deviation; zero-spread columns get
/// scale 1 so they only get centred.
template <typename Scalar>
struct Standardizer {
  VectorX<Scalar> mean;
  VectorX<Scalar> scale;

  template <typename Derived>
  static Standardizer fit(const Eigen::MatrixBase<Derived> &data) {
    Standardizer s;
    const auto n = data.rows();
    s.mean = data.colwise().mean().transpose();
    s.scale = VectorX<Scalar>::Ones(data.cols());
    if (n > 1) {
      const MatrixX<Scalar> centered = data.rowwise() - s.mean.transpose();
      for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const Scalar sd = std::sqrt(centered.col(j).squaredNorm() / static_cast<Scalar>(n - 1));
        if (sd > Scalar(0)) s.scale(j) = sd;
      }
    }
    return s;
  }

  template <typename Derived>
  MatrixX<Scalar> apply(const Eigen::MatrixBase<Derived> &data) const {
    return (data.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
};

/// Sample covariance (n - 1 denominator); zero matrix for a single row.
template <typename Derived>
MatrixX<typename Derived::Scalar> sample_covariance(const Eigen::MatrixBase<Derived> &data) {
  using Scalar = typename Derived::Scalar;
  const auto n = data.rows();
  const MatrixX<Scalar> centered = data.rowwise() - data.colwise().mean();
  if (n < 2) return MatrixX<Scalar>::Zero(data.cols(), data.cols());
  return (centered.transpose() * centered) / static_cast<Scalar>(n - 1);
}

/// Principal components by descending variance, truncated to the smallest
/// count whose cumulative variance reaches the requested fraction.
template <typename Scalar>
class Pca {
 public:
  template <typename Derived>
  static Pca fit(const Eigen::MatrixBase<Derived> &data, double variance_fraction) {
    if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
      throw InvalidArgument("variance_fraction must lie in (0, 1]");
    if (data.rows() == 0) throw EmptyDataset("PCA on an empty matrix");

    Pca p;
    p.mean_ = data.colwise().mean().transpose();
    const MatrixX<Scalar> cov = sample_covariance(data);
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(cov);
    const auto d = cov.rows();
    // Eigen sorts ascending; flip to descending.
    p.all_variances_ = eig.eigenvalues().reverse().cwiseMax(Scalar(0));
    const MatrixX<Scalar> vectors = eig.eigenvectors().rowwise().reverse();

    const Scalar total = p.all_variances_.sum();
    const Scalar top = d > 0 ? p.all_variances_(0) : Scalar(0);
    Eigen::Index nonzero = 0;
    for (Eigen::Index i = 0; i < d; ++i)
      if (p.all_variances_(i) > std::max(Scalar(1e-12) * top, std::numeric_limits<Scalar>::min())) ++nonzero;

    Eigen::Index keep = 0;
    if (total > Scalar(0)) {
      Scalar running = 0;
      const Scalar target = static_cast<Scalar>(variance_fraction) * total * (Scalar(1) - Scalar(1e-12));
      while (keep < d) {
        running += p.all_variances_(keep);
        ++keep;
        if (running >= target) break;
      }
    }
    if (keep > nonzero) {
      keep = nonzero;
      p.rank_deficient_ = true;
    }
    p.rank_ = nonzero;
    p.components_ = vectors.leftCols(keep);
    p.variances_ = p.all_variances_.head(keep);
    return p;
  }

  Eigen::Index retained() const noexcept { return components_.cols(); }
  Eigen::Index rank() const noexcept { return rank_; }
  bool rank_deficient() const noexcept { return rank_deficient_; }
  const VectorX<Scalar> &mean() const noexcept { return mean_; }
  const MatrixX<Scalar> &components() const noexcept { return components_; }
  const VectorX<Scalar> &variances() const noexcept { return variances_; }
  const VectorX<Scalar> &all_variances() const noexcept { return all_variances_; }

  template <typename Derived>
  MatrixX<Scalar> project(const Eigen::MatrixBase<Derived> &data) const {
    check_width(data.cols());
    return (data.rowwise() - mean_.transpose()) * components_;
  }

  /// Squared Euclidean residual after projecting onto the retained
  /// components and mapping back.
  template <typename Derived>
  VectorX<Scalar> reconstruction_error(const Eigen::MatrixBase<Derived> &data) const {
    check_width(data.cols());
    const MatrixX<Scalar> centered = data.rowwise() - mean_.transpose();
    const MatrixX<Scalar> residual = centered - (centered * components_) * components_.transpose();
    return residual.rowwise().squaredNorm();
  }

  /// Squared Mahalanobis distance in component space (diagonal covariance).
  template <typename Derived>
  VectorX<Scalar> mahalanobis_squared(const Eigen::MatrixBase<Derived> &data) const {
    const MatrixX<Scalar> scores = project(data);
    if (scores.cols() == 0) return VectorX<Scalar>::Zero(data.rows());
    return (scores.array().square().rowwise() / variances_.transpose().array()).rowwise().sum();
  }

 private:
  void check_width(Eigen::Index cols) const {
    if (cols != mean_.size())
      throw DimensionMismatch("PCA fitted on " + std::to_string(mean_.size()) + " columns, got " +
                              std::to_string(cols));
  }

  VectorX<Scalar> mean_;
  MatrixX<Scalar> components_;
  VectorX<Scalar> variances_;
  VectorX<Scalar> all_variances_;
  Eigen::Index rank_ = 0;
  bool rank_deficient_ = false;
};

}  // namespace valmon
