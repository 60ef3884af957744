#pragma once

#include <cstddef>
#include <utility>

#include "rana/tensor.hpp"

namespace rana {

/// Columns are hidden-state inputs observed by a layer. The default sample
/// count used when synthesizing calibration data is 32,000.
struct CalibrationSet {
  DenseMatrix X;  // i x k
  std::size_t samples() const { return X.cols(); }
  std::size_t input_dim() const { return X.rows(); }
};

constexpr std::size_t kDefaultCalibrationSamples = 32000;

/// Activation-aware factorization of one linear layer: A has orthonormal
/// columns (left singular vectors of W*X), B = A^T W.
struct RankDecomposition {
  DenseMatrix A;               // o x D
  DenseMatrix B;               // D x i
  DenseVector singular_values; // length D, descending
  std::size_t out_dim;         // o
  std::size_t in_dim;          // i
  double discarded_energy;     // sum of sigma_j^2 beyond the materialized D

  std::size_t ranks() const { return B.rows(); }

  /// Keep only the leading r ranks. Truncating the stored factors is
  /// equivalent to re-decomposing at rank r.
  RankDecomposition truncated(std::size_t r) const;
};

/// Per-sample squared rank contributions (B x_s)_j^2.
struct ContributionStats {
  DenseMatrix contributions;  // D x k
  DenseVector mean_energy;    // length D

  std::size_t ranks() const { return contributions.rows(); }
  std::size_t samples() const { return contributions.cols(); }
};

/// keep_ranks == 0 means "materialize all ranks up to the numerical rank".
/// Singular values below 1e-12 * sigma_max are dropped.
RankDecomposition decompose(const DenseMatrix& W, const CalibrationSet& calib,
                            std::size_t keep_ranks = 0);

ContributionStats rank_contributions(const RankDecomposition& dec,
                                     const CalibrationSet& calib);

}  // namespace rana
