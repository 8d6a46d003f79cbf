#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mars/tensor.hpp"

namespace mars {

struct RidgeOptions {
  double lambda = 1e-6;
  /// Append an unregularized constant-1 column.
  bool bias = true;
  /// z-score each feature with training statistics before the solve.
  bool standardize = false;
};

/// Linear classifier on reservoir features, the only trained part of the models.
struct RidgeReadout {
  MatrixXdRM weights;  // [classes x (features + bias)]
  double lambda = 1e-6;
  bool bias = true;
  std::size_t num_classes = 0;
  std::vector<double> feature_mean;  // empty unless standardized
  std::vector<double> feature_scale;

  std::size_t feature_dim() const {
    return static_cast<std::size_t>(weights.cols()) - (bias ? 1 : 0);
  }
  /// Number of learned scalars (the full weight matrix including bias column).
  std::size_t trainable_parameters() const { return static_cast<std::size_t>(weights.size()); }
};

/// Solves (H^T H + lambda I') W^T = H^T Y with one-hot Y, where I' leaves the bias
/// column unregularized, by Cholesky on the Gram matrix. Throws NumericalError for a
/// singular system (advise lambda > 0).
RidgeReadout fit_ridge(const MatrixXdRM& features, std::span<const int> labels,
                       std::size_t num_classes, const RidgeOptions& options = {});

MatrixXdRM decision_scores(const RidgeReadout& readout, const MatrixXdRM& features);

/// Argmax of the scores; ties go to the lowest class index.
std::vector<int> predict(const RidgeReadout& readout, const MatrixXdRM& features);

std::vector<int> argmax_rows(const MatrixXdRM& scores);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

}  // namespace mars
