#include "mars/readout.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

namespace mars {
namespace {

MatrixXdRM design_matrix(const RidgeReadout& r, const MatrixXdRM& features) {
  const Eigen::Index d = features.cols();
  MatrixXdRM h(features.rows(), d + (r.bias ? 1 : 0));
  h.leftCols(d) = features;
  if (!r.feature_mean.empty()) {
    for (Eigen::Index j = 0; j < d; ++j) {
      h.col(j) = (h.col(j).array() - r.feature_mean[j]) / r.feature_scale[j];
    }
  }
  if (r.bias) h.col(d).setOnes();
  return h;
}

}  // namespace

RidgeReadout fit_ridge(const MatrixXdRM& features, std::span<const int> labels,
                       std::size_t num_classes, const RidgeOptions& options) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (n < 1) throw StructuralError("fit_ridge: need at least one sample");
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw StructuralError("fit_ridge: one label per feature row required");
  }
  if (num_classes < 2) throw StructuralError("fit_ridge: need at least two classes");
  if (!(options.lambda >= 0)) throw ConfigError("fit_ridge: lambda must be non-negative");
  if (!features.allFinite()) throw DomainError("fit_ridge: non-finite features");

  RidgeReadout r;
  r.lambda = options.lambda;
  r.bias = options.bias;
  r.num_classes = num_classes;
  if (options.standardize) {
    r.feature_mean.resize(d);
    r.feature_scale.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double mean = features.col(j).mean();
      const double var = (features.col(j).array() - mean).square().mean();
      r.feature_mean[j] = mean;
      r.feature_scale[j] = std::sqrt(var) + 1e-12;
    }
  }

  const MatrixXdRM h = design_matrix(r, features);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(num_classes));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw StructuralError("fit_ridge: label " + std::to_string(c) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
    y(i, c) = 1.0;
  }

  Eigen::MatrixXd gram = h.transpose() * h;
  gram.diagonal().head(d).array() += options.lambda;
  const Eigen::MatrixXd rhs = h.transpose() * y;

  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-15)) {
    throw NumericalError("fit_ridge: Gram matrix is singular or ill-conditioned (lambda = " +
                         std::to_string(options.lambda) + "); use lambda > 0");
  }
  r.weights = llt.solve(rhs).transpose();
  if (!r.weights.allFinite()) throw NumericalError("fit_ridge: non-finite weights");
  return r;
}

MatrixXdRM decision_scores(const RidgeReadout& r, const MatrixXdRM& features) {
  if (static_cast<std::size_t>(features.cols()) != r.feature_dim()) {
    throw StructuralError("predict: readout expects " + std::to_string(r.feature_dim()) +
                          " features, got " + std::to_string(features.cols()));
  }
  return design_matrix(r, features) * r.weights.transpose();
}

std::vector<int> argmax_rows(const MatrixXdRM& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const RidgeReadout& r, const MatrixXdRM& features) {
  return argmax_rows(decision_scores(r, features));
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw StructuralError("accuracy: prediction/label count mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace mars
