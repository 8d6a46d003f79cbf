#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>

#include "mars/models.hpp"

namespace mars {

void EsnConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0) {
    throw StructuralError("esn config: input_dim and hidden_dim must be >= 1");
  }
  if (!(leak > 0 && leak <= 1)) throw ConfigError("esn config: leak must lie in (0, 1]");
  if (!(spectral_radius > 0)) throw ConfigError("esn config: spectral radius must be positive");
  if (!(input_scaling >= 0) || !(bias_scaling >= 0)) {
    throw ConfigError("esn config: scalings must be non-negative");
  }
}

double estimate_spectral_radius(const MatrixXdRM& m, std::uint64_t seed,
                                std::size_t max_iterations, double tolerance) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw StructuralError("estimate_spectral_radius: matrix must be square and non-empty");
  }
  const Eigen::Index n = m.rows();
  // A block of vectors captures complex-conjugate dominant pairs, which a single
  // power-iteration vector cannot resolve.
  const Eigen::Index k = std::min<Eigen::Index>(8, n);
  Eigen::MatrixXd q(n, k);
  auto rng = CounterRng::substream(seed, CounterRng::kPowerIteration);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.normal();
  q = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() * Eigen::MatrixXd::Identity(n, k);

  double previous = -1;
  int settled = 0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const Eigen::MatrixXd z = m * q;
    const Eigen::MatrixXd ritz = q.transpose() * z;
    const double estimate = Eigen::EigenSolver<Eigen::MatrixXd>(ritz, false)
                                .eigenvalues()
                                .cwiseAbs()
                                .maxCoeff();
    if (estimate == 0 && z.norm() == 0) {
      throw NumericalError("estimate_spectral_radius: matrix annihilates the search space");
    }
    settled = std::abs(estimate - previous) <= tolerance * estimate ? settled + 1 : 0;
    if (settled >= 3) return estimate;
    previous = estimate;
    q = Eigen::HouseholderQR<Eigen::MatrixXd>(z).householderQ() * Eigen::MatrixXd::Identity(n, k);
  }
  throw NumericalError("estimate_spectral_radius: no convergence after " +
                       std::to_string(max_iterations) + " iterations");
}

EsnModel init_esn(const EsnConfig& config) {
  config.validate();
  EsnModel model;
  model.config = config;
  model.w_x = uniform_matrix(config.hidden_dim, config.input_dim, config.input_scaling,
                             CounterRng::substream(config.seed, CounterRng::kEsnInput));
  model.w_h = uniform_matrix(config.hidden_dim, config.hidden_dim, 1.0,
                             CounterRng::substream(config.seed, CounterRng::kEsnRecurrent));
  const double radius = estimate_spectral_radius(model.w_h, config.seed);
  if (!(radius > 0)) throw NumericalError("init_esn: recurrent matrix has zero spectral radius");
  model.w_h *= config.spectral_radius / radius;
  auto bias_rng = CounterRng::substream(config.seed, CounterRng::kEsnBias);
  model.bias.resize(static_cast<Eigen::Index>(config.hidden_dim));
  for (auto& v : model.bias) v = bias_rng.uniform(-config.bias_scaling, config.bias_scaling);
  return model;
}

template <typename Scalar>
ForwardResult<Scalar> esn_forward(const EsnModel& model, const TimeSeriesBatch& batch,
                                  bool keep_states) {
  if (batch.channels() != model.config.input_dim) {
    throw StructuralError("esn_forward: batch has " + std::to_string(batch.channels()) +
                          " channels, model expects " + std::to_string(model.config.input_dim));
  }
  batch.validate(true);
  const std::size_t hidden = model.config.hidden_dim;
  const std::size_t rows = batch.size();
  const std::size_t channels = batch.channels();
  const auto leak = static_cast<Scalar>(model.config.leak);

  const MatrixRM<Scalar> wx_t = model.w_x.transpose().cast<Scalar>();
  const MatrixRM<Scalar> wh_t = model.w_h.transpose().cast<Scalar>();
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> bias = model.bias.transpose().cast<Scalar>();

  ForwardResult<Scalar> result;
  result.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(hidden));
  if (keep_states) result.layer_states.assign(1, Tensor3<Scalar>(rows, batch.max_time(), hidden));

  MatrixRM<Scalar> state = MatrixRM<Scalar>::Zero(static_cast<Eigen::Index>(rows),
                                                  static_cast<Eigen::Index>(hidden));
  MatrixRM<Scalar> pre(state.rows(), state.cols());
  constexpr std::size_t kChunk = 4096;
  for (std::size_t c0 = 0; c0 < batch.max_time(); c0 += kChunk) {
    const std::size_t tc = std::min(batch.max_time(), c0 + kChunk) - c0;
    // Input projections for the whole window, time-major: [tc x rows x channels].
    Tensor3<Scalar> x(tc, rows, channels);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t t = 0; t < tc; ++t) {
        const double* src = batch.values.slot(r, c0 + t);
        for (std::size_t c = 0; c < channels; ++c) x(t, r, c) = static_cast<Scalar>(src[c]);
      }
    }
    Tensor3<Scalar> proj(tc, rows, hidden);
    proj.rows().noalias() = x.rows() * wx_t;
    proj.rows().rowwise() += bias;

    for (std::size_t t = 0; t < tc; ++t) {
      const Eigen::Map<const MatrixRM<Scalar>> drive(proj.slot(t, 0), static_cast<Eigen::Index>(rows),
                                                     static_cast<Eigen::Index>(hidden));
      pre.noalias() = state * wh_t;
      pre += drive;
      state = (Scalar(1) - leak) * state + leak * pre.array().tanh().matrix();
      const std::size_t step = c0 + t;
      for (std::size_t r = 0; r < rows; ++r) {
        if (step + 1 == batch.lengths[r]) result.features.row(static_cast<Eigen::Index>(r)) = state.row(static_cast<Eigen::Index>(r));
        if (keep_states && step < batch.lengths[r]) {
          std::copy_n(state.row(static_cast<Eigen::Index>(r)).data(), hidden,
                      result.layer_states[0].slot(r, step));
        }
      }
    }
  }
  if (!result.features.allFinite()) throw NumericalError("esn_forward: non-finite features");
  return result;
}

template ForwardResult<float> esn_forward<float>(const EsnModel&, const TimeSeriesBatch&, bool);
template ForwardResult<double> esn_forward<double>(const EsnModel&, const TimeSeriesBatch&, bool);

}  // namespace mars
