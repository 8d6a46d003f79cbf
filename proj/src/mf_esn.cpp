#include <cmath>
#include <string>

#include "mars/models.hpp"

namespace mars {

MfEsnParams init_mf_esn(const MfEsnConfig& config) {
  if (config.input_dim == 0 || config.hidden_dim == 0) {
    throw StructuralError("mf-esn config: input_dim and hidden_dim must be >= 1");
  }
  if (!(config.spectral_radius > 0)) throw ConfigError("mf-esn config: spectral radius must be positive");
  MfEsnParams p;
  p.memristive = config.memristive;
  p.rescale = {0.35, 1.15, config.steepness};
  p.dynamics = {config.gamma, config.delta};
  p.memristive.validate();
  p.rescale.validate();
  p.dynamics.validate();

  p.w_x = uniform_matrix(config.hidden_dim, config.input_dim, config.input_scaling,
                         CounterRng::substream(config.seed, CounterRng::kEsnInput));
  p.w_h = uniform_matrix(config.hidden_dim, config.hidden_dim, 1.0,
                         CounterRng::substream(config.seed, CounterRng::kEsnRecurrent));
  const double radius = estimate_spectral_radius(p.w_h, config.seed);
  p.w_h *= config.spectral_radius / radius;
  auto bias_rng = CounterRng::substream(config.seed, CounterRng::kEsnBias);
  p.bias.resize(static_cast<Eigen::Index>(config.hidden_dim));
  for (auto& v : p.bias) v = bias_rng.uniform(-config.bias_scaling, config.bias_scaling);
  return p;
}

MfEsnParams mf_esn_from_mars(const MarsModel& model) {
  if (model.encoder.has_tc()) {
    throw StructuralError("mf_esn_from_mars: temporal convolution front-end has no MF-ESN form");
  }
  MfEsnParams p;
  const auto& block = model.blocks.front();
  p.w_x = block.w_in * model.encoder.w_enc;
  p.w_h = MatrixXdRM::Zero(block.w_in.rows(), block.w_in.cols());
  p.bias = block.bias;
  p.memristive = model.config.memristive;
  p.rescale = model.config.rescale();
  p.dynamics = model.config.dynamics();
  return p;
}

template <typename Scalar>
ForwardResult<Scalar> mf_esn_forward(const MfEsnParams& p, const TimeSeriesBatch& batch,
                                     bool keep_states) {
  const auto hidden = static_cast<std::size_t>(p.w_h.rows());
  if (p.w_x.cols() != static_cast<Eigen::Index>(batch.channels())) {
    throw StructuralError("mf_esn_forward: input matrix expects " + std::to_string(p.w_x.cols()) +
                          " channels, batch has " + std::to_string(batch.channels()));
  }
  batch.validate(true);

  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Mat w_x = p.w_x.cast<Scalar>();
  const Mat w_h = p.w_h.cast<Scalar>();
  const Vec bias = p.bias.cast<Scalar>();
  const auto gamma = static_cast<Scalar>(p.dynamics.gamma);
  const auto delta = static_cast<Scalar>(p.dynamics.delta);

  ForwardResult<Scalar> result;
  result.features.resize(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(hidden));
  if (keep_states) result.layer_states.assign(1, Tensor3<Scalar>(batch.size(), batch.max_time(), hidden));

  Vec h(static_cast<Eigen::Index>(hidden));
  Vec x(static_cast<Eigen::Index>(batch.channels()));
  for (std::size_t row = 0; row < batch.size(); ++row) {
    h.setZero();
    for (std::size_t t = 0; t < batch.lengths[row]; ++t) {
      for (std::size_t c = 0; c < batch.channels(); ++c) {
        x[static_cast<Eigen::Index>(c)] = static_cast<Scalar>(batch.values(row, t, c));
      }
      const Vec pre = w_h * h + w_x * x + bias;
      for (Eigen::Index k = 0; k < h.size(); ++k) {
        const Scalar z = rescale(pre[k], p.rescale);
        const Scalar kp = potentiation_rate(z, p.memristive);
        const Scalar kd = depression_rate(z, p.memristive);
        const Scalar q = (kp + kd) * h[k];
        const Scalar r = kp - q;
        h[k] = r * delta + gamma * h[k];
      }
      if (keep_states) std::copy_n(h.data(), hidden, result.layer_states[0].slot(row, t));
    }
    if (!h.allFinite()) {
      throw NumericalError("mf_esn_forward: non-finite state in row " + std::to_string(row));
    }
    result.features.row(static_cast<Eigen::Index>(row)) = h.transpose();
  }
  return result;
}

template ForwardResult<float> mf_esn_forward<float>(const MfEsnParams&, const TimeSeriesBatch&, bool);
template ForwardResult<double> mf_esn_forward<double>(const MfEsnParams&, const TimeSeriesBatch&, bool);

}  // namespace mars
