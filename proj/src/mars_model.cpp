#include <algorithm>
#include <cmath>
#include <string>

#include "mars/models.hpp"

namespace mars {
namespace {

void validate_structure(const MarsConfig& c) {
  if (c.input_dim == 0 || c.hidden_dim == 0 || c.num_layers == 0) {
    throw StructuralError("mars config: input_dim, hidden_dim and num_layers must be >= 1");
  }
  if (c.tc_enabled && (c.tc_channels == 0 || c.tc_kernel == 0)) {
    throw StructuralError("mars config: temporal convolution needs channels and kernel >= 1");
  }
  if (!(c.input_scaling >= 0) || !(c.bias_scaling >= 0)) {
    throw ConfigError("mars config: scalings must be non-negative");
  }
  if (!(c.gamma > 0 && c.gamma <= 1)) throw ConfigError("mars config: gamma must lie in (0, 1]");
  if (!(c.steepness > 0)) throw ConfigError("mars config: steepness must be positive");
  if (!(c.delta >= 0)) throw ConfigError("mars config: delta must be non-negative");
  c.memristive.validate();
  c.rescale().validate();
}

void check_input(const MarsModel& model, const TimeSeriesBatch& batch) {
  if (batch.channels() != model.config.input_dim) {
    throw StructuralError("mars: batch has " + std::to_string(batch.channels()) +
                          " channels, model expects " + std::to_string(model.config.input_dim));
  }
  batch.validate(/*allow_poisoned_padding=*/true);
}

template <typename Scalar>
MatrixRM<Scalar> transposed_cast(const MatrixXdRM& m) {
  return m.transpose().cast<Scalar>();
}

}  // namespace

void MarsConfig::validate() const {
  validate_structure(*this);
  if (!(delta > 0)) throw ConfigError("mars config: delta must be positive");
}

MarsModel init_mars(const MarsConfig& config) {
  config.validate();
  MarsModel model;
  model.config = config;
  const double omega = config.input_scaling;
  std::size_t encoder_inputs = config.input_dim;
  if (config.tc_enabled) {
    model.encoder.tc_kernels = Tensor3<double>(config.tc_channels, config.input_dim, config.tc_kernel);
    auto rng = CounterRng::substream(config.seed, CounterRng::kTemporalConv);
    for (double& w : model.encoder.tc_kernels.flat()) w = rng.uniform(-omega, omega);
    encoder_inputs = config.tc_channels;
  }
  model.encoder.w_enc = uniform_matrix(config.hidden_dim, encoder_inputs, omega,
                                       CounterRng::substream(config.seed, CounterRng::kEncoder));
  model.blocks.reserve(config.num_layers);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    MemristiveBlockParams block;
    block.w_in = uniform_matrix(config.hidden_dim, config.hidden_dim, omega,
                                CounterRng::substream(config.seed, CounterRng::kBlockWeights, l));
    auto bias_rng = CounterRng::substream(config.seed, CounterRng::kBlockBias, l);
    block.bias.resize(static_cast<Eigen::Index>(config.hidden_dim));
    for (auto& v : block.bias) v = bias_rng.uniform(-config.bias_scaling, config.bias_scaling);
    model.blocks.push_back(std::move(block));
  }
  return model;
}

MatrixXdRM uniform_matrix(std::size_t rows, std::size_t cols, double scale, CounterRng&& rng) {
  MatrixXdRM m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

template <typename Scalar>
ForwardResult<Scalar> mars_forward(const MarsModel& model, const TimeSeriesBatch& batch,
                                   const ForwardOptions& options) {
  model.config.validate();
  check_input(model, batch);

  const TimeSeriesBatch conv = model.encoder.has_tc() ? temporal_conv(model.encoder, batch)
                                                      : TimeSeriesBatch{};
  const TimeSeriesBatch& front = model.encoder.has_tc() ? conv : batch;

  const std::size_t hidden = model.config.hidden_dim;
  const std::size_t layers = model.blocks.size();
  const std::size_t channels = front.channels();
  const auto rescale_c = model.config.rescale();
  const auto memristive = model.config.memristive;
  const auto dyn = model.config.dynamics();

  const MatrixRM<Scalar> enc_t = transposed_cast<Scalar>(model.encoder.w_enc);
  std::vector<MatrixRM<Scalar>> block_t;
  std::vector<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> block_bias;
  for (const auto& blk : model.blocks) {
    block_t.push_back(transposed_cast<Scalar>(blk.w_in));
    block_bias.push_back(blk.bias.transpose().cast<Scalar>());
  }

  ForwardResult<Scalar> result;
  result.features.resize(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(hidden));
  if (options.keep_layer_states) {
    result.layer_states.assign(layers, Tensor3<Scalar>(batch.size(), batch.max_time(), hidden));
  }

  const std::size_t rows_per_pass = options.batch_rows == 0 ? batch.size() : options.batch_rows;
  const std::size_t chunk = std::max<std::size_t>(1, options.scan.chunk_length);
  std::size_t clamped_total = 0;

  for (std::size_t r0 = 0; r0 < batch.size(); r0 += rows_per_pass) {
    const std::size_t r1 = std::min(batch.size(), r0 + rows_per_pass);
    const std::size_t nb = r1 - r0;
    std::size_t longest = 0;
    for (std::size_t r = r0; r < r1; ++r) longest = std::max(longest, batch.lengths[r]);

    std::vector<AlignedVector<Scalar>> carry(layers, AlignedVector<Scalar>(nb * hidden, Scalar(0)));
    std::vector<std::size_t> window_len(nb);

    for (std::size_t c0 = 0; c0 < longest; c0 += chunk) {
      const std::size_t c1 = std::min(longest, c0 + chunk);
      const std::size_t tc = c1 - c0;
      for (std::size_t i = 0; i < nb; ++i) {
        const std::size_t len = batch.lengths[r0 + i];
        window_len[i] = len <= c0 ? 0 : std::min(len, c1) - c0;
      }

      Tensor3<Scalar> x(nb, tc, channels);
      for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t t = 0; t < tc; ++t) {
          const double* src = front.values.slot(r0 + i, c0 + t);
          Scalar* dst = x.slot(i, t);
          for (std::size_t c = 0; c < channels; ++c) dst[c] = static_cast<Scalar>(src[c]);
        }
      }
      Tensor3<Scalar> u(nb, tc, hidden);
      u.rows().noalias() = x.rows() * enc_t;

      Tensor3<Scalar> a(nb, tc, hidden), b(nb, tc, hidden), h(nb, tc, hidden);
      for (std::size_t l = 0; l < layers; ++l) {
        a.rows().noalias() = u.rows() * block_t[l];
        a.rows().rowwise() += block_bias[l];

        std::size_t clamped = 0;
        const auto items = static_cast<std::ptrdiff_t>(nb * tc);
#pragma omp parallel for schedule(static) reduction(+ : clamped)
        for (std::ptrdiff_t item = 0; item < items; ++item) {
          const std::size_t i = static_cast<std::size_t>(item) / tc;
          const std::size_t t = static_cast<std::size_t>(item) % tc;
          if (t >= window_len[i]) continue;
          std::span<Scalar> za(a.slot(i, t), hidden);
          std::span<Scalar> zb(b.slot(i, t), hidden);
          rescale<Scalar>(za, za, rescale_c);
          clamped += mars_coefficients<Scalar>(za, memristive, dyn, za, zb);
          if (options.inject_sign_flip) {
            for (Scalar& v : za) v = -v;
          }
        }
        clamped_total += clamped;

        const ScanView<Scalar> view{a.data(), b.data(), h.data(), nb, tc, hidden};
        if (options.use_sequential_scan) {
          sequential_scan(view, std::span<const Scalar>(carry[l]), window_len);
        } else {
          parallel_scan_log(view, std::span<const Scalar>(carry[l]), window_len, options.scan);
        }

        for (std::size_t i = 0; i < nb; ++i) {
          for (std::size_t t = 0; t < window_len[i]; ++t) {
            const Scalar* hs = h.slot(i, t);
            for (std::size_t w = 0; w < hidden; ++w) {
              if (!std::isfinite(hs[w])) {
                throw NumericalError("mars_forward: non-finite memristive state in layer " +
                                     std::to_string(l + 1) + " (row " + std::to_string(r0 + i) +
                                     ", t " + std::to_string(c0 + t) + ")");
              }
            }
          }
          const std::size_t len = batch.lengths[r0 + i];
          if (len >= c1) {
            std::copy_n(h.slot(i, tc - 1), hidden, carry[l].begin() + i * hidden);
          }
          if (l + 1 == layers && len > c0 && len <= c1) {
            std::copy_n(h.slot(i, len - 1 - c0), hidden,
                        result.features.row(static_cast<Eigen::Index>(r0 + i)).data());
          }
          if (options.keep_layer_states) {
            for (std::size_t t = 0; t < window_len[i]; ++t) {
              std::copy_n(h.slot(i, t), hidden, result.layer_states[l].slot(r0 + i, c0 + t));
            }
          }
        }
        if (l + 1 < layers) u.rows() -= h.rows();
      }
    }
  }
  result.clamped_coefficients = clamped_total;
  return result;
}

template <typename Scalar>
ForwardResult<Scalar> mars_forward_reference(const MarsModel& model, const TimeSeriesBatch& batch,
                                             bool keep_layer_states) {
  validate_structure(model.config);
  check_input(model, batch);
  const TimeSeriesBatch conv = model.encoder.has_tc() ? temporal_conv(model.encoder, batch)
                                                      : TimeSeriesBatch{};
  const TimeSeriesBatch& front = model.encoder.has_tc() ? conv : batch;

  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const std::size_t hidden = model.config.hidden_dim;
  const std::size_t layers = model.blocks.size();
  const auto rescale_c = model.config.rescale();
  const auto mc = model.config.memristive;
  const auto gamma = static_cast<Scalar>(model.config.gamma);
  const auto delta = static_cast<Scalar>(model.config.delta);

  const Mat enc = model.encoder.w_enc.cast<Scalar>();
  std::vector<Mat> w_in;
  std::vector<Vec> bias;
  for (const auto& blk : model.blocks) {
    w_in.push_back(blk.w_in.cast<Scalar>());
    bias.push_back(blk.bias.cast<Scalar>());
  }

  ForwardResult<Scalar> result;
  result.features.resize(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(hidden));
  if (keep_layer_states) {
    result.layer_states.assign(layers, Tensor3<Scalar>(batch.size(), batch.max_time(), hidden));
  }

  for (std::size_t row = 0; row < batch.size(); ++row) {
    std::vector<Vec> state(layers, Vec::Zero(static_cast<Eigen::Index>(hidden)));
    Vec x(static_cast<Eigen::Index>(front.channels()));
    for (std::size_t t = 0; t < batch.lengths[row]; ++t) {
      for (std::size_t c = 0; c < front.channels(); ++c) {
        x[static_cast<Eigen::Index>(c)] = static_cast<Scalar>(front.values(row, t, c));
      }
      Vec u = enc * x;
      for (std::size_t l = 0; l < layers; ++l) {
        Vec& h = state[l];
        const Vec pre = w_in[l] * u + bias[l];
        for (Eigen::Index k = 0; k < h.size(); ++k) {
          const Scalar z = rescale(pre[k], rescale_c);
          const Scalar kp = potentiation_rate(z, mc);
          const Scalar kd = depression_rate(z, mc);
          const Scalar q = (kp + kd) * h[k];
          const Scalar r = kp - q;
          h[k] = r * delta + gamma * h[k];
        }
        if (keep_layer_states) {
          std::copy_n(h.data(), hidden, result.layer_states[l].slot(row, t));
        }
        u -= h;
      }
    }
    result.features.row(static_cast<Eigen::Index>(row)) = state.back().transpose();
  }
  return result;
}

TimeSeriesBatch temporal_conv(const EncoderParams& front, const TimeSeriesBatch& batch) {
  const Tensor3<double>& k = front.tc_kernels;
  if (k.empty()) throw StructuralError("temporal_conv: no kernels initialized");
  if (k.time() != batch.channels()) {
    throw StructuralError("temporal_conv: kernels expect " + std::to_string(k.time()) +
                          " input channels, batch has " + std::to_string(batch.channels()));
  }
  const std::size_t width = k.width();
  if (width > batch.max_time()) {
    throw StructuralError("temporal_conv: kernel length " + std::to_string(width) +
                          " exceeds sequence length " + std::to_string(batch.max_time()));
  }
  const std::size_t out_channels = k.batch();
  const std::size_t in_channels = k.time();
  const auto pad = static_cast<std::ptrdiff_t>(width / 2);

  TimeSeriesBatch out;
  out.values = Tensor3<double>(batch.size(), batch.max_time(), out_channels);
  out.lengths = batch.lengths;
  out.labels = batch.labels;
  const auto rows = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < rows; ++b) {
    const auto len = static_cast<std::ptrdiff_t>(batch.lengths[b]);
    for (std::ptrdiff_t t = 0; t < len; ++t) {
      double* y = out.values.slot(b, t);
      for (std::size_t o = 0; o < out_channels; ++o) {
        double acc = 0;
        for (std::size_t j = 0; j < width; ++j) {
          const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) - pad;
          if (src < 0 || src >= len) continue;
          const double* xs = batch.values.slot(b, src);
          for (std::size_t c = 0; c < in_channels; ++c) acc += k(o, c, j) * xs[c];
        }
        y[o] = acc;
      }
    }
  }
  return out;
}

template ForwardResult<float> mars_forward<float>(const MarsModel&, const TimeSeriesBatch&,
                                                  const ForwardOptions&);
template ForwardResult<double> mars_forward<double>(const MarsModel&, const TimeSeriesBatch&,
                                                    const ForwardOptions&);
template ForwardResult<float> mars_forward_reference<float>(const MarsModel&,
                                                            const TimeSeriesBatch&, bool);
template ForwardResult<double> mars_forward_reference<double>(const MarsModel&,
                                                              const TimeSeriesBatch&, bool);

}  // namespace mars
