#pragma once

// Reservoir models built from deterministic seeds.
//
//  * MARS: encoder (optionally preceded by a fixed random temporal convolution),
//    then N memristive blocks. Block l maps the carried sequence u through its own
//    affine map and RESCALE, turns the result into scan coefficients, runs the
//    log-space scan and hands u - h on to the next block. Features are the last
//    valid state of the final block.
//  * MF-ESN: the same memristive update evaluated strictly step by step with a
//    recurrent matrix inside RESCALE.
//  * Leaky ESN: tanh reservoir with spectral-radius-scaled recurrent matrix.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mars/dataset.hpp"
#include "mars/dynamics.hpp"
#include "mars/rng.hpp"
#include "mars/scan.hpp"
#include "mars/tensor.hpp"

namespace mars {

struct MarsConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 100;
  std::size_t num_layers = 3;
  double input_scaling = 0.1;  // omega, shared by encoder, block maps and TC kernels
  double bias_scaling = 0.1;   // beta
  double gamma = 1.0;
  double delta = 0.1;
  double steepness = 5.0;
  std::uint64_t seed = 0;
  bool tc_enabled = false;
  std::size_t tc_channels = 20;
  std::size_t tc_kernel = 7;
  MemristiveConstants memristive{};
  double rescale_lower = 0.35;
  double rescale_upper = 1.15;

  void validate() const;
  RescaleConstants rescale() const { return {rescale_lower, rescale_upper, steepness}; }
  DynamicsScalars dynamics() const { return {gamma, delta}; }

  friend bool operator==(const MarsConfig&, const MarsConfig&) = default;
};

struct EncoderParams {
  MatrixXdRM w_enc;             // [hidden x (tc_channels or input_dim)]
  Tensor3<double> tc_kernels;   // [tc_channels x input_dim x kernel], empty when disabled

  bool has_tc() const { return !tc_kernels.empty(); }
};

struct MemristiveBlockParams {
  MatrixXdRM w_in;       // [hidden x hidden]
  Eigen::VectorXd bias;  // [hidden]
};

struct MarsModel {
  MarsConfig config;
  EncoderParams encoder;
  std::vector<MemristiveBlockParams> blocks;
};

MarsModel init_mars(const MarsConfig& config);

struct ForwardOptions {
  ScanOptions scan{};
  /// Rows forwarded together; 0 forwards the whole batch at once.
  std::size_t batch_rows = 0;
  /// Keep every layer's full hidden sequence (memory heavy; for verification).
  bool keep_layer_states = false;
  /// Run the serial scan inside the pipeline instead of the log-space scan.
  bool use_sequential_scan = false;
  /// Flip the sign of the coefficient a before scanning. Mutation hook for `verify`.
  bool inject_sign_flip = false;
};

template <typename Scalar>
struct ForwardResult {
  MatrixRM<Scalar> features;                 // [batch x hidden]
  std::size_t clamped_coefficients = 0;      // entries of a clamped to the floor
  std::vector<Tensor3<Scalar>> layer_states; // per layer, when requested
};

template <typename Scalar>
ForwardResult<Scalar> mars_forward(const MarsModel& model, const TimeSeriesBatch& batch,
                                   const ForwardOptions& options = {});

/// Strict step-by-step evaluation of the memristive update (q, r, h form) through the
/// whole MARS stack with no recurrent weights. Accepts delta = 0.
template <typename Scalar>
ForwardResult<Scalar> mars_forward_reference(const MarsModel& model, const TimeSeriesBatch& batch,
                                             bool keep_layer_states = false);

/// Fixed random 1-D convolution over time, same-length output with symmetric zero
/// padding. Steps beyond a row's length read as zero.
TimeSeriesBatch temporal_conv(const EncoderParams& front, const TimeSeriesBatch& batch);

struct MfEsnConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 100;
  double input_scaling = 0.1;
  double bias_scaling = 0.1;
  double spectral_radius = 0.9;
  double gamma = 1.0;
  double delta = 0.1;
  double steepness = 5.0;
  std::uint64_t seed = 0;
  MemristiveConstants memristive{};
};

struct MfEsnParams {
  MatrixXdRM w_x;  // [hidden x input_dim]
  MatrixXdRM w_h;  // [hidden x hidden]
  Eigen::VectorXd bias;
  MemristiveConstants memristive{};
  RescaleConstants rescale{};
  DynamicsScalars dynamics{};
};

MfEsnParams init_mf_esn(const MfEsnConfig& config);

/// Single-block MARS written as an MF-ESN: W^x = W_in * W_enc, W^h = 0.
MfEsnParams mf_esn_from_mars(const MarsModel& model);

template <typename Scalar>
ForwardResult<Scalar> mf_esn_forward(const MfEsnParams& params, const TimeSeriesBatch& batch,
                                     bool keep_states = false);

struct EsnConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 100;
  double leak = 1.0;
  double spectral_radius = 0.9;
  double input_scaling = 1.0;
  double bias_scaling = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EsnModel {
  EsnConfig config;
  MatrixXdRM w_x;
  MatrixXdRM w_h;
  Eigen::VectorXd bias;
};

/// Largest eigenvalue modulus by block power iteration with Ritz values. Throws
/// NumericalError if the estimate has not settled within `max_iterations`.
double estimate_spectral_radius(const MatrixXdRM& m, std::uint64_t seed,
                                std::size_t max_iterations = 1000, double tolerance = 1e-10);

EsnModel init_esn(const EsnConfig& config);

template <typename Scalar>
ForwardResult<Scalar> esn_forward(const EsnModel& model, const TimeSeriesBatch& batch,
                                  bool keep_states = false);

/// Uniform [-scale, scale] matrix from a stream.
MatrixXdRM uniform_matrix(std::size_t rows, std::size_t cols, double scale, CounterRng&& rng);

}  // namespace mars
