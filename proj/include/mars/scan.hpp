#pragma once

// Elementwise linear recurrence h_t = a_t * h_{t-1} + b_t over [batch x time x hidden]
// tensors, with h_1 = a_1 * h0 + b_1.
//
// sequential_scan is the serial left fold and the correctness oracle.
// parallel_scan_log evaluates the same recurrence in log space:
//
//   alpha_t = sum_{i<=t} log a_i,  beta_t = log b_t,
//   h_t     = exp(alpha_t + log(h0 + sum_{i<=t} exp(beta_i - alpha_i)))
//
// with a streamed running-maximum log-sum-exp. Time is split into chunks and each
// chunk into blocks; every block restarts alpha at zero and receives its entry
// state from a Blelloch tree over per-block summaries. Requires a > 0, b > 0, h0 >= 0.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mars/tensor.hpp"

namespace mars {

template <typename Scalar>
struct ScanCoefficients {
  Tensor3<Scalar> a;
  Tensor3<Scalar> b;
};

template <typename Scalar>
struct HiddenSequence {
  Tensor3<Scalar> h;
  MatrixRM<Scalar> h0;  // [batch x hidden]
};

struct ScanOptions {
  /// Time steps processed per outer chunk; alpha is rebased at each chunk.
  std::size_t chunk_length = 8192;
  /// Time blocks per chunk scanned concurrently. 0 picks one per spare thread.
  std::size_t time_blocks = 0;
  /// When non-empty, per-timestep alpha/beta/h of batch row 0 are written here as CSV.
  std::string trace_csv;
};

/// Raw views used by the model pipeline to scan into preallocated buffers.
/// `a`, `b` and `h` are [batch x time x width] row-major; `h` may alias neither.
template <typename Scalar>
struct ScanView {
  const Scalar* a;
  const Scalar* b;
  Scalar* h;
  std::size_t batch;
  std::size_t time;
  std::size_t width;
};

/// Serial reference. `h0` empty means zeros; `lengths` empty means all rows full.
/// Rows stop at their length; later slots are written as zero.
template <typename Scalar>
HiddenSequence<Scalar> sequential_scan(const ScanCoefficients<Scalar>& coeffs,
                                       const MatrixRM<Scalar>& h0 = {},
                                       std::span<const std::size_t> lengths = {});

template <typename Scalar>
HiddenSequence<Scalar> parallel_scan_log(const ScanCoefficients<Scalar>& coeffs,
                                         const MatrixRM<Scalar>& h0 = {},
                                         std::span<const std::size_t> lengths = {},
                                         const ScanOptions& options = {});

/// In-place variants. `h0` has batch*width entries (empty = zeros). Row lengths may be 0
/// here (a row with nothing to do in this window).
template <typename Scalar>
void sequential_scan(const ScanView<Scalar>& view, std::span<const Scalar> h0,
                     std::span<const std::size_t> lengths);

template <typename Scalar>
void parallel_scan_log(const ScanView<Scalar>& view, std::span<const Scalar> h0,
                       std::span<const std::size_t> lengths, const ScanOptions& options);

/// h at index lengths[i] - 1 for each row. Empty `lengths` selects the final step.
template <typename Scalar>
MatrixRM<Scalar> last_state(const Tensor3<Scalar>& h, std::span<const std::size_t> lengths = {});

template <typename Scalar>
MatrixRM<Scalar> last_state(const HiddenSequence<Scalar>& seq,
                            std::span<const std::size_t> lengths = {}) {
  return last_state(seq.h, lengths);
}

/// log(exp(x) + exp(y)) with -inf handled.
template <typename Scalar>
Scalar log_add_exp(Scalar x, Scalar y) {
  const Scalar m = x > y ? x : y;
  if (m == -std::numeric_limits<Scalar>::infinity()) return m;
  return m + std::log1p(std::exp(-std::abs(x - y)));
}

/// Composition of h -> A h + B segments, held as (log A, log B - log A).
/// combine(first, second) applies `first` then `second`.
template <typename Scalar>
struct LogAffine {
  Scalar log_gain = 0;
  Scalar log_sum = -std::numeric_limits<Scalar>::infinity();

  static LogAffine identity() { return {}; }

  friend LogAffine combine(const LogAffine& first, const LogAffine& second) {
    return {first.log_gain + second.log_gain,
            log_add_exp(first.log_sum, second.log_sum - first.log_gain)};
  }

  /// log of the state after applying the segment to a state with log value `log_h`.
  Scalar apply(Scalar log_h) const { return log_gain + log_add_exp(log_h, log_sum); }
};

/// Work-efficient exclusive scan (up-sweep, down-sweep). `op(x, y)` must be
/// associative with x applied before y. Returns the number of tree levels walked,
/// which is 2*ceil(log2 n).
template <typename T, typename Op>
std::size_t blelloch_exclusive_scan(std::vector<T>& values, const T& identity, Op op) {
  const std::size_t n = values.size();
  if (n == 0) return 0;
  std::size_t padded = 1;
  while (padded < n) padded <<= 1;
  values.resize(padded, identity);

  std::size_t levels = 0;
  for (std::size_t stride = 1; stride < padded; stride <<= 1, ++levels) {
    for (std::size_t right = 2 * stride - 1; right < padded; right += 2 * stride) {
      values[right] = op(values[right - stride], values[right]);
    }
  }
  values[padded - 1] = identity;
  for (std::size_t stride = padded >> 1; stride >= 1; stride >>= 1, ++levels) {
    for (std::size_t right = 2 * stride - 1; right < padded; right += 2 * stride) {
      const T left = values[right - stride];
      values[right - stride] = values[right];
      values[right] = op(values[right], left);
    }
  }
  values.resize(n);
  return levels;
}

}  // namespace mars
