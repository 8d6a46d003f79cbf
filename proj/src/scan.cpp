#include "mars/scan.hpp"

#include <omp.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mars {
namespace {

template <typename Scalar>
constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

template <typename Scalar>
void check_shapes(const ScanCoefficients<Scalar>& coeffs, const MatrixRM<Scalar>& h0,
                  std::span<const std::size_t> lengths, bool allow_zero_lengths) {
  if (!coeffs.a.same_shape(coeffs.b)) {
    throw StructuralError("scan: coefficient tensors a and b differ in shape");
  }
  if (h0.size() != 0 && (static_cast<std::size_t>(h0.rows()) != coeffs.a.batch() ||
                         static_cast<std::size_t>(h0.cols()) != coeffs.a.width())) {
    throw StructuralError("scan: h0 must be [batch x hidden]");
  }
  if (!lengths.empty()) {
    if (lengths.size() != coeffs.a.batch()) {
      throw StructuralError("scan: one length per batch row required");
    }
    for (std::size_t len : lengths) {
      if (len > coeffs.a.time() || (!allow_zero_lengths && len == 0)) {
        throw StructuralError("scan: row length " + std::to_string(len) + " outside [1, " +
                              std::to_string(coeffs.a.time()) + "]");
      }
    }
  }
}

std::size_t row_length(std::span<const std::size_t> lengths, std::size_t row, std::size_t time) {
  return lengths.empty() ? time : std::min(lengths[row], time);
}

template <typename Scalar>
void validate_log_domain(const ScanView<Scalar>& v, std::span<const Scalar> h0,
                         std::span<const std::size_t> lengths) {
  for (std::size_t i = 0; i < h0.size(); ++i) {
    if (!(h0[i] >= 0)) {
      throw DomainError("parallel_scan_log: negative initial state at (batch " +
                        std::to_string(i / v.width) + ", unit " + std::to_string(i % v.width) +
                        ")");
    }
  }
  const auto batch = static_cast<std::ptrdiff_t>(v.batch);
  std::vector<std::size_t> first_bad(v.batch, std::numeric_limits<std::size_t>::max());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < batch; ++b) {
    const std::size_t len = row_length(lengths, b, v.time);
    const std::size_t base = static_cast<std::size_t>(b) * v.time * v.width;
    for (std::size_t i = 0; i < len * v.width; ++i) {
      if (!(v.a[base + i] > 0) || !(v.b[base + i] > 0)) {
        first_bad[b] = i;
        break;
      }
    }
  }
  for (std::size_t b = 0; b < v.batch; ++b) {
    if (first_bad[b] == std::numeric_limits<std::size_t>::max()) continue;
    const std::size_t t = first_bad[b] / v.width;
    const std::size_t unit = first_bad[b] % v.width;
    const std::size_t idx = (b * v.time + t) * v.width + unit;
    std::ostringstream msg;
    msg << "parallel_scan_log: coefficients must be strictly positive; first offending entry at"
        << " (batch " << b << ", t " << t << ", unit " << unit << "): a = " << v.a[idx]
        << ", b = " << v.b[idx];
    throw DomainError(msg.str());
  }
}

/// Summary of one time block of one batch row across all lanes: the log-space
/// affine map it applies to the entry state.
template <typename Scalar>
using LaneArray = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using LaneMap = Eigen::Map<LaneArray<Scalar>>;
template <typename Scalar>
using ConstLaneMap = Eigen::Map<const LaneArray<Scalar>>;

// One step of the streamed log-sum-exp over a width-vector of lanes, branch-free so
// the exponentials vectorize: (m, s) <- (max(m, x), s e^{m - m'} + e^{x - m'}).
template <typename Scalar>
void accumulate(const LaneArray<Scalar>& x, LaneMap<Scalar>& run_max, LaneMap<Scalar>& run_sum,
                LaneArray<Scalar>& scratch) {
  scratch = run_max.max(x);
  run_sum = run_sum * (run_max - scratch).exp() + (x - scratch).exp();
  run_max = scratch;
}

template <typename Scalar>
void summarize_block(const ScanView<Scalar>& v, std::size_t row, std::size_t t0, std::size_t t1,
                     Scalar* log_gain, Scalar* log_sum, Scalar* run_max, Scalar* run_sum) {
  const auto width = static_cast<Eigen::Index>(v.width);
  LaneMap<Scalar> gain(log_gain, width), m(run_max, width), s(run_sum, width);
  gain.setZero();
  m.setConstant(kNegInf<Scalar>);
  s.setZero();
  LaneArray<Scalar> x(width), scratch(width);
  for (std::size_t t = t0; t < t1; ++t) {
    const std::size_t base = (row * v.time + t) * v.width;
    gain += ConstLaneMap<Scalar>(v.a + base, width).log();
    x = ConstLaneMap<Scalar>(v.b + base, width).log() - gain;
    accumulate(x, m, s, scratch);
  }
  for (Eigen::Index w = 0; w < width; ++w) {
    log_sum[w] = s[w] > 0 ? m[w] + std::log(s[w]) : kNegInf<Scalar>;
  }
}

/// Block rescan: alpha restarts at zero, the entry state enters the log-sum as its
/// first term, and h_t = exp(alpha_t + m_t) * s_t where (m_t, s_t) is the running
/// maximum and scaled sum.
template <typename Scalar>
void rescan_block(const ScanView<Scalar>& v, std::size_t row, std::size_t t0, std::size_t t1,
                  const Scalar* log_entry, Scalar* alpha, Scalar* run_max, Scalar* run_sum) {
  const auto width = static_cast<Eigen::Index>(v.width);
  LaneMap<Scalar> al(alpha, width), m(run_max, width), s(run_sum, width);
  al.setZero();
  for (Eigen::Index w = 0; w < width; ++w) {
    m[w] = log_entry[w];
    s[w] = log_entry[w] == kNegInf<Scalar> ? Scalar(0) : Scalar(1);
  }
  LaneArray<Scalar> x(width), scratch(width);
  for (std::size_t t = t0; t < t1; ++t) {
    const std::size_t base = (row * v.time + t) * v.width;
    al += ConstLaneMap<Scalar>(v.a + base, width).log();
    x = ConstLaneMap<Scalar>(v.b + base, width).log() - al;
    accumulate(x, m, s, scratch);
    LaneMap<Scalar>(v.h + base, width) = (al + m).exp() * s;
  }
}

template <typename Scalar>
void write_trace(const ScanView<Scalar>& v, std::span<const std::size_t> lengths,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("scan trace: cannot open " + path);
  out << "t,unit,alpha,beta,h\n";
  const std::size_t len = row_length(lengths, 0, v.time);
  std::vector<double> alpha(v.width, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t w = 0; w < v.width; ++w) {
      const std::size_t idx = t * v.width + w;
      alpha[w] += std::log(static_cast<double>(v.a[idx]));
      out << t + 1 << ',' << w << ',' << alpha[w] << ',' << std::log(static_cast<double>(v.b[idx]))
          << ',' << static_cast<double>(v.h[idx]) << '\n';
    }
  }
}

}  // namespace

template <typename Scalar>
void sequential_scan(const ScanView<Scalar>& v, std::span<const Scalar> h0,
                     std::span<const std::size_t> lengths) {
  AlignedVector<Scalar> state(v.width);
  for (std::size_t b = 0; b < v.batch; ++b) {
    if (h0.empty()) {
      std::fill(state.begin(), state.end(), Scalar(0));
    } else {
      std::copy_n(h0.begin() + b * v.width, v.width, state.begin());
    }
    const std::size_t len = row_length(lengths, b, v.time);
    for (std::size_t t = 0; t < v.time; ++t) {
      const std::size_t base = (b * v.time + t) * v.width;
      if (t >= len) {
        std::fill_n(v.h + base, v.width, Scalar(0));
        continue;
      }
      for (std::size_t w = 0; w < v.width; ++w) {
        state[w] = v.a[base + w] * state[w] + v.b[base + w];
        v.h[base + w] = state[w];
      }
    }
  }
}

template <typename Scalar>
void parallel_scan_log(const ScanView<Scalar>& v, std::span<const Scalar> h0,
                       std::span<const std::size_t> lengths, const ScanOptions& options) {
  if (!h0.empty() && h0.size() != v.batch * v.width) {
    throw StructuralError("parallel_scan_log: h0 must hold batch*hidden entries");
  }
  validate_log_domain(v, h0, lengths);
  if (v.batch == 0 || v.time == 0 || v.width == 0) return;

  const std::size_t chunk = std::max<std::size_t>(1, options.chunk_length);
  const std::size_t threads = static_cast<std::size_t>(omp_get_max_threads());
  std::size_t blocks_wanted = options.time_blocks;
  if (blocks_wanted == 0) blocks_wanted = std::max<std::size_t>(1, (threads + v.batch - 1) / v.batch);

  const std::size_t width = v.width;
  // Per-row log entry state of the current chunk.
  AlignedVector<Scalar> log_entry(v.batch * width);
  for (std::size_t i = 0; i < log_entry.size(); ++i) {
    log_entry[i] = h0.empty() ? kNegInf<Scalar> : std::log(h0[i]);
  }

  for (std::size_t c0 = 0; c0 < v.time; c0 += chunk) {
    const std::size_t c1 = std::min(v.time, c0 + chunk);
    const std::size_t blocks = std::min(blocks_wanted, c1 - c0);
    const std::size_t block_len = (c1 - c0 + blocks - 1) / blocks;
    const auto block_begin = [&](std::size_t k) { return std::min(c1, c0 + k * block_len); };

    // Entry log-state of every (row, block, lane).
    AlignedVector<Scalar> block_entry(v.batch * blocks * width);
    const auto work_items = static_cast<std::ptrdiff_t>(v.batch * blocks);

    if (blocks == 1) {
      std::copy(log_entry.begin(), log_entry.end(), block_entry.begin());
    } else {
      AlignedVector<Scalar> gain(v.batch * blocks * width);
      AlignedVector<Scalar> sum(v.batch * blocks * width);
#pragma omp parallel
      {
        AlignedVector<Scalar> run_max(width), run_sum(width);
#pragma omp for schedule(static)
        for (std::ptrdiff_t item = 0; item < work_items; ++item) {
          const std::size_t row = static_cast<std::size_t>(item) / blocks;
          const std::size_t k = static_cast<std::size_t>(item) % blocks;
          const std::size_t len = row_length(lengths, row, v.time);
          const std::size_t t0 = std::min(block_begin(k), std::max(c0, len));
          const std::size_t t1 = std::min(block_begin(k + 1), std::max(c0, len));
          summarize_block(v, row, t0, t1, gain.data() + item * width, sum.data() + item * width,
                          run_max.data(), run_sum.data());
        }
      }
      // Tree over block summaries, lane by lane.
      const auto lanes = static_cast<std::ptrdiff_t>(v.batch * width);
#pragma omp parallel
      {
        std::vector<LogAffine<Scalar>> seg(blocks);
#pragma omp for schedule(static)
        for (std::ptrdiff_t lane = 0; lane < lanes; ++lane) {
          const std::size_t row = static_cast<std::size_t>(lane) / width;
          const std::size_t w = static_cast<std::size_t>(lane) % width;
          seg.resize(blocks);
          for (std::size_t k = 0; k < blocks; ++k) {
            const std::size_t idx = (row * blocks + k) * width + w;
            seg[k] = {gain[idx], sum[idx]};
          }
          blelloch_exclusive_scan(seg, LogAffine<Scalar>::identity(),
                                  [](const LogAffine<Scalar>& x, const LogAffine<Scalar>& y) {
                                    return combine(x, y);
                                  });
          const Scalar entry = log_entry[row * width + w];
          for (std::size_t k = 0; k < blocks; ++k) {
            block_entry[(row * blocks + k) * width + w] = seg[k].apply(entry);
          }
        }
      }
    }

#pragma omp parallel
    {
      AlignedVector<Scalar> alpha(width), run_max(width), run_sum(width);
#pragma omp for schedule(static)
      for (std::ptrdiff_t item = 0; item < work_items; ++item) {
        const std::size_t row = static_cast<std::size_t>(item) / blocks;
        const std::size_t k = static_cast<std::size_t>(item) % blocks;
        const std::size_t len = row_length(lengths, row, v.time);
        const std::size_t t0 = block_begin(k);
        const std::size_t t1 = block_begin(k + 1);
        const std::size_t valid_end = std::clamp(len, t0, t1);
        rescan_block(v, row, t0, valid_end, block_entry.data() + item * width, alpha.data(),
                     run_max.data(), run_sum.data());
        for (std::size_t t = valid_end; t < t1; ++t) {
          std::fill_n(v.h + (row * v.time + t) * width, width, Scalar(0));
        }
      }
    }

    // Carry into the next chunk.
    for (std::size_t row = 0; row < v.batch; ++row) {
      const std::size_t len = row_length(lengths, row, v.time);
      if (len < c1 || c1 == v.time) continue;
      const Scalar* last = v.h + (row * v.time + c1 - 1) * width;
      for (std::size_t w = 0; w < width; ++w) log_entry[row * width + w] = std::log(last[w]);
    }
  }

  if (!options.trace_csv.empty()) write_trace(v, lengths, options.trace_csv);
}

template <typename Scalar>
HiddenSequence<Scalar> sequential_scan(const ScanCoefficients<Scalar>& coeffs,
                                       const MatrixRM<Scalar>& h0,
                                       std::span<const std::size_t> lengths) {
  check_shapes(coeffs, h0, lengths, false);
  HiddenSequence<Scalar> out;
  out.h = Tensor3<Scalar>(coeffs.a.batch(), coeffs.a.time(), coeffs.a.width());
  out.h0 = h0.size() ? h0
                     : MatrixRM<Scalar>::Zero(static_cast<Eigen::Index>(coeffs.a.batch()),
                                              static_cast<Eigen::Index>(coeffs.a.width()));
  ScanView<Scalar> view{coeffs.a.data(), coeffs.b.data(), out.h.data(),
                        coeffs.a.batch(), coeffs.a.time(), coeffs.a.width()};
  sequential_scan(view, std::span<const Scalar>(out.h0.data(), out.h0.size()), lengths);
  return out;
}

template <typename Scalar>
HiddenSequence<Scalar> parallel_scan_log(const ScanCoefficients<Scalar>& coeffs,
                                         const MatrixRM<Scalar>& h0,
                                         std::span<const std::size_t> lengths,
                                         const ScanOptions& options) {
  check_shapes(coeffs, h0, lengths, false);
  HiddenSequence<Scalar> out;
  out.h = Tensor3<Scalar>(coeffs.a.batch(), coeffs.a.time(), coeffs.a.width());
  out.h0 = h0.size() ? h0
                     : MatrixRM<Scalar>::Zero(static_cast<Eigen::Index>(coeffs.a.batch()),
                                              static_cast<Eigen::Index>(coeffs.a.width()));
  ScanView<Scalar> view{coeffs.a.data(), coeffs.b.data(), out.h.data(),
                        coeffs.a.batch(), coeffs.a.time(), coeffs.a.width()};
  parallel_scan_log(view, std::span<const Scalar>(out.h0.data(), out.h0.size()), lengths,
                    options);
  return out;
}

template <typename Scalar>
MatrixRM<Scalar> last_state(const Tensor3<Scalar>& h, std::span<const std::size_t> lengths) {
  if (!lengths.empty() && lengths.size() != h.batch()) {
    throw StructuralError("last_state: one length per batch row required");
  }
  MatrixRM<Scalar> out(static_cast<Eigen::Index>(h.batch()), static_cast<Eigen::Index>(h.width()));
  for (std::size_t b = 0; b < h.batch(); ++b) {
    const std::size_t len = lengths.empty() ? h.time() : lengths[b];
    if (len == 0 || len > h.time()) {
      throw StructuralError("last_state: length " + std::to_string(len) + " of row " +
                            std::to_string(b) + " outside [1, " + std::to_string(h.time()) + "]");
    }
    std::copy_n(h.slot(b, len - 1), h.width(), out.row(static_cast<Eigen::Index>(b)).data());
  }
  return out;
}

#define MARS_INSTANTIATE_SCAN(Scalar)                                                         \
  template void sequential_scan<Scalar>(const ScanView<Scalar>&, std::span<const Scalar>,     \
                                        std::span<const std::size_t>);                        \
  template void parallel_scan_log<Scalar>(const ScanView<Scalar>&, std::span<const Scalar>,   \
                                          std::span<const std::size_t>, const ScanOptions&);  \
  template HiddenSequence<Scalar> sequential_scan<Scalar>(                                    \
      const ScanCoefficients<Scalar>&, const MatrixRM<Scalar>&, std::span<const std::size_t>); \
  template HiddenSequence<Scalar> parallel_scan_log<Scalar>(                                  \
      const ScanCoefficients<Scalar>&, const MatrixRM<Scalar>&, std::span<const std::size_t>, \
      const ScanOptions&);                                                                    \
  template MatrixRM<Scalar> last_state<Scalar>(const Tensor3<Scalar>&,                        \
                                               std::span<const std::size_t>);

MARS_INSTANTIATE_SCAN(float)
MARS_INSTANTIATE_SCAN(double)

#undef MARS_INSTANTIATE_SCAN

}  // namespace mars
