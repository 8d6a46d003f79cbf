#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <numeric>

#include "mars/models.hpp"

using namespace mars;

namespace {

double max_rel(std::span<const double> x, std::span<const double> ref) {
  double worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = std::abs(x[i] - ref[i]);
    worst = std::max(worst, ref[i] != 0 ? d / std::abs(ref[i]) : d);
  }
  return worst;
}

TimeSeriesBatch ragged(std::size_t batch, std::size_t length, std::size_t channels, std::uint64_t seed) {
  TimeSeriesBatch data = synth_random_uniform(batch, length, channels, seed);
  for (std::size_t i = 1; i < batch; i += 2) {
    data.lengths[i] = length / 3 + i;
    for (std::size_t t = data.lengths[i]; t < length; ++t) {
      for (std::size_t c = 0; c < channels; ++c) data.values(i, t, c) = 0;
    }
  }
  return data;
}

MarsConfig small_config() {
  MarsConfig c;
  c.input_dim = 2;
  c.hidden_dim = 16;
  c.num_layers = 3;
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("init is deterministic per seed") {
  const auto a = init_mars(small_config());
  const auto b = init_mars(small_config());
  CHECK(a.encoder.w_enc == b.encoder.w_enc);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(a.blocks[l].w_in == b.blocks[l].w_in);
    CHECK(a.blocks[l].bias == b.blocks[l].bias);
  }
  auto other = small_config();
  other.seed = 43;
  CHECK(init_mars(other).encoder.w_enc != a.encoder.w_enc);
}

TEST_CASE("adding layers keeps earlier layers") {
  auto deeper = small_config();
  deeper.num_layers = 5;
  const auto a = init_mars(small_config());
  const auto b = init_mars(deeper);
  CHECK(a.encoder.w_enc == b.encoder.w_enc);
  for (std::size_t l = 0; l < 3; ++l) CHECK(a.blocks[l].w_in == b.blocks[l].w_in);
}

TEST_CASE("weights respect their scalings") {
  auto c = small_config();
  c.input_scaling = 0.3;
  c.bias_scaling = 0.05;
  const auto m = init_mars(c);
  CHECK(m.encoder.w_enc.cwiseAbs().maxCoeff() <= 0.3);
  CHECK(m.blocks[1].w_in.cwiseAbs().maxCoeff() <= 0.3);
  CHECK(m.blocks[2].bias.cwiseAbs().maxCoeff() <= 0.05);
  CHECK(m.blocks[1].w_in.rows() == 16);
  CHECK(m.blocks[1].w_in.cols() == 16);
}

TEST_CASE("zero input scaling leaves only the biases") {
  auto c = small_config();
  c.input_scaling = 0;
  const auto m = init_mars(c);
  CHECK(m.encoder.w_enc.isZero());
  CHECK(m.blocks[0].w_in.isZero());
  const auto x = synth_random_uniform(3, 40, 2, 1);
  auto y = synth_random_uniform(3, 40, 2, 2);
  const auto fx = mars_forward<double>(m, x).features;
  const auto fy = mars_forward<double>(m, y).features;
  CHECK((fx - fy).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("invalid configs") {
  auto c = small_config();
  c.hidden_dim = 0;
  CHECK_THROWS_AS(init_mars(c), StructuralError);
  c = small_config();
  c.gamma = 1.2;
  CHECK_THROWS_AS(init_mars(c), ConfigError);
  c = small_config();
  c.input_scaling = -1;
  CHECK_THROWS_AS(init_mars(c), ConfigError);
  const auto m = init_mars(small_config());
  CHECK_THROWS_AS(mars_forward<double>(m, synth_random_uniform(2, 10, 3, 0)), StructuralError);
}

TEST_CASE("single layer features are the last scan state") {
  auto c = small_config();
  c.num_layers = 1;
  const auto m = init_mars(c);
  const auto data = ragged(4, 60, 2, 3);
  ForwardOptions fo;
  fo.keep_layer_states = true;
  const auto r = mars_forward<double>(m, data, fo);
  const auto last = last_state(r.layer_states[0], data.lengths);
  CHECK((r.features - last).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one block equals the step-by-step memristive network") {
  auto c = small_config();
  c.num_layers = 1;
  c.steepness = 6;
  const auto m = init_mars(c);
  const auto data = ragged(5, 300, 2, 4);
  ForwardOptions fo;
  fo.keep_layer_states = true;
  const auto fast = mars_forward<double>(m, data, fo);
  const auto slow = mf_esn_forward<double>(mf_esn_from_mars(m), data, true);
  CHECK(fast.clamped_coefficients == 0);
  CHECK(max_rel(fast.layer_states[0].flat(), slow.layer_states[0].flat()) < 1e-6);
}

TEST_CASE("stacked pipeline equals the reference recurrence, with convolution front") {
  auto c = small_config();
  c.tc_enabled = true;
  c.tc_channels = 5;
  c.tc_kernel = 3;
  const auto m = init_mars(c);
  const auto data = ragged(5, 200, 2, 5);
  ForwardOptions fo;
  fo.keep_layer_states = true;
  fo.batch_rows = 2;
  fo.scan.chunk_length = 37;
  const auto fast = mars_forward<double>(m, data, fo);
  const auto slow = mars_forward_reference<double>(m, data, true);
  REQUIRE(fast.clamped_coefficients == 0);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(max_rel(fast.layer_states[l].flat(), slow.layer_states[l].flat()) < 1e-6);
  }
  CHECK(max_rel(std::span<const double>(fast.features.data(), fast.features.size()),
                std::span<const double>(slow.features.data(), slow.features.size())) < 1e-6);
}

TEST_CASE("serial scan inside the pipeline gives the same features") {
  const auto m = init_mars(small_config());
  const auto data = ragged(3, 120, 2, 6);
  ForwardOptions fo;
  fo.use_sequential_scan = true;
  const auto a = mars_forward<double>(m, data);
  const auto b = mars_forward<double>(m, data, fo);
  CHECK((a.features - b.features).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("float forward tracks double") {
  const auto m = init_mars(small_config());
  const auto data = ragged(3, 500, 2, 7);
  const auto d = mars_forward<double>(m, data).features;
  const MatrixXdRM f = mars_forward<float>(m, data).features.cast<double>();
  CHECK(((f - d).cwiseAbs().array() / d.cwiseAbs().array()).maxCoeff() < 1e-3);
}

TEST_CASE("constant input drives every unit to its fixed point") {
  MarsConfig c;
  c.input_dim = 1;
  c.hidden_dim = 6;
  c.num_layers = 1;
  c.steepness = 5;
  c.delta = 0.05;
  c.seed = 8;
  const auto m = init_mars(c);
  TimeSeriesBatch data;
  data.values = Tensor3<double>(1, 5000, 1, 0.6);
  data.lengths = {5000};
  const auto r = mars_forward<double>(m, data);
  const Eigen::VectorXd pre = m.blocks[0].w_in * (m.encoder.w_enc * Eigen::VectorXd::Constant(1, 0.6)) + m.blocks[0].bias;
  for (Eigen::Index k = 0; k < 6; ++k) {
    const double z = rescale(pre[k], c.rescale());
    CHECK(r.features(0, k) == doctest::Approx(fixed_point(z, c.memristive)).epsilon(1e-6));
  }
}

TEST_CASE("hidden states stay in [0, 1] in the positive regime") {
  const auto m = init_mars(small_config());
  ForwardOptions fo;
  fo.keep_layer_states = true;
  const auto r = mars_forward<double>(m, ragged(4, 400, 2, 9), fo);
  REQUIRE(r.clamped_coefficients == 0);
  for (const auto& s : r.layer_states) {
    for (double v : s.flat()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("large time step enters the clamped regime and stays finite") {
  MarsConfig c = small_config();
  c.hidden_dim = 128;
  c.delta = 0.5;
  c.steepness = 1;
  const auto m = init_mars(c);
  const auto r = mars_forward<double>(m, synth_random_uniform(2, 200, 2, 10));
  CHECK(r.clamped_coefficients > 0);
  CHECK(r.features.allFinite());
}

TEST_CASE("zero time step passes the carried signal through") {
  auto c = small_config();
  auto m = init_mars(c);
  m.config.delta = 0;
  const auto r = mars_forward_reference<double>(m, synth_random_uniform(2, 30, 2, 11), true);
  for (const auto& s : r.layer_states) {
    for (double v : s.flat()) CHECK(v == 0.0);
  }
  CHECK(r.features.isZero());
  CHECK_THROWS_AS(mars_forward<double>(m, synth_random_uniform(2, 30, 2, 11)), ConfigError);
}

TEST_CASE("padding is never read") {
  const auto m = init_mars(small_config());
  auto data = ragged(5, 80, 2, 12);
  const auto clean = mars_forward<double>(m, data).features;
  data.poison_padding();
  ForwardOptions fo;
  fo.batch_rows = 2;
  const auto poisoned = mars_forward<double>(m, data, fo).features;
  CHECK(poisoned.allFinite());
  CHECK((poisoned - clean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("batch permutation permutes features") {
  const auto m = init_mars(small_config());
  const auto data = ragged(4, 50, 2, 13);
  const std::vector<std::size_t> order{2, 0, 3, 1};
  const auto perm = data.select(order);
  const auto f = mars_forward<double>(m, data).features;
  const auto fp = mars_forward<double>(m, perm).features;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK((fp.row(i) - f.row(order[i])).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("same seed, same features") {
  const auto data = ragged(3, 64, 2, 14);
  const auto a = mars_forward<double>(init_mars(small_config()), data).features;
  const auto b = mars_forward<double>(init_mars(small_config()), data).features;
  CHECK(a == b);
}

TEST_CASE("non-finite input is reported") {
  const auto m = init_mars(small_config());
  auto data = synth_random_uniform(2, 20, 2, 15);
  data.values(1, 5, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(mars_forward<double>(m, data));
}

TEST_CASE("memristive network: zero time step and first step") {
  MfEsnConfig c;
  c.input_dim = 2;
  c.hidden_dim = 8;
  c.seed = 3;
  auto p = init_mf_esn(c);
  CHECK(p.w_h.norm() > 0);
  const auto data = synth_random_uniform(2, 25, 2, 16);

  auto frozen = p;
  frozen.dynamics.delta = 0;
  CHECK(mf_esn_forward<double>(frozen, data).features.isZero());

  auto one = data.slice(0, 1);
  one.values = Tensor3<double>(1, 1, 2);
  one.values(0, 0, 0) = data.values(0, 0, 0);
  one.values(0, 0, 1) = data.values(0, 0, 1);
  one.lengths = {1};
  const auto r = mf_esn_forward<double>(p, one);
  Eigen::VectorXd x(2);
  x << one.values(0, 0, 0), one.values(0, 0, 1);
  const Eigen::VectorXd pre = p.w_x * x + p.bias;
  for (Eigen::Index k = 0; k < 8; ++k) {
    const double z = rescale(pre[k], p.rescale);
    CHECK(r.features(0, k) == doctest::Approx(c.delta * potentiation_rate(z, p.memristive)));
  }
}

TEST_CASE("temporal convolution") {
  TimeSeriesBatch data = synth_random_uniform(2, 12, 1, 17);
  EncoderParams front;
  front.tc_kernels = Tensor3<double>(1, 1, 5);
  front.tc_kernels(0, 0, 2) = 1;
  const auto same = temporal_conv(front, data);
  CHECK(same.values == data.values);

  TimeSeriesBatch flat;
  flat.values = Tensor3<double>(1, 10, 1, 2.0);
  flat.lengths = {10};
  front.tc_kernels = Tensor3<double>(1, 1, 3, 1.0);
  const auto sums = temporal_conv(front, flat);
  CHECK(sums.values(0, 0, 0) == 4.0);
  for (std::size_t t = 1; t < 9; ++t) CHECK(sums.values(0, t, 0) == 6.0);
  CHECK(sums.values(0, 9, 0) == 4.0);

  front.tc_kernels = Tensor3<double>(1, 1, 11, 1.0);
  CHECK_THROWS_AS(temporal_conv(front, flat), StructuralError);

  MarsConfig c;
  c.input_dim = 3;
  c.hidden_dim = 8;
  c.tc_enabled = true;
  const auto m = init_mars(c);
  const auto out = temporal_conv(m.encoder, synth_random_uniform(2, 30, 3, 18));
  CHECK(out.channels() == 20);
  CHECK(m.encoder.tc_kernels.width() == 7);
}

TEST_CASE("leaky network special cases") {
  EsnConfig c;
  c.input_dim = 2;
  c.hidden_dim = 10;
  c.seed = 5;
  auto m = init_esn(c);
  const auto data = synth_random_uniform(1, 15, 2, 19);

  auto memoryless = m;
  memoryless.w_h.setZero();
  memoryless.bias.setZero();
  const auto r = esn_forward<double>(memoryless, data, true);
  Eigen::VectorXd x(2);
  x << data.values(0, 14, 0), data.values(0, 14, 1);
  const Eigen::VectorXd expect = (m.w_x * x).array().tanh();
  for (Eigen::Index k = 0; k < 10; ++k) CHECK(r.features(0, k) == doctest::Approx(expect[k]));

  auto silent = m;
  silent.bias.setZero();
  TimeSeriesBatch zeros;
  zeros.values = Tensor3<double>(1, 15, 2);
  zeros.lengths = {15};
  CHECK(esn_forward<double>(silent, zeros).features.isZero());
}

TEST_CASE("recurrent matrix is scaled to the requested spectral radius") {
  for (double rho : {0.5, 0.9, 1.3}) {
    EsnConfig c;
    c.hidden_dim = 60;
    c.spectral_radius = rho;
    c.seed = 21;
    const auto m = init_esn(c);
    const Eigen::MatrixXd w = m.w_h;
    const double actual = Eigen::EigenSolver<Eigen::MatrixXd>(w, false).eigenvalues().cwiseAbs().maxCoeff();
    CHECK(std::abs(actual - rho) / rho < 0.01);
  }
}
