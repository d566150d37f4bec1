#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "eleatt/analysis.hpp"
#include "eleatt/bptt.hpp"
#include "eleatt/error.hpp"

using namespace eleatt;

namespace {

SequenceBatch random_batch(RngStream& rng, std::size_t dims, std::size_t count, double scale = 1.0) {
  SequenceBatch b;
  b.dims = dims;
  b.classes = 2;
  for (std::size_t i = 0; i < count; ++i) {
    b.inputs.push_back(rng_uniform(rng, -scale, scale, dims, 2 + rng.below(5)));
    b.labels.push_back(static_cast<std::uint32_t>(i % 2));
  }
  return b;
}

}  // namespace

TEST_CASE("parameter formulas") {
  CHECK(block_param_count(CellKind::gru, 75, 100) == 52800);
  CHECK(block_param_count(CellKind::gru, 75, 100) + gate_param_count(75, 100) == 66000);
  CHECK(block_param_count(CellKind::srnn, 4, 3) == 3 * 8);
  CHECK(block_param_count(CellKind::lstm, 4, 3) == 4 * 3 * 8);
  CHECK(fc_param_count(100, 60) == 6060);

  const CostReport three = count_params(NetworkConfig::stack(75, 60, CellKind::gru, 3, 100, false));
  CHECK(three.total_params() == 179460);
  CHECK(std::abs(static_cast<double>(three.total_params()) - 0.20e6) / 0.20e6 < 0.15);

  const auto e2 = count_params(NetworkConfig::stack(75, 60, CellKind::gru, 2, 100, true)).total_params();
  const auto e3 = count_params(NetworkConfig::stack(75, 60, CellKind::gru, 3, 100, true)).total_params();
  CHECK(e2 < e3);
}

TEST_CASE("parameter formulas equal tensor enumeration on 50 random configs") {
  RngStream rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    NetworkConfig cfg;
    cfg.input_dim = 1 + rng.below(40);
    cfg.num_classes = 2 + rng.below(20);
    const std::size_t layers = 1 + rng.below(4);
    for (std::size_t l = 0; l < layers; ++l) {
      cfg.layers.push_back(LayerSpec{static_cast<CellKind>(rng.below(3)), 1 + rng.below(50), rng.below(2) == 0,
                                     GateActivation::sigmoid});
    }
    const CostReport r = count_params(cfg);
    CHECK(r.total_params() == r.enumerated_total_params());
    CHECK(r.total_params() == Network(cfg).params().scalar_count());
    for (const LayerCost& l : r.layers) CHECK(l.params() == l.enumerated_params);
  }
}

TEST_CASE("FLOP formulas") {
  CHECK(block_flops(CellKind::gru, 2, 3) == 105);
  CHECK(gate_multiplies(2, 3) + gate_additions(2, 3) == 22);
  NetworkConfig cfg = NetworkConfig::stack(2, 2, CellKind::gru, 1, 3, true);
  CHECK(count_flops(cfg).flops_per_step() == 127);
}

TEST_CASE("op counter on the real code path equals the closed forms") {
  RngStream rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t d = 1 + rng.below(30), n = 1 + rng.below(30);
    for (CellKind kind : {CellKind::gru, CellKind::srnn, CellKind::lstm}) {
      CellParams p = CellParams::init(kind, d, n, true, GateActivation::sigmoid, rng);
      const Tensor2 x = rng_uniform(rng, -1, 1, d, 1);
      StepState s = StepState::zeros(p, 1);
      s.h = rng_uniform(rng, -1, 1, n, 1);

      OpCounter gate;
      const Tensor2 a = gate_forward(x, s.h, *p.gate);
      const Tensor2 xe = modulate(x, a);
      CHECK(gate.multiplies() == gate_multiplies(d, n));
      CHECK(gate.additions() == gate_additions(d, n));

      OpCounter block;
      if (kind == CellKind::gru) gru_step(xe, s, p);
      if (kind == CellKind::srnn) srnn_step(xe, s, p);
      if (kind == CellKind::lstm) lstm_step(xe, s, p);
      CHECK_MESSAGE(block.total() == block_flops(kind, d, n), to_string(kind), " D=", d, " N=", n);

      OpCounter whole;
      block_step(x, s, p);
      CHECK(whole.total() == block_flops(kind, d, n) + gate_multiplies(d, n) + gate_additions(d, n));
    }
  }
}

TEST_CASE("cost report rendering") {
  const CostReport r = count_flops(NetworkConfig::stack(75, 60, CellKind::gru, 1, 100, true));
  CHECK(r.to_table().find("66000") != std::string::npos);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.dump().find("66000") != std::string::npos);
}

TEST_CASE("extract_attention") {
  RngStream rng(3);
  const SequenceBatch b = random_batch(rng, 4, 5);
  NetworkConfig cfg = NetworkConfig::stack(4, 2, CellKind::gru, 2, 3, true);
  const Network zero(cfg);
  const AttentionTrace t = extract_attention(zero, b);
  CHECK(t.layers == std::vector<std::size_t>{0, 1});
  CHECK(t.responses[0].size() == b.max_length());
  CHECK(t.responses[0][0].rows() == 4);
  CHECK(t.responses[0][0].cols() == 5);
  CHECK(t.responses[1][0].rows() == 3);
  for (const auto& layer : t.responses)
    for (const Tensor2& a : layer)
      for (double v : a.values()) CHECK(v == 0.5);

  const Network net = build(cfg, 4);
  const Tensor2 before = predict(net, b);
  const AttentionTrace t1 = extract_attention(net, b, {1});
  const AttentionTrace t2 = extract_attention(net, b, {1});
  CHECK(t1.responses == t2.responses);
  CHECK(t1.layers == std::vector<std::size_t>{1});
  CHECK(predict(net, b) == before);

  const Network plain = build(NetworkConfig::stack(4, 2, CellKind::gru, 2, 3, false), 4);
  CHECK_THROWS_AS(extract_attention(plain, b), ConfigError);
  NetworkConfig mixed = cfg;
  mixed.layers[0].gated = false;
  CHECK_THROWS_AS(extract_attention(build(mixed, 1), b, {0}), ConfigError);
}

TEST_CASE("relative attention") {
  RngStream rng(5);
  const SequenceBatch b = random_batch(rng, 6, 7);
  const Network zero(NetworkConfig::stack(6, 2, CellKind::gru, 1, 4, true));
  const RelativeAttention rel = relative_attention(extract_attention(zero, b));
  for (double a : rel.static_modulation) CHECK(a == doctest::Approx(0.5).epsilon(1e-14));
  for (double m : rel.element_mean) CHECK(m == doctest::Approx(1.0).epsilon(1e-14));
  REQUIRE(rel.joint_score.size() == 2);
  CHECK(rel.joint_score[0] == doctest::Approx(3.0));
  CHECK(mean_over(rel, {0, 1}) == doctest::Approx(1.0));

  // Doubling every input leaves relative responses unchanged when the gate
  // ignores x; with trained weights the gate changes, so use an x-blind gate.
  Network blind = build(NetworkConfig::stack(6, 2, CellKind::gru, 1, 4, true), 6);
  blind.params().layers[0].gate->w_xa.fill(0.0);
  blind.params().layers[0].w_x[0].fill(0.0);
  blind.params().layers[0].w_x[1].fill(0.0);
  blind.params().layers[0].w_x[2].fill(0.0);
  SequenceBatch doubled = b;
  for (Tensor2& x : doubled.inputs) x = scale(x, 2.0);
  const RelativeAttention r1 = relative_attention(extract_attention(blind, b));
  const RelativeAttention r2 = relative_attention(extract_attention(blind, doubled));
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(r1.element_mean[i] - r2.element_mean[i]) < 1e-12);

  // Energy ratio by hand on one element of a trained-looking gate.
  const Network net = build(NetworkConfig::stack(6, 2, CellKind::lstm, 1, 4, true), 7);
  const AttentionTrace tr = extract_attention(net, b);
  const RelativeAttention rr = relative_attention(tr);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < tr.responses[0].size(); ++t)
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (t >= b.length(j)) continue;
      num += std::abs(tr.responses[0][t](2, j) * tr.inputs[0][t](2, j));
      den += std::abs(tr.inputs[0][t](2, j));
    }
  CHECK(rr.static_modulation[2] == doctest::Approx(num / den).epsilon(1e-12));
  CHECK(std::isnan(rr.relative[b.max_length() - 1](0, 0)) == (b.length(0) < b.max_length()));
  const RelativeAttention rms = relative_attention(tr, 0, StaticModulation::rms_ratio);
  CHECK(rms.static_modulation[2] > 0.0);

  SequenceBatch dead = b;
  for (Tensor2& x : dead.inputs)
    for (std::size_t t = 0; t < x.cols(); ++t) x(4, t) = 0.0;
  const RelativeAttention u = relative_attention(extract_attention(net, dead));
  CHECK(u.undefined == std::vector<std::size_t>{4});
  CHECK(std::isnan(u.static_modulation[4]));
  CHECK(std::isnan(u.element_mean[4]));
  CHECK_FALSE(std::isnan(mean_over(u, {3, 4})));

  const std::string csv = attention_csv(tr, rr);
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  std::size_t expect = 1;
  for (std::size_t j = 0; j < b.size(); ++j) expect += b.length(j) * 6;
  CHECK(rows == expect);
  CHECK(nlohmann::json::parse(attention_json(rr)).is_object());
}
