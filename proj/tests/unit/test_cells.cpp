#include <doctest.h>

#include <cmath>

#include "eleatt/cells.hpp"
#include "eleatt/error.hpp"
#include "eleatt/rng.hpp"

using namespace eleatt;

namespace {

double sig(double s) { return 1.0 / (1.0 + std::exp(-s)); }

void randomize(CellParams& p, RngStream& rng, double scale = 1.0) {
  for (Tensor2* t : p.tensors())
    for (double& v : t->values()) v = rng.uniform(-scale, scale);
}

}  // namespace

TEST_CASE("cell parameter shapes and names") {
  const CellParams p = CellParams::zeros(CellKind::lstm, 3, 2, true);
  CHECK(p.w_x.size() == 4);
  CHECK(p.w_x[0].rows() == 2);
  CHECK(p.w_x[0].cols() == 3);
  CHECK(p.w_h[0].rows() == 2);
  CHECK(p.gate->w_xa.rows() == 3);
  CHECK(p.gate->w_xa.cols() == 3);
  CHECK(p.gate->w_ha.cols() == 2);
  CHECK(p.tensors().size() == p.tensor_names().size());
  CHECK(p.parameter_count() == 4 * 2 * (3 + 2 + 1) + 3 * (3 + 2 + 1));
  CHECK(gate_count(CellKind::srnn) == 1);
  CHECK(gate_count(CellKind::gru) == 3);
  CHECK(parse_cell_kind("lstm") == CellKind::lstm);
  CHECK_THROWS_AS(parse_cell_kind("transformer"), ConfigError);

  RngStream rng(2);
  const CellParams q = CellParams::init(CellKind::gru, 4, 9, false, GateActivation::sigmoid, rng);
  const double bound = 1.0 / std::sqrt(4.0);
  for (double v : q.w_x[1].values()) CHECK(std::abs(v) <= bound);
  for (double v : q.w_h[1].values()) CHECK(std::abs(v) <= 1.0 / 3.0);
  for (double v : q.b[1].values()) CHECK(v == 0.0);
}

TEST_CASE("gate_forward examples") {
  GateParams g = *CellParams::zeros(CellKind::gru, 4, 3, true).gate;
  const Tensor2 x(4, 2, 1.7), h(3, 2, -0.4);
  const Tensor2 half = gate_forward(x, h, g);
  for (double v : half.values()) CHECK(v == 0.5);
  g.activation = GateActivation::softmax;
  const Tensor2 quarter = gate_forward(x, h, g);
  for (double v : quarter.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  // D=2, N=1 against straight-line scalar arithmetic.
  GateParams s;
  s.w_xa = Tensor2::from_rows({{0.3, -0.7}, {1.1, 0.2}});
  s.w_ha = Tensor2::column({0.5, -1.3});
  s.b_a = Tensor2::column({0.05, -0.2});
  const double x0 = 0.8, x1 = -1.5, h0 = 0.4;
  const Tensor2 a = gate_forward(Tensor2::column({x0, x1}), Tensor2::column({h0}), s);
  CHECK(std::abs(a[0] - sig(0.3 * x0 - 0.7 * x1 + 0.5 * h0 + 0.05)) < 1e-12);
  CHECK(std::abs(a[1] - sig(1.1 * x0 + 0.2 * x1 - 1.3 * h0 - 0.2)) < 1e-12);

  CHECK_THROWS_AS(gate_forward(Tensor2(3, 1), Tensor2::column({h0}), s), ShapeError);
}

TEST_CASE("modulate examples") {
  const Tensor2 x = Tensor2::from_rows({{1, -2}, {3, 4}});
  CHECK(modulate(x, Tensor2(2, 2, 1.0)) == x);
  CHECK(modulate(x, Tensor2(2, 2, 0.0)) == Tensor2(2, 2, 0.0));
  CHECK(modulate(x, Tensor2(2, 2, 0.5)) == scale(x, 0.5));
  const Tensor2 a = Tensor2::from_rows({{0.1, 0.9}, {0.3, 0.7}});
  const Tensor2 m = modulate(x, a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(m[i] == x[i] * a[i]);
  CHECK_THROWS_AS(modulate(x, Tensor2(2, 1)), ShapeError);
}

TEST_CASE("srnn_step examples") {
  CellParams p = CellParams::zeros(CellKind::srnn, 3, 3, false);
  const Tensor2 x = Tensor2::column({0.01, -0.02, 0.005});
  CHECK(srnn_step(x, StepState::zeros(p, 1), p).h == Tensor2(3, 1));

  p.w_x[0] = Tensor2::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const Tensor2 h = srnn_step(x, StepState::zeros(p, 1), p).h;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(h[i] == std::tanh(x[i]));
    CHECK(std::abs(h[i] - (x[i] - x[i] * x[i] * x[i] / 3)) < 1e-9);
  }

  RngStream rng(8);
  CellParams q = CellParams::zeros(CellKind::srnn, 1, 1, false);
  randomize(q, rng);
  const double xv = rng.uniform(-1, 1), hv = rng.uniform(-1, 1);
  StepState s{Tensor2::column({hv}), {}};
  const double got = srnn_step(Tensor2::column({xv}), s, q).h[0];
  CHECK(std::abs(got - std::tanh(q.w_x[0][0] * xv + q.w_h[0][0] * hv + q.b[0][0])) < 1e-12);

  CHECK_THROWS_AS(srnn_step(Tensor2(2, 1), StepState::zeros(p, 1), p), ShapeError);
}

TEST_CASE("lstm_step examples") {
  CellParams p = CellParams::zeros(CellKind::lstm, 2, 3, false);
  StepTrace trace;
  const StepState out = lstm_step(Tensor2(2, 1, 0.9), StepState::zeros(p, 1), p, &trace);
  for (int k : {0, 1, 3})
    for (double v : trace.acts[k].values()) CHECK(v == 0.5);
  CHECK(out.c == Tensor2(3, 1));
  CHECK(out.h == Tensor2(3, 1));

  StepState s = StepState::zeros(p, 1);
  s.c = Tensor2::column({1.0, -2.0, 0.3});
  const StepState o2 = lstm_step(Tensor2(2, 1, -0.4), s, p);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(o2.c[i] == 0.5 * s.c[i]);
    CHECK(std::abs(o2.h[i] - 0.5 * std::tanh(0.5 * s.c[i])) < 1e-15);
  }

  RngStream rng(9);
  CellParams q = CellParams::zeros(CellKind::lstm, 1, 1, false);
  randomize(q, rng);
  const double x = rng.uniform(-1, 1), h = rng.uniform(-1, 1), c = rng.uniform(-1, 1);
  auto pre = [&](int k) { return q.w_x[k][0] * x + q.w_h[k][0] * h + q.b[k][0]; };
  const double i = sig(pre(0)), f = sig(pre(1)), g = std::tanh(pre(2)), o = sig(pre(3));
  const double c_new = f * c + i * g;
  const StepState r = lstm_step(Tensor2::column({x}), {Tensor2::column({h}), Tensor2::column({c})}, q);
  CHECK(std::abs(r.c[0] - c_new) < 1e-12);
  CHECK(std::abs(r.h[0] - o * std::tanh(c_new)) < 1e-12);
}

TEST_CASE("lstm constant error carrousel under saturated gates") {
  CellParams p = CellParams::zeros(CellKind::lstm, 2, 4, false);
  RngStream rng(10);
  randomize(p, rng, 0.3);
  for (double& v : p.b[0].values()) v = -15.0;  // input gate closed
  for (double& v : p.b[1].values()) v = 15.0;   // forget gate open
  StepState s = StepState::zeros(p, 1);
  for (double& v : s.c.values()) v = rng.uniform(-2, 2);
  for (int t = 0; t < 50; ++t) {
    const StepState next = lstm_step(rng_uniform(rng, -1, 1, 2, 1), s, p);
    CHECK(max_abs_diff(next.c, s.c) < 1e-3);
    s = next;
  }
}

TEST_CASE("gru_step examples") {
  CellParams p = CellParams::zeros(CellKind::gru, 2, 3, false);
  StepTrace trace;
  const StepState out = gru_step(Tensor2(2, 1, 0.9), StepState::zeros(p, 1), p, &trace);
  for (double v : trace.acts[0].values()) CHECK(v == 0.5);
  for (double v : trace.acts[1].values()) CHECK(v == 0.5);
  CHECK(trace.acts[2] == Tensor2(3, 1));
  CHECK(out.h == Tensor2(3, 1));

  RngStream rng(12);
  CellParams carry = CellParams::zeros(CellKind::gru, 3, 4, false);
  randomize(carry, rng);
  for (double& v : carry.b[1].values()) v = 15.0;
  StepState s{rng_uniform(rng, -1, 1, 4, 2), {}};
  CHECK(max_abs_diff(gru_step(rng_uniform(rng, -1, 1, 3, 2), s, carry).h, s.h) < 1e-3);

  CellParams q = CellParams::zeros(CellKind::gru, 1, 1, false);
  randomize(q, rng);
  const double x = rng.uniform(-1, 1), h = rng.uniform(-1, 1);
  const double r = sig(q.w_x[0][0] * x + q.w_h[0][0] * h + q.b[0][0]);
  const double z = sig(q.w_x[1][0] * x + q.w_h[1][0] * h + q.b[1][0]);
  const double cand = std::tanh(q.w_x[2][0] * x + q.w_h[2][0] * (r * h) + q.b[2][0]);
  const double got = gru_step(Tensor2::column({x}), {Tensor2::column({h}), {}}, q).h[0];
  CHECK(std::abs(got - (z * h + (1 - z) * cand)) < 1e-12);
}

TEST_CASE("block_step composition") {
  RngStream rng(14);
  for (CellKind kind : {CellKind::srnn, CellKind::lstm, CellKind::gru}) {
    CellParams p = CellParams::init(kind, 3, 4, false, GateActivation::sigmoid, rng);
    const Tensor2 x = rng_uniform(rng, -1, 1, 3, 2);
    StepState s = StepState::zeros(p, 2);
    s.h = rng_uniform(rng, -1, 1, 4, 2);
    if (kind == CellKind::lstm) s.c = rng_uniform(rng, -1, 1, 4, 2);

    const BlockOutput bare = block_step(x, s, p);
    CHECK_FALSE(bare.attention.has_value());
    const StepState direct = kind == CellKind::srnn   ? srnn_step(x, s, p)
                             : kind == CellKind::lstm ? lstm_step(x, s, p)
                                                      : gru_step(x, s, p);
    CHECK(bare.state.h == direct.h);
    CHECK(bare.state.c == direct.c);
  }

  CellParams g = CellParams::init(CellKind::gru, 3, 4, false, GateActivation::sigmoid, rng);
  CellParams gated = g;
  gated.gate = CellParams::zeros(CellKind::gru, 3, 4, true).gate;
  const Tensor2 x = rng_uniform(rng, -1, 1, 3, 2);
  StepState s{rng_uniform(rng, -1, 1, 4, 2), {}};
  const BlockOutput out = block_step(x, s, gated);
  REQUIRE(out.attention.has_value());
  for (double v : out.attention->values()) CHECK(v == 0.5);
  CHECK(out.state.h == gru_step(scale(x, 0.5), s, g).h);
}

TEST_CASE("EleAtt-GRU D=3 N=2 against a scalar oracle") {
  RngStream rng(15);
  CellParams p = CellParams::zeros(CellKind::gru, 3, 2, true);
  randomize(p, rng);
  double x[3], h[2];
  for (double& v : x) v = rng.uniform(-1, 1);
  for (double& v : h) v = rng.uniform(-1, 1);

  const GateParams& g = *p.gate;
  double a[3], xe[3];
  for (int i = 0; i < 3; ++i) {
    double s = g.b_a(i, 0);
    for (int j = 0; j < 3; ++j) s += g.w_xa(i, j) * x[j];
    for (int j = 0; j < 2; ++j) s += g.w_ha(i, j) * h[j];
    a[i] = sig(s);
    xe[i] = a[i] * x[i];
  }
  auto affine = [&](int k, int n, const double* hv) {
    double s = p.b[k](n, 0);
    for (int j = 0; j < 3; ++j) s += p.w_x[k](n, j) * xe[j];
    for (int j = 0; j < 2; ++j) s += p.w_h[k](n, j) * hv[j];
    return s;
  };
  double r[2], z[2], rh[2], expect[2];
  for (int n = 0; n < 2; ++n) {
    r[n] = sig(affine(0, n, h));
    z[n] = sig(affine(1, n, h));
    rh[n] = r[n] * h[n];
  }
  for (int n = 0; n < 2; ++n) expect[n] = z[n] * h[n] + (1 - z[n]) * std::tanh(affine(2, n, rh));

  const BlockOutput out =
      block_step(Tensor2::column({x[0], x[1], x[2]}), {Tensor2::column({h[0], h[1]}), {}}, p);
  for (int i = 0; i < 3; ++i) CHECK(std::abs((*out.attention)[i] - a[i]) < 1e-12);
  for (int n = 0; n < 2; ++n) CHECK(std::abs(out.state.h[n] - expect[n]) < 1e-12);
}

TEST_CASE("gate range and GRU convexity on random steps") {
  RngStream rng(16);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t d = 1 + rng.below(6), n = 1 + rng.below(6), b = 1 + rng.below(3);
    const GateActivation mode = rep % 2 ? GateActivation::softmax : GateActivation::sigmoid;
    CellParams p = CellParams::init(CellKind::gru, d, n, true, mode, rng);
    randomize(p, rng, 3.0);
    const Tensor2 x = rng_uniform(rng, -3, 3, d, b);
    const StepState s{rng_uniform(rng, -1, 1, n, b), {}};
    StepTrace tr;
    const BlockOutput out = block_step(x, s, p, &tr);
    if (mode == GateActivation::sigmoid) {
      for (double v : out.attention->values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
      }
    } else {
      for (std::size_t c = 0; c < b; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < d; ++i) sum += (*out.attention)(i, c);
        CHECK(std::abs(sum - 1.0) < 1e-9);
      }
    }
    for (std::size_t i = 0; i < n * b; ++i) {
      const double lo = std::min(s.h[i], tr.acts[2][i]), hi = std::max(s.h[i], tr.acts[2][i]);
      CHECK(out.state.h[i] >= lo);
      CHECK(out.state.h[i] <= hi);
    }
  }
}
