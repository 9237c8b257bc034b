#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "crat/core/errors.hpp"
#include "crat/core/gradcheck.hpp"
#include "crat/data/encoding.hpp"
#include "crat/data/synthetic.hpp"
#include "crat/model/network.hpp"
#include "support/builder_check.hpp"

using namespace crat;
using namespace crat::model;
using crat::testing::random_array;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double softplus(double x) { return std::log1p(std::exp(x)); }

ModelConfig tiny_config() {
  ModelConfig c;
  c.hidden = 8;
  c.heads = 2;
  c.decoder_groups = 2;
  c.modes = 2;
  return c;
}

std::vector<data::Scene> local_scenes(data::ScenarioKind kind, std::size_t n, std::uint64_t seed) {
  std::vector<data::Scene> out;
  for (const auto& s : data::generate_synthetic(kind, n, seed)) out.push_back(data::to_target_frame(s));
  return out;
}

// Independent per-row group normalization.
std::vector<double> group_norm_ref(const std::vector<double>& x, const std::vector<double>& gamma,
                                   const std::vector<double>& beta, std::size_t groups, double eps) {
  const std::size_t C = x.size(), per = C / groups;
  std::vector<double> y(C);
  for (std::size_t g = 0; g < groups; ++g) {
    double mu = 0, var = 0;
    for (std::size_t c = g * per; c < (g + 1) * per; ++c) mu += x[c];
    mu /= double(per);
    for (std::size_t c = g * per; c < (g + 1) * per; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= double(per);
    for (std::size_t c = g * per; c < (g + 1) * per; ++c) y[c] = (x[c] - mu) / std::sqrt(var + eps) * gamma[c] + beta[c];
  }
  return y;
}

}  // namespace

TEST_CASE("parameter counts reconcile with the published table") {
  ModelConfig full;
  const ParamStore p = init_params(full, 1);
  CHECK(count_parameters(p) == 514920);
  CHECK(count_parameters(p, false) == 448872);
  CHECK(count_parameters(p) - count_parameters(p, false) == 66048);

  ModelConfig no_att = full;
  no_att.use_attention = false;
  CHECK(count_parameters(init_params(no_att, 1)) == 448872);

  // Block arithmetic from the widths alone.
  const auto b = parameter_breakdown(full);
  CHECK(b.encoder == 512 * 3 + 512 * 128 + 2 * 512);
  CHECK(b.encoder == 68096);
  CHECK(b.gnn == 2 * 66304 + 2 * 256);
  CHECK(b.attention == 3 * (128 * 128 + 128) + 128 * 128 + 128);
  CHECK(b.per_decoder == 41276);
  CHECK(b.total() == 514920);
  CHECK(p.learnable_count(names::kEncoderPrefix) == b.encoder);
  CHECK(p.learnable_count(names::kGnnPrefix) == b.gnn);
  CHECK(p.learnable_count(names::decoder_prefix(5)) == b.per_decoder);

  // Running statistics are stored but never counted.
  CHECK_FALSE(p.at(names::gnn(0, "bn.running_mean")).learnable);
  CHECK(p.value(names::gnn(1, "bn.running_var")) == Array2(1, 128, 1.0));

  CHECK(p.value(names::encoder("w_ih")).rows == 512);
  CHECK(p.value(names::encoder("w_ih")).cols == 3);
  CHECK(p.value(names::gnn(0, "w_f")).rows == 258);
  CHECK(p.value(names::decoder(0, "w_dec")).cols == 60);
}

TEST_CASE("initialization is seeded and bounded by fan-in") {
  ModelConfig c;
  const ParamStore a = init_params(c, 7), b = init_params(c, 7), d = init_params(c, 8);
  CHECK(a == b);
  CHECK_FALSE(a == d);
  const Array2& w = a.value(names::gnn(0, "w_s"));
  const double bound = 1.0 / std::sqrt(258.0);
  CHECK(std::all_of(w.data.begin(), w.data.end(), [&](double v) { return std::abs(v) <= bound; }));
  CHECK(a.value(names::decoder(2, "b_dec")) == Array2(1, 60, 0.0));
  CHECK(a.value(names::decoder(2, "gn1.gamma")) == Array2(1, 128, 1.0));
}

TEST_CASE("encoder: weight sharing, permutation and hand-evaluated gates") {
  std::mt19937_64 rng(3);
  const std::size_t H = 2;
  ad::Graph g;
  LstmWeights w{g.constant(random_array(4 * H, 3, rng)), g.constant(random_array(4 * H, H, rng)),
                g.constant(random_array(1, 4 * H, rng)), g.constant(random_array(1, 4 * H, rng))};

  SUBCASE("zero inputs give identical rows") {
    std::vector<Array2> steps(5, Array2(4, 3));
    const Array2 h = encode_actors(steps, w, g).value();
    for (std::size_t r = 1; r < 4; ++r)
      for (std::size_t c = 0; c < H; ++c) CHECK(h(r, c) == h(0, c));
  }

  SUBCASE("permuting vehicles permutes rows") {
    std::vector<data::ActorInput> in(4);
    for (auto& a : in) a.steps = random_array(6, 3, rng);
    const Array2 h = encode_actors(in, w, g).value();
    std::vector<data::ActorInput> perm{in[2], in[0], in[3], in[1]};
    const Array2 hp = encode_actors(perm, w, g).value();
    const std::size_t src[] = {2, 0, 3, 1};
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < H; ++c) CHECK(hp(r, c) == h(src[r], c));
  }

  SUBCASE("gates evaluated by hand") {
    const Array2 x = Array2::from_rows({{0.7, -1.2, 1.0}});
    const Array2 x2 = Array2::from_rows({{-0.3, 0.4, 1.0}});
    const std::vector<Array2> one{x};
    const std::vector<Array2> two{x, x2};
    const Array2& Wi = w.w_ih.value();
    const Array2& Wh = w.w_hh.value();
    const Array2& bi = w.b_ih.value();
    const Array2& bh = w.b_hh.value();
    std::vector<double> h(H, 0.0), c(H, 0.0);
    auto step = [&](const Array2& in) {
      std::vector<double> pre(4 * H);
      for (std::size_t r = 0; r < 4 * H; ++r) {
        double s = bi(0, r) + bh(0, r);
        for (std::size_t k = 0; k < 3; ++k) s += Wi(r, k) * in(0, k);
        for (std::size_t k = 0; k < H; ++k) s += Wh(r, k) * h[k];
        pre[r] = s;
      }
      for (std::size_t u = 0; u < H; ++u) {
        const double ig = sig(pre[u]), fg = sig(pre[H + u]), gg = std::tanh(pre[2 * H + u]), og = sig(pre[3 * H + u]);
        c[u] = fg * c[u] + ig * gg;
        h[u] = og * std::tanh(c[u]);
      }
    };
    step(x);
    const Array2 got1 = encode_actors(one, w, g).value();
    for (std::size_t u = 0; u < H; ++u) CHECK(std::abs(got1(0, u) - h[u]) < 1e-10);
    step(x2);
    const Array2 got2 = encode_actors(two, w, g).value();
    for (std::size_t u = 0; u < H; ++u) CHECK(std::abs(got2(0, u) - h[u]) < 1e-10);
  }
}

TEST_CASE("interaction graph edges") {
  using data::Vec2;
  const std::vector<Vec2> one{{0, 0}};
  CHECK(build_graph(one).size() == 0);
  const std::vector<Vec2> three{{0, 0}, {3, 1}, {-2, 5}};
  const EdgeList e = build_graph(three);
  REQUIRE(e.size() == 6);
  for (std::size_t a = 0; a < e.size(); ++a) {
    CHECK(e.receiver[a] != e.sender[a]);
    CHECK(e.features(a, 0) == three[e.sender[a]].x - three[e.receiver[a]].x);
    for (std::size_t b = 0; b < e.size(); ++b) {
      if (e.receiver[b] == e.sender[a] && e.sender[b] == e.receiver[a]) {
        CHECK(e.features(a, 0) == -e.features(b, 0));
        CHECK(e.features(a, 1) == -e.features(b, 1));
      }
    }
  }
  for (const auto& s : local_scenes(data::ScenarioKind::intersection, 3, 4)) {
    const std::size_t n = s.vehicle_count();
    CHECK(build_graph(s).size() == n * (n - 1));
  }
}

TEST_CASE("crystal graph convolution") {
  std::mt19937_64 rng(5);
  ad::Graph g;
  const std::size_t C = 2;
  auto weights = [&](bool zero_gate) {
    return CgconvWeights{g.constant(zero_gate ? Array2(2 * C + 2, C) : random_array(2 * C + 2, C, rng)),
                         g.constant(zero_gate ? Array2(1, C) : random_array(1, C, rng)),
                         g.constant(random_array(2 * C + 2, C, rng)), g.constant(random_array(1, C, rng))};
  };

  SUBCASE("no neighbours is a pure residual") {
    const std::vector<data::Vec2> pos{{1, 2}};
    const Array2 v = random_array(1, C, rng);
    CHECK(cgconv_layer(g.constant(v), build_graph(pos), weights(false)).value() == v);
  }

  const std::vector<data::Vec2> pos{{0, 0}, {4, -3}};
  const EdgeList edges = build_graph(pos);
  const Array2 v = random_array(2, C, rng);

  SUBCASE("zero gate weights halve every message") {
    const CgconvWeights w = weights(true);
    const Array2 out = cgconv_layer(g.constant(v), edges, w).value();
    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t j = 1 - i;
      const double z[] = {v(i, 0), v(i, 1), v(j, 0), v(j, 1), pos[j].x - pos[i].x, pos[j].y - pos[i].y};
      for (std::size_t c = 0; c < C; ++c) {
        double s = w.b_s.value()(0, c);
        for (std::size_t k = 0; k < 6; ++k) s += z[k] * w.w_s.value()(k, c);
        CHECK(std::abs(out(i, c) - (v(i, c) + 0.5 * softplus(s))) < 1e-12);
      }
    }
  }

  SUBCASE("two-node toy matches scalar evaluation") {
    const CgconvWeights w = weights(false);
    const Array2 out = cgconv_layer(g.constant(v), edges, w).value();
    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t j = 1 - i;
      const double z[] = {v(i, 0), v(i, 1), v(j, 0), v(j, 1), pos[j].x - pos[i].x, pos[j].y - pos[i].y};
      for (std::size_t c = 0; c < C; ++c) {
        double f = w.b_f.value()(0, c), s = w.b_s.value()(0, c);
        for (std::size_t k = 0; k < 6; ++k) {
          f += z[k] * w.w_f.value()(k, c);
          s += z[k] * w.w_s.value()(k, c);
        }
        CHECK(std::abs(out(i, c) - (v(i, c) + sig(f) * softplus(s))) < 1e-12);
      }
    }
  }

  SUBCASE("empty edges with identity normalization preserve features") {
    const Array2 one = random_array(1, C, rng);
    const ad::Var x = cgconv_layer(g.constant(one), build_graph(std::vector<data::Vec2>{{0, 0}}), weights(false));
    const Array2 y = ad::batch_norm_eval(x, g.constant(Array2(1, C, 1.0)), g.constant(Array2(1, C)), Array2(1, C),
                                         Array2(1, C, 1.0), 0.0)
                         .value();
    CHECK(y == one);
  }
}

TEST_CASE("self-attention") {
  std::mt19937_64 rng(9);
  ad::Graph g;
  auto weights = [&](std::size_t C, std::size_t heads) {
    AttentionWeights w;
    for (ad::Var* m : {&w.w_q, &w.w_k, &w.w_v, &w.w_o}) *m = g.constant(random_array(C, C, rng));
    for (ad::Var* b : {&w.b_q, &w.b_k, &w.b_v, &w.b_o}) *b = g.constant(random_array(1, C, rng));
    w.heads = heads;
    return w;
  };

  SUBCASE("single vehicle attends to itself with weight exactly 1") {
    const AttentionWeights w = weights(8, 4);
    const Array2 v = random_array(1, 8, rng);
    const std::vector<std::size_t> off{0, 1};
    const auto r = self_attention(g.constant(v), off, w);
    for (const auto& h : r.records[0].heads) CHECK(h(0, 0) == 1.0);
    const Array2 expect = ad::add_row(ad::matmul(ad::add_row(ad::matmul(g.constant(v), w.w_v), w.b_v), w.w_o), w.b_o).value();
    CHECK(max_abs_diff(r.output.value(), expect) < 1e-14);
  }

  SUBCASE("identical rows give uniform attention") {
    const AttentionWeights w = weights(8, 4);
    const Array2 row = random_array(1, 8, rng);
    Array2 v(5, 8);
    for (std::size_t r = 0; r < 5; ++r) std::copy(row.data.begin(), row.data.end(), v.row(r).begin());
    const std::vector<std::size_t> off{0, 5};
    const auto r = self_attention(g.constant(v), off, w);
    for (const auto& h : r.records[0].heads)
      for (double x : h.data) CHECK(std::abs(x - 0.2) < 1e-15);
  }

  SUBCASE("two vehicles, one channel per head, evaluated by hand") {
    const AttentionWeights w = weights(2, 2);
    const Array2 v = random_array(2, 2, rng);
    const std::vector<std::size_t> off{0, 2};
    const auto r = self_attention(g.constant(v), off, w);
    auto proj = [&](const ad::Var& W, const ad::Var& b, std::size_t i, std::size_t c) {
      return b.value()(0, c) + v(i, 0) * W.value()(0, c) + v(i, 1) * W.value()(1, c);
    };
    double mixed[2][2];
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t i = 0; i < 2; ++i) {
        const double s0 = proj(w.w_q, w.b_q, i, h) * proj(w.w_k, w.b_k, 0, h);
        const double s1 = proj(w.w_q, w.b_q, i, h) * proj(w.w_k, w.b_k, 1, h);
        const double p0 = std::exp(s0) / (std::exp(s0) + std::exp(s1)), p1 = 1 - p0;
        CHECK(std::abs(r.records[0].heads[h](i, 0) - p0) < 1e-10);
        CHECK(std::abs(r.records[0].heads[h](i, 1) - p1) < 1e-10);
        mixed[i][h] = p0 * proj(w.w_v, w.b_v, 0, h) + p1 * proj(w.w_v, w.b_v, 1, h);
      }
    }
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t c = 0; c < 2; ++c) {
        const double a = w.b_o.value()(0, c) + mixed[i][0] * w.w_o.value()(0, c) + mixed[i][1] * w.w_o.value()(1, c);
        CHECK(std::abs(r.output.value()(i, c) - a) < 1e-10);
      }
  }

  SUBCASE("rows are stochastic for every N up to 10, scenes stay separate") {
    const AttentionWeights w = weights(8, 4);
    std::vector<std::size_t> off{0};
    for (std::size_t n = 1; n <= 10; ++n) off.push_back(off.back() + n);
    const Array2 v = random_array(off.back(), 8, rng, -3, 3);
    const auto r = self_attention(g.constant(v), off, w);
    REQUIRE(r.records.size() == 10);
    for (std::size_t n = 1; n <= 10; ++n) {
      const auto& rec = r.records[n - 1];
      REQUIRE(rec.heads.size() == 4);
      for (const auto& h : rec.heads) {
        CHECK(h.rows == n);
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0;
          for (double x : h.row(i)) {
            CHECK(x > 0.0);
            CHECK(x <= 1.0);
            s += x;
          }
          CHECK(std::abs(s - 1.0) < 1e-6);
        }
      }
      const Array2 m = rec.mean();
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(std::accumulate(m.row(i).begin(), m.row(i).end(), 0.0) - 1) < 1e-12);
    }
  }
}

TEST_CASE("decoder") {
  std::mt19937_64 rng(11);
  ad::Graph g;
  SUBCASE("zero interaction and zero biases give zero offsets") {
    ModelConfig c;
    const ParamStore p = init_params(c, 1);
    const BoundParams b(g, p, false);
    const ad::Var o = run_decoder(b, c, g.constant(Array2(3, 128)), 4);
    CHECK(o.value() == Array2(3, 60));
    const Array2 xy = offsets_to_coordinates(o.value().row(1), {2.5, -1.0});
    for (std::size_t t = 0; t < 30; ++t) {
      CHECK(xy(t, 0) == 2.5);
      CHECK(xy(t, 1) == -1.0);
    }
  }

  SUBCASE("two-channel toy matches scalar evaluation") {
    const std::size_t C = 2, O = 4;
    DecoderWeights w{g.constant(random_array(C, C, rng)), g.constant(random_array(1, C, rng)),
                     g.constant(random_array(1, C, rng)), g.constant(random_array(1, C, rng)),
                     g.constant(random_array(C, C, rng)), g.constant(random_array(1, C, rng)),
                     g.constant(random_array(1, C, rng)), g.constant(random_array(1, C, rng)),
                     g.constant(random_array(C, O, rng)), g.constant(random_array(1, O, rng))};
    const Array2 a = random_array(3, C, rng, -2, 2);
    const Array2 out = decode(g.constant(a), w, 1, 1e-5).value();
    auto vec = [](const ad::Var& v) { return v.value().data; };
    for (std::size_t r = 0; r < 3; ++r) {
      std::vector<double> h(C), f(C);
      for (std::size_t c = 0; c < C; ++c) {
        h[c] = w.b_r2.value()(0, c);
        for (std::size_t k = 0; k < C; ++k) h[c] += a(r, k) * w.w_r2.value()(k, c);
      }
      h = group_norm_ref(h, vec(w.gn2_gamma), vec(w.gn2_beta), 1, 1e-5);
      for (double& x : h) x = std::max(0.0, x);
      for (std::size_t c = 0; c < C; ++c) {
        f[c] = w.b_r1.value()(0, c);
        for (std::size_t k = 0; k < C; ++k) f[c] += h[k] * w.w_r1.value()(k, c);
      }
      f = group_norm_ref(f, vec(w.gn1_gamma), vec(w.gn1_beta), 1, 1e-5);
      for (std::size_t o = 0; o < O; ++o) {
        double y = w.b_dec.value()(0, o);
        for (std::size_t k = 0; k < C; ++k) y += std::max(0.0, a(r, k) + f[k]) * w.w_dec.value()(k, o);
        CHECK(std::abs(out(r, o) - y) < 1e-12);
      }
    }
  }

  SUBCASE("coordinate conversion commutes with frame inversion") {
    const data::RigidTransform tf{{12.0, -40.0}, 0.83};
    const data::Vec2 raw_origin{3.0, 7.0};
    const data::Vec2 local_origin = tf.apply(raw_origin);
    const Array2 off = random_array(1, 60, rng, -5, 5);
    const Array2 local = offsets_to_coordinates(off.row(0), local_origin);
    for (std::size_t t = 0; t < 30; ++t) {
      const auto via_local = tf.invert({local(t, 0), local(t, 1)});
      // Rotate the offset into the raw frame, then add the raw origin.
      const auto rotated = tf.invert({off(0, 2 * t), off(0, 2 * t + 1)}) - tf.invert({0, 0});
      const auto direct = rotated + raw_origin;
      CHECK(std::abs(via_local.x - direct.x) < 1e-9);
      CHECK(std::abs(via_local.y - direct.y) < 1e-9);
    }
  }
}

TEST_CASE("forward pass: shape, determinism, equivariance") {
  ModelConfig c;
  CratModel model(c, 21);
  // Non-trivial running statistics so eval-mode normalization is exercised.
  std::mt19937_64 rng(2);
  for (std::size_t g = 0; g < c.gnn_layers; ++g) {
    model.params().value(names::gnn(g, "bn.running_mean")) = random_array(1, 128, rng);
    model.params().value(names::gnn(g, "bn.running_var")) = random_array(1, 128, rng, 0.5, 2.0);
  }
  const auto raw = data::generate_synthetic(data::ScenarioKind::constant_velocity, 3, 5);
  const data::Scene& scene = raw[0];

  const Prediction a = model.predict(scene);
  const Prediction b = model.predict(scene);
  REQUIRE(a.trajectories.size() == 6);
  for (const auto& m : a.trajectories.modes) {
    CHECK(m.rows == 30);
    CHECK(m.cols == 2);
    CHECK(all_finite(m));
  }
  for (std::size_t m = 0; m < 6; ++m) CHECK(a.trajectories.modes[m] == b.trajectories.modes[m]);
  CHECK(a.attention.heads.size() == 4);
  CHECK(a.attention.heads[0].rows == scene.vehicle_count());

  SUBCASE("predictions in a batch equal single-scene predictions") {
    const auto batch = model.predict_batch(raw);
    for (std::size_t s = 0; s < raw.size(); ++s) {
      const Prediction single = model.predict(raw[s]);
      for (std::size_t m = 0; m < 6; ++m)
        CHECK(max_abs_diff(batch[s].trajectories.modes[m], single.trajectories.modes[m]) < 1e-12);
    }
  }

  SUBCASE("permuting non-target vehicles leaves the target prediction unchanged") {
    data::Scene perm = scene;
    std::reverse(perm.tracks.begin() + 1, perm.tracks.end());
    const Prediction p = model.predict(perm);
    for (std::size_t m = 0; m < 6; ++m) CHECK(max_abs_diff(p.trajectories.modes[m], a.trajectories.modes[m]) < 1e-9);

    // Train-mode node features permute with the vehicles.
    const data::Scene l0 = data::to_target_frame(scene), l1 = data::to_target_frame(perm);
    ad::Graph g;
    const BoundParams bp(g, model.params(), false);
    const auto f0 = run_backbone(bp, c, make_batch(std::span(&l0, 1), c.history), NormMode::train).interaction.value();
    const auto f1 = run_backbone(bp, c, make_batch(std::span(&l1, 1), c.history), NormMode::train).interaction.value();
    const std::size_t n = scene.vehicle_count();
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t src = r == 0 ? 0 : n - r;
      for (std::size_t k = 0; k < 128; ++k) CHECK(std::abs(f1(r, k) - f0(src, k)) < 1e-9);
    }
  }

  SUBCASE("raw-frame modes invert the stored transform") {
    const auto rawm = a.trajectories.raw_modes();
    const auto& tf = a.trajectories.transform;
    const auto back = tf.apply({rawm[0](4, 0), rawm[0](4, 1)});
    CHECK(std::abs(back.x - a.trajectories.modes[0](4, 0)) < 1e-9);
    CHECK(std::abs(back.y - a.trajectories.modes[0](4, 1)) < 1e-9);
  }

  SUBCASE("active modes restrict the decoders used") {
    model.set_active_modes(1);
    const Prediction one = model.predict(scene);
    CHECK(one.trajectories.size() == 1);
    CHECK(one.trajectories.modes[0] == a.trajectories.modes[0]);
    CHECK_THROWS_AS(model.set_active_modes(7), std::invalid_argument);
  }
}

TEST_CASE("attention-free variant and before-each normalization placement") {
  ModelConfig c = tiny_config();
  c.use_attention = false;
  CratModel m(c, 4);
  const auto scenes = data::generate_synthetic(data::ScenarioKind::intersection, 2, 6);
  const Prediction p = m.predict(scenes[0]);
  CHECK(p.attention.heads.empty());
  CHECK(p.trajectories.size() == 2);

  ModelConfig pre = tiny_config();
  pre.gnn_norm = GnnNormPlacement::before_each;
  CratModel mp(pre, 4);
  CHECK(count_parameters(mp.params()) == count_parameters(CratModel(tiny_config(), 4).params()));
  CHECK(all_finite(mp.predict(scenes[1]).trajectories.modes[0]));
}

TEST_CASE("running statistics follow the momentum rule") {
  ModelConfig c = tiny_config();
  ParamStore p = init_params(c, 1);
  std::vector<ad::BatchStats> stats(2, {Array2(1, 8, 2.0), Array2(1, 8, 3.0)});
  update_running_stats(p, c, stats);
  CHECK(std::abs(p.value(names::gnn(0, "bn.running_mean"))(0, 0) - 0.2) < 1e-15);
  CHECK(std::abs(p.value(names::gnn(1, "bn.running_var"))(0, 7) - (0.9 + 0.1 * 3.0)) < 1e-15);
}

TEST_CASE("full-model gradient check at reduced width") {
  const ModelConfig c = tiny_config();
  std::vector<data::Scene> scenes = local_scenes(data::ScenarioKind::leader_follower, 1, 31);
  for (auto& s : local_scenes(data::ScenarioKind::constant_velocity, 1, 32)) scenes.push_back(s);
  for (auto& s : scenes) s = data::subset(s, {0, 1, 2});
  const SceneBatch batch = make_batch(scenes, c.history);
  Array2 target(scenes.size(), c.output_dim());
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto fut = scenes[s].target_future();
    for (std::size_t t = 0; t < fut.size(); ++t) {
      target(s, 2 * t) = fut[t].x;
      target(s, 2 * t + 1) = fut[t].y;
    }
  }
  // Scaled targets keep every residual on the quadratic branch of smooth-L1.
  for (double& v : target.data) v *= 1e-3;

  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const ParamStore params = init_params(c, seed);
    auto run = [&](const ParamStore& ps, std::vector<Array2>* grads) {
      ad::Graph g;
      const BoundParams p(g, ps);
      const auto bb = run_backbone(p, c, batch, NormMode::train);
      const std::vector<std::size_t> rows{batch.target_row(0), batch.target_row(1)};
      const ad::Var a = ad::gather_rows(bb.interaction, rows);
      ad::Var loss = ad::add(ad::smooth_l1(run_decoder(p, c, a, 0), target, 1.0),
                             ad::smooth_l1(run_decoder(p, c, a, 1), target, 1.0));
      if (grads) {
        g.backward(loss);
        *grads = p.gradients();
      }
      return loss.value().data[0];
    };
    GradCheckOptions opt;
    opt.max_entries_per_param = 12;
    opt.seed = seed;
    const auto report = finite_diff_check([&](const ParamStore& ps) { return run(ps, nullptr); },
                                          [&](const ParamStore& ps) {
                                            std::vector<Array2> gr;
                                            run(ps, &gr);
                                            return gr;
                                          },
                                          params, 1e-6, 1e-4, opt);
    INFO("seed " << seed << " worst " << report.worst.param << "[" << report.worst.index << "] rel "
                 << report.max_rel_error);
    CHECK(report.passed);
    CHECK(report.checked > 100);
  }
}

TEST_CASE("checkpoint round trip validates the architecture") {
  const auto dir = std::filesystem::temp_directory_path() / "crat_model_test";
  std::filesystem::create_directories(dir);
  CratModel m(tiny_config(), 3);
  m.set_active_modes(1);
  m.save(dir / "m.ckpt");
  const CratModel back = CratModel::load(dir / "m.ckpt");
  CHECK(back.config() == m.config());
  CHECK(back.params() == m.params());
  CHECK(back.active_modes() == 1);

  ModelConfig other = tiny_config();
  other.hidden = 16;
  CHECK_THROWS_AS(CratModel(other, m.params()), DataError);
  ParamStore missing;
  CHECK_THROWS_AS(CratModel(tiny_config(), missing), DataError);
  CHECK_THROWS_AS(ModelConfig::from_descriptor("{\"T_h\": 20}"), DataError);
  std::filesystem::remove_all(dir);
}
