#include "crat/model/layers.hpp"

#include <cmath>

#include "crat/core/errors.hpp"
#include "crat/core/ops.hpp"

namespace crat::model {

using ad::Var;

std::vector<Array2> steps_by_time(std::span<const data::ActorInput> inputs) {
  if (inputs.empty()) throw ShapeError("steps_by_time: no vehicles");
  const std::size_t T = inputs[0].steps.rows;
  const std::size_t in = inputs[0].steps.cols;
  std::vector<Array2> steps(T, Array2(inputs.size(), in));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Array2& s = inputs[i].steps;
    if (s.rows != T || s.cols != in) {
      throw ShapeError("steps_by_time: vehicle " + std::to_string(i) + " has " + s.shape_str() + ", expected " +
                       std::to_string(T) + "x" + std::to_string(in));
    }
    for (std::size_t k = 0; k < T; ++k)
      for (std::size_t c = 0; c < in; ++c) steps[k](i, c) = s(k, c);
  }
  return steps;
}

Var encode_actors(std::span<const Array2> steps, const LstmWeights& w, ad::Graph& graph) {
  if (steps.empty()) throw ShapeError("encode_actors: empty sequence");
  const std::size_t H = w.w_hh.cols();
  if (w.w_ih.rows() != 4 * H || w.w_hh.rows() != 4 * H) {
    throw ShapeError("encode_actors: gate-stacked weights must have 4H rows, got " + w.w_ih.value().shape_str() +
                     " and " + w.w_hh.value().shape_str());
  }
  const std::size_t M = steps[0].rows;
  const Var bias = ad::add(w.b_ih, w.b_hh);
  Var h, c;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (steps[k].rows != M) throw ShapeError("encode_actors: step rows differ");
    Var gates = ad::add_row(ad::matmul_bt(graph.constant(steps[k]), w.w_ih), bias);
    if (k > 0) gates = ad::add(gates, ad::matmul_bt(h, w.w_hh));
    const Var i_gate = ad::sigmoid(ad::slice_cols(gates, 0, H));
    const Var f_gate = ad::sigmoid(ad::slice_cols(gates, H, 2 * H));
    const Var g_gate = ad::tanh(ad::slice_cols(gates, 2 * H, 3 * H));
    const Var o_gate = ad::sigmoid(ad::slice_cols(gates, 3 * H, 4 * H));
    c = k == 0 ? ad::mul(i_gate, g_gate) : ad::add(ad::mul(f_gate, c), ad::mul(i_gate, g_gate));
    h = ad::mul(o_gate, ad::tanh(c));
  }
  return h;
}

Var encode_actors(std::span<const data::ActorInput> inputs, const LstmWeights& w, ad::Graph& graph) {
  const auto steps = steps_by_time(inputs);
  return encode_actors(steps, w, graph);
}

EdgeList build_graph(std::span<const data::Vec2> positions) {
  const std::size_t n = positions.size();
  EdgeList edges;
  edges.features = Array2(n * (n > 0 ? n - 1 : 0), 2);
  std::size_t e = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      edges.receiver.push_back(i);
      edges.sender.push_back(j);
      edges.features(e, 0) = positions[j].x - positions[i].x;
      edges.features(e, 1) = positions[j].y - positions[i].y;
      ++e;
    }
  }
  return edges;
}

EdgeList build_graph(const data::Scene& scene) {
  std::vector<data::Vec2> pos;
  pos.reserve(scene.tracks.size());
  for (const auto& tr : scene.tracks) {
    const auto p = tr.at(0);
    if (!p) throw DataError("build_graph: track '" + tr.id + "' not observed at t=0");
    pos.push_back(*p);
  }
  return build_graph(pos);
}

namespace {

/// z·W + b for every edge, without materializing z.
Var edge_linear(const Var& nodes, const Var& edge_feat, const EdgeList& edges, const Var& w, const Var& b) {
  const std::size_t C = nodes.cols();
  const Var own = ad::matmul(nodes, ad::slice_rows(w, 0, C));
  const Var other = ad::matmul(nodes, ad::slice_rows(w, C, 2 * C));
  const Var rel = ad::matmul(edge_feat, ad::slice_rows(w, 2 * C, w.rows()));
  Var out = ad::add(ad::gather_rows(own, edges.receiver), ad::gather_rows(other, edges.sender));
  return ad::add_row(ad::add(out, rel), b);
}

}  // namespace

Var cgconv_layer(const Var& nodes, const EdgeList& edges, const CgconvWeights& w) {
  const std::size_t C = nodes.cols();
  const std::size_t expect = 2 * C + edges.features.cols;
  for (const Var* m : {&w.w_f, &w.w_s}) {
    if (m->rows() != expect || m->cols() != C) {
      throw ShapeError("cgconv_layer: weight " + m->value().shape_str() + " does not fit nodes " +
                       nodes.value().shape_str() + " with " + std::to_string(edges.features.cols) + "-dim edges");
    }
  }
  if (edges.size() == 0) return nodes;
  const Var e = nodes.graph().constant(edges.features);
  const Var gate = ad::sigmoid(edge_linear(nodes, e, edges, w.w_f, w.b_f));
  const Var core = ad::softplus(edge_linear(nodes, e, edges, w.w_s, w.b_s));
  const Var messages = ad::scatter_add_rows(ad::mul(gate, core), edges.receiver, nodes.rows());
  return ad::add(nodes, messages);
}

Array2 AttentionRecord::mean() const {
  if (heads.empty()) return {};
  Array2 out(heads[0].rows, heads[0].cols);
  for (const auto& h : heads)
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += h.data[i];
  for (double& v : out.data) v /= double(heads.size());
  return out;
}

AttentionResult self_attention(const Var& nodes, std::span<const std::size_t> offsets, const AttentionWeights& w) {
  const std::size_t C = w.w_q.cols();
  if (w.heads == 0 || C % w.heads != 0) {
    throw ShapeError("self_attention: " + std::to_string(w.heads) + " heads do not divide width " + std::to_string(C));
  }
  if (offsets.size() < 2 || offsets.back() != nodes.rows()) {
    throw ShapeError("self_attention: scene offsets do not cover " + nodes.value().shape_str());
  }
  const std::size_t d = C / w.heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(double(d));
  const Var q = ad::add_row(ad::matmul(nodes, w.w_q), w.b_q);
  const Var k = ad::add_row(ad::matmul(nodes, w.w_k), w.b_k);
  const Var v = ad::add_row(ad::matmul(nodes, w.w_v), w.b_v);

  AttentionResult result;
  std::vector<Var> per_scene;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (hi <= lo) throw ShapeError("self_attention: empty scene " + std::to_string(s));
    const Var qs = ad::slice_rows(q, lo, hi), ks = ad::slice_rows(k, lo, hi), vs = ad::slice_rows(v, lo, hi);
    AttentionRecord record;
    std::vector<Var> heads;
    for (std::size_t h = 0; h < w.heads; ++h) {
      const std::size_t c0 = h * d, c1 = c0 + d;
      const Var scores = ad::scale(ad::matmul_bt(ad::slice_cols(qs, c0, c1), ad::slice_cols(ks, c0, c1)), inv_sqrt_d);
      const Var weights = ad::row_softmax(scores);
      record.heads.push_back(weights.value());
      heads.push_back(ad::matmul(weights, ad::slice_cols(vs, c0, c1)));
    }
    per_scene.push_back(ad::concat_cols(heads));
    result.records.push_back(std::move(record));
  }
  const Var joined = per_scene.size() == 1 ? per_scene[0] : ad::concat_rows(per_scene);
  result.output = ad::add_row(ad::matmul(joined, w.w_o), w.b_o);
  return result;
}

Var decode(const Var& a, const DecoderWeights& w, std::size_t groups, double eps) {
  const Var h = ad::relu(ad::group_norm(ad::add_row(ad::matmul(a, w.w_r2), w.b_r2), w.gn2_gamma, w.gn2_beta, groups, eps));
  const Var f = ad::group_norm(ad::add_row(ad::matmul(h, w.w_r1), w.b_r1), w.gn1_gamma, w.gn1_beta, groups, eps);
  return ad::add_row(ad::matmul(ad::relu(ad::add(a, f)), w.w_dec), w.b_dec);
}

Array2 offsets_to_coordinates(std::span<const double> offsets, data::Vec2 origin) {
  if (offsets.size() % 2 != 0) throw ShapeError("offsets_to_coordinates: odd length " + std::to_string(offsets.size()));
  Array2 out(offsets.size() / 2, 2);
  for (std::size_t t = 0; t < out.rows; ++t) {
    out(t, 0) = offsets[2 * t] + origin.x;
    out(t, 1) = offsets[2 * t + 1] + origin.y;
  }
  return out;
}

}  // namespace crat::model
