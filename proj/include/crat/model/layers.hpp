#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crat/core/graph.hpp"
#include "crat/data/encoding.hpp"
#include "crat/data/scene.hpp"

/// Building blocks of the network. Weights are passed in as graph nodes so the
/// same code serves full-width models and hand-set toy configurations.
/// Linear maps are written x·W + b with W stored (in × out), except the LSTM
/// whose matrices keep the (4H × in) gate-stacked layout.
namespace crat::model {

/// Gate order along the 4H axis: input, forget, cell candidate, output.
struct LstmWeights {
  ad::Var w_ih;  // 4H × in
  ad::Var w_hh;  // 4H × H
  ad::Var b_ih;  // 1 × 4H
  ad::Var b_hh;  // 1 × 4H
};

/// Runs one shared LSTM over every row. `steps[k]` holds the inputs of step k
/// for all vehicles (M × in). Returns the final hidden states (M × H).
ad::Var encode_actors(std::span<const Array2> steps, const LstmWeights& w, ad::Graph& graph);
/// Convenience form over per-vehicle inputs (row i ↔ inputs[i]).
ad::Var encode_actors(std::span<const data::ActorInput> inputs, const LstmWeights& w, ad::Graph& graph);

/// Re-stacks per-vehicle sequences into per-step matrices.
std::vector<Array2> steps_by_time(std::span<const data::ActorInput> inputs);

/// Directed edges: messages flow from `sender[e]` into `receiver[e]`, and
/// row e of `features` is τ_sender − τ_receiver.
struct EdgeList {
  std::vector<std::size_t> receiver;
  std::vector<std::size_t> sender;
  Array2 features{0, 2};
  std::size_t size() const { return receiver.size(); }
};

/// All ordered pairs i ≠ j of the given positions, receiver-major.
EdgeList build_graph(std::span<const data::Vec2> positions);
/// Positions at t = 0 of a target-local scene.
EdgeList build_graph(const data::Scene& scene);

struct CgconvWeights {
  ad::Var w_f;  // (2C + E) × C
  ad::Var b_f;  // 1 × C
  ad::Var w_s;
  ad::Var b_s;
};

/// v_i + Σ_j sigmoid(z W_f + b_f) ⊙ softplus(z W_s + b_s), z = (v_i ‖ v_j ‖ e_ij).
/// No normalization; the caller applies it.
ad::Var cgconv_layer(const ad::Var& nodes, const EdgeList& edges, const CgconvWeights& w);

struct AttentionWeights {
  ad::Var w_q, b_q;
  ad::Var w_k, b_k;
  ad::Var w_v, b_v;
  ad::Var w_o, b_o;
  std::size_t heads = 4;
};

/// Row-stochastic weights of one scene.
struct AttentionRecord {
  std::vector<Array2> heads;  // each N × N
  Array2 mean() const;        // head average
};

struct AttentionResult {
  ad::Var output;                        // M × C
  std::vector<AttentionRecord> records;  // one per scene
};

/// Multi-head scaled dot-product self-attention, computed independently within
/// each scene; scene s owns rows [offsets[s], offsets[s+1]).
AttentionResult self_attention(const ad::Var& nodes, std::span<const std::size_t> offsets,
                               const AttentionWeights& w);

struct DecoderWeights {
  ad::Var w_r2, b_r2, gn2_gamma, gn2_beta;
  ad::Var w_r1, b_r1, gn1_gamma, gn1_beta;
  ad::Var w_dec, b_dec;
};

/// relu(a + F(a))·W_dec + b_dec with F(a) = GN(relu(GN(a W_r2 + b_r2)) W_r1 + b_r1).
/// Returns rows × 2T_f offsets laid out (x₁, y₁, x₂, y₂, …).
ad::Var decode(const ad::Var& interaction, const DecoderWeights& w, std::size_t groups, double eps);

/// Offsets row (2T_f values) plus the t = 0 position, as T_f × 2 coordinates.
Array2 offsets_to_coordinates(std::span<const double> offsets, data::Vec2 origin);

}  // namespace crat::model
