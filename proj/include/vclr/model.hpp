#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vclr/array.hpp"
#include "vclr/rng.hpp"
#include "vclr/tape.hpp"

namespace vclr {

/// Projection heads, one per objective. Same architecture, separate weights.
enum class Head { Inter = 0, Intra = 1, Segment = 2, Order = 3 };

inline constexpr std::array<Head, 4> kHeads = {Head::Inter, Head::Intra, Head::Segment, Head::Order};
const char* head_name(Head h);

struct ModelConfig {
  /// Flattened frame size H * W.
  int input_dim = 256;
  int hidden = 128;
  /// Encoder output width D.
  int feature_dim = 64;
  /// Head output width d.
  int embed_dim = 32;
  /// Frames per tuple K; fixes the order classifier input width 2 * K * d.
  int segments = 3;
  /// L2-normalise order-head embeddings before concatenation.
  bool normalize_order = true;
  /// Positive-tuple order embeddings come from the key network (else the query network).
  bool order_positive_key = true;

  void validate() const;
};

/// Indices into ParamSet::values.
namespace param {
inline constexpr std::size_t kEncoderW1 = 0;
inline constexpr std::size_t kEncoderB1 = 1;
inline constexpr std::size_t kEncoderW2 = 2;
inline constexpr std::size_t kEncoderB2 = 3;
inline constexpr std::size_t kHeadBase = 4;
inline constexpr std::size_t kPerHead = 4;
inline constexpr std::size_t kOrderW = kHeadBase + 4 * kPerHead;
inline constexpr std::size_t kOrderB = kOrderW + 1;
inline constexpr std::size_t kCount = kOrderB + 1;

constexpr std::size_t head(Head h, std::size_t slot) {
  return kHeadBase + static_cast<std::size_t>(h) * kPerHead + slot;
}
}  // namespace param

/// Named parameter arrays for the encoder (input -> hidden -> ReLU -> D),
/// four heads (D -> D -> ReLU -> d) and the order classifier (2Kd -> 4).
/// Weights are stored fan_in x fan_out so a layer is x * W + b.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Array> values;

  std::size_t size() const noexcept { return values.size(); }
  std::size_t scalar_count() const noexcept;
  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// Every array drawn uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
ParamSet init_params(const ModelConfig& cfg, Rng& rng);

/// Checks names and shapes against `cfg`.
void check_params(const ParamSet& params, const ModelConfig& cfg);

/// k <- m * k + (1 - m) * q for every array.
void momentum_update(ParamSet& key, const ParamSet& query, double m);

/// Tape handles for one ParamSet.
struct ParamVars {
  std::vector<Var> v;
  Var operator[](std::size_t i) const { return v[i]; }
};

ParamVars track_params(Tape& tape, const ParamSet& params);
ParamVars constant_params(Tape& tape, const ParamSet& params);

/// Frames flattened into rows of a matrix.
Array frames_to_rows(std::span<const Array> frames);

// Tape-level forward passes. Row i of every input matrix is one frame.
Var encode(Tape& tape, const ParamVars& p, Var frames);
/// MLP head then row-wise L2 normalisation.
Var project(Tape& tape, const ParamVars& p, Head head, Var features);
/// Mean over each consecutive block of K feature rows.
Var consensus(Tape& tape, Var features, std::size_t k);
/// frames: (n*K) x input rows, tuple-major -> n x d unit rows.
Var tuple_embedding(Tape& tape, const ParamVars& p, Var frames, std::size_t k);
/// Order-head embeddings of encoder features for n tuples, each tuple's K
/// frame embeddings concatenated in presentation order -> n x (K*d).
Var order_embeddings(Tape& tape, const ParamVars& p, Var features, std::size_t k, bool normalize);
/// h_o applied to [anchor | positive] rows -> n x 4.
Var order_classifier(Tape& tape, const ParamVars& p, Var anchor_embeddings, Var positive_embeddings);

// Array-level conveniences.
Array encode(const ParamSet& params, const Array& frame);
Array project(const ParamSet& params, Head head, const Array& feature);
Array consensus(const Array& features);
Array tuple_embedding(const ParamSet& params, std::span<const Array> frames);
/// Anchor frames go through `query`, positive frames through `key` (or `query`
/// when cfg.order_positive_key is false); h_o always comes from `query`.
Array order_logits(const ParamSet& query, const ParamSet& key, const ModelConfig& cfg,
                   std::span<const Array> anchor_frames, std::span<const Array> positive_frames);

}  // namespace vclr
