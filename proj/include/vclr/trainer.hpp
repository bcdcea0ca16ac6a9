#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vclr/array.hpp"
#include "vclr/memory_bank.hpp"
#include "vclr/model.hpp"
#include "vclr/rng.hpp"
#include "vclr/sampling.hpp"
#include "vclr/synth_data.hpp"
#include "vclr/tape.hpp"

namespace vclr {

struct LossToggles {
  bool inter = true;
  bool intra = true;
  bool segment = true;
  bool order = true;
  friend bool operator==(const LossToggles&, const LossToggles&) = default;
};

struct TrainConfig {
  int epochs = 60;
  int batch = 32;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double tau = 0.07;
  int segments = 3;
  double key_momentum = 0.999;
  std::size_t bank_capacity = 4096;
  std::uint64_t seed = 1;
  LossToggles losses;
  FrameSource frame_source = FrameSource::AnchorSegments;
  AugmentConfig augment;
  int hidden = 128;
  int feature_dim = 64;
  int embed_dim = 32;
  bool normalize_order = true;
  bool order_positive_key = true;
  /// Write an intermediate checkpoint every this many epochs; 0 disables.
  int checkpoint_every = 0;

  /// Throws ConfigError. Rejects intra-only (too few negatives to train) and
  /// the order objective with K < 2 (no non-identity shuffle exists).
  void validate() const;
  ModelConfig model(const DatasetSpec& data) const;
};

double cosine_lr(long step, long total_steps, double lr0);

/// Everything one optimisation step consumes for a single video.
struct TrainingSample {
  TuplePair pair;
  FrameTriplet triplet;
};

/// Deterministic per-(seed, epoch, video) sample; independent of batch order.
TrainingSample make_training_sample(const Video& video, const TrainConfig& cfg, int epoch);

/// Batch tensors; frame rows are flattened H*W.
struct BatchInputs {
  std::size_t samples = 0;
  std::size_t segments = 0;
  Array anchor_frames;    // (n*K) x HW, presentation order
  Array positive_frames;  // (n*K) x HW
  Array v1_anchor;        // n x HW
  Array v1_positive;
  Array v2;
  Array v3;
  std::vector<int> order_labels;
};

BatchInputs assemble_batch(std::span<const TrainingSample> samples);

/// Key-side embeddings, computed without gradient.
struct KeyEmbeddings {
  Array inter_p1, inter_p2, inter_p3;
  Array intra_p1, intra_p2, intra_p3;
  Array segment;
  /// n x (K*d) order-head embeddings of the positive tuple.
  Array order;
};

KeyEmbeddings key_forward(const ParamSet& key, const ModelConfig& model, const BatchInputs& batch);

struct LossTerms {
  std::optional<Var> inter, intra, segment, order;
  Var total;
  Var order_logits;
  bool has_order_logits = false;
};

/// Records the joint objective on `tape` with the query parameters `query`.
/// Key embeddings and bank negatives enter as constants.
LossTerms build_objective(Tape& tape, const ParamVars& query, const ModelConfig& model,
                          const TrainConfig& cfg, const BatchInputs& batch, const KeyEmbeddings& keys,
                          const Array& inter_negatives, const Array& segment_negatives);

struct StepMetrics {
  double lr = 0.0;
  double inter = 0.0;
  double intra = 0.0;
  double segment = 0.0;
  double order = 0.0;
  double total = 0.0;
  double order_accuracy = 0.0;
};

struct EpochMetrics {
  int epoch = 0;
  long step = 0;
  StepMetrics mean;
};

struct TrainState {
  long step = 0;
  int epoch = 0;
  long total_steps = 1;
  ModelConfig model;
  ParamSet query;
  ParamSet key;
  std::vector<Array> velocity;
  MemoryBank inter_bank;
  MemoryBank segment_bank;
  /// Drives the per-epoch visiting order of training videos.
  Rng order_rng;
  std::vector<EpochMetrics> history;
};

/// Fresh state: query params from the init stream, key = exact copy, zero velocity, empty banks.
TrainState init_train_state(const TrainConfig& cfg, const DatasetSpec& data, std::size_t train_videos);

long steps_per_epoch(std::size_t train_videos, int batch);

/// One optimisation step: backward -> SGD on query -> momentum update of key -> enqueue.
StepMetrics train_step(TrainState& state, std::span<const TrainingSample> batch, const TrainConfig& cfg);

/// Called after each epoch with the updated state.
using EpochHook = std::function<void(const TrainState&)>;

/// Full pretraining loop over `train`.
TrainState pretrain(const TrainConfig& cfg, const DatasetSpec& data, std::span<const Video> train,
                    const EpochHook& on_epoch = {});

}  // namespace vclr
