#include "vclr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "vclr/error.hpp"
#include "vclr/losses.hpp"

namespace vclr {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kOrderStream = 0x6f726472;
constexpr std::uint64_t kSampleStream = 0x73616d70;

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch < 1) throw ConfigError("train.batch must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (!(momentum >= 0.0)) throw ConfigError("train.momentum must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("train.tau must be > 0");
  if (segments < 1) throw ConfigError("train.segments must be >= 1");
  if (!in_unit(key_momentum)) throw ConfigError("train.key_momentum must be in [0,1]");
  if (bank_capacity < 1) throw ConfigError("train.bank_capacity must be >= 1");
  if (!(losses.inter || losses.intra || losses.segment || losses.order)) {
    throw ConfigError("at least one loss must be enabled");
  }
  if (losses.intra && !losses.inter && !losses.segment && !losses.order) {
    throw ConfigError("intra-only training is not supported: two negatives cannot stabilise training");
  }
  if (losses.order && segments < 2) {
    throw ConfigError("train.loss_order needs train.segments >= 2 (a 1-frame tuple cannot be shuffled)");
  }
  if (hidden < 1 || feature_dim < 1 || embed_dim < 1) throw ConfigError("model dimensions must be positive");
  if (!(augment.min_scale > 0.0 && augment.min_scale <= 1.0)) {
    throw ConfigError("augment.min_scale must be in (0,1]");
  }
  if (!in_unit(augment.crop_jitter)) throw ConfigError("augment.crop_jitter must be in [0,1]");
  if (!in_unit(augment.flip_prob) || !in_unit(augment.blur_prob)) {
    throw ConfigError("augment probabilities must be in [0,1]");
  }
  if (!(augment.brightness >= 0.0) || !(augment.contrast >= 0.0 && augment.contrast < 1.0)) {
    throw ConfigError("augment.brightness must be >= 0 and augment.contrast in [0,1)");
  }
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
}

ModelConfig TrainConfig::model(const DatasetSpec& data) const {
  ModelConfig m;
  m.input_dim = data.height * data.width;
  m.hidden = hidden;
  m.feature_dim = feature_dim;
  m.embed_dim = embed_dim;
  m.segments = segments;
  m.normalize_order = normalize_order;
  m.order_positive_key = order_positive_key;
  return m;
}

double cosine_lr(long step, long total_steps, double lr0) {
  if (total_steps < 1) throw DomainError("cosine_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps) throw DomainError("cosine_lr: step outside [0, total_steps]");
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

TrainingSample make_training_sample(const Video& video, const TrainConfig& cfg, int epoch) {
  Rng rng(derive_seed({cfg.seed, kSampleStream, static_cast<std::uint64_t>(epoch),
                       static_cast<std::uint64_t>(video.id)}));
  TrainingSample s;
  s.pair = sample_tuple_pair(video, cfg.segments, cfg.augment, rng);
  s.triplet = sample_frame_triplet(video, s.pair, cfg.frame_source, cfg.augment, rng);
  return s;
}

BatchInputs assemble_batch(std::span<const TrainingSample> samples) {
  if (samples.empty()) throw DomainError("assemble_batch: empty batch");
  BatchInputs b;
  b.samples = samples.size();
  b.segments = samples.front().pair.anchor.frames.size();
  std::vector<Array> anchor, positive, v1a, v1p, v2, v3;
  for (const TrainingSample& s : samples) {
    if (s.pair.anchor.frames.size() != b.segments || s.pair.positive.frames.size() != b.segments) {
      throw ShapeError("assemble_batch", "tuples of different length in one batch");
    }
    anchor.insert(anchor.end(), s.pair.anchor.frames.begin(), s.pair.anchor.frames.end());
    positive.insert(positive.end(), s.pair.positive.frames.begin(), s.pair.positive.frames.end());
    v1a.push_back(s.triplet.anchor);
    v1p.push_back(s.triplet.positive);
    v2.push_back(s.triplet.second);
    v3.push_back(s.triplet.third);
    b.order_labels.push_back(s.pair.order_label);
  }
  b.anchor_frames = frames_to_rows(anchor);
  b.positive_frames = frames_to_rows(positive);
  b.v1_anchor = frames_to_rows(v1a);
  b.v1_positive = frames_to_rows(v1p);
  b.v2 = frames_to_rows(v2);
  b.v3 = frames_to_rows(v3);
  return b;
}

KeyEmbeddings key_forward(const ParamSet& key, const ModelConfig& model, const BatchInputs& batch) {
  Tape tape;
  const ParamVars p = constant_params(tape, key);
  const std::size_t n = batch.samples, k = batch.segments;
  const std::vector<Var> rows = {tape.constant(batch.positive_frames), tape.constant(batch.v1_positive),
                                 tape.constant(batch.v2), tape.constant(batch.v3)};
  const Var features = encode(tape, p, tape.concat_rows(rows));
  const Var tuple_features = tape.slice_rows(features, 0, n * k);
  const Var frame_features = tape.slice_rows(features, n * k, n * k + 3 * n);

  KeyEmbeddings out;
  const Array inter = tape.value(project(tape, p, Head::Inter, frame_features));
  const Array intra = tape.value(project(tape, p, Head::Intra, frame_features));
  const auto split = [n](const Array& a, std::size_t part) {
    const auto d = a.cols();
    return Array({n, d}, std::vector<double>(a.data().begin() + static_cast<std::ptrdiff_t>(part * n * d),
                                             a.data().begin() + static_cast<std::ptrdiff_t>((part + 1) * n * d)));
  };
  out.inter_p1 = split(inter, 0);
  out.inter_p2 = split(inter, 1);
  out.inter_p3 = split(inter, 2);
  out.intra_p1 = split(intra, 0);
  out.intra_p2 = split(intra, 1);
  out.intra_p3 = split(intra, 2);
  out.segment = tape.value(project(tape, p, Head::Segment, consensus(tape, tuple_features, k)));
  out.order = tape.value(order_embeddings(tape, p, tuple_features, k, model.normalize_order));
  return out;
}

LossTerms build_objective(Tape& tape, const ParamVars& query, const ModelConfig& model,
                          const TrainConfig& cfg, const BatchInputs& batch, const KeyEmbeddings& keys,
                          const Array& inter_negatives, const Array& segment_negatives) {
  const std::size_t n = batch.samples, k = batch.segments;
  const LossToggles& on = cfg.losses;
  const std::vector<Var> rows = {tape.constant(batch.anchor_frames), tape.constant(batch.v1_anchor)};
  const Var features = encode(tape, query, tape.concat_rows(rows));
  const Var tuple_features = tape.slice_rows(features, 0, n * k);
  const Var frame_features = tape.slice_rows(features, n * k, n * k + n);

  LossTerms terms;
  std::vector<Var> enabled;
  if (on.inter) {
    const Var q = project(tape, query, Head::Inter, frame_features);
    terms.inter = loss_inter(tape, q, tape.constant(keys.inter_p1), tape.constant(keys.inter_p2),
                             tape.constant(keys.inter_p3), inter_negatives, cfg.tau);
    enabled.push_back(*terms.inter);
  }
  if (on.intra) {
    const Var q = project(tape, query, Head::Intra, frame_features);
    terms.intra = loss_intra(tape, q, tape.constant(keys.intra_p1), tape.constant(keys.intra_p2),
                             tape.constant(keys.intra_p3), cfg.tau);
    enabled.push_back(*terms.intra);
  }
  if (on.segment) {
    const Var q = project(tape, query, Head::Segment, consensus(tape, tuple_features, k));
    terms.segment = loss_segment(tape, q, tape.constant(keys.segment), segment_negatives, cfg.tau);
    enabled.push_back(*terms.segment);
  }
  if (on.order) {
    const Var anchor = order_embeddings(tape, query, tuple_features, k, model.normalize_order);
    Var positive;
    if (model.order_positive_key) {
      positive = tape.constant(keys.order);
    } else {
      const Var pf = encode(tape, query, tape.constant(batch.positive_frames));
      positive = order_embeddings(tape, query, pf, k, model.normalize_order);
    }
    terms.order_logits = order_classifier(tape, query, anchor, positive);
    terms.has_order_logits = true;
    terms.order = loss_order(tape, terms.order_logits, batch.order_labels);
    enabled.push_back(*terms.order);
  }
  terms.total = total_loss(tape, enabled);
  return terms;
}

long steps_per_epoch(std::size_t train_videos, int batch) {
  if (train_videos == 0 || batch < 1) throw DomainError("steps_per_epoch: empty training set or batch");
  return static_cast<long>((train_videos + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch));
}

TrainState init_train_state(const TrainConfig& cfg, const DatasetSpec& data, std::size_t train_videos) {
  cfg.validate();
  TrainState s;
  s.model = cfg.model(data);
  s.total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch(train_videos, cfg.batch);
  Rng init(derive_seed({cfg.seed, kInitStream}));
  s.query = init_params(s.model, init);
  s.key = s.query;
  for (const Array& a : s.query.values) s.velocity.emplace_back(a.shape(), 0.0);
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  s.inter_bank = MemoryBank(cfg.bank_capacity, d);
  s.segment_bank = MemoryBank(cfg.bank_capacity, d);
  s.order_rng = Rng(derive_seed({cfg.seed, kOrderStream}));
  return s;
}

namespace {

double order_accuracy(const Array& logits, std::span<const int> labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row_span(i);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

}  // namespace

StepMetrics train_step(TrainState& state, std::span<const TrainingSample> samples, const TrainConfig& cfg) {
  const BatchInputs batch = assemble_batch(samples);
  const KeyEmbeddings keys = key_forward(state.key, state.model, batch);
  const Array inter_negatives = state.inter_bank.negatives();
  const Array segment_negatives = state.segment_bank.negatives();

  Tape tape;
  const ParamVars query = track_params(tape, state.query);
  const LossTerms terms =
      build_objective(tape, query, state.model, cfg, batch, keys, inter_negatives, segment_negatives);

  StepMetrics m;
  const auto value_of = [&](const std::optional<Var>& v) { return v ? tape.scalar(*v) : 0.0; };
  m.inter = value_of(terms.inter);
  m.intra = value_of(terms.intra);
  m.segment = value_of(terms.segment);
  m.order = value_of(terms.order);
  m.total = tape.scalar(terms.total);
  if (terms.has_order_logits) m.order_accuracy = order_accuracy(tape.value(terms.order_logits), batch.order_labels);
  if (!std::isfinite(m.total)) throw DomainError("train_step: non-finite loss at step " + std::to_string(state.step));

  tape.backward(terms.total);
  m.lr = cosine_lr(std::min(state.step, state.total_steps), state.total_steps, cfg.lr);

  // SGD with momentum and weight decay; parameters with no gradient path are left untouched.
  for (std::size_t i = 0; i < state.query.values.size(); ++i) {
    if (!tape.reached(query[i])) continue;
    const Array g = tape.grad(query[i]);
    auto w = state.query.values[i].data();
    auto v = state.velocity[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = cfg.momentum * v[j] + g[j] + cfg.weight_decay * w[j];
      w[j] -= m.lr * v[j];
    }
  }

  momentum_update(state.key, state.query, cfg.key_momentum);

  const std::vector<Array> inter_rows = {keys.inter_p1, keys.inter_p2, keys.inter_p3};
  state.inter_bank.enqueue(stack_rows(std::span<const Array>(inter_rows)).reshaped(
      {3 * batch.samples, keys.inter_p1.cols()}));
  state.segment_bank.enqueue(keys.segment);
  ++state.step;
  return m;
}

TrainState pretrain(const TrainConfig& cfg, const DatasetSpec& data, std::span<const Video> train,
                    const EpochHook& on_epoch) {
  TrainState state = init_train_state(cfg, data, train.size());
  const auto batch = static_cast<std::size_t>(cfg.batch);
  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[state.order_rng.below(i)]);

    StepMetrics sum;
    long steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      std::vector<TrainingSample> samples;
      samples.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) samples.push_back(make_training_sample(train[order[i]], cfg, epoch));
      const StepMetrics m = train_step(state, samples, cfg);
      sum.lr += m.lr;
      sum.inter += m.inter;
      sum.intra += m.intra;
      sum.segment += m.segment;
      sum.order += m.order;
      sum.total += m.total;
      sum.order_accuracy += m.order_accuracy;
      ++steps;
    }
    const double inv = 1.0 / static_cast<double>(steps);
    EpochMetrics e;
    e.epoch = epoch + 1;
    e.step = state.step;
    e.mean = {sum.lr * inv, sum.inter * inv, sum.intra * inv, sum.segment * inv,
              sum.order * inv, sum.total * inv, sum.order_accuracy * inv};
    state.epoch = epoch + 1;
    state.history.push_back(e);
    if (on_epoch) on_epoch(state);
  }
  return state;
}

}  // namespace vclr
