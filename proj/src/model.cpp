#include "vclr/model.hpp"

#include <cmath>
#include <string>

#include "vclr/error.hpp"

namespace vclr {

const char* head_name(Head h) {
  switch (h) {
    case Head::Inter: return "inter";
    case Head::Intra: return "intra";
    case Head::Segment: return "segment";
    case Head::Order: return "order";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (input_dim < 1 || hidden < 1 || feature_dim < 1 || embed_dim < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  if (segments < 1) throw ConfigError("train.segments must be >= 1");
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const Array& a : values) n += a.size();
  return n;
}

namespace {

struct Layout {
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> shapes;
};

Layout layout(const ModelConfig& cfg) {
  const auto in = static_cast<std::size_t>(cfg.input_dim);
  const auto hid = static_cast<std::size_t>(cfg.hidden);
  const auto D = static_cast<std::size_t>(cfg.feature_dim);
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  const auto K = static_cast<std::size_t>(cfg.segments);
  Layout l;
  const auto add = [&](std::string name, std::size_t r, std::size_t c) {
    l.names.push_back(std::move(name));
    l.shapes.push_back({r, c});
  };
  add("encoder.fc1.weight", in, hid);
  add("encoder.fc1.bias", 1, hid);
  add("encoder.fc2.weight", hid, D);
  add("encoder.fc2.bias", 1, D);
  for (Head h : kHeads) {
    const std::string base = std::string("head.") + head_name(h);
    add(base + ".fc1.weight", D, D);
    add(base + ".fc1.bias", 1, D);
    add(base + ".fc2.weight", D, d);
    add(base + ".fc2.bias", 1, d);
  }
  add("order.weight", 2 * K * d, 4);
  add("order.bias", 1, 4);
  return l;
}

}  // namespace

ParamSet init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const Layout l = layout(cfg);
  ParamSet p;
  p.names = l.names;
  // Biases share the fan_in of the weight they follow.
  double bound = 0.0;
  for (std::size_t i = 0; i < l.shapes.size(); ++i) {
    Array a(l.shapes[i]);
    if (i % 2 == 0) bound = 1.0 / std::sqrt(static_cast<double>(l.shapes[i][0]));
    for (double& v : a.data()) v = rng.uniform(-bound, bound);
    p.values.push_back(std::move(a));
  }
  return p;
}

void check_params(const ParamSet& params, const ModelConfig& cfg) {
  const Layout l = layout(cfg);
  if (params.values.size() != l.shapes.size() || params.names != l.names) {
    throw ShapeError("ParamSet", "parameter names do not match the model layout");
  }
  for (std::size_t i = 0; i < l.shapes.size(); ++i) {
    if (params.values[i].shape() != l.shapes[i]) {
      throw ShapeError("ParamSet", l.names[i] + " is " + shape_string(params.values[i]) +
                                       ", expected " + shape_string(l.shapes[i]));
    }
  }
}

void momentum_update(ParamSet& key, const ParamSet& query, double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw DomainError("momentum_update: m must be in [0,1]");
  if (key.values.size() != query.values.size()) {
    throw ShapeError("momentum_update", std::to_string(key.values.size()) + " vs " +
                                            std::to_string(query.values.size()) + " arrays");
  }
  for (std::size_t i = 0; i < key.values.size(); ++i) {
    if (!key.values[i].same_shape(query.values[i])) {
      throw ShapeError("momentum_update", key.names[i] + ": " + shape_string(key.values[i]) +
                                              " vs " + shape_string(query.values[i]));
    }
  }
  const double w = 1.0 - m;
  for (std::size_t i = 0; i < key.values.size(); ++i) {
    auto k = key.values[i].data();
    const auto q = query.values[i].data();
    for (std::size_t j = 0; j < k.size(); ++j) k[j] = m * k[j] + w * q[j];
  }
}

ParamVars track_params(Tape& tape, const ParamSet& params) {
  ParamVars pv;
  for (const Array& a : params.values) pv.v.push_back(tape.input(a));
  return pv;
}

ParamVars constant_params(Tape& tape, const ParamSet& params) {
  ParamVars pv;
  for (const Array& a : params.values) pv.v.push_back(tape.constant(a));
  return pv;
}

Array frames_to_rows(std::span<const Array> frames) { return stack_rows(frames); }

Var encode(Tape& tape, const ParamVars& p, Var frames) {
  using namespace param;
  const Var h = tape.relu(tape.add_row(tape.matmul(frames, p[kEncoderW1]), p[kEncoderB1]));
  return tape.add_row(tape.matmul(h, p[kEncoderW2]), p[kEncoderB2]);
}

Var project(Tape& tape, const ParamVars& p, Head head, Var features) {
  const Var h = tape.relu(tape.add_row(tape.matmul(features, p[param::head(head, 0)]), p[param::head(head, 1)]));
  const Var z = tape.add_row(tape.matmul(h, p[param::head(head, 2)]), p[param::head(head, 3)]);
  return tape.l2_normalize(z);
}

Var consensus(Tape& tape, Var features, std::size_t k) { return tape.group_mean(features, k); }

Var tuple_embedding(Tape& tape, const ParamVars& p, Var frames, std::size_t k) {
  return project(tape, p, Head::Segment, consensus(tape, encode(tape, p, frames), k));
}

Var order_embeddings(Tape& tape, const ParamVars& p, Var features, std::size_t k, bool normalize) {
  const Var h = tape.relu(tape.add_row(tape.matmul(features, p[param::head(Head::Order, 0)]),
                                       p[param::head(Head::Order, 1)]));
  Var z = tape.add_row(tape.matmul(h, p[param::head(Head::Order, 2)]), p[param::head(Head::Order, 3)]);
  if (normalize) z = tape.l2_normalize(z);
  const Array& zv = tape.value(z);
  if (zv.rows() % k != 0) {
    throw ShapeError("order_embeddings", shape_string(zv) + " rows not a multiple of K=" + std::to_string(k));
  }
  return tape.reshape(z, zv.rows() / k, zv.cols() * k);
}

Var order_classifier(Tape& tape, const ParamVars& p, Var anchor_embeddings, Var positive_embeddings) {
  const std::array<Var, 2> parts = {anchor_embeddings, positive_embeddings};
  const Var x = tape.concat_cols(parts);
  const Array& w = tape.value(p[param::kOrderW]);
  if (tape.value(x).cols() != w.rows()) {
    throw ShapeError("order_logits", "input width " + std::to_string(tape.value(x).cols()) +
                                         " vs classifier " + shape_string(w));
  }
  return tape.add_row(tape.matmul(x, p[param::kOrderW]), p[param::kOrderB]);
}

Array encode(const ParamSet& params, const Array& frame) {
  Tape tape;
  const ParamVars p = constant_params(tape, params);
  const Array row = frame.reshaped({1, frame.size()});
  if (row.cols() != params.values[param::kEncoderW1].rows()) {
    throw ShapeError("encode", "frame " + shape_string(frame) + " vs encoder input " +
                                   shape_string(params.values[param::kEncoderW1]));
  }
  return tape.value(encode(tape, p, tape.constant(row)));
}

Array project(const ParamSet& params, Head head, const Array& feature) {
  Tape tape;
  const ParamVars p = constant_params(tape, params);
  return tape.value(project(tape, p, head, tape.constant(feature.reshaped({1, feature.size()}))));
}

Array consensus(const Array& features) {
  if (features.rows() == 0 || features.size() == 0) throw DomainError("consensus: no rows");
  Tape tape;
  return tape.value(tape.group_mean(tape.constant(features), features.rows()));
}

Array tuple_embedding(const ParamSet& params, std::span<const Array> frames) {
  if (frames.empty()) throw DomainError("tuple_embedding: empty tuple");
  Tape tape;
  const ParamVars p = constant_params(tape, params);
  return tape.value(tuple_embedding(tape, p, tape.constant(frames_to_rows(frames)), frames.size()));
}

Array order_logits(const ParamSet& query, const ParamSet& key, const ModelConfig& cfg,
                   std::span<const Array> anchor_frames, std::span<const Array> positive_frames) {
  if (anchor_frames.size() != positive_frames.size() || anchor_frames.empty()) {
    throw ShapeError("order_logits", std::to_string(anchor_frames.size()) + " anchor vs " +
                                         std::to_string(positive_frames.size()) + " positive frames");
  }
  const std::size_t k = anchor_frames.size();
  Tape tape;
  const ParamVars q = constant_params(tape, query);
  const ParamVars kp = cfg.order_positive_key ? constant_params(tape, key) : q;
  const Var a = order_embeddings(tape, q, encode(tape, q, tape.constant(frames_to_rows(anchor_frames))), k,
                                 cfg.normalize_order);
  const Var p = order_embeddings(tape, kp, encode(tape, kp, tape.constant(frames_to_rows(positive_frames))), k,
                                 cfg.normalize_order);
  return tape.value(order_classifier(tape, q, a, p));
}

}  // namespace vclr
