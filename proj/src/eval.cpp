#include "vclr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "vclr/error.hpp"
#include "vclr/rng.hpp"
#include "vclr/sampling.hpp"
#include "vclr/tape.hpp"

namespace vclr {

void FeatureTable::validate() const {
  if (ids.size() != labels.size() || (ids.size() != features.rows() && features.size() != 0)) {
    throw ShapeError("FeatureTable", std::to_string(ids.size()) + " ids, " + std::to_string(labels.size()) +
                                         " labels, features " + shape_string(features));
  }
  std::set<int> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size()) throw DomainError("FeatureTable " + source + ": duplicate video ids");
}

Array extract_video_feature(const ParamSet& params, const Video& video, int n_frames) {
  if (n_frames < 1) throw DomainError("extract_video_feature: n_frames must be >= 1");
  if (video.frames.empty()) throw DomainError("extract_video_feature: empty video");
  const long T = video.length();
  std::vector<Array> frames;
  for (long i = 0; i < n_frames; ++i) frames.push_back(video.frames[static_cast<std::size_t>(i * T / n_frames)]);
  Tape tape;
  const ParamVars p = constant_params(tape, params);
  const Var f = encode(tape, p, tape.constant(frames_to_rows(frames)));
  return tape.value(consensus(tape, f, frames.size()));
}

FeatureTable extract_features(const ParamSet& params, std::span<const Video> videos, int n_frames,
                              std::string source) {
  FeatureTable t;
  t.source = std::move(source);
  std::vector<Array> rows;
  for (const Video& v : videos) {
    t.ids.push_back(v.id);
    t.labels.push_back(v.class_id);
    rows.push_back(extract_video_feature(params, v, n_frames));
  }
  if (!rows.empty()) t.features = stack_rows(rows);
  t.validate();
  return t;
}

namespace {

void require_same_width(const FeatureTable& a, const FeatureTable& b, const char* op) {
  if (a.features.cols() != b.features.cols()) {
    throw ShapeError(op, shape_string(a.features) + " vs " + shape_string(b.features));
  }
}

}  // namespace

double linear_probe(const FeatureTable& train, const FeatureTable& test, const ProbeConfig& cfg) {
  train.validate();
  test.validate();
  require_same_width(train, test, "linear_probe");
  if (train.size() == 0 || test.size() == 0) throw DomainError("linear_probe: empty table");
  if (cfg.iterations < 1 || !(cfg.l2 >= 0.0)) throw ConfigError("probe.iterations >= 1 and probe.l2 >= 0 required");
  const std::set<int> train_classes(train.labels.begin(), train.labels.end());
  for (int c : test.labels) {
    if (!train_classes.count(c)) throw DomainError("linear_probe: class " + std::to_string(c) + " absent from train");
  }
  const int n_classes = *train_classes.rbegin() + 1;
  const std::size_t n = train.size(), D = train.features.cols(), C = static_cast<std::size_t>(n_classes);

  std::vector<double> mean(D, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < D; ++j) mean[j] += train.features(i, j);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  double ms = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < D; ++j) ms += std::pow(train.features(i, j) - mean[j], 2);
  }
  const double rms = std::sqrt(ms / static_cast<double>(n));
  const double inv_scale = rms > 0.0 ? 1.0 / rms : 1.0;

  // Design matrices with a trailing bias column.
  const auto design = [&](const Array& f) {
    Array x = Array::matrix(f.rows(), D + 1);
    for (std::size_t i = 0; i < f.rows(); ++i) {
      for (std::size_t j = 0; j < D; ++j) x(i, j) = (f(i, j) - mean[j]) * inv_scale;
      x(i, D) = 1.0;
    }
    return x;
  };
  const Array x = design(train.features);
  const Array xt = design(test.features);

  // Step size 1 / L with L = lambda_max(X^T X / n) / 2 + l2 bounding the curvature.
  std::vector<double> v(D + 1, 1.0), w(D + 1);
  double lambda = 1.0;
  for (int it = 0; it < 200; ++it) {
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j <= D; ++j) dot += x(i, j) * v[j];
      for (std::size_t j = 0; j <= D; ++j) w[j] += x(i, j) * dot / static_cast<double>(n);
    }
    double norm = 0.0;
    for (double e : w) norm += e * e;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    lambda = norm;
    for (std::size_t j = 0; j <= D; ++j) v[j] = w[j] / norm;
  }
  const double step = 1.0 / (0.5 * lambda + cfg.l2);

  Array weights = Array::matrix(D + 1, C);
  Array lookahead = weights;
  Array previous = weights;
  Array grad = Array::matrix(D + 1, C);
  std::vector<double> probs(C);
  for (int it = 0; it < cfg.iterations; ++it) {
    std::fill(grad.data().begin(), grad.data().end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -INFINITY;
      for (std::size_t c = 0; c < C; ++c) {
        double z = 0.0;
        for (std::size_t j = 0; j <= D; ++j) z += x(i, j) * lookahead(j, c);
        probs[c] = z;
        mx = std::max(mx, z);
      }
      double s = 0.0;
      for (double& p : probs) {
        p = std::exp(p - mx);
        s += p;
      }
      for (std::size_t c = 0; c < C; ++c) {
        const double r = probs[c] / s - (static_cast<int>(c) == train.labels[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j <= D; ++j) grad(j, c) += x(i, j) * r / static_cast<double>(n);
      }
    }
    for (std::size_t j = 0; j < D; ++j) {
      for (std::size_t c = 0; c < C; ++c) grad(j, c) += cfg.l2 * lookahead(j, c);
    }
    const double beta = static_cast<double>(it) / (static_cast<double>(it) + 3.0);
    for (std::size_t e = 0; e < weights.size(); ++e) {
      previous[e] = weights[e];
      weights[e] = lookahead[e] - step * grad[e];
      lookahead[e] = weights[e] + beta * (weights[e] - previous[e]);
    }
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < xt.rows(); ++i) {
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t c = 0; c < C; ++c) {
      double z = 0.0;
      for (std::size_t j = 0; j <= D; ++j) z += xt(i, j) * weights(j, c);
      if (z > best_score) {
        best_score = z;
        best = c;
      }
    }
    if (static_cast<int>(best) == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(xt.rows());
}

std::vector<double> retrieval_recall(const FeatureTable& queries, const FeatureTable& gallery,
                                     std::span<const int> ks) {
  queries.validate();
  gallery.validate();
  if (gallery.size() == 0) throw DomainError("retrieval_recall: empty gallery");
  if (queries.size() == 0) throw DomainError("retrieval_recall: no queries");
  require_same_width(queries, gallery, "retrieval_recall");
  int max_k = 0;
  for (int k : ks) {
    if (k < 1 || static_cast<std::size_t>(k) > gallery.size()) {
      throw DomainError("retrieval_recall: k=" + std::to_string(k) + " outside [1," +
                        std::to_string(gallery.size()) + "]");
    }
    max_k = std::max(max_k, k);
  }

  const auto unit = [](const Array& f) {
    Array out = f;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      double ss = 0.0;
      for (double v : out.row_span(i)) ss += v * v;
      const double norm = std::sqrt(ss);
      if (norm > 0.0) {
        for (double& v : out.row_span(i)) v /= norm;
      }
    }
    return out;
  };
  const Array q = unit(queries.features);
  const Array g = unit(gallery.features);

  std::vector<std::size_t> hits(ks.size(), 0);
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    ranked.clear();
    for (std::size_t j = 0; j < g.rows(); ++j) {
      if (gallery.ids[j] == queries.ids[i]) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) s += q(i, c) * g(j, c);
      ranked.emplace_back(s, j);
    }
    // Highest similarity first; ties keep gallery order.
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t first_hit = ranked.size();
    for (std::size_t r = 0; r < ranked.size() && r < static_cast<std::size_t>(max_k); ++r) {
      if (gallery.labels[ranked[r].second] == queries.labels[i]) {
        first_hit = r;
        break;
      }
    }
    for (std::size_t t = 0; t < ks.size(); ++t) {
      if (first_hit < static_cast<std::size_t>(ks[t])) ++hits[t];
    }
  }
  std::vector<double> out;
  for (std::size_t h : hits) out.push_back(static_cast<double>(h) / static_cast<double>(q.rows()));
  return out;
}

double order_head_accuracy(const ParamSet& query, const ParamSet& key, const ModelConfig& model,
                           std::span<const Video> videos, int samples_per_video, std::uint64_t seed) {
  if (videos.empty() || samples_per_video < 1) throw DomainError("order_head_accuracy: nothing to evaluate");
  AugmentConfig none;
  none.min_scale = 1.0;
  none.flip_prob = 0.0;
  none.brightness = 0.0;
  none.contrast = 0.0;
  none.blur_prob = 0.0;
  std::size_t correct = 0, total = 0;
  for (const Video& v : videos) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(v.id)}));
    for (int s = 0; s < samples_per_video; ++s) {
      const TuplePair pair = sample_tuple_pair(v, model.segments, none, rng);
      const Array logits = order_logits(query, key, model, pair.anchor.frames, pair.positive.frames);
      const auto row = logits.row_span(0);
      const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      if (best == pair.order_label) ++correct;
      ++total;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace vclr
