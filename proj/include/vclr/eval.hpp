#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vclr/array.hpp"
#include "vclr/model.hpp"
#include "vclr/synth_data.hpp"

namespace vclr {

/// Video-level features, one row per video.
struct FeatureTable {
  std::string source;
  std::vector<int> ids;
  std::vector<int> labels;
  Array features;

  std::size_t size() const noexcept { return ids.size(); }
  /// Throws unless ids are unique and sizes agree.
  void validate() const;
};

/// Mean of the encoder features of `n_frames` un-augmented frames at indices
/// floor(i * T / n_frames). Heads are not applied.
Array extract_video_feature(const ParamSet& params, const Video& video, int n_frames);

FeatureTable extract_features(const ParamSet& params, std::span<const Video> videos, int n_frames,
                              std::string source);

struct ProbeConfig {
  int iterations = 500;
  double l2 = 1e-3;
  /// Frames per video for feature extraction.
  int frames = 8;
};

/// Multinomial logistic regression trained by full-batch gradient descent
/// (Nesterov momentum) from zero weights on features centred by the training
/// mean and scaled by one global RMS factor, so the probe commutes with any
/// rotation of the feature space. Returns top-1 accuracy on `test`.
double linear_probe(const FeatureTable& train, const FeatureTable& test, const ProbeConfig& cfg);

/// R@k for each k: fraction of queries whose k most cosine-similar gallery
/// rows (excluding rows with the query's own video id) contain its class.
std::vector<double> retrieval_recall(const FeatureTable& queries, const FeatureTable& gallery,
                                     std::span<const int> ks);

/// Held-out accuracy of the 4-way order classifier on freshly sampled tuple
/// pairs (no augmentation), `samples_per_video` pairs per video.
double order_head_accuracy(const ParamSet& query, const ParamSet& key, const ModelConfig& model,
                           std::span<const Video> videos, int samples_per_video, std::uint64_t seed);

}  // namespace vclr
