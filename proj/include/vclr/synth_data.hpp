#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vclr/array.hpp"

namespace vclr {

struct DatasetSpec {
  int classes = 8;
  int videos_per_class = 25;
  int frames = 32;
  int height = 16;
  int width = 16;
  bool untrimmed = false;
  /// Fraction of the timeline covered by the action in untrimmed mode.
  double coverage = 0.5;
  /// Amplitude of the additive uniform pixel noise.
  double noise = 0.05;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;

  /// Throws ConfigError on any field outside its documented range.
  void validate() const;
};

/// Half-open frame range [start, end).
struct FrameWindow {
  int start = 0;
  int end = 0;
  friend bool operator==(const FrameWindow&, const FrameWindow&) = default;
};

struct Video {
  int id = 0;
  int class_id = 0;
  /// T frames, each H x W with values in [0, 1].
  std::vector<Array> frames;
  std::optional<FrameWindow> action_window;

  int length() const { return static_cast<int>(frames.size()); }
  friend bool operator==(const Video&, const Video&) = default;
};

/// Appearance and motion parameters that identify a class. Direction is the
/// primary signal (classes are spread evenly around the compass); blob width
/// and stripe texture are secondary.
struct ClassStyle {
  double direction_x = 0.0;
  double direction_y = 0.0;
  /// Pixels per frame.
  double speed = 0.0;
  double blob_sigma = 0.0;
  double texture_strength = 0.0;
  double texture_frequency = 0.0;
};

ClassStyle class_style(const DatasetSpec& spec, int class_id);

/// Pure function of (spec.seed, class_id, video_index) and the spec's shape fields.
Video generate_video(const DatasetSpec& spec, int class_id, int video_index);

struct Dataset {
  std::vector<Video> train;
  std::vector<Video> test;
};

/// Stratified per-class split: round(train_fraction * n) videos of each
/// class go to train (clamped so both sides get at least one).
Dataset generate_dataset(const DatasetSpec& spec);

int train_count_per_class(const DatasetSpec& spec);

}  // namespace vclr
