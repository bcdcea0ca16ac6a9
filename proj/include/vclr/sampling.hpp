#pragma once

#include <vector>

#include "vclr/array.hpp"
#include "vclr/rng.hpp"
#include "vclr/synth_data.hpp"

namespace vclr {

/// Partition of a timeline into K contiguous segments,
/// segment i = [floor(i*L/K), floor((i+1)*L/K)) with L = max(T, K).
/// When T < K the timeline is tiled virtually and position j maps to frame j mod T.
struct SegmentPlan {
  int frames = 0;
  int segments = 0;
  std::vector<FrameWindow> ranges;
};

SegmentPlan segment_plan(int frames, int segments);

/// One frame index per segment, each uniform within its segment.
std::vector<int> segment_indices(int frames, int segments, Rng& rng);

/// Per-frame augmentation. Crop is a square-scaled window (side = scale * H, scale * W)
/// resampled back to H x W bilinearly; then flip, contrast about the frame mean,
/// brightness shift, optional 3x3 box blur, clamp to [0,1].
struct AugParams {
  double scale = 1.0;
  double offset_y = 0.0;
  double offset_x = 0.0;
  bool flip = false;
  double brightness = 0.0;
  double contrast = 1.0;
  bool blur = false;
  friend bool operator==(const AugParams&, const AugParams&) = default;
};

struct AugmentConfig {
  double min_scale = 0.6;
  /// Crop placement: 0 keeps every crop centred, 1 places it uniformly
  /// anywhere inside the frame; in between scales the offset from centre.
  double crop_jitter = 1.0;
  double flip_prob = 0.0;
  double brightness = 0.2;
  double contrast = 0.2;
  double blur_prob = 0.5;
  /// Draw one parameter set per tuple instead of one per frame.
  bool shared_per_tuple = false;
};

AugParams draw_aug_params(const AugmentConfig& cfg, int height, int width, Rng& rng);
Array augment_frame(const Array& frame, const AugParams& params);

struct OrderAssignment {
  bool shuffle_anchor = false;
  bool shuffle_positive = false;
  int label = 0;
};

/// (ok, ok) -> 0, (ok, shuffled) -> 1, (shuffled, ok) -> 2, (shuffled, shuffled) -> 3.
int order_label(bool shuffle_anchor, bool shuffle_positive);

/// Each flag independently true with probability 1/2.
OrderAssignment assign_order_label(Rng& rng);

/// Uniform over the K! - 1 non-identity permutations; K must be >= 2.
std::vector<int> non_identity_permutation(int k, Rng& rng);

struct TupleSample {
  /// Frame indices in presentation order (after any shuffle).
  std::vector<int> indices;
  std::vector<Array> frames;
  std::vector<AugParams> augs;
  /// Segment each presented frame was drawn from.
  std::vector<int> segments;
  bool shuffled = false;
};

struct TuplePair {
  int video_id = 0;
  int class_id = 0;
  TupleSample anchor;
  TupleSample positive;
  int order_label = 0;
};

/// Independent substreams for the two samplings and the shuffle decisions.
struct TupleStreams {
  Rng anchor;
  Rng positive;
  Rng order;
};

TupleStreams split_streams(Rng& rng);

/// Two independent tuples of one video with an order label. With K = 1 no
/// shuffle exists, so both tuples keep their order and the label is 0.
TuplePair sample_tuple_pair(const Video& video, int segments, const AugmentConfig& aug,
                            TupleStreams streams);
TuplePair sample_tuple_pair(const Video& video, int segments, const AugmentConfig& aug, Rng& rng);

/// Frame-level inputs for the inter/intra-frame objectives: v1 seen under two
/// augmentations (anchor, positive) plus two further frames of the same video.
struct FrameTriplet {
  int first_index = 0;
  int second_index = 0;
  int third_index = 0;
  Array anchor;    // v1 under augmentation a
  Array positive;  // v1 under augmentation +
  Array second;    // v2
  Array third;     // v3
};

enum class FrameSource {
  /// v1, v2, v3 are the anchor tuple's first three segment frames (before
  /// shuffling); tuples shorter than 3 fall back to an independent 3-segment draw.
  AnchorSegments,
  /// v1, v2, v3 drawn uniformly from the whole video.
  Uniform,
};

FrameTriplet sample_frame_triplet(const Video& video, const TuplePair& pair, FrameSource source,
                                  const AugmentConfig& aug, Rng& rng);

}  // namespace vclr
