#include "vclr/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vclr/error.hpp"

namespace vclr {

SegmentPlan segment_plan(int frames, int segments) {
  if (frames < 1) throw DomainError("segment_plan: video has no frames");
  if (segments < 1) throw DomainError("segment_plan: need at least one segment");
  SegmentPlan plan;
  plan.frames = frames;
  plan.segments = segments;
  const long long length = std::max(frames, segments);
  for (long long i = 0; i < segments; ++i) {
    plan.ranges.push_back({static_cast<int>(i * length / segments),
                           static_cast<int>((i + 1) * length / segments)});
  }
  return plan;
}

std::vector<int> segment_indices(int frames, int segments, Rng& rng) {
  const SegmentPlan plan = segment_plan(frames, segments);
  std::vector<int> out;
  out.reserve(plan.ranges.size());
  for (const FrameWindow& r : plan.ranges) {
    const int virtual_index = r.start + static_cast<int>(rng.below(static_cast<std::size_t>(r.end - r.start)));
    out.push_back(virtual_index % frames);
  }
  return out;
}

AugParams draw_aug_params(const AugmentConfig& cfg, int height, int width, Rng& rng) {
  AugParams p;
  p.scale = rng.uniform(cfg.min_scale, 1.0);
  const double half_y = 0.5 * height * (1.0 - p.scale);
  const double half_x = 0.5 * width * (1.0 - p.scale);
  p.offset_y = half_y + cfg.crop_jitter * half_y * rng.uniform(-1.0, 1.0);
  p.offset_x = half_x + cfg.crop_jitter * half_x * rng.uniform(-1.0, 1.0);
  p.flip = rng.bernoulli(cfg.flip_prob);
  p.brightness = rng.uniform(-cfg.brightness, cfg.brightness);
  p.contrast = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast);
  p.blur = rng.bernoulli(cfg.blur_prob);
  return p;
}

namespace {

Array crop_resize(const Array& frame, const AugParams& p) {
  const std::size_t H = frame.rows(), W = frame.cols();
  const double side_h = p.scale * static_cast<double>(H);
  const double side_w = p.scale * static_cast<double>(W);
  if (side_h < 2.0 || side_w < 2.0) {
    throw DomainError("augment_frame: crop " + std::to_string(side_h) + "x" +
                      std::to_string(side_w) + " is degenerate (< 2 px)");
  }
  Array out = Array::matrix(H, W);
  const double sy = side_h / static_cast<double>(H);
  const double sx = side_w / static_cast<double>(W);
  const double max_y = static_cast<double>(H - 1), max_x = static_cast<double>(W - 1);
  for (std::size_t r = 0; r < H; ++r) {
    const double y = std::clamp(p.offset_y + (static_cast<double>(r) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(y);
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < W; ++c) {
      const double x = std::clamp(p.offset_x + (static_cast<double>(c) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(x);
      const std::size_t x1 = std::min(x0 + 1, W - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = frame(y0, x0) * (1.0 - fx) + frame(y0, x1) * fx;
      const double bottom = frame(y1, x0) * (1.0 - fx) + frame(y1, x1) * fx;
      out(r, c) = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

Array box_blur(const Array& frame) {
  const long H = static_cast<long>(frame.rows()), W = static_cast<long>(frame.cols());
  Array out = Array::matrix(frame.rows(), frame.cols());
  for (long r = 0; r < H; ++r) {
    for (long c = 0; c < W; ++c) {
      double acc = 0.0;
      for (long dr = -1; dr <= 1; ++dr) {
        for (long dc = -1; dc <= 1; ++dc) {
          const long rr = std::clamp(r + dr, 0L, H - 1), cc = std::clamp(c + dc, 0L, W - 1);
          acc += frame(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
      }
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc / 9.0;
    }
  }
  return out;
}

}  // namespace

Array augment_frame(const Array& frame, const AugParams& p) {
  if (frame.rank() != 2) throw ShapeError("augment_frame", "expected H x W frame, got " + shape_string(frame));
  Array out = (p.scale == 1.0 && p.offset_x == 0.0 && p.offset_y == 0.0) ? frame : crop_resize(frame, p);
  if (p.flip) {
    for (std::size_t r = 0; r < out.rows(); ++r) {
      auto row = out.row_span(r);
      std::reverse(row.begin(), row.end());
    }
  }
  if (p.contrast != 1.0) {
    double mean = 0.0;
    for (double v : out.data()) mean += v;
    mean /= static_cast<double>(out.size());
    for (double& v : out.data()) v = (v - mean) * p.contrast + mean;
  }
  if (p.brightness != 0.0) {
    for (double& v : out.data()) v += p.brightness;
  }
  if (p.blur) out = box_blur(out);
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

int order_label(bool shuffle_anchor, bool shuffle_positive) {
  return 2 * static_cast<int>(shuffle_anchor) + static_cast<int>(shuffle_positive);
}

OrderAssignment assign_order_label(Rng& rng) {
  OrderAssignment a;
  a.shuffle_anchor = rng.bernoulli(0.5);
  a.shuffle_positive = rng.bernoulli(0.5);
  a.label = order_label(a.shuffle_anchor, a.shuffle_positive);
  return a;
}

std::vector<int> non_identity_permutation(int k, Rng& rng) {
  if (k < 2) throw DomainError("non_identity_permutation: K=" + std::to_string(k) + " has none");
  std::vector<int> perm(static_cast<std::size_t>(k));
  const auto is_identity = [&] {
    for (int i = 0; i < k; ++i) {
      if (perm[static_cast<std::size_t>(i)] != i) return false;
    }
    return true;
  };
  do {
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  } while (is_identity());
  return perm;
}

TupleStreams split_streams(Rng& rng) {
  const std::uint64_t a = rng.next_u64();
  const std::uint64_t p = rng.next_u64();
  const std::uint64_t o = rng.next_u64();
  return {Rng(a), Rng(p), Rng(o)};
}

namespace {

TupleSample sample_tuple(const Video& video, int segments, const AugmentConfig& aug, Rng& rng) {
  if (video.frames.empty()) throw DomainError("sample_tuple_pair: video has no frames");
  TupleSample t;
  t.indices = segment_indices(video.length(), segments, rng);
  const int H = static_cast<int>(video.frames.front().rows());
  const int W = static_cast<int>(video.frames.front().cols());
  AugParams shared;
  if (aug.shared_per_tuple) shared = draw_aug_params(aug, H, W, rng);
  for (int i = 0; i < segments; ++i) {
    const AugParams p = aug.shared_per_tuple ? shared : draw_aug_params(aug, H, W, rng);
    t.augs.push_back(p);
    t.frames.push_back(augment_frame(video.frames[static_cast<std::size_t>(t.indices[static_cast<std::size_t>(i)])], p));
    t.segments.push_back(i);
  }
  return t;
}

void apply_permutation(TupleSample& t, const std::vector<int>& perm) {
  TupleSample out;
  out.shuffled = true;
  for (int src : perm) {
    const auto s = static_cast<std::size_t>(src);
    out.indices.push_back(t.indices[s]);
    out.frames.push_back(std::move(t.frames[s]));
    out.augs.push_back(t.augs[s]);
    out.segments.push_back(t.segments[s]);
  }
  t = std::move(out);
}

}  // namespace

TuplePair sample_tuple_pair(const Video& video, int segments, const AugmentConfig& aug,
                            TupleStreams streams) {
  TuplePair pair;
  pair.video_id = video.id;
  pair.class_id = video.class_id;
  pair.anchor = sample_tuple(video, segments, aug, streams.anchor);
  pair.positive = sample_tuple(video, segments, aug, streams.positive);
  if (segments < 2) return pair;
  const OrderAssignment order = assign_order_label(streams.order);
  pair.order_label = order.label;
  if (order.shuffle_anchor) apply_permutation(pair.anchor, non_identity_permutation(segments, streams.order));
  if (order.shuffle_positive) apply_permutation(pair.positive, non_identity_permutation(segments, streams.order));
  return pair;
}

TuplePair sample_tuple_pair(const Video& video, int segments, const AugmentConfig& aug, Rng& rng) {
  return sample_tuple_pair(video, segments, aug, split_streams(rng));
}

FrameTriplet sample_frame_triplet(const Video& video, const TuplePair& pair, FrameSource source,
                                  const AugmentConfig& aug, Rng& rng) {
  const int H = static_cast<int>(video.frames.front().rows());
  const int W = static_cast<int>(video.frames.front().cols());
  FrameTriplet f;
  const auto frame_at = [&](int i) -> const Array& { return video.frames[static_cast<std::size_t>(i)]; };
  const auto fresh = [&](int i) { return augment_frame(frame_at(i), draw_aug_params(aug, H, W, rng)); };

  const TupleSample& a = pair.anchor;
  if (source == FrameSource::AnchorSegments && a.indices.size() >= 3) {
    std::size_t pos[3] = {0, 0, 0};
    for (std::size_t i = 0; i < a.segments.size(); ++i) {
      if (a.segments[i] < 3) pos[a.segments[i]] = i;
    }
    f.first_index = a.indices[pos[0]];
    f.second_index = a.indices[pos[1]];
    f.third_index = a.indices[pos[2]];
    f.second = a.frames[pos[1]];
    f.third = a.frames[pos[2]];
  } else {
    std::vector<int> idx;
    if (source == FrameSource::Uniform) {
      for (int i = 0; i < 3; ++i) idx.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(video.length()))));
    } else {
      idx = segment_indices(video.length(), 3, rng);
    }
    f.first_index = idx[0];
    f.second_index = idx[1];
    f.third_index = idx[2];
    f.second = fresh(idx[1]);
    f.third = fresh(idx[2]);
  }
  f.anchor = fresh(f.first_index);
  f.positive = fresh(f.first_index);
  return f;
}

}  // namespace vclr
