#include "vclr/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "vclr/error.hpp"
#include "vclr/rng.hpp"

namespace vclr {

namespace {

constexpr int kMinSide = 8;
/// Half-width of the uniform jitter on the blob's starting position, in pixels.
constexpr double kStartJitter = 1.5;
// Stream tags for derive_seed.
constexpr std::uint64_t kVideoStream = 0x766964;
constexpr std::uint64_t kWindowStream = 0x77696e;
constexpr std::uint64_t kSplitStream = 0x73706c;

}  // namespace

void DatasetSpec::validate() const {
  if (classes < 2) throw ConfigError("dataset.classes must be >= 2");
  if (videos_per_class < 1) throw ConfigError("dataset.videos_per_class must be >= 1");
  if (frames < 1) throw ConfigError("dataset.frames must be >= 1");
  if (height < kMinSide || width < kMinSide) {
    throw ConfigError("dataset frame " + std::to_string(height) + "x" + std::to_string(width) +
                      " too small to contain the blob (min 8)");
  }
  if (!(coverage > 0.0 && coverage <= 1.0)) throw ConfigError("dataset.coverage must be in (0,1]");
  if (!(noise >= 0.0)) throw ConfigError("dataset.noise must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("dataset.train_fraction must be in (0,1)");
  }
}

ClassStyle class_style(const DatasetSpec& spec, int class_id) {
  if (class_id < 0 || class_id >= spec.classes) {
    throw DomainError("class_id " + std::to_string(class_id) + " outside [0," +
                      std::to_string(spec.classes) + ")");
  }
  ClassStyle s;
  const double angle = 2.0 * std::numbers::pi * class_id / spec.classes;
  s.direction_x = std::cos(angle);
  s.direction_y = -std::sin(angle);  // image rows grow downward
  s.speed = 0.25 + 0.05 * (class_id % 2);
  s.blob_sigma = 1.4 + 0.3 * (class_id % 3);
  s.texture_strength = (class_id / 2) % 2 ? 0.5 : 0.0;
  s.texture_frequency = 1.6;
  return s;
}

Video generate_video(const DatasetSpec& spec, int class_id, int video_index) {
  spec.validate();
  const ClassStyle style = class_style(spec, class_id);
  const int T = spec.frames, H = spec.height, W = spec.width;

  Video video;
  video.class_id = class_id;
  video.id = class_id * spec.videos_per_class + video_index;

  FrameWindow window{0, T};
  if (spec.untrimmed) {
    const int len = std::clamp(static_cast<int>(std::lround(spec.coverage * T)), 1, T);
    Rng wrng(derive_seed({spec.seed, kWindowStream, static_cast<std::uint64_t>(class_id),
                          static_cast<std::uint64_t>(video_index)}));
    window.start = static_cast<int>(wrng.below(static_cast<std::size_t>(T - len + 1)));
    window.end = window.start + len;
    video.action_window = window;
  }

  Rng rng(derive_seed({spec.seed, kVideoStream, static_cast<std::uint64_t>(class_id),
                       static_cast<std::uint64_t>(video_index)}));
  const double peak = rng.uniform(0.8, 1.0);
  // The blob starts near the frame centre and moves outward.
  const double start_x = (W - 1) / 2.0 + rng.uniform(-kStartJitter, kStartJitter);
  const double start_y = (H - 1) / 2.0 + rng.uniform(-kStartJitter, kStartJitter);
  const double inv_two_var = 1.0 / (2.0 * style.blob_sigma * style.blob_sigma);

  video.frames.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    Array frame = Array::matrix(static_cast<std::size_t>(H), static_cast<std::size_t>(W));
    if (t >= window.start && t < window.end) {
      const double elapsed = style.speed * (t - window.start);
      const double cx = start_x + style.direction_x * elapsed;
      const double cy = start_y + style.direction_y * elapsed;
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          const double dx = c - cx, dy = r - cy;
          // Stripes run across the motion direction in blob-local coordinates.
          const double along = dx * style.direction_x + dy * style.direction_y;
          const double stripe =
              1.0 - style.texture_strength * 0.5 * (1.0 + std::cos(style.texture_frequency * along));
          frame(r, c) = peak * std::exp(-(dx * dx + dy * dy) * inv_two_var) * stripe;
        }
      }
    }
    for (double& v : frame.data()) {
      v = std::clamp(v + spec.noise * rng.uniform(-1.0, 1.0), 0.0, 1.0);
    }
    video.frames.push_back(std::move(frame));
  }
  return video;
}

int train_count_per_class(const DatasetSpec& spec) {
  const int n = spec.videos_per_class;
  return std::clamp(static_cast<int>(std::lround(spec.train_fraction * n)), 1, n - 1);
}

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  if (spec.videos_per_class < 2) throw ConfigError("dataset.videos_per_class must be >= 2 to split");
  const int n_train = train_count_per_class(spec);
  Dataset out;
  for (int c = 0; c < spec.classes; ++c) {
    std::vector<int> order(static_cast<std::size_t>(spec.videos_per_class));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed({spec.seed, kSplitStream, static_cast<std::uint64_t>(c)}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<bool> is_train(order.size(), false);
    for (int i = 0; i < n_train; ++i) is_train[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    for (int v = 0; v < spec.videos_per_class; ++v) {
      auto& dst = is_train[static_cast<std::size_t>(v)] ? out.train : out.test;
      dst.push_back(generate_video(spec, c, v));
    }
  }
  return out;
}

}  // namespace vclr
