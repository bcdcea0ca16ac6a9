#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "vclr/error.hpp"
#include "vclr/sampling.hpp"

using namespace vclr;

namespace {

// An order stream whose first two flags are the requested ones.
Rng forced_order_stream(bool anchor, bool positive) {
  for (std::uint64_t seed = 0;; ++seed) {
    Rng probe(seed);
    const OrderAssignment a = assign_order_label(probe);
    if (a.shuffle_anchor == anchor && a.shuffle_positive == positive) return Rng(seed);
  }
}

bool strictly_increasing(const std::vector<int>& v) { return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end(); }

const AugParams kIdentity{};

}  // namespace

TEST_CASE("segment plan partitions the timeline") {
  const SegmentPlan p = segment_plan(10, 3);
  REQUIRE(p.ranges.size() == 3);
  CHECK(p.ranges[0] == FrameWindow{0, 3});
  CHECK(p.ranges[1] == FrameWindow{3, 6});
  CHECK(p.ranges[2] == FrameWindow{6, 10});
  for (int T : {1, 2, 5, 17, 32, 100}) {
    for (int K : {1, 2, 3, 4, 7}) {
      const SegmentPlan q = segment_plan(T, K);
      const int L = std::max(T, K);
      CHECK(q.ranges.front().start == 0);
      CHECK(q.ranges.back().end == L);
      int lo = L, hi = 0;
      for (std::size_t i = 0; i < q.ranges.size(); ++i) {
        if (i > 0) CHECK(q.ranges[i].start == q.ranges[i - 1].end);
        lo = std::min(lo, q.ranges[i].end - q.ranges[i].start);
        hi = std::max(hi, q.ranges[i].end - q.ranges[i].start);
      }
      CHECK(lo >= 1);
      CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("segment indices") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<int> idx = segment_indices(30, 3, rng);
    CHECK((idx[0] >= 0 && idx[0] < 10));
    CHECK((idx[1] >= 10 && idx[1] < 20));
    CHECK((idx[2] >= 20 && idx[2] < 30));
  }
  CHECK(segment_indices(3, 3, rng) == std::vector<int>{0, 1, 2});
  // T < K tiles the timeline.
  CHECK(segment_indices(2, 5, rng) == std::vector<int>{0, 1, 0, 1, 0});
  CHECK_THROWS_AS(segment_indices(0, 3, rng), Error);
  CHECK_THROWS_AS(segment_indices(5, 0, rng), Error);
}

TEST_CASE("segment indices cover every frame of a segment") {
  Rng rng(4);
  std::set<int> seen;
  for (int i = 0; i < 500; ++i) seen.insert(segment_indices(10, 3, rng)[2]);
  CHECK(seen == std::set<int>{6, 7, 8, 9});
}

TEST_CASE("order labels") {
  CHECK(order_label(false, false) == 0);
  CHECK(order_label(false, true) == 1);
  CHECK(order_label(true, false) == 2);
  CHECK(order_label(true, true) == 3);
  Rng rng(9);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 10000; ++i) {
    const OrderAssignment a = assign_order_label(rng);
    CHECK(a.label == order_label(a.shuffle_anchor, a.shuffle_positive));
    ++counts[static_cast<std::size_t>(a.label)];
  }
  for (int c : counts) CHECK((c / 10000.0 >= 0.23 && c / 10000.0 <= 0.27));
}

TEST_CASE("non-identity permutations are uniform") {
  Rng rng(2);
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i < 50000; ++i) ++counts[non_identity_permutation(3, rng)];
  CHECK(counts.size() == 5);
  CHECK(counts.count({0, 1, 2}) == 0);
  for (const auto& [p, n] : counts) CHECK(std::abs(n / 50000.0 - 0.2) < 0.01);
  CHECK(non_identity_permutation(2, rng) == std::vector<int>{1, 0});
  CHECK_THROWS_AS(non_identity_permutation(1, rng), DomainError);
}

TEST_CASE("forced flags produce the mapped label and orderings") {
  const Video v = generate_video(DatasetSpec{}, 1, 0);
  const AugmentConfig aug;
  for (const auto [a, p] : {std::pair{false, false}, {false, true}, {true, false}, {true, true}}) {
    const TuplePair pair = sample_tuple_pair(v, 3, aug, TupleStreams{Rng(11), Rng(12), forced_order_stream(a, p)});
    CHECK(pair.order_label == order_label(a, p));
    CHECK(pair.anchor.shuffled == a);
    CHECK(pair.positive.shuffled == p);
    CHECK(strictly_increasing(pair.anchor.indices) != a);
    CHECK(strictly_increasing(pair.positive.indices) != p);
  }
}

TEST_CASE("tuple structure") {
  const Video v = generate_video(DatasetSpec{}, 5, 3);
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const TuplePair pair = sample_tuple_pair(v, 4, AugmentConfig{}, rng);
    CHECK(pair.video_id == v.id);
    CHECK(pair.class_id == 5);
    for (const TupleSample* t : {&pair.anchor, &pair.positive}) {
      REQUIRE(t->indices.size() == 4);
      CHECK(t->frames.size() == 4);
      CHECK(t->augs.size() == 4);
      const SegmentPlan plan = segment_plan(v.length(), 4);
      for (std::size_t i = 0; i < 4; ++i) {
        const FrameWindow w = plan.ranges[static_cast<std::size_t>(t->segments[i])];
        CHECK((t->indices[i] >= w.start && t->indices[i] < w.end));
        CHECK(t->frames[i] == augment_frame(v.frames[static_cast<std::size_t>(t->indices[i])], t->augs[i]));
      }
      std::vector<int> segs = t->segments;
      std::sort(segs.begin(), segs.end());
      CHECK(segs == std::vector<int>{0, 1, 2, 3});
    }
  }
}

TEST_CASE("K = 1 tuples are never shuffled") {
  const Video v = generate_video(DatasetSpec{}, 0, 0);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const TuplePair pair = sample_tuple_pair(v, 1, AugmentConfig{}, rng);
    CHECK(pair.order_label == 0);
    CHECK(pair.anchor.indices.size() == 1);
  }
}

TEST_CASE("anchor and positive streams are exchangeable") {
  const Video v = generate_video(DatasetSpec{}, 2, 2);
  const TuplePair x = sample_tuple_pair(v, 3, AugmentConfig{}, TupleStreams{Rng(5), Rng(6), forced_order_stream(false, false)});
  const TuplePair y = sample_tuple_pair(v, 3, AugmentConfig{}, TupleStreams{Rng(6), Rng(5), forced_order_stream(false, false)});
  CHECK(x.anchor.indices == y.positive.indices);
  CHECK(x.anchor.frames == y.positive.frames);
  CHECK(x.positive.frames == y.anchor.frames);
}

TEST_CASE("augmentation parameter ranges") {
  Rng rng(8);
  const AugmentConfig cfg;
  for (int i = 0; i < 2000; ++i) {
    const AugParams p = draw_aug_params(cfg, 16, 16, rng);
    CHECK((p.scale >= 0.6 && p.scale <= 1.0));
    CHECK((p.brightness >= -0.2 && p.brightness <= 0.2));
    CHECK((p.contrast >= 0.8 && p.contrast <= 1.2));
    CHECK(p.offset_y >= 0.0);
    CHECK(p.offset_x >= 0.0);
    CHECK(p.offset_y + p.scale * 16 <= 16.0 + 1e-12);
    CHECK(p.offset_x + p.scale * 16 <= 16.0 + 1e-12);
  }
}

TEST_CASE("augment_frame examples") {
  const Video v = generate_video(DatasetSpec{}, 3, 0);
  const Array& frame = v.frames[5];
  CHECK(augment_frame(frame, kIdentity) == frame);

  AugParams flip = kIdentity;
  flip.flip = true;
  const Array flipped = augment_frame(frame, flip);
  CHECK_FALSE(flipped == frame);
  CHECK(flipped(2, 0) == frame(2, 15));
  CHECK(augment_frame(flipped, flip) == frame);

  AugParams bright = kIdentity;
  bright.brightness = 0.1;
  const Array lifted = augment_frame(Array::matrix(16, 16, 0.5), bright);
  for (double x : lifted.data()) CHECK(x == doctest::Approx(0.6).epsilon(1e-15));

  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Array out = augment_frame(frame, draw_aug_params(AugmentConfig{}, 16, 16, rng));
    CHECK(out.shape() == frame.shape());
    for (double x : out.data()) CHECK((x >= 0.0 && x <= 1.0));
  }

  AugParams tiny = kIdentity;
  tiny.scale = 0.1;
  CHECK_THROWS_AS(augment_frame(frame, tiny), DomainError);
}

TEST_CASE("shared augmentation draws one parameter set per tuple") {
  AugmentConfig cfg;
  cfg.shared_per_tuple = true;
  Rng rng(21);
  const TuplePair pair = sample_tuple_pair(generate_video(DatasetSpec{}, 0, 0), 3, cfg, rng);
  CHECK(pair.anchor.augs[0] == pair.anchor.augs[1]);
  CHECK(pair.anchor.augs[1] == pair.anchor.augs[2]);
}

TEST_CASE("frame triplet reuses the anchor's first three segments") {
  const Video v = generate_video(DatasetSpec{}, 6, 1);
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const TuplePair pair = sample_tuple_pair(v, 3, AugmentConfig{}, rng);
    const FrameTriplet f = sample_frame_triplet(v, pair, FrameSource::AnchorSegments, AugmentConfig{}, rng);
    std::vector<int> sorted = pair.anchor.indices;
    std::sort(sorted.begin(), sorted.end());
    CHECK(f.first_index == sorted[0]);
    CHECK(f.second_index == sorted[1]);
    CHECK(f.third_index == sorted[2]);
    CHECK(f.anchor.shape() == f.positive.shape());
  }
  Rng rng2(14);
  const TuplePair one = sample_tuple_pair(v, 1, AugmentConfig{}, rng2);
  const FrameTriplet g = sample_frame_triplet(v, one, FrameSource::AnchorSegments, AugmentConfig{}, rng2);
  CHECK(g.first_index < g.second_index);
  CHECK(g.second_index < g.third_index);
}
