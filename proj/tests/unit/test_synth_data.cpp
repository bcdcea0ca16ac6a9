#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "vclr/error.hpp"
#include "vclr/synth_data.hpp"

using namespace vclr;

namespace {

Array mean_frame(const Video& v) {
  Array m = Array::matrix(v.frames.front().rows(), v.frames.front().cols());
  for (const Array& f : v.frames) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += f[i];
  }
  for (double& x : m.data()) x /= static_cast<double>(v.frames.size());
  return m;
}

double mean_abs_diff(const Array& a, const Array& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("generation is deterministic") {
  const DatasetSpec spec;
  CHECK(generate_video(spec, 3, 7) == generate_video(spec, 3, 7));
  CHECK_FALSE(generate_video(spec, 3, 7) == generate_video(spec, 3, 8));
  DatasetSpec other = spec;
  other.seed = 2;
  CHECK_FALSE(generate_video(spec, 3, 7).frames == generate_video(other, 3, 7).frames);
}

TEST_CASE("pixel range, shape and window invariants") {
  DatasetSpec spec;
  spec.untrimmed = true;
  spec.coverage = 0.3;
  spec.noise = 0.3;
  for (int c = 0; c < spec.classes; ++c) {
    const Video v = generate_video(spec, c, 1);
    CHECK(v.length() == spec.frames);
    REQUIRE(v.action_window.has_value());
    CHECK(v.action_window->start >= 0);
    CHECK(v.action_window->end <= spec.frames);
    CHECK(v.action_window->end - v.action_window->start == static_cast<int>(std::lround(0.3 * spec.frames)));
    for (const Array& f : v.frames) {
      CHECK(f.shape() == std::vector<std::size_t>{16, 16});
      for (double x : f.data()) CHECK((x >= 0.0 && x <= 1.0));
    }
  }
}

TEST_CASE("untrimmed frames outside the window hold noise only") {
  DatasetSpec spec;
  spec.untrimmed = true;
  spec.noise = 0.0;
  const Video v = generate_video(spec, 2, 0);
  const FrameWindow w = *v.action_window;
  for (int t = 0; t < v.length(); ++t) {
    double mx = 0;
    for (double x : v.frames[static_cast<std::size_t>(t)].data()) mx = std::max(mx, x);
    if (t >= w.start && t < w.end) {
      CHECK(mx > 0.3);
    } else {
      CHECK(mx == 0.0);
    }
  }
}

TEST_CASE("coverage 1 reproduces trimmed frames") {
  DatasetSpec trimmed;
  DatasetSpec full = trimmed;
  full.untrimmed = true;
  full.coverage = 1.0;
  for (int c = 0; c < 8; ++c) {
    const Video a = generate_video(trimmed, c, 4), b = generate_video(full, c, 4);
    CHECK(a.frames == b.frames);
    CHECK(b.action_window == FrameWindow{0, trimmed.frames});
  }
}

TEST_CASE("noise-free class 0 translates by its velocity") {
  DatasetSpec spec;
  spec.noise = 0.0;
  const ClassStyle s = class_style(spec, 0);
  CHECK(s.direction_x == doctest::Approx(1.0));
  CHECK(std::abs(s.direction_y) < 1e-15);
  CHECK(s.speed == doctest::Approx(0.25));
  const Video v = generate_video(spec, 0, 5);
  // Four frames at 0.25 px/frame is exactly one pixel to the right.
  for (int t = 0; t + 4 < v.length(); t += 5) {
    const Array& a = v.frames[static_cast<std::size_t>(t)];
    const Array& b = v.frames[static_cast<std::size_t>(t + 4)];
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c + 1 < a.cols(); ++c) CHECK(b(r, c + 1) == doctest::Approx(a(r, c)).epsilon(1e-9));
    }
  }
}

TEST_CASE("class directions cover the compass") {
  const DatasetSpec spec;
  std::set<std::pair<long, long>> dirs;
  for (int c = 0; c < 8; ++c) {
    const ClassStyle s = class_style(spec, c);
    CHECK(std::hypot(s.direction_x, s.direction_y) == doctest::Approx(1.0));
    dirs.insert({std::lround(s.direction_x * 1000), std::lround(s.direction_y * 1000)});
  }
  CHECK(dirs.size() == 8);
}

TEST_CASE("between-class distance exceeds within-class distance") {
  const DatasetSpec spec;
  std::vector<Array> c0, c1;
  for (int i = 0; i < 20; ++i) {
    c0.push_back(mean_frame(generate_video(spec, 0, i)));
    c1.push_back(mean_frame(generate_video(spec, 1, i)));
  }
  double within = 0, between = 0;
  int nw = 0, nb = 0;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      between += mean_abs_diff(c0[i], c1[j]), ++nb;
      if (i < j) {
        within += 0.5 * (mean_abs_diff(c0[i], c0[j]) + mean_abs_diff(c1[i], c1[j]));
        ++nw;
      }
    }
  }
  CHECK(between / nb > within / nw);
}

TEST_CASE("nearest class mean on raw averaged frames beats chance") {
  const Dataset data = generate_dataset(DatasetSpec{});
  std::map<int, Array> sums;
  std::map<int, int> counts;
  for (const Video& v : data.train) {
    const Array m = mean_frame(v);
    auto [it, fresh] = sums.try_emplace(v.class_id, m);
    if (!fresh) {
      for (std::size_t i = 0; i < m.size(); ++i) it->second[i] += m[i];
    }
    ++counts[v.class_id];
  }
  for (auto& [c, s] : sums) {
    for (double& x : s.data()) x /= counts[c];
  }
  int correct = 0;
  for (const Video& v : data.test) {
    const Array m = mean_frame(v);
    int best = -1;
    double best_d = INFINITY;
    for (const auto& [c, s] : sums) {
      const double d = mean_abs_diff(m, s);
      if (d < best_d) best_d = d, best = c;
    }
    correct += best == v.class_id;
  }
  CHECK(correct / static_cast<double>(data.test.size()) > 1.0 / 8 + 0.1);
}

TEST_CASE("dataset split") {
  const DatasetSpec spec;
  const Dataset a = generate_dataset(spec), b = generate_dataset(spec);
  CHECK(a.train.size() == 160);
  CHECK(a.test.size() == 40);
  CHECK(train_count_per_class(spec) == 20);
  std::map<int, int> per_class_train, per_class_test;
  std::set<int> ids;
  for (const Video& v : a.train) ++per_class_train[v.class_id], ids.insert(v.id);
  for (const Video& v : a.test) ++per_class_test[v.class_id], ids.insert(v.id);
  CHECK(ids.size() == 200);
  for (int c = 0; c < 8; ++c) {
    CHECK(per_class_train[c] == 20);
    CHECK(per_class_test[c] == 5);
  }
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].id == b.train[i].id);
}

TEST_CASE("spec validation") {
  DatasetSpec s;
  s.height = 7;
  CHECK_THROWS_AS(generate_video(s, 0, 0), ConfigError);
  s = {};
  CHECK_THROWS_AS(generate_video(s, 8, 0), Error);
  s.classes = 1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.coverage = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.noise = -0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.videos_per_class = 1;
  CHECK_THROWS_AS(generate_dataset(s), ConfigError);
}
