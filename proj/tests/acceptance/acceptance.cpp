// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "vclr/config.hpp"
#include "vclr/diagnostics.hpp"
#include "vclr/eval.hpp"
#include "vclr/io.hpp"
#include "vclr/losses.hpp"
#include "vclr/memory_bank.hpp"
#include "vclr/model.hpp"
#include "vclr/numerics.hpp"
#include "vclr/sampling.hpp"

using namespace vclr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Array unit_rows(Rng& rng, std::size_t n, std::size_t d) {
  Array a = Array::matrix(n, d);
  for (double& x : a.data()) x = rng.normal();
  return l2_normalize(a);
}

// Direct (M+1)-way softmax cross-entropy, positive in slot 0.
double softmax_ce(const Array& q, const Array& p, const Array& negatives, double tau) {
  std::vector<double> logits;
  const auto dot = [&](const Array& b, std::size_t row) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += q[j] * b(row, j);
    return s;
  };
  logits.push_back(dot(p, 0) / tau);
  for (std::size_t i = 0; i < negatives.rows(); ++i) logits.push_back(dot(negatives, i) / tau);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  return mx + std::log(z) - logits[0];
}

Outcome gradient_fidelity() {
  RunConfig c;
  c.apply({"model.hidden=16", "model.feature_dim=8", "model.embed_dim=8", "gradcheck.coords=0",
           "gradcheck.seeds=10", "gradcheck.step=1e-5", "gradcheck.tol=1e-4"});
  const auto t0 = Clock::now();
  const auto checks = check_objective_gradients(c.dataset(), c.train(), c.gradcheck());
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  bool ok = checks.size() == 50;
  for (const ObjectiveCheck& ch : checks) {
    worst = std::max(worst, ch.report.max_rel_error);
    ok = ok && ch.report.passed && ch.report.max_rel_error < 1e-4;
  }
  return {ok && elapsed < 60.0, std::to_string(checks.size()) + " checks, max rel error " + fmt("%.3g", worst) +
                                     ", " + fmt("%.1f s", elapsed) + " (limit 60 s)"};
}

Outcome infonce_oracle() {
  Rng rng(derive_seed({2, 0}));
  const double taus[] = {0.05, 0.07, 0.2, 1.0};
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t m = rng.below(65), d = 1 + rng.below(32);
    const double tau = taus[rng.below(4)];
    const Array q = unit_rows(rng, 1, d), p = unit_rows(rng, 1, d);
    const Array neg = m ? unit_rows(rng, m, d) : Array::matrix(0, d);
    worst = std::max(worst, std::abs(info_nce(q, p, neg, tau) - softmax_ce(q, p, neg, tau)));
  }
  return {worst <= 1e-10, "1000 instances, max abs diff " + fmt("%.3g", worst)};
}

double distance(const ParamSet& a, const ParamSet& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.values[i].size(); ++j) s += std::pow(a.values[i][j] - b.values[i][j], 2);
  }
  return std::sqrt(s);
}

Outcome momentum_exactness() {
  double worst = 0.0;
  for (double m : {0.9, 0.999}) {
    Rng rng(derive_seed({3, static_cast<std::uint64_t>(m * 1000)}));
    ModelConfig mc;
    const ParamSet q = init_params(mc, rng);
    ParamSet k = init_params(mc, rng);
    const double d0 = distance(k, q);
    for (int t = 1; t <= 200; ++t) {
      momentum_update(k, q, m);
      worst = std::max(worst, std::abs(distance(k, q) - std::pow(m, t) * d0));
    }
  }
  return {worst <= 1e-10, "t <= 200, m in {0.9, 0.999}, max abs diff " + fmt("%.3g", worst)};
}

Outcome fifo_oracle() {
  const std::size_t width = 4;
  std::string detail;
  bool ok = true;
  for (std::size_t cap : {1, 7, 4096}) {
    Rng rng(derive_seed({4, cap}));
    MemoryBank bank(cap, width);
    std::vector<std::vector<double>> oracle;
    for (int b = 0; b < 10000; ++b) {
      const Array rows = unit_rows(rng, rng.below(40), width);
      bank.enqueue(rows);
      for (std::size_t i = 0; i < rows.rows(); ++i) {
        oracle.emplace_back(rows.row_span(i).begin(), rows.row_span(i).end());
      }
      if (oracle.size() > cap) oracle.erase(oracle.begin(), oracle.end() - static_cast<std::ptrdiff_t>(cap));
      if (b % 500 == 499 || b == 9999) {
        const Array got = bank.chronological();
        bool same = got.rows() == oracle.size();
        for (std::size_t i = 0; same && i < oracle.size(); ++i) {
          same = std::equal(oracle[i].begin(), oracle[i].end(), got.row_span(i).begin());
        }
        ok = ok && same;
      }
    }
    detail += "cap " + std::to_string(cap) + (ok ? " ok " : " MISMATCH ");
  }
  return {ok, detail + "after 10000 batches"};
}

Outcome consensus_invariance() {
  ModelConfig mc;
  bool ok = true;
  for (std::uint64_t s = 1; s <= 100; ++s) {
    Rng rng(derive_seed({5, s}));
    const ParamSet p = init_params(mc, rng);
    std::vector<Array> frames;
    for (int i = 0; i < 3; ++i) {
      Array f({16, 16});
      for (double& x : f.data()) x = rng.uniform();
      frames.push_back(f);
    }
    const Array base = tuple_embedding(p, frames);
    std::vector<int> perm = {0, 1, 2};
    while (std::next_permutation(perm.begin(), perm.end())) {
      const std::vector<Array> shuffled = {frames[perm[0]], frames[perm[1]], frames[perm[2]]};
      ok = ok && tuple_embedding(p, shuffled) == base;
    }
  }
  return {ok, "100 seeds x 6 permutations, bit-exact"};
}

Outcome order_label_balance() {
  DatasetSpec spec;
  const Video video = generate_video(spec, 0, 0);
  AugmentConfig aug;
  Rng rng(derive_seed({6, 0}));
  const int n = 40000;
  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < n; ++i) ++counts[sample_tuple_pair(video, 3, aug, rng).order_label];
  bool ok = true;
  std::string detail = "frequencies";
  for (int c : counts) {
    const double f = static_cast<double>(c) / n;
    ok = ok && f >= 0.24 && f <= 0.26;
    detail += fmt(" %.4f", f);
  }
  return {ok, detail};
}

struct TrendRows {
  std::vector<double> full, inter, k1;
  double seconds = 0.0;
};

TrendRows run_trend_grid() {
  AblationGrid g = parse_grid(
      "seeds 1 2 3\n"
      "entry full\n"
      "entry inter train.loss_intra=0 train.loss_segment=0 train.loss_order=0\n"
      "entry K=1 train.segments=1 train.loss_order=0\n");
  TrendRows out;
  const auto t0 = Clock::now();
  for (const AblationRow& r : run_ablation(RunConfig{}, g, [](const AblationRow& r) {
         std::printf("     %-6s seed %s probe %.4f R@1 %.4f\n", r.config.c_str(), r.seed.c_str(), r.probe_accuracy,
                     r.recall_at_1);
         std::fflush(stdout);
       })) {
    if (r.seed == "median") continue;
    auto& dst = r.config == "full" ? out.full : r.config == "inter" ? out.inter : out.k1;
    dst.push_back(r.probe_accuracy);
  }
  out.seconds = seconds_since(t0);
  return out;
}

}  // namespace

int main() {
  report(1, "gradient fidelity", gradient_fidelity);
  report(2, "InfoNCE oracle", infonce_oracle);
  report(3, "momentum exactness", momentum_exactness);
  report(4, "FIFO oracle", fifo_oracle);
  report(5, "consensus invariance", consensus_invariance);
  report(6, "order-label balance", order_label_balance);

  TrendRows trend;
  bool trend_ok = true;
  std::string trend_error;
  try {
    trend = run_trend_grid();
  } catch (const std::exception& e) {
    trend_ok = false;
    trend_error = e.what();
  }
  const double chance = 1.0 / RunConfig{}.dataset().classes;
  report(7, "trend: full vs inter-only", [&]() -> Outcome {
    if (!trend_ok) return {false, "exception: " + trend_error};
    int strict = 0;
    for (std::size_t i = 0; i < trend.full.size(); ++i) strict += trend.full[i] > trend.inter[i];
    const double mf = median(trend.full), mi = median(trend.inter);
    const bool ok = mf >= mi && strict >= 2 && mf >= chance + 0.15 && mi >= chance + 0.15 && trend.seconds < 600.0;
    return {ok, "median full " + fmt("%.4f", mf) + " inter " + fmt("%.4f", mi) + ", strict in " +
                    std::to_string(strict) + "/3, chance " + fmt("%.3f", chance) + ", grid " +
                    fmt("%.0f s", trend.seconds) + " (limit 600 s)"};
  });
  report(8, "trend: K=3 vs K=1", [&]() -> Outcome {
    if (!trend_ok) return {false, "exception: " + trend_error};
    const double m3 = median(trend.full), m1 = median(trend.k1);
    return {m3 >= m1 && trend.seconds < 600.0, "median K=3 " + fmt("%.4f", m3) + " K=1 " + fmt("%.4f", m1)};
  });

  // One default full-loss run feeds criteria 9 and 10; a second identical run checks determinism.
  const RunConfig cfg;
  RunResult first, second;
  bool runs_ok = true;
  std::string run_error;
  try {
    first = run_and_evaluate(cfg);
    second = run_and_evaluate(cfg);
  } catch (const std::exception& e) {
    runs_ok = false;
    run_error = e.what();
  }
  report(9, "order head learns", [&]() -> Outcome {
    if (!runs_ok) return {false, "exception: " + run_error};
    const Dataset data = generate_dataset(cfg.dataset());
    const double acc = order_head_accuracy(first.state.query, first.state.key, first.state.model, data.test, 10,
                                           derive_seed({9, 0}));
    return {acc > 0.40, "held-out order accuracy " + fmt("%.4f", acc) + " (chance 0.25)"};
  });
  report(10, "retrieval sanity", [&]() -> Outcome {
    if (!runs_ok) return {false, "exception: " + run_error};
    bool monotone = true;
    for (std::size_t i = 1; i < first.recall.size(); ++i) monotone = monotone && first.recall[i] >= first.recall[i - 1];
    const Dataset data = generate_dataset(cfg.dataset());
    double freq = 0.0;
    for (const Video& q : data.test) {
      freq += static_cast<double>(std::count_if(data.train.begin(), data.train.end(),
                                                [&](const Video& g) { return g.class_id == q.class_id; })) /
              static_cast<double>(data.train.size());
    }
    freq /= static_cast<double>(data.test.size());
    std::string ks;
    for (std::size_t i = 0; i < first.ks.size(); ++i) {
      ks += " R@" + std::to_string(first.ks[i]) + "=" + fmt("%.4f", first.recall[i]);
    }
    return {first.recall.at(0) >= freq + 0.15 && monotone, "chance " + fmt("%.3f", freq) + ks};
  });
  report(11, "determinism", [&]() -> Outcome {
    if (!runs_ok) return {false, "exception: " + run_error};
    const std::string text = cfg.to_text();
    const bool ck = encode_checkpoint(text, first.state) == encode_checkpoint(text, second.state);
    const bool csv = metrics_csv(text, first.state.history) == metrics_csv(text, second.state.history);
    return {ck && csv, std::string("checkpoint bytes ") + (ck ? "identical" : "differ") + ", metrics csv " +
                           (csv ? "identical" : "differ")};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
