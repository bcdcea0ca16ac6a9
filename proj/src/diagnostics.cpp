#include "vclr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vclr/error.hpp"
#include "vclr/io.hpp"
#include "vclr/losses.hpp"

namespace vclr {

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::Inter: return "inter";
    case Objective::Intra: return "intra";
    case Objective::Segment: return "segment";
    case Objective::Order: return "order";
    case Objective::Total: return "total";
  }
  return "?";
}

namespace {

Array random_unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  Array a = Array::matrix(n, d);
  for (double& v : a.data()) v = rng.normal();
  return n == 0 ? a : l2_normalize(a);
}

LossToggles toggles_for(Objective o) {
  switch (o) {
    case Objective::Inter: return {true, false, false, false};
    case Objective::Intra: return {false, true, false, false};
    case Objective::Segment: return {false, false, true, false};
    case Objective::Order: return {false, false, false, true};
    case Objective::Total: return {true, true, true, true};
  }
  return {};
}

}  // namespace

std::vector<ObjectiveCheck> check_objective_gradients(const DatasetSpec& data, const TrainConfig& train,
                                                      const GradCheckConfig& cfg) {
  std::vector<ObjectiveCheck> out;
  for (int s = 0; s < cfg.seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s + 1);
    TrainConfig tc = train;
    tc.seed = derive_seed({train.seed, seed});
    const ModelConfig model = tc.model(data);
    Rng rng(derive_seed({tc.seed, 0x6763}));

    std::vector<TrainingSample> samples;
    for (int b = 0; b < cfg.batch; ++b) {
      const int cls = static_cast<int>(rng.below(static_cast<std::size_t>(data.classes)));
      const Video v = generate_video(data, cls, static_cast<int>(rng.below(static_cast<std::size_t>(data.videos_per_class))));
      samples.push_back(make_training_sample(v, tc, s));
    }
    const BatchInputs batch = assemble_batch(samples);
    const ParamSet query = init_params(model, rng);
    ParamSet key = query;
    for (Array& a : key.values) {
      for (double& v : a.data()) v += 0.05 * rng.normal();
    }
    const KeyEmbeddings keys = key_forward(key, model, batch);
    const auto d = static_cast<std::size_t>(model.embed_dim);
    const Array inter_bank = random_unit_rows(static_cast<std::size_t>(cfg.bank_rows), d, rng);
    const Array segment_bank = random_unit_rows(static_cast<std::size_t>(cfg.bank_rows), d, rng);

    for (Objective o : {Objective::Inter, Objective::Intra, Objective::Segment, Objective::Order, Objective::Total}) {
      TrainConfig oc = tc;
      oc.losses = toggles_for(o);
      if (oc.losses.order && model.segments < 2) continue;
      const ScalarFn f = [&](Tape& tape, std::span<const Var> vars) {
        ParamVars pv;
        pv.v.assign(vars.begin(), vars.end());
        return build_objective(tape, pv, model, oc, batch, keys, inter_bank, segment_bank).total;
      };
      GradCheckOptions opts;
      opts.step = cfg.step;
      opts.tol = cfg.tol;
      opts.coords_per_input = static_cast<std::size_t>(cfg.coords);
      opts.seed = derive_seed({seed, static_cast<std::uint64_t>(o)});
      out.push_back({o, seed, grad_check(f, query.values, opts)});
    }
  }
  return out;
}

RunResult run_and_evaluate(const RunConfig& cfg) {
  const DatasetSpec spec = cfg.dataset();
  const TrainConfig train = cfg.train();
  const ProbeConfig probe = cfg.probe();
  const RetrievalConfig retrieval = cfg.retrieval();
  const Dataset data = generate_dataset(spec);
  RunResult r;
  r.state = pretrain(train, spec, data.train);
  const int frames = std::min(probe.frames, spec.frames);
  const FeatureTable train_features = extract_features(r.state.query, data.train, frames, "train");
  const FeatureTable test_features = extract_features(r.state.query, data.test, frames, "test");
  r.probe_accuracy = linear_probe(train_features, test_features, probe);
  r.ks = retrieval.ks;
  r.recall = retrieval_recall(test_features, train_features, r.ks);
  return r;
}

AblationGrid parse_grid(const std::string& text) {
  AblationGrid g;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string directive;
    if (!(words >> directive)) continue;
    if (directive == "seeds") {
      long long s;
      while (words >> s) {
        if (s < 0) throw ConfigError("grid line " + std::to_string(number) + ": negative seed");
        g.seeds.push_back(static_cast<std::uint64_t>(s));
      }
      if (!words.eof()) throw ConfigError("grid line " + std::to_string(number) + ": bad seed list");
    } else if (directive == "entry") {
      GridEntry e;
      if (!(words >> e.name)) throw ConfigError("grid line " + std::to_string(number) + ": entry needs a name");
      std::string kv;
      while (words >> kv) {
        if (kv.find('=') == std::string::npos) {
          throw ConfigError("grid line " + std::to_string(number) + ": expected key=value, got '" + kv + "'");
        }
        e.overrides.push_back(kv);
      }
      g.entries.push_back(std::move(e));
    } else {
      throw ConfigError("grid line " + std::to_string(number) + ": unknown directive '" + directive + "'");
    }
  }
  if (g.entries.empty()) throw ConfigError("grid has no entries");
  if (g.seeds.empty()) throw ConfigError("grid has no seeds");
  return g;
}

AblationGrid preset_grid(const std::string& name) {
  if (name == "losses") {
    return parse_grid(
        "seeds 1 2 3\n"
        "entry inter train.loss_inter=1 train.loss_intra=0 train.loss_segment=0 train.loss_order=0\n"
        "entry segment train.loss_inter=0 train.loss_intra=0 train.loss_segment=1 train.loss_order=0\n"
        "entry order train.loss_inter=0 train.loss_intra=0 train.loss_segment=0 train.loss_order=1\n"
        "entry intra+inter train.loss_inter=1 train.loss_intra=1 train.loss_segment=0 train.loss_order=0\n"
        "entry intra+inter+order train.loss_inter=1 train.loss_intra=1 train.loss_segment=0 train.loss_order=1\n"
        "entry intra+inter+segment train.loss_inter=1 train.loss_intra=1 train.loss_segment=1 train.loss_order=0\n"
        "entry full train.loss_inter=1 train.loss_intra=1 train.loss_segment=1 train.loss_order=1\n");
  }
  if (name == "segments") {
    return parse_grid(
        "seeds 1 2 3\n"
        "entry K=1 train.segments=1 train.loss_order=0\n"
        "entry K=2 train.segments=2\n"
        "entry K=3 train.segments=3\n"
        "entry K=4 train.segments=4\n"
        "entry K=5 train.segments=5\n");
  }
  throw ConfigError("unknown grid preset '" + name + "' (expected losses or segments)");
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const AblationGrid& grid,
                                      const AblationProgress& progress) {
  std::vector<RunConfig> configs;
  for (const GridEntry& e : grid.entries) {
    RunConfig c = base;
    c.apply(e.overrides);
    try {
      c.validate();
    } catch (const ConfigError& err) {
      throw ConfigError("grid entry '" + e.name + "': " + err.what());
    }
    configs.push_back(std::move(c));
  }
  std::vector<AblationRow> rows, summaries;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::vector<double> acc, r1;
    for (std::uint64_t seed : grid.seeds) {
      RunConfig c = configs[i];
      c.set("train.seed", std::to_string(seed));
      RunConfig single = c;
      single.set("retrieval.k", "1");
      const RunResult r = run_and_evaluate(single);
      AblationRow row{grid.entries[i].name, std::to_string(seed), r.probe_accuracy, r.recall.front()};
      acc.push_back(row.probe_accuracy);
      r1.push_back(row.recall_at_1);
      if (progress) progress(row);
      rows.push_back(std::move(row));
    }
    summaries.push_back({grid.entries[i].name, "median", median(acc), median(r1)});
  }
  rows.insert(rows.end(), summaries.begin(), summaries.end());
  return rows;
}

std::string ablation_csv(const std::string& config_text, const std::vector<AblationRow>& rows) {
  std::string out = csv_preamble("VCLR-ABLATION 1", config_text);
  out += "config,seed,probe_accuracy,recall_at_1\n";
  for (const AblationRow& r : rows) {
    out += r.config + "," + r.seed + "," + csv_number(r.probe_accuracy) + "," + csv_number(r.recall_at_1) + "\n";
  }
  return out;
}

}  // namespace vclr
