// vclr: generate data, pretrain, evaluate, ablate and gradient-check.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vclr/config.hpp"
#include "vclr/diagnostics.hpp"
#include "vclr/error.hpp"
#include "vclr/eval.hpp"
#include "vclr/io.hpp"
#include "vclr/trainer.hpp"

namespace fs = std::filesystem;
using namespace vclr;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::string checkpoint;
  std::string dataset;
  std::string grid;
  bool quiet = false;
};

RunConfig load_config(const Options& o) {
  RunConfig cfg = RunConfig::resolve(o.config);
  cfg.apply(o.overrides);
  cfg.validate();
  return cfg;
}

void log(const Options& o, const std::string& line) {
  if (!o.quiet) std::cerr << line << '\n';
}

int cmd_gen(const Options& o) {
  const RunConfig cfg = load_config(o);
  const Dataset data = generate_dataset(cfg.dataset());
  write_dataset(o.out, cfg.to_text(), data);
  std::cout << "wrote " << o.out << " (" << data.train.size() << " train, " << data.test.size() << " test)\n";
  return 0;
}

int cmd_pretrain(const Options& o) {
  const RunConfig cfg = load_config(o);
  const std::string text = cfg.to_text();
  const DatasetSpec spec = cfg.dataset();
  const TrainConfig train = cfg.train();
  const fs::path dir = o.out;
  fs::create_directories(dir);
  const Dataset data = generate_dataset(spec);
  const TrainState state = pretrain(train, spec, data.train, [&](const TrainState& s) {
    const StepMetrics& m = s.history.back().mean;
    char line[160];
    std::snprintf(line, sizeof line, "epoch %d/%d loss %.4f order_acc %.3f lr %.4g", s.epoch, train.epochs, m.total,
                  m.order_accuracy, m.lr);
    log(o, line);
    if (train.checkpoint_every > 0 && s.epoch % train.checkpoint_every == 0 && s.epoch < train.epochs) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_epoch%03d.bin", s.epoch);
      write_checkpoint(dir / name, text, s);
    }
  });
  write_checkpoint(dir / "checkpoint.bin", text, state);
  write_file_atomic(dir / "metrics.csv", metrics_csv(text, state.history));
  std::cout << "wrote " << (dir / "checkpoint.bin").string() << " and " << (dir / "metrics.csv").string() << '\n';
  return 0;
}

struct Loaded {
  Checkpoint ckpt;
  DatasetFile data;
  RunConfig cfg;
};

Loaded load_eval_inputs(const Options& o) {
  Loaded l{read_checkpoint(o.checkpoint), read_dataset(o.dataset), {}};
  l.cfg = RunConfig::parse(l.ckpt.config_text);
  l.cfg.apply(o.overrides);
  l.cfg.validate();
  const Dataset& d = l.data.data;
  const std::vector<Video>& any = d.train.empty() ? d.test : d.train;
  if (any.empty()) throw ConfigError("dataset file holds no videos");
  const Array& frame = any.front().frames.front();
  if (static_cast<int>(frame.size()) != l.ckpt.state.model.input_dim) {
    throw ConfigError("dataset frames have " + std::to_string(frame.size()) + " pixels but the checkpoint expects " +
                      std::to_string(l.ckpt.state.model.input_dim));
  }
  return l;
}

int frames_for(const RunConfig& cfg, const Dataset& d) {
  const int t = static_cast<int>((d.train.empty() ? d.test : d.train).front().frames.size());
  return std::min(cfg.probe().frames, t);
}

int cmd_probe(const Options& o) {
  const Loaded l = load_eval_inputs(o);
  const int frames = frames_for(l.cfg, l.data.data);
  const FeatureTable train = extract_features(l.ckpt.state.query, l.data.data.train, frames, "train");
  const FeatureTable test = extract_features(l.ckpt.state.query, l.data.data.test, frames, "test");
  const double acc = linear_probe(train, test, l.cfg.probe());
  std::string csv = csv_preamble("VCLR-PROBE 1", l.cfg.to_text());
  csv += "train_videos,test_videos,frames,probe_accuracy\n";
  csv += std::to_string(train.size()) + "," + std::to_string(test.size()) + "," + std::to_string(frames) + "," +
         csv_number(acc) + "\n";
  write_file_atomic(o.out, csv);
  std::cout << "probe_accuracy " << csv_number(acc) << '\n';
  return 0;
}

int cmd_retrieve(const Options& o) {
  const Loaded l = load_eval_inputs(o);
  const int frames = frames_for(l.cfg, l.data.data);
  const FeatureTable gallery = extract_features(l.ckpt.state.query, l.data.data.train, frames, "train");
  const FeatureTable queries = extract_features(l.ckpt.state.query, l.data.data.test, frames, "test");
  const std::vector<int> ks = l.cfg.retrieval().ks;
  const std::vector<double> recall = retrieval_recall(queries, gallery, ks);
  std::string csv = csv_preamble("VCLR-RETRIEVAL 1", l.cfg.to_text());
  csv += "k,recall\n";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    csv += std::to_string(ks[i]) + "," + csv_number(recall[i]) + "\n";
    std::cout << "R@" << ks[i] << ' ' << csv_number(recall[i]) << '\n';
  }
  write_file_atomic(o.out, csv);
  return 0;
}

int cmd_ablate(const Options& o) {
  const RunConfig cfg = load_config(o);
  const AblationGrid grid = fs::exists(o.grid) ? parse_grid(read_file(o.grid)) : preset_grid(o.grid);
  const auto rows = run_ablation(cfg, grid, [&](const AblationRow& r) {
    log(o, r.config + " seed " + r.seed + " probe " + csv_number(r.probe_accuracy) + " R@1 " +
               csv_number(r.recall_at_1));
  });
  write_file_atomic(o.out, ablation_csv(cfg.to_text(), rows));
  std::cout << "wrote " << o.out << " (" << rows.size() << " rows)\n";
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const RunConfig cfg = load_config(o);
  const GradCheckConfig gc = cfg.gradcheck();
  const auto checks = check_objective_gradients(cfg.dataset(), cfg.train(), gc);
  const ObjectiveCheck* worst = nullptr;
  for (const ObjectiveCheck& c : checks) {
    std::printf("%-8s seed %2llu max_rel_error %.3e %s\n", objective_name(c.objective),
                static_cast<unsigned long long>(c.seed), c.report.max_rel_error, c.report.passed ? "ok" : "FAIL");
    if (!c.report.passed && (!worst || c.report.max_rel_error > worst->report.max_rel_error)) worst = &c;
  }
  if (worst) {
    char line[200];
    std::snprintf(line, sizeof line, "objective %s seed %llu max relative error %.3e exceeds %.1e",
                  objective_name(worst->objective), static_cast<unsigned long long>(worst->seed),
                  worst->report.max_rel_error, gc.tol);
    throw DomainError(line);
  }
  return 0;
}

const char* kind_of(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  return "internal";
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vclr: contrastive video representation learning on synthetic clips"};
  app.require_subcommand(1);
  Options o;

  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "key=value config file (default: $VCLR_CONFIG or built-in defaults)");
    sub->add_option("-s,--set", o.overrides, "override a key, e.g. --set train.epochs=5");
    sub->add_flag("-q,--quiet", o.quiet, "suppress progress lines");
  };

  auto* gen = app.add_subcommand("gen", "write a synthetic dataset file");
  add_config(gen);
  gen->add_option("-o,--out", o.out, "dataset file")->required();

  auto* pre = app.add_subcommand("pretrain", "pretrain and write checkpoint.bin and metrics.csv");
  add_config(pre);
  pre->add_option("-o,--out", o.out, "output directory")->required();

  auto* probe = app.add_subcommand("probe", "linear evaluation of a checkpoint's frozen encoder");
  auto* retrieve = app.add_subcommand("retrieve", "R@k of a checkpoint's frozen encoder, test vs train");
  for (CLI::App* sub : {probe, retrieve}) {
    sub->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
    sub->add_option("--dataset", o.dataset, "dataset file from `gen`")->required();
    sub->add_option("-o,--out", o.out, "output CSV")->required();
    sub->add_option("-s,--set", o.overrides, "override a probe.* or retrieval.* key");
  }

  auto* ablate = app.add_subcommand("ablate", "run a grid of configs over seeds");
  add_config(ablate);
  ablate->add_option("-g,--grid", o.grid, "grid file, or preset losses / segments")->required();
  ablate->add_option("-o,--out", o.out, "output CSV")->required();

  auto* grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients of every loss");
  add_config(grad);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*pre) return cmd_pretrain(o);
    if (*probe) return cmd_probe(o);
    if (*retrieve) return cmd_retrieve(o);
    if (*ablate) return cmd_ablate(o);
    if (*grad) return cmd_gradcheck(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << kind_of(e) << ": " << one_line(e.what()) << '\n';
    return 1;
  }
  return 1;
}
