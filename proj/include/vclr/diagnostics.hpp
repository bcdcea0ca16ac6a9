#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vclr/config.hpp"
#include "vclr/numerics.hpp"

namespace vclr {

// ---- gradient-check suite -------------------------------------------------

enum class Objective { Inter, Intra, Segment, Order, Total };
const char* objective_name(Objective o);

struct ObjectiveCheck {
  Objective objective = Objective::Total;
  std::uint64_t seed = 0;
  GradCheckReport report;
};

/// For each seed: a small random batch from the synthetic data, a key network
/// perturbed away from the query, random unit bank rows; then the analytic
/// gradient of each objective w.r.t. every query parameter array is compared
/// against central differences.
std::vector<ObjectiveCheck> check_objective_gradients(const DatasetSpec& data, const TrainConfig& train,
                                                      const GradCheckConfig& cfg);

// ---- evaluation of one pretraining run -------------------------------------

struct RunResult {
  TrainState state;
  double probe_accuracy = 0.0;
  /// R@k for RetrievalConfig::ks, test queries against the train gallery.
  std::vector<double> recall;
  std::vector<int> ks;
};

/// Generates the dataset, pretrains, extracts frozen features and runs the
/// probe and retrieval on the test split.
RunResult run_and_evaluate(const RunConfig& cfg);

// ---- ablation grids -------------------------------------------------------

struct GridEntry {
  std::string name;
  /// key=value overrides applied on top of the base config.
  std::vector<std::string> overrides;
};

struct AblationGrid {
  std::vector<GridEntry> entries;
  std::vector<std::uint64_t> seeds;
};

/// Text format, one directive per line (`#` comments):
///   seeds 1 2 3
///   entry <name> [key=value ...]
AblationGrid parse_grid(const std::string& text);

/// "losses": the loss-objective combinations (intra-only excluded); "segments":
/// K = 1..5 with all losses (order disabled at K = 1). Both over seeds 1, 2, 3.
AblationGrid preset_grid(const std::string& name);

struct AblationRow {
  std::string config;
  /// Seed as text, or "median" for summary rows.
  std::string seed;
  double probe_accuracy = 0.0;
  double recall_at_1 = 0.0;
};

using AblationProgress = std::function<void(const AblationRow&)>;

/// One row per (entry, seed) followed by one median row per entry. Every
/// entry is validated before any training starts.
std::vector<AblationRow> run_ablation(const RunConfig& base, const AblationGrid& grid,
                                      const AblationProgress& progress = {});

/// config,seed,probe_accuracy,recall_at_1
std::string ablation_csv(const std::string& config_text, const std::vector<AblationRow>& rows);

double median(std::vector<double> values);

}  // namespace vclr
