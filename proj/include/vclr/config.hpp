#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vclr/eval.hpp"
#include "vclr/synth_data.hpp"
#include "vclr/trainer.hpp"

namespace vclr {

struct RetrievalConfig {
  std::vector<int> ks = {1, 5, 10};
};

struct GradCheckConfig {
  double step = 1e-5;
  double tol = 1e-4;
  int seeds = 10;
  /// Coordinates probed per parameter array; 0 probes all of them.
  int coords = 8;
  int batch = 2;
  int bank_rows = 16;
};

/// Flat `key=value` configuration. Every key has a default; unknown keys are
/// rejected. `#` starts a comment; blank lines are ignored.
class RunConfig {
 public:
  /// All keys at their defaults.
  RunConfig();

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// Loads `path` if non-empty, else $VCLR_CONFIG if set, else defaults.
  static RunConfig resolve(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  /// Applies `key=value` overrides in order.
  void apply(const std::vector<std::string>& overrides);

  /// Canonical text: one `key=value` line per key in sorted order.
  std::string to_text() const;

  DatasetSpec dataset() const;
  TrainConfig train() const;
  ProbeConfig probe() const;
  RetrievalConfig retrieval() const;
  GradCheckConfig gradcheck() const;

  /// Converts every section, throwing ConfigError on the first bad value.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  std::map<std::string, std::string> values_;
};

/// Key/description pairs for every configuration key.
const std::vector<std::pair<std::string, std::string>>& config_documentation();

}  // namespace vclr
