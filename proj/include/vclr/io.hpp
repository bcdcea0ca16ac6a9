#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vclr/synth_data.hpp"
#include "vclr/trainer.hpp"

namespace vclr {

inline constexpr const char* kCheckpointTag = "VCLR-CHECKPOINT 1";
inline constexpr const char* kDatasetTag = "VCLR-DATASET 1";

/// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Checkpoint layout: text header (version tag, config echo, model shape,
/// training counters, a manifest of `param`/`bank` entries with shapes and
/// byte offsets, RNG state), the line `end_header`, then a little-endian
/// float32 payload holding query params, key params, velocities and both
/// bank storages at the manifest offsets.
std::string encode_checkpoint(const std::string& config_text, const TrainState& state);
void write_checkpoint(const std::filesystem::path& path, const std::string& config_text, const TrainState& state);

struct Checkpoint {
  std::string config_text;
  TrainState state;
};

/// Rejects a wrong version tag before reading anything else; nothing is
/// returned unless the whole file parses.
Checkpoint decode_checkpoint(const std::string& bytes);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Dataset layout: version tag, config echo of the dataset.* keys, a line per
/// video (`video <id> <class> <train|test> <window_start> <window_end>`, -1
/// for no window), `end_header`, then float32 LE pixels in (video, frame, row) order.
std::string encode_dataset(const std::string& config_text, const Dataset& data);
void write_dataset(const std::filesystem::path& path, const std::string& config_text, const Dataset& data);

struct DatasetFile {
  std::string config_text;
  Dataset data;
};

DatasetFile decode_dataset(const std::string& bytes);
DatasetFile read_dataset(const std::filesystem::path& path);

/// `# <tag>` and `# key=value` preamble lines shared by every CSV artifact.
std::string csv_preamble(const std::string& tag, const std::string& config_text);
/// Decimal with 6 significant digits.
std::string csv_number(double v);

/// epoch,step,lr,loss_inter,loss_intra,loss_segment,loss_order,loss_total,order_accuracy
std::string metrics_csv(const std::string& config_text, const std::vector<EpochMetrics>& history);

}  // namespace vclr
