#include "vclr/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vclr/error.hpp"

namespace vclr {

namespace {

struct KeyDefault {
  const char* key;
  const char* value;
  const char* doc;
};

const std::vector<KeyDefault>& key_table() {
  static const std::vector<KeyDefault> table = {
      {"augment.blur_prob", "0.5", "probability of a 3x3 box blur per frame"},
      {"augment.brightness", "0.2", "brightness shift drawn from [-b, b]"},
      {"augment.contrast", "0.2", "contrast factor drawn from [1-c, 1+c]"},
      {"augment.crop_jitter", "1", "crop offset from centre as a fraction of the free margin (0 centred, 1 anywhere)"},
      {"augment.flip_prob", "0", "probability of a horizontal flip per frame"},
      {"augment.min_scale", "0.6", "smallest crop scale; crops are drawn from [min_scale, 1]"},
      {"augment.shared_per_tuple", "0", "1 draws one augmentation per tuple instead of per frame"},
      {"dataset.classes", "8", "number of classes C"},
      {"dataset.coverage", "0.5", "action coverage ratio in untrimmed mode"},
      {"dataset.frames", "32", "frames per video T"},
      {"dataset.height", "16", "frame height H"},
      {"dataset.noise", "0.05", "additive uniform noise amplitude"},
      {"dataset.seed", "1", "master seed for video generation and the split"},
      {"dataset.train_fraction", "0.8", "per-class fraction of videos in the train split"},
      {"dataset.untrimmed", "0", "1 confines the action to a window of the timeline"},
      {"dataset.videos_per_class", "25", "videos generated per class"},
      {"dataset.width", "16", "frame width W"},
      {"gradcheck.bank_rows", "16", "negatives per memory bank in gradient checks"},
      {"gradcheck.batch", "2", "videos per batch in gradient checks"},
      {"gradcheck.coords", "8", "coordinates probed per parameter array (0 = all)"},
      {"gradcheck.seeds", "10", "number of random seeds checked"},
      {"gradcheck.step", "1e-05", "central-difference step"},
      {"gradcheck.tol", "0.0001", "maximum allowed relative error"},
      {"model.embed_dim", "32", "head output width d"},
      {"model.feature_dim", "64", "encoder output width D"},
      {"model.hidden", "128", "encoder hidden width"},
      {"model.normalize_order", "1", "L2-normalise order-head embeddings before concatenation"},
      {"model.order_positive_key", "1", "encode the positive tuple's order embeddings with the key network"},
      {"probe.frames", "8", "frames averaged per video for features (capped at T)"},
      {"probe.iterations", "500", "gradient-descent iterations of the linear probe"},
      {"probe.l2", "0.001", "L2 penalty of the linear probe"},
      {"retrieval.k", "1,5,10", "comma-separated k values for R@k"},
      {"train.batch", "32", "videos per optimisation step"},
      {"train.bank_capacity", "4096", "rows per memory bank"},
      {"train.checkpoint_every", "0", "write an intermediate checkpoint every N epochs (0 = off)"},
      {"train.epochs", "60", "training epochs"},
      {"train.frame_source", "segment", "frame-level triplet source: segment | uniform"},
      {"train.key_momentum", "0.999", "momentum m of the key network update"},
      {"train.loss_inter", "1", "enable the inter-frame contrastive loss"},
      {"train.loss_intra", "1", "enable the intra-frame contrastive loss"},
      {"train.loss_order", "1", "enable the temporal order loss"},
      {"train.loss_segment", "1", "enable the segment (video-level) contrastive loss"},
      {"train.lr", "0.05", "initial learning rate, cosine-annealed to zero"},
      {"train.momentum", "0.9", "SGD momentum"},
      {"train.seed", "1", "seed for initialisation, sampling and augmentation"},
      {"train.segments", "3", "segments per tuple K"},
      {"train.tau", "0.07", "softmax temperature of the contrastive losses"},
      {"train.weight_decay", "0.0001", "SGD weight decay"},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError(key + ": expected 0 or 1, got '" + v + "'");
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_documentation() {
  static const std::vector<std::pair<std::string, std::string>> docs = [] {
    std::vector<std::pair<std::string, std::string>> d;
    for (const KeyDefault& k : key_table()) d.emplace_back(k.key, k.doc);
    return d;
  }();
  return docs;
}

RunConfig::RunConfig() {
  for (const KeyDefault& k : key_table()) values_[k.key] = k.value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = trim(value);
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

void RunConfig::apply(const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    set(trim(o.substr(0, eq)), o.substr(eq + 1));
  }
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key=value");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

RunConfig RunConfig::resolve(const std::filesystem::path& path) {
  if (!path.empty()) return load(path);
  if (const char* env = std::getenv("VCLR_CONFIG"); env != nullptr && *env != '\0') return load(env);
  return RunConfig();
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

DatasetSpec RunConfig::dataset() const {
  DatasetSpec s;
  const auto i = [&](const char* k) { return static_cast<int>(to_int(k, get(k))); };
  s.classes = i("dataset.classes");
  s.videos_per_class = i("dataset.videos_per_class");
  s.frames = i("dataset.frames");
  s.height = i("dataset.height");
  s.width = i("dataset.width");
  s.untrimmed = to_bool("dataset.untrimmed", get("dataset.untrimmed"));
  s.coverage = to_double("dataset.coverage", get("dataset.coverage"));
  s.noise = to_double("dataset.noise", get("dataset.noise"));
  const long long seed = to_int("dataset.seed", get("dataset.seed"));
  if (seed < 0) throw ConfigError("dataset.seed must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);
  s.train_fraction = to_double("dataset.train_fraction", get("dataset.train_fraction"));
  s.validate();
  return s;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  const auto i = [&](const char* k) { return static_cast<int>(to_int(k, get(k))); };
  const auto d = [&](const char* k) { return to_double(k, get(k)); };
  const auto b = [&](const char* k) { return to_bool(k, get(k)); };
  t.epochs = i("train.epochs");
  t.batch = i("train.batch");
  t.lr = d("train.lr");
  t.momentum = d("train.momentum");
  t.weight_decay = d("train.weight_decay");
  t.tau = d("train.tau");
  t.segments = i("train.segments");
  t.key_momentum = d("train.key_momentum");
  const long long cap = to_int("train.bank_capacity", get("train.bank_capacity"));
  if (cap < 1) throw ConfigError("train.bank_capacity must be >= 1");
  t.bank_capacity = static_cast<std::size_t>(cap);
  const long long seed = to_int("train.seed", get("train.seed"));
  if (seed < 0) throw ConfigError("train.seed must be >= 0");
  t.seed = static_cast<std::uint64_t>(seed);
  t.losses = {b("train.loss_inter"), b("train.loss_intra"), b("train.loss_segment"), b("train.loss_order")};
  const std::string& source = get("train.frame_source");
  if (source == "segment") {
    t.frame_source = FrameSource::AnchorSegments;
  } else if (source == "uniform") {
    t.frame_source = FrameSource::Uniform;
  } else {
    throw ConfigError("train.frame_source: expected segment or uniform, got '" + source + "'");
  }
  t.augment.min_scale = d("augment.min_scale");
  t.augment.crop_jitter = d("augment.crop_jitter");
  t.augment.flip_prob = d("augment.flip_prob");
  t.augment.brightness = d("augment.brightness");
  t.augment.contrast = d("augment.contrast");
  t.augment.blur_prob = d("augment.blur_prob");
  t.augment.shared_per_tuple = b("augment.shared_per_tuple");
  t.hidden = i("model.hidden");
  t.feature_dim = i("model.feature_dim");
  t.embed_dim = i("model.embed_dim");
  t.normalize_order = b("model.normalize_order");
  t.order_positive_key = b("model.order_positive_key");
  t.checkpoint_every = i("train.checkpoint_every");
  t.validate();
  return t;
}

ProbeConfig RunConfig::probe() const {
  ProbeConfig p;
  p.iterations = static_cast<int>(to_int("probe.iterations", get("probe.iterations")));
  p.l2 = to_double("probe.l2", get("probe.l2"));
  p.frames = static_cast<int>(to_int("probe.frames", get("probe.frames")));
  if (p.iterations < 1) throw ConfigError("probe.iterations must be >= 1");
  if (!(p.l2 >= 0.0)) throw ConfigError("probe.l2 must be >= 0");
  if (p.frames < 1) throw ConfigError("probe.frames must be >= 1");
  return p;
}

RetrievalConfig RunConfig::retrieval() const {
  RetrievalConfig r;
  r.ks.clear();
  std::istringstream in(get("retrieval.k"));
  std::string item;
  while (std::getline(in, item, ',')) {
    const long long k = to_int("retrieval.k", trim(item));
    if (k < 1) throw ConfigError("retrieval.k values must be >= 1");
    r.ks.push_back(static_cast<int>(k));
  }
  if (r.ks.empty()) throw ConfigError("retrieval.k must list at least one value");
  return r;
}

GradCheckConfig RunConfig::gradcheck() const {
  GradCheckConfig g;
  g.step = to_double("gradcheck.step", get("gradcheck.step"));
  g.tol = to_double("gradcheck.tol", get("gradcheck.tol"));
  g.seeds = static_cast<int>(to_int("gradcheck.seeds", get("gradcheck.seeds")));
  g.coords = static_cast<int>(to_int("gradcheck.coords", get("gradcheck.coords")));
  g.batch = static_cast<int>(to_int("gradcheck.batch", get("gradcheck.batch")));
  g.bank_rows = static_cast<int>(to_int("gradcheck.bank_rows", get("gradcheck.bank_rows")));
  if (!(g.step > 0.0) || !(g.tol > 0.0)) throw ConfigError("gradcheck.step and gradcheck.tol must be > 0");
  if (g.seeds < 1 || g.coords < 0 || g.batch < 1 || g.bank_rows < 0) {
    throw ConfigError("gradcheck.seeds >= 1, coords >= 0, batch >= 1, bank_rows >= 0 required");
  }
  return g;
}

void RunConfig::validate() const {
  dataset();
  train();
  probe();
  retrieval();
  gradcheck();
}

}  // namespace vclr
