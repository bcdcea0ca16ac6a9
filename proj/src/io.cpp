#include "vclr/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "vclr/error.hpp"

namespace vclr {

static_assert(sizeof(float) == 4);

namespace {

void append_f32(std::string& out, double v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  char buf[4];
  std::memcpy(buf, &bits, 4);
  out.append(buf, 4);
}

double read_f32(const std::string& bytes, std::size_t offset) {
  std::uint32_t bits;
  std::memcpy(&bits, bytes.data() + offset, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::string shape_token(const std::vector<std::size_t>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

std::vector<std::size_t> parse_shape(const std::string& token) {
  std::vector<std::size_t> shape;
  std::istringstream in(token);
  std::string part;
  while (std::getline(in, part, 'x')) shape.push_back(static_cast<std::size_t>(std::stoull(part)));
  return shape;
}

// Sequential reader over the text header of an artifact.
class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, const char* tag, const char* what) : bytes_(bytes), what_(what) {
    const std::string first = line();
    if (first != tag) throw IoError(std::string(what) + ": version tag '" + first + "' is not '" + tag + "'");
  }

  std::string line() {
    const auto end = bytes_.find('\n', pos_);
    if (end == std::string::npos) throw IoError(std::string(what_) + ": truncated header");
    std::string out = bytes_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

  std::string raw(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError(std::string(what_) + ": truncated header");
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  /// Reads a line `<keyword> <value...>` and returns the rest as a stream.
  std::istringstream expect(const std::string& keyword) {
    const std::string l = line();
    std::istringstream in(l);
    std::string k;
    in >> k;
    if (k != keyword) throw IoError(std::string(what_) + ": expected '" + keyword + "', got '" + l + "'");
    return in;
  }

  std::string config_echo() {
    std::size_t n = 0;
    auto in = expect("config_bytes");
    in >> n;
    if (in.fail()) throw IoError(std::string(what_) + ": bad config_bytes");
    std::string text = raw(n);
    return text;
  }

  std::size_t position() const { return pos_; }

 private:
  const std::string& bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

template <typename T>
T field(std::istringstream& in, const char* what) {
  T v{};
  in >> v;
  if (in.fail()) throw IoError(std::string(what) + ": malformed header field");
  return v;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_checkpoint(const std::string& config_text, const TrainState& state) {
  std::string header = std::string(kCheckpointTag) + "\n";
  header += "config_bytes " + std::to_string(config_text.size()) + "\n" + config_text;
  const ModelConfig& m = state.model;
  header += "model " + std::to_string(m.input_dim) + " " + std::to_string(m.hidden) + " " +
            std::to_string(m.feature_dim) + " " + std::to_string(m.embed_dim) + " " + std::to_string(m.segments) +
            " " + std::to_string(m.normalize_order ? 1 : 0) + " " + std::to_string(m.order_positive_key ? 1 : 0) + "\n";
  header += "counters " + std::to_string(state.step) + " " + std::to_string(state.epoch) + " " +
            std::to_string(state.total_steps) + "\n";

  std::string payload;
  std::string manifest;
  std::size_t entries = 0;
  const auto add_param = [&](const std::string& group, const std::string& name, const Array& a) {
    manifest += "param " + group + "." + name + " " + shape_token(a.shape()) + " " + std::to_string(payload.size()) + "\n";
    for (double v : a.data()) append_f32(payload, v);
    ++entries;
  };
  for (std::size_t i = 0; i < state.query.size(); ++i) add_param("query", state.query.names[i], state.query.values[i]);
  for (std::size_t i = 0; i < state.key.size(); ++i) add_param("key", state.key.names[i], state.key.values[i]);
  for (std::size_t i = 0; i < state.velocity.size(); ++i) add_param("velocity", state.query.names[i], state.velocity[i]);
  const auto add_bank = [&](const std::string& name, const MemoryBank& b) {
    manifest += "bank " + name + " " + std::to_string(b.capacity()) + " " + std::to_string(b.width()) + " " +
                std::to_string(b.cursor()) + " " + std::to_string(b.fill()) + " " + std::to_string(payload.size()) + "\n";
    for (double v : b.storage()) append_f32(payload, v);
    ++entries;
  };
  add_bank("inter", state.inter_bank);
  add_bank("segment", state.segment_bank);
  header += "entries " + std::to_string(entries) + "\n" + manifest;
  const std::string rng = state.order_rng.state();
  header += "rng order " + std::to_string(rng.size()) + "\n" + rng + "\n";
  header += "payload_bytes " + std::to_string(payload.size()) + "\n";
  header += "end_header\n";
  return header + payload;
}

void write_checkpoint(const std::filesystem::path& path, const std::string& config_text, const TrainState& state) {
  write_file_atomic(path, encode_checkpoint(config_text, state));
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  constexpr const char* what = "checkpoint";
  HeaderReader h(bytes, kCheckpointTag, what);
  Checkpoint ck;
  ck.config_text = h.config_echo();
  TrainState& s = ck.state;
  {
    auto in = h.expect("model");
    s.model.input_dim = field<int>(in, what);
    s.model.hidden = field<int>(in, what);
    s.model.feature_dim = field<int>(in, what);
    s.model.embed_dim = field<int>(in, what);
    s.model.segments = field<int>(in, what);
    s.model.normalize_order = field<int>(in, what) != 0;
    s.model.order_positive_key = field<int>(in, what) != 0;
  }
  {
    auto in = h.expect("counters");
    s.step = field<long>(in, what);
    s.epoch = field<int>(in, what);
    s.total_steps = field<long>(in, what);
  }
  struct ParamEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset;
  };
  struct BankEntry {
    std::size_t capacity, width, cursor, fill, offset;
  };
  std::vector<ParamEntry> params;
  std::map<std::string, BankEntry> banks;
  std::size_t entries = 0;
  {
    auto in = h.expect("entries");
    entries = field<std::size_t>(in, what);
  }
  for (std::size_t e = 0; e < entries; ++e) {
    std::istringstream in(h.line());
    const auto kind = field<std::string>(in, what);
    if (kind == "param") {
      ParamEntry p;
      p.name = field<std::string>(in, what);
      p.shape = parse_shape(field<std::string>(in, what));
      p.offset = field<std::size_t>(in, what);
      params.push_back(std::move(p));
    } else if (kind == "bank") {
      const auto name = field<std::string>(in, what);
      BankEntry b{};
      b.capacity = field<std::size_t>(in, what);
      b.width = field<std::size_t>(in, what);
      b.cursor = field<std::size_t>(in, what);
      b.fill = field<std::size_t>(in, what);
      b.offset = field<std::size_t>(in, what);
      banks[name] = b;
    } else {
      throw IoError("checkpoint: unknown manifest entry '" + kind + "'");
    }
  }
  std::string rng_state;
  {
    auto in = h.expect("rng");
    if (field<std::string>(in, what) != "order") throw IoError("checkpoint: unknown rng stream");
    rng_state = h.raw(field<std::size_t>(in, what));
    h.line();
  }
  std::size_t payload_bytes = 0;
  {
    auto in = h.expect("payload_bytes");
    payload_bytes = field<std::size_t>(in, what);
  }
  if (h.line() != "end_header") throw IoError("checkpoint: missing end_header");
  const std::size_t base = h.position();
  if (bytes.size() != base + payload_bytes) throw IoError("checkpoint: payload size mismatch");

  const auto load_array = [&](const ParamEntry& p) {
    Array a(p.shape);
    if (p.offset + a.size() * 4 > payload_bytes) throw IoError("checkpoint: entry " + p.name + " out of range");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = read_f32(bytes, base + p.offset + 4 * i);
    return a;
  };
  for (const ParamEntry& p : params) {
    const auto dot = p.name.find('.');
    const std::string group = p.name.substr(0, dot), name = p.name.substr(dot + 1);
    if (group == "query") {
      s.query.names.push_back(name);
      s.query.values.push_back(load_array(p));
    } else if (group == "key") {
      s.key.names.push_back(name);
      s.key.values.push_back(load_array(p));
    } else if (group == "velocity") {
      s.velocity.push_back(load_array(p));
    } else {
      throw IoError("checkpoint: unknown parameter group in " + p.name);
    }
  }
  check_params(s.query, s.model);
  check_params(s.key, s.model);
  if (s.velocity.size() != s.query.size()) throw IoError("checkpoint: velocity count mismatch");
  const auto load_bank = [&](const std::string& name) {
    const auto it = banks.find(name);
    if (it == banks.end()) throw IoError("checkpoint: missing bank " + name);
    const BankEntry& b = it->second;
    if (b.offset + b.capacity * b.width * 4 > payload_bytes) throw IoError("checkpoint: bank " + name + " out of range");
    std::vector<double> storage(b.capacity * b.width);
    for (std::size_t i = 0; i < storage.size(); ++i) storage[i] = read_f32(bytes, base + b.offset + 4 * i);
    return MemoryBank::restore(b.capacity, b.width, std::move(storage), b.cursor, b.fill);
  };
  s.inter_bank = load_bank("inter");
  s.segment_bank = load_bank("segment");
  s.order_rng.restore(rng_state);
  return ck;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string encode_dataset(const std::string& config_text, const Dataset& data) {
  std::string header = std::string(kDatasetTag) + "\n";
  header += "config_bytes " + std::to_string(config_text.size()) + "\n" + config_text;
  const std::size_t count = data.train.size() + data.test.size();
  if (count == 0) throw IoError("dataset: nothing to write");
  const Video& first = data.train.empty() ? data.test.front() : data.train.front();
  const std::size_t T = first.frames.size(), H = first.frames.front().rows(), W = first.frames.front().cols();
  header += "videos " + std::to_string(count) + " " + std::to_string(T) + " " + std::to_string(H) + " " +
            std::to_string(W) + "\n";
  std::string payload;
  payload.reserve(count * T * H * W * 4);
  const auto add = [&](const Video& v, const char* split) {
    if (v.frames.size() != T) throw IoError("dataset: videos differ in length");
    const int ws = v.action_window ? v.action_window->start : -1;
    const int we = v.action_window ? v.action_window->end : -1;
    header += "video " + std::to_string(v.id) + " " + std::to_string(v.class_id) + " " + split + " " +
              std::to_string(ws) + " " + std::to_string(we) + "\n";
    for (const Array& f : v.frames) {
      for (double px : f.data()) append_f32(payload, px);
    }
  };
  for (const Video& v : data.train) add(v, "train");
  for (const Video& v : data.test) add(v, "test");
  header += "end_header\n";
  return header + payload;
}

void write_dataset(const std::filesystem::path& path, const std::string& config_text, const Dataset& data) {
  write_file_atomic(path, encode_dataset(config_text, data));
}

DatasetFile decode_dataset(const std::string& bytes) {
  constexpr const char* what = "dataset";
  HeaderReader h(bytes, kDatasetTag, what);
  DatasetFile out;
  out.config_text = h.config_echo();
  auto in = h.expect("videos");
  const auto count = field<std::size_t>(in, what);
  const auto T = field<std::size_t>(in, what);
  const auto H = field<std::size_t>(in, what);
  const auto W = field<std::size_t>(in, what);
  struct Meta {
    int id, class_id, start, end;
    bool train;
  };
  std::vector<Meta> metas;
  for (std::size_t i = 0; i < count; ++i) {
    auto v = h.expect("video");
    Meta m{};
    m.id = field<int>(v, what);
    m.class_id = field<int>(v, what);
    const auto split = field<std::string>(v, what);
    if (split != "train" && split != "test") throw IoError("dataset: bad split '" + split + "'");
    m.train = split == "train";
    m.start = field<int>(v, what);
    m.end = field<int>(v, what);
    metas.push_back(m);
  }
  if (h.line() != "end_header") throw IoError("dataset: missing end_header");
  const std::size_t base = h.position();
  const std::size_t frame_bytes = H * W * 4;
  if (bytes.size() != base + count * T * frame_bytes) throw IoError("dataset: payload size mismatch");
  std::size_t offset = base;
  for (const Meta& m : metas) {
    Video v;
    v.id = m.id;
    v.class_id = m.class_id;
    if (m.start >= 0) v.action_window = FrameWindow{m.start, m.end};
    for (std::size_t t = 0; t < T; ++t) {
      Array f = Array::matrix(H, W);
      for (std::size_t i = 0; i < H * W; ++i, offset += 4) f[i] = read_f32(bytes, offset);
      v.frames.push_back(std::move(f));
    }
    (m.train ? out.data.train : out.data.test).push_back(std::move(v));
  }
  return out;
}

DatasetFile read_dataset(const std::filesystem::path& path) {
  try {
    return decode_dataset(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string csv_preamble(const std::string& tag, const std::string& config_text) {
  std::string out = "# " + tag + "\n";
  std::istringstream in(config_text);
  std::string line;
  while (std::getline(in, line)) out += "# " + line + "\n";
  return out;
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string metrics_csv(const std::string& config_text, const std::vector<EpochMetrics>& history) {
  std::string out = csv_preamble("VCLR-METRICS 1", config_text);
  out += "epoch,step,lr,loss_inter,loss_intra,loss_segment,loss_order,loss_total,order_accuracy\n";
  for (const EpochMetrics& e : history) {
    const StepMetrics& m = e.mean;
    out += std::to_string(e.epoch) + "," + std::to_string(e.step) + "," + csv_number(m.lr) + "," +
           csv_number(m.inter) + "," + csv_number(m.intra) + "," + csv_number(m.segment) + "," +
           csv_number(m.order) + "," + csv_number(m.total) + "," + csv_number(m.order_accuracy) + "\n";
  }
  return out;
}

}  // namespace vclr
