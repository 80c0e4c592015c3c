#include "coreguard/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "coreguard/error.hpp"

namespace coreguard::io {
namespace {

constexpr char kCheckpointMagic[4] = {'C', 'G', 'R', 'D'};
constexpr char kKeyMagic[4] = {'C', 'G', 'K', 'Y'};
constexpr char kTraceMagic[4] = {'C', 'G', 'T', 'R'};
constexpr std::uint16_t kKindModel = 0;
constexpr std::uint16_t kKindLocked = 1;

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str16(const std::string& s) {
    u16(static_cast<std::uint16_t>(s.size()));
    raw(s.data(), s.size());
  }
  Bytes take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw FormatError(fmt::format("truncated file: {} needs {} bytes at offset {}, {} left",
                                    what, n, pos_, remaining()));
    }
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(le(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64(const char* what) { return le(8, what); }
  std::string str16(const char* what) {
    const std::uint16_t n = u16(what);
    const auto b = bytes(n, what);
    return {b.begin(), b.end()};
  }
  void expect_magic(const char (&magic)[4], const char* kind) {
    const auto b = bytes(4, "magic");
    if (!std::equal(b.begin(), b.end(), magic)) {
      throw FormatError(fmt::format("not a {} file: bad magic at offset 0", kind));
    }
  }
  void expect_version(std::uint16_t want, const char* kind) {
    const std::size_t at = pos_;
    const std::uint16_t v = u16("version");
    if (v != want) {
      throw FormatError(fmt::format("{} version {} at offset {} is not supported (expected {})",
                                    kind, v, at, want));
    }
  }
  void expect_end(const char* kind) {
    if (remaining() != 0) {
      throw FormatError(fmt::format("{}: {} trailing bytes at offset {}", kind, remaining(), pos_));
    }
  }

 private:
  std::uint64_t le(int n, const char* what) {
    const auto b = bytes(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

float read_f32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(v);
}

// --- tensor directory ---------------------------------------------------------

struct TensorRef {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  std::span<const float> data;
};

constexpr const char* kLayerFields[] = {"wq", "wk", "wv", "wo", "gamma1", "beta1",
                                        "wm", "bm", "wn", "bn", "gamma2", "beta2"};

void add_layer(std::vector<TensorRef>& out, const std::string& prefix, const LayerWeights& w) {
  const Matrix* mats[] = {&w.wq, &w.wk, &w.wv, &w.wo, nullptr, nullptr,
                          &w.wm, nullptr, &w.wn, nullptr, nullptr, nullptr};
  const Vector* vecs[] = {nullptr, nullptr, nullptr, nullptr, &w.gamma1, &w.beta1,
                          nullptr, &w.bm, nullptr, &w.bn, &w.gamma2, &w.beta2};
  for (std::size_t i = 0; i < std::size(kLayerFields); ++i) {
    const std::string name = prefix + kLayerFields[i];
    if (mats[i] != nullptr) {
      out.push_back({name, mats[i]->rows(), mats[i]->cols(), mats[i]->data()});
    } else {
      out.push_back({name, 1, vecs[i]->size(), *vecs[i]});
    }
  }
}

Bytes encode(std::uint16_t kind, const ModelConfig& cfg, const std::vector<TensorRef>& tensors) {
  Writer w;
  w.raw(kCheckpointMagic, 4);
  w.u16(kCheckpointVersion);
  w.u16(kind);
  for (std::size_t v : {cfg.num_layers, cfg.d_model, cfg.num_heads, cfg.d_ffn, cfg.seq_len,
                        cfg.vocab_size}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(cfg.causal ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(cfg.auth_position));
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    w.str16(t.name);
    w.u32(static_cast<std::uint32_t>(t.rows));
    w.u32(static_cast<std::uint32_t>(t.cols));
    w.u64(offset);
    offset += t.data.size() * 4;
  }
  w.u64(offset);
  for (const auto& t : tensors) {
    for (float v : t.data) w.f32(v);
  }
  return w.take();
}

struct Directory {
  ModelConfig config;
  std::uint16_t kind = 0;
  struct Entry {
    std::size_t rows, cols;
    std::uint64_t offset;
  };
  std::map<std::string, Entry> entries;
  std::span<const std::uint8_t> payload;
  std::size_t payload_offset = 0;

  Matrix matrix(const std::string& name, std::size_t rows, std::size_t cols) const {
    const auto it = entries.find(name);
    if (it == entries.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    const Entry& e = it->second;
    if (e.rows != rows || e.cols != cols) {
      throw FormatError(fmt::format("tensor '{}' is {}x{}, expected {}x{}", name, e.rows,
                                    e.cols, rows, cols));
    }
    std::vector<float> data(rows * cols);
    const std::uint8_t* p = payload.data() + e.offset;
    for (std::size_t i = 0; i < data.size(); ++i) {
      data[i] = read_f32(p + 4 * i);
      if (!std::isfinite(data[i])) {
        throw FormatError(fmt::format("tensor '{}' has a non-finite value at offset {}", name,
                                      payload_offset + e.offset + 4 * i));
      }
    }
    return Matrix(rows, cols, std::move(data));
  }

  Vector vector(const std::string& name, std::size_t n) const {
    Matrix m = matrix(name, 1, n);
    return {m.data().begin(), m.data().end()};
  }

  LayerWeights layer(const std::string& prefix) const {
    const std::size_t d = config.d_model;
    const std::size_t f = config.d_ffn;
    LayerWeights w;
    w.wq = matrix(prefix + "wq", d, d);
    w.wk = matrix(prefix + "wk", d, d);
    w.wv = matrix(prefix + "wv", d, d);
    w.wo = matrix(prefix + "wo", d, d);
    w.gamma1 = vector(prefix + "gamma1", d);
    w.beta1 = vector(prefix + "beta1", d);
    w.wm = matrix(prefix + "wm", d, f);
    w.bm = vector(prefix + "bm", f);
    w.wn = matrix(prefix + "wn", f, d);
    w.bn = vector(prefix + "bn", d);
    w.gamma2 = vector(prefix + "gamma2", d);
    w.beta2 = vector(prefix + "beta2", d);
    return w;
  }
};

Directory read_directory(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kCheckpointMagic, "checkpoint");
  r.expect_version(kCheckpointVersion, "checkpoint");
  Directory dir;
  dir.kind = r.u16("kind");
  if (dir.kind != kKindModel && dir.kind != kKindLocked) {
    throw FormatError(fmt::format("unknown checkpoint kind {} at offset 6", dir.kind));
  }
  ModelConfig& c = dir.config;
  c.num_layers = r.u32("num_layers");
  c.d_model = r.u32("d_model");
  c.num_heads = r.u32("num_heads");
  c.d_ffn = r.u32("d_ffn");
  c.seq_len = r.u32("seq_len");
  c.vocab_size = r.u32("vocab_size");
  const std::uint32_t causal = r.u32("causal");
  if (causal > 1) throw FormatError(fmt::format("bad causal flag {} at offset 32", causal));
  c.causal = causal == 1;
  c.auth_position = r.u32("auth_position");
  try {
    c.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint config block: ") + e.what());
  }

  const std::uint32_t count = r.u32("tensor count");
  if (count == 0) throw FormatError("checkpoint has an empty tensor directory");
  struct Span {
    std::uint64_t begin, end;
    std::string name;
  };
  std::vector<Span> spans;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    std::string name = r.str16("tensor name");
    const std::size_t rows = r.u32("tensor rows");
    const std::size_t cols = r.u32("tensor cols");
    const std::uint64_t offset = r.u64("tensor offset");
    if (dir.entries.count(name) != 0) {
      throw FormatError(fmt::format("duplicate tensor '{}' at offset {}", name, at));
    }
    spans.push_back({offset, offset + static_cast<std::uint64_t>(rows) * cols * 4, name});
    dir.entries.emplace(std::move(name), Directory::Entry{rows, cols, offset});
  }
  const std::size_t size_at = r.offset();
  const std::uint64_t payload_size = r.u64("payload size");
  dir.payload_offset = r.offset();
  if (payload_size != r.remaining()) {
    throw FormatError(fmt::format("payload size {} at offset {} does not match the {} bytes "
                                  "that follow (truncated or padded file)",
                                  payload_size, size_at, r.remaining()));
  }
  dir.payload = r.bytes(payload_size, "payload");
  std::sort(spans.begin(), spans.end(),
            [](const Span& a, const Span& b) { return a.begin < b.begin; });
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].end > payload_size || spans[i].end < spans[i].begin) {
      throw FormatError("tensor '" + spans[i].name + "' extends past the payload");
    }
    if (i > 0 && spans[i].begin < spans[i - 1].end) {
      throw FormatError("tensors '" + spans[i - 1].name + "' and '" + spans[i].name +
                        "' overlap");
    }
  }
  return dir;
}

}  // namespace

Bytes encode_checkpoint(const Model& m) {
  std::vector<TensorRef> t;
  const ModelConfig& c = m.config();
  t.push_back({"embedding", m.embedding().rows(), m.embedding().cols(), m.embedding().data()});
  for (std::size_t i = 0; i < m.layers().size(); ++i) {
    add_layer(t, "layers." + std::to_string(i) + ".", m.layers()[i]);
  }
  t.push_back({"head", m.output_head().rows(), m.output_head().cols(), m.output_head().data()});
  return encode(kKindModel, c, t);
}

Bytes encode_checkpoint(const LockedModel& m) {
  std::vector<TensorRef> t;
  t.push_back({"embedding", m.embedding().rows(), m.embedding().cols(), m.embedding().data()});
  for (std::size_t i = 0; i < m.front_layers().size(); ++i) {
    add_layer(t, "front." + std::to_string(i) + ".", m.front_layers()[i]);
  }
  add_layer(t, "auth.", m.auth_layer());
  for (std::size_t i = 0; i < m.rear_layers().size(); ++i) {
    add_layer(t, "rear." + std::to_string(i) + ".", m.rear_layers()[i]);
  }
  t.push_back({"head", m.output_head().rows(), m.output_head().cols(), m.output_head().data()});
  return encode(kKindLocked, m.config(), t);
}

std::variant<Model, LockedModel> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  const Directory dir = read_directory(bytes);
  const ModelConfig& c = dir.config;
  Matrix embedding = dir.matrix("embedding", c.vocab_size, c.d_model);
  Matrix head = dir.matrix("head", c.d_model, c.vocab_size);
  try {
    if (dir.kind == kKindModel) {
      std::vector<LayerWeights> layers;
      for (std::size_t i = 0; i < c.num_layers; ++i) {
        layers.push_back(dir.layer("layers." + std::to_string(i) + "."));
      }
      if (dir.entries.size() != 2 + 12 * c.num_layers) {
        throw FormatError("checkpoint directory has unexpected tensors");
      }
      return Model(c, std::move(embedding), std::move(layers), std::move(head));
    }
    c.validate_lockable();
    if (c.auth_position == 0) throw FormatError("locked checkpoint without auth_position");
    std::vector<LayerWeights> front;
    for (std::size_t i = 0; i + 1 < c.auth_position; ++i) {
      front.push_back(dir.layer("front." + std::to_string(i) + "."));
    }
    LayerWeights auth = dir.layer("auth.");
    std::vector<LayerWeights> rear;
    for (std::size_t i = c.auth_position; i < c.num_layers; ++i) {
      rear.push_back(dir.layer("rear." + std::to_string(i - c.auth_position) + "."));
    }
    if (dir.entries.size() != 2 + 12 * c.num_layers) {
      throw FormatError("checkpoint directory has unexpected tensors");
    }
    return LockedModel(c, std::move(embedding), std::move(front), std::move(auth),
                       std::move(rear), std::move(head));
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(m));
}

void save_checkpoint(const LockedModel& m, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(m));
}

std::variant<Model, LockedModel> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

Model load_model(const std::filesystem::path& path) {
  auto v = load_checkpoint(path);
  if (auto* m = std::get_if<Model>(&v)) return std::move(*m);
  throw InputError(path.string() + " holds a locked model, expected a plain one");
}

LockedModel load_locked_model(const std::filesystem::path& path) {
  auto v = load_checkpoint(path);
  if (auto* m = std::get_if<LockedModel>(&v)) return std::move(*m);
  throw InputError(path.string() + " holds a plain model, expected a locked one");
}

// --- keys -----------------------------------------------------------------------

Bytes encode_key(const SealedKey& key) {
  Writer w;
  w.raw(kKeyMagic, 4);
  w.u16(kKeyVersion);
  w.u32(static_cast<std::uint32_t>(key.keys.pi.size()));
  w.u32(static_cast<std::uint32_t>(key.keys.pi_enc.size()));
  for (std::uint32_t v : key.keys.pi.forward()) w.u32(v);
  for (std::uint32_t v : key.keys.pi_enc.forward()) w.u32(v);
  w.u64(key.pad_seed);
  return w.take();
}

SealedKey decode_key(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kKeyMagic, "sealed key");
  r.expect_version(kKeyVersion, "sealed key");
  const std::size_t d = r.u32("d");
  const std::size_t f = r.u32("d_ffn");
  if (d == 0 || f == 0) throw FormatError("sealed key: zero-sized permutation");
  if (r.remaining() != 4 * (d + f) + 8) {
    throw FormatError(fmt::format("sealed key: {} bytes after header, expected {}",
                                  r.remaining(), 4 * (d + f) + 8));
  }
  auto read_perm = [&](std::size_t n, const char* what) {
    std::vector<std::uint32_t> fwd(n);
    for (auto& v : fwd) v = r.u32(what);
    if (!is_bijection(fwd)) {
      throw FormatError(std::string("sealed key: ") + what + " is not a bijection");
    }
    return PermutationKey::from_forward(std::move(fwd));
  };
  SealedKey key;
  key.keys.pi = read_perm(d, "pi");
  key.keys.pi_enc = read_perm(f, "pi_enc");
  key.pad_seed = r.u64("pad seed");
  r.expect_end("sealed key");
  return key;
}

void save_key(const SealedKey& key, const std::filesystem::path& path) {
  write_file(path, encode_key(key));
}

SealedKey load_key(const std::filesystem::path& path) { return decode_key(read_file(path)); }

void check_key_matches(const SealedKey& key, const ModelConfig& cfg) {
  if (key.keys.pi.size() != cfg.d_model || key.keys.pi_enc.size() != cfg.d_ffn) {
    throw InputError(fmt::format("key is for d={}, d_ffn={} but the model has d={}, d_ffn={}",
                                 key.keys.pi.size(), key.keys.pi_enc.size(), cfg.d_model,
                                 cfg.d_ffn));
  }
}

SealedKey load_key_for(const std::filesystem::path& path, const ModelConfig& cfg) {
  SealedKey key = load_key(path);
  check_key_matches(key, cfg);
  return key;
}

// --- traces -----------------------------------------------------------------------

Bytes encode_traces(const TraceSet& traces) {
  traces.check_consistent();
  Writer w;
  w.raw(kTraceMagic, 4);
  w.u16(kTraceVersion);
  w.str16(traces.cut);
  w.u32(static_cast<std::uint32_t>(traces.size()));
  std::size_t dims[4] = {};
  if (!traces.pairs.empty()) {
    const auto& [a, b] = traces.pairs.front();
    dims[0] = a.rows();
    dims[1] = a.cols();
    dims[2] = b.rows();
    dims[3] = b.cols();
  }
  for (std::size_t v : dims) w.u32(static_cast<std::uint32_t>(v));
  for (const auto& [a, b] : traces.pairs) {
    for (float v : a.data()) w.f32(v);
    for (float v : b.data()) w.f32(v);
  }
  return w.take();
}

TraceSet decode_traces(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kTraceMagic, "trace");
  r.expect_version(kTraceVersion, "trace");
  TraceSet t;
  t.cut = r.str16("cut");
  const std::size_t count = r.u32("count");
  const std::size_t ir = r.u32("input rows");
  const std::size_t ic = r.u32("input cols");
  const std::size_t orows = r.u32("output rows");
  const std::size_t oc = r.u32("output cols");
  const std::size_t per = 4 * (ir * ic + orows * oc);
  if (r.remaining() != per * count) {
    throw FormatError(fmt::format("trace file: {} payload bytes at offset {}, expected {}",
                                  r.remaining(), r.offset(), per * count));
  }
  auto read_matrix = [&](std::size_t rows, std::size_t cols) {
    const auto b = r.bytes(rows * cols * 4, "trace tensor");
    std::vector<float> data(rows * cols);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = read_f32(b.data() + 4 * i);
    return Matrix(rows, cols, std::move(data));
  };
  for (std::size_t i = 0; i < count; ++i) {
    Matrix a = read_matrix(ir, ic);
    Matrix b = read_matrix(orows, oc);
    t.pairs.emplace_back(std::move(a), std::move(b));
  }
  return t;
}

void save_traces(const TraceSet& traces, const std::filesystem::path& path) {
  write_file(path, encode_traces(traces));
}

TraceSet load_traces(const std::filesystem::path& path) { return decode_traces(read_file(path)); }

// --- reports ----------------------------------------------------------------------

std::string bench_csv(const BenchReport& report) {
  std::string out = fmt::format("# seed={}\nmodel,scheme,tee_flops,fraction,bytes,rounds\n",
                                report.seed);
  for (const auto& row : report.rows) {
    out += fmt::format("{},{},{},{:.6e},{},{}\n", row.model, row.scheme, row.estimate.tee_flops,
                       row.estimate.tee_flops_fraction, row.estimate.transfer_bytes,
                       row.estimate.transfer_rounds);
  }
  return out;
}

nlohmann::json bench_json(const BenchReport& report, std::span<const NamedConfig> configs) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& nc : configs) {
    nlohmann::json schemes = nlohmann::json::object();
    for (const auto& row : report.rows) {
      if (row.model != nc.name) continue;
      nlohmann::json cell = {
          {"tee_flops", row.estimate.tee_flops},
          {"tee_flops_percent", row.estimate.tee_flops_fraction * 100.0},
          {"transfer_kib", static_cast<double>(row.estimate.transfer_bytes) / 1024.0},
          {"transfer_bytes", row.estimate.transfer_bytes},
          {"transfer_rounds", row.estimate.transfer_rounds},
      };
      if (row.measured) {
        cell["measured"] = {{"bytes", row.measured->bytes}, {"rounds", row.measured->rounds}};
      }
      if (row.soter_rounds) {
        cell["rounds_over_seeds"] = {{"mean", row.soter_rounds->mean},
                                     {"stddev", row.soter_rounds->stddev}};
      }
      schemes[row.scheme] = std::move(cell);
    }
    models.push_back({{"model", nc.name},
                      {"config", config_to_json(nc.config)},
                      {"original_flops", count_flops(nc.config).total},
                      {"schemes", std::move(schemes)}});
  }
  return {{"seed", report.seed}, {"models", std::move(models)}};
}

nlohmann::json attack_json(const AttackReport& report) {
  nlohmann::json j = {
      {"key_accuracy", report.key_accuracy},
      {"downstream_agreement", report.downstream_agreement},
      {"fit_residual", report.fit_residual},
      {"chance", report.chance},
      {"candidates_tried", report.candidates_tried},
      {"perfect_candidates", report.perfect_candidates},
  };
  if (report.recovered_key) {
    const auto f = report.recovered_key->forward();
    j["recovered_key"] = std::vector<std::uint32_t>(f.begin(), f.end());
  } else {
    j["recovered_key"] = nullptr;
  }
  return j;
}

nlohmann::json verification_json(const LockVerification& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"scope", c.scope},
                      {"line", c.line},
                      {"max_relative_error", std::isfinite(c.max_relative_error)
                                                 ? nlohmann::json(c.max_relative_error)
                                                 : nlohmann::json("inf")},
                      {"passed", c.passed}});
  }
  return {{"passed", report.passed()}, {"tolerance", kLockTolerance}, {"checks", checks}};
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out =
      "auth_position,locked_fraction,simulation_agreement,simulation_residual,"
      "unauthorized_agreement\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.auth_position, r.locked_fraction,
                       r.simulation_agreement, r.simulation_residual, r.unauthorized_agreement);
  }
  return out;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  static const char* kKnown[] = {"num_layers", "d_model",       "num_heads", "d_ffn",
                                 "seq_len",    "vocab_size",    "causal",    "auth_position",
                                 "gated_ffn",  "kv_dim",        "name"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw InputError("unknown config field '" + key + "'");
    }
  }
  ModelConfig c;
  auto count = [&](const char* key, std::size_t& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned()) {
      throw InputError(std::string("config field '") + key + "' must be a non-negative integer");
    }
    dst = j[key].get<std::size_t>();
  };
  auto flag = [&](const char* key, bool& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_boolean()) throw InputError(std::string("config field '") + key + "' must be a boolean");
    dst = j[key].get<bool>();
  };
  count("num_layers", c.num_layers);
  count("d_model", c.d_model);
  count("num_heads", c.num_heads);
  count("d_ffn", c.d_ffn);
  count("seq_len", c.seq_len);
  count("vocab_size", c.vocab_size);
  flag("causal", c.causal);
  count("auth_position", c.auth_position);
  flag("gated_ffn", c.gated_ffn);
  count("kv_dim", c.kv_dim);
  c.validate();
  return c;
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
  nlohmann::json j = {{"num_layers", cfg.num_layers}, {"d_model", cfg.d_model},
                      {"num_heads", cfg.num_heads},   {"d_ffn", cfg.d_ffn},
                      {"seq_len", cfg.seq_len},       {"vocab_size", cfg.vocab_size},
                      {"causal", cfg.causal},         {"auth_position", cfg.auth_position}};
  if (cfg.gated_ffn) j["gated_ffn"] = true;
  if (cfg.kv_dim != 0) j["kv_dim"] = cfg.kv_dim;
  return j;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("short write to " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace coreguard::io
