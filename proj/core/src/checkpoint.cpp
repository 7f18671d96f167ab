// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include "graphroute/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "graphroute/digest.hpp"
#include "graphroute/error.hpp"
#include "json.hpp"

namespace graphroute {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', 'R', 'C', 'K', 'P', 'T', '\0', '\0'};

const char* backbone_name(Backbone b) { return b == Backbone::kHeterogeneous ? "heterogeneous" : "homogeneous-mean"; }
const char* head_kind_name(HeadKind k) { return k == HeadKind::kCrossAttention ? "cross-attention" : "dot-product"; }

json config_json(const ModelConfig& c) {
  return json{
      {"embedding_width", c.embedding_width},
      {"encoder", {{"kind", c.encoder_kind}, {"seed", c.encoder_seed}}},
      {"graph", {{"preference_width", c.graph.preference_width},
                 {"zero_preference_feature", c.graph.zero_preference_feature}}},
      {"hgt", {{"hidden", c.hgt.hidden},
               {"heads", c.hgt.heads},
               {"layers", c.hgt.layers},
               {"dropout", c.hgt.dropout},
               {"seed", c.hgt.seed},
               {"residual", c.hgt.residual},
               {"backbone", backbone_name(c.hgt.backbone)}}},
      {"head", {{"hidden", c.head.hidden},
                {"heads", c.head.heads},
                {"dropout", c.head.dropout},
                {"kind", head_kind_name(c.head.kind)},
                {"zero_user_state", c.head.zero_user_state},
                {"seed", c.head.seed}}},
      {"input_widths", c.schema.input_widths},
      {"temperature", c.temperature},
  };
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.embedding_width = j.at("embedding_width").get<int>();
  c.encoder_kind = j.at("encoder").at("kind").get<std::string>();
  c.encoder_seed = j.at("encoder").at("seed").get<std::uint64_t>();
  c.graph.preference_width = j.at("graph").at("preference_width").get<int>();
  c.graph.zero_preference_feature = j.at("graph").at("zero_preference_feature").get<bool>();
  const auto& h = j.at("hgt");
  c.hgt.hidden = h.at("hidden").get<int>();
  c.hgt.heads = h.at("heads").get<int>();
  c.hgt.layers = h.at("layers").get<int>();
  c.hgt.dropout = h.at("dropout").get<double>();
  c.hgt.seed = h.at("seed").get<std::uint64_t>();
  c.hgt.residual = h.at("residual").get<bool>();
  const auto backbone = h.at("backbone").get<std::string>();
  if (backbone == "heterogeneous") {
    c.hgt.backbone = Backbone::kHeterogeneous;
  } else if (backbone == "homogeneous-mean") {
    c.hgt.backbone = Backbone::kHomogeneousMean;
  } else {
    throw DataError("unknown backbone '" + backbone + "'");
  }
  const auto& hd = j.at("head");
  c.head.hidden = hd.at("hidden").get<int>();
  c.head.heads = hd.at("heads").get<int>();
  c.head.dropout = hd.at("dropout").get<double>();
  c.head.zero_user_state = hd.at("zero_user_state").get<bool>();
  c.head.seed = hd.at("seed").get<std::uint64_t>();
  const auto kind = hd.at("kind").get<std::string>();
  if (kind == "cross-attention") {
    c.head.kind = HeadKind::kCrossAttention;
  } else if (kind == "dot-product") {
    c.head.kind = HeadKind::kDotProduct;
  } else {
    throw DataError("unknown head kind '" + kind + "'");
  }
  c.schema.input_widths = j.at("input_widths").get<std::array<int, kNodeTypeCount>>();
  c.temperature = j.at("temperature").get<double>();
  return c;
}

json optional_number(const std::optional<double>& v) { return v && std::isfinite(*v) ? json(*v) : json(); }

std::optional<double> number_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t begin, std::size_t end, std::string source)
      : bytes_(bytes), pos_(begin), end_(end), source_(std::move(source)) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void read_doubles(double* out, std::size_t n, const char* what) {
    if (n > (end_ - pos_) / sizeof(double)) throw DataError(source_ + ": truncated checkpoint while reading " + what);
    std::memcpy(out, bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (end_ - pos_ < n) throw DataError(source_ + ": truncated checkpoint while reading " + what);
  }
  const std::string& bytes_;
  std::size_t pos_;
  std::size_t end_;
  std::string source_;
};

std::uint64_t schema_digest_of(const Model& m) {
  Digest d;
  d.update(m.config.schema.digest());
  d.update(m.hgt.tensors.schema_digest());
  d.update(m.head.tensors.schema_digest());
  return d.value();
}

constexpr std::size_t kHeaderSize = sizeof(kMagic) + 4 + 8 * 4;

}  // namespace

std::string ModelConfig::to_json() const { return config_json(*this).dump(); }

ModelConfig ModelConfig::from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
}

std::uint64_t ModelConfig::digest() const { return digest_of(to_json()); }

std::string ModelConfig::variant_name() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(graph.zero_preference_feature, "no_preference_feature");
  add(head.kind == HeadKind::kDotProduct, "dot_product_head");
  add(hgt.backbone == Backbone::kHomogeneousMean, "homogeneous_backbone");
  add(head.zero_user_state, "no_user_embedding");
  return out.empty() ? "full" : out;
}

std::uint64_t Model::parameter_digest() const {
  Digest d;
  d.update(hgt.tensors.digest());
  d.update(head.tensors.digest());
  return d.value();
}

Model init_model(const ModelConfig& config) {
  Model m;
  m.config = config;
  m.hgt = init_hgt_params(config.hgt, config.schema);
  m.head = init_head_params(config.head, config.hgt.hidden, config.embedding_width);
  return m;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  const auto& m = ck.model;
  const json meta{
      {"config", config_json(m.config)},
      {"training",
       {{"epoch", ck.training.epoch},
        {"best_epoch", ck.training.best_epoch},
        {"valid_accuracy", optional_number(ck.training.valid_accuracy)},
        {"valid_auc", optional_number(ck.training.valid_auc)},
        {"train_loss", optional_number(ck.training.train_loss)},
        {"optimizer_steps", ck.training.optimizer_steps},
        {"variant", m.config.variant_name()}}},
  };
  const auto meta_text = meta.dump();

  std::string payload;
  put<std::uint64_t>(payload, meta_text.size());
  payload += meta_text;
  const auto count = m.hgt.tensors.tensor_count() + m.head.tensors.tensor_count();
  put<std::uint32_t>(payload, static_cast<std::uint32_t>(count));
  for (const auto* set : {&m.hgt.tensors, &m.head.tensors}) {
    for (const auto& e : set->entries()) {
      put<std::uint32_t>(payload, static_cast<std::uint32_t>(e.name.size()));
      payload += e.name;
      put<std::uint64_t>(payload, static_cast<std::uint64_t>(e.value.rows()));
      put<std::uint64_t>(payload, static_cast<std::uint64_t>(e.value.cols()));
      payload.append(reinterpret_cast<const char*>(e.value.data()),
                     static_cast<std::size_t>(e.value.size()) * sizeof(double));
    }
  }

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, m.config.digest());
  put<std::uint64_t>(out, schema_digest_of(m));
  put<std::uint64_t>(out, digest_of(payload));
  put<std::uint64_t>(out, payload.size());
  out += payload;
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source) {
  if (bytes.size() < kHeaderSize) throw DataError(source + ": truncated checkpoint header");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw DataError(source + ": not a graphroute checkpoint");
  Reader header(bytes, sizeof(kMagic), kHeaderSize, source);
  const auto version = header.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw DataError(source + ": checkpoint format version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  const auto config_digest = header.get<std::uint64_t>("config digest");
  const auto schema_digest = header.get<std::uint64_t>("schema digest");
  const auto payload_digest = header.get<std::uint64_t>("payload digest");
  const auto payload_size = header.get<std::uint64_t>("payload size");
  if (bytes.size() - kHeaderSize < payload_size) throw DataError(source + ": truncated checkpoint payload");
  if (bytes.size() - kHeaderSize > payload_size) throw DataError(source + ": trailing bytes after checkpoint payload");
  if (digest_of(std::string_view(bytes).substr(kHeaderSize)) != payload_digest) {
    throw DataError(source + ": checkpoint payload digest mismatch (corrupted file)");
  }

  Reader r(bytes, kHeaderSize, bytes.size(), source);
  const auto meta_len = r.get<std::uint64_t>("metadata length");
  json meta;
  try {
    meta = json::parse(r.take(meta_len, "metadata"));
  } catch (const json::parse_error& e) {
    throw DataError(source + ": bad checkpoint metadata: " + e.what());
  }

  Checkpoint ck;
  try {
    ck.model.config = config_from(meta.at("config"));
    const auto& t = meta.at("training");
    ck.training.epoch = t.at("epoch").get<int>();
    ck.training.best_epoch = t.at("best_epoch").get<int>();
    ck.training.valid_accuracy = number_from(t.at("valid_accuracy"));
    ck.training.valid_auc = number_from(t.at("valid_auc"));
    ck.training.train_loss = number_from(t.at("train_loss"));
    ck.training.optimizer_steps = t.at("optimizer_steps").get<long>();
  } catch (const json::exception& e) {
    throw DataError(source + ": bad checkpoint metadata: " + e.what());
  }
  if (ck.model.config.digest() != config_digest) throw DataError(source + ": config digest mismatch");

  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>("tensor name length");
    auto name = r.take(name_len, "tensor name");
    const auto rows = r.get<std::uint64_t>("tensor rows");
    const auto cols = r.get<std::uint64_t>("tensor cols");
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw DataError(source + ": implausible shape for " + name);
    Matrix value(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    r.read_doubles(value.data(), static_cast<std::size_t>(rows * cols), "tensor values");
    if (name.starts_with("hgt.")) {
      ck.model.hgt.tensors.add(std::move(name), std::move(value));
    } else if (name.starts_with("head.")) {
      ck.model.head.tensors.add(std::move(name), std::move(value));
    } else {
      throw DataError(source + ": unexpected tensor '" + name + "'");
    }
  }
  if (!r.done()) throw DataError(source + ": trailing bytes in checkpoint payload");
  if (schema_digest_of(ck.model) != schema_digest) throw DataError(source + ": schema digest mismatch");

  // The stored roster must be exactly what the config implies.
  const auto expected = init_model(ck.model.config);
  if (expected.hgt.tensors.schema_digest() != ck.model.hgt.tensors.schema_digest() ||
      expected.head.tensors.schema_digest() != ck.model.head.tensors.schema_digest()) {
    throw DataError(source + ": tensor roster does not match the stored model config");
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_text_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_text_file(path), path.string());
}

std::vector<TensorInfo> tensor_roster(const Checkpoint& ck) {
  std::vector<TensorInfo> out;
  for (const auto* set : {&ck.model.hgt.tensors, &ck.model.head.tensors}) {
    for (const auto& e : set->entries()) out.push_back({e.name, e.value.rows(), e.value.cols()});
  }
  return out;
}

}  // namespace graphroute
