// Copyright 2026 The neglm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "neglm/cli/model_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

namespace neglm::cli {
namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(const char* data, std::size_t n) { out_.append(data, n); }
  const std::string& bytes() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    return std::string(take(n));
  }
  std::string_view take(std::size_t n) {
    if (in_.size() - pos_ < n) throw ModelFormatError("model file is truncated");
    std::string_view s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::uint64_t get(int n) {
    const std::string_view s = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[static_cast<std::size_t>(i)]))
           << (8 * i);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::string_view bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  c = crc32(c, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(c);
}

// Everything a model or joint embedding shares on disk.
struct Envelope {
  std::uint32_t mode_tag = 0;
  std::uint64_t vocab_size = 0;
  std::uint64_t d = 0;
  encoder::EncoderSpec spec;
  double alpha = 0.0;
  std::uint64_t k = 1;
  std::uint64_t seed = 0;
  double log_z = 0.0;
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> metadata;
  struct Section {
    std::string name;
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> counts;
  };
  std::vector<Section> sections;
  std::vector<std::pair<std::string, const ParamSet*>> param_sets;  // writing
  std::vector<std::pair<std::string, ParamSet>> loaded_sets;        // reading
};

void write_params(Writer& w, const ParamSet& params) {
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t b = 0; b < params.size(); ++b) {
    const Eigen::MatrixXd& m = params[b];
    w.str(params.name(b));
    w.u64(static_cast<std::uint64_t>(m.rows()));
    w.u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
  }
}

ParamSet read_params(Reader& r) {
  ParamSet params;
  const std::uint32_t blocks = r.u32();
  for (std::uint32_t b = 0; b < blocks; ++b) {
    std::string name = r.str();
    const std::uint64_t rows = r.u64(), cols = r.u64();
    if (cols != 0 && rows > r.remaining() / 8 / cols)
      throw ModelFormatError("parameter block " + name + " exceeds the file size");
    Eigen::MatrixXd& m = params[params.add(std::move(name), static_cast<Eigen::Index>(rows),
                                           static_cast<Eigen::Index>(cols))];
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  }
  return params;
}

std::string write_envelope(const Envelope& e) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kFormatVersion);
  w.u32(e.mode_tag);
  w.u64(e.vocab_size);
  w.u64(e.d);
  w.u32(e.spec.kind == encoder::EncoderKind::kWindow ? 0u : 1u);
  w.u64(static_cast<std::uint64_t>(e.spec.input_dim));
  w.u64(static_cast<std::uint64_t>(e.spec.hidden_dim));
  w.u32(static_cast<std::uint32_t>(e.spec.layers));
  w.u32(static_cast<std::uint32_t>(e.spec.window_size));
  w.f64(e.spec.dropout);
  w.u8(e.spec.linear_window ? 1 : 0);
  w.f64(e.alpha);
  w.u64(e.k);
  w.u64(e.seed);
  w.f64(e.log_z);
  w.u64(e.config_hash);
  w.u32(static_cast<std::uint32_t>(e.metadata.size()));
  for (const auto& [key, value] : e.metadata) {
    w.str(key);
    w.str(value);
  }
  w.u32(static_cast<std::uint32_t>(e.sections.size()));
  for (const auto& s : e.sections) {
    w.str(s.name);
    w.u64(s.tokens.size());
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      w.str(s.tokens[i]);
      w.u64(s.counts[i]);
    }
  }
  w.u32(static_cast<std::uint32_t>(e.param_sets.size()));
  for (const auto& [name, params] : e.param_sets) {
    w.str(name);
    write_params(w, *params);
  }
  const std::uint32_t checksum = crc(w.bytes());
  w.u32(checksum);
  return w.take();
}

Envelope read_envelope(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw ModelFormatError("not a model file (bad magic)");
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  if (tail.u32() != crc(body)) throw ModelFormatError("model file checksum mismatch");

  Reader r(body);
  r.take(sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw ModelFormatError("unsupported model format version " + std::to_string(version));
  Envelope e;
  e.mode_tag = r.u32();
  e.vocab_size = r.u64();
  e.d = r.u64();
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw ModelFormatError("unknown encoder kind");
  e.spec.kind = kind == 0 ? encoder::EncoderKind::kWindow : encoder::EncoderKind::kLstm;
  e.spec.input_dim = static_cast<Eigen::Index>(r.u64());
  e.spec.hidden_dim = static_cast<Eigen::Index>(r.u64());
  e.spec.layers = static_cast<int>(r.u32());
  e.spec.window_size = static_cast<int>(r.u32());
  e.spec.dropout = r.f64();
  e.spec.linear_window = r.u8() != 0;
  e.alpha = r.f64();
  e.k = r.u64();
  e.seed = r.u64();
  e.log_z = r.f64();
  e.config_hash = r.u64();
  const std::uint32_t meta = r.u32();
  for (std::uint32_t i = 0; i < meta; ++i) {
    std::string key = r.str();
    e.metadata[key] = r.str();
  }
  const std::uint32_t sections = r.u32();
  for (std::uint32_t s = 0; s < sections; ++s) {
    Envelope::Section sec;
    sec.name = r.str();
    const std::uint64_t n = r.u64();
    if (n > r.remaining() / 12) throw ModelFormatError("vocabulary block exceeds the file size");
    for (std::uint64_t i = 0; i < n; ++i) {
      sec.tokens.push_back(r.str());
      sec.counts.push_back(r.u64());
    }
    e.sections.push_back(std::move(sec));
  }
  const std::uint32_t sets = r.u32();
  for (std::uint32_t s = 0; s < sets; ++s) {
    std::string name = r.str();
    e.loaded_sets.emplace_back(std::move(name), read_params(r));
  }
  if (r.remaining() != 0) throw ModelFormatError("trailing bytes before the checksum");
  return e;
}

const ParamSet& find_set(const Envelope& e, std::string_view name) {
  for (const auto& [n, p] : e.loaded_sets)
    if (n == name) return p;
  throw ModelFormatError("missing parameter set " + std::string(name));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::uint32_t mode_tag(lm::Mode mode) {
  switch (mode) {
    case lm::Mode::kNce:
      return 0;
    case lm::Mode::kNeg:
      return 1;
    case lm::Mode::kNeglm:
      return 2;
    case lm::Mode::kNeglmB:
      return 3;
  }
  return 255;
}

}  // namespace

std::string serialize_model(const lm::LanguageModel& model) {
  Envelope e;
  e.mode_tag = mode_tag(model.mode);
  e.vocab_size = model.vocab_size();
  e.d = static_cast<std::uint64_t>(model.encoder_spec.hidden_dim);
  e.spec = model.encoder_spec;
  e.alpha = model.alpha;
  e.k = static_cast<std::uint64_t>(model.k);
  e.seed = model.seed;
  e.log_z = model.log_z;
  e.config_hash = model.config_hash;
  e.metadata = model.metadata;
  Envelope::Section vocab{"vocab", {}, {}};
  vocab.tokens.assign(model.vocab.tokens().begin(), model.vocab.tokens().end());
  vocab.counts.assign(model.vocab.counts().begin(), model.vocab.counts().end());
  e.sections.push_back(std::move(vocab));
  e.param_sets = {{"embeddings", &model.embeddings}, {"encoder", &model.encoder}};
  return write_envelope(e);
}

lm::LanguageModel deserialize_model(std::string_view bytes) {
  Envelope e = read_envelope(bytes);
  if (e.mode_tag > 3)
    throw ModelFormatError("file does not hold a language model (tag " +
                           std::to_string(e.mode_tag) + ")");
  if (e.sections.size() != 1) throw ModelFormatError("expected one vocabulary section");
  lm::LanguageModel model;
  static constexpr lm::Mode kModes[] = {lm::Mode::kNce, lm::Mode::kNeg, lm::Mode::kNeglm,
                                        lm::Mode::kNeglmB};
  model.mode = kModes[e.mode_tag];
  try {
    model.vocab = corpus::Vocabulary(e.sections[0].tokens, e.sections[0].counts);
    model.encoder_spec = e.spec;
    model.encoder_spec.validate();
    model.noise = sampling::build_noise(model.vocab.counts(), e.alpha);
  } catch (const std::invalid_argument& err) {
    throw ModelFormatError(std::string("invalid model contents: ") + err.what());
  }
  model.alpha = e.alpha;
  model.k = static_cast<int>(e.k);
  model.seed = e.seed;
  model.log_z = e.log_z;
  model.config_hash = e.config_hash;
  model.metadata = std::move(e.metadata);
  model.embeddings = find_set(e, "embeddings");
  model.encoder = find_set(e, "encoder");
  const auto n = static_cast<Eigen::Index>(model.vocab.size());
  if (model.embeddings.size() != 3 || model.embeddings[0].rows() != n ||
      model.embeddings[1].rows() != n || model.embeddings[1].cols() != e.spec.hidden_dim ||
      model.embeddings[0].cols() != e.spec.input_dim || model.embeddings[2].rows() != n)
    throw ModelFormatError("embedding tables do not match the vocabulary and encoder");
  return model;
}

void save_model(const std::string& path, const lm::LanguageModel& model) {
  write_file(path, serialize_model(model));
}

lm::LanguageModel load_model(const std::string& path) {
  return deserialize_model(read_file(path));
}

std::string serialize_joint(const JointEmbedding& embedding) {
  Envelope e;
  e.mode_tag = kJointEmbeddingTag;
  e.vocab_size = embedding.x_labels.size();
  e.d = static_cast<std::uint64_t>(embedding.factors.d());
  e.spec.input_dim = embedding.factors.d();
  e.spec.hidden_dim = embedding.factors.d();
  e.alpha = 1.0;
  e.k = static_cast<std::uint64_t>(embedding.k);
  e.seed = embedding.seed;
  e.config_hash = embedding.config_hash;
  e.metadata = embedding.metadata;
  e.sections.push_back({"x", embedding.x_labels,
                        std::vector<std::uint64_t>(embedding.x_labels.size(), 0)});
  e.sections.push_back({"y", embedding.y_labels,
                        std::vector<std::uint64_t>(embedding.y_labels.size(), 0)});
  ParamSet tables;
  tables.add("x_table", embedding.factors.x_table.rows(), embedding.factors.d());
  tables.add("y_table", embedding.factors.y_table.rows(), embedding.factors.d());
  tables[0] = embedding.factors.x_table;
  tables[1] = embedding.factors.y_table;
  e.param_sets = {{"factors", &tables}};
  return write_envelope(e);
}

JointEmbedding deserialize_joint(std::string_view bytes) {
  Envelope e = read_envelope(bytes);
  if (e.mode_tag != kJointEmbeddingTag)
    throw ModelFormatError("file does not hold a joint embedding");
  if (e.sections.size() != 2) throw ModelFormatError("expected x and y label sections");
  const ParamSet& tables = find_set(e, "factors");
  if (tables.size() != 2) throw ModelFormatError("expected x_table and y_table");
  JointEmbedding out;
  out.factors = distlab::FactorPair(tables[0], tables[1]);
  out.x_labels = e.sections[0].tokens;
  out.y_labels = e.sections[1].tokens;
  out.k = static_cast<int>(e.k);
  out.seed = e.seed;
  out.config_hash = e.config_hash;
  out.metadata = std::move(e.metadata);
  return out;
}

void save_joint(const std::string& path, const JointEmbedding& embedding) {
  write_file(path, serialize_joint(embedding));
}

JointEmbedding load_joint(const std::string& path) {
  return deserialize_joint(read_file(path));
}

std::uint32_t peek_mode_tag(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw ModelFormatError("not a model file (bad magic)");
  Reader r(bytes.substr(8, 4));
  return r.u32();
}

}  // namespace neglm::cli
