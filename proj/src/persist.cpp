#include "csem/persist.hpp"

#include <unistd.h>

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "csem/errors.hpp"

namespace csem::persist {
namespace {

constexpr char kMagic[4] = {'C', 'S', 'E', 'M'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t i = 0; i < t.rank(); ++i) {
      u32(static_cast<std::uint32_t>(t.dim(i)));
    }
    for (std::size_t i = 0; i < t.size(); ++i) f32(t[i]);
  }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::size_t end) : buf_(buf), end_(end) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(buf_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Tensor tensor() {
    std::uint32_t rank = u32();
    if (rank == 0 || rank > 4) {
      throw CorruptError("model file: implausible tensor rank " +
                         std::to_string(rank));
    }
    std::vector<std::size_t> shape;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint32_t d = u32();
      if (d == 0) throw CorruptError("model file: zero tensor dimension");
      shape.push_back(d);
      count *= d;
    }
    need(count * 4);
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = f32();
    return Tensor::from(std::move(shape), std::move(data));
  }

  void finish() const {
    if (pos_ != end_) {
      throw CorruptError("model file: " + std::to_string(end_ - pos_) +
                         " unread payload bytes");
    }
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw CorruptError("model file: truncated payload");
  }

  const std::string& buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

void write_file(const std::string& path, const std::string& bytes) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open " + path + " for writing");
  bool ok = bytes.empty() ||
            std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
  ok = ok && std::fflush(f) == 0;
  ok = ok && fsync(fileno(f)) == 0;
  if (std::fclose(f) != 0) ok = false;
  if (!ok) throw IoError("failed writing " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::string seal(Kind kind, const Writer& payload) {
  Writer out;
  out.u8(kMagic[0]);
  out.u8(kMagic[1]);
  out.u8(kMagic[2]);
  out.u8(kMagic[3]);
  out.u32(kVersion);
  out.u8(static_cast<std::uint8_t>(kind));
  std::string bytes = out.bytes() + payload.bytes();
  std::uint32_t crc = crc32(bytes.data(), bytes.size());
  for (int i = 0; i < 4; ++i) {
    bytes.push_back(static_cast<char>(crc >> (8 * i)));
  }
  return bytes;
}

// Verifies envelope + CRC and positions a reader at the payload.
Reader open(const std::string& buf, Kind expected, const std::string& path) {
  if (buf.size() < 13) {
    throw CorruptError(path + ": truncated model file");
  }
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= static_cast<std::uint32_t>(
                  static_cast<unsigned char>(buf[buf.size() - 4 +
                                                 static_cast<std::size_t>(i)]))
              << (8 * i);
  }
  if (crc32(buf.data(), buf.size() - 4) != stored) {
    throw CorruptError(path + ": CRC mismatch, file is corrupted");
  }
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw FormatError(path + ": not a model file (bad magic)");
  }
  Reader r(buf, buf.size() - 4);
  r.u8();
  r.u8();
  r.u8();
  r.u8();
  std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError(path + ": unsupported format version " +
                      std::to_string(version));
  }
  auto kind = static_cast<Kind>(r.u8());
  if (kind != expected) {
    throw FormatError(path + ": expected model kind " +
                      std::to_string(static_cast<int>(expected)) +
                      ", file holds kind " +
                      std::to_string(static_cast<int>(kind)));
  }
  return r;
}

void put_dict(Writer& w, const CharDictionary& dict) {
  const auto& chars = dict.chars();
  w.u32(static_cast<std::uint32_t>(chars.size()));
  for (char32_t c : chars) w.u32(static_cast<std::uint32_t>(c));
}

CharDictionary get_dict(Reader& r) {
  std::uint32_t n = r.u32();
  std::vector<char32_t> chars;
  chars.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    chars.push_back(static_cast<char32_t>(r.u32()));
  }
  return CharDictionary(std::move(chars));
}

void put_lstm(Writer& w, const LstmParams& p) {
  w.tensor(p.w_ih);
  w.tensor(p.w_hh);
  w.tensor(p.b);
}

LstmParams get_lstm(Reader& r) {
  LstmParams p;
  p.w_ih = r.tensor();
  p.w_hh = r.tensor();
  p.b = r.tensor();
  if (p.w_ih.rank() != 2 || p.w_hh.rank() != 2 || p.b.rank() != 1 ||
      p.w_ih.dim(0) % 4 != 0 || p.w_hh.dim(0) != p.w_ih.dim(0) ||
      p.w_hh.dim(1) * 4 != p.w_hh.dim(0) || p.b.dim(0) != p.w_ih.dim(0)) {
    throw CorruptError("model file: inconsistent LSTM parameter shapes");
  }
  p.hidden = p.w_ih.dim(0) / 4;
  p.input = p.w_ih.dim(1);
  return p;
}

void put_linear(Writer& w, const LinearParams& p) {
  w.tensor(p.w);
  w.tensor(p.b);
}

LinearParams get_linear(Reader& r) {
  LinearParams p;
  p.w = r.tensor();
  p.b = r.tensor();
  if (p.w.rank() != 2 || p.b.rank() != 1 || p.b.dim(0) != p.w.dim(0)) {
    throw CorruptError("model file: inconsistent linear parameter shapes");
  }
  p.out = p.w.dim(0);
  p.in = p.w.dim(1);
  return p;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t n) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
      }
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    crc = table[(crc ^ p[i]) & 0xFFu] ^ (crc >> 8);
  }
  return crc ^ 0xFFFFFFFFu;
}

void save(const CharDictionary& dict, const std::string& path) {
  Writer w;
  put_dict(w, dict);
  write_file(path, seal(Kind::dict, w));
}

CharDictionary load_dict(const std::string& path) {
  std::string buf = read_file(path);
  Reader r = open(buf, Kind::dict, path);
  CharDictionary d = get_dict(r);
  r.finish();
  return d;
}

void save(const CharLM& m, const std::string& path) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(m.config.embed_dim));
  w.u32(static_cast<std::uint32_t>(m.config.hidden));
  w.u32(static_cast<std::uint32_t>(m.config.layers));
  w.u32(static_cast<std::uint32_t>(m.config.seq_len));
  w.u32(static_cast<std::uint32_t>(m.config.batch));
  w.f64(m.config.lr0);
  w.f64(m.config.anneal_factor);
  w.u32(static_cast<std::uint32_t>(m.config.patience));
  w.u32(static_cast<std::uint32_t>(m.config.epochs));
  w.u32(static_cast<std::uint32_t>(m.config.shards));
  w.f64(m.config.clip);
  w.u64(m.config.max_chars);
  w.u8(m.config.backward ? 1 : 0);
  put_dict(w, m.dict);
  w.tensor(m.embedding);
  for (const auto& layer : m.layers) put_lstm(w, layer);
  put_linear(w, m.out);
  write_file(path, seal(Kind::charlm, w));
}

CharLM load_charlm(const std::string& path) {
  std::string buf = read_file(path);
  Reader r = open(buf, Kind::charlm, path);

  CharLM m;
  m.config.embed_dim = static_cast<int>(r.u32());
  m.config.hidden = static_cast<int>(r.u32());
  m.config.layers = static_cast<int>(r.u32());
  m.config.seq_len = static_cast<int>(r.u32());
  m.config.batch = static_cast<int>(r.u32());
  m.config.lr0 = r.f64();
  m.config.anneal_factor = r.f64();
  m.config.patience = static_cast<int>(r.u32());
  m.config.epochs = static_cast<int>(r.u32());
  m.config.shards = static_cast<int>(r.u32());
  m.config.clip = r.f64();
  m.config.max_chars = r.u64();
  m.config.backward = r.u8() != 0;
  m.dict = get_dict(r);
  m.embedding = r.tensor();
  for (int l = 0; l < m.config.layers; ++l) m.layers.push_back(get_lstm(r));
  m.out = get_linear(r);
  r.finish();

  if (m.embedding.rank() != 2 ||
      m.embedding.dim(0) != static_cast<std::size_t>(m.dict.size()) ||
      m.embedding.dim(1) != static_cast<std::size_t>(m.config.embed_dim) ||
      m.out.out != static_cast<std::size_t>(m.dict.size()) ||
      m.out.in != static_cast<std::size_t>(m.config.hidden)) {
    throw CorruptError(path + ": model shapes disagree with its config");
  }
  return m;
}

void save(const CrfTagger& t, const std::string& path) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(t.config.hidden));
  w.f64(t.config.lr0);
  w.u32(static_cast<std::uint32_t>(t.config.epochs));
  w.u32(static_cast<std::uint32_t>(t.config.batch));
  w.f64(t.config.anneal_factor);
  w.u32(static_cast<std::uint32_t>(t.config.patience));
  w.f64(t.config.dropout);
  w.f64(t.config.clip);
  w.u32(static_cast<std::uint32_t>(t.tagset.size()));
  for (const auto& tag : t.tagset.tags) w.str(tag);
  w.u64(t.embed_dim);
  put_lstm(w, t.fwd);
  put_lstm(w, t.bwd);
  put_linear(w, t.proj);
  w.tensor(t.transitions);
  write_file(path, seal(Kind::tagger, w));
}

CrfTagger load_tagger(const std::string& path,
                      std::shared_ptr<const Embedder> embedder) {
  std::string buf = read_file(path);
  Reader r = open(buf, Kind::tagger, path);

  CrfTagger t;
  t.config.hidden = static_cast<int>(r.u32());
  t.config.lr0 = r.f64();
  t.config.epochs = static_cast<int>(r.u32());
  t.config.batch = static_cast<int>(r.u32());
  t.config.anneal_factor = r.f64();
  t.config.patience = static_cast<int>(r.u32());
  t.config.dropout = r.f64();
  t.config.clip = r.f64();
  std::uint32_t k = r.u32();
  std::vector<std::string> tags;
  for (std::uint32_t i = 0; i < k; ++i) tags.push_back(r.str());
  t.tagset = TagSet::from_tags(std::move(tags));
  t.embed_dim = r.u64();
  t.fwd = get_lstm(r);
  t.bwd = get_lstm(r);
  t.proj = get_linear(r);
  t.transitions = r.tensor();
  r.finish();

  if (t.transitions.rank() != 2 || t.transitions.dim(0) != k + 2 ||
      t.transitions.dim(1) != k + 2 || t.proj.out != k ||
      t.fwd.input != t.embed_dim || t.bwd.input != t.embed_dim) {
    throw CorruptError(path + ": tagger shapes disagree with its tag set");
  }
  t.set_embedder(std::move(embedder));
  return t;
}

void save(const GruClassifier& m, const std::string& path) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(m.config.hidden));
  w.f64(m.config.lr0);
  w.u32(static_cast<std::uint32_t>(m.config.epochs));
  w.u32(static_cast<std::uint32_t>(m.config.batch));
  w.f64(m.config.anneal_factor);
  w.u32(static_cast<std::uint32_t>(m.config.patience));
  w.f64(m.config.clip);
  w.u32(static_cast<std::uint32_t>(m.labels.size()));
  for (const auto& label : m.labels.labels) w.str(label);
  w.u64(m.embed_dim);
  w.tensor(m.gru.w_ih);
  w.tensor(m.gru.w_hh);
  w.tensor(m.gru.b_ih);
  w.tensor(m.gru.b_hh);
  put_linear(w, m.out);
  write_file(path, seal(Kind::classifier, w));
}

GruClassifier load_classifier(const std::string& path,
                              std::shared_ptr<const Embedder> embedder) {
  std::string buf = read_file(path);
  Reader r = open(buf, Kind::classifier, path);

  GruClassifier m;
  m.config.hidden = static_cast<int>(r.u32());
  m.config.lr0 = r.f64();
  m.config.epochs = static_cast<int>(r.u32());
  m.config.batch = static_cast<int>(r.u32());
  m.config.anneal_factor = r.f64();
  m.config.patience = static_cast<int>(r.u32());
  m.config.clip = r.f64();
  std::uint32_t c = r.u32();
  std::vector<std::string> labels;
  for (std::uint32_t i = 0; i < c; ++i) labels.push_back(r.str());
  m.labels = LabelSet::from_labels(std::move(labels));
  m.embed_dim = r.u64();
  m.gru.w_ih = r.tensor();
  m.gru.w_hh = r.tensor();
  m.gru.b_ih = r.tensor();
  m.gru.b_hh = r.tensor();
  if (m.gru.w_ih.rank() != 2 || m.gru.w_ih.dim(0) % 3 != 0 ||
      m.gru.w_hh.rank() != 2 || m.gru.w_hh.dim(0) != m.gru.w_ih.dim(0) ||
      m.gru.w_hh.dim(1) * 3 != m.gru.w_hh.dim(0)) {
    throw CorruptError(path + ": inconsistent GRU parameter shapes");
  }
  m.gru.hidden = m.gru.w_hh.dim(1);
  m.gru.input = m.gru.w_ih.dim(1);
  m.out = get_linear(r);
  r.finish();

  if (m.out.out != c || m.gru.input != m.embed_dim) {
    throw CorruptError(path + ": classifier shapes disagree with its labels");
  }
  m.set_embedder(std::move(embedder));
  return m;
}

void save(const StaticWordTable& table, const std::string& path) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(table.dim));
  w.u32(static_cast<std::uint32_t>(table.entries.size()));
  for (const auto& [word, v] : table.entries) {
    w.str(word);
    for (std::size_t i = 0; i < v.size(); ++i) w.f32(v[i]);
  }
  write_file(path, seal(Kind::static_table, w));
}

StaticWordTable load_table(const std::string& path) {
  std::string buf = read_file(path);
  Reader r = open(buf, Kind::static_table, path);
  StaticWordTable table;
  table.dim = r.u32();
  std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string word = r.str();
    Tensor v({table.dim});
    for (std::size_t j = 0; j < table.dim; ++j) v[j] = r.f32();
    table.put(word, std::move(v));
  }
  r.finish();
  return table;
}

}  // namespace csem::persist
