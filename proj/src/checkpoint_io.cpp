#include "rsr/checkpoint_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rsr/error.hpp"

namespace rsr {

namespace {

constexpr char kMagic[4] = {'R', 'S', 'R', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  const ModelConfig& c = ckpt.config;
  if (ckpt.vocab.size() != c.vocab_size) throw InvalidArgument("save_checkpoint: vocab size differs from config");
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  for (std::uint32_t v : {c.d_model, c.n_layers, c.n_heads, c.d_ff, c.max_seq_len, c.vocab_size}) w.u32(v);
  w.u32(static_cast<std::uint32_t>(ckpt.vocab.size()));
  for (std::size_t i = 0; i < ckpt.vocab.size(); ++i) {
    const std::string& word = ckpt.vocab.words()[i];
    w.u32(static_cast<std::uint32_t>(word.size()));
    w.bytes(word.data(), word.size());
    w.u64(ckpt.vocab.frequencies()[i]);
  }
  for (const Matrix* t : ckpt.weights.tensors()) {
    w.u32(static_cast<std::uint32_t>(t->rows()));
    w.u32(static_cast<std::uint32_t>(t->cols()));
    for (double x : t->values()) w.f64(x);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a checkpoint");
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");

  Checkpoint ckpt;
  ModelConfig& c = ckpt.config;
  c.d_model = r.u32();
  c.n_layers = r.u32();
  c.n_heads = r.u32();
  c.d_ff = r.u32();
  c.max_seq_len = r.u32();
  c.vocab_size = r.u32();
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }

  const std::uint32_t count = r.u32();
  if (count != c.vocab_size) throw FormatError("checkpoint vocab count differs from config");
  std::vector<std::string> words;
  std::vector<std::uint64_t> freqs;
  words.reserve(count);
  freqs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    words.push_back(r.str(len));
    freqs.push_back(r.u64());
  }
  ckpt.vocab = Vocab::from_entries(std::move(words), std::move(freqs));

  ckpt.weights = ModelWeights::zeros(c);
  for (Matrix* t : ckpt.weights.tensors()) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (static_cast<std::uint64_t>(rows) * cols * 8 > r.remaining()) throw FormatError("checkpoint truncated");
    if (rows != t->rows() || cols != t->cols()) throw FormatError("checkpoint tensor shape inconsistent with config");
    for (double& x : t->values()) x = r.f64();
  }
  if (r.remaining() != 0) throw FormatError("checkpoint has trailing bytes");
  return ckpt;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return deserialize_checkpoint(bytes);
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_hash(const std::filesystem::path& path) { return fnv1a64(read_file_bytes(path)); }

}  // namespace rsr
