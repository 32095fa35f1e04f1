#include "invmih/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace invmih {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'V', 'M', 'I', 'H', 'C', 'K'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  void bytes(const void* p, size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(uint32_t v) { bytes(&v, sizeof v); }
  void i64(int64_t v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const char* data, size_t size) : p_(data), end_(data + size) {}

  void bytes(void* out, size_t n) {
    if (static_cast<size_t>(end_ - p_) < n) {
      throw CheckpointError(CheckpointErrc::kFormat, "checkpoint: record runs past the end of the file");
    }
    std::memcpy(out, p_, n);
    p_ += n;
  }
  uint32_t u32() {
    uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  int64_t i64() {
    int64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const uint32_t n = u32();
    if (static_cast<size_t>(end_ - p_) < n) {
      throw CheckpointError(CheckpointErrc::kFormat, "checkpoint: string runs past the end of the file");
    }
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  bool done() const { return p_ == end_; }

 private:
  const char* p_;
  const char* end_;
};

uint32_t checksum(const char* data, size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks to stay within range.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<uint32_t>(crc);
}

std::string shape_str(const std::vector<int64_t>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

std::vector<int64_t> dims_of(const Shape& s) { return {s.n, s.c, s.h, s.w}; }

template <typename T>
ParamBlock to_block(const std::string& name, const Tensor<T>& t) {
  ParamBlock b;
  b.name = name;
  b.shape = dims_of(t.shape());
  b.data.resize(static_cast<size_t>(t.numel()));
  for (size_t i = 0; i < b.data.size(); ++i) b.data[i] = static_cast<float>(t.data()[i]);
  return b;
}

template <typename T>
void from_block(const Checkpoint& ckpt, const std::string& name, Tensor<T>& t) {
  const ParamBlock* b = ckpt.find(name);
  if (!b) throw CheckpointError(CheckpointErrc::kMissing, "checkpoint: no block named '" + name + "'");
  const auto want = dims_of(t.shape());
  if (b->shape != want) {
    throw CheckpointError(CheckpointErrc::kShape, "checkpoint: block '" + name + "' has shape " +
                                                      shape_str(b->shape) + ", model expects " + shape_str(want));
  }
  for (size_t i = 0; i < b->data.size(); ++i) t.data()[i] = static_cast<T>(b->data[i]);
}

}  // namespace

std::string to_string(CheckpointErrc code) {
  switch (code) {
    case CheckpointErrc::kIo:
      return "io";
    case CheckpointErrc::kFormat:
      return "format";
    case CheckpointErrc::kVersion:
      return "version";
    case CheckpointErrc::kChecksum:
      return "checksum";
    case CheckpointErrc::kShape:
      return "shape";
    case CheckpointErrc::kMissing:
      return "missing";
    case CheckpointErrc::kLayout:
      return "layout";
  }
  return "unknown";
}

CheckpointError::CheckpointError(CheckpointErrc code, const std::string& what)
    : std::runtime_error(what), code_(code) {}

const ParamBlock* Checkpoint::find(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(ckpt.format_version);
  w.str(ckpt.config);
  w.i64(ckpt.iteration);
  w.str(ckpt.stage);
  w.str(ckpt.rng_state);
  w.i64(ckpt.optimizer_steps);
  w.u32(static_cast<uint32_t>(ckpt.blocks.size()));
  for (const auto& b : ckpt.blocks) {
    int64_t numel = 1;
    for (int64_t d : b.shape) numel *= d;
    if (numel != static_cast<int64_t>(b.data.size())) {
      throw CheckpointError(CheckpointErrc::kShape, "checkpoint: block '" + b.name + "' shape " +
                                                        shape_str(b.shape) + " does not match its data length");
    }
    w.str(b.name);
    w.u32(static_cast<uint32_t>(b.shape.size()));
    for (int64_t d : b.shape) w.i64(d);
    w.bytes(b.data.data(), b.data.size() * sizeof(float));
  }
  w.u32(checksum(w.buffer().data(), w.buffer().size()));

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointErrc::kIo, "checkpoint: cannot write " + tmp.string());
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw CheckpointError(CheckpointErrc::kIo, "checkpoint: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(CheckpointErrc::kIo, "checkpoint: cannot move into " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrc::kIo, "checkpoint: cannot open " + path.string());
  const std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof kMagic + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(CheckpointErrc::kFormat, "checkpoint: " + path.string() + " is not a checkpoint file");
  }
  uint32_t version;
  std::memcpy(&version, buf.data() + sizeof kMagic, sizeof version);
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrc::kVersion, "checkpoint: format version " + std::to_string(version) +
                                                        ", this build reads version " +
                                                        std::to_string(kCheckpointVersion));
  }
  const size_t body = buf.size() - sizeof(uint32_t);
  uint32_t stored;
  std::memcpy(&stored, buf.data() + body, sizeof stored);
  if (stored != checksum(buf.data(), body)) {
    throw CheckpointError(CheckpointErrc::kChecksum,
                          "checkpoint: checksum mismatch in " + path.string() + " (truncated or corrupted)");
  }

  Reader r(buf.data() + sizeof kMagic + sizeof version, body - sizeof kMagic - sizeof version);
  Checkpoint ckpt;
  ckpt.format_version = version;
  ckpt.config = r.str();
  ckpt.iteration = r.i64();
  ckpt.stage = r.str();
  ckpt.rng_state = r.str();
  ckpt.optimizer_steps = r.i64();
  const uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    ParamBlock b;
    b.name = r.str();
    const uint32_t rank = r.u32();
    if (rank > 8) throw CheckpointError(CheckpointErrc::kShape, "checkpoint: block '" + b.name + "' has rank " + std::to_string(rank));
    int64_t numel = 1;
    for (uint32_t k = 0; k < rank; ++k) {
      const int64_t d = r.i64();
      if (d < 0 || d > (int64_t{1} << 32)) {
        throw CheckpointError(CheckpointErrc::kShape, "checkpoint: block '" + b.name + "' has a bad dimension");
      }
      b.shape.push_back(d);
      numel *= d;
    }
    if (static_cast<uint64_t>(numel) * sizeof(float) > buf.size()) {
      throw CheckpointError(CheckpointErrc::kShape,
                            "checkpoint: block '" + b.name + "' byte length exceeds the file size");
    }
    b.data.resize(static_cast<size_t>(numel));
    r.bytes(b.data.data(), b.data.size() * sizeof(float));
    ckpt.blocks.push_back(std::move(b));
  }
  if (!r.done()) throw CheckpointError(CheckpointErrc::kFormat, "checkpoint: trailing bytes after the last block");
  return ckpt;
}

template <typename T>
void store_params(Checkpoint& ckpt, const std::vector<NamedParam<T>>& params, const std::string& prefix) {
  for (const auto& p : params) ckpt.blocks.push_back(to_block(prefix + p.name, p.var.value()));
}

template <typename T>
void restore_params(const Checkpoint& ckpt, const std::vector<NamedParam<T>>& params, const std::string& prefix) {
  for (const auto& p : params) {
    Var<T> v = p.var;
    from_block(ckpt, prefix + p.name, v.mutable_value());
  }
}

template <typename T>
void store_tensors(Checkpoint& ckpt, const std::vector<NamedParam<T>>& names, const std::vector<Tensor<T>>& values,
                   const std::string& prefix) {
  for (size_t i = 0; i < names.size(); ++i) ckpt.blocks.push_back(to_block(prefix + names[i].name, values[i]));
}

template <typename T>
void restore_tensors(const Checkpoint& ckpt, const std::vector<NamedParam<T>>& names, std::vector<Tensor<T>>& values,
                     const std::string& prefix) {
  for (size_t i = 0; i < names.size(); ++i) from_block(ckpt, prefix + names[i].name, values[i]);
}

#define INVMIH_INSTANTIATE(T)                                                                                     \
  template void store_params<T>(Checkpoint&, const std::vector<NamedParam<T>>&, const std::string&);             \
  template void restore_params<T>(const Checkpoint&, const std::vector<NamedParam<T>>&, const std::string&);     \
  template void store_tensors<T>(Checkpoint&, const std::vector<NamedParam<T>>&, const std::vector<Tensor<T>>&, \
                                 const std::string&);                                                             \
  template void restore_tensors<T>(const Checkpoint&, const std::vector<NamedParam<T>>&, std::vector<Tensor<T>>&, \
                                   const std::string&);
INVMIH_INSTANTIATE(float)
INVMIH_INSTANTIATE(double)
#undef INVMIH_INSTANTIATE

}  // namespace invmih
