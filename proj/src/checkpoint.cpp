#include "tssr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tssr/error.hpp"

namespace tssr {
namespace {

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot write " + path.string());
  }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void tensor(const StoredTensor& t) {
    str(t.name);
    u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) u64(d);
    for (float x : t.data) f32(x);
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  void le(std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, bytes);
  }
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot read " + path.string());
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) fail("implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  StoredTensor tensor() {
    StoredTensor t;
    t.name = str();
    const std::uint32_t rank = u32();
    if (rank > 8) fail("implausible tensor rank");
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.shape.push_back(u64());
      count *= t.shape.back();
    }
    if (count > (1ull << 32)) fail("implausible tensor size");
    t.data.resize(count);
    for (auto& x : t.data) x = f32();
    return t;
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& what) { throw ValidationError("corrupt checkpoint " + path_.string() + ": " + what); }

 private:
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) fail("unexpected end of file");
  }
  std::uint64_t le(int bytes) {
    unsigned char buf[8];
    read(reinterpret_cast<char*>(buf), static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  Writer w(path);
  w.u32(0x52535354u);  // "TSSR" when read as bytes
  w.u32(kCheckpointVersion);
  w.u64(vocab_hash);
  w.u32(static_cast<std::uint32_t>(dims.vocab_size));
  w.u32(static_cast<std::uint32_t>(dims.embed_dim));
  w.u32(static_cast<std::uint32_t>(dims.hidden_dim));
  w.u32(static_cast<std::uint32_t>(dims.num_layers));
  w.u32(dims.head_input == HeadInput::Top ? 0u : 1u);
  w.u64(parameter_count);
  for (const auto* group : {&tensors, &optimizer}) {
    w.u32(static_cast<std::uint32_t>(group->size()));
    for (const auto& t : *group) w.tensor(t);
  }
  w.u32(static_cast<std::uint32_t>(counters.size()));
  for (const auto& [name, v] : counters) {
    w.str(name);
    w.u64(v);
  }
  w.u64(rng_seed);
  w.finish();
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  Reader r(path);
  if (r.u32() != 0x52535354u) r.fail("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint c;
  c.vocab_hash = r.u64();
  c.dims.vocab_size = static_cast<int>(r.u32());
  c.dims.embed_dim = static_cast<int>(r.u32());
  c.dims.hidden_dim = static_cast<int>(r.u32());
  c.dims.num_layers = static_cast<int>(r.u32());
  const std::uint32_t head = r.u32();
  if (head > 1) r.fail("bad head mode");
  c.dims.head_input = head == 0 ? HeadInput::Top : HeadInput::All;
  c.parameter_count = r.u64();
  for (auto* group : {&c.tensors, &c.optimizer}) {
    const std::uint32_t n = r.u32();
    if (n > 100000) r.fail("implausible tensor count");
    for (std::uint32_t i = 0; i < n; ++i) group->push_back(r.tensor());
  }
  const std::uint32_t n = r.u32();
  if (n > 100000) r.fail("implausible counter count");
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    c.counters.emplace_back(std::move(name), r.u64());
  }
  c.rng_seed = r.u64();
  r.expect_end();
  return c;
}

const StoredTensor* Checkpoint::find(const std::string& name) const {
  for (const auto* group : {&tensors, &optimizer}) {
    for (const auto& t : *group) {
      if (t.name == name) return &t;
    }
  }
  return nullptr;
}

bool Checkpoint::has_prefix(const std::string& prefix) const {
  for (const auto& t : tensors) {
    if (t.name.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

std::uint64_t Checkpoint::counter(const std::string& name, std::uint64_t fallback) const {
  for (const auto& [k, v] : counters) {
    if (k == name) return v;
  }
  return fallback;
}

template <typename T>
void store_tensors(std::vector<StoredTensor>& out, const std::vector<NamedTensor<T>>& src, const std::string& prefix) {
  for (const auto& nt : src) {
    const Matrix<T>& m = *nt.value;
    StoredTensor t;
    t.name = prefix + nt.name;
    t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    t.data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) t.data.push_back(static_cast<float>(m(i, j)));
    }
    out.push_back(std::move(t));
  }
}

template <typename T>
void restore_tensors(const std::vector<StoredTensor>& in, const std::vector<NamedTensor<T>>& dst, const std::string& prefix) {
  for (const auto& nt : dst) {
    const std::string name = prefix + nt.name;
    const StoredTensor* found = nullptr;
    for (const auto& t : in) {
      if (t.name == name) {
        found = &t;
        break;
      }
    }
    if (!found) throw ValidationError("checkpoint is missing tensor " + name);
    Matrix<T>& m = *nt.value;
    if (found->shape.size() != 2 || found->shape[0] != static_cast<std::uint64_t>(m.rows()) ||
        found->shape[1] != static_cast<std::uint64_t>(m.cols())) {
      throw ValidationError("shape mismatch for tensor " + name);
    }
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<T>(found->data[k++]);
    }
  }
}

template void store_tensors(std::vector<StoredTensor>&, const std::vector<NamedTensor<float>>&, const std::string&);
template void store_tensors(std::vector<StoredTensor>&, const std::vector<NamedTensor<double>>&, const std::string&);
template void restore_tensors(const std::vector<StoredTensor>&, const std::vector<NamedTensor<float>>&, const std::string&);
template void restore_tensors(const std::vector<StoredTensor>&, const std::vector<NamedTensor<double>>&, const std::string&);

}  // namespace tssr
