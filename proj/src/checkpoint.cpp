#include "tricycle/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tricycle/errors.hpp"

namespace tricycle {

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out_.append(reinterpret_cast<const char*>(bytes), sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void put_floats(const std::vector<float>& v) {
    for (float f : v) put(f);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<float> get_floats(std::uint64_t n) {
    need(n * sizeof(float));
    std::vector<float> v(n);
    for (auto& f : v) f = get<float>();
    return v;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw FormatError("checkpoint: truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  for (char c : kCheckpointMagic) w.put(c);
  w.put<std::uint32_t>(ckpt.version);
  w.put<std::uint64_t>(ckpt.step);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    std::uint64_t n = 1;
    for (auto e : t.extents) n *= e;
    if (n != t.values.size()) throw ShapeError("checkpoint: tensor " + t.name + " has inconsistent extents");
    w.put_string(t.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.extents.size()));
    for (auto e : t.extents) w.put<std::uint32_t>(e);
    w.put_floats(t.values);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.optimizers.size()));
  for (const auto& o : ckpt.optimizers) {
    if (o.first_moment.size() != o.second_moment.size())
      throw ShapeError("checkpoint: optimizer " + o.name + " has unmatched moments");
    w.put_string(o.name);
    w.put<std::uint64_t>(o.step);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(o.first_moment.size()));
    for (std::size_t i = 0; i < o.first_moment.size(); ++i) {
      if (o.first_moment[i].size() != o.second_moment[i].size())
        throw ShapeError("checkpoint: optimizer " + o.name + " has unmatched moments");
      w.put<std::uint64_t>(o.first_moment[i].size());
      w.put_floats(o.first_moment[i]);
      w.put_floats(o.second_moment[i]);
    }
  }
  w.put_string(ckpt.rng_state);
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  for (char& c : magic) c = r.get<char>();
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  Checkpoint ckpt;
  ckpt.version = r.get<std::uint32_t>();
  if (ckpt.version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(ckpt.version));
  ckpt.step = r.get<std::uint64_t>();
  const auto tensor_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    CheckpointTensor t;
    t.name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 4) throw FormatError("checkpoint: tensor " + t.name + " has rank " + std::to_string(rank));
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.extents.push_back(r.get<std::uint32_t>());
      n *= t.extents.back();
    }
    t.values = r.get_floats(n);
    ckpt.tensors.push_back(std::move(t));
  }
  const auto opt_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < opt_count; ++i) {
    CheckpointOptimizer o;
    o.name = r.get_string();
    o.step = r.get<std::uint64_t>();
    const auto arrays = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < arrays; ++k) {
      const auto n = r.get<std::uint64_t>();
      o.first_moment.push_back(r.get_floats(n));
      o.second_moment.push_back(r.get_floats(n));
    }
    ckpt.optimizers.push_back(std::move(o));
  }
  ckpt.rng_state = r.get_string();
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace tricycle
