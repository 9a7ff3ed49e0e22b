#include "pft/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "pft/errors.hpp"

namespace pft {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw DataError(std::string("checkpoint: ") + what + " too large");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::set<std::string> names;
  std::string out = "PFT1";
  put_u32(out, kCheckpointVersion);
  put_u32(out, checked_u32(ckpt.size(), "tensor count"));
  for (const auto& [name, t] : ckpt) {
    if (!names.insert(name).second) throw DataError("checkpoint: duplicate tensor name '" + name + "'");
    put_u32(out, checked_u32(name.size(), "name length"));
    out += name;
    put_u32(out, checked_u32(t.rank(), "rank"));
    for (auto d : t.shape()) put_u32(out, checked_u32(d, "dimension"));
    for (double v : t.data()) put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4) != "PFT1") throw DataError("checkpoint: bad magic (expected PFT1)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = r.u32();
  Checkpoint ckpt;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = std::string(r.take(r.u32()));
    if (!names.insert(nt.name).second) throw DataError("checkpoint: duplicate tensor name '" + nt.name + "'");
    const auto rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    if (rank == 0 || numel(shape) == 0) throw DataError("checkpoint: tensor '" + nt.name + "' has an empty shape");
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = r.f64();
    nt.tensor = Tensor(std::move(shape), std::move(data));
    ckpt.push_back(std::move(nt));
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes after last tensor");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  try {
    return decode_checkpoint(s.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Checkpoint snapshot(PftModel& model) {
  Checkpoint ckpt;
  model.visit([&](const std::string& name, Tensor& t) { ckpt.push_back({name, Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()))}); });
  return ckpt;
}

void restore(PftModel& model, const Checkpoint& ckpt) {
  std::size_t index = 0;
  model.visit([&](const std::string& name, Tensor& t) {
    const NamedTensor* src = nullptr;
    if (index < ckpt.size() && ckpt[index].name == name) {
      src = &ckpt[index];
    } else {
      for (const auto& c : ckpt) {
        if (c.name == name) src = &c;
      }
    }
    if (!src) throw DataError("checkpoint is missing tensor '" + name + "'");
    if (src->tensor.shape() != t.shape()) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + shape_str(src->tensor.shape()) +
                      " but the model expects " + shape_str(t.shape()));
    }
    std::copy(src->tensor.data().begin(), src->tensor.data().end(), t.data().begin());
    ++index;
  });
  if (index != ckpt.size()) {
    throw DataError("checkpoint holds " + std::to_string(ckpt.size()) + " tensors but the model has " +
                    std::to_string(index));
  }
}

}  // namespace pft
