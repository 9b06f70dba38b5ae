#include "mhmarl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "mhmarl/io_util.hpp"

namespace mhmarl {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

class Reader {
 public:
  Reader(std::string bytes, std::filesystem::path path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  void read(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) fail("truncated file");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    read(&v, 8);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("checkpoint " + path_.string() + ": " + what);
  }

 private:
  std::string bytes_;
  std::filesystem::path path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter> tensors) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u64(out, tensors.size());
  for (const Parameter& p : tensors) {
    put_u64(out, p.name.size());
    out += p.name;
    put_u64(out, p.value.shape().size());
    for (auto d : p.value.shape()) put_u64(out, d);
    const auto data = p.value.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  }
  write_file_atomically(path, out);
}

std::vector<Parameter> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint " + path.string() + ": cannot open");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path);

  char magic[8];
  r.read(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) r.fail("bad magic or unsupported version");
  const std::uint64_t count = r.u64();
  std::vector<Parameter> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    Parameter p;
    const std::uint64_t name_len = r.u64();
    if (name_len > (1u << 20)) r.fail("implausible name length");
    p.name.resize(name_len);
    r.read(p.name.data(), name_len);
    const std::uint64_t rank = r.u64();
    if (rank == 0 || rank > 8) r.fail("implausible rank for '" + p.name + "'");
    Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d == 0 || d > (1u << 28)) r.fail("implausible dimension for '" + p.name + "'");
      total *= d;
    }
    if (total > (1u << 28)) r.fail("tensor '" + p.name + "' too large");
    std::vector<double> data(total);
    r.read(data.data(), total * sizeof(double));
    p.value = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(p));
  }
  if (!r.done()) r.fail("trailing bytes");
  return out;
}

void assign_parameters(std::span<Parameter* const> params, std::span<const Parameter> saved) {
  std::unordered_map<std::string, const Parameter*> by_name;
  for (const Parameter& p : saved) by_name.emplace(p.name, &p);
  for (Parameter* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint lacks parameter '" + p->name + "'");
    if (it->second->value.shape() != p->value.shape()) {
      throw std::runtime_error("checkpoint parameter '" + p->name + "' has shape " +
                               shape_string(it->second->value.shape()) + ", expected " +
                               shape_string(p->value.shape()));
    }
    p->value = it->second->value;
  }
}

}  // namespace mhmarl
