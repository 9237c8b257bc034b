#include "crat/core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "crat/core/errors.hpp"

namespace crat {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'R', 'A', 'T', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, std::uint32_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <class T>
  T get() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  void read(char* dst, std::size_t n) {
    in_.read(dst, std::streamsize(n));
    if (std::size_t(in_.gcount()) != n) throw DataError("checkpoint truncated: " + path_);
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const std::string& descriptor) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, descriptor);
  put<std::uint32_t>(out, std::uint32_t(params.size()));
  for (const auto& p : params.items()) {
    put_string(out, p.name);
    put<std::uint8_t>(out, std::uint8_t((p.learnable ? 1 : 0) | (p.trainable ? 2 : 0)));
    put<std::uint64_t>(out, p.value.rows);
    put<std::uint64_t>(out, p.value.cols);
    out.write(reinterpret_cast<const char*>(p.value.data.data()), std::streamsize(p.value.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  Reader r(in, path.string());
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError("not a checkpoint file: " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  Checkpoint ck;
  ck.descriptor = r.get_string();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    const auto flags = r.get<std::uint8_t>();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows * cols > (std::uint64_t(1) << 32)) throw DataError("implausible array size in " + path.string());
    Array2 value(rows, cols);
    r.read(reinterpret_cast<char*>(value.data.data()), value.size() * sizeof(double));
    Param& p = ck.params.add(std::move(name), std::move(value), (flags & 1) != 0);
    p.trainable = (flags & 2) != 0;
  }
  return ck;
}

}  // namespace crat
