#include "rana/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace rana {

static_assert(std::endian::native == std::endian::little,
              "byte-swapping writer not implemented for big-endian hosts");

namespace {

constexpr char kMagic[4] = {'R', 'A', 'N', 'A'};

void put_u32(std::ofstream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

void put_u64(std::ofstream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint32_t get_u32(std::ifstream& is, std::uint64_t& off,
                      const std::string& file, const char* what) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw ParseError(std::string("truncated ") + what, off, file);
  off += 4;
  return v;
}

std::uint64_t get_u64(std::ifstream& is, std::uint64_t& off,
                      const std::string& file, const char* what) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw ParseError(std::string("truncated ") + what, off, file);
  off += 8;
  return v;
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::uint64_t count = 1;
  for (auto d : t.dims) count *= d;
  if (count != t.data.size())
    throw ShapeError("write_tensor: payload length != product of dims");

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_tensor: cannot open " + tmp.string());
    os.write(kMagic, 4);
    put_u32(os, kTensorFormatVersion);
    put_u32(os, 0);  // dtype float64
    put_u32(os, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u64(os, d);
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!os) throw std::runtime_error("write_tensor: write failed " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Tensor read_tensor(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open", 0, file);
  std::uint64_t off = 0;

  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("bad magic, expected RANA", 0, file);
  off += 4;

  const std::uint32_t version = get_u32(is, off, file, "version");
  if (version != kTensorFormatVersion)
    throw ParseError("unsupported format version " + std::to_string(version),
                     off - 4, file);
  const std::uint32_t dtype = get_u32(is, off, file, "dtype");
  if (dtype != 0)
    throw ParseError("unsupported dtype code " + std::to_string(dtype), off - 4,
                     file);
  const std::uint32_t ndim = get_u32(is, off, file, "ndim");
  if (ndim == 0 || ndim > 8)
    throw ParseError("implausible ndim " + std::to_string(ndim), off - 4, file);

  Tensor t;
  std::uint64_t count = 1;
  for (std::uint32_t d = 0; d < ndim; ++d) {
    const std::uint64_t dim = get_u64(is, off, file, "dims");
    if (dim == 0) throw ParseError("zero dimension", off - 8, file);
    t.dims.push_back(dim);
    count *= dim;
  }
  t.data.resize(count);
  is.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw ParseError("truncated payload", off, file);
  return t;
}

void write_matrix(const std::filesystem::path& path, const DenseMatrix& m) {
  write_tensor(path, Tensor{{m.rows(), m.cols()}, m.data()});
}

DenseMatrix read_matrix(const std::filesystem::path& path) {
  Tensor t = read_tensor(path);
  if (t.dims.size() != 2)
    throw ParseError("expected 2-d tensor, got " + std::to_string(t.dims.size()) +
                         "-d",
                     0, path.string());
  return DenseMatrix::make(t.dims[0], t.dims[1], std::move(t.data));
}

void write_vector(const std::filesystem::path& path, const DenseVector& v) {
  write_tensor(path, Tensor{{v.size()}, v});
}

DenseVector read_vector(const std::filesystem::path& path) {
  Tensor t = read_tensor(path);
  if (t.dims.size() != 1)
    throw ParseError("expected 1-d tensor, got " + std::to_string(t.dims.size()) +
                         "-d",
                     0, path.string());
  return t.data;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os)
      throw std::runtime_error("write_text_atomic: cannot open " + tmp.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::string config_hash(const std::string& serialized) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : serialized) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rana
