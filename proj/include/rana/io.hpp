#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rana/tensor.hpp"

namespace rana {

/// Malformed .rana file; offset points at the offending byte.
struct ParseError : std::runtime_error {
  std::uint64_t offset;
  std::string file;
  ParseError(const std::string& msg, std::uint64_t off, std::string f)
      : std::runtime_error(msg + " (file " + f + ", byte offset " +
                           std::to_string(off) + ")"),
        offset(off),
        file(std::move(f)) {}
};

constexpr std::uint32_t kTensorFormatVersion = 1;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;  // row-major
};

/// Layout: magic "RANA" | version u32 LE | dtype u32 LE (0 = float64) |
/// ndim u32 LE | dims u64 LE each | payload little-endian float64.
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix read_matrix(const std::filesystem::path& path);
void write_vector(const std::filesystem::path& path, const DenseVector& v);
DenseVector read_vector(const std::filesystem::path& path);

/// Write-to-temp then atomic rename.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

/// FNV-1a over the serialized config, hex-encoded; stamped into plans and
/// reports so replays can be matched to their configuration.
std::string config_hash(const std::string& serialized);

}  // namespace rana
