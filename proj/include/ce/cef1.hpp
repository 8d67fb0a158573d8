#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ce/tensor.hpp"

namespace ce {

/// CEF1 matrix files:
///   offset 0   "CEF1"
///   offset 4   rows, uint32 little-endian
///   offset 8   cols, uint32 little-endian
///   offset 12  reserved, 4 zero bytes
///   offset 16  rows*cols IEEE-754 binary32 little-endian, row-major
/// Values are promoted to double on load.
namespace cef1 {

inline constexpr char kMagic[4] = {'C', 'E', 'F', '1'};
inline constexpr std::size_t kHeaderBytes = 16;

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const { return offset_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
  std::uint64_t offset_;
};

std::vector<std::uint8_t> encode(const Matrix& m);
Matrix decode(const std::vector<std::uint8_t>& bytes);

/// Writes raw 32-bit words under a CEF1 header (no float conversion).
std::vector<std::uint8_t> encode_words(const std::vector<std::uint32_t>& words, std::uint32_t rows, std::uint32_t cols);
std::vector<std::uint32_t> decode_words(const std::vector<std::uint8_t>& bytes, std::uint32_t& rows, std::uint32_t& cols);

void write_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);

/// Doubles stored bit-exactly: each value becomes two payload words (low,
/// high) of its 64-bit pattern, so the file holds rows x 2*cols words.
void write_matrix_f64(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_f64(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace cef1
}  // namespace ce
