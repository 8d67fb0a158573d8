#include "ce/cef1.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace ce::cef1 {

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : Error("CEF1 format error at byte " + std::to_string(offset) + ": " + what), reason_(what), offset_(offset) {}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> header(std::uint32_t rows, std::uint32_t cols) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, rows);
  put_u32(out, cols);
  put_u32(out, 0);
  return out;
}

void check_extents(Eigen::Index rows, Eigen::Index cols) {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (rows < 0 || cols < 0 || static_cast<std::uint64_t>(rows) > kMax || static_cast<std::uint64_t>(cols) > kMax) {
    throw FormatError("matrix extents do not fit in uint32", 4);
  }
}

}  // namespace

std::vector<std::uint32_t> decode_words(const std::vector<std::uint8_t>& bytes, std::uint32_t& rows, std::uint32_t& cols) {
  if (bytes.size() < kHeaderBytes) throw FormatError("truncated header", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic", 0);
  rows = get_u32(bytes, 4);
  cols = get_u32(bytes, 8);
  if (get_u32(bytes, 12) != 0) throw FormatError("reserved bytes are not zero", 12);
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  if (count > (std::numeric_limits<std::uint64_t>::max() - kHeaderBytes) / 4 ||
      count > static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max())) {
    throw FormatError("extent overflow", 4);
  }
  const std::uint64_t expected = kHeaderBytes + 4 * count;
  if (bytes.size() < expected) throw FormatError("truncated payload", bytes.size());
  if (bytes.size() > expected) throw FormatError("trailing bytes after payload", expected);
  std::vector<std::uint32_t> words(count);
  for (std::uint64_t i = 0; i < count; ++i) words[i] = get_u32(bytes, kHeaderBytes + 4 * i);
  return words;
}

std::vector<std::uint8_t> encode_words(const std::vector<std::uint32_t>& words, std::uint32_t rows, std::uint32_t cols) {
  if (static_cast<std::uint64_t>(rows) * cols != words.size()) throw FormatError("payload size does not match extents", 4);
  std::vector<std::uint8_t> out = header(rows, cols);
  out.reserve(kHeaderBytes + 4 * words.size());
  for (std::uint32_t w : words) put_u32(out, w);
  return out;
}

std::vector<std::uint8_t> encode(const Matrix& m) {
  check_extents(m.rows(), m.cols());
  std::vector<std::uint32_t> words(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    if (!std::isfinite(v)) throw FormatError("non-finite value at element " + std::to_string(i), kHeaderBytes + 4 * i);
    words[i] = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  }
  return encode_words(words, static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols()));
}

Matrix decode(const std::vector<std::uint8_t>& bytes) {
  std::uint32_t rows = 0, cols = 0;
  const std::vector<std::uint32_t> words = decode_words(bytes, rows, cols);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < words.size(); ++i) m.data()[i] = static_cast<double>(std::bit_cast<float>(words[i]));
  return m;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to '" + path.string() + "'");
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) { write_file(path, encode(m)); }

Matrix read_matrix(const std::filesystem::path& path) {
  try {
    return decode(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.reason(), e.offset());
  }
}

void write_matrix_f64(const std::filesystem::path& path, const Matrix& m) {
  check_extents(m.rows(), 2 * m.cols());
  std::vector<std::uint32_t> words;
  words.reserve(2 * static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    words.push_back(static_cast<std::uint32_t>(bits));
    words.push_back(static_cast<std::uint32_t>(bits >> 32));
  }
  write_file(path, encode_words(words, static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(2 * m.cols())));
}

Matrix read_matrix_f64(const std::filesystem::path& path) {
  std::uint32_t rows = 0, cols = 0;
  std::vector<std::uint32_t> words;
  try {
    words = decode_words(read_file(path), rows, cols);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.reason(), e.offset());
  }
  if (cols % 2 != 0) throw FormatError(path.string() + ": f64 blob has an odd word count per row", 8);
  Matrix m(rows, cols / 2);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const std::uint64_t bits = static_cast<std::uint64_t>(words[2 * i]) | (static_cast<std::uint64_t>(words[2 * i + 1]) << 32);
    m.data()[i] = std::bit_cast<double>(bits);
  }
  return m;
}

}  // namespace ce::cef1
