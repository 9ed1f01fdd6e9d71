#include "zsosr/matrix_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace zsosr::data {

namespace {

constexpr char kMagic[4] = {'Z', 'S', 'M', 'X'};

void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("matrix file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

struct Header {
  MatrixDtype dtype;
  std::uint64_t rows, cols;
};

Header parse_header(const std::string& bytes, const std::string& path) {
  if (bytes.size() < kMatrixFileHeaderBytes) {
    throw std::runtime_error("matrix file: truncated header in " + path);
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw std::runtime_error("matrix file: bad magic in " + path);
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (p[4] != kMatrixFileVersion) {
    throw std::runtime_error("matrix file: unsupported version " +
                             std::to_string(p[4]) + " in " + path);
  }
  if (p[5] > 1) {
    throw std::runtime_error("matrix file: unknown dtype code " +
                             std::to_string(p[5]) + " in " + path);
  }
  Header h;
  h.dtype = static_cast<MatrixDtype>(p[5]);
  h.rows = get_u64le(p + 6);
  h.cols = get_u64le(p + 14);
  const std::uint64_t expect = h.rows * h.cols * 4;
  if (bytes.size() - kMatrixFileHeaderBytes != expect) {
    throw std::runtime_error("matrix file: truncated payload in " + path + " (" +
                             std::to_string(bytes.size() - kMatrixFileHeaderBytes) +
                             " bytes, header implies " + std::to_string(expect) + ")");
  }
  return h;
}

void write_file(const std::string& path, MatrixDtype dtype, std::uint64_t rows,
                std::uint64_t cols, const void* payload, std::size_t payload_bytes) {
  std::string bytes;
  bytes.reserve(kMatrixFileHeaderBytes + payload_bytes);
  bytes.append(kMagic, 4);
  bytes.push_back(static_cast<char>(kMatrixFileVersion));
  bytes.push_back(static_cast<char>(dtype));
  put_u64le(bytes, rows);
  put_u64le(bytes, cols);
  static_assert(std::endian::native == std::endian::little,
                "payload serialization assumes a little-endian host");
  bytes.append(static_cast<const char*>(payload), payload_bytes);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("matrix file: cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("matrix file: short write to " + path);
}

}  // namespace

void write_matrix(const std::string& path, const nd::Matrix& m) {
  write_file(path, MatrixDtype::Float32, m.rows(), m.cols(), m.data(),
             m.size() * sizeof(float));
}

nd::Matrix read_matrix(const std::string& path) {
  const std::string bytes = read_file(path);
  const Header h = parse_header(bytes, path);
  if (h.dtype != MatrixDtype::Float32) {
    throw std::runtime_error("matrix file: expected float32 data in " + path);
  }
  nd::Matrix m(h.rows, h.cols);
  std::memcpy(m.data(), bytes.data() + kMatrixFileHeaderBytes, m.size() * sizeof(float));
  return m;
}

void write_indices(const std::string& path, const std::vector<std::uint32_t>& v) {
  write_file(path, MatrixDtype::Uint32, v.size(), 1, v.data(),
             v.size() * sizeof(std::uint32_t));
}

std::vector<std::uint32_t> read_indices(const std::string& path) {
  const std::string bytes = read_file(path);
  const Header h = parse_header(bytes, path);
  if (h.dtype != MatrixDtype::Uint32) {
    throw std::runtime_error("matrix file: expected uint32 data in " + path);
  }
  std::vector<std::uint32_t> v(h.rows * h.cols);
  std::memcpy(v.data(), bytes.data() + kMatrixFileHeaderBytes,
              v.size() * sizeof(std::uint32_t));
  return v;
}

nd::Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::vector<float> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stof(cell));
      ++c;
    }
    if (rows == 0) {
      cols = c;
    } else if (c != cols) {
      throw std::runtime_error("csv: ragged row " + std::to_string(rows) + " in " + path);
    }
    ++rows;
  }
  nd::Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

}  // namespace zsosr::data
