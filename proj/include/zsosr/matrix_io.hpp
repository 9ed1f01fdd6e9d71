#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zsosr/matrix.hpp"

namespace zsosr::data {

/// Binary matrix container: magic "ZSMX", version byte (=1), dtype byte
/// (0 = float32, 1 = uint32), rows and cols as unsigned 64-bit little-endian,
/// then the row-major little-endian payload. Header is 22 bytes; round-trips
/// are bit-identical.
inline constexpr std::size_t kMatrixFileHeaderBytes = 22;
inline constexpr std::uint8_t kMatrixFileVersion = 1;

enum class MatrixDtype : std::uint8_t { Float32 = 0, Uint32 = 1 };

void write_matrix(const std::string& path, const nd::Matrix& m);
nd::Matrix read_matrix(const std::string& path);

void write_indices(const std::string& path, const std::vector<std::uint32_t>& v);
std::vector<std::uint32_t> read_indices(const std::string& path);

/// Plain comma-separated float rows, no header; for small/synthetic matrices.
nd::Matrix read_matrix_csv(const std::string& path);

}  // namespace zsosr::data
