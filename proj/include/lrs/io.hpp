#pragma once

#include <string>

#include "lrs/cube.hpp"

namespace lrs {

// Container layout (little-endian throughout):
//   16-byte preamble: magic "HSIC", u16 version, u16 dtype, u64 reserved
//   u32 rows, u32 cols, u32 bands
//   payload: rows*cols*bands values, band-sequential
// dtype 1 = float32 (.hsic cubes, matrix containers), dtype 2 = uint8 (.mask).
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::uint16_t kDtypeFloat32 = 1;
inline constexpr std::uint16_t kDtypeUint8 = 2;

HsiCube load_cube(const std::string& path);
void save_cube(const HsiCube& cube, const std::string& path);

MaskCube load_mask(const std::string& path);
void save_mask(const MaskCube& mask, const std::string& path);

// Matrix persisted in the cube container with bands = 1 (rows x cols payload,
// row-major). Used for dictionaries.
Eigen::MatrixXd load_matrix(const std::string& path);
void save_matrix(const Eigen::MatrixXd& mat, const std::string& path);

// One band as binary 8-bit PGM, min-max scaled.
void export_band_pgm(const HsiCube& cube, int band, const std::string& path);

}  // namespace lrs
