#include "lrs/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace lrs {
namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

struct Header {
  std::uint16_t dtype = 0;
  std::uint32_t rows = 0, cols = 0, bands = 0;
};

void write_header(std::ostream& os, std::uint16_t dtype, std::uint32_t rows,
                  std::uint32_t cols, std::uint32_t bands) {
  os.write("HSIC", 4);
  put_u16(os, kContainerVersion);
  put_u16(os, dtype);
  put_u64(os, 0);  // reserved
  put_u32(os, rows);
  put_u32(os, cols);
  put_u32(os, bands);
}

Header read_header(std::istream& is, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "HSIC", 4) != 0)
    throw std::runtime_error("malformed header (bad magic): " + path);
  const std::uint16_t version = get_u16(is);
  if (version != kContainerVersion)
    throw std::runtime_error("malformed header (unsupported version): " + path);
  Header h;
  h.dtype = get_u16(is);
  get_u64(is);  // reserved
  h.rows = get_u32(is);
  h.cols = get_u32(is);
  h.bands = get_u32(is);
  if (!is) throw std::runtime_error("malformed header (truncated): " + path);
  return h;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  return f;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  return f;
}

std::size_t remaining_bytes(std::istream& is) {
  const auto here = is.tellg();
  is.seekg(0, std::ios::end);
  const auto end = is.tellg();
  is.seekg(here);
  return static_cast<std::size_t>(end - here);
}

}  // namespace

HsiCube load_cube(const std::string& path) {
  auto f = open_in(path);
  const Header h = read_header(f, path);
  if (h.dtype != kDtypeFloat32)
    throw std::runtime_error("malformed header (dtype is not float32): " + path);
  const std::size_t count =
      static_cast<std::size_t>(h.rows) * h.cols * h.bands;
  if (remaining_bytes(f) != count * sizeof(float))
    throw std::runtime_error("dimension/payload mismatch: " + path);
  std::vector<float> payload(count);
  f.read(reinterpret_cast<char*>(payload.data()),
         static_cast<std::streamsize>(count * sizeof(float)));
  if (!f) throw std::runtime_error("truncated payload: " + path);
  HsiCube cube(static_cast<int>(h.rows), static_cast<int>(h.cols),
               static_cast<int>(h.bands));
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(payload[i]))
      throw std::runtime_error("non-finite values in payload: " + path);
    cube.data[i] = static_cast<double>(payload[i]);
  }
  return cube;
}

void save_cube(const HsiCube& cube, const std::string& path) {
  if (!cube.all_finite()) throw std::runtime_error("save_cube: non-finite values");
  auto f = open_out(path);
  write_header(f, kDtypeFloat32, cube.rows, cube.cols, cube.bands);
  std::vector<float> payload(cube.data.size());
  for (std::size_t i = 0; i < cube.data.size(); ++i)
    payload[i] = static_cast<float>(cube.data[i]);
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!f) throw std::runtime_error("write failed: " + path);
}

MaskCube load_mask(const std::string& path) {
  auto f = open_in(path);
  const Header h = read_header(f, path);
  if (h.dtype != kDtypeUint8)
    throw std::runtime_error("malformed header (dtype is not uint8): " + path);
  const std::size_t count =
      static_cast<std::size_t>(h.rows) * h.cols * h.bands;
  if (remaining_bytes(f) != count)
    throw std::runtime_error("dimension/payload mismatch: " + path);
  MaskCube mask(static_cast<int>(h.rows), static_cast<int>(h.cols),
                static_cast<int>(h.bands));
  f.read(reinterpret_cast<char*>(mask.bits.data()),
         static_cast<std::streamsize>(count));
  if (!f) throw std::runtime_error("truncated payload: " + path);
  for (auto b : mask.bits)
    if (b > 1) throw std::runtime_error("mask bits must be 0 or 1: " + path);
  return mask;
}

void save_mask(const MaskCube& mask, const std::string& path) {
  auto f = open_out(path);
  write_header(f, kDtypeUint8, mask.rows, mask.cols, mask.bands);
  f.write(reinterpret_cast<const char*>(mask.bits.data()),
          static_cast<std::streamsize>(mask.bits.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  const HsiCube c = load_cube(path);
  if (c.bands != 1) throw std::runtime_error("matrix container must have bands = 1: " + path);
  Eigen::MatrixXd m(c.rows, c.cols);
  for (int r = 0; r < c.rows; ++r)
    for (int col = 0; col < c.cols; ++col) m(r, col) = c.at(r, col, 0);
  return m;
}

void save_matrix(const Eigen::MatrixXd& mat, const std::string& path) {
  HsiCube c(static_cast<int>(mat.rows()), static_cast<int>(mat.cols()), 1);
  for (int r = 0; r < c.rows; ++r)
    for (int col = 0; col < c.cols; ++col) c.at(r, col, 0) = mat(r, col);
  save_cube(c, path);
}

void export_band_pgm(const HsiCube& cube, int band, const std::string& path) {
  if (band < 0 || band >= cube.bands)
    throw std::invalid_argument("export_band_pgm: band out of range");
  double lo = cube.at(0, 0, band), hi = lo;
  for (int r = 0; r < cube.rows; ++r)
    for (int c = 0; c < cube.cols; ++c) {
      const double v = cube.at(r, c, band);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  auto f = open_out(path);
  f << "P5\n" << cube.cols << " " << cube.rows << "\n255\n";
  std::vector<unsigned char> row(cube.cols);
  for (int r = 0; r < cube.rows; ++r) {
    for (int c = 0; c < cube.cols; ++c) {
      const double v = (cube.at(r, c, band) - lo) * scale;
      row[c] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
    f.write(reinterpret_cast<const char*>(row.data()), cube.cols);
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace lrs
