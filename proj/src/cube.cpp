#include "lrs/cube.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lrs {

HsiCube::HsiCube(int rows_, int cols_, int bands_, double fill)
    : rows(rows_), cols(cols_), bands(bands_) {
  if (rows < 0 || cols < 0 || bands < 0)
    throw std::invalid_argument("HsiCube: negative dimension");
  data.assign(static_cast<std::size_t>(rows) * cols * bands, fill);
}

bool HsiCube::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

double HsiCube::max_value() const {
  double m = 0.0;
  bool first = true;
  for (double v : data) {
    if (first || v > m) m = v;
    first = false;
  }
  return m;
}

MaskCube::MaskCube(int rows_, int cols_, int bands_, std::uint8_t fill)
    : rows(rows_), cols(cols_), bands(bands_) {
  if (rows < 0 || cols < 0 || bands < 0)
    throw std::invalid_argument("MaskCube: negative dimension");
  if (fill > 1) throw std::invalid_argument("MaskCube: bits must be 0 or 1");
  bits.assign(static_cast<std::size_t>(rows) * cols * bands, fill);
}

void validate_layout(const PatchLayout& layout, int rows, int cols) {
  if (layout.patch_rows < 1 || layout.patch_cols < 1)
    throw std::invalid_argument("PatchLayout: patch dims must be >= 1");
  if (layout.stride_rows < 1 || layout.stride_cols < 1)
    throw std::invalid_argument("PatchLayout: strides must be >= 1");
  if (layout.patch_rows > rows || layout.patch_cols > cols)
    throw std::invalid_argument("PatchLayout: patch dims exceed cube spatial dims");
  if (layout.mode == PatchMode::PerBandSlice &&
      (layout.patch_rows != rows || layout.patch_cols != cols))
    throw std::invalid_argument(
        "PatchLayout: per-band-slice mode requires patch dims equal to cube spatial dims");
}

int layout_windows_rows(const PatchLayout& layout, int rows) {
  return (rows - layout.patch_rows) / layout.stride_rows + 1;
}

int layout_windows_cols(const PatchLayout& layout, int cols) {
  return (cols - layout.patch_cols) / layout.stride_cols + 1;
}

int layout_patch_count(const PatchLayout& layout, int rows, int cols, int bands) {
  return layout_windows_rows(layout, rows) * layout_windows_cols(layout, cols) * bands;
}

HsiCube apply_mask(const HsiCube& cube, const MaskCube& mask) {
  if (!mask.same_shape(cube)) throw std::invalid_argument("apply_mask: shape mismatch");
  HsiCube out = cube;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = mask.bits[i] ? out.data[i] : 0.0;
  return out;
}

Eigen::MatrixXd extract_patches(const HsiCube& cube, const PatchLayout& layout) {
  validate_layout(layout, cube.rows, cube.cols);
  const int nwr = layout_windows_rows(layout, cube.rows);
  const int nwc = layout_windows_cols(layout, cube.cols);
  const int windows = nwr * nwc;
  Eigen::MatrixXd patches(layout.patch_dim(), static_cast<Eigen::Index>(windows) * cube.bands);
  for (int b = 0; b < cube.bands; ++b) {
    for (int wr = 0; wr < nwr; ++wr) {
      for (int wc = 0; wc < nwc; ++wc) {
        const Eigen::Index col = static_cast<Eigen::Index>(b) * windows + wr * nwc + wc;
        const int r0 = wr * layout.stride_rows;
        const int c0 = wc * layout.stride_cols;
        int k = 0;
        for (int pr = 0; pr < layout.patch_rows; ++pr)
          for (int pc = 0; pc < layout.patch_cols; ++pc)
            patches(k++, col) = cube.at(r0 + pr, c0 + pc, b);
      }
    }
  }
  return patches;
}

HsiCube assemble_patches(const Eigen::MatrixXd& patches, const PatchLayout& layout,
                         int rows, int cols, int bands) {
  validate_layout(layout, rows, cols);
  if (patches.rows() != layout.patch_dim())
    throw std::invalid_argument("assemble_patches: patch dim mismatch");
  const int nwr = layout_windows_rows(layout, rows);
  const int nwc = layout_windows_cols(layout, cols);
  const int windows = nwr * nwc;
  if (patches.cols() != static_cast<Eigen::Index>(windows) * bands)
    throw std::invalid_argument("assemble_patches: patch count inconsistent with layout");
  HsiCube out(rows, cols, bands, 0.0);
  for (int b = 0; b < bands; ++b) {
    for (int wr = 0; wr < nwr; ++wr) {
      for (int wc = 0; wc < nwc; ++wc) {
        const Eigen::Index col = static_cast<Eigen::Index>(b) * windows + wr * nwc + wc;
        const int r0 = wr * layout.stride_rows;
        const int c0 = wc * layout.stride_cols;
        int k = 0;
        for (int pr = 0; pr < layout.patch_rows; ++pr)
          for (int pc = 0; pc < layout.patch_cols; ++pc)
            out.at(r0 + pr, c0 + pc, b) += patches(k++, col);
      }
    }
  }
  return out;
}

HsiCube patch_coverage(const PatchLayout& layout, int rows, int cols, int bands) {
  validate_layout(layout, rows, cols);
  const int nwr = layout_windows_rows(layout, rows);
  const int nwc = layout_windows_cols(layout, cols);
  HsiCube cov(rows, cols, bands, 0.0);
  for (int b = 0; b < bands; ++b)
    for (int wr = 0; wr < nwr; ++wr)
      for (int wc = 0; wc < nwc; ++wc) {
        const int r0 = wr * layout.stride_rows;
        const int c0 = wc * layout.stride_cols;
        for (int pr = 0; pr < layout.patch_rows; ++pr)
          for (int pc = 0; pc < layout.patch_cols; ++pc)
            cov.at(r0 + pr, c0 + pc, b) += 1.0;
      }
  for (double v : cov.data)
    if (v <= 0.0)
      throw std::invalid_argument("patch_coverage: layout leaves voxels uncovered");
  return cov;
}

Eigen::MatrixXd matricize(const HsiCube& cube) {
  Eigen::MatrixXd mat(cube.bands, static_cast<Eigen::Index>(cube.rows) * cube.cols);
  for (int b = 0; b < cube.bands; ++b)
    for (int r = 0; r < cube.rows; ++r)
      for (int c = 0; c < cube.cols; ++c)
        mat(b, static_cast<Eigen::Index>(r) * cube.cols + c) = cube.at(r, c, b);
  return mat;
}

HsiCube dematricize(const Eigen::MatrixXd& mat, int rows, int cols, int bands) {
  if (mat.rows() != bands || mat.cols() != static_cast<Eigen::Index>(rows) * cols)
    throw std::invalid_argument("dematricize: dimension mismatch");
  HsiCube cube(rows, cols, bands);
  for (int b = 0; b < bands; ++b)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        cube.at(r, c, b) = mat(b, static_cast<Eigen::Index>(r) * cols + c);
  return cube;
}

HsiCube mask_to_cube(const MaskCube& mask) {
  HsiCube out(mask.rows, mask.cols, mask.bands);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) out.data[i] = mask.bits[i];
  return out;
}

}  // namespace lrs
