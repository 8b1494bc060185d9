#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace lrs {

// 3-D reflectance cube, band-sequential storage: entry (r, c, b) lives at
// data[(b*rows + r)*cols + c].
struct HsiCube {
  int rows = 0;
  int cols = 0;
  int bands = 0;
  std::vector<double> data;

  HsiCube() = default;
  HsiCube(int rows_, int cols_, int bands_, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  std::size_t index(int r, int c, int b) const {
    return (static_cast<std::size_t>(b) * rows + r) * cols + c;
  }
  double& at(int r, int c, int b) { return data[index(r, c, b)]; }
  double at(int r, int c, int b) const { return data[index(r, c, b)]; }
  bool same_shape(const HsiCube& o) const {
    return rows == o.rows && cols == o.cols && bands == o.bands;
  }
  bool all_finite() const;
  double max_value() const;
};

// Binary validity cube, same layout as HsiCube. 0 = missing, 1 = valid.
struct MaskCube {
  int rows = 0;
  int cols = 0;
  int bands = 0;
  std::vector<std::uint8_t> bits;

  MaskCube() = default;
  MaskCube(int rows_, int cols_, int bands_, std::uint8_t fill = 1);

  std::size_t size() const { return bits.size(); }
  std::size_t index(int r, int c, int b) const {
    return (static_cast<std::size_t>(b) * rows + r) * cols + c;
  }
  std::uint8_t& at(int r, int c, int b) { return bits[index(r, c, b)]; }
  std::uint8_t at(int r, int c, int b) const { return bits[index(r, c, b)]; }
  bool same_shape(const HsiCube& o) const {
    return rows == o.rows && cols == o.cols && bands == o.bands;
  }
};

enum class PatchMode { PerBandSlice, SpatialSliding };

// Patch extraction geometry. Per-band-slice treats each full band image as
// one patch (patch dims must equal the cube's spatial dims); spatial-sliding
// slides a window over every band.
struct PatchLayout {
  int patch_rows = 0;
  int patch_cols = 0;
  int stride_rows = 1;
  int stride_cols = 1;
  PatchMode mode = PatchMode::PerBandSlice;

  static PatchLayout per_band_slice(int rows, int cols) {
    return PatchLayout{rows, cols, 1, 1, PatchMode::PerBandSlice};
  }
  static PatchLayout sliding(int pr, int pc, int sr, int sc) {
    return PatchLayout{pr, pc, sr, sc, PatchMode::SpatialSliding};
  }

  int patch_dim() const { return patch_rows * patch_cols; }
};

// Throws std::invalid_argument when the layout cannot be applied to the
// given spatial dims.
void validate_layout(const PatchLayout& layout, int rows, int cols);

// Number of window positions along rows/cols and total patches (windows * bands).
int layout_windows_rows(const PatchLayout& layout, int rows);
int layout_windows_cols(const PatchLayout& layout, int cols);
int layout_patch_count(const PatchLayout& layout, int rows, int cols, int bands);

HsiCube apply_mask(const HsiCube& cube, const MaskCube& mask);

// Column i of the result is the vectorized i-th patch (row-major within the
// window); patch index = band*windows + wr*windows_cols + wc.
Eigen::MatrixXd extract_patches(const HsiCube& cube, const PatchLayout& layout);

// Adjoint of extract_patches: overlapping contributions are summed, not
// averaged (normalization happens downstream via patch_coverage).
HsiCube assemble_patches(const Eigen::MatrixXd& patches, const PatchLayout& layout,
                         int rows, int cols, int bands);

// Per-voxel count of covering patches. Throws when the layout leaves any
// voxel uncovered.
HsiCube patch_coverage(const PatchLayout& layout, int rows, int cols, int bands);

// bands x (rows*cols) matrix; row b is band b vectorized row-major.
Eigen::MatrixXd matricize(const HsiCube& cube);
HsiCube dematricize(const Eigen::MatrixXd& mat, int rows, int cols, int bands);

// Mask as a 0/1 double cube (for patchwise validity bookkeeping).
HsiCube mask_to_cube(const MaskCube& mask);

}  // namespace lrs
