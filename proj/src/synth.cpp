#include "lrs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "lrs/rng.hpp"

namespace lrs {
namespace {

// Separable box moving average with clamped borders, applied twice for a
// triangular kernel. Preserves nonnegativity.
void smooth_map(std::vector<double>& map, int rows, int cols, int half_width) {
  if (half_width < 1) return;
  std::vector<double> tmp(map.size());
  auto pass = [&](const std::vector<double>& src, std::vector<double>& dst, bool along_rows) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double acc = 0.0;
        int n = 0;
        for (int d = -half_width; d <= half_width; ++d) {
          const int rr = along_rows ? std::clamp(r + d, 0, rows - 1) : r;
          const int cc = along_rows ? c : std::clamp(c + d, 0, cols - 1);
          acc += src[static_cast<std::size_t>(rr) * cols + cc];
          ++n;
        }
        dst[static_cast<std::size_t>(r) * cols + c] = acc / n;
      }
  };
  for (int repeat = 0; repeat < 2; ++repeat) {
    pass(map, tmp, true);
    pass(tmp, map, false);
  }
}

}  // namespace

HsiCube gen_lowrank_cube(const SynthSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1 || spec.bands < 1)
    throw std::invalid_argument("gen_lowrank_cube: dims must be >= 1");
  const long pixels = static_cast<long>(spec.rows) * spec.cols;
  if (spec.rank < 1 || spec.rank > std::min<long>(spec.bands, pixels))
    throw std::invalid_argument("gen_lowrank_cube: rank infeasible");
  if (spec.abundance_smoothness < 0.0)
    throw std::invalid_argument("gen_lowrank_cube: smoothness must be >= 0");

  Rng rng(Rng::derive(spec.seed, 0xab));
  const int half_width = static_cast<int>(std::lround(spec.abundance_smoothness));

  std::vector<std::vector<double>> maps(spec.rank);
  for (auto& m : maps) {
    m.resize(pixels);
    for (auto& v : m) v = rng.uniform();
    smooth_map(m, spec.rows, spec.cols, half_width);
  }
  std::vector<std::vector<double>> spectra(spec.rank);
  for (auto& s : spectra) {
    s.resize(spec.bands);
    for (auto& v : s) v = rng.uniform();
  }

  HsiCube cube(spec.rows, spec.cols, spec.bands, 0.0);
  for (int k = 0; k < spec.rank; ++k)
    for (int b = 0; b < spec.bands; ++b) {
      const double w = spectra[k][b];
      for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
          cube.at(r, c, b) += w * maps[k][static_cast<std::size_t>(r) * spec.cols + c];
    }

  const double mx = cube.max_value();
  if (mx > 0.0)
    for (auto& v : cube.data) v /= mx;
  return cube;
}

MaskCube gen_dead_region_mask(int rows, int cols, int bands, int r0, int c0,
                              int height, int width) {
  if (height < 0 || width < 0 || r0 < 0 || c0 < 0 || r0 + height > rows ||
      c0 + width > cols)
    throw std::invalid_argument("gen_dead_region_mask: region out of bounds");
  MaskCube mask(rows, cols, bands, 1);
  for (int b = 0; b < bands; ++b)
    for (int r = r0; r < r0 + height; ++r)
      for (int c = c0; c < c0 + width; ++c) mask.at(r, c, b) = 0;
  return mask;
}

MaskCube gen_random_pixel_mask(int rows, int cols, int bands, double fraction,
                               std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("gen_random_pixel_mask: fraction must be in [0, 1]");
  const long pixels = static_cast<long>(rows) * cols;
  const long dead = static_cast<long>(std::floor(fraction * pixels));
  std::vector<long> sites(pixels);
  std::iota(sites.begin(), sites.end(), 0L);
  Rng rng(Rng::derive(seed, 0x3a));
  for (long i = 0; i < dead; ++i) {
    const long j = i + static_cast<long>(rng.raw() % static_cast<std::uint64_t>(pixels - i));
    std::swap(sites[i], sites[j]);
  }
  MaskCube mask(rows, cols, bands, 1);
  for (long i = 0; i < dead; ++i) {
    const int r = static_cast<int>(sites[i] / cols);
    const int c = static_cast<int>(sites[i] % cols);
    for (int b = 0; b < bands; ++b) mask.at(r, c, b) = 0;
  }
  return mask;
}

HsiCube add_gaussian_noise(const HsiCube& cube, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
  HsiCube out = cube;
  if (sigma == 0.0) return out;
  Rng rng(Rng::derive(seed, 0x7e));
  for (auto& v : out.data) v += sigma * rng.normal();
  return out;
}

}  // namespace lrs
