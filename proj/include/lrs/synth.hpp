#pragma once

#include <cstdint>

#include "lrs/cube.hpp"

namespace lrs {

struct SynthSpec {
  int rows = 32;
  int cols = 32;
  int bands = 16;
  int rank = 4;
  double abundance_smoothness = 2.0;  // moving-average half-width in pixels
  std::uint64_t seed = 0;
  double noise_sigma = 0.12;
};

// Sum of rank smooth nonnegative abundance maps times nonnegative endmember
// spectra, scaled by 1/max so values land in [0, 1] without disturbing the
// matricized rank. Deterministic per seed.
HsiCube gen_lowrank_cube(const SynthSpec& spec);

// Zeros an r0..r0+height x c0..c0+width rectangle in every band.
MaskCube gen_dead_region_mask(int rows, int cols, int bands, int r0, int c0,
                              int height, int width);

// Zeros floor(fraction*rows*cols) spatial sites across all bands.
MaskCube gen_random_pixel_mask(int rows, int cols, int bands, double fraction,
                               std::uint64_t seed);

// cube + i.i.d. N(0, sigma^2), every voxel. Deterministic per seed.
HsiCube add_gaussian_noise(const HsiCube& cube, double sigma, std::uint64_t seed);

}  // namespace lrs
