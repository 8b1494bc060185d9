// Isolates the two prior branches outside the ADMM loop.
#include <cstdio>
#include <string>
#include <vector>

#include "lrs/diagnostics.hpp"
#include "lrs/solver.hpp"
#include "lrs/synth.hpp"

using namespace lrs;

namespace {

// Columns of `patches` whose mask bits are all valid.
std::vector<Eigen::Index> valid_columns(const MaskCube& mask, const PatchLayout& layout) {
  const Eigen::MatrixXd mp = extract_patches(mask_to_cube(mask), layout);
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < mp.cols(); ++j)
    if (mp.col(j).minCoeff() >= 1.0) cols.push_back(j);
  return cols;
}

void split_mse(const HsiCube& x, const HsiCube& clean, const MaskCube& mask,
               double* valid_mse, double* hole_mse) {
  double sv = 0.0, sh = 0.0;
  std::size_t nv = 0, nh = 0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - clean.data[i];
    if (mask.bits[i]) {
      sv += d * d;
      ++nv;
    } else {
      sh += d * d;
      ++nh;
    }
  }
  *valid_mse = sv / std::max<std::size_t>(nv, 1);
  *hole_mse = sh / std::max<std::size_t>(nh, 1);
}

}  // namespace

int main(int argc, char** argv) {
  const int stride = argc > 1 ? std::atoi(argv[1]) : 1;
  const int psize = argc > 2 ? std::atoi(argv[2]) : 8;

  SynthSpec spec;
  spec.rows = 32;
  spec.cols = 32;
  spec.bands = 16;
  spec.rank = 4;
  spec.seed = 1;
  const HsiCube clean = gen_lowrank_cube(spec);
  const MaskCube mask = gen_dead_region_mask(32, 32, 16, 10, 10, 10, 10);
  const HsiCube y = add_gaussian_noise(apply_mask(clean, mask), 0.12, 1001);
  const double peak = clean.max_value();
  double vm, hm;
  split_mse(y, clean, mask, &vm, &hm);
  std::printf("corrupted      : %6.2f dB  valid %.4f hole %.4f\n",
              mpsnr(y, clean, peak), vm, hm);

  const PatchLayout layout = PatchLayout::sliding(psize, psize, stride, stride);
  const Eigen::MatrixXd patches = extract_patches(y, layout);
  const std::vector<Eigen::Index> vcols = valid_columns(mask, layout);
  std::printf("patches %ld, fully valid %zu\n", patches.cols(), vcols.size());

  Eigen::MatrixXd train(patches.rows(), vcols.size());
  for (std::size_t k = 0; k < vcols.size(); ++k) train.col(k) = patches.col(vcols[k]);
  DictLearnConfig dcfg;
  dcfg.n_atoms = default_atom_count(layout.patch_dim());
  dcfg.epochs = 10;
  dcfg.seed = 1;
  const Dictionary dict = learn_dictionary(train, dcfg).dict;
  const HsiCube cov = patch_coverage(layout, 32, 32, 16);

  for (double lam : {0.1, 0.2, 0.3, 0.5, 0.8}) {
    Eigen::MatrixXd rec(layout.patch_dim(), patches.cols());
    for (Eigen::Index j = 0; j < patches.cols(); ++j) {
      const IstaResult r = ista_lasso(patches.col(j), dict, lam, 200, 1e-6);
      rec.col(j) = dict.atoms * r.code;
    }
    HsiCube avg = assemble_patches(rec, layout, 32, 32, 16);
    for (std::size_t i = 0; i < avg.data.size(); ++i) avg.data[i] /= cov.data[i];
    split_mse(avg, clean, mask, &vm, &hm);
    std::printf("lasso lam=%.2f : %6.2f dB  valid %.4f hole %.4f\n", lam,
                mpsnr(avg, clean, peak), vm, hm);
  }
  return 0;
}
