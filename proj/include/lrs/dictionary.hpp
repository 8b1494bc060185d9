#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrs/cube.hpp"

namespace lrs {

// Atom matrix with unit-norm columns. Treated as immutable once built; the
// operator norm is cached on first use.
struct Dictionary {
  Eigen::MatrixXd atoms;  // atom_dim x n_atoms

  int atom_dim() const { return static_cast<int>(atoms.rows()); }
  int n_atoms() const { return static_cast<int>(atoms.cols()); }
  double operator_norm() const;  // largest singular value

 private:
  mutable double norm_cache_ = -1.0;
};

// Coefficient matrix, n_atoms x n_patches; column i codes patch i.
using SparseCode = Eigen::MatrixXd;

struct IstaResult {
  Eigen::VectorXd code;
  bool converged = false;
  int iterations = 0;
  double optimality_residual = 0.0;
};

// Reference LASSO solver: min 1/2||p - Phi a||^2 + l1_weight*||a||_1,
// fixed step 1/||Phi||_2^2, stopped on the subgradient optimality residual.
// Non-convergence is reported through the flag, not an error.
IstaResult ista_lasso(const Eigen::VectorXd& target, const Dictionary& dict,
                      double l1_weight, int max_iter = 2000, double tol = 1e-8);

struct DictLearnConfig {
  int n_atoms = 0;
  double sparsity_weight = -1.0;  // <= 0 selects 0.1*max|Phi0^T P|
  int epochs = 30;
  int batch_size = 0;  // 0 = all patches per batch
  std::uint64_t seed = 0;
  int ista_iters = 100;
  double ista_tol = 1e-7;
};

struct DictLearnResult {
  Dictionary dict;
  std::vector<double> epoch_objective;  // mean 1/2||p-Phi a||^2 + lambda||a||_1
  double sparsity_weight = 0.0;         // weight actually used
};

// Self-supervised learning from patch columns: warm-started ISTA coding,
// per-atom least-squares update projected onto the unit ball, epoch-end
// renormalization (codes rescaled so Phi*A is unchanged), dead atoms
// re-seeded from the worst-reconstructed patch.
DictLearnResult learn_dictionary(const Eigen::MatrixXd& patches,
                                 const DictLearnConfig& cfg);
DictLearnResult learn_dictionary(const Eigen::MatrixXd& patches, int n_atoms,
                                 double sparsity_weight, int epochs,
                                 std::uint64_t seed);

// Default atom count for a given patch dim (2000 at the native 1296,
// otherwise 1.5x).
int default_atom_count(int patch_dim);

// Training patches for self-supervised learning: columns whose mask bits are
// all valid when any such patch exists, otherwise every patch as observed.
Eigen::MatrixXd select_training_patches(const HsiCube& y, const MaskCube& mask,
                                        const PatchLayout& layout);

// Dictionary persisted in the matrix container (bands = 1). Columns are
// renormalized on load (f32 payload cannot hold exact unit norms).
Dictionary load_dictionary(const std::string& path);
void save_dictionary(const Dictionary& dict, const std::string& path);

}  // namespace lrs
