#include "lrs/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lrs/io.hpp"
#include "lrs/operators.hpp"
#include "lrs/rng.hpp"

namespace lrs {
namespace {

double lasso_objective(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& patches,
                       const Eigen::MatrixXd& codes, double lambda) {
  const double fit = 0.5 * (patches - phi * codes).squaredNorm();
  return (fit + lambda * codes.cwiseAbs().sum()) / static_cast<double>(patches.cols());
}

// Worst-case KKT violation of the LASSO stationarity conditions.
double optimality_residual(const Eigen::VectorXd& code, const Eigen::VectorXd& grad,
                           double lambda) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < code.size(); ++i) {
    const double g = grad(i);
    const double v = code(i) != 0.0 ? std::abs(g + lambda * (code(i) > 0 ? 1.0 : -1.0))
                                    : std::max(std::abs(g) - lambda, 0.0);
    worst = std::max(worst, v);
  }
  return worst;
}

// Incoherence-greedy (farthest point) pick of initial atoms from the
// normalized patch columns; remainder filled with random unit vectors.
Eigen::MatrixXd init_atoms(const Eigen::MatrixXd& patches, int n_atoms, Rng& rng) {
  const Eigen::Index dim = patches.rows();
  std::vector<Eigen::Index> usable;
  for (Eigen::Index j = 0; j < patches.cols(); ++j)
    if (patches.col(j).norm() > 1e-12) usable.push_back(j);

  Eigen::MatrixXd atoms(dim, n_atoms);
  int filled = 0;
  if (!usable.empty()) {
    Eigen::Index best = usable[0];
    for (Eigen::Index j : usable)
      if (patches.col(j).norm() > patches.col(best).norm()) best = j;
    atoms.col(filled++) = patches.col(best).normalized();
    std::vector<Eigen::Index> remaining;
    for (Eigen::Index j : usable)
      if (j != best) remaining.push_back(j);
    while (filled < n_atoms && !remaining.empty()) {
      double best_score = 2.0;
      std::size_t pick = 0;
      for (std::size_t k = 0; k < remaining.size(); ++k) {
        const Eigen::VectorXd cand = patches.col(remaining[k]).normalized();
        double max_coh = 0.0;
        for (int a = 0; a < filled; ++a)
          max_coh = std::max(max_coh, std::abs(cand.dot(atoms.col(a))));
        if (max_coh < best_score) {
          best_score = max_coh;
          pick = k;
        }
      }
      atoms.col(filled++) = patches.col(remaining[pick]).normalized();
      remaining.erase(remaining.begin() + static_cast<long>(pick));
    }
  }
  for (; filled < n_atoms; ++filled) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.normal();
    atoms.col(filled) = v.norm() > 0 ? v.normalized() : Eigen::VectorXd::Unit(dim, 0);
  }
  return atoms;
}

// Warm-started ISTA over selected columns; monotone per column.
void code_columns(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& patches,
                  Eigen::MatrixXd& codes, const std::vector<Eigen::Index>& cols,
                  double lambda, double step, int iters, double tol) {
  for (Eigen::Index j : cols) {
    Eigen::VectorXd a = codes.col(j);
    for (int it = 0; it < iters; ++it) {
      const Eigen::VectorXd grad = phi.transpose() * (phi * a - patches.col(j));
      a = soft_threshold(Eigen::VectorXd(a - step * grad), step * lambda);
      if (optimality_residual(a, Eigen::VectorXd(phi.transpose() * (phi * a - patches.col(j))),
                              lambda) <= tol)
        break;
    }
    codes.col(j) = a;
  }
}

}  // namespace

double Dictionary::operator_norm() const {
  if (norm_cache_ < 0.0) norm_cache_ = spectral_norm(atoms);
  return norm_cache_;
}

IstaResult ista_lasso(const Eigen::VectorXd& target, const Dictionary& dict,
                      double l1_weight, int max_iter, double tol) {
  if (target.size() != dict.atoms.rows())
    throw std::invalid_argument("ista_lasso: target dim does not match atom dim");
  if (l1_weight < 0.0) throw std::invalid_argument("ista_lasso: l1_weight must be >= 0");
  const double norm2 = dict.operator_norm();
  const double step = norm2 > 0 ? 1.0 / (norm2 * norm2) : 1.0;

  IstaResult res;
  res.code = Eigen::VectorXd::Zero(dict.atoms.cols());
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    const Eigen::VectorXd grad = dict.atoms.transpose() * (dict.atoms * res.code - target);
    res.code = soft_threshold(Eigen::VectorXd(res.code - step * grad), step * l1_weight);
    const Eigen::VectorXd g = dict.atoms.transpose() * (dict.atoms * res.code - target);
    res.optimality_residual = optimality_residual(res.code, g, l1_weight);
    if (res.optimality_residual <= tol) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  return res;
}

DictLearnResult learn_dictionary(const Eigen::MatrixXd& patches,
                                 const DictLearnConfig& cfg) {
  if (cfg.n_atoms < 1) throw std::invalid_argument("learn_dictionary: n_atoms must be >= 1");
  if (patches.cols() < 1 || patches.norm() <= 0.0)
    throw std::invalid_argument("learn_dictionary: need at least one nonzero patch");

  Rng rng(Rng::derive(cfg.seed, 0xd1));
  Eigen::MatrixXd phi = init_atoms(patches, cfg.n_atoms, rng);

  double lambda = cfg.sparsity_weight;
  if (lambda <= 0.0) lambda = 0.1 * (phi.transpose() * patches).cwiseAbs().maxCoeff();

  const Eigen::Index n_patches = patches.cols();
  Eigen::MatrixXd codes = Eigen::MatrixXd::Zero(cfg.n_atoms, n_patches);

  DictLearnResult out;
  std::vector<Eigen::Index> order(n_patches);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index batch =
      cfg.batch_size > 0 ? std::min<Eigen::Index>(cfg.batch_size, n_patches) : n_patches;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.raw() % i]);

    const double norm2 = spectral_norm(phi);
    const double step = norm2 > 0 ? 1.0 / (norm2 * norm2) : 1.0;

    for (Eigen::Index start = 0; start < n_patches; start += batch) {
      std::vector<Eigen::Index> cols(
          order.begin() + start,
          order.begin() + std::min<Eigen::Index>(start + batch, n_patches));
      code_columns(phi, patches, codes, cols, lambda, step, cfg.ista_iters, cfg.ista_tol);
    }

    // Per-atom exact block update over the full residual, projected onto the
    // unit ball (keeps the objective non-increasing with codes fixed).
    Eigen::MatrixXd residual = patches - phi * codes;
    for (int a = 0; a < cfg.n_atoms; ++a) {
      const Eigen::VectorXd row = codes.row(a).transpose();
      const double rn2 = row.squaredNorm();
      if (rn2 <= 0.0) continue;
      residual += phi.col(a) * row.transpose();
      Eigen::VectorXd atom = (residual * row) / rn2;
      const double n = atom.norm();
      if (n > 1.0) atom /= n;
      phi.col(a) = atom;
      residual -= phi.col(a) * row.transpose();
    }

    // Restore unit norms; rescaling the code row keeps Phi*A identical and
    // can only shrink the l1 term.
    for (int a = 0; a < cfg.n_atoms; ++a) {
      const double n = phi.col(a).norm();
      if (n <= 1e-12) continue;
      if (std::abs(n - 1.0) > 1e-15) {
        phi.col(a) /= n;
        codes.row(a) *= n;
      }
    }

    // Re-seed dead atoms from the worst-reconstructed patch.
    residual = patches - phi * codes;
    for (int a = 0; a < cfg.n_atoms; ++a) {
      if (codes.row(a).cwiseAbs().maxCoeff() > 0.0 && phi.col(a).norm() > 1e-12) continue;
      Eigen::Index worst = 0;
      residual.colwise().norm().maxCoeff(&worst);
      if (residual.col(worst).norm() > 1e-12)
        phi.col(a) = residual.col(worst).normalized();
      else {
        Eigen::VectorXd v(phi.rows());
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
        phi.col(a) = v.normalized();
      }
      codes.row(a).setZero();
    }

    out.epoch_objective.push_back(lasso_objective(phi, patches, codes, lambda));
  }

  out.dict.atoms = std::move(phi);
  out.sparsity_weight = lambda;
  return out;
}

DictLearnResult learn_dictionary(const Eigen::MatrixXd& patches, int n_atoms,
                                 double sparsity_weight, int epochs,
                                 std::uint64_t seed) {
  DictLearnConfig cfg;
  cfg.n_atoms = n_atoms;
  cfg.sparsity_weight = sparsity_weight;
  cfg.epochs = epochs;
  cfg.seed = seed;
  return learn_dictionary(patches, cfg);
}

int default_atom_count(int patch_dim) {
  if (patch_dim == 1296) return 2000;
  return static_cast<int>(std::lround(1.5 * patch_dim));
}

Eigen::MatrixXd select_training_patches(const HsiCube& y, const MaskCube& mask,
                                        const PatchLayout& layout) {
  if (!mask.same_shape(y))
    throw std::invalid_argument("select_training_patches: mask/cube shape mismatch");
  const Eigen::MatrixXd patches = extract_patches(y, layout);
  const Eigen::MatrixXd mp = extract_patches(mask_to_cube(mask), layout);
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < mp.cols(); ++j)
    if (mp.col(j).minCoeff() >= 1.0) cols.push_back(j);
  if (cols.empty()) return patches;
  Eigen::MatrixXd out(patches.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(k) = patches.col(cols[k]);
  return out;
}

Dictionary load_dictionary(const std::string& path) {
  Dictionary d;
  d.atoms = load_matrix(path);
  for (Eigen::Index j = 0; j < d.atoms.cols(); ++j) {
    const double n = d.atoms.col(j).norm();
    if (std::abs(n - 1.0) > 1e-3)
      throw std::runtime_error("load_dictionary: column " + std::to_string(j) +
                               " is not unit norm");
    d.atoms.col(j) /= n;
  }
  return d;
}

void save_dictionary(const Dictionary& dict, const std::string& path) {
  save_matrix(dict.atoms, path);
}

}  // namespace lrs
