#pragma once

#include <Eigen/Dense>

#include "lrs/dictionary.hpp"

namespace lrs {

double soft_threshold(double v, double t);
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t);
Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& v, double t);

// Singular value soft-thresholding (full SVD, desk-scale matrices).
Eigen::MatrixXd svt(const Eigen::MatrixXd& mat, double t);

// Largest singular value by power iteration on A^T A.
double spectral_norm(const Eigen::MatrixXd& a, int max_iter = 200, double tol = 1e-12);

// Symmetric, doubly stochastic, theta-averaged linear filter; weights are
// fixed at construction.
struct LinearDenoiser {
  Eigen::MatrixXd weights;
  double theta = 0.5;

  int dim() const { return static_cast<int>(weights.rows()); }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return weights * v; }
  Eigen::MatrixXd apply_columns(const Eigen::MatrixXd& m) const { return weights * m; }
};

// NLM similarity weights from a fixed guide image, symmetrized, Sinkhorn
// balanced to doubly stochastic, then (W+I)/2 so theta = 1/2 holds by
// construction.
LinearDenoiser build_dsg_nlm(const Eigen::MatrixXd& guide, int patch_radius,
                             int search_radius, double bandwidth);

// Gradient of f(alpha) = mu1/2 sum_i ||z_i - Phi alpha_i||^2, columnwise.
Eigen::MatrixXd grad_f(const SparseCode& alpha, const Dictionary& dict,
                       const Eigen::MatrixXd& z, double mu1);

// Denoiser plugged into the sparse-coding iteration. SoftThreshold shrinks by
// eta*sparsity_weight (classic ISTA); Linear applies the certified filter to
// code columns, or to patches (denoise Phi*alpha, re-encode by Phi^T) in
// patch-domain mode.
struct PnpDenoiser {
  enum class Kind { SoftThreshold, LinearCode, LinearPatch };
  Kind kind = Kind::SoftThreshold;
  double sparsity_weight = 1.0;
  const LinearDenoiser* linear = nullptr;

  static PnpDenoiser make_soft(double w_s) { return {Kind::SoftThreshold, w_s, nullptr}; }
  static PnpDenoiser make_linear_code(const LinearDenoiser& d) {
    return {Kind::LinearCode, 0.0, &d};
  }
  static PnpDenoiser make_linear_patch(const LinearDenoiser& d) {
    return {Kind::LinearPatch, 0.0, &d};
  }
};

// One plug-and-play ISTA step: D(alpha - eta * grad_f(alpha)).
SparseCode pnp_ista_step(const SparseCode& alpha, const PnpDenoiser& denoiser,
                         const Dictionary& dict, const Eigen::MatrixXd& z,
                         double mu1, double eta);

}  // namespace lrs
