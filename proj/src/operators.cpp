#include "lrs/operators.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

namespace lrs {

double soft_threshold(double v, double t) {
  if (t < 0.0) throw std::invalid_argument("soft_threshold: negative threshold");
  const double m = std::abs(v) - t;
  return m > 0.0 ? (v > 0.0 ? m : -m) : 0.0;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  if (t < 0.0) throw std::invalid_argument("soft_threshold: negative threshold");
  return v.unaryExpr([t](double x) {
    const double m = std::abs(x) - t;
    return m > 0.0 ? (x > 0.0 ? m : -m) : 0.0;
  });
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& v, double t) {
  if (t < 0.0) throw std::invalid_argument("soft_threshold: negative threshold");
  return v.unaryExpr([t](double x) {
    const double m = std::abs(x) - t;
    return m > 0.0 ? (x > 0.0 ? m : -m) : 0.0;
  });
}

Eigen::MatrixXd svt(const Eigen::MatrixXd& mat, double t) {
  if (t < 0.0) throw std::invalid_argument("svt: negative threshold");
  if (!mat.allFinite()) throw std::invalid_argument("svt: non-finite input");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::max(s(i) - t, 0.0);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

double spectral_norm(const Eigen::MatrixXd& a, int max_iter, double tol) {
  if (a.size() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(a.cols()).normalized();
  double sigma2 = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = a.transpose() * (a * v);
    const double n = w.norm();
    if (n <= 0.0) return 0.0;
    w /= n;
    const double prev = sigma2;
    sigma2 = n;
    v = w;
    if (it > 0 && std::abs(sigma2 - prev) <= tol * std::max(1.0, sigma2)) break;
  }
  return std::sqrt(sigma2);
}

LinearDenoiser build_dsg_nlm(const Eigen::MatrixXd& guide, int patch_radius,
                             int search_radius, double bandwidth) {
  if (patch_radius < 1 || search_radius < 1)
    throw std::invalid_argument("build_dsg_nlm: radii must be >= 1");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("build_dsg_nlm: bandwidth must be > 0");
  const int rows = static_cast<int>(guide.rows());
  const int cols = static_cast<int>(guide.cols());
  const int n = rows * cols;
  const double h2 = bandwidth * bandwidth;

  auto pix = [&](int r, int c) {
    return guide(std::clamp(r, 0, rows - 1), std::clamp(c, 0, cols - 1));
  };
  auto patch_dist2 = [&](int r1, int c1, int r2, int c2) {
    double acc = 0.0;
    int cnt = 0;
    for (int dr = -patch_radius; dr <= patch_radius; ++dr)
      for (int dc = -patch_radius; dc <= patch_radius; ++dc) {
        const double d = pix(r1 + dr, c1 + dc) - pix(r2 + dr, c2 + dc);
        acc += d * d;
        ++cnt;
      }
    return acc / cnt;
  };

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      for (int dr = -search_radius; dr <= search_radius; ++dr)
        for (int dc = -search_radius; dc <= search_radius; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
          w(i, rr * cols + cc) = std::exp(-patch_dist2(r, c, rr, cc) / h2);
        }
    }
  if (!w.allFinite()) throw std::invalid_argument("build_dsg_nlm: degenerate guide");

  w = 0.5 * (w + w.transpose());

  // Symmetric Sinkhorn scaling to doubly stochastic. The positive diagonal
  // (self weight exp(0)=1) guarantees support.
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd rsum = w.rowwise().sum();
    if ((rsum.array() - 1.0).abs().maxCoeff() < 1e-10) break;
    const Eigen::VectorXd d = rsum.cwiseSqrt().cwiseInverse();
    w = d.asDiagonal() * w * d.asDiagonal();
  }

  LinearDenoiser den;
  den.theta = 0.5;
  den.weights = 0.5 * (w + Eigen::MatrixXd::Identity(n, n));
  return den;
}

Eigen::MatrixXd grad_f(const SparseCode& alpha, const Dictionary& dict,
                       const Eigen::MatrixXd& z, double mu1) {
  if (alpha.rows() != dict.atoms.cols() || z.rows() != dict.atoms.rows() ||
      alpha.cols() != z.cols())
    throw std::invalid_argument("grad_f: shape mismatch");
  return mu1 * (dict.atoms.transpose() * (dict.atoms * alpha - z));
}

SparseCode pnp_ista_step(const SparseCode& alpha, const PnpDenoiser& denoiser,
                         const Dictionary& dict, const Eigen::MatrixXd& z,
                         double mu1, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("pnp_ista_step: eta must be > 0");
  const double norm = dict.operator_norm();
  const double beta = mu1 * norm * norm;
  if (beta > 0.0 && eta > 2.0 / beta * (1.0 + 1e-12))
    throw std::invalid_argument("pnp_ista_step: eta exceeds 2/beta");
  const Eigen::MatrixXd inner = alpha - eta * grad_f(alpha, dict, z, mu1);
  if (!inner.allFinite()) throw std::invalid_argument("pnp_ista_step: non-finite iterate");
  switch (denoiser.kind) {
    case PnpDenoiser::Kind::SoftThreshold:
      return soft_threshold(inner, eta * denoiser.sparsity_weight);
    case PnpDenoiser::Kind::LinearCode:
      if (!denoiser.linear || denoiser.linear->dim() != inner.rows())
        throw std::invalid_argument("pnp_ista_step: denoiser dim does not match codes");
      return denoiser.linear->apply_columns(inner);
    case PnpDenoiser::Kind::LinearPatch: {
      if (!denoiser.linear || denoiser.linear->dim() != dict.atoms.rows())
        throw std::invalid_argument("pnp_ista_step: denoiser dim does not match patches");
      return dict.atoms.transpose() * denoiser.linear->apply_columns(dict.atoms * inner);
    }
  }
  throw std::logic_error("pnp_ista_step: unknown denoiser kind");
}

}  // namespace lrs
