#include "lrs/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

#include "lrs/rng.hpp"

namespace lrs {

namespace {
constexpr double kPsnrCap = 120.0;
constexpr double kMseFloor = 1e-12;
}  // namespace

double mpsnr(const HsiCube& x, const HsiCube& truth, double peak) {
  if (!truth.same_shape(x)) throw std::invalid_argument("mpsnr: shape mismatch");
  if (!(peak > 0.0)) throw std::invalid_argument("mpsnr: peak must be > 0");
  const std::size_t band_size = static_cast<std::size_t>(x.rows) * x.cols;
  double acc = 0.0;
  for (int b = 0; b < x.bands; ++b) {
    double mse = 0.0;
    for (std::size_t i = 0; i < band_size; ++i) {
      const double d = x.data[b * band_size + i] - truth.data[b * band_size + i];
      mse += d * d;
    }
    mse /= static_cast<double>(band_size);
    const double psnr =
        mse < kMseFloor ? kPsnrCap : 10.0 * std::log10(peak * peak / mse);
    acc += std::min(psnr, kPsnrCap);
  }
  return acc / x.bands;
}

double mssim(const HsiCube& x, const HsiCube& truth, double peak, int window) {
  if (!truth.same_shape(x)) throw std::invalid_argument("mssim: shape mismatch");
  if (window < 1 || window > x.rows || window > x.cols)
    throw std::invalid_argument("mssim: window too large");
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const int wr = x.rows / window;
  const int wc = x.cols / window;
  const double n = static_cast<double>(window) * window;
  double acc_bands = 0.0;
  for (int b = 0; b < x.bands; ++b) {
    double acc = 0.0;
    for (int i = 0; i < wr; ++i)
      for (int j = 0; j < wc; ++j) {
        double mx = 0.0, my = 0.0;
        for (int r = 0; r < window; ++r)
          for (int c = 0; c < window; ++c) {
            mx += x.at(i * window + r, j * window + c, b);
            my += truth.at(i * window + r, j * window + c, b);
          }
        mx /= n;
        my /= n;
        double vx = 0.0, vy = 0.0, cov = 0.0;
        for (int r = 0; r < window; ++r)
          for (int c = 0; c < window; ++c) {
            const double dx = x.at(i * window + r, j * window + c, b) - mx;
            const double dy = truth.at(i * window + r, j * window + c, b) - my;
            vx += dx * dx;
            vy += dy * dy;
            cov += dx * dy;
          }
        vx /= n;
        vy /= n;
        cov /= n;
        acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    acc_bands += acc / (static_cast<double>(wr) * wc);
  }
  return acc_bands / x.bands;
}

ThetaCheck check_theta_averaged(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                                int dim, double theta, int n_pairs, std::uint64_t seed,
                                double slack) {
  if (!(theta > 0.0 && theta < 1.0))
    throw std::invalid_argument("check_theta_averaged: theta must be in (0,1)");
  Rng rng(Rng::derive(seed, 0x7a));
  const double c = (1.0 - theta) / theta;
  ThetaCheck res;
  res.worst_margin = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < n_pairs; ++p) {
    Eigen::VectorXd x(dim), y(dim);
    for (int i = 0; i < dim; ++i) x(i) = rng.normal();
    for (int i = 0; i < dim; ++i) y(i) = rng.normal();
    const Eigen::VectorXd tx = op(x);
    const Eigen::VectorXd ty = op(y);
    const double lhs = (tx - ty).squaredNorm();
    const double rhs =
        (x - y).squaredNorm() - c * ((x - tx) - (y - ty)).squaredNorm();
    res.worst_margin = std::max(res.worst_margin, lhs - rhs);
  }
  res.pass = res.worst_margin <= slack;
  return res;
}

ConvexityModuli convexity_moduli(const Dictionary& dict, double mu1) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dict.atoms);
  const Eigen::VectorXd s = svd.singularValues();
  ConvexityModuli m;
  m.beta = mu1 * s(0) * s(0);
  // Smallest singular value of Phi as a map on code space: zero whenever the
  // code dimension exceeds the patch dimension.
  const double smin =
      dict.atoms.cols() > dict.atoms.rows() ? 0.0 : s(s.size() - 1);
  m.rho = mu1 * smin * smin;
  m.contraction_condition = m.rho > m.beta / 2.0;
  return m;
}

LyapunovTrace lyapunov_trace(const Trace& trace, double mu, bool force) {
  if (trace.snapshots.size() < 2)
    throw std::invalid_argument("lyapunov_trace: trace lacks iterate snapshots");
  if (!trace.fixed_penalties() && !force)
    throw std::invalid_argument(
        "lyapunov_trace: penalties are not fixed (rho != 1); pass force to override");
  if (!(mu > 0.0)) throw std::invalid_argument("lyapunov_trace: mu must be > 0");

  const Trace::Snapshot& ref = trace.snapshots.back();
  LyapunovTrace out;
  const double inv_mu2 = 1.0 / (mu * mu);
  for (const Trace::Snapshot& s : trace.snapshots) {
    double tx = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double d = s.x[i] - ref.x[i];
      tx += d * d;
    }
    double tl2 = 0.0;
    for (std::size_t i = 0; i < s.lambda2.size(); ++i) {
      const double d = s.lambda2[i] - ref.lambda2[i];
      tl2 += d * d;
    }
    const double tl1 = (s.lambda1 - ref.lambda1).squaredNorm();
    out.term_x.push_back(2.0 * tx);
    out.term_l1.push_back(inv_mu2 * tl1);
    out.term_l2.push_back(inv_mu2 * tl2);
    out.h.push_back(out.term_x.back() + out.term_l1.back() + out.term_l2.back());
  }
  out.h0 = out.h.front();
  out.slack = 1e-6 * out.h0;

  out.max_positive_jump = 0.0;
  for (std::size_t k = 0; k + 1 < out.h.size(); ++k)
    out.max_positive_jump = std::max(out.max_positive_jump, out.h[k + 1] - out.h[k]);

  out.first_nonincreasing_index = -1;
  for (std::size_t start = 0; start < out.h.size(); ++start) {
    bool ok = true;
    for (std::size_t k = start; k + 1 < out.h.size(); ++k)
      if (out.h[k + 1] > out.h[k] + out.slack) {
        ok = false;
        break;
      }
    if (ok) {
      out.first_nonincreasing_index = static_cast<int>(start);
      break;
    }
  }
  return out;
}

Eigen::VectorXd singular_spectrum(const HsiCube& x) {
  if (!x.all_finite()) throw std::invalid_argument("singular_spectrum: non-finite cube");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(matricize(x));
  return svd.singularValues();
}

}  // namespace lrs
