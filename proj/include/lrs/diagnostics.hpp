#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "lrs/cube.hpp"
#include "lrs/dictionary.hpp"
#include "lrs/trace.hpp"

namespace lrs {

// Mean over bands of 10*log10(peak^2 / band MSE); near-zero-MSE bands
// contribute the 120 dB cap.
double mpsnr(const HsiCube& x, const HsiCube& truth, double peak);

// Mean over bands of windowed SSIM (non-overlapping windows, population
// statistics, C1=(0.01*peak)^2, C2=(0.03*peak)^2).
double mssim(const HsiCube& x, const HsiCube& truth, double peak, int window = 8);

struct ThetaCheck {
  bool pass = false;
  double worst_margin = 0.0;  // max over pairs of LHS - RHS; pass iff <= slack
};

// Tests ||T(x)-T(y)||^2 <= ||x-y||^2 - (1-theta)/theta ||(I-T)x-(I-T)y||^2
// on random pairs.
ThetaCheck check_theta_averaged(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                                int dim, double theta, int n_pairs, std::uint64_t seed,
                                double slack = 1e-8);

struct ConvexityModuli {
  double beta = 0.0;  // mu1 * sigma_max(Phi)^2
  double rho = 0.0;   // mu1 * sigma_min(Phi)^2 over code space (0 when overcomplete)
  bool contraction_condition = false;  // rho > beta/2
};

ConvexityModuli convexity_moduli(const Dictionary& dict, double mu1);

struct LyapunovTrace {
  std::vector<double> h;        // 2||x_e||^2 + (||l1_e||^2 + ||l2_e||^2)/mu^2
  std::vector<double> term_x, term_l1, term_l2;
  double h0 = 0.0;
  double slack = 0.0;                  // 1e-6 * h0
  double max_positive_jump = 0.0;      // max_k H^{k+1} - H^k
  int first_nonincreasing_index = -1;  // first k with H non-increasing (within
                                       // slack) from k onwards; -1 if none
};

// H^k against the final iterate as reference. Requires snapshots and fixed
// penalties (rho = 1) unless forced; mu is the theorem's single penalty.
LyapunovTrace lyapunov_trace(const Trace& trace, double mu, bool force = false);

// Descending singular values of the matricized cube.
Eigen::VectorXd singular_spectrum(const HsiCube& x);

}  // namespace lrs
