#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrs/cube.hpp"

namespace lrs {

// Per-iteration record of a solver run. Relative successive differences are
// ||v_k - v_{k-1}|| / max(||v_{k-1}||, eps). Snapshots (including the initial
// state at index 0) are kept when requested so convergence diagnostics can be
// computed after the fact.
struct Trace {
  enum class Status { Converged, MaxIterations, Diverged };

  struct Snapshot {
    std::vector<double> x;
    std::vector<double> u;
    Eigen::MatrixXd alpha;
    Eigen::MatrixXd lambda1;
    std::vector<double> lambda2;
  };

  Status status = Status::MaxIterations;
  int iterations = 0;
  std::vector<double> dx, dlambda1, dlambda2;
  std::vector<double> mpsnr;     // NaN when no truth given
  std::vector<double> dip_loss;  // NaN for SVT-based runs
  std::vector<double> obj_fidelity, obj_nuclear, obj_sparsity;
  std::vector<double> h;  // Lyapunov values, filled post-run when applicable
  std::vector<Snapshot> snapshots;

  // Penalty schedule metadata, used to gate the Lyapunov computation.
  double mu1_0 = 1.0, mu2_0 = 1.0, rho1 = 1.0, rho2 = 1.0;
  bool fixed_penalties() const { return rho1 == 1.0 && rho2 == 1.0; }
};

// Columns: iter, dx, dlambda1, dlambda2, mpsnr, H, dip_loss (blank when not
// available).
void write_trace_csv(const Trace& trace, const std::string& path);

}  // namespace lrs
