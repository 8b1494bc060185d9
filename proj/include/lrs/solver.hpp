#pragma once

#include <cstdint>
#include <vector>

#include "lrs/cube.hpp"
#include "lrs/dictionary.hpp"
#include "lrs/dip.hpp"
#include "lrs/operators.hpp"
#include "lrs/trace.hpp"

namespace lrs {

enum class Variant { LrsPnp, LrsPnpDip, LrsPnpDip1Lip };
enum class DenoiserChoice { SoftThreshold, DsgNlm };
enum class DenoiserDomain { Code, Patch };

struct SolverConfig {
  double gamma = 0.5;            // data fidelity weight
  double w_s = 1.0;              // sparsity weight
  double w_lr = 1.0;             // low-rank weight
  double mu1_0 = 1.0, mu2_0 = 1.0;
  double rho1 = 1.02, rho2 = 1.02;  // penalty growth; 1 = fixed
  double mu_cap = 1e6;
  int max_outer = 200;
  int inner_ista = 10;           // sparse-coding steps per outer iteration
  double tol_x = 1e-4;           // relative successive-difference stop
  Variant variant = Variant::LrsPnp;
  DenoiserChoice denoiser = DenoiserChoice::SoftThreshold;
  DenoiserDomain denoiser_domain = DenoiserDomain::Code;
  int nlm_patch_radius = 1;
  int nlm_search_radius = 5;
  double nlm_bandwidth = 0.5;
  std::vector<int> dip_widths = {16, 32};
  double dip_lr = 0.1;
  int dip_inner_steps = 10;
  bool dip_skip_connections = false;
  int wmv_window = 20;
  int wmv_patience = 100;
  std::uint64_t seed = 0;
  bool record_iterates = true;
  PatchLayout layout{};  // patch_rows == 0 selects per-band-slice for the cube
};

// ADMM iterate bundle.
struct SolverState {
  HsiCube x, u;
  SparseCode alpha;          // n_atoms x n_patches
  Eigen::MatrixXd lambda1;   // patch_dim x n_patches
  HsiCube lambda2;
  double mu1 = 1.0, mu2 = 1.0;
  int iteration = 0;
};

struct RunResult {
  HsiCube x;
  Trace trace;
};

// it_max plug-and-play ISTA steps on z = extract(x) + lambda1/mu1, step 1/beta.
SparseCode alpha_update(const SolverState& state, const Dictionary& dict,
                        const PnpDenoiser& denoiser, int it_max,
                        const PatchLayout& layout);

// dematricize(svt(matricize(x + lambda2/mu2), w_lr/mu2)).
HsiCube u_update_svt(const SolverState& state, double w_lr);

struct DipUpdateResult {
  HsiCube u;
  double last_loss = 0.0;  // NaN when no step ran
  int steps_run = 0;
};

// Trains on input x + lambda2/mu2 against target y (masked loss) for up to
// inner_steps (fewer once the WMV stopper has fired), then returns the
// forward pass.
DipUpdateResult u_update_dip(const SolverState& state, DipNetwork& net, AdamState& adam,
                             WmvStopper& stopper, const HsiCube& y, const MaskCube& mask,
                             int inner_steps);

// Elementwise solve of the diagonal normal equations:
// x = (gamma*m + mu1*coverage + mu2)^-1
//     (gamma*m.*y + mu1*assemble(Phi alpha) + mu2*u - assemble(lambda1) - lambda2).
HsiCube x_update(const SolverState& state, const HsiCube& y, const MaskCube& mask,
                 const Dictionary& dict, const SolverConfig& config,
                 const PatchLayout& layout, const HsiCube& coverage);

// lambda1 += mu1*(extract(x) - Phi alpha); lambda2 += mu2*(x - u).
void multiplier_update(SolverState& state, const Dictionary& dict,
                       const PatchLayout& layout);

// Geometric growth clamped at cap; rho < 1 rejected.
void penalty_update(SolverState& state, double rho1, double rho2, double cap = 1e6);

RunResult run_lrs_pnp(const HsiCube& y, const MaskCube& mask, const Dictionary& dict,
                      const SolverConfig& config, const HsiCube* truth = nullptr);
RunResult run_lrs_pnp_dip(const HsiCube& y, const MaskCube& mask, const Dictionary& dict,
                          const SolverConfig& config, const HsiCube* truth = nullptr);

// Guide vector arranged on a near-square grid (code-domain NLM guides).
Eigen::MatrixXd vector_to_grid(const Eigen::VectorXd& v);

}  // namespace lrs
