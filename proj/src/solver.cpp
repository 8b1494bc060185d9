#include "lrs/solver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lrs/diagnostics.hpp"

namespace lrs {
namespace {

constexpr double kTiny = 1e-30;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double cube_norm(const HsiCube& c) {
  double acc = 0.0;
  for (double v : c.data) acc += v * v;
  return std::sqrt(acc);
}

double cube_diff_norm(const HsiCube& a, const HsiCube& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

HsiCube shifted_latent(const SolverState& state) {
  HsiCube z = state.x;
  for (std::size_t i = 0; i < z.data.size(); ++i)
    z.data[i] += state.lambda2.data[i] / state.mu2;
  return z;
}

bool state_finite(const SolverState& state) {
  return state.x.all_finite() && state.u.all_finite() && state.alpha.allFinite() &&
         state.lambda1.allFinite() && state.lambda2.all_finite() &&
         std::isfinite(state.mu1) && std::isfinite(state.mu2);
}

}  // namespace

SparseCode alpha_update(const SolverState& state, const Dictionary& dict,
                        const PnpDenoiser& denoiser, int it_max,
                        const PatchLayout& layout) {
  if (it_max < 0) throw std::invalid_argument("alpha_update: it_max must be >= 0");
  SparseCode alpha = state.alpha;
  if (it_max == 0) return alpha;
  Eigen::MatrixXd z = extract_patches(state.x, layout);
  z += state.lambda1 / state.mu1;
  const double norm = dict.operator_norm();
  const double beta = state.mu1 * norm * norm;
  const double eta = beta > 0.0 ? 1.0 / beta : 1.0;
  for (int it = 0; it < it_max; ++it)
    alpha = pnp_ista_step(alpha, denoiser, dict, z, state.mu1, eta);
  return alpha;
}

HsiCube u_update_svt(const SolverState& state, double w_lr) {
  if (!(state.mu2 > 0.0)) throw std::invalid_argument("u_update_svt: mu2 must be > 0");
  const HsiCube z = shifted_latent(state);
  const Eigen::MatrixXd shrunk = svt(matricize(z), w_lr / state.mu2);
  return dematricize(shrunk, z.rows, z.cols, z.bands);
}

DipUpdateResult u_update_dip(const SolverState& state, DipNetwork& net, AdamState& adam,
                             WmvStopper& stopper, const HsiCube& y, const MaskCube& mask,
                             int inner_steps) {
  const HsiCube z = shifted_latent(state);
  DipUpdateResult res;
  res.last_loss = kNaN;
  for (int s = 0; s < inner_steps && !stopper.triggered(); ++s) {
    res.last_loss = net.train_step(adam, z, y, mask);
    ++res.steps_run;
    stopper.push(res.last_loss);
  }
  res.u = net.forward(z);
  return res;
}

HsiCube x_update(const SolverState& state, const HsiCube& y, const MaskCube& mask,
                 const Dictionary& dict, const SolverConfig& config,
                 const PatchLayout& layout, const HsiCube& coverage) {
  const Eigen::MatrixXd recon = dict.atoms * state.alpha;
  const HsiCube recon_cube = assemble_patches(recon, layout, y.rows, y.cols, y.bands);
  const HsiCube lambda1_cube =
      assemble_patches(state.lambda1, layout, y.rows, y.cols, y.bands);
  HsiCube x(y.rows, y.cols, y.bands);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double m = mask.bits[i] ? 1.0 : 0.0;
    const double diag = config.gamma * m + state.mu1 * coverage.data[i] + state.mu2;
    if (diag <= 0.0) throw std::runtime_error("x_update: zero diagonal entry");
    const double rhs = config.gamma * m * y.data[i] + state.mu1 * recon_cube.data[i] +
                       state.mu2 * state.u.data[i] - lambda1_cube.data[i] -
                       state.lambda2.data[i];
    x.data[i] = rhs / diag;
  }
  return x;
}

void multiplier_update(SolverState& state, const Dictionary& dict,
                       const PatchLayout& layout) {
  const Eigen::MatrixXd residual =
      extract_patches(state.x, layout) - dict.atoms * state.alpha;
  state.lambda1 += state.mu1 * residual;
  for (std::size_t i = 0; i < state.lambda2.data.size(); ++i)
    state.lambda2.data[i] += state.mu2 * (state.x.data[i] - state.u.data[i]);
}

void penalty_update(SolverState& state, double rho1, double rho2, double cap) {
  if (rho1 < 1.0 || rho2 < 1.0)
    throw std::invalid_argument("penalty_update: rho must be >= 1");
  state.mu1 = std::min(state.mu1 * rho1, cap);
  state.mu2 = std::min(state.mu2 * rho2, cap);
}

Eigen::MatrixXd vector_to_grid(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  int rows = 1;
  for (int d = static_cast<int>(std::sqrt(static_cast<double>(n))); d >= 1; --d)
    if (n % d == 0) {
      rows = d;
      break;
    }
  const int cols = n / rows;
  Eigen::MatrixXd grid(rows, cols);
  for (int i = 0; i < n; ++i) grid(i / cols, i % cols) = v(i);
  return grid;
}

namespace {

RunResult run_admm(const HsiCube& y, const MaskCube& mask, const Dictionary& dict,
                   SolverConfig config, const HsiCube* truth) {
  if (!mask.same_shape(y)) throw std::invalid_argument("run: mask/cube shape mismatch");
  if (truth && !truth->same_shape(y))
    throw std::invalid_argument("run: truth/cube shape mismatch");

  // The convergence-certified preset pins the assumptions: fixed penalties,
  // certified linear denoiser, spectrally normalized DIP.
  if (config.variant == Variant::LrsPnpDip1Lip) {
    config.rho1 = config.rho2 = 1.0;
    config.denoiser = DenoiserChoice::DsgNlm;
  }

  PatchLayout layout = config.layout;
  if (layout.patch_rows == 0) layout = PatchLayout::per_band_slice(y.rows, y.cols);
  validate_layout(layout, y.rows, y.cols);
  if (dict.atom_dim() != layout.patch_dim())
    throw std::invalid_argument("run: dictionary atom dim " +
                                std::to_string(dict.atom_dim()) +
                                " does not match patch dim " +
                                std::to_string(layout.patch_dim()));
  if (!(config.gamma > 0.0) || config.w_s < 0.0 || config.w_lr < 0.0 ||
      !(config.mu1_0 > 0.0) || !(config.mu2_0 > 0.0))
    throw std::invalid_argument("run: invalid weights/penalties");

  const HsiCube coverage = patch_coverage(layout, y.rows, y.cols, y.bands);
  const int n_patches = layout_patch_count(layout, y.rows, y.cols, y.bands);

  SolverState state;
  state.x = y;
  state.u = y;
  state.alpha = SparseCode::Zero(dict.n_atoms(), n_patches);
  state.lambda1 = Eigen::MatrixXd::Zero(layout.patch_dim(), n_patches);
  state.lambda2 = HsiCube(y.rows, y.cols, y.bands, 0.0);
  state.mu1 = config.mu1_0;
  state.mu2 = config.mu2_0;

  // Denoiser setup. The DSG-NLM guide is fixed up front: mean |code| of the
  // initial patches in code domain, the mean band image in patch domain.
  LinearDenoiser linear;
  PnpDenoiser denoiser = PnpDenoiser::make_soft(config.w_s);
  if (config.denoiser == DenoiserChoice::DsgNlm) {
    Eigen::MatrixXd guide;
    if (config.denoiser_domain == DenoiserDomain::Code) {
      const Eigen::MatrixXd a0 =
          dict.atoms.transpose() * extract_patches(y, layout);
      guide = vector_to_grid(a0.cwiseAbs().rowwise().mean());
    } else {
      Eigen::VectorXd mean_band =
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(y.rows) * y.cols);
      for (int b = 0; b < y.bands; ++b)
        for (int r = 0; r < y.rows; ++r)
          for (int c = 0; c < y.cols; ++c)
            mean_band(static_cast<Eigen::Index>(r) * y.cols + c) += y.at(r, c, b);
      mean_band /= y.bands;
      guide = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>(mean_band.data(), y.rows, y.cols);
    }
    linear = build_dsg_nlm(guide, config.nlm_patch_radius, config.nlm_search_radius,
                           config.nlm_bandwidth);
    denoiser = config.denoiser_domain == DenoiserDomain::Code
                   ? PnpDenoiser::make_linear_code(linear)
                   : PnpDenoiser::make_linear_patch(linear);
  }

  const bool use_dip =
      config.variant == Variant::LrsPnpDip || config.variant == Variant::LrsPnpDip1Lip;
  DipNetwork::Config net_cfg;
  net_cfg.rows = y.rows;
  net_cfg.cols = y.cols;
  net_cfg.bands = y.bands;
  net_cfg.widths = config.dip_widths;
  net_cfg.lipschitz_constrained = config.variant == Variant::LrsPnpDip1Lip;
  net_cfg.skip_connections = config.dip_skip_connections;
  net_cfg.seed = config.seed;
  DipNetwork net = use_dip ? DipNetwork::encoder_decoder(net_cfg)
                           : DipNetwork(1, 1, 1, {DipNetwork::LayerSpec::conv(1, 1)}, false, 0);
  AdamState adam;
  adam.lr = config.dip_lr;
  WmvStopper stopper{config.wmv_window, config.wmv_patience};

  Trace trace;
  trace.mu1_0 = config.mu1_0;
  trace.mu2_0 = config.mu2_0;
  trace.rho1 = config.rho1;
  trace.rho2 = config.rho2;

  auto snapshot = [&]() {
    if (!config.record_iterates) return;
    Trace::Snapshot s;
    s.x = state.x.data;
    s.u = state.u.data;
    s.alpha = state.alpha;
    s.lambda1 = state.lambda1;
    s.lambda2 = state.lambda2.data;
    trace.snapshots.push_back(std::move(s));
  };
  snapshot();

  const double truth_peak = truth ? truth->max_value() : 0.0;
  trace.status = Trace::Status::MaxIterations;

  for (int k = 1; k <= config.max_outer; ++k) {
    const HsiCube x_prev = state.x;
    const Eigen::MatrixXd l1_prev = state.lambda1;
    const HsiCube l2_prev = state.lambda2;

    // Numerical blowup inside an update aborts the run but keeps the trace.
    try {
      state.alpha = alpha_update(state, dict, denoiser, config.inner_ista, layout);
      double dip_loss = kNaN;
      if (use_dip) {
        const DipUpdateResult ur =
            u_update_dip(state, net, adam, stopper, y, mask, config.dip_inner_steps);
        state.u = ur.u;
        dip_loss = ur.last_loss;
      } else {
        state.u = u_update_svt(state, config.w_lr);
      }
      state.x = x_update(state, y, mask, dict, config, layout, coverage);
      multiplier_update(state, dict, layout);
      penalty_update(state, config.rho1, config.rho2, config.mu_cap);
      state.iteration = k;

      trace.iterations = k;
      trace.dip_loss.push_back(dip_loss);
    } catch (const std::exception&) {
      trace.status = Trace::Status::Diverged;
      break;
    }

    trace.dx.push_back(cube_diff_norm(state.x, x_prev) / std::max(cube_norm(x_prev), kTiny));
    trace.dlambda1.push_back((state.lambda1 - l1_prev).norm() /
                             std::max(l1_prev.norm(), kTiny));
    trace.dlambda2.push_back(cube_diff_norm(state.lambda2, l2_prev) /
                             std::max(cube_norm(l2_prev), kTiny));

    if (!state_finite(state)) {
      trace.status = Trace::Status::Diverged;
      break;
    }

    trace.mpsnr.push_back(truth ? mpsnr(state.x, *truth, truth_peak) : kNaN);
    double fid = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      const double m = mask.bits[i] ? 1.0 : 0.0;
      const double d = y.data[i] - m * state.x.data[i];
      fid += d * d;
    }
    trace.obj_fidelity.push_back(config.gamma * fid);
    trace.obj_nuclear.push_back(config.w_lr * singular_spectrum(state.u).sum());
    trace.obj_sparsity.push_back(config.w_s * state.alpha.cwiseAbs().sum());

    snapshot();

    if (trace.dx.back() < config.tol_x) {
      trace.status = Trace::Status::Converged;
      break;
    }
  }

  return RunResult{state.x, std::move(trace)};
}

}  // namespace

RunResult run_lrs_pnp(const HsiCube& y, const MaskCube& mask, const Dictionary& dict,
                      const SolverConfig& config, const HsiCube* truth) {
  SolverConfig cfg = config;
  cfg.variant = Variant::LrsPnp;
  return run_admm(y, mask, dict, cfg, truth);
}

RunResult run_lrs_pnp_dip(const HsiCube& y, const MaskCube& mask, const Dictionary& dict,
                          const SolverConfig& config, const HsiCube* truth) {
  SolverConfig cfg = config;
  if (cfg.variant == Variant::LrsPnp) cfg.variant = Variant::LrsPnpDip;
  return run_admm(y, mask, dict, cfg, truth);
}

}  // namespace lrs
