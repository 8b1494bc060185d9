// Command-line surface: synth, learn-dict, inpaint, diagnose, metrics.
#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "lrs/diagnostics.hpp"
#include "lrs/dictionary.hpp"
#include "lrs/io.hpp"
#include "lrs/solver.hpp"
#include "lrs/synth.hpp"

namespace fs = std::filesystem;
using namespace lrs;

namespace {

constexpr const char* kVersion = "0.1.0";

// Plain key=value config support: file entries become --key=value tokens
// inserted right before the command-line ones, so explicit flags win
// (options use the take-last policy) and unknown keys fail the parse.
std::vector<std::string> expand_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty() || args.empty()) return args;

  std::ifstream f(config_path);
  if (!f) throw std::runtime_error("cannot open config file: " + config_path);
  std::vector<std::string> file_tokens;
  std::string line;
  while (std::getline(f, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line is not key=value: " + line);
    std::string key = line.substr(first, eq - first);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    if (key == "config") throw std::runtime_error("config files cannot nest");
    file_tokens.push_back("--" + key + "=" + line.substr(eq + 1));
  }
  std::vector<std::string> out;
  out.push_back(args[0]);  // subcommand
  out.insert(out.end(), file_tokens.begin(), file_tokens.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

using KvList = std::vector<std::pair<std::string, std::string>>;

void write_manifest(const fs::path& path, const std::string& subcommand, KvList kv) {
  std::sort(kv.begin(), kv.end());
  std::string body;
  for (const auto& [k, v] : kv) body += k + "=" + v + "\n";
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest: " + path.string());
  f << "# subcommand=" << subcommand << "\n";
  f << "# version=" << kVersion << "\n";
  f << "# config-hash=" << std::hex << fnv1a(body) << std::dec << "\n";
  f << body;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct LayoutOpts {
  std::string mode = "per-band-slice";
  int patch_rows = 0, patch_cols = 0, stride_rows = 1, stride_cols = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--patch-mode", mode)
        ->check(CLI::IsMember({"per-band-slice", "sliding"}));
    cmd->add_option("--patch-rows", patch_rows);
    cmd->add_option("--patch-cols", patch_cols);
    cmd->add_option("--stride-rows", stride_rows);
    cmd->add_option("--stride-cols", stride_cols);
  }
  PatchLayout resolve(int rows, int cols) const {
    if (mode == "per-band-slice") return PatchLayout::per_band_slice(rows, cols);
    if (patch_rows < 1 || patch_cols < 1)
      throw std::runtime_error("sliding mode requires --patch-rows/--patch-cols");
    return PatchLayout::sliding(patch_rows, patch_cols, stride_rows, stride_cols);
  }
  void manifest(KvList& kv) const {
    kv.emplace_back("patch-mode", mode);
    kv.emplace_back("patch-rows", std::to_string(patch_rows));
    kv.emplace_back("patch-cols", std::to_string(patch_cols));
    kv.emplace_back("stride-rows", std::to_string(stride_rows));
    kv.emplace_back("stride-cols", std::to_string(stride_cols));
  }
};

struct SolverOpts {
  double gamma = 0.5, w_s = 1.0, w_lr = 1.0;
  double mu1_0 = 1.0, mu2_0 = 1.0, rho1 = 1.02, rho2 = 1.02;
  int max_outer = 200, inner_ista = 10;
  double tol_x = 1e-4;
  std::string variant = "lrs-pnp";
  std::string denoiser = "soft-threshold";
  std::string denoiser_domain = "code";
  int nlm_patch_radius = 1, nlm_search_radius = 5;
  double nlm_bandwidth = 0.5;
  std::vector<int> dip_widths = {16, 32};
  double dip_lr = 0.1;
  int dip_inner_steps = 10;
  bool dip_skips = false;
  int wmv_window = 20, wmv_patience = 100;
  std::uint64_t seed = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--gamma", gamma);
    cmd->add_option("--w-s", w_s);
    cmd->add_option("--w-lr", w_lr);
    cmd->add_option("--mu1", mu1_0);
    cmd->add_option("--mu2", mu2_0);
    cmd->add_option("--rho1", rho1);
    cmd->add_option("--rho2", rho2);
    cmd->add_option("--max-outer", max_outer);
    cmd->add_option("--inner-ista", inner_ista);
    cmd->add_option("--tol-x", tol_x);
    cmd->add_option("--variant", variant)
        ->check(CLI::IsMember({"lrs-pnp", "lrs-pnp-dip", "lrs-pnp-dip-1lip"}));
    cmd->add_option("--denoiser", denoiser)
        ->check(CLI::IsMember({"soft-threshold", "dsg-nlm"}));
    cmd->add_option("--denoiser-domain", denoiser_domain)
        ->check(CLI::IsMember({"code", "patch"}));
    cmd->add_option("--nlm-patch-radius", nlm_patch_radius);
    cmd->add_option("--nlm-search-radius", nlm_search_radius);
    cmd->add_option("--nlm-bandwidth", nlm_bandwidth);
    cmd->add_option("--dip-widths", dip_widths)->delimiter(',');
    cmd->add_option("--dip-lr", dip_lr);
    cmd->add_option("--dip-inner-steps", dip_inner_steps);
    cmd->add_flag("--dip-skips", dip_skips);
    cmd->add_option("--wmv-window", wmv_window);
    cmd->add_option("--wmv-patience", wmv_patience);
    cmd->add_option("--seed", seed);
  }

  SolverConfig resolve(const LayoutOpts& layout, int rows, int cols) const {
    SolverConfig cfg;
    cfg.gamma = gamma;
    cfg.w_s = w_s;
    cfg.w_lr = w_lr;
    cfg.mu1_0 = mu1_0;
    cfg.mu2_0 = mu2_0;
    cfg.rho1 = rho1;
    cfg.rho2 = rho2;
    cfg.max_outer = max_outer;
    cfg.inner_ista = inner_ista;
    cfg.tol_x = tol_x;
    cfg.variant = variant == "lrs-pnp"       ? Variant::LrsPnp
                  : variant == "lrs-pnp-dip" ? Variant::LrsPnpDip
                                             : Variant::LrsPnpDip1Lip;
    cfg.denoiser = denoiser == "soft-threshold" ? DenoiserChoice::SoftThreshold
                                                : DenoiserChoice::DsgNlm;
    cfg.denoiser_domain =
        denoiser_domain == "code" ? DenoiserDomain::Code : DenoiserDomain::Patch;
    cfg.nlm_patch_radius = nlm_patch_radius;
    cfg.nlm_search_radius = nlm_search_radius;
    cfg.nlm_bandwidth = nlm_bandwidth;
    cfg.dip_widths = dip_widths;
    cfg.dip_lr = dip_lr;
    cfg.dip_inner_steps = dip_inner_steps;
    cfg.dip_skip_connections = dip_skips;
    cfg.wmv_window = wmv_window;
    cfg.wmv_patience = wmv_patience;
    cfg.seed = seed;
    cfg.layout = layout.resolve(rows, cols);
    return cfg;
  }

  void manifest(KvList& kv) const {
    kv.emplace_back("gamma", fmt(gamma));
    kv.emplace_back("w-s", fmt(w_s));
    kv.emplace_back("w-lr", fmt(w_lr));
    kv.emplace_back("mu1", fmt(mu1_0));
    kv.emplace_back("mu2", fmt(mu2_0));
    kv.emplace_back("rho1", fmt(rho1));
    kv.emplace_back("rho2", fmt(rho2));
    kv.emplace_back("max-outer", std::to_string(max_outer));
    kv.emplace_back("inner-ista", std::to_string(inner_ista));
    kv.emplace_back("tol-x", fmt(tol_x));
    kv.emplace_back("variant", variant);
    kv.emplace_back("denoiser", denoiser);
    kv.emplace_back("denoiser-domain", denoiser_domain);
    kv.emplace_back("nlm-patch-radius", std::to_string(nlm_patch_radius));
    kv.emplace_back("nlm-search-radius", std::to_string(nlm_search_radius));
    kv.emplace_back("nlm-bandwidth", fmt(nlm_bandwidth));
    std::string widths;
    for (std::size_t i = 0; i < dip_widths.size(); ++i)
      widths += (i ? "," : "") + std::to_string(dip_widths[i]);
    kv.emplace_back("dip-widths", widths);
    kv.emplace_back("dip-lr", fmt(dip_lr));
    kv.emplace_back("dip-inner-steps", std::to_string(dip_inner_steps));
    if (dip_skips) kv.emplace_back("dip-skips", "true");
    kv.emplace_back("wmv-window", std::to_string(wmv_window));
    kv.emplace_back("wmv-patience", std::to_string(wmv_patience));
    kv.emplace_back("seed", std::to_string(seed));
  }
};

// ---------------------------------------------------------------- synth ----

struct SynthCmd {
  std::string out_dir;
  int rows = 32, cols = 32, bands = 16, rank = 4;
  double smoothness = 2.0, sigma = 0.12;
  std::uint64_t seed = 0;
  std::string mask_kind = "dead-region";
  int mask_row0 = -1, mask_col0 = -1, mask_height = 0, mask_width = 0;
  double mask_fraction = 0.25;

  int run() const {
    fs::create_directories(out_dir);
    SynthSpec spec;
    spec.rows = rows;
    spec.cols = cols;
    spec.bands = bands;
    spec.rank = rank;
    spec.abundance_smoothness = smoothness;
    spec.seed = seed;
    spec.noise_sigma = sigma;
    const HsiCube clean = gen_lowrank_cube(spec);

    MaskCube mask;
    if (mask_kind == "dead-region") {
      // Default: centered square covering ~10% of the pixels.
      int h = mask_height, w = mask_width, r0 = mask_row0, c0 = mask_col0;
      if (h <= 0 || w <= 0) {
        h = w = std::max(1, static_cast<int>(std::lround(0.316 * std::min(rows, cols))));
      }
      if (r0 < 0) r0 = (rows - h) / 2;
      if (c0 < 0) c0 = (cols - w) / 2;
      mask = gen_dead_region_mask(rows, cols, bands, r0, c0, h, w);
    } else {
      mask = gen_random_pixel_mask(rows, cols, bands, mask_fraction, seed);
    }

    // Observation model: noise lands everywhere, including dead pixels.
    const HsiCube corrupted = add_gaussian_noise(apply_mask(clean, mask), sigma, seed);

    const fs::path dir(out_dir);
    save_cube(clean, (dir / "clean.hsic").string());
    save_mask(mask, (dir / "mask.mask").string());
    save_cube(corrupted, (dir / "corrupted.hsic").string());

    KvList kv;
    kv.emplace_back("out-dir", out_dir);
    kv.emplace_back("rows", std::to_string(rows));
    kv.emplace_back("cols", std::to_string(cols));
    kv.emplace_back("bands", std::to_string(bands));
    kv.emplace_back("rank", std::to_string(rank));
    kv.emplace_back("smoothness", fmt(smoothness));
    kv.emplace_back("sigma", fmt(sigma));
    kv.emplace_back("seed", std::to_string(seed));
    kv.emplace_back("mask-kind", mask_kind);
    kv.emplace_back("mask-row0", std::to_string(mask_row0));
    kv.emplace_back("mask-col0", std::to_string(mask_col0));
    kv.emplace_back("mask-height", std::to_string(mask_height));
    kv.emplace_back("mask-width", std::to_string(mask_width));
    kv.emplace_back("mask-fraction", fmt(mask_fraction));
    write_manifest(dir / "manifest.txt", "synth", kv);
    std::cout << "wrote clean.hsic, mask.mask, corrupted.hsic, manifest.txt to "
              << out_dir << "\n";
    return 0;
  }
};

// ----------------------------------------------------------- learn-dict ----

struct LearnDictCmd {
  std::string input, mask_path, out;
  int n_atoms = 0;
  double sparsity_weight = -1.0;
  int epochs = 30, batch_size = 0;
  std::uint64_t seed = 0;
  LayoutOpts layout;

  int run() const {
    const HsiCube y = load_cube(input);
    const PatchLayout lay = layout.resolve(y.rows, y.cols);
    Eigen::MatrixXd patches;
    if (!mask_path.empty()) {
      patches = select_training_patches(y, load_mask(mask_path), lay);
    } else {
      patches = extract_patches(y, lay);
    }
    DictLearnConfig cfg;
    cfg.n_atoms = n_atoms > 0 ? n_atoms : default_atom_count(lay.patch_dim());
    cfg.sparsity_weight = sparsity_weight;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    const DictLearnResult res = learn_dictionary(patches, cfg);
    if (!out.empty()) {
      if (const fs::path parent = fs::path(out).parent_path(); !parent.empty())
        fs::create_directories(parent);
      save_dictionary(res.dict, out);
    }
    std::cout << "dictionary " << res.dict.atom_dim() << "x" << res.dict.n_atoms()
              << ", sparsity weight " << res.sparsity_weight
              << ", final objective " << res.epoch_objective.back() << "\n";

    KvList kv;
    kv.emplace_back("input", input);
    if (!mask_path.empty()) kv.emplace_back("mask", mask_path);
    kv.emplace_back("out", out);
    kv.emplace_back("n-atoms", std::to_string(cfg.n_atoms));
    kv.emplace_back("sparsity-weight", fmt(sparsity_weight));
    kv.emplace_back("epochs", std::to_string(epochs));
    kv.emplace_back("batch-size", std::to_string(batch_size));
    kv.emplace_back("seed", std::to_string(seed));
    layout.manifest(kv);
    write_manifest(fs::path(out).string() + ".manifest.txt", "learn-dict", kv);
    return 0;
  }
};

// -------------------------------------------------------------- inpaint ----

struct InpaintCmd {
  std::string input, mask_path, dict_path, truth_path, out_dir;
  LayoutOpts layout;
  SolverOpts solver;
  bool no_pgm = false;

  int run() const {
    const HsiCube y = load_cube(input);
    const MaskCube mask = load_mask(mask_path);
    const Dictionary dict = load_dictionary(dict_path);
    HsiCube truth;
    const bool have_truth = !truth_path.empty();
    if (have_truth) truth = load_cube(truth_path);

    const SolverConfig cfg = solver.resolve(layout, y.rows, y.cols);
    const RunResult run = cfg.variant == Variant::LrsPnp
                              ? run_lrs_pnp(y, mask, dict, cfg, have_truth ? &truth : nullptr)
                              : run_lrs_pnp_dip(y, mask, dict, cfg,
                                                have_truth ? &truth : nullptr);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    save_cube(run.x, (dir / "inpainted.hsic").string());

    Trace trace = run.trace;
    if (cfg.variant == Variant::LrsPnpDip1Lip && trace.fixed_penalties() &&
        trace.mu1_0 == trace.mu2_0 && !trace.snapshots.empty()) {
      trace.h = lyapunov_trace(trace, trace.mu1_0).h;
    }
    write_trace_csv(trace, (dir / "trace.csv").string());

    if (!no_pgm) {
      fs::create_directories(dir / "bands");
      for (int b = 0; b < run.x.bands; ++b) {
        char name[32];
        std::snprintf(name, sizeof(name), "band_%03d.pgm", b);
        export_band_pgm(run.x, b, (dir / "bands" / name).string());
      }
    }

    if (have_truth) {
      const double peak = truth.max_value();
      const double psnr = mpsnr(run.x, truth, peak);
      const double ssim = mssim(run.x, truth, peak);
      std::cout << "MPSNR " << psnr << " dB, MSSIM " << ssim << "\n";
      std::ofstream mf(dir / "metrics.txt");
      mf << "mpsnr_db=" << psnr << "\nmssim=" << ssim << "\n";
    }

    KvList kv;
    kv.emplace_back("input", input);
    kv.emplace_back("mask", mask_path);
    kv.emplace_back("dict", dict_path);
    if (have_truth) kv.emplace_back("truth", truth_path);
    kv.emplace_back("out-dir", out_dir);
    if (no_pgm) kv.emplace_back("no-pgm", "true");
    layout.manifest(kv);
    solver.manifest(kv);
    write_manifest(dir / "manifest.txt", "inpaint", kv);

    switch (trace.status) {
      case Trace::Status::Converged:
        std::cout << "converged in " << trace.iterations << " iterations\n";
        return 0;
      case Trace::Status::MaxIterations:
        std::cout << "stopped at max iterations (" << trace.iterations << ")\n";
        return 2;
      case Trace::Status::Diverged:
        std::cout << "diverged at iteration " << trace.iterations << "\n";
        return 3;
    }
    return 1;
  }
};

// ------------------------------------------------------------- diagnose ----

struct DiagnoseCmd {
  std::string input, mask_path, dict_path, truth_path, out_dir;
  LayoutOpts layout;
  SolverOpts solver;
  int lipschitz_train_steps = 100;

  int run() const {
    const HsiCube y = load_cube(input);
    const MaskCube mask = load_mask(mask_path);
    const Dictionary dict = load_dictionary(dict_path);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    std::ofstream report(dir / "report.txt");
    auto line = [&](bool pass, const std::string& what, const std::string& detail) {
      const std::string s = std::string(pass ? "PASS" : "FAIL") + " " + what +
                            (detail.empty() ? "" : " (" + detail + ")");
      std::cout << s << "\n";
      report << s << "\n";
    };

    // Certified preset setup mirrors the solver.
    SolverOpts certified = solver;
    certified.variant = "lrs-pnp-dip-1lip";
    certified.rho1 = certified.rho2 = 1.0;
    certified.denoiser = "dsg-nlm";
    SolverConfig cfg = certified.resolve(layout, y.rows, y.cols);

    // 1) theta-averagedness of the DSG-NLM the preset would use.
    const Eigen::MatrixXd a0 = dict.atoms.transpose() * extract_patches(y, cfg.layout);
    const Eigen::MatrixXd guide = vector_to_grid(a0.cwiseAbs().rowwise().mean());
    const LinearDenoiser den =
        build_dsg_nlm(guide, cfg.nlm_patch_radius, cfg.nlm_search_radius, cfg.nlm_bandwidth);
    const ThetaCheck tc = check_theta_averaged(
        [&](const Eigen::VectorXd& v) { return den.apply(v); }, den.dim(), 0.5, 100,
        cfg.seed, 1e-8);
    line(tc.pass, "theta-averaged denoiser (theta=1/2, 100 pairs)",
         "worst margin " + fmt(tc.worst_margin));

    // 2) smoothness / strong convexity moduli of the sparse-coding objective.
    const ConvexityModuli cm = convexity_moduli(dict, cfg.mu1_0);
    line(true, "beta-smooth sparse-coding gradient", "beta " + fmt(cm.beta));
    line(cm.contraction_condition, "strong-convexity rho > beta/2",
         "rho " + fmt(cm.rho) + ", beta " + fmt(cm.beta));

    // 3) Lipschitz bound of the spectrally normalized DIP under training.
    DipNetwork::Config nc;
    nc.rows = y.rows;
    nc.cols = y.cols;
    nc.bands = y.bands;
    nc.widths = cfg.dip_widths;
    nc.lipschitz_constrained = true;
    nc.seed = cfg.seed;
    DipNetwork net = DipNetwork::encoder_decoder(nc);
    AdamState adam;
    adam.lr = cfg.dip_lr;
    double worst_l = 0.0;
    for (int s = 0; s < lipschitz_train_steps; ++s) {
      net.train_step(adam, y, y, mask);
      if (s % 10 == 9 || s + 1 == lipschitz_train_steps)
        worst_l = std::max(worst_l, net.estimate_lipschitz(20, cfg.seed + s));
    }
    line(worst_l <= 1.0 + 1e-2, "dip lipschitz bound <= 1+1e-2 under training",
         "worst estimate " + fmt(worst_l));

    // 4) certified mini-run: Lyapunov monotonicity after burn-in.
    HsiCube truth;
    const bool have_truth = !truth_path.empty();
    if (have_truth) truth = load_cube(truth_path);
    const RunResult run =
        run_lrs_pnp_dip(y, mask, dict, cfg, have_truth ? &truth : nullptr);
    const LyapunovTrace lt = lyapunov_trace(run.trace, cfg.mu1_0);
    line(lt.first_nonincreasing_index >= 0 && lt.first_nonincreasing_index <= 10,
         "lyapunov H non-increasing after burn-in <= 10",
         "first index " + std::to_string(lt.first_nonincreasing_index) +
             ", max jump " + fmt(lt.max_positive_jump));
    {
      std::ofstream lf(dir / "lyapunov.csv");
      lf << "k,H,term_x,term_lambda1,term_lambda2\n";
      for (std::size_t k = 0; k < lt.h.size(); ++k)
        lf << k << "," << lt.h[k] << "," << lt.term_x[k] << "," << lt.term_l1[k] << ","
           << lt.term_l2[k] << "\n";
    }
    Trace tr = run.trace;
    tr.h = lt.h;
    write_trace_csv(tr, (dir / "trace.csv").string());

    // 5) singular spectra of the observation and the reconstruction.
    {
      const Eigen::VectorXd sy = singular_spectrum(y);
      const Eigen::VectorXd sx = singular_spectrum(run.x);
      std::ofstream sf(dir / "spectrum.csv");
      sf << "index,observation,reconstruction\n";
      for (Eigen::Index i = 0; i < sy.size(); ++i)
        sf << i << "," << sy(i) << "," << sx(i) << "\n";
    }

    KvList kv;
    kv.emplace_back("input", input);
    kv.emplace_back("mask", mask_path);
    kv.emplace_back("dict", dict_path);
    if (have_truth) kv.emplace_back("truth", truth_path);
    kv.emplace_back("out-dir", out_dir);
    kv.emplace_back("lipschitz-train-steps", std::to_string(lipschitz_train_steps));
    layout.manifest(kv);
    solver.manifest(kv);
    write_manifest(dir / "manifest.txt", "diagnose", kv);
    return 0;
  }
};

// -------------------------------------------------------------- metrics ----

struct MetricsCmd {
  std::string a_path, b_path, out;
  double peak = 0.0;

  int run() const {
    const HsiCube a = load_cube(a_path);
    const HsiCube b = load_cube(b_path);
    const double p = peak > 0.0 ? peak : b.max_value();
    const double psnr = mpsnr(a, b, p);
    const double ssim = mssim(a, b, p);
    std::cout << "MPSNR " << psnr << " dB, MSSIM " << ssim << "\n";
    if (!out.empty()) {
      std::ofstream f(out);
      f << "mpsnr_db=" << psnr << "\nmssim=" << ssim << "\n";
    }
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised hyperspectral inpainting toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SynthCmd synth;
  auto* cs = app.add_subcommand("synth", "generate a synthetic cube, mask, observation");
  cs->add_option("--config", "key=value config file")->expected(1);
  cs->add_option("--out-dir", synth.out_dir)->required();
  cs->add_option("--rows", synth.rows);
  cs->add_option("--cols", synth.cols);
  cs->add_option("--bands", synth.bands);
  cs->add_option("--rank", synth.rank);
  cs->add_option("--smoothness", synth.smoothness);
  cs->add_option("--sigma", synth.sigma);
  cs->add_option("--seed", synth.seed);
  cs->add_option("--mask-kind", synth.mask_kind)
      ->check(CLI::IsMember({"dead-region", "random-pixels"}));
  cs->add_option("--mask-row0", synth.mask_row0);
  cs->add_option("--mask-col0", synth.mask_col0);
  cs->add_option("--mask-height", synth.mask_height);
  cs->add_option("--mask-width", synth.mask_width);
  cs->add_option("--mask-fraction", synth.mask_fraction);

  LearnDictCmd ld;
  auto* cl = app.add_subcommand("learn-dict", "learn a dictionary from an observation");
  cl->add_option("--config", "key=value config file")->expected(1);
  cl->add_option("--input", ld.input)->required();
  cl->add_option("--mask", ld.mask_path);
  cl->add_option("--out", ld.out)->required();
  cl->add_option("--n-atoms", ld.n_atoms);
  cl->add_option("--sparsity-weight", ld.sparsity_weight);
  cl->add_option("--epochs", ld.epochs);
  cl->add_option("--batch-size", ld.batch_size);
  cl->add_option("--seed", ld.seed);
  ld.layout.add_to(cl);

  InpaintCmd ip;
  auto* ci = app.add_subcommand("inpaint", "run an inpainting solve");
  ci->add_option("--config", "key=value config file")->expected(1);
  ci->add_option("--input", ip.input)->required();
  ci->add_option("--mask", ip.mask_path)->required();
  ci->add_option("--dict", ip.dict_path)->required();
  ci->add_option("--truth", ip.truth_path);
  ci->add_option("--out-dir", ip.out_dir)->required();
  ci->add_flag("--no-pgm", ip.no_pgm);
  ip.layout.add_to(ci);
  ip.solver.add_to(ci);

  DiagnoseCmd dg;
  auto* cd = app.add_subcommand("diagnose", "run the assumption and convergence suite");
  cd->add_option("--config", "key=value config file")->expected(1);
  cd->add_option("--input", dg.input)->required();
  cd->add_option("--mask", dg.mask_path)->required();
  cd->add_option("--dict", dg.dict_path)->required();
  cd->add_option("--truth", dg.truth_path);
  cd->add_option("--out-dir", dg.out_dir)->required();
  cd->add_option("--lipschitz-train-steps", dg.lipschitz_train_steps);
  dg.layout.add_to(cd);
  dg.solver.add_to(cd);

  MetricsCmd mx;
  auto* cm = app.add_subcommand("metrics", "compare two cubes");
  cm->add_option("--config", "key=value config file")->expected(1);
  cm->add_option("--a", mx.a_path)->required();
  cm->add_option("--b", mx.b_path)->required();
  cm->add_option("--peak", mx.peak);
  cm->add_option("--out", mx.out);

  try {
    const std::vector<std::string> args = expand_args(argc, argv);
    std::vector<const char*> cargs{argv[0]};
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (cs->parsed()) return synth.run();
    if (cl->parsed()) return ld.run();
    if (ci->parsed()) return ip.run();
    if (cd->parsed()) return dg.run();
    if (cm->parsed()) return mx.run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
