#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>

#include "lrs/diagnostics.hpp"
#include "lrs/rng.hpp"
#include "lrs/solver.hpp"
#include "lrs/synth.hpp"

using namespace lrs;

namespace {

HsiCube random_cube(int rows, int cols, int bands, std::uint64_t seed) {
  Rng rng(seed);
  HsiCube c(rows, cols, bands);
  for (auto& v : c.data) v = rng.uniform();
  return c;
}

Dictionary unit_dictionary(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Dictionary d;
  d.atoms = Eigen::MatrixXd(rows, cols);
  for (Eigen::Index i = 0; i < d.atoms.size(); ++i) d.atoms(i) = rng.normal();
  for (int j = 0; j < cols; ++j) d.atoms.col(j).normalize();
  return d;
}

Dictionary orthonormal_dictionary(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(dim, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Dictionary d;
  d.atoms = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
  return d;
}

SolverState make_state(const HsiCube& x, const Dictionary& dict,
                       const PatchLayout& layout, double mu1, double mu2) {
  SolverState st;
  st.x = x;
  st.u = x;
  const int n_patches = layout_patch_count(layout, x.rows, x.cols, x.bands);
  st.alpha = SparseCode::Zero(dict.n_atoms(), n_patches);
  st.lambda1 = Eigen::MatrixXd::Zero(layout.patch_dim(), n_patches);
  st.lambda2 = HsiCube(x.rows, x.cols, x.bands, 0.0);
  st.mu1 = mu1;
  st.mu2 = mu2;
  return st;
}

}  // namespace

TEST_CASE("alpha_update") {
  const int rows = 4, cols = 4, bands = 3;
  const auto layout = PatchLayout::per_band_slice(rows, cols);
  const Dictionary dict = unit_dictionary(16, 24, 1);
  const HsiCube x = random_cube(rows, cols, bands, 2);

  SUBCASE("It_max = 0 leaves alpha unchanged") {
    SolverState st = make_state(x, dict, layout, 1.0, 1.0);
    st.alpha = SparseCode::Constant(24, 3, 0.7);
    const auto den = PnpDenoiser::make_soft(1.0);
    CHECK(alpha_update(st, dict, den, 0, layout) == st.alpha);
  }

  SUBCASE("soft-threshold denoiser converges to the per-patch LASSO oracle") {
    SolverState st = make_state(x, dict, layout, 1.3, 1.0);
    Rng rng(3);
    for (Eigen::Index i = 0; i < st.lambda1.size(); ++i) st.lambda1(i) = 0.1 * rng.normal();
    const double w_s = 0.2;
    const auto den = PnpDenoiser::make_soft(w_s);
    const SparseCode a = alpha_update(st, dict, den, 4000, layout);
    const Eigen::MatrixXd z =
        extract_patches(st.x, layout) + st.lambda1 / st.mu1;
    // Eq.-level oracle: per-patch LASSO with weights (mu1, w_s) equals the
    // standard problem with l1 weight w_s/mu1.
    for (int j = 0; j < 3; ++j) {
      const IstaResult ora = ista_lasso(z.col(j), dict, w_s / st.mu1, 20000, 1e-11);
      CHECK((a.col(j) - ora.code).cwiseAbs().maxCoeff() < 1e-5);
    }
  }

  SUBCASE("w_s = 0 with orthonormal dictionary reaches a perfect fit") {
    const Dictionary orth = orthonormal_dictionary(16, 4);
    SolverState st = make_state(x, orth, layout, 1.0, 1.0);
    const auto den = PnpDenoiser::make_soft(0.0);
    const SparseCode a = alpha_update(st, orth, den, 500, layout);
    const Eigen::MatrixXd z = extract_patches(st.x, layout);
    CHECK((orth.atoms * a - z).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("u_update_svt") {
  const int rows = 4, cols = 4, bands = 3;
  const auto layout = PatchLayout::per_band_slice(rows, cols);
  const Dictionary dict = unit_dictionary(16, 20, 5);
  HsiCube x = random_cube(rows, cols, bands, 6);

  SUBCASE("w_lr = 0 returns the shifted latent") {
    SolverState st = make_state(x, dict, layout, 1.0, 2.0);
    Rng rng(7);
    for (auto& v : st.lambda2.data) v = rng.normal();
    const HsiCube u = u_update_svt(st, 0.0);
    for (std::size_t i = 0; i < u.data.size(); ++i)
      CHECK(u.data[i] ==
            doctest::Approx(st.x.data[i] + st.lambda2.data[i] / st.mu2).epsilon(1e-10));
  }

  SUBCASE("threshold above sigma_max gives zero") {
    SolverState st = make_state(x, dict, layout, 1.0, 1.0);
    const double smax = singular_spectrum(st.x)(0);
    const HsiCube u = u_update_svt(st, smax + 1.0);
    for (double v : u.data) CHECK(v == 0.0);
  }

  SUBCASE("matches the compose-by-hand oracle") {
    SolverState st = make_state(x, dict, layout, 1.0, 1.7);
    Rng rng(8);
    for (auto& v : st.lambda2.data) v = 0.3 * rng.normal();
    const double w_lr = 0.8;
    const HsiCube u = u_update_svt(st, w_lr);
    // Oracle: matricize -> Jacobi SVD -> shrink -> rebuild.
    HsiCube z = st.x;
    for (std::size_t i = 0; i < z.data.size(); ++i)
      z.data[i] += st.lambda2.data[i] / st.mu2;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(matricize(z),
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i)
      s(i) = std::max(s(i) - w_lr / st.mu2, 0.0);
    const Eigen::MatrixXd expect =
        svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    const HsiCube eu = dematricize(expect, rows, cols, bands);
    for (std::size_t i = 0; i < u.data.size(); ++i)
      CHECK(u.data[i] == doctest::Approx(eu.data[i]).epsilon(1e-8));
  }
}

TEST_CASE("u_update_dip") {
  const int rows = 8, cols = 8, bands = 2;
  const auto layout = PatchLayout::per_band_slice(rows, cols);
  const Dictionary dict = unit_dictionary(64, 96, 9);
  const HsiCube x = random_cube(rows, cols, bands, 10);
  const HsiCube y = random_cube(rows, cols, bands, 11);
  const MaskCube mask(rows, cols, bands, 1);
  AdamState adam;
  WmvStopper stopper{20, 100};

  SUBCASE("frozen zero net gives u = 0") {
    SolverState st = make_state(x, dict, layout, 1.0, 1.0);
    DipNetwork net(rows, cols, bands, {DipNetwork::LayerSpec::conv(bands, 3)}, false, 12);
    std::fill(net.params().begin(), net.params().end(), 0.0);
    const DipUpdateResult r = u_update_dip(st, net, adam, stopper, y, mask, 0);
    CHECK(r.steps_run == 0);
    for (double v : r.u.data) CHECK(v == 0.0);
  }

  SUBCASE("frozen identity net returns the shifted latent") {
    SolverState st = make_state(x, dict, layout, 1.0, 2.0);
    Rng rng(13);
    for (auto& v : st.lambda2.data) v = rng.normal();
    DipNetwork net(rows, cols, bands, {DipNetwork::LayerSpec::conv(bands, 3)}, false, 14);
    auto& p = net.params();
    const auto& l = net.layers()[0];
    std::fill(p.begin(), p.end(), 0.0);
    for (int c = 0; c < bands; ++c)
      p[l.w_off + (static_cast<std::size_t>(c) * bands + c) * 9 + 4] = 1.0;
    const DipUpdateResult r = u_update_dip(st, net, adam, stopper, y, mask, 0);
    for (std::size_t i = 0; i < r.u.data.size(); ++i)
      CHECK(r.u.data[i] ==
            doctest::Approx(st.x.data[i] + st.lambda2.data[i] / st.mu2).epsilon(1e-12));
  }

  SUBCASE("training lowers the masked loss") {
    SolverState st = make_state(x, dict, layout, 1.0, 1.0);
    DipNetwork::Config cfg;
    cfg.rows = rows;
    cfg.cols = cols;
    cfg.bands = bands;
    cfg.widths = {4};
    cfg.seed = 15;
    DipNetwork net = DipNetwork::encoder_decoder(cfg);
    AdamState a2;
    a2.lr = 0.01;
    WmvStopper s2{20, 1000};
    double first = 0.0, last = 0.0;
    for (int outer = 0; outer < 10; ++outer) {
      const DipUpdateResult r = u_update_dip(st, net, a2, s2, y, mask, 5);
      if (outer == 0) first = r.last_loss;
      last = r.last_loss;
    }
    CHECK(last < first);
  }
}

TEST_CASE("x_update") {
  const int rows = 4, cols = 4, bands = 3;
  const auto layout = PatchLayout::per_band_slice(rows, cols);
  const Dictionary dict = unit_dictionary(16, 20, 16);
  const HsiCube coverage = patch_coverage(layout, rows, cols, bands);
  const HsiCube y = random_cube(rows, cols, bands, 17);
  const MaskCube ones(rows, cols, bands, 1);

  SolverConfig cfg;
  cfg.gamma = 0.5;

  SUBCASE("fidelity-only path returns y (gamma cancels)") {
    SolverState st = make_state(y, dict, layout, 0.0, 0.0);
    st.mu1 = 0.0;
    st.mu2 = 0.0;
    const HsiCube x = x_update(st, y, ones, dict, cfg, layout, coverage);
    for (std::size_t i = 0; i < x.data.size(); ++i)
      CHECK(x.data[i] == doctest::Approx(y.data[i]).epsilon(1e-12));
  }

  SUBCASE("gamma = 0 gives the convex combination of recon and u") {
    SolverState st = make_state(y, dict, layout, 2.0, 3.0);
    Rng rng(18);
    for (Eigen::Index i = 0; i < st.alpha.size(); ++i) st.alpha(i) = 0.2 * rng.normal();
    st.u = random_cube(rows, cols, bands, 19);
    SolverConfig c0 = cfg;
    c0.gamma = 1e-300;  // gamma must stay positive; vanishing weight
    const HsiCube x = x_update(st, y, ones, dict, c0, layout, coverage);
    const HsiCube recon =
        assemble_patches(dict.atoms * st.alpha, layout, rows, cols, bands);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      const double expect =
          (st.mu1 * recon.data[i] + st.mu2 * st.u.data[i]) / (st.mu1 + st.mu2);
      CHECK(x.data[i] == doctest::Approx(expect).epsilon(1e-10));
    }
  }

  SUBCASE("random instance matches the dense diagonal-system oracle") {
    // Overlapping spatial layout so coverage is non-trivial.
    const auto lay = PatchLayout::sliding(3, 3, 1, 1);
    Dictionary d9 = unit_dictionary(9, 14, 20);
    const HsiCube cov9 = patch_coverage(lay, rows, cols, bands);
    SolverState st = make_state(y, d9, lay, 1.4, 0.9);
    Rng rng(21);
    for (Eigen::Index i = 0; i < st.alpha.size(); ++i) st.alpha(i) = 0.3 * rng.normal();
    for (Eigen::Index i = 0; i < st.lambda1.size(); ++i) st.lambda1(i) = 0.2 * rng.normal();
    for (auto& v : st.lambda2.data) v = 0.1 * rng.normal();
    st.u = random_cube(rows, cols, bands, 22);
    MaskCube mask = gen_random_pixel_mask(rows, cols, bands, 0.3, 23);

    const HsiCube x = x_update(st, y, mask, d9, cfg, lay, cov9);

    // Dense oracle: build the diagonal system explicitly.
    const HsiCube recon = assemble_patches(d9.atoms * st.alpha, lay, rows, cols, bands);
    const HsiCube l1c = assemble_patches(st.lambda1, lay, rows, cols, bands);
    double max_resid = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      const double m = mask.bits[i] ? 1.0 : 0.0;
      const double a = cfg.gamma * m + st.mu1 * cov9.data[i] + st.mu2;
      const double b = cfg.gamma * m * y.data[i] + st.mu1 * recon.data[i] +
                       st.mu2 * st.u.data[i] - l1c.data[i] - st.lambda2.data[i];
      CHECK(x.data[i] == doctest::Approx(b / a).epsilon(1e-8));
      max_resid = std::max(max_resid, std::abs(a * x.data[i] - b));
    }
    CHECK(max_resid <= 1e-8);
  }

  SUBCASE("zero diagonal entry errors") {
    SolverState st = make_state(y, dict, layout, 0.0, 0.0);
    st.mu1 = 0.0;
    st.mu2 = 0.0;
    MaskCube zeros(rows, cols, bands, 0);
    CHECK_THROWS_AS(x_update(st, y, zeros, dict, cfg, layout, coverage),
                    std::runtime_error);
  }
}

TEST_CASE("multiplier_update") {
  const int rows = 2, cols = 2, bands = 2;
  const auto layout = PatchLayout::per_band_slice(rows, cols);
  const Dictionary dict = orthonormal_dictionary(4, 24);

  SUBCASE("unchanged at consensus") {
    HsiCube x = random_cube(rows, cols, bands, 25);
    SolverState st = make_state(x, dict, layout, 1.5, 2.5);
    st.alpha = dict.atoms.transpose() * extract_patches(x, layout);  // exact fit
    st.u = x;
    const Eigen::MatrixXd l1 = st.lambda1;
    const HsiCube l2 = st.lambda2;
    multiplier_update(st, dict, layout);
    CHECK((st.lambda1 - l1).cwiseAbs().maxCoeff() < 1e-12);
    for (std::size_t i = 0; i < l2.data.size(); ++i)
      CHECK(std::abs(st.lambda2.data[i] - l2.data[i]) < 1e-12);
  }

  SUBCASE("mu = 1 with unit residual increments by exactly the residual") {
    HsiCube x(rows, cols, bands, 1.0);
    SolverState st = make_state(x, dict, layout, 1.0, 1.0);
    st.alpha = SparseCode::Zero(4, 2);  // recon = 0, residual = extract(x) = 1
    st.u = HsiCube(rows, cols, bands, 0.0);
    multiplier_update(st, dict, layout);
    CHECK((st.lambda1.array() - 1.0).abs().maxCoeff() < 1e-15);
    for (double v : st.lambda2.data) CHECK(v == doctest::Approx(1.0));
  }

  SUBCASE("two manual iterations match a hand-stepped oracle") {
    HsiCube x = random_cube(rows, cols, bands, 26);
    SolverState st = make_state(x, dict, layout, 1.3, 0.7);
    Rng rng(27);
    for (Eigen::Index i = 0; i < st.alpha.size(); ++i) st.alpha(i) = rng.normal();
    st.u = random_cube(rows, cols, bands, 28);

    Eigen::MatrixXd l1 = Eigen::MatrixXd::Zero(4, 2);
    Eigen::MatrixXd l2 = Eigen::MatrixXd::Zero(4, 2);  // cube as 4x2 columns
    for (int step = 0; step < 2; ++step) {
      multiplier_update(st, dict, layout);
      // Oracle recomputation.
      const Eigen::MatrixXd ex = extract_patches(st.x, layout);
      l1 += st.mu1 * (ex - dict.atoms * st.alpha);
      const Eigen::MatrixXd exu = extract_patches(st.u, layout);
      l2 += st.mu2 * (ex - exu);
      CHECK((st.lambda1 - l1).cwiseAbs().maxCoeff() < 1e-10);
      const Eigen::MatrixXd l2c = extract_patches(st.lambda2, layout);
      CHECK((l2c - l2).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("penalty_update") {
  SolverState st;
  st.mu1 = 1.0;
  st.mu2 = 1.0;
  SUBCASE("rho = 1 leaves penalties fixed") {
    penalty_update(st, 1.0, 1.0);
    CHECK(st.mu1 == 1.0);
    CHECK(st.mu2 == 1.0);
  }
  SUBCASE("rho = 1.05 compounds over 10 steps") {
    for (int i = 0; i < 10; ++i) penalty_update(st, 1.05, 1.0);
    CHECK(st.mu1 == doctest::Approx(std::pow(1.05, 10)).epsilon(1e-12));
    CHECK(st.mu2 == 1.0);
  }
  SUBCASE("values clamp at the cap") {
    for (int i = 0; i < 2000; ++i) penalty_update(st, 1.05, 1.05);
    CHECK(st.mu1 == 1e6);
    CHECK(st.mu2 == 1e6);
  }
  SUBCASE("rho < 1 rejected") {
    CHECK_THROWS_AS(penalty_update(st, 0.9, 1.0), std::invalid_argument);
  }
}

TEST_CASE("trace replay: run follows the update order exactly") {
  // Two outer iterations on a tiny instance, replayed by an independent
  // hand-stepped loop built from the low-level pieces.
  const int rows = 2, cols = 2, bands = 2;
  const auto layout = PatchLayout::per_band_slice(rows, cols);
  const Dictionary dict = unit_dictionary(4, 6, 30);
  const HsiCube truth = random_cube(rows, cols, bands, 31);
  const MaskCube mask = gen_dead_region_mask(rows, cols, bands, 0, 0, 1, 1);
  const HsiCube y = apply_mask(truth, mask);

  SolverConfig cfg;
  cfg.variant = Variant::LrsPnp;
  cfg.max_outer = 2;
  cfg.tol_x = 0.0;
  cfg.inner_ista = 3;
  cfg.rho1 = 1.1;
  cfg.rho2 = 1.2;
  cfg.w_s = 0.05;
  cfg.w_lr = 0.1;
  cfg.record_iterates = true;
  const RunResult run = run_lrs_pnp(y, mask, dict, cfg);
  REQUIRE(run.trace.snapshots.size() == 3);

  // Independent replay.
  const HsiCube coverage = patch_coverage(layout, rows, cols, bands);
  SolverState st = make_state(y, dict, layout, 1.0, 1.0);
  const auto den = PnpDenoiser::make_soft(cfg.w_s);
  for (int k = 0; k < 2; ++k) {
    st.alpha = alpha_update(st, dict, den, cfg.inner_ista, layout);
    st.u = u_update_svt(st, cfg.w_lr);
    st.x = x_update(st, y, mask, dict, cfg, layout, coverage);
    multiplier_update(st, dict, layout);
    penalty_update(st, cfg.rho1, cfg.rho2, cfg.mu_cap);
    const Trace::Snapshot& snap = run.trace.snapshots[k + 1];
    for (std::size_t i = 0; i < st.x.data.size(); ++i) {
      CHECK(st.x.data[i] == doctest::Approx(snap.x[i]).epsilon(1e-10));
      CHECK(st.lambda2.data[i] == doctest::Approx(snap.lambda2[i]).epsilon(1e-10));
      CHECK(st.u.data[i] == doctest::Approx(snap.u[i]).epsilon(1e-10));
    }
    CHECK((st.alpha - snap.alpha).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((st.lambda1 - snap.lambda1).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("run_lrs_pnp end-to-end behaviour") {
  SUBCASE("all-ones mask with no noise returns nearly the input") {
    SynthSpec spec;
    spec.rows = 8;
    spec.cols = 8;
    spec.bands = 4;
    spec.rank = 2;
    spec.seed = 32;
    const HsiCube clean = gen_lowrank_cube(spec);
    const MaskCube ones(8, 8, 4, 1);
    const Dictionary dict = unit_dictionary(64, 96, 33);
    SolverConfig cfg;
    cfg.gamma = 100.0;
    cfg.rho1 = cfg.rho2 = 1.05;
    cfg.max_outer = 200;
    cfg.record_iterates = false;
    const RunResult run = run_lrs_pnp(clean, ones, dict, cfg);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < clean.data.size(); ++i) {
      num += (run.x.data[i] - clean.data[i]) * (run.x.data[i] - clean.data[i]);
      den += clean.data[i] * clean.data[i];
    }
    CHECK(std::sqrt(num / den) < 1e-3);
  }

  SUBCASE("dictionary/patch dim mismatch names both dims") {
    const HsiCube y = random_cube(4, 4, 2, 34);
    const MaskCube ones(4, 4, 2, 1);
    const Dictionary dict = unit_dictionary(9, 12, 35);
    SolverConfig cfg;
    CHECK_THROWS_WITH_AS(run_lrs_pnp(y, ones, dict, cfg),
                         doctest::Contains("9"), std::invalid_argument);
  }

  SUBCASE("inpainting fills dead pixels with nonzero values") {
    SynthSpec spec;
    spec.rows = 16;
    spec.cols = 16;
    spec.bands = 8;
    spec.rank = 3;
    spec.seed = 36;
    const HsiCube clean = gen_lowrank_cube(spec);
    const MaskCube mask = gen_dead_region_mask(16, 16, 8, 4, 4, 5, 5);
    // Observation per the additive model: noise lands on dead pixels too.
    const HsiCube y = add_gaussian_noise(apply_mask(clean, mask), 0.05, 37);
    const Eigen::MatrixXd patches = extract_patches(y, PatchLayout::per_band_slice(16, 16));
    DictLearnConfig dl;
    dl.n_atoms = 48;
    dl.epochs = 10;
    dl.seed = 38;
    const Dictionary dict = learn_dictionary(patches, dl).dict;
    SolverConfig cfg;
    cfg.max_outer = 60;
    cfg.record_iterates = false;
    const RunResult run = run_lrs_pnp(y, mask, dict, cfg, &clean);
    for (int b = 0; b < 8; ++b)
      for (int r = 4; r < 9; ++r)
        for (int c = 4; c < 9; ++c)
          if (clean.at(r, c, b) != 0.0) CHECK(run.x.at(r, c, b) != 0.0);
    // Reconstruction beats the corrupted input.
    const double peak = clean.max_value();
    CHECK(mpsnr(run.x, clean, peak) > mpsnr(y, clean, peak));
  }
}
