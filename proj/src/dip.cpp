#include "lrs/dip.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lrs/rng.hpp"

namespace lrs {

void AdamState::step(std::vector<double>& params, const std::vector<double>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("AdamState: params/grads size mismatch");
  if (m.size() != params.size()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
    step_count = 0;
  }
  ++step_count;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
    params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

bool WmvStopper::push(double metric) {
  if (window < 2 || patience < 1)
    throw std::invalid_argument("WmvStopper: window >= 2 and patience >= 1 required");
  if (!std::isfinite(metric)) throw std::invalid_argument("WmvStopper: non-finite metric");
  history.push_back(metric);
  if (static_cast<int>(history.size()) < window) return fired;
  double mean = 0.0;
  for (int i = 0; i < window; ++i) mean += history[history.size() - 1 - i];
  mean /= window;
  double var = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = history[history.size() - 1 - i] - mean;
    var += d * d;
  }
  var /= window;
  if (!has_best || var < best_variance) {
    best_variance = var;
    has_best = true;
    steps_since_best = 0;
  } else {
    ++steps_since_best;
  }
  if (steps_since_best >= patience) fired = true;
  return fired;
}

namespace {

std::size_t tidx(const TensorShape& s, int c, int y, int x) {
  return (static_cast<std::size_t>(c) * s.h + y) * s.w + x;
}

}  // namespace

DipNetwork::DipNetwork(int rows, int cols, int bands,
                       const std::vector<LayerSpec>& arch, bool lipschitz_constrained,
                       std::uint64_t seed)
    : rows_(rows), cols_(cols), bands_(bands), constrained_(lipschitz_constrained) {
  if (rows < 1 || cols < 1 || bands < 1)
    throw std::invalid_argument("DipNetwork: bad input dims");
  in_shape_ = TensorShape{bands, rows, cols};

  TensorShape cur = in_shape_;
  std::size_t n_params = 0;
  int max_slot = -1;
  for (const LayerSpec& spec : arch) {
    Layer l;
    l.kind = spec.kind;
    l.in_shape = cur;
    switch (spec.kind) {
      case Kind::Conv: {
        if (spec.out_ch < 1 || spec.ksize < 1 || spec.ksize % 2 == 0)
          throw std::invalid_argument("DipNetwork: conv needs out_ch >= 1 and odd ksize");
        l.in_ch = cur.ch;
        l.out_ch = spec.out_ch;
        l.ksize = spec.ksize;
        l.pad = (spec.ksize - 1) / 2;
        l.out_shape = TensorShape{spec.out_ch, cur.h, cur.w};
        l.w_off = n_params;
        l.w_len = static_cast<std::size_t>(l.out_ch) * l.in_ch * l.ksize * l.ksize;
        l.b_off = n_params + l.w_len;
        l.b_len = static_cast<std::size_t>(l.out_ch);
        n_params += l.w_len + l.b_len;
        break;
      }
      case Kind::LeakyRelu:
        l.slope = spec.slope;
        l.out_shape = cur;
        break;
      case Kind::Up2:
        l.out_shape = TensorShape{cur.ch, cur.h * 2, cur.w * 2};
        break;
      case Kind::Down2:
        if (cur.h % 2 != 0 || cur.w % 2 != 0)
          throw std::invalid_argument(
              "DipNetwork: spatial dims must be divisible by 2 at every downsample");
        l.out_shape = TensorShape{cur.ch, cur.h / 2, cur.w / 2};
        break;
      case Kind::SkipSave:
      case Kind::SkipAdd:
        l.slot = spec.slot;
        l.out_shape = cur;
        max_slot = std::max(max_slot, spec.slot);
        break;
    }
    cur = l.out_shape;
    layers_.push_back(std::move(l));
  }
  if (!(cur == in_shape_))
    throw std::invalid_argument("DipNetwork: stack does not preserve the input shape");

  params_.assign(n_params, 0.0);
  grads_.assign(n_params, 0.0);
  slots_.resize(max_slot + 1);
  slot_grads_.resize(max_slot + 1);

  Rng rng(Rng::derive(seed, 0xd1f));
  for (Layer& l : layers_) {
    if (l.kind != Kind::Conv) continue;
    const double fan_in = static_cast<double>(l.in_ch) * l.ksize * l.ksize;
    const double limit = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < l.w_len; ++i)
      params_[l.w_off + i] = rng.uniform(-limit, limit);
    l.sn_u.resize(l.in_shape.size());
    for (auto& v : l.sn_u) v = rng.normal();
  }
  // One-time unit-gain scaling: raw fan-in init gives each conv an operator
  // norm around 2-3, which compounds to a large amplifier across the stack
  // and blows up when the net sits inside the solver loop.
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind != Kind::Conv) continue;
    const double sigma = conv_norm_estimate(i, 40);
    if (sigma > 1.0) {
      const Layer& l = layers_[i];
      for (std::size_t j = 0; j < l.w_len; ++j) params_[l.w_off + j] /= sigma;
    }
  }
}

DipNetwork DipNetwork::encoder_decoder(const Config& cfg) {
  if (cfg.widths.empty()) throw std::invalid_argument("DipNetwork: widths must be non-empty");
  const int depth = static_cast<int>(cfg.widths.size());
  const int factor = 1 << depth;
  if (cfg.rows % factor != 0 || cfg.cols % factor != 0)
    throw std::invalid_argument("DipNetwork: spatial dims must be divisible by 2^depth");
  std::vector<LayerSpec> arch;
  for (int i = 0; i < depth; ++i) {
    arch.push_back(LayerSpec::conv(cfg.widths[i], 3));
    arch.push_back(LayerSpec::relu(cfg.leaky_slope));
    if (cfg.skip_connections) arch.push_back({Kind::SkipSave, 0, 0, 0.0, i});
    arch.push_back(LayerSpec::down());
  }
  arch.push_back(LayerSpec::conv(cfg.widths[depth - 1], 3));
  arch.push_back(LayerSpec::relu(cfg.leaky_slope));
  for (int i = depth - 1; i >= 0; --i) {
    arch.push_back(LayerSpec::up());
    arch.push_back(LayerSpec::conv(cfg.widths[i], 3));
    arch.push_back(LayerSpec::relu(cfg.leaky_slope));
    if (cfg.skip_connections) arch.push_back({Kind::SkipAdd, 0, 0, 0.0, i});
  }
  arch.push_back(LayerSpec::conv(cfg.bands, 1));
  DipNetwork net(cfg.rows, cfg.cols, cfg.bands, arch, cfg.lipschitz_constrained, cfg.seed);
  if (cfg.lipschitz_constrained) net.spectral_normalize();
  return net;
}

void DipNetwork::conv_forward(const Layer& l, const double* in, double* out,
                              bool with_bias) const {
  const int H = l.in_shape.h, W = l.in_shape.w;
  for (int oc = 0; oc < l.out_ch; ++oc) {
    const double bias = with_bias ? params_[l.b_off + oc] : 0.0;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = bias;
        for (int ic = 0; ic < l.in_ch; ++ic)
          for (int ky = 0; ky < l.ksize; ++ky) {
            const int yy = y + ky - l.pad;
            if (yy < 0 || yy >= H) continue;
            const std::size_t wrow = ((static_cast<std::size_t>(oc) * l.in_ch + ic) * l.ksize + ky) *
                                     l.ksize;
            const std::size_t irow = (static_cast<std::size_t>(ic) * H + yy) * W;
            for (int kx = 0; kx < l.ksize; ++kx) {
              const int xx = x + kx - l.pad;
              if (xx < 0 || xx >= W) continue;
              acc += params_[l.w_off + wrow + kx] * in[irow + xx];
            }
          }
        out[(static_cast<std::size_t>(oc) * H + y) * W + x] = acc;
      }
  }
}

void DipNetwork::conv_backward(const Layer& l, const double* in, const double* dout,
                               double* din, bool accumulate_param_grads) {
  const int H = l.in_shape.h, W = l.in_shape.w;
  std::memset(din, 0, l.in_shape.size() * sizeof(double));
  for (int oc = 0; oc < l.out_ch; ++oc)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double g = dout[(static_cast<std::size_t>(oc) * H + y) * W + x];
        if (g == 0.0) continue;
        if (accumulate_param_grads) grads_[l.b_off + oc] += g;
        for (int ic = 0; ic < l.in_ch; ++ic)
          for (int ky = 0; ky < l.ksize; ++ky) {
            const int yy = y + ky - l.pad;
            if (yy < 0 || yy >= H) continue;
            const std::size_t wrow = ((static_cast<std::size_t>(oc) * l.in_ch + ic) * l.ksize + ky) *
                                     l.ksize;
            const std::size_t irow = (static_cast<std::size_t>(ic) * H + yy) * W;
            for (int kx = 0; kx < l.ksize; ++kx) {
              const int xx = x + kx - l.pad;
              if (xx < 0 || xx >= W) continue;
              if (accumulate_param_grads && in)
                grads_[l.w_off + wrow + kx] += g * in[irow + xx];
              din[irow + xx] += g * params_[l.w_off + wrow + kx];
            }
          }
      }
}

std::vector<double> DipNetwork::forward_flat(const std::vector<double>& input) {
  if (input.size() != in_shape_.size())
    throw std::invalid_argument("DipNetwork: input size mismatch");
  acts_.assign(layers_.size() + 1, {});
  acts_[0] = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const std::vector<double>& in = acts_[i];
    std::vector<double> out(l.out_shape.size());
    switch (l.kind) {
      case Kind::Conv:
        conv_forward(l, in.data(), out.data(), true);
        break;
      case Kind::LeakyRelu:
        for (std::size_t j = 0; j < in.size(); ++j)
          out[j] = in[j] > 0.0 ? in[j] : l.slope * in[j];
        break;
      case Kind::Up2: {
        const TensorShape& o = l.out_shape;
        for (int c = 0; c < o.ch; ++c)
          for (int y = 0; y < o.h; ++y)
            for (int x = 0; x < o.w; ++x)
              out[tidx(o, c, y, x)] = in[tidx(l.in_shape, c, y / 2, x / 2)];
        break;
      }
      case Kind::Down2: {
        const TensorShape& o = l.out_shape;
        for (int c = 0; c < o.ch; ++c)
          for (int y = 0; y < o.h; ++y)
            for (int x = 0; x < o.w; ++x) {
              double acc = 0.0;
              for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                  acc += in[tidx(l.in_shape, c, 2 * y + dy, 2 * x + dx)];
              out[tidx(o, c, y, x)] = 0.25 * acc;
            }
        break;
      }
      case Kind::SkipSave:
        slots_[l.slot] = in;
        out = in;
        break;
      case Kind::SkipAdd: {
        if (slots_[l.slot].size() != in.size())
          throw std::runtime_error("DipNetwork: skip slot shape mismatch");
        out = in;
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += slots_[l.slot][j];
        break;
      }
    }
    acts_[i + 1] = std::move(out);
  }
  return acts_.back();
}

std::vector<double> DipNetwork::backward_flat(const std::vector<double>& dout) {
  if (acts_.size() != layers_.size() + 1)
    throw std::runtime_error("DipNetwork: backward without forward");
  if (dout.size() != in_shape_.size())
    throw std::invalid_argument("DipNetwork: dout size mismatch");
  for (auto& g : slot_grads_) g.clear();
  std::vector<double> grad = dout;
  for (std::size_t ri = layers_.size(); ri-- > 0;) {
    const Layer& l = layers_[ri];
    const std::vector<double>& in = acts_[ri];
    std::vector<double> din(l.in_shape.size(), 0.0);
    switch (l.kind) {
      case Kind::Conv:
        conv_backward(l, in.data(), grad.data(), din.data(), true);
        break;
      case Kind::LeakyRelu:
        for (std::size_t j = 0; j < in.size(); ++j)
          din[j] = (in[j] > 0.0 ? 1.0 : l.slope) * grad[j];
        break;
      case Kind::Up2: {
        const TensorShape& o = l.out_shape;
        for (int c = 0; c < o.ch; ++c)
          for (int y = 0; y < o.h; ++y)
            for (int x = 0; x < o.w; ++x)
              din[tidx(l.in_shape, c, y / 2, x / 2)] += grad[tidx(o, c, y, x)];
        break;
      }
      case Kind::Down2: {
        const TensorShape& o = l.out_shape;
        for (int c = 0; c < o.ch; ++c)
          for (int y = 0; y < o.h; ++y)
            for (int x = 0; x < o.w; ++x) {
              const double g = 0.25 * grad[tidx(o, c, y, x)];
              for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                  din[tidx(l.in_shape, c, 2 * y + dy, 2 * x + dx)] = g;
            }
        break;
      }
      case Kind::SkipSave:
        din = grad;
        if (!slot_grads_[l.slot].empty())
          for (std::size_t j = 0; j < din.size(); ++j) din[j] += slot_grads_[l.slot][j];
        break;
      case Kind::SkipAdd:
        din = grad;
        slot_grads_[l.slot] = grad;
        break;
    }
    grad = std::move(din);
  }
  return grad;
}

void DipNetwork::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

HsiCube DipNetwork::forward(const HsiCube& z) {
  if (z.rows != rows_ || z.cols != cols_ || z.bands != bands_)
    throw std::invalid_argument("DipNetwork: input cube shape mismatch");
  if (!z.all_finite()) throw std::invalid_argument("DipNetwork: non-finite input");
  const std::vector<double> out = forward_flat(z.data);
  HsiCube res(rows_, cols_, bands_);
  res.data = out;
  return res;
}

double DipNetwork::masked_loss_and_seed_grad(const HsiCube& target, const MaskCube& mask,
                                             std::vector<double>& dout) const {
  const std::vector<double>& out = acts_.back();
  double loss = 0.0;
  dout.assign(out.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!mask.bits[i]) continue;
    const double r = out[i] - target.data[i];
    loss += r * r;
    dout[i] = 2.0 * r;
  }
  return loss;
}

double DipNetwork::compute_loss_and_grads(const HsiCube& z, const HsiCube& target,
                                          const MaskCube& mask) {
  if (!target.same_shape(z) || !mask.same_shape(z))
    throw std::invalid_argument("DipNetwork: target/mask shape mismatch");
  forward(z);
  std::vector<double> dout;
  const double loss = masked_loss_and_seed_grad(target, mask, dout);
  if (!std::isfinite(loss)) throw std::runtime_error("DipNetwork: non-finite loss");
  zero_grads();
  backward_flat(dout);
  for (double g : grads_)
    if (!std::isfinite(g)) throw std::runtime_error("DipNetwork: non-finite gradient");
  return loss;
}

double DipNetwork::train_step(AdamState& adam, const HsiCube& z, const HsiCube& target,
                              const MaskCube& mask) {
  const double loss = compute_loss_and_grads(z, target, mask);
  adam.step(params_, grads_);
  if (constrained_) spectral_normalize();
  return loss;
}

double DipNetwork::conv_norm_estimate(std::size_t layer_index, int iters) {
  Layer& l = layers_.at(layer_index);
  if (l.kind != Kind::Conv)
    throw std::invalid_argument("conv_norm_estimate: layer is not a conv");
  std::vector<double> u = l.sn_u;
  double nu = 0.0;
  for (double v : u) nu += v * v;
  nu = std::sqrt(nu);
  if (nu <= 0.0) return 0.0;
  for (auto& v : u) v /= nu;
  std::vector<double> fwd(l.out_shape.size()), bwd(l.in_shape.size());
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    conv_forward(l, u.data(), fwd.data(), false);
    double nf = 0.0;
    for (double v : fwd) nf += v * v;
    nf = std::sqrt(nf);
    if (nf <= 0.0) return 0.0;
    for (auto& v : fwd) v /= nf;
    conv_backward(l, nullptr, fwd.data(), bwd.data(), false);
    double nb = 0.0;
    for (double v : bwd) nb += v * v;
    nb = std::sqrt(nb);
    if (nb <= 0.0) return 0.0;
    const double prev = sigma;
    sigma = nb;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = bwd[i] / nb;
    if (it > 0 && std::abs(sigma - prev) <= 1e-6 * sigma) break;
  }
  l.sn_u = u;
  return sigma;
}

void DipNetwork::spectral_normalize() {
  // Target slightly below the contract's 1+1e-3 so residual power-iteration
  // error cannot push the true layer norm past it.
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind != Kind::Conv) continue;
    for (int round = 0; round < 20; ++round) {
      const double sigma = conv_norm_estimate(i, 25);
      if (sigma <= 1.0 + 2e-4) break;
      const Layer& l = layers_[i];
      for (std::size_t j = 0; j < l.w_len; ++j) params_[l.w_off + j] /= sigma;
    }
  }
}

double DipNetwork::estimate_lipschitz(int n_pairs, std::uint64_t seed) {
  if (n_pairs < 1) throw std::invalid_argument("estimate_lipschitz: n_pairs >= 1 required");
  Rng rng(Rng::derive(seed, 0x1f));
  const std::size_t n = in_shape_.size();
  double best = 0.0;
  int budget = n_pairs;
  const double eps = 1e-4;
  while (budget > 0) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal();
    if (budget > 0) {
      std::vector<double> y(n);
      for (auto& v : y) v = rng.normal();
      double dn = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        dn += d * d;
      }
      if (dn > 0.0) {
        const std::vector<double> fx = forward_flat(x);
        const std::vector<double> fy = forward_flat(y);
        double fn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = fx[i] - fy[i];
          fn += d * d;
        }
        best = std::max(best, std::sqrt(fn / dn));
      }
      --budget;
    }
    // Directional refinement: power iteration on the local Jacobian, each
    // quotient is itself a valid pair ratio.
    std::vector<double> d(n);
    for (auto& v : d) v = rng.normal();
    double dn = 0.0;
    for (double v : d) dn += v * v;
    dn = std::sqrt(dn);
    if (dn <= 0.0) continue;
    for (auto& v : d) v /= dn;
    const std::vector<double> fx = forward_flat(x);
    for (int it = 0; it < 8 && budget > 0; ++it, --budget) {
      std::vector<double> xe = x;
      for (std::size_t i = 0; i < n; ++i) xe[i] += eps * d[i];
      const std::vector<double> fe = forward_flat(xe);
      std::vector<double> jd(n);
      double jn = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        jd[i] = (fe[i] - fx[i]) / eps;
        jn += jd[i] * jd[i];
      }
      best = std::max(best, std::sqrt(jn));
      if (jn <= 0.0) break;
      forward_flat(x);  // restore activations at the base point
      zero_grads();
      const std::vector<double> g = backward_flat(jd);
      double gn = 0.0;
      for (double v : g) gn += v * v;
      gn = std::sqrt(gn);
      if (gn <= 0.0) break;
      for (std::size_t i = 0; i < n; ++i) d[i] = g[i] / gn;
    }
  }
  return best;
}

void DipNetwork::save_weights(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f.write("DIPW", 4);
  const std::uint16_t version = 1;
  f.write(reinterpret_cast<const char*>(&version), 2);
  const std::uint32_t n_layers = static_cast<std::uint32_t>(layers_.size());
  f.write(reinterpret_cast<const char*>(&n_layers), 4);
  for (const Layer& l : layers_) {
    const std::int32_t rec[5] = {static_cast<std::int32_t>(l.kind), l.in_ch, l.out_ch,
                                 l.ksize, l.slot};
    f.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    f.write(reinterpret_cast<const char*>(&l.slope), sizeof(double));
  }
  const std::uint64_t n_params = params_.size();
  f.write(reinterpret_cast<const char*>(&n_params), 8);
  f.write(reinterpret_cast<const char*>(params_.data()),
          static_cast<std::streamsize>(params_.size() * sizeof(double)));
  if (!f) throw std::runtime_error("write failed: " + path);
}

void DipNetwork::load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "DIPW", 4) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  std::uint16_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 2);
  if (version != 1) throw std::runtime_error("unsupported checkpoint version: " + path);
  std::uint32_t n_layers = 0;
  f.read(reinterpret_cast<char*>(&n_layers), 4);
  if (n_layers != layers_.size())
    throw std::runtime_error("checkpoint layer count mismatch: " + path);
  for (const Layer& l : layers_) {
    std::int32_t rec[5];
    double slope;
    f.read(reinterpret_cast<char*>(rec), sizeof(rec));
    f.read(reinterpret_cast<char*>(&slope), sizeof(double));
    if (rec[0] != static_cast<std::int32_t>(l.kind) || rec[1] != l.in_ch ||
        rec[2] != l.out_ch || rec[3] != l.ksize || rec[4] != l.slot)
      throw std::runtime_error("checkpoint layer spec mismatch: " + path);
  }
  std::uint64_t n_params = 0;
  f.read(reinterpret_cast<char*>(&n_params), 8);
  if (n_params != params_.size())
    throw std::runtime_error("checkpoint parameter count mismatch: " + path);
  f.read(reinterpret_cast<char*>(params_.data()),
         static_cast<std::streamsize>(params_.size() * sizeof(double)));
  if (!f) throw std::runtime_error("truncated checkpoint: " + path);
}

}  // namespace lrs
