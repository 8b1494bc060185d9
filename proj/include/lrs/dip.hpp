#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrs/cube.hpp"

namespace lrs {

struct AdamState {
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<double> m, v;

  void step(std::vector<double>& params, const std::vector<double>& grads);
};

// Windowed moving variance early stopping: tracks the variance of the
// trailing window and fires once it has not strictly improved for `patience`
// samples.
struct WmvStopper {
  int window = 20;
  int patience = 100;
  std::vector<double> history;
  double best_variance = 0.0;
  bool has_best = false;
  int steps_since_best = 0;
  bool fired = false;

  bool push(double metric);
  bool triggered() const { return fired; }
};

struct TensorShape {
  int ch = 0, h = 0, w = 0;
  std::size_t size() const {
    return static_cast<std::size_t>(ch) * h * w;
  }
  bool operator==(const TensorShape&) const = default;
};

// Small encoder-decoder image prior trained on the single corrupted image.
// Tensors are channel-major [c][y][x]; a cube maps onto (ch=bands, h=rows,
// w=cols) directly.
class DipNetwork {
 public:
  enum class Kind { Conv, LeakyRelu, Up2, Down2, SkipSave, SkipAdd };

  struct LayerSpec {
    Kind kind = Kind::Conv;
    int out_ch = 0;     // conv
    int ksize = 3;      // conv (odd)
    double slope = 0.1; // leaky-relu
    int slot = 0;       // skip

    static LayerSpec conv(int out_ch, int ksize = 3) { return {Kind::Conv, out_ch, ksize}; }
    static LayerSpec relu(double slope = 0.1) { return {Kind::LeakyRelu, 0, 0, slope}; }
    static LayerSpec up() { return {Kind::Up2}; }
    static LayerSpec down() { return {Kind::Down2}; }
  };

  struct Layer {
    Kind kind;
    int in_ch = 0, out_ch = 0, ksize = 0, pad = 0;
    double slope = 0.0;
    int slot = 0;
    TensorShape in_shape, out_shape;
    std::size_t w_off = 0, w_len = 0, b_off = 0, b_len = 0;
    std::vector<double> sn_u;  // persistent power-iteration vector (conv)
  };

  struct Config {
    int rows = 32, cols = 32, bands = 16;
    std::vector<int> widths = {16, 32};
    double leaky_slope = 0.1;
    bool lipschitz_constrained = false;
    bool skip_connections = false;
    std::uint64_t seed = 0;
  };

  // Custom stack; the composed map must preserve the input shape.
  DipNetwork(int rows, int cols, int bands, const std::vector<LayerSpec>& arch,
             bool lipschitz_constrained, std::uint64_t seed);

  // Default architecture: per width conv3+lrelu+down2, a conv3+lrelu
  // bottleneck, the mirror with nearest upsampling, and a linear 1x1 head.
  static DipNetwork encoder_decoder(const Config& cfg);

  HsiCube forward(const HsiCube& z);
  // Masked squared-error loss before the update; backprop + Adam step, then
  // spectral normalization when constrained.
  double train_step(AdamState& adam, const HsiCube& z, const HsiCube& target,
                    const MaskCube& mask);
  // Forward + masked loss + parameter gradients, no update.
  double compute_loss_and_grads(const HsiCube& z, const HsiCube& target,
                                const MaskCube& mask);
  void spectral_normalize();
  // Max finite-difference pair ratio (lower bound on the Lipschitz constant);
  // half the budget refines directions by power iteration on the local
  // Jacobian.
  double estimate_lipschitz(int n_pairs, std::uint64_t seed);

  // Flat-tensor interface (layout as above). backward_flat accumulates
  // parameter gradients and returns the input gradient of the last forward.
  std::vector<double> forward_flat(const std::vector<double>& input);
  std::vector<double> backward_flat(const std::vector<double>& dout);

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<double>& grads() const { return grads_; }
  void zero_grads();
  const std::vector<Layer>& layers() const { return layers_; }
  TensorShape input_shape() const { return in_shape_; }
  bool lipschitz_constrained() const { return constrained_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int bands() const { return bands_; }

  // Operator-norm estimate of one conv's linear map (power iteration on the
  // persistent vector).
  double conv_norm_estimate(std::size_t layer_index, int iters = 10);

  void save_weights(const std::string& path) const;
  void load_weights(const std::string& path);

 private:
  void conv_forward(const Layer& l, const double* in, double* out, bool with_bias) const;
  void conv_backward(const Layer& l, const double* in, const double* dout, double* din,
                     bool accumulate_param_grads);
  double masked_loss_and_seed_grad(const HsiCube& target, const MaskCube& mask,
                                   std::vector<double>& dout) const;

  int rows_ = 0, cols_ = 0, bands_ = 0;
  bool constrained_ = false;
  TensorShape in_shape_;
  std::vector<Layer> layers_;
  std::vector<double> params_, grads_;
  std::vector<std::vector<double>> acts_;  // acts_[0] = input, acts_[i+1] = layer i output
  std::vector<std::vector<double>> slots_, slot_grads_;
};

}  // namespace lrs
