#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dsmc {

/// Plain feedforward network with tanh hidden layers and a linear output,
/// parameters in one flat vector, and a hand-written reverse pass. Small
/// enough that an explicit implementation beats pulling in a framework.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input, int hidden, int output, int hidden_layers = 2);

  int input_dim() const { return input_; }
  int output_dim() const { return output_; }
  int param_count() const { return static_cast<int>(params_.size()); }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  /// Uniform(-s, s) weights with s = 1/sqrt(fan_in), zero biases.
  void init_random(std::uint64_t seed);

  struct Cache {
    Eigen::VectorXd input;
    std::vector<Eigen::VectorXd> act;  // post-tanh activations per hidden layer
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& x, Cache* cache = nullptr) const;

  /// Accumulates d loss / d params into `grad` (same layout as params())
  /// and returns d loss / d input.
  Eigen::VectorXd backward(const Cache& cache, const Eigen::VectorXd& gout,
                           Eigen::VectorXd& grad) const;

 private:
  struct Layer {
    int w_off, b_off, rows, cols;
  };
  std::vector<Layer> layers_;
  Eigen::VectorXd params_;
  int input_ = 0, hidden_ = 0, output_ = 0, n_hidden_layers_ = 0;

  friend struct ValueModel;
};

/// Per-agent value-function model: one network emits the value gradient with
/// respect to the ego state (consumed every step), a separate network emits
/// the scalar initial-value estimate (consumed once per episode, summed over
/// agents). Inputs are the local observation
///   [ego state, relative neighbor states..., relative target, normalized t].
struct ValueModel {
  int r = 3;
  int hidden = 64;
  int hidden_layers = 2;
  Mlp grad_net;
  Mlp value_net;

  static int obs_dim(int r) { return 4 * (r + 1) + 3; }

  void init(std::uint64_t seed);

  int param_count() const;
  Eigen::VectorXd flat_params() const;
  void set_flat_params(const Eigen::VectorXd& theta);

  void save(const std::string& path) const;
  static ValueModel load(const std::string& path);
};

/// Adam with bias correction. Steps with any non-finite gradient entry are
/// skipped entirely (counted), so one bad rollout cannot poison the weights.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;
  int skipped = 0;
  Eigen::VectorXd m, v;

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

}  // namespace dsmc
