#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace eit {

enum class Act : uint32_t { linear = 0, relu = 1, tanh = 2 };

struct DenseLayer {
  Eigen::MatrixXd W;  // rows = outputs, cols = inputs
  Eigen::VectorXd b;
  Act act = Act::linear;
};

// Fully-connected net evaluated as affine-then-activation per layer.
struct DenseNet {
  std::vector<DenseLayer> layers;
  int input_dim() const;
  int output_dim() const;
};

// dims = {in, hidden..., out}, acts one per layer. Weights are seeded
// Glorot-uniform U(-a, a) with a = sqrt(6 / (fan_in + fan_out)), biases zero.
DenseNet make_dense_net(const std::vector<int>& dims, const std::vector<Act>& acts,
                        uint64_t seed);

Eigen::VectorXd net_forward(const DenseNet& net, const Eigen::VectorXd& x);

// Per-layer parameter gradients, shape-congruent with the net.
struct GradientSet {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
};

GradientSet zero_gradients(const DenseNet& net);

// into += scale * g
void accumulate_gradients(GradientSet& into, const GradientSet& g, double scale = 1.0);

// Exact reverse-mode gradients of upstream . net_forward(x): returns parameter
// gradients and the gradient with respect to the input.
std::pair<GradientSet, Eigen::VectorXd> net_backward(const DenseNet& net,
                                                     const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& upstream);

struct OptConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
};

// Momentum buffers, one per parameter tensor, zero-initialized.
struct OptState {
  std::vector<Eigen::MatrixXd> vW;
  std::vector<Eigen::VectorXd> vb;
};

OptState make_opt_state(const DenseNet& net);

// Classic momentum: v <- momentum * v + grad; param <- param - lr * v.
// Non-finite gradient entries abort the step with a numeric error.
void optimizer_step(DenseNet& net, const GradientSet& grads, OptState& state,
                    const OptConfig& config);

// Binary checkpoint: layer dims, activation codes, float64 parameters.
void save_net(const DenseNet& net, const std::string& path);
DenseNet load_net(const std::string& path);

// The same layout as one block inside a larger file (used by checkpoints that
// carry extra header fields alongside the net).
void write_net_block(AtomicFile& f, const DenseNet& net);
DenseNet read_net_block(BinaryReader& r, const std::string& name);

}  // namespace eit
