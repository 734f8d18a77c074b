#pragma once

#include <utility>
#include <vector>

#include "nnet.hpp"

namespace eit {

// Conditional affine coupling: the i1 block passes through unchanged, the i2
// block is scaled and shifted by st_net(x[i1], condition). i1 may be empty
// (the net then sees only the condition); i2 must not be.
struct CouplingLayer {
  std::vector<int> i1;
  std::vector<int> i2;
  DenseNet st_net;  // (|i1| + condition_dim) -> 2 |i2|, s stacked before t
};

// y[i1] = x[i1]; y[i2] = x[i2] .* exp(s) + t; logdet = sum(s)
std::pair<Eigen::VectorXd, double> coupling_forward(const CouplingLayer& layer,
                                                    const Eigen::VectorXd& x,
                                                    const Eigen::VectorXd& condition);

// exact inverse for the same condition: x[i2] = exp(-s) .* (y[i2] - t)
Eigen::VectorXd coupling_inverse(const CouplingLayer& layer, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& condition);

// One stack entry: an optional fixed permutation (applied before the coupling
// in the forward direction; empty = identity) followed by a coupling.
struct FlowStep {
  std::vector<int> permutation;
  CouplingLayer coupling;
};

struct FlowStack {
  int dim = 0;
  int condition_dim = 0;
  std::vector<FlowStep> steps;
};

// Composite map and its total log-determinant (forward direction).
std::pair<Eigen::VectorXd, double> flow_forward(const FlowStack& stack,
                                                const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& condition);

// Inverse composite map with the log-determinant of the inverse.
std::pair<Eigen::VectorXd, double> flow_inverse(const FlowStack& stack,
                                                const Eigen::VectorXd& y,
                                                const Eigen::VectorXd& condition);

// Negative log-density of x under the stack pushing a standard normal base
// forward: (n/2) log 2pi + |z|^2 / 2 - logdet_inverse, z the inverse image.
double flow_nll(const FlowStack& stack, const Eigen::VectorXd& x,
                const Eigen::VectorXd& condition);

// Per-pixel mean squared error of h_net(v) against flattened target images.
double conditioning_loss(const DenseNet& h_net, const std::vector<Eigen::VectorXd>& vs,
                         const std::vector<Eigen::VectorXd>& targets);

// Mean flow_nll of targets conditioned on h_net(v), plus alpha times the
// conditioning loss; the conditioning net both feeds the flow and is anchored
// to the targets.
double cnf_total_loss(const FlowStack& stack, const DenseNet& h_net,
                      const std::vector<Eigen::VectorXd>& vs,
                      const std::vector<Eigen::VectorXd>& targets, double alpha);

// Alternating half partitions with reversal permutations between steps;
// st_nets are one-hidden-layer tanh nets, seeded.
FlowStack make_flow_stack(int dim, int condition_dim, int n_steps, int hidden,
                          uint64_t seed);

}  // namespace eit
