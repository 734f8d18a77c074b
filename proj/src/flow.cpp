#include "flow.hpp"

#include <algorithm>
#include <cmath>

namespace eit {

namespace {

void check_layer(const CouplingLayer& l, int n, int condition_dim) {
  if (n <= 0) throw std::invalid_argument("empty input");
  if (l.i2.empty()) throw std::invalid_argument("i2 must be nonempty");
  if (int(l.i1.size() + l.i2.size()) != n)
    throw std::invalid_argument("partition does not cover the input");
  std::vector<char> seen(n, 0);
  for (int idx : l.i1) {
    if (idx < 0 || idx >= n || seen[idx]) throw std::invalid_argument("bad partition");
    seen[idx] = 1;
  }
  for (int idx : l.i2) {
    if (idx < 0 || idx >= n || seen[idx]) throw std::invalid_argument("bad partition");
    seen[idx] = 1;
  }
  if (l.st_net.input_dim() != int(l.i1.size()) + condition_dim)
    throw std::invalid_argument("st_net input dim mismatch");
  if (l.st_net.output_dim() != 2 * int(l.i2.size()))
    throw std::invalid_argument("st_net output dim mismatch");
}

// s and t for the given passthrough block and condition
std::pair<Eigen::VectorXd, Eigen::VectorXd> eval_st(const CouplingLayer& l,
                                                    const Eigen::VectorXd& x,
                                                    const Eigen::VectorXd& condition) {
  int d = int(l.i1.size()), m = int(l.i2.size());
  Eigen::VectorXd in(d + condition.size());
  for (int i = 0; i < d; ++i) in[i] = x[l.i1[i]];
  in.tail(condition.size()) = condition;
  Eigen::VectorXd st = net_forward(l.st_net, in);
  if (!st.allFinite()) throw numeric_error("coupling net produced non-finite output");
  return {st.head(m), st.tail(m)};
}

void check_permutation(const std::vector<int>& perm, int n) {
  if (perm.empty()) return;
  if (int(perm.size()) != n) throw std::invalid_argument("permutation length mismatch");
  std::vector<char> seen(n, 0);
  for (int p : perm) {
    if (p < 0 || p >= n || seen[p]) throw std::invalid_argument("not a permutation");
    seen[p] = 1;
  }
}

Eigen::VectorXd apply_permutation(const std::vector<int>& perm,
                                  const Eigen::VectorXd& x) {
  if (perm.empty()) return x;
  Eigen::VectorXd y(x.size());
  for (int i = 0; i < x.size(); ++i) y[i] = x[perm[i]];
  return y;
}

Eigen::VectorXd undo_permutation(const std::vector<int>& perm,
                                 const Eigen::VectorXd& y) {
  if (perm.empty()) return y;
  Eigen::VectorXd x(y.size());
  for (int i = 0; i < y.size(); ++i) x[perm[i]] = y[i];
  return x;
}

void check_stack(const FlowStack& stack, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& condition) {
  if (stack.dim <= 0) throw std::invalid_argument("stack dim must be positive");
  if (x.size() != stack.dim) throw std::invalid_argument("input length mismatch");
  if (condition.size() != stack.condition_dim)
    throw std::invalid_argument("condition length mismatch");
  for (const FlowStep& step : stack.steps) {
    check_permutation(step.permutation, stack.dim);
    check_layer(step.coupling, stack.dim, stack.condition_dim);
  }
}

}  // namespace

std::pair<Eigen::VectorXd, double> coupling_forward(const CouplingLayer& layer,
                                                    const Eigen::VectorXd& x,
                                                    const Eigen::VectorXd& condition) {
  check_layer(layer, int(x.size()), int(condition.size()));
  auto [s, t] = eval_st(layer, x, condition);
  Eigen::VectorXd y = x;
  for (size_t j = 0; j < layer.i2.size(); ++j)
    y[layer.i2[j]] = x[layer.i2[j]] * std::exp(s[j]) + t[j];
  if (!y.allFinite()) throw numeric_error("coupling output is non-finite");
  return {std::move(y), s.sum()};
}

Eigen::VectorXd coupling_inverse(const CouplingLayer& layer, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& condition) {
  check_layer(layer, int(y.size()), int(condition.size()));
  // the passthrough block is identical on both sides, so s and t can be
  // recomputed from y directly
  auto [s, t] = eval_st(layer, y, condition);
  Eigen::VectorXd x = y;
  for (size_t j = 0; j < layer.i2.size(); ++j)
    x[layer.i2[j]] = std::exp(-s[j]) * (y[layer.i2[j]] - t[j]);
  if (!x.allFinite()) throw numeric_error("coupling inverse is non-finite");
  return x;
}

std::pair<Eigen::VectorXd, double> flow_forward(const FlowStack& stack,
                                                const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& condition) {
  check_stack(stack, x, condition);
  Eigen::VectorXd v = x;
  double logdet = 0;
  for (const FlowStep& step : stack.steps) {
    v = apply_permutation(step.permutation, v);
    auto [y, ld] = coupling_forward(step.coupling, v, condition);
    v = std::move(y);
    logdet += ld;
  }
  return {std::move(v), logdet};
}

std::pair<Eigen::VectorXd, double> flow_inverse(const FlowStack& stack,
                                                const Eigen::VectorXd& y,
                                                const Eigen::VectorXd& condition) {
  check_stack(stack, y, condition);
  Eigen::VectorXd v = y;
  double logdet = 0;
  for (auto it = stack.steps.rbegin(); it != stack.steps.rend(); ++it) {
    auto [s, t] = eval_st(it->coupling, v, condition);
    Eigen::VectorXd x = v;
    for (size_t j = 0; j < it->coupling.i2.size(); ++j)
      x[it->coupling.i2[j]] = std::exp(-s[j]) * (v[it->coupling.i2[j]] - t[j]);
    if (!x.allFinite()) throw numeric_error("coupling inverse is non-finite");
    logdet -= s.sum();
    v = undo_permutation(it->permutation, x);
  }
  return {std::move(v), logdet};
}

double flow_nll(const FlowStack& stack, const Eigen::VectorXd& x,
                const Eigen::VectorXd& condition) {
  auto [z, logdet_inv] = flow_inverse(stack, x, condition);
  double n = double(stack.dim);
  double nll = 0.5 * n * std::log(2.0 * M_PI) + 0.5 * z.squaredNorm() - logdet_inv;
  if (!std::isfinite(nll)) throw numeric_error("non-finite flow likelihood");
  return nll;
}

double conditioning_loss(const DenseNet& h_net, const std::vector<Eigen::VectorXd>& vs,
                         const std::vector<Eigen::VectorXd>& targets) {
  if (vs.empty() || vs.size() != targets.size())
    throw std::invalid_argument("batch size mismatch");
  double s = 0;
  for (size_t i = 0; i < vs.size(); ++i) {
    Eigen::VectorXd pred = net_forward(h_net, vs[i]);
    if (pred.size() != targets[i].size())
      throw std::invalid_argument("target dimension mismatch");
    s += (pred - targets[i]).squaredNorm() / double(pred.size());
  }
  return s / double(vs.size());
}

double cnf_total_loss(const FlowStack& stack, const DenseNet& h_net,
                      const std::vector<Eigen::VectorXd>& vs,
                      const std::vector<Eigen::VectorXd>& targets, double alpha) {
  if (!(alpha >= 0) || !std::isfinite(alpha))
    throw std::invalid_argument("alpha must be nonnegative");
  if (vs.empty() || vs.size() != targets.size())
    throw std::invalid_argument("batch size mismatch");
  double nll = 0;
  for (size_t i = 0; i < vs.size(); ++i)
    nll += flow_nll(stack, targets[i], net_forward(h_net, vs[i]));
  nll /= double(vs.size());
  return nll + alpha * conditioning_loss(h_net, vs, targets);
}

FlowStack make_flow_stack(int dim, int condition_dim, int n_steps, int hidden,
                          uint64_t seed) {
  if (dim <= 0 || condition_dim < 0 || n_steps < 0 || hidden <= 0)
    throw std::invalid_argument("bad stack shape");
  if (dim == 1 && condition_dim == 0 && n_steps > 0)
    throw std::invalid_argument("1-D couplings need a condition");
  FlowStack stack;
  stack.dim = dim;
  stack.condition_dim = condition_dim;
  Rng rng(seed);
  int d = dim / 2;  // zero for dim 1: the net then sees only the condition
  for (int k = 0; k < n_steps; ++k) {
    FlowStep step;
    if (k > 0) {
      step.permutation.resize(dim);
      for (int i = 0; i < dim; ++i) step.permutation[i] = dim - 1 - i;
    }
    for (int i = 0; i < d; ++i) step.coupling.i1.push_back(i);
    for (int i = d; i < dim; ++i) step.coupling.i2.push_back(i);
    step.coupling.st_net = make_dense_net({d + condition_dim, hidden, 2 * (dim - d)},
                                          {Act::tanh, Act::linear}, rng.raw());
    stack.steps.push_back(std::move(step));
  }
  return stack;
}

}  // namespace eit
