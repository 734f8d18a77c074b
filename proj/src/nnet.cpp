#include "nnet.hpp"

#include <cmath>

namespace eit {

namespace {

void check_net(const DenseNet& net) {
  if (net.layers.empty()) throw std::invalid_argument("net has no layers");
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const DenseLayer& l = net.layers[i];
    if (l.W.rows() == 0 || l.W.cols() == 0) throw std::invalid_argument("empty layer");
    if (l.b.size() != l.W.rows()) throw std::invalid_argument("bias/weight shape mismatch");
    if (i > 0 && net.layers[i - 1].W.rows() != l.W.cols())
      throw std::invalid_argument("layer dimensions do not chain");
  }
}

double act_value(Act a, double z) {
  switch (a) {
    case Act::linear: return z;
    case Act::relu: return z > 0 ? z : 0.0;
    case Act::tanh: return std::tanh(z);
  }
  throw std::invalid_argument("unknown activation");
}

double act_derivative(Act a, double z) {
  switch (a) {
    case Act::linear: return 1.0;
    case Act::relu: return z > 0 ? 1.0 : 0.0;
    case Act::tanh: {
      double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  throw std::invalid_argument("unknown activation");
}

}  // namespace

int DenseNet::input_dim() const {
  return layers.empty() ? 0 : int(layers.front().W.cols());
}

int DenseNet::output_dim() const {
  return layers.empty() ? 0 : int(layers.back().W.rows());
}

DenseNet make_dense_net(const std::vector<int>& dims, const std::vector<Act>& acts,
                        uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("need at least input and output dims");
  if (acts.size() != dims.size() - 1)
    throw std::invalid_argument("need one activation per layer");
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("layer dims must be positive");

  Rng rng(seed);
  DenseNet net;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer l;
    int fan_in = dims[i], fan_out = dims[i + 1];
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    l.W.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) l.W(r, c) = rng.uniform(-a, a);
    l.b = Eigen::VectorXd::Zero(fan_out);
    l.act = acts[i];
    net.layers.push_back(std::move(l));
  }
  return net;
}

Eigen::VectorXd net_forward(const DenseNet& net, const Eigen::VectorXd& x) {
  check_net(net);
  if (x.size() != net.input_dim()) throw std::invalid_argument("input length mismatch");
  Eigen::VectorXd a = x;
  for (const DenseLayer& l : net.layers) {
    Eigen::VectorXd z = l.W * a + l.b;
    a.resize(z.size());
    for (int i = 0; i < z.size(); ++i) a[i] = act_value(l.act, z[i]);
  }
  return a;
}

GradientSet zero_gradients(const DenseNet& net) {
  GradientSet g;
  for (const DenseLayer& l : net.layers) {
    g.dW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
    g.db.push_back(Eigen::VectorXd::Zero(l.b.size()));
  }
  return g;
}

void accumulate_gradients(GradientSet& into, const GradientSet& g, double scale) {
  if (into.dW.size() != g.dW.size() || into.db.size() != g.db.size())
    throw std::invalid_argument("gradient layer count mismatch");
  for (size_t i = 0; i < g.dW.size(); ++i) {
    if (into.dW[i].rows() != g.dW[i].rows() || into.dW[i].cols() != g.dW[i].cols() ||
        into.db[i].size() != g.db[i].size())
      throw std::invalid_argument("gradient shape mismatch");
    into.dW[i] += scale * g.dW[i];
    into.db[i] += scale * g.db[i];
  }
}

std::pair<GradientSet, Eigen::VectorXd> net_backward(const DenseNet& net,
                                                     const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& upstream) {
  check_net(net);
  if (x.size() != net.input_dim()) throw std::invalid_argument("input length mismatch");
  if (upstream.size() != net.output_dim())
    throw std::invalid_argument("upstream gradient length mismatch");

  size_t n = net.layers.size();
  std::vector<Eigen::VectorXd> inputs(n);   // activation entering each layer
  std::vector<Eigen::VectorXd> preacts(n);  // W a + b before the nonlinearity
  Eigen::VectorXd a = x;
  for (size_t i = 0; i < n; ++i) {
    const DenseLayer& l = net.layers[i];
    inputs[i] = a;
    preacts[i] = l.W * a + l.b;
    a.resize(preacts[i].size());
    for (int j = 0; j < a.size(); ++j) a[j] = act_value(l.act, preacts[i][j]);
  }

  GradientSet grads = zero_gradients(net);
  Eigen::VectorXd delta = upstream;
  for (size_t idx = n; idx-- > 0;) {
    const DenseLayer& l = net.layers[idx];
    Eigen::VectorXd dz(delta.size());
    for (int j = 0; j < dz.size(); ++j)
      dz[j] = delta[j] * act_derivative(l.act, preacts[idx][j]);
    grads.dW[idx] = dz * inputs[idx].transpose();
    grads.db[idx] = dz;
    delta = l.W.transpose() * dz;
  }
  return {std::move(grads), std::move(delta)};
}

OptState make_opt_state(const DenseNet& net) {
  OptState s;
  for (const DenseLayer& l : net.layers) {
    s.vW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
    s.vb.push_back(Eigen::VectorXd::Zero(l.b.size()));
  }
  return s;
}

void optimizer_step(DenseNet& net, const GradientSet& grads, OptState& state,
                    const OptConfig& config) {
  check_net(net);
  if (!(config.learning_rate > 0) || !std::isfinite(config.learning_rate))
    throw std::invalid_argument("learning rate must be positive");
  if (config.momentum < 0 || config.momentum >= 1 || !std::isfinite(config.momentum))
    throw std::invalid_argument("momentum must lie in [0, 1)");
  size_t n = net.layers.size();
  if (grads.dW.size() != n || grads.db.size() != n || state.vW.size() != n ||
      state.vb.size() != n)
    throw std::invalid_argument("gradient/state layer count mismatch");
  for (size_t i = 0; i < n; ++i) {
    const DenseLayer& l = net.layers[i];
    if (grads.dW[i].rows() != l.W.rows() || grads.dW[i].cols() != l.W.cols() ||
        grads.db[i].size() != l.b.size() || state.vW[i].rows() != l.W.rows() ||
        state.vW[i].cols() != l.W.cols() || state.vb[i].size() != l.b.size())
      throw std::invalid_argument("gradient/state shape mismatch");
    if (!grads.dW[i].allFinite() || !grads.db[i].allFinite())
      throw numeric_error("non-finite gradient in layer " + std::to_string(i));
  }
  for (size_t i = 0; i < n; ++i) {
    state.vW[i] = config.momentum * state.vW[i] + grads.dW[i];
    state.vb[i] = config.momentum * state.vb[i] + grads.db[i];
    net.layers[i].W -= config.learning_rate * state.vW[i];
    net.layers[i].b -= config.learning_rate * state.vb[i];
  }
}

void write_net_block(AtomicFile& f, const DenseNet& net) {
  check_net(net);
  f.write("EITN", 4);
  f.write_u32(1);  // version
  f.write_u32(uint32_t(net.layers.size()));
  for (const DenseLayer& l : net.layers) {
    f.write_u32(uint32_t(l.W.cols()));
    f.write_u32(uint32_t(l.W.rows()));
    f.write_u32(uint32_t(l.act));
  }
  for (const DenseLayer& l : net.layers) {
    for (int r = 0; r < l.W.rows(); ++r)
      for (int c = 0; c < l.W.cols(); ++c) f.write_f64(l.W(r, c));
    for (int j = 0; j < l.b.size(); ++j) f.write_f64(l.b[j]);
  }
}

DenseNet read_net_block(BinaryReader& r, const std::string& name) {
  r.expect_magic("EITN");
  if (r.u32() != 1) throw io_error(name + ": unsupported net version");
  uint32_t count = r.u32();
  if (count == 0 || count > 1024) throw io_error(name + ": bad layer count");
  DenseNet net;
  for (uint32_t i = 0; i < count; ++i) {
    DenseLayer l;
    uint32_t in = r.u32(), out = r.u32(), act = r.u32();
    if (in == 0 || out == 0 || in > 1u << 20 || out > 1u << 20)
      throw io_error(name + ": bad layer dims");
    if (act > 2) throw io_error(name + ": bad activation code");
    if (!net.layers.empty() && net.layers.back().W.rows() != int(in))
      throw io_error(name + ": layer dims do not chain");
    l.W.resize(out, in);
    l.b.resize(out);
    l.act = Act(act);
    net.layers.push_back(std::move(l));
  }
  for (DenseLayer& l : net.layers) {
    for (int rr = 0; rr < l.W.rows(); ++rr)
      for (int c = 0; c < l.W.cols(); ++c) l.W(rr, c) = r.f64();
    for (int j = 0; j < l.b.size(); ++j) l.b[j] = r.f64();
  }
  return net;
}

void save_net(const DenseNet& net, const std::string& path) {
  AtomicFile f(path);
  write_net_block(f, net);
  f.commit();
}

DenseNet load_net(const std::string& path) {
  BinaryReader r(read_binary_file(path), path);
  DenseNet net = read_net_block(r, path);
  r.done();
  return net;
}

}  // namespace eit
