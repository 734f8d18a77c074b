#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "nnet.hpp"

using namespace eit;

namespace {

// Random net with pre-activations kept away from the relu kink so central
// finite differences stay valid.
DenseNet random_smooth_net(Rng& rng, std::vector<int>& dims_out,
                           Eigen::VectorXd& x_out) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    int n_layers = 1 + int(rng.raw() % 3);
    std::vector<int> dims(n_layers + 1);
    std::vector<Act> acts(n_layers);
    for (int& d : dims) d = 1 + int(rng.raw() % 16);
    for (Act& a : acts) a = Act(rng.raw() % 3);
    DenseNet net = make_dense_net(dims, acts, rng.raw());
    Eigen::VectorXd x(dims[0]);
    for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

    bool near_kink = false;
    Eigen::VectorXd a = x;
    for (const DenseLayer& l : net.layers) {
      Eigen::VectorXd z = l.W * a + l.b;
      if (l.act == Act::relu && z.cwiseAbs().minCoeff() < 1e-3) near_kink = true;
      a.resize(z.size());
      for (int i = 0; i < z.size(); ++i)
        a[i] = l.act == Act::relu ? std::max(z[i], 0.0)
                                  : (l.act == Act::tanh ? std::tanh(z[i]) : z[i]);
    }
    if (near_kink) continue;
    dims_out = dims;
    x_out = x;
    return net;
  }
  throw std::runtime_error("could not draw a kink-free net");
}

bool nets_identical(const DenseNet& a, const DenseNet& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].act != b.layers[i].act) return false;
    if (a.layers[i].W != b.layers[i].W) return false;
    if (a.layers[i].b != b.layers[i].b) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("construction and validation") {
  DenseNet net = make_dense_net({3, 5, 2}, {Act::relu, Act::linear}, 7);
  CHECK(net.input_dim() == 3);
  CHECK(net.output_dim() == 2);
  CHECK(net.layers.size() == 2);
  CHECK(net.layers[0].b.isZero());

  // Glorot bound for the first layer: sqrt(6/8)
  double bound = std::sqrt(6.0 / 8.0);
  CHECK(net.layers[0].W.cwiseAbs().maxCoeff() <= bound);
  CHECK(net.layers[0].W.cwiseAbs().maxCoeff() > 0.0);

  DenseNet again = make_dense_net({3, 5, 2}, {Act::relu, Act::linear}, 7);
  CHECK(nets_identical(net, again));
  DenseNet other = make_dense_net({3, 5, 2}, {Act::relu, Act::linear}, 8);
  CHECK(!nets_identical(net, other));

  CHECK_THROWS_AS(make_dense_net({3}, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_dense_net({3, 2}, {Act::relu, Act::relu}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_dense_net({3, 0, 2}, {Act::relu, Act::linear}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(net_forward(net, Eigen::VectorXd::Zero(4)), std::invalid_argument);
  CHECK_THROWS_AS(net_forward(DenseNet{}, Eigen::VectorXd::Zero(1)),
                  std::invalid_argument);
}

TEST_CASE("forward matches hand-evaluated cases") {
  // identity single linear layer
  DenseNet id;
  id.layers.push_back({Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3),
                       Act::linear});
  Eigen::VectorXd x(3);
  x << 0.3, -1.2, 4.0;
  CHECK(net_forward(id, x) == x);

  // relu on a negative input
  DenseNet rl;
  rl.layers.push_back({Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                       Act::relu});
  Eigen::VectorXd neg(2);
  neg << -1.0, -0.5;
  CHECK(net_forward(rl, neg).isZero());
  Eigen::VectorXd mixed(2);
  mixed << -1.0, 2.0;
  Eigen::VectorXd out = net_forward(rl, mixed);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 2.0);

  // two tanh layers with fixed weights, checked against the written-out
  // composition
  DenseNet t;
  Eigen::MatrixXd W1(2, 2), W2(1, 2);
  W1 << 0.5, -0.25, 1.0, 0.75;
  W2 << -1.5, 2.0;
  Eigen::VectorXd b1(2), b2(1);
  b1 << 0.1, -0.2;
  b2 << 0.05;
  t.layers.push_back({W1, b1, Act::tanh});
  t.layers.push_back({W2, b2, Act::tanh});
  Eigen::VectorXd in(2);
  in << 0.4, -0.6;
  double h1 = std::tanh(0.5 * 0.4 + (-0.25) * (-0.6) + 0.1);
  double h2 = std::tanh(1.0 * 0.4 + 0.75 * (-0.6) - 0.2);
  double expected = std::tanh(-1.5 * h1 + 2.0 * h2 + 0.05);
  CHECK(std::abs(net_forward(t, in)[0] - expected) < 1e-12);
}

TEST_CASE("backward: exact rules on a linear layer") {
  DenseNet net;
  Eigen::MatrixXd W(2, 3);
  W << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd b(2);
  b << 0.5, -0.5;
  net.layers.push_back({W, b, Act::linear});

  Eigen::VectorXd x(3), up(2);
  x << 0.2, -0.7, 1.1;
  up << 2.0, -3.0;
  auto [grads, dx] = net_backward(net, x, up);

  // weight gradient is the outer product upstream x input, exactly
  CHECK(grads.dW[0] == up * x.transpose());
  CHECK(grads.db[0] == up);
  CHECK(dx == W.transpose() * up);

  // zero upstream zeroes everything
  auto [zg, zdx] = net_backward(net, x, Eigen::VectorXd::Zero(2));
  CHECK(zg.dW[0].isZero());
  CHECK(zg.db[0].isZero());
  CHECK(zdx.isZero());

  CHECK_THROWS_AS(net_backward(net, x, Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("backward matches central finite differences on random nets") {
  Rng rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<int> dims;
    Eigen::VectorXd x;
    DenseNet net = random_smooth_net(rng, dims, x);
    Eigen::VectorXd up(net.output_dim());
    for (int i = 0; i < up.size(); ++i) up[i] = rng.uniform(-1.0, 1.0);

    auto [grads, dx] = net_backward(net, x, up);
    const double h = 1e-5;
    auto scalar_loss = [&](const DenseNet& n, const Eigen::VectorXd& in) {
      return up.dot(net_forward(n, in));
    };

    for (size_t li = 0; li < net.layers.size(); ++li) {
      for (int r = 0; r < net.layers[li].W.rows(); ++r)
        for (int c = 0; c < net.layers[li].W.cols(); ++c) {
          DenseNet plus = net, minus = net;
          plus.layers[li].W(r, c) += h;
          minus.layers[li].W(r, c) -= h;
          double fd = (scalar_loss(plus, x) - scalar_loss(minus, x)) / (2 * h);
          CHECK(std::abs(fd - grads.dW[li](r, c)) <=
                1e-5 * std::max(1.0, std::abs(fd)));
        }
      for (int r = 0; r < net.layers[li].b.size(); ++r) {
        DenseNet plus = net, minus = net;
        plus.layers[li].b[r] += h;
        minus.layers[li].b[r] -= h;
        double fd = (scalar_loss(plus, x) - scalar_loss(minus, x)) / (2 * h);
        CHECK(std::abs(fd - grads.db[li][r]) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
    for (int i = 0; i < x.size(); ++i) {
      Eigen::VectorXd plus = x, minus = x;
      plus[i] += h;
      minus[i] -= h;
      double fd = (scalar_loss(net, plus) - scalar_loss(net, minus)) / (2 * h);
      CHECK(std::abs(fd - dx[i]) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("optimizer: zero gradient, quadratic toy, determinism") {
  DenseNet net = make_dense_net({2, 3, 1}, {Act::tanh, Act::linear}, 11);
  DenseNet before = net;
  OptState state = make_opt_state(net);
  optimizer_step(net, zero_gradients(net), state, {});
  CHECK(nets_identical(net, before));

  // non-finite gradients are rejected and leave the net untouched
  GradientSet bad = zero_gradients(net);
  bad.dW[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(optimizer_step(net, bad, state, {}), numeric_error);
  CHECK(nets_identical(net, before));
  CHECK_THROWS_AS(optimizer_step(net, bad, state, {-1.0, 0.9}),
                  std::invalid_argument);
  GradientSet wrong = zero_gradients(net);
  wrong.dW.pop_back();
  CHECK_THROWS_AS(optimizer_step(net, wrong, state, {}), std::invalid_argument);

  // 1-D quadratic (theta - 3)^2: a single 1x1 linear bias-free layer driven to
  // the minimizer. The default rate contracts too slowly for 200 steps, so the
  // toy uses 0.05.
  DenseNet q;
  q.layers.push_back({Eigen::MatrixXd::Constant(1, 1, -2.0),
                      Eigen::VectorXd::Zero(1), Act::linear});
  OptState qs = make_opt_state(q);
  OptConfig qc{0.05, 0.9};
  for (int step = 0; step < 200; ++step) {
    GradientSet g = zero_gradients(q);
    g.dW[0](0, 0) = 2.0 * (q.layers[0].W(0, 0) - 3.0);
    optimizer_step(q, g, qs, qc);
  }
  CHECK(std::abs(q.layers[0].W(0, 0) - 3.0) < 1e-3);

  // bitwise determinism of a short training run
  auto run = [] {
    DenseNet n = make_dense_net({3, 4, 2}, {Act::relu, Act::linear}, 5);
    OptState s = make_opt_state(n);
    Rng r(99);
    for (int step = 0; step < 50; ++step) {
      Eigen::VectorXd x(3), up(2);
      for (int i = 0; i < 3; ++i) x[i] = r.uniform(-1, 1);
      for (int i = 0; i < 2; ++i) up[i] = r.uniform(-1, 1);
      optimizer_step(n, net_backward(n, x, up).first, s, {});
    }
    return n;
  };
  CHECK(nets_identical(run(), run()));
}

TEST_CASE("momentum accelerates along a constant gradient") {
  DenseNet n;
  n.layers.push_back({Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1),
                      Act::linear});
  OptState s = make_opt_state(n);
  GradientSet g = zero_gradients(n);
  g.dW[0](0, 0) = 1.0;
  OptConfig c{0.1, 0.5};
  optimizer_step(n, g, s, c);
  CHECK(std::abs(n.layers[0].W(0, 0) - (-0.1)) < 1e-15);  // v = 1
  optimizer_step(n, g, s, c);
  // v = 0.5 + 1 = 1.5, param = -0.1 - 0.15
  CHECK(std::abs(n.layers[0].W(0, 0) - (-0.25)) < 1e-15);
}

TEST_CASE("full-batch regression on a linear map recovers it") {
  Rng rng(2024);
  Eigen::MatrixXd target(4, 6);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 6; ++c) target(r, c) = rng.uniform(-1.0, 1.0);

  int n_samples = 500;
  std::vector<Eigen::VectorXd> vs(n_samples), zs(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    Eigen::VectorXd v(6);
    for (int j = 0; j < 6; ++j) v[j] = rng.normal();
    vs[i] = v;
    zs[i] = target * v;
  }

  DenseNet net = make_dense_net({6, 4}, {Act::linear}, 31);
  OptState state = make_opt_state(net);
  OptConfig cfg{0.05, 0.9};
  auto loss = [&] {
    double s = 0;
    for (int i = 0; i < n_samples; ++i)
      s += (net_forward(net, vs[i]) - zs[i]).squaredNorm();
    return s / n_samples;
  };
  double initial = loss();
  for (int epoch = 0; epoch < 400; ++epoch) {
    GradientSet g = zero_gradients(net);
    for (int i = 0; i < n_samples; ++i) {
      Eigen::VectorXd up = 2.0 * (net_forward(net, vs[i]) - zs[i]) / n_samples;
      accumulate_gradients(g, net_backward(net, vs[i], up).first);
    }
    optimizer_step(net, g, state, cfg);
  }
  CHECK(loss() < 1e-4 * initial);
  CHECK((net.layers[0].W - target).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("checkpoint round trip and corruption handling") {
  DenseNet net = make_dense_net({5, 7, 3}, {Act::relu, Act::tanh}, 77);
  net.layers[1].b[0] = -0.125;
  save_net(net, "net_rt.bin");
  DenseNet back = load_net("net_rt.bin");
  CHECK(nets_identical(net, back));

  std::string bytes = read_text_file("net_rt.bin");
  {
    std::string bad = bytes;
    bad[0] = 'X';
    write_text_atomic("net_bad.bin", bad);
    CHECK_THROWS_AS(load_net("net_bad.bin"), io_error);
  }
  {
    std::string bad = bytes.substr(0, bytes.size() - 5);
    write_text_atomic("net_bad.bin", bad);
    CHECK_THROWS_AS(load_net("net_bad.bin"), io_error);
  }
  {
    std::string bad = bytes + std::string(3, '\0');
    write_text_atomic("net_bad.bin", bad);
    CHECK_THROWS_AS(load_net("net_bad.bin"), io_error);
  }
  {
    std::string bad = bytes;
    bad[12 + 8] = 9;  // first layer activation code -> invalid
    write_text_atomic("net_bad.bin", bad);
    CHECK_THROWS_AS(load_net("net_bad.bin"), io_error);
  }
  std::remove("net_rt.bin");
  std::remove("net_bad.bin");
  CHECK_THROWS_AS(load_net("net_missing.bin"), io_error);
}
