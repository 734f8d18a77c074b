#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "flow.hpp"

using namespace eit;

namespace {

// st_net that ignores its input and emits constant (s, t)
DenseNet constant_st_net(int in_dim, const Eigen::VectorXd& s, const Eigen::VectorXd& t) {
  DenseNet net;
  Eigen::VectorXd b(s.size() + t.size());
  b.head(s.size()) = s;
  b.tail(t.size()) = t;
  net.layers.push_back({Eigen::MatrixXd::Zero(b.size(), in_dim), b, Act::linear});
  return net;
}

CouplingLayer random_layer(Rng& rng, int n, int cond_dim) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  // Fisher-Yates with the deterministic rng
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[size_t(rng.raw() % (i + 1))]);
  int d = 1 + int(rng.raw() % (n - 1));
  CouplingLayer l;
  l.i1.assign(idx.begin(), idx.begin() + d);
  l.i2.assign(idx.begin() + d, idx.end());
  int hidden = 2 + int(rng.raw() % 6);
  l.st_net = make_dense_net({d + cond_dim, hidden, 2 * (n - d)},
                            {Act::tanh, Act::linear}, rng.raw());
  return l;
}

Eigen::VectorXd random_vector(Rng& rng, int n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

template <typename F>
Eigen::MatrixXd numerical_jacobian(F f, const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd plus = x, minus = x;
    plus[i] += h;
    minus[i] -= h;
    J.col(i) = (f(plus) - f(minus)) / (2 * h);
  }
  return J;
}

}  // namespace

TEST_CASE("identity coupling leaves input unchanged") {
  CouplingLayer l;
  l.i1 = {0, 1};
  l.i2 = {2, 3};
  l.st_net = constant_st_net(2, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
  Eigen::VectorXd x(4);
  x << 0.5, -1.0, 2.0, 3.5;
  auto [y, ld] = coupling_forward(l, x, Eigen::VectorXd());
  CHECK(y == x);
  CHECK(ld == 0.0);
  CHECK(coupling_inverse(l, y, Eigen::VectorXd()) == x);
}

TEST_CASE("closed-form 2-D coupling") {
  CouplingLayer l;
  l.i1 = {0};
  l.i2 = {1};
  Eigen::VectorXd s(1), t(1);
  s << std::log(2.0);
  t << 3.0;
  l.st_net = constant_st_net(1, s, t);

  Eigen::VectorXd x(2);
  x << 0.7, -1.25;
  auto [y, ld] = coupling_forward(l, x, Eigen::VectorXd());
  CHECK(y[0] == 0.7);
  CHECK(std::abs(y[1] - (2.0 * -1.25 + 3.0)) < 1e-15);
  CHECK(std::abs(ld - std::log(2.0)) < 1e-15);

  Eigen::VectorXd back = coupling_inverse(l, y, Eigen::VectorXd());
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("logdet matches the finite-difference Jacobian") {
  Rng rng(17);
  for (int trial = 0; trial < 8; ++trial) {
    int n = 8, cond_dim = int(rng.raw() % 3);
    CouplingLayer l = random_layer(rng, n, cond_dim);
    Eigen::VectorXd x = random_vector(rng, n, -1.5, 1.5);
    Eigen::VectorXd cond = random_vector(rng, cond_dim, -1, 1);

    auto [y, ld] = coupling_forward(l, x, cond);
    Eigen::MatrixXd J = numerical_jacobian(
        [&](const Eigen::VectorXd& p) { return coupling_forward(l, p, cond).first; },
        x);
    double num_ld = std::log(std::abs(J.determinant()));
    CHECK(std::abs(ld - num_ld) < 1e-5);
  }

  // whole stack, including a permutation step
  FlowStack stack = make_flow_stack(6, 2, 3, 4, 99);
  Eigen::VectorXd x = random_vector(rng, 6, -1, 1);
  Eigen::VectorXd cond = random_vector(rng, 2, -1, 1);
  auto [y, ld] = flow_forward(stack, x, cond);
  Eigen::MatrixXd J = numerical_jacobian(
      [&](const Eigen::VectorXd& p) { return flow_forward(stack, p, cond).first; }, x);
  CHECK(std::abs(ld - std::log(std::abs(J.determinant()))) < 1e-5);
}

TEST_CASE("round trips and logdet antisymmetry over random stacks") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    int dim = 2 + int(rng.raw() % 15);  // 2..16
    int cond_dim = int(rng.raw() % 4);
    int n_steps = 1 + int(rng.raw() % 4);

    FlowStack stack;
    stack.dim = dim;
    stack.condition_dim = cond_dim;
    if (trial % 2 == 0) {
      stack = make_flow_stack(dim, cond_dim, n_steps, 2 + int(rng.raw() % 6),
                              rng.raw());
    } else {
      for (int k = 0; k < n_steps; ++k) {
        FlowStep step;
        if (rng.raw() % 2) {
          step.permutation.resize(dim);
          for (int i = 0; i < dim; ++i) step.permutation[i] = i;
          for (int i = dim - 1; i > 0; --i)
            std::swap(step.permutation[i], step.permutation[size_t(rng.raw() % (i + 1))]);
        }
        step.coupling = random_layer(rng, dim, cond_dim);
        stack.steps.push_back(std::move(step));
      }
    }

    Eigen::VectorXd x = random_vector(rng, dim, -2, 2);
    Eigen::VectorXd cond = random_vector(rng, cond_dim, -1, 1);
    auto [y, ld_f] = flow_forward(stack, x, cond);
    auto [back, ld_i] = flow_inverse(stack, y, cond);
    CHECK((back - x).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(ld_f + ld_i) < 1e-10);

    // and the other direction
    auto [z, ld_i2] = flow_inverse(stack, x, cond);
    auto [fwd, ld_f2] = flow_forward(stack, z, cond);
    CHECK((fwd - x).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(ld_f2 + ld_i2) < 1e-10);
  }
}

TEST_CASE("flow_nll closed forms on the empty stack") {
  FlowStack empty;
  empty.dim = 3;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  double expected0 = 1.5 * std::log(2.0 * M_PI);
  CHECK(std::abs(flow_nll(empty, zero, Eigen::VectorXd()) - expected0) < 1e-12);

  Eigen::VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  CHECK(std::abs(flow_nll(empty, x, Eigen::VectorXd()) -
                 (expected0 + 0.5 * x.squaredNorm())) < 1e-12);
}

TEST_CASE("flow_nll agrees with numerical change of variables") {
  Rng rng(31);
  FlowStack stack = make_flow_stack(4, 1, 2, 5, 12345);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd x = random_vector(rng, 4, -1.5, 1.5);
    Eigen::VectorXd cond = random_vector(rng, 1, -1, 1);

    auto [z, ld_i] = flow_inverse(stack, x, cond);
    Eigen::MatrixXd Jinv = numerical_jacobian(
        [&](const Eigen::VectorXd& p) { return flow_inverse(stack, p, cond).first; },
        x);
    double log_p = -2.0 * std::log(2.0 * M_PI) - 0.5 * z.squaredNorm() +
                   std::log(std::abs(Jinv.determinant()));
    CHECK(std::abs(flow_nll(stack, x, cond) - (-log_p)) < 1e-4);
  }
}

TEST_CASE("1-D conditioned stacks integrate to one") {
  FlowStack stack = make_flow_stack(1, 2, 2, 4, 777);
  Eigen::VectorXd cond(2);
  cond << 0.4, -0.9;

  // Simpson quadrature of exp(-nll) over a wide interval
  double lo = -40.0, hi = 40.0;
  int n = 16000;  // even
  double h = (hi - lo) / n;
  auto density = [&](double v) {
    Eigen::VectorXd x(1);
    x << v;
    return std::exp(-flow_nll(stack, x, cond));
  };
  double acc = density(lo) + density(hi);
  for (int i = 1; i < n; ++i) acc += density(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  double integral = acc * h / 3.0;
  CHECK(std::abs(integral - 1.0) < 1e-3);

  CHECK_THROWS_AS(make_flow_stack(1, 0, 2, 4, 1), std::invalid_argument);
}

TEST_CASE("conditioning loss") {
  DenseNet id;
  id.layers.push_back({Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4),
                       Act::linear});
  Rng rng(41);
  std::vector<Eigen::VectorXd> vs, targets;
  for (int i = 0; i < 6; ++i) {
    vs.push_back(random_vector(rng, 4, -1, 1));
    targets.push_back(vs.back());
  }
  CHECK(conditioning_loss(id, vs, targets) == 0.0);

  DenseNet zero;
  zero.layers.push_back({Eigen::MatrixXd::Zero(4, 4), Eigen::VectorXd::Zero(4),
                         Act::linear});
  std::vector<Eigen::VectorXd> unit(6, Eigen::VectorXd::Ones(4));
  CHECK(conditioning_loss(zero, vs, unit) == 1.0);

  DenseNet h = make_dense_net({4, 5, 4}, {Act::tanh, Act::linear}, 3);
  std::vector<Eigen::VectorXd> rand_targets;
  for (int i = 0; i < 6; ++i) rand_targets.push_back(random_vector(rng, 4, -1, 1));
  double expected = 0;
  for (int i = 0; i < 6; ++i)
    expected += (net_forward(h, vs[i]) - rand_targets[i]).squaredNorm() / 4.0;
  expected /= 6.0;
  CHECK(std::abs(conditioning_loss(h, vs, rand_targets) - expected) < 1e-12);

  CHECK_THROWS_AS(conditioning_loss(h, {}, {}), std::invalid_argument);
}

TEST_CASE("cnf total loss composes its two terms") {
  Rng rng(51);
  int n_meas = 3, n_img = 6;
  FlowStack stack = make_flow_stack(n_img, n_img, 2, 4, 8);  // conditioned on h(v)
  DenseNet h = make_dense_net({n_meas, n_img}, {Act::linear}, 9);

  std::vector<Eigen::VectorXd> vs, targets;
  for (int i = 0; i < 5; ++i) {
    vs.push_back(random_vector(rng, n_meas, -1, 1));
    targets.push_back(random_vector(rng, n_img, -1, 1));
  }

  double mean_nll = 0;
  for (int i = 0; i < 5; ++i)
    mean_nll += flow_nll(stack, targets[i], net_forward(h, vs[i]));
  mean_nll /= 5.0;
  double cond_term = conditioning_loss(h, vs, targets);

  CHECK(std::abs(cnf_total_loss(stack, h, vs, targets, 0.0) - mean_nll) < 1e-12);
  double alpha = 2.5;
  CHECK(std::abs(cnf_total_loss(stack, h, vs, targets, alpha) -
                 (mean_nll + alpha * cond_term)) < 1e-12);

  // a conditioner that reproduces its targets exactly zeroes the second term
  std::vector<Eigen::VectorXd> exact_targets;
  for (int i = 0; i < 5; ++i) exact_targets.push_back(net_forward(h, vs[i]));
  double nll_only = 0;
  for (int i = 0; i < 5; ++i)
    nll_only += flow_nll(stack, exact_targets[i], net_forward(h, vs[i]));
  nll_only /= 5.0;
  CHECK(std::abs(cnf_total_loss(stack, h, vs, exact_targets, alpha) - nll_only) <
        1e-12);

  CHECK_THROWS_AS(cnf_total_loss(stack, h, vs, targets, -1.0), std::invalid_argument);
}

TEST_CASE("validation and non-finite detection") {
  Eigen::VectorXd x(4);
  x << 1, 2, 3, 4;

  CouplingLayer overlap;
  overlap.i1 = {0, 1};
  overlap.i2 = {1, 2};
  overlap.st_net = constant_st_net(2, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(coupling_forward(overlap, x, Eigen::VectorXd()),
                  std::invalid_argument);

  CouplingLayer gap;
  gap.i1 = {0};
  gap.i2 = {2, 3};
  gap.st_net = constant_st_net(1, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(coupling_forward(gap, x, Eigen::VectorXd()), std::invalid_argument);

  CouplingLayer wrong_net;
  wrong_net.i1 = {0, 1};
  wrong_net.i2 = {2, 3};
  wrong_net.st_net = constant_st_net(3, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(coupling_forward(wrong_net, x, Eigen::VectorXd()),
                  std::invalid_argument);

  // permutation that is not a bijection
  FlowStack stack = make_flow_stack(4, 0, 2, 3, 5);
  stack.steps[1].permutation = {0, 0, 1, 2};
  CHECK_THROWS_AS(flow_forward(stack, x, Eigen::VectorXd()), std::invalid_argument);

  // an exploding scale overflows exp and must be reported, not propagated
  CouplingLayer huge;
  huge.i1 = {0, 1};
  huge.i2 = {2, 3};
  huge.st_net = constant_st_net(2, Eigen::VectorXd::Constant(2, 1e4),
                                Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(coupling_forward(huge, x, Eigen::VectorXd()), numeric_error);

  DenseNet inf_net;
  inf_net.layers.push_back({Eigen::MatrixXd::Constant(4, 2, 1e308),
                            Eigen::VectorXd::Zero(4), Act::linear});
  CouplingLayer nf;
  nf.i1 = {0, 1};
  nf.i2 = {2, 3};
  nf.st_net = inf_net;
  CHECK_THROWS_AS(coupling_forward(nf, x, Eigen::VectorXd()), numeric_error);
}
