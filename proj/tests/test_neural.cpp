#include <doctest.h>

#include <cmath>
#include <sstream>

#include "edgeadapt/neural.hpp"

using namespace edgeadapt;

namespace {

// Linear probe loss L = sum_k c_k * out_k; backward with dout = c then gives
// the exact analytic gradient of L, which central differences must match.
double probe_loss(const DenseNet& net, const Vec& input, const Vec& c) {
  const Vec out = net.forward(input);
  double loss = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) loss += c[k] * out[k];
  return loss;
}

void check_gradients(DenseNet& net, const Vec& input, const Vec& c,
                     double tolerance) {
  ForwardCache cache;
  net.forward(input, cache);
  Gradients grads = net.zero_gradients();
  net.backward(cache, c, grads);

  const double h = 1e-5;
  auto params = net.param_tensors();
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t]->size(); ++i) {
      double& p = (*params[t])[i];
      const double orig = p;
      p = orig + h;
      const double up = probe_loss(net, input, c);
      p = orig - h;
      const double down = probe_loss(net, input, c);
      p = orig;
      const double fd = (up - down) / (2.0 * h);
      const double analytic = grads.tensors[t][i];
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
      CHECK(std::abs(fd - analytic) / denom < tolerance);
    }
  }
}

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("identity layer passes input through") {
  Rng rng(1);
  DenseNet net = DenseNet::make({3, 3}, {Activation::Identity}, rng);
  auto& layer = net.layers()[0];
  std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) layer.weights.at(i, i) = 1.0;
  const Vec out = net.forward({0.5, -1.0, 2.0});
  CHECK(out == Vec{0.5, -1.0, 2.0});
}

TEST_CASE("zero weights output the bias") {
  Rng rng(2);
  DenseNet net = DenseNet::make({4, 2}, {Activation::Identity}, rng);
  auto& layer = net.layers()[0];
  std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
  layer.bias = {0.25, -0.75};
  CHECK(net.forward({1.0, 2.0, 3.0, 4.0}) == Vec{0.25, -0.75});
}

TEST_CASE("two-layer net matches hand-computed matrix product") {
  Rng rng(3);
  DenseNet net =
      DenseNet::make({2, 2, 2}, {Activation::Identity, Activation::Identity},
                     rng);
  auto& l0 = net.layers()[0];
  l0.weights.at(0, 0) = 1.0;
  l0.weights.at(0, 1) = 2.0;
  l0.weights.at(1, 0) = -1.0;
  l0.weights.at(1, 1) = 0.5;
  l0.bias = {0.1, -0.2};
  auto& l1 = net.layers()[1];
  l1.weights.at(0, 0) = 0.5;
  l1.weights.at(0, 1) = 1.5;
  l1.weights.at(1, 0) = 2.0;
  l1.weights.at(1, 1) = 0.0;
  l1.bias = {0.0, 1.0};

  // x = (1, 1): h = (1+2+0.1, -1+0.5-0.2) = (3.1, -0.7)
  //             y = (0.5*3.1 + 1.5*(-0.7), 2*3.1 + 1) = (0.5, 7.2)
  const Vec out = net.forward({1.0, 1.0});
  CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(7.2).epsilon(1e-12));
}

TEST_CASE("dimension mismatch rejected") {
  Rng rng(4);
  DenseNet net = DenseNet::make({3, 2}, {Activation::ReLU}, rng);
  CHECK_THROWS_AS(net.forward({1.0, 2.0}), ParameterError);
}

TEST_CASE("gradients match central finite differences") {
  Rng rng(20240212);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::vector<std::vector<Activation>> stacks = {
      {Activation::Identity},
      {Activation::ReLU, Activation::Identity},
      {Activation::Tanh, Activation::ReLU, Activation::Identity},
      {Activation::Tanh, Activation::Tanh},
  };
  for (const auto& acts : stacks) {
    std::vector<std::size_t> dims;
    dims.push_back(3);
    for (std::size_t l = 0; l < acts.size(); ++l) dims.push_back(4);
    DenseNet net = DenseNet::make(dims, acts, rng);
    Vec input(3), c(4);
    for (double& v : input) v = unit(rng);
    for (double& v : c) v = unit(rng);
    check_gradients(net, input, c, 1e-6);
  }
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  Rng rng(6);
  DenseNet net = DenseNet::make({3, 5, 2},
                                {Activation::Tanh, Activation::Identity}, rng);
  ForwardCache cache;
  net.forward({0.1, 0.2, 0.3}, cache);
  Gradients grads = net.zero_gradients();
  net.backward(cache, {0.0, 0.0}, grads);
  for (const Vec& t : grads.tensors) {
    for (double v : t) CHECK(v == 0.0);
  }
}

TEST_CASE("bias gradient of an identity layer equals the output gradient") {
  Rng rng(7);
  DenseNet net = DenseNet::make({2, 2}, {Activation::Identity}, rng);
  ForwardCache cache;
  net.forward({0.3, 0.7}, cache);
  Gradients grads = net.zero_gradients();
  net.backward(cache, {1.5, -2.5}, grads);
  CHECK(grads.tensors[1] == Vec{1.5, -2.5});
}

TEST_CASE("branched net forward equals manual composition and grad-checks") {
  Rng rng(8);
  const std::vector<InputGroup> groups = {{0, 2}, {2, 3}};
  BranchedNet net = BranchedNet::make(groups, 4, {6}, 3, rng);
  CHECK(net.input_dim() == 5);
  CHECK(net.output_dim() == 3);
  const Vec input = {0.1, -0.2, 0.3, 0.4, -0.5};
  const Vec out = net.forward(input);
  CHECK(out.size() == 3);

  // finite differences through the composite
  const Vec c = {0.7, -1.1, 0.4};
  BranchedNet::Cache cache;
  net.forward(input, cache);
  Gradients grads = net.zero_gradients();
  net.backward(cache, c, grads);
  const double h = 1e-5;
  auto params = net.param_tensors();
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t]->size(); ++i) {
      double& p = (*params[t])[i];
      const double orig = p;
      p = orig + h;
      Vec up_out = net.forward(input);
      p = orig - h;
      Vec down_out = net.forward(input);
      p = orig;
      double up = 0.0, down = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        up += c[k] * up_out[k];
        down += c[k] * down_out[k];
      }
      const double fd = (up - down) / (2.0 * h);
      const double analytic = grads.tensors[t][i];
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
      CHECK(std::abs(fd - analytic) / denom < 1e-6);
    }
  }
}

TEST_CASE("softmax basics") {
  const Vec uniform = softmax({1.0, 1.0, 1.0, 1.0});
  for (double p : uniform) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));

  const Vec a = softmax({1.0, 2.0, 3.0});
  const Vec b = softmax({101.0, 102.0, 103.0});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  double sum = 0.0;
  for (double p : a) sum += p;
  CHECK(std::abs(sum - 1.0) < 1e-12);

  CHECK_THROWS_AS(softmax({1.0, std::nan("")}), DivergenceError);
}

TEST_CASE("categorical sampling converges to the distribution") {
  const Vec probs = {0.1, 0.7, 0.2};
  Rng rng(20240213);
  std::vector<long long> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[sample_categorical(probs, rng)];
  for (std::size_t k = 0; k < probs.size(); ++k) {
    CHECK(std::abs(static_cast<double>(counts[k]) / n - probs[k]) < 0.01);
  }
  CHECK(log_prob(probs, 1) == doctest::Approx(std::log(0.7)).epsilon(1e-12));
}

TEST_CASE("adam: zero gradient leaves fresh parameters unchanged") {
  Rng rng(9);
  DenseNet net = DenseNet::make({2, 2}, {Activation::Identity}, rng);
  const Vec before = net.layers()[0].weights.data;
  AdamOptimizer opt(1e-3);
  Gradients grads = net.zero_gradients();
  opt.step(net.param_tensors(), grads);
  CHECK(net.layers()[0].weights.data == before);
}

TEST_CASE("adam: constant gradient drives a scalar monotonically down") {
  Rng rng(10);
  DenseNet net = DenseNet::make({1, 1}, {Activation::Identity}, rng);
  AdamOptimizer opt(1e-2);
  Gradients grads = net.zero_gradients();
  grads.tensors[0][0] = 1.0;  // dL/dw = +1 forever
  double prev = net.layers()[0].weights.data[0];
  for (int i = 0; i < 50; ++i) {
    opt.step(net.param_tensors(), grads);
    const double cur = net.layers()[0].weights.data[0];
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("adam: first step moves by about -lr") {
  Rng rng(11);
  DenseNet net = DenseNet::make({1, 1}, {Activation::Identity}, rng);
  const double before = net.layers()[0].weights.data[0];
  AdamOptimizer opt(1e-4);
  Gradients grads = net.zero_gradients();
  grads.tensors[0][0] = 1.0;
  opt.step(net.param_tensors(), grads);
  const double delta = net.layers()[0].weights.data[0] - before;
  CHECK(std::abs(delta - (-1e-4)) < 1e-6);
}

TEST_CASE("adam shape mismatch rejected") {
  Rng rng(12);
  DenseNet a = DenseNet::make({2, 2}, {Activation::Identity}, rng);
  DenseNet b = DenseNet::make({3, 3}, {Activation::Identity}, rng);
  AdamOptimizer opt(1e-3);
  Gradients grads = a.zero_gradients();
  opt.step(a.param_tensors(), grads);
  CHECK_THROWS_AS(opt.step(b.param_tensors(), b.zero_gradients()),
                  ParameterError);
}

TEST_CASE("net and optimizer serialization round trips") {
  Rng rng(13);
  BranchedNet net = BranchedNet::make({{0, 2}, {2, 2}}, 3, {4}, 2, rng);
  AdamOptimizer opt(1e-3);
  Gradients grads = net.zero_gradients();
  for (Vec& t : grads.tensors) {
    for (double& v : t) v = 0.1;
  }
  opt.step(net.param_tensors(), grads);

  std::stringstream buffer;
  net.save(buffer);
  opt.save(buffer);
  BranchedNet loaded_net = BranchedNet::load(buffer);
  AdamOptimizer loaded_opt = AdamOptimizer::load(buffer);

  const Vec input = {0.4, -0.3, 0.2, 0.9};
  CHECK(net.forward(input) == loaded_net.forward(input));
  CHECK(loaded_opt.step_count() == 1);

  // both optimizers keep evolving identically
  opt.step(net.param_tensors(), grads);
  loaded_opt.step(loaded_net.param_tensors(), grads);
  CHECK(net.forward(input) == loaded_net.forward(input));
}

}  // TEST_SUITE
