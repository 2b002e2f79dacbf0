#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "edgeadapt/errors.hpp"
#include "edgeadapt/rng.hpp"

namespace edgeadapt {

using Vec = std::vector<double>;

enum class Activation { Identity, ReLU, Tanh };

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  static Matrix zeros(std::size_t rows, std::size_t cols) {
    return {rows, cols, std::vector<double>(rows * cols, 0.0)};
  }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct DenseLayer {
  Matrix weights;  // out x in
  Vec bias;        // out
  Activation activation = Activation::Identity;
};

// Per-layer activations captured during a forward pass; backward consumes it.
struct ForwardCache {
  Vec input;
  std::vector<Vec> pre;   // affine outputs, before activation
  std::vector<Vec> post;  // after activation
};

// Parameter-shaped gradient accumulator. Tensor order mirrors the owning
// net's param_tensors(): weights then bias, layer by layer.
struct Gradients {
  std::vector<Vec> tensors;

  void zero();
  void add_scaled(const Gradients& other, double factor);
  void scale(double factor);
};

// Plain fully connected feed-forward network, 64-bit floats throughout.
class DenseNet {
 public:
  DenseNet() = default;

  // dims = {input, hidden..., output}; one activation per layer.
  // Weights are initialized uniform in +-1/sqrt(fan_in), biases zero.
  static DenseNet make(const std::vector<std::size_t>& dims,
                       const std::vector<Activation>& activations, Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Vec forward(const Vec& input) const;
  Vec forward(const Vec& input, ForwardCache& cache) const;

  // Exact reverse-mode gradients of the forward map. Accumulates parameter
  // gradients into `grads` and returns the gradient w.r.t. the input.
  Vec backward(const ForwardCache& cache, const Vec& output_grad,
               Gradients& grads) const;

  Gradients zero_gradients() const;
  std::vector<Vec*> param_tensors();
  std::vector<const Vec*> param_tensors() const;

  void save(std::ostream& out) const;
  static DenseNet load(std::istream& in);

 private:
  std::vector<DenseLayer> layers_;
};

// Input slice routed through its own branch layer.
struct InputGroup {
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Branch-then-trunk topology: each input group passes through a dedicated
// fully connected ReLU layer; the branch outputs are concatenated and fed to
// a shared DenseNet trunk.
class BranchedNet {
 public:
  BranchedNet() = default;

  static BranchedNet make(const std::vector<InputGroup>& groups,
                          std::size_t branch_width,
                          const std::vector<std::size_t>& trunk_hidden,
                          std::size_t output_dim, Rng& rng);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return trunk_.output_dim(); }

  struct Cache {
    Vec input;
    std::vector<ForwardCache> branch;
    ForwardCache trunk;
  };

  Vec forward(const Vec& input) const;
  Vec forward(const Vec& input, Cache& cache) const;
  void backward(const Cache& cache, const Vec& output_grad,
                Gradients& grads) const;

  Gradients zero_gradients() const;
  std::vector<Vec*> param_tensors();
  std::vector<const Vec*> param_tensors() const;

  void save(std::ostream& out) const;
  static BranchedNet load(std::istream& in);

 private:
  std::vector<InputGroup> groups_;
  std::vector<DenseNet> branches_;  // single-layer each
  DenseNet trunk_;
  std::size_t input_dim_ = 0;
};

// Numerically stabilized softmax (max subtraction). Throws DivergenceError
// on non-finite logits.
Vec softmax(const Vec& logits);
int sample_categorical(const Vec& probs, Rng& rng);
double log_prob(const Vec& probs, int index);

// Adaptive-moment optimizer (decay 0.9/0.999, eps 1e-8, bias-corrected).
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8);

  void step(const std::vector<Vec*>& params, const Gradients& grads);

  double learning_rate() const { return learning_rate_; }
  long long step_count() const { return step_count_; }

  void save(std::ostream& out) const;
  static AdamOptimizer load(std::istream& in);

 private:
  double learning_rate_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long long step_count_ = 0;
  std::vector<Vec> first_moment_;
  std::vector<Vec> second_moment_;
};

}  // namespace edgeadapt
