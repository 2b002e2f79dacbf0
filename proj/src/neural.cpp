#include "edgeadapt/neural.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "edgeadapt/textio.hpp"

namespace edgeadapt {

namespace {

double activate(Activation act, double x) {
  switch (act) {
    case Activation::Identity: return x;
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

// Derivative in terms of the pre-activation value.
double activate_grad(Activation act, double pre) {
  switch (act) {
    case Activation::Identity: return 1.0;
    case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

const char* activation_name(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  throw ParseError("unknown activation '" + name + "'");
}

void write_vec(std::ostream& out, const char* tag, const Vec& v) {
  out << tag;
  for (double x : v) out << ' ' << format_real(x);
  out << '\n';
}

Vec read_vec(std::istream& in, const char* tag, std::size_t expected) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(std::string("unexpected end of stream reading ") + tag);
  }
  std::istringstream is(line);
  std::string head;
  is >> head;
  if (head != tag) {
    throw ParseError("expected '" + std::string(tag) + "', got '" + head + "'");
  }
  Vec v;
  v.reserve(expected);
  std::string tok;
  while (is >> tok) v.push_back(parse_real(tok, tag));
  if (v.size() != expected) {
    throw ParseError(std::string(tag) + ": expected " +
                     std::to_string(expected) + " values, got " +
                     std::to_string(v.size()));
  }
  return v;
}

}  // namespace

void Gradients::zero() {
  for (Vec& t : tensors) std::fill(t.begin(), t.end(), 0.0);
}

void Gradients::add_scaled(const Gradients& other, double factor) {
  if (other.tensors.size() != tensors.size()) {
    throw ParameterError("gradient tensor count mismatch");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (other.tensors[i].size() != tensors[i].size()) {
      throw ParameterError("gradient tensor shape mismatch");
    }
    for (std::size_t j = 0; j < tensors[i].size(); ++j) {
      tensors[i][j] += factor * other.tensors[i][j];
    }
  }
}

void Gradients::scale(double factor) {
  for (Vec& t : tensors) {
    for (double& x : t) x *= factor;
  }
}

DenseNet DenseNet::make(const std::vector<std::size_t>& dims,
                        const std::vector<Activation>& activations, Rng& rng) {
  if (dims.size() < 2) throw ParameterError("DenseNet needs >= 1 layer");
  if (activations.size() != dims.size() - 1) {
    throw ParameterError("one activation per layer required");
  }
  DenseNet net;
  net.layers_.reserve(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] == 0 || dims[l + 1] == 0) {
      throw ParameterError("layer dimensions must be positive");
    }
    DenseLayer layer;
    layer.weights = Matrix::zeros(dims[l + 1], dims[l]);
    layer.bias.assign(dims[l + 1], 0.0);
    layer.activation = activations[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    std::uniform_real_distribution<double> init(-bound, bound);
    for (double& w : layer.weights.data) w = init(rng);
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

std::size_t DenseNet::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().weights.cols;
}

std::size_t DenseNet::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().weights.rows;
}

Vec DenseNet::forward(const Vec& input) const {
  ForwardCache cache;
  return forward(input, cache);
}

Vec DenseNet::forward(const Vec& input, ForwardCache& cache) const {
  if (input.size() != input_dim()) {
    throw ParameterError("input dimension mismatch: got " +
                         std::to_string(input.size()) + ", expected " +
                         std::to_string(input_dim()));
  }
  cache.input = input;
  cache.pre.resize(layers_.size());
  cache.post.resize(layers_.size());
  const Vec* x = &cache.input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    Vec& pre = cache.pre[l];
    pre.assign(layer.weights.rows, 0.0);
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
      const double* wrow = &layer.weights.data[r * layer.weights.cols];
      double acc = layer.bias[r];
      for (std::size_t c = 0; c < layer.weights.cols; ++c) {
        acc += wrow[c] * (*x)[c];
      }
      pre[r] = acc;
    }
    Vec& post = cache.post[l];
    post.resize(pre.size());
    for (std::size_t r = 0; r < pre.size(); ++r) {
      post[r] = activate(layer.activation, pre[r]);
    }
    x = &post;
  }
  return cache.post.back();
}

Vec DenseNet::backward(const ForwardCache& cache, const Vec& output_grad,
                       Gradients& grads) const {
  if (cache.post.size() != layers_.size()) {
    throw ParameterError("forward cache does not match network");
  }
  if (output_grad.size() != output_dim()) {
    throw ParameterError("output gradient dimension mismatch");
  }
  if (grads.tensors.size() != 2 * layers_.size()) {
    throw ParameterError("gradient accumulator does not match network");
  }
  Vec delta = output_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    for (std::size_t r = 0; r < delta.size(); ++r) {
      delta[r] *= activate_grad(layer.activation, cache.pre[l][r]);
    }
    const Vec& below = (l == 0) ? cache.input : cache.post[l - 1];
    Vec& dw = grads.tensors[2 * l];
    Vec& db = grads.tensors[2 * l + 1];
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
      double* dwrow = &dw[r * layer.weights.cols];
      for (std::size_t c = 0; c < layer.weights.cols; ++c) {
        dwrow[c] += delta[r] * below[c];
      }
      db[r] += delta[r];
    }
    Vec next(layer.weights.cols, 0.0);
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
      const double* wrow = &layer.weights.data[r * layer.weights.cols];
      for (std::size_t c = 0; c < layer.weights.cols; ++c) {
        next[c] += wrow[c] * delta[r];
      }
    }
    delta = std::move(next);
  }
  return delta;
}

Gradients DenseNet::zero_gradients() const {
  Gradients g;
  g.tensors.reserve(2 * layers_.size());
  for (const DenseLayer& layer : layers_) {
    g.tensors.emplace_back(layer.weights.data.size(), 0.0);
    g.tensors.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

std::vector<Vec*> DenseNet::param_tensors() {
  std::vector<Vec*> out;
  out.reserve(2 * layers_.size());
  for (DenseLayer& layer : layers_) {
    out.push_back(&layer.weights.data);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Vec*> DenseNet::param_tensors() const {
  std::vector<const Vec*> out;
  out.reserve(2 * layers_.size());
  for (const DenseLayer& layer : layers_) {
    out.push_back(&layer.weights.data);
    out.push_back(&layer.bias);
  }
  return out;
}

void DenseNet::save(std::ostream& out) const {
  out << "densenet " << layers_.size() << '\n';
  for (const DenseLayer& layer : layers_) {
    out << "layer " << layer.weights.cols << ' ' << layer.weights.rows << ' '
        << activation_name(layer.activation) << '\n';
    write_vec(out, "W", layer.weights.data);
    write_vec(out, "b", layer.bias);
  }
}

DenseNet DenseNet::load(std::istream& in) {
  std::string head;
  std::size_t count = 0;
  if (!(in >> head >> count) || head != "densenet") {
    throw ParseError("expected densenet header");
  }
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  DenseNet net;
  net.layers_.resize(count);
  for (std::size_t l = 0; l < count; ++l) {
    std::string tag, act;
    std::size_t in_dim = 0, out_dim = 0;
    if (!(in >> tag >> in_dim >> out_dim >> act) || tag != "layer") {
      throw ParseError("expected layer header");
    }
    in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    DenseLayer& layer = net.layers_[l];
    layer.activation = activation_from_name(act);
    layer.weights = Matrix{out_dim, in_dim,
                           read_vec(in, "W", in_dim * out_dim)};
    layer.bias = read_vec(in, "b", out_dim);
  }
  return net;
}

// ---------------------------------------------------------------------------
// BranchedNet
// ---------------------------------------------------------------------------

BranchedNet BranchedNet::make(const std::vector<InputGroup>& groups,
                              std::size_t branch_width,
                              const std::vector<std::size_t>& trunk_hidden,
                              std::size_t output_dim, Rng& rng) {
  if (groups.empty()) throw ParameterError("BranchedNet needs input groups");
  BranchedNet net;
  net.groups_ = groups;
  std::size_t end = 0;
  for (const InputGroup& g : groups) {
    if (g.size == 0) throw ParameterError("input group is empty");
    if (g.offset != end) {
      throw ParameterError("input groups must tile the input contiguously");
    }
    end = g.offset + g.size;
    net.branches_.push_back(
        DenseNet::make({g.size, branch_width}, {Activation::ReLU}, rng));
  }
  net.input_dim_ = end;

  std::vector<std::size_t> dims;
  dims.push_back(groups.size() * branch_width);
  for (std::size_t h : trunk_hidden) dims.push_back(h);
  dims.push_back(output_dim);
  std::vector<Activation> acts(dims.size() - 1, Activation::ReLU);
  acts.back() = Activation::Identity;  // logits / raw value
  net.trunk_ = DenseNet::make(dims, acts, rng);
  return net;
}

Vec BranchedNet::forward(const Vec& input) const {
  Cache cache;
  return forward(input, cache);
}

Vec BranchedNet::forward(const Vec& input, Cache& cache) const {
  if (input.size() != input_dim_) {
    throw ParameterError("input dimension mismatch: got " +
                         std::to_string(input.size()) + ", expected " +
                         std::to_string(input_dim_));
  }
  cache.input = input;
  cache.branch.resize(branches_.size());
  Vec concat;
  concat.reserve(branches_.size() * branches_.front().output_dim());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    Vec slice(input.begin() + groups_[g].offset,
              input.begin() + groups_[g].offset + groups_[g].size);
    Vec out = branches_[g].forward(slice, cache.branch[g]);
    concat.insert(concat.end(), out.begin(), out.end());
  }
  return trunk_.forward(concat, cache.trunk);
}

void BranchedNet::backward(const Cache& cache, const Vec& output_grad,
                           Gradients& grads) const {
  const std::size_t per_branch = 2;  // W and b tensors per single-layer branch
  if (grads.tensors.size() !=
      per_branch * branches_.size() + 2 * trunk_.layers().size()) {
    throw ParameterError("gradient accumulator does not match network");
  }
  Gradients trunk_grads;
  trunk_grads.tensors.assign(
      grads.tensors.begin() + per_branch * branches_.size(),
      grads.tensors.end());
  const Vec dconcat = trunk_.backward(cache.trunk, output_grad, trunk_grads);
  for (std::size_t i = 0; i < trunk_grads.tensors.size(); ++i) {
    grads.tensors[per_branch * branches_.size() + i] =
        std::move(trunk_grads.tensors[i]);
  }
  const std::size_t width = branches_.front().output_dim();
  for (std::size_t g = 0; g < branches_.size(); ++g) {
    Gradients branch_grads;
    branch_grads.tensors.assign(grads.tensors.begin() + per_branch * g,
                                grads.tensors.begin() + per_branch * (g + 1));
    const Vec dout(dconcat.begin() + g * width,
                   dconcat.begin() + (g + 1) * width);
    branches_[g].backward(cache.branch[g], dout, branch_grads);
    for (std::size_t i = 0; i < per_branch; ++i) {
      grads.tensors[per_branch * g + i] = std::move(branch_grads.tensors[i]);
    }
  }
}

Gradients BranchedNet::zero_gradients() const {
  Gradients g;
  for (const DenseNet& branch : branches_) {
    Gradients bg = branch.zero_gradients();
    for (Vec& t : bg.tensors) g.tensors.push_back(std::move(t));
  }
  Gradients tg = trunk_.zero_gradients();
  for (Vec& t : tg.tensors) g.tensors.push_back(std::move(t));
  return g;
}

std::vector<Vec*> BranchedNet::param_tensors() {
  std::vector<Vec*> out;
  for (DenseNet& branch : branches_) {
    for (Vec* t : branch.param_tensors()) out.push_back(t);
  }
  for (Vec* t : trunk_.param_tensors()) out.push_back(t);
  return out;
}

std::vector<const Vec*> BranchedNet::param_tensors() const {
  std::vector<const Vec*> out;
  for (const DenseNet& branch : branches_) {
    for (const Vec* t : branch.param_tensors()) out.push_back(t);
  }
  for (const Vec* t : trunk_.param_tensors()) out.push_back(t);
  return out;
}

void BranchedNet::save(std::ostream& out) const {
  out << "branchednet " << groups_.size() << '\n';
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    out << "group " << groups_[g].offset << ' ' << groups_[g].size << '\n';
    branches_[g].save(out);
  }
  out << "trunk\n";
  trunk_.save(out);
}

BranchedNet BranchedNet::load(std::istream& in) {
  std::string head;
  std::size_t count = 0;
  if (!(in >> head >> count) || head != "branchednet") {
    throw ParseError("expected branchednet header");
  }
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  BranchedNet net;
  for (std::size_t g = 0; g < count; ++g) {
    std::string tag;
    InputGroup group;
    if (!(in >> tag >> group.offset >> group.size) || tag != "group") {
      throw ParseError("expected group header");
    }
    in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    net.groups_.push_back(group);
    net.branches_.push_back(DenseNet::load(in));
  }
  std::string trunk_tag;
  if (!(in >> trunk_tag) || trunk_tag != "trunk") {
    throw ParseError("expected trunk section");
  }
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  net.trunk_ = DenseNet::load(in);
  net.input_dim_ = net.groups_.back().offset + net.groups_.back().size;
  return net;
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

Vec softmax(const Vec& logits) {
  if (logits.empty()) throw ParameterError("softmax of empty vector");
  double max_logit = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) {
      throw DivergenceError("non-finite logit in softmax");
    }
    max_logit = std::max(max_logit, v);
  }
  Vec probs(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

int sample_categorical(const Vec& probs, Rng& rng) {
  if (probs.empty()) throw ParameterError("sampling from empty distribution");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);  // guard against rounding
}

double log_prob(const Vec& probs, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= probs.size()) {
    throw ParameterError("log_prob index out of range");
  }
  return std::log(std::max(probs[index], 1e-300));
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2,
                             double epsilon)
    : learning_rate_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon) {
  if (learning_rate < 0) throw ParameterError("learning rate must be >= 0");
}

void AdamOptimizer::step(const std::vector<Vec*>& params,
                         const Gradients& grads) {
  if (params.size() != grads.tensors.size()) {
    throw ParameterError("parameter/gradient tensor count mismatch");
  }
  if (first_moment_.empty()) {
    for (const Vec* p : params) {
      first_moment_.emplace_back(p->size(), 0.0);
      second_moment_.emplace_back(p->size(), 0.0);
    }
  }
  if (first_moment_.size() != params.size()) {
    throw ParameterError("optimizer state does not match parameters");
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Vec& p = *params[t];
    const Vec& g = grads.tensors[t];
    if (p.size() != g.size() || p.size() != first_moment_[t].size()) {
      throw ParameterError("parameter/gradient shape mismatch");
    }
    Vec& m = first_moment_[t];
    Vec& v = second_moment_[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= learning_rate_ * mhat / (std::sqrt(vhat) + epsilon_);
    }
  }
}

void AdamOptimizer::save(std::ostream& out) const {
  out << "adam " << format_real(learning_rate_) << ' ' << format_real(beta1_)
      << ' ' << format_real(beta2_) << ' ' << format_real(epsilon_) << ' '
      << step_count_ << ' ' << first_moment_.size() << '\n';
  for (std::size_t t = 0; t < first_moment_.size(); ++t) {
    write_vec(out, "m", first_moment_[t]);
    write_vec(out, "v", second_moment_[t]);
  }
}

AdamOptimizer AdamOptimizer::load(std::istream& in) {
  std::string head, lr, b1, b2, eps;
  long long steps = 0;
  std::size_t tensors = 0;
  if (!(in >> head >> lr >> b1 >> b2 >> eps >> steps >> tensors) ||
      head != "adam") {
    throw ParseError("expected adam header");
  }
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  AdamOptimizer opt(parse_real(lr, "lr"), parse_real(b1, "beta1"),
                    parse_real(b2, "beta2"), parse_real(eps, "epsilon"));
  opt.step_count_ = steps;
  for (std::size_t t = 0; t < tensors; ++t) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("truncated adam state");
    std::istringstream mline(line);
    std::string tag, tok;
    mline >> tag;
    if (tag != "m") throw ParseError("expected m tensor");
    Vec m;
    while (mline >> tok) m.push_back(parse_real(tok, "m"));
    if (!std::getline(in, line)) throw ParseError("truncated adam state");
    std::istringstream vline(line);
    vline >> tag;
    if (tag != "v") throw ParseError("expected v tensor");
    Vec v;
    while (vline >> tok) v.push_back(parse_real(tok, "v"));
    if (v.size() != m.size()) throw ParseError("adam tensor shape mismatch");
    opt.first_moment_.push_back(std::move(m));
    opt.second_moment_.push_back(std::move(v));
  }
  return opt;
}

}  // namespace edgeadapt
