#pragma once

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "edgeadapt/estimation.hpp"
#include "edgeadapt/feedback.hpp"
#include "edgeadapt/neural.hpp"

namespace edgeadapt {

// Field order and normalization constants of the flattened policy state:
//   [0]                target accuracy A (already in [0,1])
//   [1]                bandwidth / bandwidth_max_mbps
//   [2]                estimated base size / bitrate_scale_mb
//   [3 .. 2+R]         estimated per-setting ratios (R = ratio_count)
//   [3+R .. 4+R+C]     feedback: C class IoUs, mIoU, drop flag
//   [.. +A]            previous action, one-hot over action_count
//   [last 5]           content features (base and delta / bitrate_scale_mb)
// Every experiment pins one layout; dimension drift is an error.
struct StateLayout {
  int num_classes = 8;
  std::size_t action_count = 90;
  std::size_t ratio_count = 18;
  double bandwidth_max_mbps = 1.0;
  double bitrate_scale_mb = 2.0;

  std::size_t dim() const {
    return 3 + ratio_count + static_cast<std::size_t>(num_classes) + 2 +
           action_count + ContentFeatures::kDim;
  }
};

// prev_action is -1 on the first step of an episode (all-zero one-hot).
Vec build_state(const StateLayout& layout, double target_accuracy,
                double bandwidth_mbps, const BitrateEstimate& est,
                const FeedbackVector& feedback, int prev_action,
                const ContentFeatures& features);

// new = alpha * observation + (1 - alpha) * old
inline double ema_update(double alpha, double old_value, double observation) {
  return alpha * observation + (1.0 - alpha) * old_value;
}

// Exponential moving averages of cost and constraint slack that the policy
// competes against. First observation initializes the averages directly.
struct SelfCompetitionState {
  double alpha = 0.2;
  double cost_ema = 0.0;
  double accuracy_slack_ema = 0.0;   // EMA of U = A - lambda
  double bandwidth_slack_ema = 0.0;  // EMA of O = b/T - B
  bool initialized = false;
};

struct RewardObservation {
  double cost = 0.0;             // normalized inference cost C_i
  double accuracy = 0.0;         // achieved mIoU (0 for dropped segments)
  double target_accuracy = 0.0;  // A_i
  double offered_mb = 0.0;       // segment size b_i
  double bandwidth_mbps = 0.0;   // B_i
  double duration_s = 1.0;       // slot length T
};

struct RewardBreakdown {
  int reward = 0;  // in {-1, 0, +1}
  double accuracy_slack = 0.0;
  double bandwidth_slack = 0.0;
  bool constraints_ok = false;  // delta: history and current step all satisfied
  bool regressed = false;       // xi: a slack failed to improve on its EMA
};

// Self-competition reward:
//   U = A - lambda, O = b/T - B (<= 0 means satisfied)
//   delta = [U_ema<=0 && O_ema<=0 && U<=0 && O<=0]  (EMAs before update)
//   xi    = [U >= U_ema || O >= O_ema]
//   r     = sgn(cost_ema - cost) * delta - xi, saturated at -1
// EMAs update afterwards. The very first call scores against the observation
// itself, so xi's >= comparison makes r = -1 by construction.
RewardBreakdown compute_reward(SelfCompetitionState& state,
                               const RewardObservation& obs);

// G_i = sum_k gamma^k r_{i+k}, computed backward with terminal bootstrap 0.
std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       double gamma);

enum class ActionMode { Train, Test };

// Train: sample from the softmax distribution. Test: argmax, lowest index on
// ties. Returns the chosen index and its log-probability.
std::pair<int, double> select_action(const BranchedNet& policy,
                                     const Vec& state, ActionMode mode,
                                     Rng& rng);

struct TrajectoryStep {
  Vec state;
  int action = 0;
  double log_prob = 0.0;  // under the behavior policy
  double reward = 0.0;
  double ret = 0.0;  // discounted return
  double value = 0.0;
  double advantage = 0.0;  // ret - value
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
};

// Environment surface the rollout collector drives. Episodes end via done;
// the collector resets lazily on the next step.
class Environment {
 public:
  virtual ~Environment() = default;

  struct StepResult {
    Vec next_state;
    double reward = 0.0;
    bool done = false;
  };

  virtual Vec reset() = 0;
  virtual StepResult step(int action) = 0;
};

// Collects fixed-horizon trajectories, carrying episodes across calls.
// Returns and advantages are finalized inside: discounted backward within
// each episode chunk, bootstrap 0 at episode ends and at horizon truncation.
class RolloutCollector {
 public:
  explicit RolloutCollector(Environment& env) : env_(env) {}

  Trajectory collect(const BranchedNet& policy, const BranchedNet& value,
                     int horizon, double gamma, ActionMode mode, Rng& rng);

 private:
  Environment& env_;
  Vec state_;
  bool need_reset_ = true;
};

struct TrainerConfig {
  double gamma = 0.9;
  double clip_epsilon = 0.2;
  int batch_size = 32;
  int horizon = 256;
  int update_epochs = 4;
  double lr_policy = 1e-4;
  double lr_value = 1e-4;
  double entropy_coef = 0.01;  // 0 disables the bonus
  // Negative means "no annealing"; otherwise the coefficient moves linearly
  // from entropy_coef to this value across total_steps, so late training
  // happens under the near-deterministic policy that evaluation will run.
  double entropy_coef_final = -1.0;
  long long total_steps = 100000;
  std::size_t branch_width = 32;
  std::size_t hidden_width = 128;
  int hidden_layers = 2;

  double entropy_coef_at(long long step) const {
    if (entropy_coef_final < 0.0 || total_steps <= 0) return entropy_coef;
    const double progress = std::min(
        1.0, static_cast<double>(step) / static_cast<double>(total_steps));
    return entropy_coef + (entropy_coef_final - entropy_coef) * progress;
  }
};

void validate(const TrainerConfig& cfg);

struct SurrogateStats {
  double surrogate = 0.0;  // mean min(R*adv, clip(R)*adv)
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Pure evaluation of the clipped objective on a set of steps (no update).
SurrogateStats evaluate_policy_objective(
    const BranchedNet& policy, const std::vector<const TrajectoryStep*>& steps,
    double clip_epsilon);

// Per-sample loss heads. Both return the minimized loss value and accumulate
// its exact parameter gradient; the trainer averages them over minibatches
// and the gradient-fidelity checks difference them directly.
struct PolicySampleStats {
  double loss = 0.0;       // -(min(R*adv, clip(R)*adv) + entropy_coef * H)
  double surrogate = 0.0;  // min(R*adv, clip(R)*adv)
  double entropy = 0.0;
  bool clipped = false;  // |R - 1| > clip_epsilon
};

PolicySampleStats policy_sample_grad(const BranchedNet& policy,
                                     const TrajectoryStep& step,
                                     double advantage, double clip_epsilon,
                                     double entropy_coef, Gradients& grads);

// Squared error (V(s) - G)^2 with its gradient.
double value_sample_grad(const BranchedNet& value, const TrajectoryStep& step,
                         Gradients& grads);

struct UpdateDiagnostics {
  double policy_loss = 0.0;  // -(surrogate + entropy_coef * entropy)
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Policy/value pair with their optimizers; owns the clipped-surrogate update.
class PpoTrainer {
 public:
  PpoTrainer(const StateLayout& layout, const TrainerConfig& cfg,
             std::uint64_t init_seed);

  const StateLayout& layout() const { return layout_; }
  const TrainerConfig& config() const { return config_; }
  const BranchedNet& policy() const { return policy_; }
  const BranchedNet& value() const { return value_; }
  BranchedNet& policy() { return policy_; }
  BranchedNet& value() { return value_; }

  // One clipped-surrogate update over the batch: advantages standardized
  // across the whole batch, then update_epochs passes of shuffled
  // batch_size minibatches. Throws DivergenceError on NaN losses.
  UpdateDiagnostics update(const std::vector<Trajectory>& batch, Rng& rng);

  // Entropy coefficient used by subsequent updates (annealing hook).
  void set_entropy_coef(double coef) { entropy_coef_ = coef; }
  double entropy_coef() const { return entropy_coef_; }

  void save(std::ostream& out, std::uint64_t master_seed) const;
  static PpoTrainer load(std::istream& in, std::uint64_t* master_seed);

 private:
  PpoTrainer(StateLayout layout, TrainerConfig cfg, BranchedNet policy,
             BranchedNet value, AdamOptimizer policy_opt,
             AdamOptimizer value_opt);

  StateLayout layout_;
  TrainerConfig config_;
  double entropy_coef_ = 0.0;
  BranchedNet policy_;
  BranchedNet value_;
  AdamOptimizer policy_opt_;
  AdamOptimizer value_opt_;
};

}  // namespace edgeadapt
