#include "edgeadapt/crl.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "edgeadapt/textio.hpp"

namespace edgeadapt {

Vec build_state(const StateLayout& layout, double target_accuracy,
                double bandwidth_mbps, const BitrateEstimate& est,
                const FeedbackVector& feedback, int prev_action,
                const ContentFeatures& features) {
  if (est.ratios.size() != layout.ratio_count) {
    throw ConfigurationError("bitrate estimate has " +
                             std::to_string(est.ratios.size()) +
                             " ratios, layout expects " +
                             std::to_string(layout.ratio_count));
  }
  if (feedback.class_iou.size() !=
      static_cast<std::size_t>(layout.num_classes)) {
    throw ConfigurationError("feedback has " +
                             std::to_string(feedback.class_iou.size()) +
                             " classes, layout expects " +
                             std::to_string(layout.num_classes));
  }
  if (prev_action >= static_cast<int>(layout.action_count)) {
    throw ConfigurationError("previous action outside the action space");
  }
  Vec state;
  state.reserve(layout.dim());
  state.push_back(target_accuracy);
  state.push_back(bandwidth_mbps / layout.bandwidth_max_mbps);
  state.push_back(est.base_mb / layout.bitrate_scale_mb);
  state.insert(state.end(), est.ratios.begin(), est.ratios.end());
  state.insert(state.end(), feedback.class_iou.begin(),
               feedback.class_iou.end());
  state.push_back(feedback.miou);
  state.push_back(feedback.drop_flag);
  for (std::size_t a = 0; a < layout.action_count; ++a) {
    state.push_back(prev_action == static_cast<int>(a) ? 1.0 : 0.0);
  }
  state.push_back(features.base_mb / layout.bitrate_scale_mb);
  state.push_back(features.mean_ratio);
  state.push_back(features.min_ratio);
  state.push_back(features.max_ratio);
  state.push_back(features.base_delta_mb / layout.bitrate_scale_mb);
  return state;
}

RewardBreakdown compute_reward(SelfCompetitionState& state,
                               const RewardObservation& obs) {
  if (obs.duration_s <= 0) throw ParameterError("duration must be positive");
  const double slack_acc = obs.target_accuracy - obs.accuracy;
  const double slack_bw = obs.offered_mb / obs.duration_s - obs.bandwidth_mbps;

  const bool first = !state.initialized;
  if (first) {
    state.cost_ema = obs.cost;
    state.accuracy_slack_ema = slack_acc;
    state.bandwidth_slack_ema = slack_bw;
    state.initialized = true;
    // Scoring proceeds against the observation itself; xi's >= comparison
    // then forces r = -1 on the first step.
  }

  const bool delta = state.accuracy_slack_ema <= 0.0 &&
                     state.bandwidth_slack_ema <= 0.0 && slack_acc <= 0.0 &&
                     slack_bw <= 0.0;
  const bool xi = slack_acc >= state.accuracy_slack_ema ||
                  slack_bw >= state.bandwidth_slack_ema;
  const double gap = state.cost_ema - obs.cost;
  const int sgn = gap > 0.0 ? 1 : (gap < 0.0 ? -1 : 0);
  // The raw score sgn*delta - xi can reach -2 when a satisfied-but-worse step
  // also raises cost; the reward is defined on {-1, 0, +1}, so it saturates.
  const int reward = std::max(sgn * (delta ? 1 : 0) - (xi ? 1 : 0), -1);

  if (!first) {
    state.cost_ema = ema_update(state.alpha, state.cost_ema, obs.cost);
    state.accuracy_slack_ema =
        ema_update(state.alpha, state.accuracy_slack_ema, slack_acc);
    state.bandwidth_slack_ema =
        ema_update(state.alpha, state.bandwidth_slack_ema, slack_bw);
  }

  return {reward, slack_acc, slack_bw, delta, xi};
}

std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw ParameterError("gamma must lie in [0, 1)");
  }
  std::vector<double> returns(rewards.size());
  double g = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    g = rewards[i] + gamma * g;
    returns[i] = g;
  }
  return returns;
}

std::pair<int, double> select_action(const BranchedNet& policy,
                                     const Vec& state, ActionMode mode,
                                     Rng& rng) {
  const Vec probs = softmax(policy.forward(state));
  int action = 0;
  if (mode == ActionMode::Train) {
    action = sample_categorical(probs, rng);
  } else {
    for (std::size_t i = 1; i < probs.size(); ++i) {
      if (probs[i] > probs[action]) action = static_cast<int>(i);
    }
  }
  return {action, log_prob(probs, action)};
}

Trajectory RolloutCollector::collect(const BranchedNet& policy,
                                     const BranchedNet& value, int horizon,
                                     double gamma, ActionMode mode, Rng& rng) {
  if (horizon <= 0) throw ParameterError("horizon must be positive");
  Trajectory out;
  out.steps.reserve(horizon);
  std::vector<char> terminal(horizon, 0);
  for (int t = 0; t < horizon; ++t) {
    if (need_reset_) {
      state_ = env_.reset();
      need_reset_ = false;
    }
    const auto [action, logp] = select_action(policy, state_, mode, rng);
    const double v = value.forward(state_)[0];
    Environment::StepResult res = env_.step(action);

    TrajectoryStep step;
    step.state = std::move(state_);
    step.action = action;
    step.log_prob = logp;
    step.reward = res.reward;
    step.value = v;
    out.steps.push_back(std::move(step));
    terminal[t] = res.done ? 1 : 0;
    if (res.done) {
      need_reset_ = true;
    } else {
      state_ = std::move(res.next_state);
    }
  }
  // Discounted returns per episode chunk; bootstrap 0 at episode ends and at
  // the horizon truncation.
  double g = 0.0;
  for (int t = horizon; t-- > 0;) {
    if (terminal[t]) g = 0.0;
    g = out.steps[t].reward + gamma * g;
    out.steps[t].ret = g;
    out.steps[t].advantage = g - out.steps[t].value;
  }
  return out;
}

void validate(const TrainerConfig& cfg) {
  if (cfg.gamma < 0.0 || cfg.gamma >= 1.0) {
    throw ParameterError("gamma must lie in [0, 1)");
  }
  if (cfg.clip_epsilon <= 0.0) throw ParameterError("clip epsilon must be > 0");
  if (cfg.batch_size <= 0) throw ParameterError("batch size must be > 0");
  if (cfg.horizon <= 0) throw ParameterError("horizon must be > 0");
  if (cfg.update_epochs <= 0) throw ParameterError("update epochs must be > 0");
  if (cfg.lr_policy < 0 || cfg.lr_value < 0) {
    throw ParameterError("learning rates must be >= 0");
  }
  if (cfg.entropy_coef < 0) throw ParameterError("entropy coef must be >= 0");
  if (cfg.total_steps < 0) throw ParameterError("total steps must be >= 0");
  if (cfg.branch_width == 0 || cfg.hidden_width == 0 || cfg.hidden_layers < 0) {
    throw ParameterError("network widths must be positive");
  }
}

namespace {

std::vector<InputGroup> state_groups(const StateLayout& layout) {
  std::vector<InputGroup> groups;
  std::size_t off = 0;
  auto push = [&](std::size_t size) {
    groups.push_back({off, size});
    off += size;
  };
  push(1);                          // target accuracy
  push(1);                          // bandwidth
  push(1 + layout.ratio_count);     // bitrate estimate
  push(layout.num_classes + 2);     // feedback
  push(layout.action_count);        // previous action
  push(ContentFeatures::kDim);      // content features
  return groups;
}

double entropy_of(const Vec& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

SurrogateStats evaluate_policy_objective(
    const BranchedNet& policy, const std::vector<const TrajectoryStep*>& steps,
    double clip_epsilon) {
  if (steps.empty()) throw ParameterError("no steps to evaluate");
  SurrogateStats stats;
  for (const TrajectoryStep* st : steps) {
    const Vec probs = softmax(policy.forward(st->state));
    const double ratio = std::exp(log_prob(probs, st->action) - st->log_prob);
    const double clipped =
        std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    stats.surrogate += std::min(ratio * st->advantage, clipped * st->advantage);
    stats.entropy += entropy_of(probs);
    if (std::abs(ratio - 1.0) > clip_epsilon) stats.clip_fraction += 1.0;
  }
  const double n = static_cast<double>(steps.size());
  stats.surrogate /= n;
  stats.entropy /= n;
  stats.clip_fraction /= n;
  return stats;
}

PolicySampleStats policy_sample_grad(const BranchedNet& policy,
                                     const TrajectoryStep& step,
                                     double advantage, double clip_epsilon,
                                     double entropy_coef, Gradients& grads) {
  BranchedNet::Cache cache;
  const Vec logits = policy.forward(step.state, cache);
  const Vec probs = softmax(logits);
  const double logp_new = log_prob(probs, step.action);
  const double ratio = std::exp(logp_new - step.log_prob);
  const double clipped =
      std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  const double surr1 = ratio * advantage;
  const double surr2 = clipped * advantage;
  const double h = entropy_of(probs);

  // d(min)/dratio: the unclipped branch when active, otherwise the clipped
  // branch whose slope vanishes outside the clip interval.
  double dobj_dratio;
  if (surr1 <= surr2) {
    dobj_dratio = advantage;
  } else {
    dobj_dratio =
        (ratio > 1.0 - clip_epsilon && ratio < 1.0 + clip_epsilon) ? advantage
                                                                   : 0.0;
  }
  Vec dlogits(probs.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double dlogp =
        (static_cast<int>(j) == step.action ? 1.0 : 0.0) - probs[j];
    const double p = probs[j];
    const double dent = p > 0.0 ? -p * (std::log(p) + h) : 0.0;
    dlogits[j] = -(dobj_dratio * ratio * dlogp + entropy_coef * dent);
  }
  policy.backward(cache, dlogits, grads);

  PolicySampleStats stats;
  stats.surrogate = std::min(surr1, surr2);
  stats.entropy = h;
  stats.clipped = std::abs(ratio - 1.0) > clip_epsilon;
  stats.loss = -(stats.surrogate + entropy_coef * h);
  return stats;
}

double value_sample_grad(const BranchedNet& value, const TrajectoryStep& step,
                         Gradients& grads) {
  BranchedNet::Cache cache;
  const double v = value.forward(step.state, cache)[0];
  const double diff = v - step.ret;
  value.backward(cache, {2.0 * diff}, grads);
  return diff * diff;
}

PpoTrainer::PpoTrainer(const StateLayout& layout, const TrainerConfig& cfg,
                       std::uint64_t init_seed)
    : layout_(layout),
      config_(cfg),
      entropy_coef_(cfg.entropy_coef),
      policy_opt_(cfg.lr_policy),
      value_opt_(cfg.lr_value) {
  validate(cfg);
  Rng rng(init_seed);
  const auto groups = state_groups(layout);
  std::vector<std::size_t> hidden(cfg.hidden_layers, cfg.hidden_width);
  policy_ = BranchedNet::make(groups, cfg.branch_width, hidden,
                              layout.action_count, rng);
  value_ = BranchedNet::make(groups, cfg.branch_width, hidden, 1, rng);
}

PpoTrainer::PpoTrainer(StateLayout layout, TrainerConfig cfg,
                       BranchedNet policy, BranchedNet value,
                       AdamOptimizer policy_opt, AdamOptimizer value_opt)
    : layout_(layout),
      config_(cfg),
      entropy_coef_(cfg.entropy_coef),
      policy_(std::move(policy)),
      value_(std::move(value)),
      policy_opt_(std::move(policy_opt)),
      value_opt_(std::move(value_opt)) {}

UpdateDiagnostics PpoTrainer::update(const std::vector<Trajectory>& batch,
                                     Rng& rng) {
  std::vector<const TrajectoryStep*> steps;
  for (const Trajectory& traj : batch) {
    for (const TrajectoryStep& st : traj.steps) steps.push_back(&st);
  }
  if (steps.empty()) throw ParameterError("ppo update on an empty batch");
  const std::size_t n = steps.size();

  // Standardize advantages across the whole batch; skipped when the batch is
  // (numerically) constant.
  double mean = 0.0;
  for (const TrajectoryStep* st : steps) mean += st->advantage;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const TrajectoryStep* st : steps) {
    var += (st->advantage - mean) * (st->advantage - mean);
  }
  var /= static_cast<double>(n);
  std::vector<double> adv(n);
  if (var >= 1e-12) {
    const double scale = 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) {
      adv[i] = (steps[i]->advantage - mean) * scale;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) adv[i] = steps[i]->advantage;
  }

  Gradients policy_grads = policy_.zero_gradients();
  Gradients value_grads = value_.zero_gradients();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  UpdateDiagnostics diag;
  long long minibatches = 0;
  const double eps = config_.clip_epsilon;

  for (int epoch = 0; epoch < config_.update_epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(config_.batch_size)) {
      const std::size_t end =
          std::min(n, start + static_cast<std::size_t>(config_.batch_size));
      const double m = static_cast<double>(end - start);
      policy_grads.zero();
      value_grads.zero();
      double surr_sum = 0.0, ent_sum = 0.0, clip_sum = 0.0, vloss_sum = 0.0;

      for (std::size_t k = start; k < end; ++k) {
        const TrajectoryStep& st = *steps[perm[k]];
        const PolicySampleStats ps = policy_sample_grad(
            policy_, st, adv[perm[k]], eps, entropy_coef_, policy_grads);
        surr_sum += ps.surrogate;
        ent_sum += ps.entropy;
        if (ps.clipped) clip_sum += 1.0;
        vloss_sum += value_sample_grad(value_, st, value_grads);
      }
      policy_grads.scale(1.0 / m);
      value_grads.scale(1.0 / m);

      if (!std::isfinite(surr_sum) || !std::isfinite(vloss_sum) ||
          !std::isfinite(ent_sum)) {
        throw DivergenceError("NaN loss in ppo update (surrogate=" +
                              std::to_string(surr_sum) + ", value=" +
                              std::to_string(vloss_sum) + ")");
      }
      policy_opt_.step(policy_.param_tensors(), policy_grads);
      value_opt_.step(value_.param_tensors(), value_grads);

      diag.surrogate += surr_sum / m;
      diag.entropy += ent_sum / m;
      diag.clip_fraction += clip_sum / m;
      diag.value_loss += vloss_sum / m;
      ++minibatches;
    }
  }
  diag.surrogate /= static_cast<double>(minibatches);
  diag.entropy /= static_cast<double>(minibatches);
  diag.clip_fraction /= static_cast<double>(minibatches);
  diag.value_loss /= static_cast<double>(minibatches);
  diag.policy_loss = -(diag.surrogate + entropy_coef_ * diag.entropy);
  return diag;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr int kCheckpointSchemaVersion = 1;
}

void PpoTrainer::save(std::ostream& out, std::uint64_t master_seed) const {
  out << "edgeadapt-checkpoint " << kCheckpointSchemaVersion << '\n';
  out << "seed " << master_seed << '\n';
  out << "layout " << layout_.num_classes << ' ' << layout_.action_count << ' '
      << layout_.ratio_count << ' ' << format_real(layout_.bandwidth_max_mbps)
      << ' ' << format_real(layout_.bitrate_scale_mb) << '\n';
  out << "trainer " << format_real(config_.gamma) << ' '
      << format_real(config_.clip_epsilon) << ' ' << config_.batch_size << ' '
      << config_.horizon << ' ' << config_.update_epochs << ' '
      << format_real(config_.lr_policy) << ' ' << format_real(config_.lr_value)
      << ' ' << format_real(config_.entropy_coef) << ' '
      << format_real(config_.entropy_coef_final) << ' ' << config_.total_steps
      << ' ' << config_.branch_width << ' ' << config_.hidden_width << ' '
      << config_.hidden_layers << '\n';
  out << "policy\n";
  policy_.save(out);
  out << "value\n";
  value_.save(out);
  out << "policy_optimizer\n";
  policy_opt_.save(out);
  out << "value_optimizer\n";
  value_opt_.save(out);
}

PpoTrainer PpoTrainer::load(std::istream& in, std::uint64_t* master_seed) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "edgeadapt-checkpoint") {
    throw ParseError("not a checkpoint stream");
  }
  if (version != kCheckpointSchemaVersion) {
    throw ParseError("checkpoint schema version " + std::to_string(version) +
                     " unsupported; this reader handles version " +
                     std::to_string(kCheckpointSchemaVersion));
  }
  std::uint64_t seed = 0;
  if (!(in >> tag >> seed) || tag != "seed") {
    throw ParseError("expected checkpoint seed");
  }
  if (master_seed) *master_seed = seed;

  StateLayout layout;
  std::string bw_max, scale;
  if (!(in >> tag >> layout.num_classes >> layout.action_count >>
        layout.ratio_count >> bw_max >> scale) ||
      tag != "layout") {
    throw ParseError("expected checkpoint layout");
  }
  layout.bandwidth_max_mbps = parse_real(bw_max, "bandwidth_max");
  layout.bitrate_scale_mb = parse_real(scale, "bitrate_scale");

  TrainerConfig cfg;
  std::string gamma, clip, lrp, lrv, ent, ent_final;
  if (!(in >> tag >> gamma >> clip >> cfg.batch_size >> cfg.horizon >>
        cfg.update_epochs >> lrp >> lrv >> ent >> ent_final >>
        cfg.total_steps >> cfg.branch_width >> cfg.hidden_width >>
        cfg.hidden_layers) ||
      tag != "trainer") {
    throw ParseError("expected checkpoint trainer config");
  }
  cfg.gamma = parse_real(gamma, "gamma");
  cfg.clip_epsilon = parse_real(clip, "clip");
  cfg.lr_policy = parse_real(lrp, "lr_policy");
  cfg.lr_value = parse_real(lrv, "lr_value");
  cfg.entropy_coef = parse_real(ent, "entropy_coef");
  cfg.entropy_coef_final = parse_real(ent_final, "entropy_coef_final");

  auto expect_section = [&](const char* name) {
    std::string s;
    if (!(in >> s) || s != name) {
      throw ParseError(std::string("expected checkpoint section ") + name);
    }
    in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  };
  expect_section("policy");
  BranchedNet policy = BranchedNet::load(in);
  expect_section("value");
  BranchedNet value = BranchedNet::load(in);
  expect_section("policy_optimizer");
  AdamOptimizer policy_opt = AdamOptimizer::load(in);
  expect_section("value_optimizer");
  AdamOptimizer value_opt = AdamOptimizer::load(in);

  if (policy.input_dim() != layout.dim() ||
      policy.output_dim() != layout.action_count || value.output_dim() != 1) {
    throw ParseError("checkpoint networks do not match its layout");
  }
  return PpoTrainer(layout, cfg, std::move(policy), std::move(value),
                    std::move(policy_opt), std::move(value_opt));
}

}  // namespace edgeadapt
