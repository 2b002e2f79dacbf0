#include "edgeadapt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "edgeadapt/rng.hpp"
#include "edgeadapt/textio.hpp"

namespace edgeadapt {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// --------------------------------------------------------------------------
// Configuration parsing
// --------------------------------------------------------------------------

namespace {

constexpr int kConfigSchemaVersion = 1;

PolicySpec parse_policy(const json& j) {
  PolicySpec spec;
  const std::string kind = j.value("kind", "crl");
  if (kind == "crl") {
    spec.kind = PolicySpec::Kind::Crl;
    spec.checkpoint = j.value("checkpoint", "");
  } else if (kind == "crl_untrained") {
    spec.kind = PolicySpec::Kind::CrlUntrained;
  } else if (kind == "optimal") {
    spec.kind = PolicySpec::Kind::Optimal;
  } else if (kind == "profiling") {
    spec.kind = PolicySpec::Kind::Profiling;
    spec.profiling_period = j.value("period", 40);
  } else if (kind == "fixed") {
    spec.kind = PolicySpec::Kind::Fixed;
    spec.fixed_cfg.resolution_scale = j.value("resolution", 1.0);
    spec.fixed_cfg.qp = j.value("qp", 20);
    spec.fixed_cfg.model_version = j.value("model_version", 0);
  } else {
    throw ParseError("unknown policy kind '" + kind + "'");
  }
  return spec;
}

GeneratorParams parse_generator(const json& j) {
  GeneratorParams p;
  p.segment_count = j.value("segment_count", p.segment_count);
  p.duration_s = j.value("duration_s", p.duration_s);
  p.fps = j.value("fps", p.fps);
  p.base_size_mean_mb = j.value("base_size_mean_mb", p.base_size_mean_mb);
  p.scene_phi = j.value("scene_phi", p.scene_phi);
  p.scene_volatility = j.value("scene_volatility", p.scene_volatility);
  p.size_resolution_exponent =
      j.value("size_resolution_exponent", p.size_resolution_exponent);
  p.qp_decay = j.value("qp_decay", p.qp_decay);
  p.difficulty_size_coupling =
      j.value("difficulty_size_coupling", p.difficulty_size_coupling);
  p.difficulty_phi = j.value("difficulty_phi", p.difficulty_phi);
  p.difficulty_volatility =
      j.value("difficulty_volatility", p.difficulty_volatility);
  p.res_penalty = j.value("res_penalty", p.res_penalty);
  p.qp_penalty = j.value("qp_penalty", p.qp_penalty);
  p.version_penalty = j.value("version_penalty", p.version_penalty);
  p.accuracy_sharpness = j.value("accuracy_sharpness", p.accuracy_sharpness);
  p.noise_level = j.value("noise_level", p.noise_level);
  p.crossover_prob = j.value("crossover_prob", p.crossover_prob);
  p.crossover_strength = j.value("crossover_strength", p.crossover_strength);
  return p;
}

}  // namespace

std::string PolicySpec::name() const {
  switch (kind) {
    case Kind::Crl: return "crl";
    case Kind::CrlUntrained: return "crl-untrained";
    case Kind::Optimal: return "optimal";
    case Kind::Profiling: return "profiling";
    case Kind::Fixed: {
      std::ostringstream os;
      os << "fixed(r=" << fixed_cfg.resolution_scale << ",qp=" << fixed_cfg.qp
         << ",v=" << fixed_cfg.model_version << ")";
      return os.str();
    }
  }
  return "unknown";
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("config parse failure: " + std::string(e.what()));
  }

  const int version = j.value("schema_version", -1);
  if (version != kConfigSchemaVersion) {
    throw ParseError("config schema version " + std::to_string(version) +
                     " unsupported; this reader handles version " +
                     std::to_string(kConfigSchemaVersion));
  }
  if (!j.contains("seed")) throw ParseError("config is missing 'seed'");

  ExperimentConfig cfg;
  cfg.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("space")) {
    const json& s = j.at("space");
    cfg.space = ConfigurationSpace(
        s.at("resolutions").get<std::vector<double>>(),
        s.at("qps").get<std::vector<int>>(),
        s.at("model_versions").get<std::vector<int>>());
  }
  if (j.contains("cost_model")) {
    const json& c = j.at("cost_model");
    const auto costs = c.at("model_base_cost").get<std::vector<double>>();
    if (costs.size() != cfg.space.model_versions().size()) {
      throw ParseError("cost_model entries do not match model versions");
    }
    std::map<int, double> by_version;
    for (std::size_t i = 0; i < costs.size(); ++i) {
      by_version[cfg.space.model_versions()[i]] = costs[i];
    }
    cfg.cost_model = CostModel(by_version, c.value("resolution_exponent", 2.0));
  }

  if (j.contains("trace")) {
    const json& t = j.at("trace");
    const std::string source = t.value("source", "generator");
    if (source == "file") {
      if (!t.contains("path")) throw ParseError("trace file source needs path");
      cfg.trace_from_file = true;
      cfg.trace_path = t.at("path").get<std::string>();
    } else if (source == "generator") {
      if (t.contains("params")) cfg.generator = parse_generator(t.at("params"));
    } else {
      throw ParseError("unknown trace source '" + source + "'");
    }
  }

  if (j.contains("bandwidth")) {
    const json& b = j.at("bandwidth");
    const std::string mode = b.value("mode", "constant");
    if (mode == "constant") {
      cfg.bandwidth.mode = BandwidthSpec::Mode::Constant;
      cfg.bandwidth.value_mbps = b.value("value", 0.6);
    } else if (mode == "range") {
      cfg.bandwidth.mode = BandwidthSpec::Mode::Range;
      cfg.bandwidth.low_mbps = b.value("low", 0.3);
      cfg.bandwidth.high_mbps = b.value("high", 1.0);
      if (cfg.bandwidth.low_mbps <= 0 ||
          cfg.bandwidth.high_mbps < cfg.bandwidth.low_mbps) {
        throw ParseError("invalid bandwidth range");
      }
    } else if (mode == "file") {
      cfg.bandwidth.mode = BandwidthSpec::Mode::Trace;
      cfg.bandwidth.trace =
          load_bandwidth(b.at("path").get<std::string>());
    } else {
      throw ParseError("unknown bandwidth mode '" + mode + "'");
    }
  }

  if (j.contains("target_accuracy")) {
    const json& t = j.at("target_accuracy");
    const std::string mode = t.value("mode", "constant");
    if (mode == "constant") {
      cfg.target.mode = TargetSpec::Mode::Constant;
      cfg.target.value = t.value("value", 0.65);
    } else if (mode == "set") {
      cfg.target.mode = TargetSpec::Mode::Set;
      if (t.contains("values")) {
        cfg.target.values = t.at("values").get<std::vector<double>>();
      }
      if (cfg.target.values.empty()) {
        throw ParseError("target accuracy set is empty");
      }
    } else {
      throw ParseError("unknown target accuracy mode '" + mode + "'");
    }
  }

  if (j.contains("estimator")) {
    const json& e = j.at("estimator");
    const std::string kind = e.value("kind", "noisy");
    if (kind == "oracle") {
      cfg.estimator.kind = EstimatorSpec::Kind::Oracle;
    } else if (kind == "noisy") {
      cfg.estimator.kind = EstimatorSpec::Kind::Noisy;
      cfg.estimator.rel_error = e.value("rel_error", 0.1722);
    } else if (kind == "ar") {
      cfg.estimator.kind = EstimatorSpec::Kind::Ar;
    } else {
      throw ParseError("unknown estimator kind '" + kind + "'");
    }
  }

  if (j.contains("feedback")) {
    const json& f = j.at("feedback");
    cfg.feedback.num_classes = f.value("classes", 8);
    cfg.feedback.class_spread = f.value("class_spread", 0.3);
    const std::string mode = f.value("mode", "class_iou");
    if (mode == "class_iou") {
      cfg.feedback_mode = FeedbackMode::ClassIoU;
    } else if (mode == "prev_bitrate") {
      cfg.feedback_mode = FeedbackMode::PrevBitrate;
    } else if (mode == "noisy_accuracy") {
      cfg.feedback_mode = FeedbackMode::NoisyAccuracy;
    } else {
      throw ParseError("unknown feedback mode '" + mode + "'");
    }
    cfg.feedback_accuracy_noise = f.value("accuracy_noise", 0.05);
  }

  if (j.contains("layout")) {
    const json& l = j.at("layout");
    cfg.layout.bandwidth_max_mbps = l.value("bandwidth_max_mbps", 1.0);
    cfg.layout.bitrate_scale_mb = l.value("bitrate_scale_mb", 2.0);
  }
  // Structural layout fields always derive from the space and feedback
  // settings; letting a config set them independently invites drift.
  cfg.layout.num_classes = cfg.feedback.num_classes;
  cfg.layout.action_count = cfg.space.size();
  cfg.layout.ratio_count = cfg.space.compression_settings();

  if (j.contains("trainer")) {
    const json& t = j.at("trainer");
    TrainerConfig& tc = cfg.trainer;
    tc.gamma = t.value("gamma", tc.gamma);
    tc.clip_epsilon = t.value("clip_epsilon", tc.clip_epsilon);
    tc.batch_size = t.value("batch_size", tc.batch_size);
    tc.horizon = t.value("horizon", tc.horizon);
    tc.update_epochs = t.value("update_epochs", tc.update_epochs);
    tc.lr_policy = t.value("lr_policy", tc.lr_policy);
    tc.lr_value = t.value("lr_value", tc.lr_value);
    tc.entropy_coef = t.value("entropy_coef", tc.entropy_coef);
    tc.entropy_coef_final =
        t.value("entropy_coef_final", tc.entropy_coef_final);
    tc.total_steps = t.value("total_steps", tc.total_steps);
    tc.branch_width = t.value("branch_width", tc.branch_width);
    tc.hidden_width = t.value("hidden_width", tc.hidden_width);
    tc.hidden_layers = t.value("hidden_layers", tc.hidden_layers);
    validate(tc);
  }

  if (j.contains("evaluation")) {
    cfg.eval_episodes = j.at("evaluation").value("episodes", 50);
    if (cfg.eval_episodes <= 0) throw ParseError("episodes must be positive");
  }

  if (j.contains("policy")) cfg.policy = parse_policy(j.at("policy"));

  if (j.contains("compare")) {
    const json& c = j.at("compare");
    if (c.contains("policies")) {
      for (const json& p : c.at("policies")) {
        cfg.compare_policies.push_back(parse_policy(p));
      }
    }
    if (c.contains("bandwidths")) {
      cfg.compare_bandwidths = c.at("bandwidths").get<std::vector<double>>();
    }
    if (c.contains("targets")) {
      cfg.compare_targets = c.at("targets").get<std::vector<double>>();
    }
  }

  if (j.contains("output_dir")) {
    cfg.output_dir = std::filesystem::path(j.at("output_dir").get<std::string>());
  }
  return cfg;
}

// --------------------------------------------------------------------------
// SegmentEnv
// --------------------------------------------------------------------------

SegmentEnv::SegmentEnv(const ExperimentConfig& cfg, std::uint64_t master_seed,
                       std::string stream)
    : cfg_(cfg), master_seed_(master_seed), stream_(std::move(stream)) {
  if (cfg_.estimator.kind == EstimatorSpec::Kind::Noisy) {
    noisy_.emplace(cfg_.space, cfg_.estimator.rel_error);
  } else if (cfg_.estimator.kind == EstimatorSpec::Kind::Ar) {
    // Offline fit, shared across streams: on the source trace when reading
    // from a file, otherwise on a dedicated trace from the same family.
    const TraceSet fit_trace =
        cfg_.trace_from_file
            ? load_trace(cfg_.trace_path)
            : generate_trace(cfg_.generator, derive_seed(master_seed_, "ar-fit"));
    ar_model_ = fit_ar_model(cfg_.space, fit_trace);
  }
  if (cfg_.trace_from_file) {
    trace_ = load_trace(cfg_.trace_path);
    if (!(trace_.space == cfg_.space)) {
      throw ConfigurationError("trace file space does not match experiment");
    }
  }
}

const SegmentRecord& SegmentEnv::upcoming_record() const {
  return trace_.segments.at(index_);
}

double SegmentEnv::current_bandwidth() const {
  if (cfg_.bandwidth.mode == BandwidthSpec::Mode::Trace) {
    return cfg_.bandwidth.trace.at(static_cast<std::size_t>(index_));
  }
  return bandwidth_constant_;
}

BitrateEstimate SegmentEnv::estimate(const SegmentRecord& record) {
  switch (cfg_.estimator.kind) {
    case EstimatorSpec::Kind::Oracle:
      return estimate_oracle(cfg_.space, record);
    case EstimatorSpec::Kind::Noisy:
      return noisy_->estimate(record, env_rng_);
    case EstimatorSpec::Kind::Ar:
      return estimate_ar(*ar_model_, prev_true_base_mb_);
  }
  return estimate_oracle(cfg_.space, record);
}

FeedbackVector SegmentEnv::make_feedback() {
  const int classes = cfg_.feedback.num_classes;
  if (!have_prev_outcome_) return FeedbackVector::zeros(classes);

  const SegmentRecord& prev = trace_.segments[index_ - 1];
  switch (cfg_.feedback_mode) {
    case FeedbackMode::ClassIoU:
      return feedback_for(cfg_.feedback, prev_status_, cfg_.space, prev_cfg_,
                          prev);
    case FeedbackMode::PrevBitrate: {
      FeedbackVector fb = FeedbackVector::zeros(classes);
      fb.class_iou[0] = std::clamp(
          prev.bitrate(cfg_.space, prev_cfg_) / cfg_.layout.bitrate_scale_mb,
          0.0, 1.0);
      fb.drop_flag = prev_status_ == DeliveryStatus::Dropped ? 1.0 : 0.0;
      return fb;
    }
    case FeedbackMode::NoisyAccuracy: {
      FeedbackVector fb = FeedbackVector::zeros(classes);
      if (prev_status_ == DeliveryStatus::Dropped) {
        fb.drop_flag = 1.0;
        return fb;
      }
      std::normal_distribution<double> normal(0.0, 1.0);
      fb.miou = std::clamp(prev.accuracy_of(cfg_.space, prev_cfg_) +
                               cfg_.feedback_accuracy_noise * normal(env_rng_),
                           0.0, 1.0);
      return fb;
    }
  }
  return FeedbackVector::zeros(classes);
}

Vec SegmentEnv::state_for_upcoming(int prev_action) {
  const SegmentRecord& record = trace_.segments[index_];
  BitrateEstimate est = estimate(record);
  const FeedbackVector fb = make_feedback();
  const ContentFeatures features =
      content_features(est, have_prev_estimate_ ? &prev_estimate_ : nullptr);
  Vec state = build_state(cfg_.layout, target_, current_bandwidth(), est, fb,
                          prev_action, features);
  prev_estimate_ = std::move(est);
  have_prev_estimate_ = true;
  return state;
}

Vec SegmentEnv::reset() {
  ++episode_;
  if (!cfg_.trace_from_file) {
    trace_ = generate_trace(
        cfg_.generator,
        derive_seed(master_seed_, stream_ + "-trace",
                    static_cast<std::uint64_t>(episode_)));
  }
  env_rng_.seed(derive_seed(master_seed_, stream_ + "-env",
                            static_cast<std::uint64_t>(episode_)));

  target_ = cfg_.target.value;
  if (cfg_.target.mode == TargetSpec::Mode::Set) {
    std::uniform_int_distribution<std::size_t> pick(
        0, cfg_.target.values.size() - 1);
    target_ = cfg_.target.values[pick(env_rng_)];
  }
  bandwidth_constant_ = cfg_.bandwidth.value_mbps;
  if (cfg_.bandwidth.mode == BandwidthSpec::Mode::Range) {
    std::uniform_real_distribution<double> pick(cfg_.bandwidth.low_mbps,
                                                cfg_.bandwidth.high_mbps);
    bandwidth_constant_ = pick(env_rng_);
  }

  session_ = std::make_unique<StreamSession>(
      trace_.segments.front().duration_s);
  competition_ = SelfCompetitionState{};
  index_ = 0;
  have_prev_outcome_ = false;
  have_prev_estimate_ = false;
  if (ar_model_) {
    // No history yet: start the AR recursion from its stationary mean.
    const double denom = 1.0 - ar_model_->coefficient;
    prev_true_base_mb_ =
        std::max(std::abs(denom) > 1e-9 ? ar_model_->intercept / denom
                                        : ar_model_->intercept,
                 kArBaseFloorMb);
  }
  return state_for_upcoming(-1);
}

Environment::StepResult SegmentEnv::step(int action) {
  if (episode_ < 0 || index_ >= static_cast<int>(trace_.segments.size())) {
    throw ParameterError("step called without reset");
  }
  const SegmentRecord& record = trace_.segments[index_];
  const Configuration cfg =
      cfg_.space.config_at(static_cast<std::size_t>(action));
  const double size_mb = record.bitrate(cfg_.space, cfg);
  const double bandwidth = current_bandwidth();
  const TransmissionOutcome outcome = session_->step(size_mb, bandwidth);
  const bool delivered = outcome.status == DeliveryStatus::Delivered;

  // A dropped segment cannot be decoded: no accuracy, no inference cost.
  const double miou = delivered ? record.accuracy_of(cfg_.space, cfg) : 0.0;
  const double cost = delivered ? cfg_.cost_model.cost(cfg) : 0.0;

  RewardObservation obs;
  obs.cost = cost;
  obs.accuracy = miou;
  obs.target_accuracy = target_;
  obs.offered_mb = size_mb;
  obs.bandwidth_mbps = bandwidth;
  obs.duration_s = session_->segment_duration_s();
  const RewardBreakdown rb = compute_reward(competition_, obs);

  SegmentLogRow row;
  row.episode = static_cast<int>(episode_);
  row.segment = record.segment_id;
  row.cfg = cfg;
  row.size_mb = size_mb;
  row.delivered = delivered;
  row.achieved_miou = miou;
  row.cost = cost;
  row.reward = rb.reward;
  row.accuracy_slack = rb.accuracy_slack;
  row.bandwidth_slack = rb.bandwidth_slack;
  row.target = target_;
  row.bandwidth_mbps = bandwidth;
  log_.push_back(row);

  prev_status_ = outcome.status;
  prev_cfg_ = cfg;
  prev_true_base_mb_ = record.bitrate_mb[cfg_.space.compression_index(
      cfg_.space.resolutions().front(), cfg_.space.qps().front())];
  have_prev_outcome_ = true;
  ++index_;

  StepResult result;
  result.reward = rb.reward;
  result.done = index_ == static_cast<int>(trace_.segments.size());
  if (!result.done) {
    result.next_state = state_for_upcoming(action);
  }
  return result;
}

// --------------------------------------------------------------------------
// Reports
// --------------------------------------------------------------------------

namespace {

double percentile(std::vector<double> sorted, double q) {
  // linear interpolation between closest ranks; input must be sorted
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace

Aggregates compute_aggregates(const std::vector<SegmentLogRow>& rows) {
  Aggregates agg;
  agg.segments = static_cast<long long>(rows.size());
  if (rows.empty()) return agg;
  long long failures = 0, drops = 0;
  double cost_sum = 0.0;
  std::vector<double> mious;
  mious.reserve(rows.size());
  for (const SegmentLogRow& r : rows) {
    if (r.achieved_miou < r.target) ++failures;
    if (!r.delivered) ++drops;
    cost_sum += r.cost;
    mious.push_back(r.achieved_miou);
  }
  std::sort(mious.begin(), mious.end());
  const double n = static_cast<double>(rows.size());
  agg.failure_rate = static_cast<double>(failures) / n;
  agg.drop_rate = static_cast<double>(drops) / n;
  agg.mean_cost = cost_sum / n;
  agg.accuracy_p10 = percentile(mious, 0.10);
  agg.accuracy_p25 = percentile(mious, 0.25);
  agg.accuracy_p50 = percentile(mious, 0.50);
  return agg;
}

namespace {

void write_summary_json(const ordered_json& body,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  out << body.dump(2) << '\n';
  if (!out) throw ParseError("write failed: " + path.string());
}

ordered_json aggregates_json(const Aggregates& agg) {
  ordered_json a;
  a["segments"] = agg.segments;
  a["failure_rate"] = agg.failure_rate;
  a["mean_cost"] = agg.mean_cost;
  a["drop_rate"] = agg.drop_rate;
  a["accuracy_p10"] = agg.accuracy_p10;
  a["accuracy_p25"] = agg.accuracy_p25;
  a["accuracy_p50"] = agg.accuracy_p50;
  return a;
}

}  // namespace

void write_report(const ExperimentReport& report,
                  const std::filesystem::path& rows_path,
                  const std::filesystem::path& summary_path) {
  std::ofstream out(rows_path);
  if (!out) {
    throw ParseError("cannot open " + rows_path.string() + " for writing");
  }
  out << "episode\tsegment\tresolution\tqp\tmodel_version\tsize_mb\t"
         "delivered\tachieved_miou\tcost\treward\taccuracy_slack\t"
         "bandwidth_slack\ttarget\tbandwidth_mbps\n";
  for (const SegmentLogRow& r : report.rows) {
    out << r.episode << '\t' << r.segment << '\t'
        << format_real(r.cfg.resolution_scale) << '\t' << r.cfg.qp << '\t'
        << r.cfg.model_version << '\t' << format_real(r.size_mb) << '\t'
        << (r.delivered ? 1 : 0) << '\t' << format_real(r.achieved_miou)
        << '\t' << format_real(r.cost) << '\t' << r.reward << '\t'
        << format_real(r.accuracy_slack) << '\t'
        << format_real(r.bandwidth_slack) << '\t' << format_real(r.target)
        << '\t' << format_real(r.bandwidth_mbps) << '\n';
  }
  if (!out) throw ParseError("write failed: " + rows_path.string());

  ordered_json summary;
  summary["schema_version"] = 1;
  summary["policy"] = report.policy_name;
  summary["aggregates"] = aggregates_json(report.aggregates);
  write_summary_json(summary, summary_path);
}

std::vector<SegmentLogRow> read_report_rows(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty report");
  std::vector<SegmentLogRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::vector<std::string> f;
    std::string tok;
    while (std::getline(is, tok, '\t')) f.push_back(tok);
    if (f.size() != 14) throw ParseError("malformed report row");
    SegmentLogRow r;
    r.episode = static_cast<int>(parse_integer(f[0], "episode"));
    r.segment = static_cast<int>(parse_integer(f[1], "segment"));
    r.cfg.resolution_scale = parse_real(f[2], "resolution");
    r.cfg.qp = static_cast<int>(parse_integer(f[3], "qp"));
    r.cfg.model_version = static_cast<int>(parse_integer(f[4], "model"));
    r.size_mb = parse_real(f[5], "size");
    r.delivered = parse_integer(f[6], "delivered") != 0;
    r.achieved_miou = parse_real(f[7], "miou");
    r.cost = parse_real(f[8], "cost");
    r.reward = static_cast<int>(parse_integer(f[9], "reward"));
    r.accuracy_slack = parse_real(f[10], "accuracy_slack");
    r.bandwidth_slack = parse_real(f[11], "bandwidth_slack");
    r.target = parse_real(f[12], "target");
    r.bandwidth_mbps = parse_real(f[13], "bandwidth");
    rows.push_back(r);
  }
  return rows;
}

// --------------------------------------------------------------------------
// Training
// --------------------------------------------------------------------------

TrainingArtifacts run_training(const ExperimentConfig& cfg,
                               const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  TrainingArtifacts artifacts;
  artifacts.checkpoint_path = out_dir / "checkpoint.txt";
  artifacts.diagnostics_path = out_dir / "diagnostics.tsv";

  PpoTrainer trainer(cfg.layout, cfg.trainer,
                     derive_seed(cfg.seed, "policy-init"));
  SegmentEnv env(cfg, cfg.seed, "train");
  RolloutCollector collector(env);
  Rng rollout_rng(derive_seed(cfg.seed, "rollout"));

  std::ofstream diag(artifacts.diagnostics_path);
  if (!diag) {
    throw ParseError("cannot open " + artifacts.diagnostics_path.string() +
                     " for writing");
  }
  diag << "step\treward_mean\taccuracy_violation_rate\tdrop_rate\t"
          "policy_loss\tvalue_loss\tentropy\tclip_fraction\n";

  std::string last_good;
  {
    std::ostringstream snap;
    trainer.save(snap, cfg.seed);
    last_good = snap.str();
  }

  auto save_to = [&](const std::string& text) {
    std::ofstream out(artifacts.checkpoint_path);
    out << text;
    if (!out) {
      throw ParseError("write failed: " + artifacts.checkpoint_path.string());
    }
  };

  long long steps = 0;
  try {
    while (steps < cfg.trainer.total_steps) {
      env.clear_log();
      trainer.set_entropy_coef(cfg.trainer.entropy_coef_at(steps));
      Trajectory traj =
          collector.collect(trainer.policy(), trainer.value(),
                            cfg.trainer.horizon, cfg.trainer.gamma,
                            ActionMode::Train, rollout_rng);
      steps += static_cast<long long>(traj.steps.size());

      double reward_sum = 0.0;
      for (const TrajectoryStep& st : traj.steps) reward_sum += st.reward;
      long long violations = 0, drops = 0;
      for (const SegmentLogRow& row : env.log()) {
        if (row.achieved_miou < row.target) ++violations;
        if (!row.delivered) ++drops;
      }
      const double n = static_cast<double>(traj.steps.size());

      const UpdateDiagnostics ud = trainer.update({traj}, rollout_rng);

      diag << steps << '\t' << format_real(reward_sum / n) << '\t'
           << format_real(static_cast<double>(violations) / n) << '\t'
           << format_real(static_cast<double>(drops) / n) << '\t'
           << format_real(ud.policy_loss) << '\t'
           << format_real(ud.value_loss) << '\t' << format_real(ud.entropy)
           << '\t' << format_real(ud.clip_fraction) << '\n';

      std::ostringstream snap;
      trainer.save(snap, cfg.seed);
      last_good = snap.str();
    }
  } catch (const DivergenceError& e) {
    diag.flush();
    save_to(last_good);
    throw DivergenceError(std::string(e.what()) +
                          " (last-good checkpoint saved to " +
                          artifacts.checkpoint_path.string() + ")");
  }
  diag.flush();
  if (!diag) {
    throw ParseError("write failed: " + artifacts.diagnostics_path.string());
  }
  save_to(last_good);
  artifacts.steps = steps;
  return artifacts;
}

std::vector<DiagnosticsRow> read_diagnostics(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty diagnostics");
  std::vector<DiagnosticsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::vector<std::string> f;
    std::string tok;
    while (std::getline(is, tok, '\t')) f.push_back(tok);
    if (f.size() != 8) throw ParseError("malformed diagnostics row");
    DiagnosticsRow r;
    r.step = parse_integer(f[0], "step");
    r.reward_mean = parse_real(f[1], "reward_mean");
    r.accuracy_violation_rate = parse_real(f[2], "violation");
    r.drop_rate = parse_real(f[3], "drop");
    r.policy_loss = parse_real(f[4], "policy_loss");
    r.value_loss = parse_real(f[5], "value_loss");
    r.entropy = parse_real(f[6], "entropy");
    r.clip_fraction = parse_real(f[7], "clip");
    rows.push_back(r);
  }
  return rows;
}

// --------------------------------------------------------------------------
// Evaluation
// --------------------------------------------------------------------------

namespace {

void require_layout_match(const StateLayout& a, const StateLayout& b) {
  if (a.num_classes != b.num_classes || a.action_count != b.action_count ||
      a.ratio_count != b.ratio_count ||
      a.bandwidth_max_mbps != b.bandwidth_max_mbps ||
      a.bitrate_scale_mb != b.bitrate_scale_mb) {
    throw ConfigurationError(
        "checkpoint state layout does not match the experiment config");
  }
}

}  // namespace

ExperimentReport run_evaluation(const ExperimentConfig& cfg,
                                const PolicySpec& policy) {
  SegmentEnv env(cfg, cfg.seed, "eval");
  Rng eval_rng(derive_seed(cfg.seed, "eval-rollout"));

  std::optional<PpoTrainer> trainer;
  if (policy.kind == PolicySpec::Kind::Crl) {
    if (policy.checkpoint.empty()) {
      throw ConfigurationError("crl policy needs a checkpoint path");
    }
    std::ifstream in(policy.checkpoint);
    if (!in) throw ParseError("cannot open checkpoint " + policy.checkpoint);
    trainer = PpoTrainer::load(in, nullptr);
    require_layout_match(trainer->layout(), cfg.layout);
  } else if (policy.kind == PolicySpec::Kind::CrlUntrained) {
    trainer.emplace(cfg.layout, cfg.trainer,
                    derive_seed(cfg.seed, "policy-init"));
  }

  PeriodicProfilingPolicy profiling(cfg.space, cfg.cost_model,
                                    policy.profiling_period);
  if (policy.kind == PolicySpec::Kind::Fixed) {
    cfg.space.index_of(policy.fixed_cfg);  // validate membership
  }

  for (int episode = 0; episode < cfg.eval_episodes; ++episode) {
    Vec state = env.reset();
    profiling.reset();
    bool done = false;
    while (!done) {
      int action = 0;
      switch (policy.kind) {
        case PolicySpec::Kind::Crl:
        case PolicySpec::Kind::CrlUntrained:
          action = select_action(trainer->policy(), state, ActionMode::Test,
                                 eval_rng)
                       .first;
          break;
        case PolicySpec::Kind::Optimal:
          action = static_cast<int>(cfg.space.index_of(
              optimal_config(cfg.space, cfg.cost_model, env.upcoming_record(),
                             env.current_target(), env.current_bandwidth())));
          break;
        case PolicySpec::Kind::Profiling:
          action = static_cast<int>(cfg.space.index_of(
              profiling.choose(env.upcoming_record(), env.current_target(),
                               env.current_bandwidth())));
          break;
        case PolicySpec::Kind::Fixed:
          action = static_cast<int>(cfg.space.index_of(policy.fixed_cfg));
          break;
      }
      Environment::StepResult res = env.step(action);
      state = std::move(res.next_state);
      done = res.done;
    }
  }

  ExperimentReport report;
  report.policy_name = policy.name();
  report.rows = env.log();
  if (policy.kind == PolicySpec::Kind::Profiling) {
    // The profiling sweep is server work too: one frame through every
    // configuration at each refresh. Charge it to the profiled segment.
    double sweep = 0.0;
    for (const Configuration& c : cfg.space.enumerate()) {
      sweep += cfg.cost_model.cost(c);
    }
    const double per_event = sweep / static_cast<double>(env.trace_fps());
    for (SegmentLogRow& row : report.rows) {
      if (row.segment % policy.profiling_period == 0) row.cost += per_event;
    }
  }
  report.aggregates = compute_aggregates(report.rows);
  return report;
}

// --------------------------------------------------------------------------
// Compare sweep
// --------------------------------------------------------------------------

std::vector<CompareRow> run_compare(const ExperimentConfig& cfg) {
  std::vector<PolicySpec> policies = cfg.compare_policies;
  if (policies.empty()) {
    throw ConfigurationError("compare needs at least one policy");
  }
  std::vector<double> bandwidths = cfg.compare_bandwidths;
  if (bandwidths.empty()) bandwidths = {cfg.bandwidth.value_mbps};
  std::vector<double> targets = cfg.compare_targets;
  if (targets.empty()) targets = {cfg.target.value};

  std::vector<CompareRow> rows;
  for (const PolicySpec& policy : policies) {
    for (double bw : bandwidths) {
      for (double target : targets) {
        ExperimentConfig cell = cfg;
        cell.bandwidth.mode = BandwidthSpec::Mode::Constant;
        cell.bandwidth.value_mbps = bw;
        cell.target.mode = TargetSpec::Mode::Constant;
        cell.target.value = target;
        const ExperimentReport report = run_evaluation(cell, policy);
        CompareRow row;
        row.policy = report.policy_name;
        row.bandwidth_mbps = bw;
        row.target = target;
        row.aggregates = report.aggregates;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void write_compare(const std::vector<CompareRow>& rows,
                   const std::filesystem::path& table_path,
                   const std::filesystem::path& summary_path) {
  std::ofstream out(table_path);
  if (!out) {
    throw ParseError("cannot open " + table_path.string() + " for writing");
  }
  out << "policy\tbandwidth_mbps\ttarget\tsegments\tfailure_rate\tmean_cost\t"
         "drop_rate\taccuracy_p10\taccuracy_p25\taccuracy_p50\n";
  for (const CompareRow& r : rows) {
    out << r.policy << '\t' << format_real(r.bandwidth_mbps) << '\t'
        << format_real(r.target) << '\t' << r.aggregates.segments << '\t'
        << format_real(r.aggregates.failure_rate) << '\t'
        << format_real(r.aggregates.mean_cost) << '\t'
        << format_real(r.aggregates.drop_rate) << '\t'
        << format_real(r.aggregates.accuracy_p10) << '\t'
        << format_real(r.aggregates.accuracy_p25) << '\t'
        << format_real(r.aggregates.accuracy_p50) << '\n';
  }
  if (!out) throw ParseError("write failed: " + table_path.string());

  ordered_json summary;
  summary["schema_version"] = 1;
  summary["cells"] = ordered_json::array();
  for (const CompareRow& r : rows) {
    ordered_json cell;
    cell["policy"] = r.policy;
    cell["bandwidth_mbps"] = r.bandwidth_mbps;
    cell["target"] = r.target;
    cell["aggregates"] = aggregates_json(r.aggregates);
    summary["cells"].push_back(cell);
  }
  write_summary_json(summary, summary_path);
}

std::filesystem::path resolve_output_dir(
    const std::optional<std::filesystem::path>& flag_value,
    const ExperimentConfig* cfg) {
  if (flag_value) return *flag_value;
  if (const char* env = std::getenv("EDGEADAPT_OUT"); env && *env) {
    return std::filesystem::path(env);
  }
  if (cfg && cfg->output_dir) return *cfg->output_dir;
  return std::filesystem::path("out");
}

}  // namespace edgeadapt
