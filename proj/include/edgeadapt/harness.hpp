#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edgeadapt/baselines.hpp"
#include "edgeadapt/crl.hpp"
#include "edgeadapt/estimation.hpp"
#include "edgeadapt/feedback.hpp"
#include "edgeadapt/linksim.hpp"
#include "edgeadapt/traces.hpp"

namespace edgeadapt {

// --------------------------------------------------------------------------
// Experiment configuration (JSON file with a schema_version field)
// --------------------------------------------------------------------------

struct BandwidthSpec {
  enum class Mode { Constant, Range, Trace };
  Mode mode = Mode::Constant;
  double value_mbps = 0.6;
  double low_mbps = 0.3;   // training sampling range
  double high_mbps = 1.0;
  BandwidthTrace trace;
};

struct TargetSpec {
  enum class Mode { Constant, Set };
  Mode mode = Mode::Constant;
  double value = 0.65;
  std::vector<double> values = {0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8};
};

struct EstimatorSpec {
  enum class Kind { Oracle, Noisy, Ar };
  Kind kind = Kind::Noisy;
  double rel_error = 0.1722;
};

// What fills the feedback slot of the state. ClassIoU is the oracle
// per-class feedback; PrevBitrate and NoisyAccuracy are the ablation
// baselines realized through configuration.
enum class FeedbackMode { ClassIoU, PrevBitrate, NoisyAccuracy };

struct PolicySpec {
  enum class Kind { Crl, CrlUntrained, Optimal, Profiling, Fixed };
  Kind kind = Kind::Crl;
  std::string checkpoint;  // Crl only
  int profiling_period = 40;
  Configuration fixed_cfg;

  std::string name() const;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ConfigurationSpace space;
  CostModel cost_model;

  bool trace_from_file = false;
  std::filesystem::path trace_path;
  GeneratorParams generator;

  BandwidthSpec bandwidth;
  TargetSpec target;
  EstimatorSpec estimator;
  FeedbackParams feedback;
  FeedbackMode feedback_mode = FeedbackMode::ClassIoU;
  double feedback_accuracy_noise = 0.05;  // NoisyAccuracy mode only

  StateLayout layout;
  TrainerConfig trainer;
  int eval_episodes = 50;

  PolicySpec policy;

  std::vector<PolicySpec> compare_policies;
  std::vector<double> compare_bandwidths;
  std::vector<double> compare_targets;

  std::optional<std::filesystem::path> output_dir;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// --------------------------------------------------------------------------
// Environment
// --------------------------------------------------------------------------

struct SegmentLogRow {
  int episode = 0;
  int segment = 0;
  Configuration cfg;
  double size_mb = 0.0;
  bool delivered = false;
  double achieved_miou = 0.0;
  double cost = 0.0;
  int reward = 0;
  double accuracy_slack = 0.0;
  double bandwidth_slack = 0.0;
  double target = 0.0;
  double bandwidth_mbps = 0.0;
};

// Trace-driven episode loop: estimates, state assembly, the upload link,
// the self-competition reward, and per-segment logging. One instance serves
// both training and evaluation; the `stream` name namespaces its seeds so
// held-out evaluation episodes never reuse training traces.
class SegmentEnv : public Environment {
 public:
  SegmentEnv(const ExperimentConfig& cfg, std::uint64_t master_seed,
             std::string stream);

  Vec reset() override;
  StepResult step(int action) override;

  // Ground truth for the segment the next action will configure; baselines
  // consume this instead of the state vector.
  const SegmentRecord& upcoming_record() const;
  double current_target() const { return target_; }
  double current_bandwidth() const;
  int trace_fps() const { return trace_.fps; }
  const ConfigurationSpace& space() const { return cfg_.space; }
  const CostModel& cost_model() const { return cfg_.cost_model; }

  const std::vector<SegmentLogRow>& log() const { return log_; }
  void clear_log() { log_.clear(); }

 private:
  BitrateEstimate estimate(const SegmentRecord& record);
  FeedbackVector make_feedback();
  Vec state_for_upcoming(int prev_action);

  ExperimentConfig cfg_;
  std::uint64_t master_seed_;
  std::string stream_;
  std::optional<ARModel> ar_model_;
  std::optional<NoisyEstimator> noisy_;

  TraceSet trace_;
  long long episode_ = -1;
  int index_ = 0;
  double target_ = 0.0;
  double bandwidth_constant_ = 0.0;
  Rng env_rng_{0};
  std::unique_ptr<StreamSession> session_;
  SelfCompetitionState competition_;
  BitrateEstimate prev_estimate_;
  bool have_prev_estimate_ = false;
  double prev_true_base_mb_ = 0.0;
  bool have_prev_outcome_ = false;
  DeliveryStatus prev_status_ = DeliveryStatus::Delivered;
  Configuration prev_cfg_;
  std::vector<SegmentLogRow> log_;
};

// --------------------------------------------------------------------------
// Reports
// --------------------------------------------------------------------------

struct Aggregates {
  long long segments = 0;
  double failure_rate = 0.0;  // achieved mIoU < target, drops included
  double mean_cost = 0.0;
  double drop_rate = 0.0;
  double accuracy_p10 = 0.0;
  double accuracy_p25 = 0.0;
  double accuracy_p50 = 0.0;
};

Aggregates compute_aggregates(const std::vector<SegmentLogRow>& rows);

struct ExperimentReport {
  std::string policy_name;
  std::vector<SegmentLogRow> rows;
  Aggregates aggregates;
};

void write_report(const ExperimentReport& report,
                  const std::filesystem::path& rows_path,
                  const std::filesystem::path& summary_path);
std::vector<SegmentLogRow> read_report_rows(const std::filesystem::path& path);

// --------------------------------------------------------------------------
// Orchestration
// --------------------------------------------------------------------------

struct TrainingArtifacts {
  std::filesystem::path checkpoint_path;
  std::filesystem::path diagnostics_path;
  long long steps = 0;
};

struct DiagnosticsRow {
  long long step = 0;
  double reward_mean = 0.0;
  double accuracy_violation_rate = 0.0;
  double drop_rate = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

TrainingArtifacts run_training(const ExperimentConfig& cfg,
                               const std::filesystem::path& out_dir);
std::vector<DiagnosticsRow> read_diagnostics(
    const std::filesystem::path& path);

ExperimentReport run_evaluation(const ExperimentConfig& cfg,
                                const PolicySpec& policy);

struct CompareRow {
  std::string policy;
  double bandwidth_mbps = 0.0;
  double target = 0.0;
  Aggregates aggregates;
};

std::vector<CompareRow> run_compare(const ExperimentConfig& cfg);
void write_compare(const std::vector<CompareRow>& rows,
                   const std::filesystem::path& table_path,
                   const std::filesystem::path& summary_path);

// Resolved output directory: flag > EDGEADAPT_OUT env > config > "./out".
std::filesystem::path resolve_output_dir(
    const std::optional<std::filesystem::path>& flag_value,
    const ExperimentConfig* cfg);

// Full command-line entry point (subcommands: generate-trace,
// validate-trace, train, evaluate, compare). Returns the process exit code:
// 0 success, 1 usage error, 2 runtime error.
int cli_main(int argc, const char* const* argv);

}  // namespace edgeadapt
