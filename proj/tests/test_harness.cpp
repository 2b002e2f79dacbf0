#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "edgeadapt/harness.hpp"
#include "edgeadapt/rng.hpp"

using namespace edgeadapt;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_cfg() {
  ExperimentConfig cfg;
  cfg.seed = 99;
  cfg.generator.segment_count = 32;
  cfg.trainer.total_steps = 128;
  cfg.trainer.horizon = 32;
  cfg.trainer.batch_size = 16;
  cfg.trainer.branch_width = 8;
  cfg.trainer.hidden_width = 16;
  cfg.trainer.hidden_layers = 1;
  cfg.eval_episodes = 3;
  return cfg;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config file parsing") {
  const fs::path dir = temp_dir("edgeadapt_cfg_test");
  const fs::path path = dir / "config.json";
  {
    std::ofstream out(path);
    out << R"({
      "schema_version": 1,
      "seed": 7,
      "bandwidth": {"mode": "range", "low": 0.3, "high": 1.0},
      "target_accuracy": {"mode": "set", "values": [0.5, 0.65]},
      "estimator": {"kind": "noisy", "rel_error": 0.2},
      "feedback": {"classes": 4, "mode": "class_iou"},
      "trainer": {"total_steps": 1000, "batch_size": 16},
      "evaluation": {"episodes": 5},
      "policy": {"kind": "profiling", "period": 20},
      "compare": {"policies": [{"kind": "optimal"}, {"kind": "fixed"}],
                  "bandwidths": [0.4, 0.8]},
      "output_dir": "somewhere"
    })";
  }
  const ExperimentConfig cfg = load_experiment_config(path);
  CHECK(cfg.seed == 7);
  CHECK(cfg.bandwidth.mode == BandwidthSpec::Mode::Range);
  CHECK(cfg.target.mode == TargetSpec::Mode::Set);
  CHECK(cfg.target.values.size() == 2);
  CHECK(cfg.estimator.rel_error == 0.2);
  CHECK(cfg.feedback.num_classes == 4);
  CHECK(cfg.layout.num_classes == 4);
  CHECK(cfg.layout.action_count == 90);
  CHECK(cfg.trainer.total_steps == 1000);
  CHECK(cfg.eval_episodes == 5);
  CHECK(cfg.policy.kind == PolicySpec::Kind::Profiling);
  CHECK(cfg.policy.profiling_period == 20);
  CHECK(cfg.compare_policies.size() == 2);
  CHECK(cfg.compare_bandwidths == std::vector<double>{0.4, 0.8});
  CHECK(cfg.output_dir.has_value());
}

TEST_CASE("config errors: seed, schema version, bad enums") {
  const fs::path dir = temp_dir("edgeadapt_cfg_err");
  const fs::path path = dir / "bad.json";
  {
    std::ofstream out(path);
    out << R"({"schema_version": 1})";
  }
  CHECK_THROWS_AS(load_experiment_config(path), ParseError);
  {
    std::ofstream out(path);
    out << R"({"schema_version": 3, "seed": 1})";
  }
  CHECK_THROWS_AS(load_experiment_config(path), ParseError);
  {
    std::ofstream out(path);
    out << R"({"schema_version": 1, "seed": 1, "policy": {"kind": "bogus"}})";
  }
  CHECK_THROWS_AS(load_experiment_config(path), ParseError);
  {
    std::ofstream out(path);
    out << "not json";
  }
  CHECK_THROWS_AS(load_experiment_config(path), ParseError);
}

TEST_CASE("environment episodes are deterministic") {
  ExperimentConfig cfg = small_cfg();
  auto run_once = [&]() {
    SegmentEnv env(cfg, cfg.seed, "train");
    env.reset();
    for (int i = 0; i < 20; ++i) env.step(i % 90);
    return env.log();
  };
  const auto a = run_once();
  const auto b = run_once();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].size_mb == b[i].size_mb);
    CHECK(a[i].achieved_miou == b[i].achieved_miou);
    CHECK(a[i].reward == b[i].reward);
    CHECK(a[i].bandwidth_mbps == b[i].bandwidth_mbps);
  }
}

TEST_CASE("train and eval streams use different traces") {
  ExperimentConfig cfg = small_cfg();
  SegmentEnv train_env(cfg, cfg.seed, "train");
  SegmentEnv eval_env(cfg, cfg.seed, "eval");
  train_env.reset();
  eval_env.reset();
  CHECK(train_env.upcoming_record().bitrate_mb !=
        eval_env.upcoming_record().bitrate_mb);
}

TEST_CASE("optimal policy never fails when the target is generous") {
  ExperimentConfig cfg = small_cfg();
  cfg.target.value = 0.3;
  cfg.bandwidth.value_mbps = 100.0;
  PolicySpec policy;
  policy.kind = PolicySpec::Kind::Optimal;
  const ExperimentReport report = run_evaluation(cfg, policy);
  CHECK(report.aggregates.failure_rate == 0.0);
  CHECK(report.aggregates.drop_rate == 0.0);
}

TEST_CASE("fixed anchor under unlimited bandwidth costs exactly 1") {
  ExperimentConfig cfg = small_cfg();
  cfg.bandwidth.value_mbps = 100.0;
  PolicySpec policy;
  policy.kind = PolicySpec::Kind::Fixed;
  policy.fixed_cfg = {1.0, 20, 0};
  const ExperimentReport report = run_evaluation(cfg, policy);
  CHECK(report.aggregates.mean_cost == 1.0);
  CHECK(report.aggregates.failure_rate == 0.0);  // anchor accuracy is 1
}

TEST_CASE("dropped segments are logged with mIoU 0") {
  ExperimentConfig cfg = small_cfg();
  cfg.bandwidth.value_mbps = 0.01;  // nothing fits
  PolicySpec policy;
  policy.kind = PolicySpec::Kind::Fixed;
  policy.fixed_cfg = {1.0, 20, 0};
  const ExperimentReport report = run_evaluation(cfg, policy);
  CHECK(report.aggregates.drop_rate == 1.0);
  for (const SegmentLogRow& row : report.rows) {
    CHECK(!row.delivered);
    CHECK(row.achieved_miou == 0.0);
    CHECK(row.cost == 0.0);
  }
}

TEST_CASE("report aggregates recompute exactly from the written log") {
  ExperimentConfig cfg = small_cfg();
  PolicySpec policy;
  policy.kind = PolicySpec::Kind::Profiling;
  const ExperimentReport report = run_evaluation(cfg, policy);

  const fs::path dir = temp_dir("edgeadapt_report_test");
  write_report(report, dir / "report.tsv", dir / "summary.json");
  const auto rows = read_report_rows(dir / "report.tsv");
  REQUIRE(rows.size() == report.rows.size());
  const Aggregates recomputed = compute_aggregates(rows);
  CHECK(recomputed.failure_rate == report.aggregates.failure_rate);
  CHECK(recomputed.mean_cost == report.aggregates.mean_cost);
  CHECK(recomputed.drop_rate == report.aggregates.drop_rate);
  CHECK(recomputed.accuracy_p10 == report.aggregates.accuracy_p10);
  CHECK(recomputed.accuracy_p25 == report.aggregates.accuracy_p25);
  CHECK(recomputed.accuracy_p50 == report.aggregates.accuracy_p50);
}

TEST_CASE("training is deterministic and zero steps keep the init") {
  ExperimentConfig cfg = small_cfg();
  const fs::path dir_a = temp_dir("edgeadapt_train_a");
  const fs::path dir_b = temp_dir("edgeadapt_train_b");
  const TrainingArtifacts a = run_training(cfg, dir_a);
  const TrainingArtifacts b = run_training(cfg, dir_b);
  CHECK(a.steps == b.steps);
  CHECK(slurp(a.checkpoint_path) == slurp(b.checkpoint_path));
  CHECK(slurp(a.diagnostics_path) == slurp(b.diagnostics_path));

  ExperimentConfig zero = cfg;
  zero.trainer.total_steps = 0;
  const fs::path dir_c = temp_dir("edgeadapt_train_c");
  const TrainingArtifacts c = run_training(zero, dir_c);
  CHECK(c.steps == 0);
  PpoTrainer init(zero.layout, zero.trainer,
                  derive_seed(zero.seed, "policy-init"));
  std::ostringstream expect;
  init.save(expect, zero.seed);
  CHECK(slurp(c.checkpoint_path) == expect.str());
}

TEST_CASE("evaluating a checkpoint with a different layout is rejected") {
  ExperimentConfig cfg = small_cfg();
  StateLayout other = cfg.layout;
  other.num_classes = 4;
  other.bitrate_scale_mb = 3.0;
  PpoTrainer trainer(other, cfg.trainer, 1);
  const fs::path dir = temp_dir("edgeadapt_ckpt_mismatch");
  const fs::path ckpt = dir / "checkpoint.txt";
  {
    std::ofstream out(ckpt);
    trainer.save(out, 1);
  }
  PolicySpec policy;
  policy.kind = PolicySpec::Kind::Crl;
  policy.checkpoint = ckpt.string();
  CHECK_THROWS_AS(run_evaluation(cfg, policy), ConfigurationError);
}

TEST_CASE("compare emits one row per policy/bandwidth cell") {
  ExperimentConfig cfg = small_cfg();
  cfg.eval_episodes = 2;
  PolicySpec optimal;
  optimal.kind = PolicySpec::Kind::Optimal;
  PolicySpec fixed;
  fixed.kind = PolicySpec::Kind::Fixed;
  fixed.fixed_cfg = {0.75, 24, 1};
  cfg.compare_policies = {optimal, fixed};
  cfg.compare_bandwidths = {0.4, 0.6, 0.8};
  const auto rows = run_compare(cfg);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].policy == "optimal");
  CHECK(rows[0].bandwidth_mbps == 0.4);
  CHECK(rows[5].policy == "fixed(r=0.75,qp=24,v=1)");

  const fs::path dir = temp_dir("edgeadapt_compare_test");
  write_compare(rows, dir / "compare.tsv", dir / "compare_summary.json");
  CHECK(fs::exists(dir / "compare.tsv"));
  CHECK(fs::exists(dir / "compare_summary.json"));
}

TEST_CASE("output dir precedence: flag > env > config > default") {
  ExperimentConfig cfg;
  cfg.output_dir = fs::path("from_config");
  unsetenv("EDGEADAPT_OUT");
  CHECK(resolve_output_dir(std::nullopt, &cfg) == fs::path("from_config"));
  setenv("EDGEADAPT_OUT", "from_env", 1);
  CHECK(resolve_output_dir(std::nullopt, &cfg) == fs::path("from_env"));
  CHECK(resolve_output_dir(fs::path("from_flag"), &cfg) ==
        fs::path("from_flag"));
  unsetenv("EDGEADAPT_OUT");
  CHECK(resolve_output_dir(std::nullopt, nullptr) == fs::path("out"));
}

TEST_CASE("cli exit codes and seed precedence") {
  const fs::path dir = temp_dir("edgeadapt_cli_test");
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    out << R"({"schema_version": 1, "seed": 5,
               "trace": {"source": "generator",
                         "params": {"segment_count": 6}}})";
  }

  auto run = [](std::initializer_list<const char*> args) {
    std::vector<const char*> argv = {"edgeadapt"};
    argv.insert(argv.end(), args.begin(), args.end());
    return cli_main(static_cast<int>(argv.size()), argv.data());
  };

  CHECK(run({}) == 1);                      // missing subcommand
  CHECK(run({"bogus"}) == 1);               // unknown subcommand
  CHECK(run({"train"}) == 1);               // missing --config
  CHECK(run({"train", "--config", "missing.json"}) == 2);  // runtime error

  const std::string out_a = (dir / "out_a").string();
  const std::string out_b = (dir / "out_b").string();
  const std::string out_c = (dir / "out_c").string();
  CHECK(run({"generate-trace", "--config", cfg_path.string().c_str(),
             "--out", out_a.c_str()}) == 0);
  CHECK(run({"generate-trace", "--config", cfg_path.string().c_str(),
             "--out", out_b.c_str()}) == 0);
  // --seed overrides the config seed
  CHECK(run({"generate-trace", "--config", cfg_path.string().c_str(),
             "--out", out_c.c_str(), "--seed", "6"}) == 0);
  const std::string trace_a = slurp(fs::path(out_a) / "trace.txt");
  CHECK(trace_a == slurp(fs::path(out_b) / "trace.txt"));
  CHECK(trace_a != slurp(fs::path(out_c) / "trace.txt"));

  const std::string trace_path = (fs::path(out_a) / "trace.txt").string();
  CHECK(run({"validate-trace", trace_path.c_str()}) == 0);
  CHECK(run({"validate-trace", "no_such_file.trace"}) == 2);
}

}  // TEST_SUITE
