#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "edgeadapt/harness.hpp"

namespace edgeadapt {

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* config = cmd->add_option("--config", args.config_path,
                                 "experiment config file (JSON)");
  if (config_required) config->required();
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&args](std::uint64_t s) { args.seed = s; },
      "master seed (overrides the config file)");
  cmd->add_option_function<std::string>(
      "--out", [&args](const std::string& s) { args.out = s; },
      "output directory (overrides EDGEADAPT_OUT and the config)");
}

ExperimentConfig load_with_overrides(const CommonArgs& args) {
  ExperimentConfig cfg = load_experiment_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  return cfg;
}

PolicySpec policy_from_name(const ExperimentConfig& cfg,
                            const std::string& name) {
  PolicySpec spec = cfg.policy;  // keep checkpoint / period / fixed params
  if (name == "crl") {
    spec.kind = PolicySpec::Kind::Crl;
  } else if (name == "crl-untrained" || name == "crl_untrained") {
    spec.kind = PolicySpec::Kind::CrlUntrained;
  } else if (name == "optimal") {
    spec.kind = PolicySpec::Kind::Optimal;
  } else if (name == "profiling") {
    spec.kind = PolicySpec::Kind::Profiling;
  } else if (name == "fixed") {
    spec.kind = PolicySpec::Kind::Fixed;
  } else {
    throw ParameterError("unknown policy '" + name + "'");
  }
  return spec;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Trace-driven simulator for edge-assisted video semantic "
               "segmentation offloading"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, compare_args;
  std::string validate_path, eval_policy;

  CLI::App* gen = app.add_subcommand(
      "generate-trace", "generate a synthetic segment trace file");
  add_common(gen, gen_args, true);

  CLI::App* validate = app.add_subcommand(
      "validate-trace", "check a trace file against its invariants");
  validate->add_option("trace", validate_path, "trace file")->required();

  CLI::App* train =
      app.add_subcommand("train", "train the configuration adapter");
  add_common(train, train_args, true);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "evaluate one policy on held-out traces");
  add_common(evaluate, eval_args, true);
  evaluate->add_option(
      "--policy", eval_policy,
      "crl | crl-untrained | optimal | profiling | fixed "
      "(default: the config's policy block)");

  CLI::App* compare = app.add_subcommand(
      "compare", "evaluate several policies over a bandwidth/target sweep");
  add_common(compare, compare_args, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      const ExperimentConfig cfg = load_with_overrides(gen_args);
      const auto out_dir = resolve_output_dir(gen_args.out, &cfg);
      std::filesystem::create_directories(out_dir);
      const TraceSet trace = generate_trace(cfg.generator, cfg.seed);
      const auto path = out_dir / "trace.txt";
      save_trace(trace, path);
      std::cout << "wrote " << path.string() << " (" << trace.segments.size()
                << " segments)\n";
      return 0;
    }
    if (validate->parsed()) {
      const TraceSet trace = parse_trace(validate_path);
      const auto issues = validate_trace(trace);
      if (issues.empty()) {
        std::cout << "valid: " << trace.segments.size() << " segments\n";
        return 0;
      }
      for (const ValidationIssue& issue : issues) {
        std::cout << "segment " << issue.segment_id << ": " << issue.what
                  << "\n";
      }
      std::cout << issues.size() << " issue(s)\n";
      return 2;
    }
    if (train->parsed()) {
      const ExperimentConfig cfg = load_with_overrides(train_args);
      const auto out_dir = resolve_output_dir(train_args.out, &cfg);
      const TrainingArtifacts artifacts = run_training(cfg, out_dir);
      std::cout << "trained " << artifacts.steps << " steps\ncheckpoint: "
                << artifacts.checkpoint_path.string() << "\ndiagnostics: "
                << artifacts.diagnostics_path.string() << "\n";
      return 0;
    }
    if (evaluate->parsed()) {
      const ExperimentConfig cfg = load_with_overrides(eval_args);
      const PolicySpec policy = eval_policy.empty()
                                    ? cfg.policy
                                    : policy_from_name(cfg, eval_policy);
      const auto out_dir = resolve_output_dir(eval_args.out, &cfg);
      std::filesystem::create_directories(out_dir);
      const ExperimentReport report = run_evaluation(cfg, policy);
      write_report(report, out_dir / "report.tsv", out_dir / "summary.json");
      const Aggregates& a = report.aggregates;
      std::cout << report.policy_name << ": segments=" << a.segments
                << " failure_rate=" << a.failure_rate
                << " mean_cost=" << a.mean_cost << " drop_rate=" << a.drop_rate
                << "\n";
      return 0;
    }
    if (compare->parsed()) {
      const ExperimentConfig cfg = load_with_overrides(compare_args);
      const auto out_dir = resolve_output_dir(compare_args.out, &cfg);
      std::filesystem::create_directories(out_dir);
      const auto rows = run_compare(cfg);
      write_compare(rows, out_dir / "compare.tsv",
                    out_dir / "compare_summary.json");
      std::cout << "wrote " << (out_dir / "compare.tsv").string() << " ("
                << rows.size() << " cells)\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace edgeadapt
