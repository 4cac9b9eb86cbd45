#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uqkit/dataset.hpp"
#include "uqkit/errors.hpp"
#include "uqkit/run.hpp"

namespace {

struct ScoreArgs {
  std::string config_path;
  std::string dataset_path;
  std::string out_path;
  std::string mode;
  std::string backend;
  std::string cache;
  std::string cache_file;
  std::string weights_file;
  std::vector<std::string> scorers;
  std::uint64_t seed = 0;
  int num_responses = 0;
  int max_in_flight = 0;
  bool use_best = false;
};

struct TuneArgs {
  std::string config_path;
  std::string dataset_path;
  std::string out_path;
  std::string weights_out;
  std::string cache;
  std::string cache_file;
  std::string grader;
  std::string objective;
  std::uint64_t seed = 0;
  int max_in_flight = 0;
};

struct ReportArgs {
  std::string in_path;
  std::string out_path;
  std::string format = "jsonl";
};

uq::RunConfig base_config(const std::string& config_path) {
  return config_path.empty() ? uq::RunConfig{} : uq::load_run_config(config_path);
}

// Flags beat the config file which beats the built-in defaults.
void apply_common_overrides(const CLI::App& cmd, uq::RunConfig& config,
                            const std::string& cache, const std::string& cache_file,
                            std::uint64_t seed, int max_in_flight) {
  if (cmd.count("--cache") > 0) {
    config.cache_mode = uq::parse_cache_mode(cache);
  }
  if (cmd.count("--cache-file") > 0) {
    config.cache_file = cache_file;
  }
  if (cmd.count("--seed") > 0) {
    config.seed = seed;
  }
  if (cmd.count("--max-in-flight") > 0) {
    config.max_in_flight = max_in_flight;
  }
}

int emit_run_output(const uq::RunOutput& output, const std::string& out_path) {
  if (!out_path.empty()) {
    uq::emit_report(output.records, "jsonl", out_path);
    std::cout << output.summary.dump(2) << "\n";
  } else {
    for (const uq::ResultRecord& record : output.records) {
      std::cout << record.to_json().dump() << "\n";
    }
    std::cerr << output.summary.dump(2) << "\n";
  }
  const std::size_t errors = output.summary["error_count"].get<std::size_t>();
  return errors > 0 ? 2 : 0;
}

int run_score(const CLI::App& cmd, const ScoreArgs& args) {
  uq::RunConfig config = base_config(args.config_path);
  if (cmd.count("--mode") > 0) {
    config.mode = uq::parse_run_mode(args.mode);
  }
  if (cmd.count("--backend") > 0) {
    config.backend_kind = args.backend;
  }
  if (cmd.count("--scorer") > 0) {
    config.scorers = args.scorers;
  }
  if (cmd.count("--num-responses") > 0) {
    config.num_responses = args.num_responses;
  }
  if (cmd.count("--use-best") > 0) {
    config.use_best = true;
  }
  if (cmd.count("--weights") > 0) {
    config.weights_file = args.weights_file;
    config.ensemble_weights.clear();
  }
  apply_common_overrides(cmd, config, args.cache, args.cache_file, args.seed,
                         args.max_in_flight);
  if (config.mode == uq::RunMode::kTune) {
    throw uq::ConfigError("use the tune subcommand for weight fitting");
  }

  const std::vector<uq::PromptRecord> dataset = uq::load_dataset(args.dataset_path);
  const uq::RunOutput output = uq::run(config, dataset);
  const std::string out_path = !args.out_path.empty() ? args.out_path : config.out_path;
  return emit_run_output(output, out_path);
}

int run_tune(const CLI::App& cmd, const TuneArgs& args) {
  uq::RunConfig config = base_config(args.config_path);
  config.mode = uq::RunMode::kTune;
  if (cmd.count("--weights-out") > 0) {
    config.weights_out = args.weights_out;
  }
  if (cmd.count("--grader") > 0) {
    config.grader = args.grader;
  }
  if (cmd.count("--objective") > 0) {
    config.objective = args.objective;
  }
  apply_common_overrides(cmd, config, args.cache, args.cache_file, args.seed,
                         args.max_in_flight);

  const std::vector<uq::PromptRecord> dataset = uq::load_dataset(args.dataset_path);
  const uq::RunOutput output = uq::run(config, dataset);
  const std::string out_path = !args.out_path.empty() ? args.out_path : config.out_path;
  if (out_path.empty()) {
    std::cout << output.summary.dump(2) << "\n";
    const std::size_t errors = output.summary["error_count"].get<std::size_t>();
    return errors > 0 ? 2 : 0;
  }
  return emit_run_output(output, out_path);
}

int run_report(const ReportArgs& args) {
  const std::vector<uq::ResultRecord> records = uq::load_results(args.in_path);
  uq::emit_report(records, args.format, args.out_path);
  std::cerr << "[uq] wrote " << records.size() << " records to " << args.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uq: response-level confidence scores for language model outputs"};
  app.require_subcommand(1);

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "generate responses and score confidence");
  score->add_option("--config", score_args.config_path, "run configuration (TOML)");
  score->add_option("--dataset", score_args.dataset_path, "prompts (JSONL)")->required();
  score->add_option("--out", score_args.out_path, "results path (JSONL); stdout if absent");
  score->add_option("--mode", score_args.mode, "blackbox | whitebox | panel | ensemble");
  score->add_option("--backend", score_args.backend, "mock | openai");
  score->add_option("--scorer", score_args.scorers, "scorer id (repeatable)");
  score->add_option("--num-responses", score_args.num_responses,
                    "responses per prompt (1 original + candidates)");
  score->add_flag("--use-best", score_args.use_best,
                  "report the representative of the largest semantic cluster");
  score->add_option("--weights", score_args.weights_file, "tuned ensemble weights (JSON)");
  score->add_option("--cache", score_args.cache, "live | record | replay");
  score->add_option("--cache-file", score_args.cache_file, "response cache path");
  score->add_option("--seed", score_args.seed, "base seed for all derived streams");
  score->add_option("--max-in-flight", score_args.max_in_flight,
                    "max concurrent provider calls");

  TuneArgs tune_args;
  CLI::App* tune = app.add_subcommand("tune", "fit ensemble weights on graded prompts");
  tune->add_option("--config", tune_args.config_path, "run configuration (TOML)");
  tune->add_option("--dataset", tune_args.dataset_path,
                   "prompts with ideal responses (JSONL)")
      ->required();
  tune->add_option("--weights-out", tune_args.weights_out, "where to write fitted weights");
  tune->add_option("--out", tune_args.out_path, "per-prompt results path (JSONL)");
  tune->add_option("--grader", tune_args.grader, "exact_match | judge");
  tune->add_option("--objective", tune_args.objective, "roc_auc | f1 | accuracy");
  tune->add_option("--cache", tune_args.cache, "live | record | replay");
  tune->add_option("--cache-file", tune_args.cache_file, "response cache path");
  tune->add_option("--seed", tune_args.seed, "base seed for all derived streams");
  tune->add_option("--max-in-flight", tune_args.max_in_flight,
                   "max concurrent provider calls");

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "convert a results file");
  report->add_option("--in", report_args.in_path, "results (JSONL)")->required();
  report->add_option("--format", report_args.format, "jsonl | csv");
  report->add_option("--out", report_args.out_path, "output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (score->parsed()) {
      return run_score(*score, score_args);
    }
    if (tune->parsed()) {
      return run_tune(*tune, tune_args);
    }
    return run_report(report_args);
  } catch (const uq::Error& error) {
    std::cerr << "[uq] error: " << error.what() << "\n";
    return 1;
  } catch (const std::exception& error) {
    std::cerr << "[uq] error: " << error.what() << "\n";
    return 1;
  }
}
