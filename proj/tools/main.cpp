#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "framerepeat/errors.hpp"
#include "run_config.hpp"

using namespace framerepeat;
using framerepeat::cli::RunConfig;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kOracle = 3, kInternal = 4 };

// Flag values in command-line order, applied after file and environment.
struct FlagSink {
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<std::string> sets;  // --set section.key=value
  std::string config_file;
};

void option(CLI::App* app, FlagSink& sink, const std::string& flag, const std::string& key,
            const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&sink, key](const std::string& v) { sink.values.emplace_back(key, v); }, help);
}

void switch_flag(CLI::App* app, FlagSink& sink, const std::string& flag, const std::string& key,
                 const std::string& value, const std::string& help) {
  app->add_flag_callback(flag, [&sink, key, value] { sink.values.emplace_back(key, value); }, help);
}

void common(CLI::App* app, FlagSink& sink, bool needs_data) {
  app->add_option("--config", sink.config_file, "INI config file");
  app->add_option("--set", sink.sets, "Override any setting: section.key=value (repeatable)");
  option(app, sink, "--out", "io.out", "Run directory for every artifact of this command");
  if (needs_data) option(app, sink, "--data", "io.data", "Dataset directory");
}

void oracle_flags(CLI::App* app, FlagSink& sink) {
  option(app, sink, "--oracle", "oracle.kind", "synthetic | replay | remote | none");
  option(app, sink, "--records", "oracle.records", "Record directory for the replay oracle");
  option(app, sink, "--endpoint", "oracle.endpoint", "Remote oracle base URL");
  option(app, sink, "--auth-token", "oracle.auth_token", "Bearer token for the remote oracle");
  option(app, sink, "--in-flight", "oracle.in_flight", "Remote in-flight request budget");
  option(app, sink, "--timeout", "oracle.timeout", "Remote request timeout in seconds");
  option(app, sink, "--retries", "oracle.retries", "Remote retries after the first attempt");
}

void scorer_flags(CLI::App* app, FlagSink& sink) {
  option(app, sink, "--heads", "scorer.n_heads", "Attention heads");
  option(app, sink, "--ffn-hidden", "scorer.ffn_hidden", "FFN hidden width (0: feature dim)");
  option(app, sink, "--prior-weight", "scorer.prior_weight", "Similarity prior weight lambda");
  option(app, sink, "--init-seed", "scorer.init_seed", "Parameter initialization seed");
}

int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError& x) {
    std::cerr << "config error: " << x.what() << "\n";
    return kUsage;
  } catch (const OracleError& x) {
    std::cerr << "oracle error: " << x.what() << "\n";
    return kOracle;
  } catch (const InternalError& x) {
    std::cerr << "internal error: " << x.what() << "\n";
    return kInternal;
  } catch (const LoadError& x) {
    std::cerr << "data error: " << x.what() << "\n";
    return kData;
  } catch (const IoError& x) {
    std::cerr << "i/o error: " << x.what() << "\n";
    return kData;
  } catch (const DimensionError& x) {
    std::cerr << "data error: " << x.what() << "\n";
    return kData;
  } catch (const DegenerateInputError& x) {
    std::cerr << "data error: " << x.what() << "\n";
    return kData;
  } catch (const nlohmann::json::exception& x) {
    std::cerr << "data error: " << x.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& x) {
    std::cerr << "i/o error: " << x.what() << "\n";
    return kData;
  } catch (const std::exception& x) {
    std::cerr << "internal error: " << x.what() << "\n";
    return kInternal;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"framerepeat: learned frame repetition for video question answering"};
  app.require_subcommand(1);
  FlagSink sink;

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with a hidden ground-truth sidecar");
  common(synth, sink, false);
  option(synth, sink, "--n-samples", "synth.n_samples", "Number of samples");
  option(synth, sink, "--first-index", "synth.first_index", "Index of the first sample");
  option(synth, sink, "--frames", "synth.frames", "Frames per sample (N)");
  option(synth, sink, "--dim", "synth.dim", "Feature dimension (d)");
  option(synth, sink, "--tokens", "synth.tokens", "Question tokens (L)");
  option(synth, sink, "--seed", "synth.seed", "World seed");
  option(synth, sink, "--key-frames", "synth.key_frames", "Planted key frames per sample (0: N/8)");
  option(synth, sink, "--noise", "synth.noise", "Per-frame gain noise std");
  option(synth, sink, "--gain-scale", "synth.gain_scale", "Gain weight of the hidden direction");
  option(synth, sink, "--key-strength", "synth.key_strength", "Hidden-direction weight in key frames");

  auto* scan = app.add_subcommand("scan", "Measure per-frame repeat gains through an oracle");
  common(scan, sink, true);
  oracle_flags(scan, sink);
  scorer_flags(scan, sink);
  switch_flag(scan, sink, "--all-frames", "scan.mode", "all", "Scan every frame");
  scan->add_option_function<std::string>(
      "--random-frames",
      [&sink](const std::string& v) {
        sink.values.emplace_back("scan.mode", "random");
        sink.values.emplace_back("scan.random_frames", v);
      },
      "Scan this many uniformly drawn frames");
  option(scan, sink, "--k", "scan.k", "Candidate half-width K for hybrid scans");
  option(scan, sink, "--checkpoint", "scan.checkpoint", "Scorer for hybrid candidate selection");
  option(scan, sink, "--seed", "scan.seed", "Seed for random draws");
  option(scan, sink, "--max-in-flight", "scan.max_in_flight", "Concurrent oracle calls per sample");
  option(scan, sink, "--stop-after", "scan.stop_after", "Stop after this many samples (0: all)");

  auto* train = app.add_subcommand("train", "Train the repeat scorer");
  common(train, sink, true);
  oracle_flags(train, sink);
  scorer_flags(train, sink);
  option(train, sink, "--lr", "train.lr", "Learning rate at the reference width");
  option(train, sink, "--lr-reference-dim", "train.lr_reference_dim", "Reference width (0: no scaling)");
  option(train, sink, "--epochs", "train.epochs", "Epochs");
  option(train, sink, "--accumulation", "train.accumulation", "Gradient accumulation steps");
  option(train, sink, "--k", "train.k", "Candidate half-width K");
  option(train, sink, "--seed", "train.seed", "Training seed");
  option(train, sink, "--reg-weight", "train.reg_weight", "Regression loss weight");
  option(train, sink, "--rank-weight", "train.rank_weight", "Ranking loss weight");
  option(train, sink, "--margin", "train.margin", "Ranking margin");
  option(train, sink, "--extra-negatives", "train.extra_negatives", "Non-candidate negatives (0: K)");
  switch_flag(train, sink, "--no-shuffle", "train.shuffle", "false", "Keep dataset order");
  switch_flag(train, sink, "--freeze-candidates", "train.freeze_candidates", "true",
              "Reuse first-epoch candidate sets");
  option(train, sink, "--max-in-flight", "train.max_in_flight", "Concurrent oracle calls per sample");
  option(train, sink, "--checkpoint-every", "train.checkpoint_every", "Checkpoint period in steps");
  option(train, sink, "--cache", "train.cache", "Record cache directory (default: <out>/records)");
  option(train, sink, "--init", "train.init", "Start from this checkpoint");

  auto* plan = app.add_subcommand("plan", "Emit repetition plans");
  common(plan, sink, true);
  scorer_flags(plan, sink);
  option(plan, sink, "--checkpoint", "plan.checkpoint", "Trained scorer (default: untrained)");
  option(plan, sink, "--k", "plan.k", "Frames to repeat (auto: round(N/16))");
  switch_flag(plan, sink, "--select-only", "plan.select_only", "true", "Also emit select-only frame lists");

  auto* eval = app.add_subcommand("eval", "Rank-quality metrics against true repeat gains");
  common(eval, sink, true);
  scorer_flags(eval, sink);
  option(eval, sink, "--checkpoint", "eval.checkpoint", "Trained scorer (default: untrained)");
  option(eval, sink, "--k", "eval.k", "k for top/random/bottom plans and recall");
  option(eval, sink, "--seed", "eval.seed", "Seed for random-k draws");
  option(eval, sink, "--random-trials", "eval.random_trials", "Random-k draws per sample");
  option(eval, sink, "--scores", "eval.scores", "model | prior | truth");
  option(eval, sink, "--truth-records", "eval.truth_records", "Full-frame scan records as ground truth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  std::string command;
  for (const auto* sub : app.get_subcommands()) command = sub->get_name();
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--auth-token" && i + 1 < args.size()) args[++i] = "<redacted>";
    else if (args[i].starts_with("--auth-token=")) args[i] = "--auth-token=<redacted>";
    else if (args[i].find("auth_token=") != std::string::npos) args[i] = "oracle.auth_token=<redacted>";
  }

  try {
    RunConfig config;
    cli::declare_settings(command, config);
    if (!sink.config_file.empty()) config.load_file(sink.config_file);
    config.load_env();
    for (const auto& s : sink.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
      config.set(s.substr(0, eq), s.substr(eq + 1), cli::Source::Flag);
    }
    for (const auto& [key, value] : sink.values) config.set(key, value, cli::Source::Flag);
    config.print(std::cout);
    cli::run_command(command, config, args);
  } catch (...) {
    return exit_code_for(std::current_exception());
  }
  return kOk;
}
