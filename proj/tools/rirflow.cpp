// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// rirflow command-line driver.  Every subcommand reads one JSON config
// (defaults <- RIRFLOW_OUT_ROOT <- --config file <- --set overrides, last
// writer wins) and works inside a fresh run directory under out_root.
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rirflow/cli/commands.hpp"

namespace {

struct Args {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Args& args) {
  sub->add_option("-c,--config", args.config_path, "JSON config file");
  sub->add_option("-s,--set", args.overrides, "dotted key=value override (repeatable)");
}

int run(const std::string& command, const Args& args) {
  const rirflow::RunConfig cfg = rirflow::load_run_config(args.config_path, args.overrides);
  if (command == "report") {
    std::cout << rirflow::report_text(cfg);
    return 0;
  }
  std::string run_dir;
  if (command == "simulate") run_dir = rirflow::cmd_simulate(cfg);
  else if (command == "train-vae") run_dir = rirflow::cmd_train_vae(cfg);
  else if (command == "train-flac") run_dir = rirflow::cmd_train_flac(cfg);
  else if (command == "train-agree") run_dir = rirflow::cmd_train_agree(cfg);
  else if (command == "generate") run_dir = rirflow::cmd_generate(cfg);
  else if (command == "evaluate") run_dir = rirflow::cmd_evaluate(cfg);
  else if (command == "sweep") run_dir = rirflow::cmd_sweep(cfg);
  else if (command == "embed") run_dir = rirflow::cmd_embed(cfg);
  std::cout << run_dir << "\n";
  if (command == "evaluate")
    std::cout << rirflow::read_file_text(run_dir + "/summary.txt");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-shot room impulse response generation"};
  app.require_subcommand(1);
  Args args;

  app.add_subcommand("simulate", "synthesize a shoebox dataset");
  app.add_subcommand("train-vae", "train the waveform autoencoder");
  app.add_subcommand("train-flac", "train the conditional flow model");
  app.add_subcommand("train-agree", "train the audio-geometry embedding");
  auto* gen = app.add_subcommand("generate", "sample impulse responses");
  auto* eval = app.add_subcommand("evaluate", "score a method on a split");
  auto* sweep = app.add_subcommand("sweep", "evaluate across context sizes or step counts");
  auto* report = app.add_subcommand("report", "print a stored run summary");
  app.add_subcommand("embed", "export gallery embeddings for a split");

  // Convenience flags; each simply appends the equivalent dotted override.
  std::string method, kind, run_dir_opt;
  long count = -1, steps = -1;
  eval->add_option("--method", method, "evaluation method");
  sweep->add_option("--method", method, "evaluation method");
  sweep->add_option("--kind", kind, "sweep kind: context or steps");
  gen->add_option("--count", count, "samples to draw");
  gen->add_option("--steps", steps, "integration steps");
  report->add_option("--run", run_dir_opt, "run directory to summarize");
  for (auto* sub : app.get_subcommands({})) add_common(sub, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage problems -> 1, help/version -> 0
  }

  if (!method.empty()) args.overrides.push_back("evaluate.method=" + method);
  if (!kind.empty()) args.overrides.push_back("sweep.kind=" + kind);
  if (count >= 0) args.overrides.push_back("generate.count=" + std::to_string(count));
  if (steps >= 0) args.overrides.push_back("generate.steps=" + std::to_string(steps));
  if (!run_dir_opt.empty()) args.overrides.push_back("report.run=" + run_dir_opt);

  try {
    return run(app.get_subcommands().front()->get_name(), args);
  } catch (const rirflow::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
