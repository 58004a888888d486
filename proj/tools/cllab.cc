// tools/cllab.cc

// Copyright 2026  The cllab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "base/io.h"
#include "base/parallel.h"
#include "harness/harness.h"
#include "synth/synth.h"

namespace cllab {
namespace {

// Config precedence: defaults, then --config file, then --set overrides,
// then the named flags.
struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> named;
};

void AddConfigOptions(CLI::App *cmd, ConfigArgs *args) {
  cmd->add_option("--config", args->config_file,
                  "flat key = value config file");
  cmd->add_option("--set", args->sets,
                  "override one config key as key=value (repeatable)");
  auto named = [cmd, args](const std::string &flag, const std::string &key,
                           const std::string &help) {
    cmd->add_option_function<std::string>(
        flag,
        [args, key](const std::string &v) { args->named.emplace_back(key, v); },
        help);
  };
  named("--method", "method", "ft | ewc | lwf | denlwf | comb");
  named("--master-seed", "master_seed", "seed for all run randomness");
  named("--threads", "num_threads", "worker threads (1 = bit-reproducible "
        "reference order; any count matches it)");
  named("--seed-epochs", "seed_epochs", "epochs for seed/comb training");
  named("--epochs", "epochs_per_step", "epochs per expansion step");
  named("--learning-rate", "learning_rate", "SGD learning rate");
  named("--alpha-lwf", "alpha_lwf", "frame-level regularizer scale");
  named("--alpha-denlwf", "alpha_denlwf", "sequence-level regularizer scale");
  named("--alpha-ewc", "alpha_ewc", "parameter-anchor regularizer scale");
}

PipelineConfig BuildConfig(const ConfigArgs &args) {
  PipelineConfig config;
  if (!args.config_file.empty())
    ApplyConfigFile(&config, ReadTextFile(args.config_file));
  for (const std::string &s : args.sets) {
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw InvalidInputError("--set expects key=value, got '" + s + "'");
    ApplyAssignment(&config, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto &[key, value] : args.named)
    ApplyAssignment(&config, key, value);
  config.Validate();
  return config;
}

std::vector<Dataset> LoadAllDomains(const std::string &data_dir) {
  std::vector<Dataset> datasets;
  for (const std::string &name : LoadDomainIndex(data_dir))
    datasets.push_back(LoadDataset(data_dir, name));
  if (datasets.empty())
    throw InvalidInputError("domain index in " + data_dir + " is empty");
  return datasets;
}

std::vector<double> ParseAlphaList(const std::string &text) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception &) {
      throw InvalidInputError("bad alpha value '" + item + "'");
    }
  }
  if (out.empty()) throw InvalidInputError("--alphas list is empty");
  return out;
}

std::vector<std::string> SplitCommas(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int Main(int argc, char **argv) {
  CLI::App app{"sequence-training continual-learning lab"};
  app.require_subcommand(1);

  auto *gen = app.add_subcommand(
      "gen-data", "generate the five-domain synthetic benchmark");
  std::string gen_out;
  uint64 gen_seed = 1;
  int32 gen_threads = 1;
  gen->add_option("--out", gen_out, "output data directory")->required();
  gen->add_option("--master-seed", gen_seed, "generation seed");
  gen->add_option("--threads", gen_threads, "generate domains in parallel");

  auto *seed_cmd = app.add_subcommand(
      "train-seed", "train the seed model on the first domain");
  std::string seed_data, seed_out;
  ConfigArgs seed_args;
  seed_cmd->add_option("--data", seed_data, "data directory")->required();
  seed_cmd->add_option("--out", seed_out, "run directory")->required();
  AddConfigOptions(seed_cmd, &seed_args);

  auto *expand_cmd = app.add_subcommand(
      "expand", "run one continual-learning step from a saved state");
  std::string expand_data, expand_state, expand_target, expand_out;
  ConfigArgs expand_args;
  expand_cmd->add_option("--data", expand_data, "data directory")->required();
  expand_cmd->add_option("--state", expand_state, "source .clstate file")
      ->required();
  expand_cmd->add_option("--target", expand_target, "target domain name")
      ->required();
  expand_cmd->add_option("--out", expand_out, "run directory")->required();
  AddConfigOptions(expand_cmd, &expand_args);

  auto *pipe_cmd = app.add_subcommand(
      "run-pipeline", "seed training plus every expansion step (or comb)");
  std::string pipe_data, pipe_out;
  ConfigArgs pipe_args;
  pipe_cmd->add_option("--data", pipe_data, "data directory")->required();
  pipe_cmd->add_option("--out", pipe_out, "run directory")->required();
  AddConfigOptions(pipe_cmd, &pipe_args);

  auto *sweep_cmd = app.add_subcommand(
      "sweep", "rerun one expansion step across regularizer scales");
  std::string sweep_data, sweep_out, sweep_state, sweep_target;
  std::string sweep_alphas, sweep_methods = "lwf,denlwf";
  ConfigArgs sweep_args;
  sweep_cmd->add_option("--data", sweep_data, "data directory")->required();
  sweep_cmd->add_option("--out", sweep_out, "output directory")->required();
  sweep_cmd->add_option("--state", sweep_state,
                        "source .clstate (default: train the seed model)");
  sweep_cmd->add_option("--target", sweep_target,
                        "target domain (default: the last domain)");
  sweep_cmd->add_option("--alphas", sweep_alphas, "comma-separated scales")
      ->required();
  sweep_cmd->add_option("--methods", sweep_methods,
                        "comma-separated methods");
  AddConfigOptions(sweep_cmd, &sweep_args);

  auto *report_cmd = app.add_subcommand(
      "report", "render summary tables and metric CSVs for a run");
  std::string report_run, report_ft, report_comb;
  report_cmd->add_option("--run", report_run, "run directory")->required();
  report_cmd->add_option("--ft-run", report_ft,
                         "ft reference run (for gap recovery)");
  report_cmd->add_option("--comb-run", report_comb,
                         "comb reference run (for gap recovery)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) {
      std::vector<DomainSpec> specs = DefaultPipelineSpecs(gen_seed);
      std::vector<Dataset> datasets(specs.size());
      ParallelFor(static_cast<int32>(specs.size()), gen_threads,
                  [&](int32 i) { datasets[i] = GenerateDomain(specs[i]); });
      std::filesystem::create_directories(gen_out);
      std::vector<std::string> names;
      for (const Dataset &d : datasets) {
        SaveDataset(d, gen_out);
        names.push_back(d.domain);
      }
      SaveDomainIndex(names, gen_out);
      std::cout << "wrote " << names.size() << " domains to " << gen_out
                << "\n";
    } else if (seed_cmd->parsed()) {
      PipelineConfig config = BuildConfig(seed_args);
      std::vector<Dataset> datasets = LoadAllDomains(seed_data);
      WriteRunConfig(config, seed_out);
      Graph decode_graph = BuildDecodeGraph(datasets, config.decode_lm_smoothing);
      std::vector<IterationRow> log;
      ClState state = TrainSeed(config, datasets, decode_graph, &log);
      WriteStepArtifacts(state, log, seed_out);
      WriteResults(state, config, seed_out);
      std::cout << "seed model error on " << state.seed_eval_domains[0]
                << ": " << state.seed_eval_errors[0] << "%\n";
    } else if (expand_cmd->parsed()) {
      PipelineConfig config = BuildConfig(expand_args);
      std::vector<Dataset> datasets = LoadAllDomains(expand_data);
      ClState state = LoadClState(expand_state);
      const Dataset &target = FindDataset(datasets, expand_target);
      WriteRunConfig(config, expand_out);
      Graph decode_graph = BuildDecodeGraph(datasets, config.decode_lm_smoothing);
      std::vector<IterationRow> log;
      ExpandStep(&state, target, datasets, decode_graph, config, &log);
      WriteStepArtifacts(state, log, expand_out);
      WriteResults(state, config, expand_out);
      std::cout << "step " << state.step << " ("
                << config.method << " onto " << target.domain
                << ") average error: "
                << state.eval_history.RowAverage(state.step) << "%\n";
    } else if (pipe_cmd->parsed()) {
      PipelineConfig config = BuildConfig(pipe_args);
      std::vector<Dataset> datasets = LoadAllDomains(pipe_data);
      RunPipeline(config, datasets, pipe_out);
      std::cout << "pipeline (" << config.method << ") written to "
                << pipe_out << "\n";
    } else if (sweep_cmd->parsed()) {
      PipelineConfig config = BuildConfig(sweep_args);
      std::vector<Dataset> datasets = LoadAllDomains(sweep_data);
      Graph decode_graph = BuildDecodeGraph(datasets, config.decode_lm_smoothing);
      ClState source;
      if (sweep_state.empty()) {
        source = TrainSeed(config, datasets, decode_graph, nullptr);
      } else {
        source = LoadClState(sweep_state);
      }
      std::string target_name =
          sweep_target.empty() ? datasets.back().domain : sweep_target;
      const Dataset &target = FindDataset(datasets, target_name);
      std::vector<SweepRow> rows =
          SweepAlpha(config, source, target, datasets, decode_graph,
                     ParseAlphaList(sweep_alphas), SplitCommas(sweep_methods));
      std::filesystem::create_directories(sweep_out);
      WriteTextFile(sweep_out + "/config.json", ConfigToJson(config));
      std::vector<std::string> domains = source.domains_seen;
      domains.push_back(target.domain);
      WriteTextFile(sweep_out + "/sweep.csv", SweepCsv(rows, domains));
      std::cout << rows.size() << " sweep rows written to " << sweep_out
                << "/sweep.csv\n";
    } else if (report_cmd->parsed()) {
      WriteReport(report_run, report_ft, report_comb);
      std::cout << "report written to " << report_run
                << "/results/report.md\n";
    }
    return 0;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace
}  // namespace cllab

int main(int argc, char **argv) { return cllab::Main(argc, argv); }
