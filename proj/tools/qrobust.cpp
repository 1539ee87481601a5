// SPDX-License-Identifier: Apache-2.0
// Command-line front end: train, quantize, attack, advtrain, evaluate, report.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrobust/errors.hpp"
#include "qrobust/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  fs::path config;
  std::optional<std::uint64_t> seed;
  fs::path out = "runs/default";
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment config (key = value)");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the experiment seed");
  cmd->add_option("--out", c.out, "Run directory")->capture_default_str();
}

qrobust::ExperimentConfig resolve(const Common& c) {
  qrobust::ExperimentConfig config = qrobust::load_config(c.config);
  if (c.seed) config.seed = *c.seed;
  return config;
}

void print(const qrobust::StepOutput& out) {
  for (const auto& line : out.summary) std::printf("%s\n", line.c_str());
  for (const auto& f : out.files) std::printf("  wrote %s\n", f.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantization vs adversarial robustness toolkit"};
  app.require_subcommand(1);

  Common train_opts, quant_opts, attack_opts, adv_opts, eval_opts, report_opts;
  std::string attack_name = "textfooler";
  std::string attack_mode = "transfer";
  std::string eval_mode = "transfer";
  std::vector<fs::path> report_inputs;

  auto* train = app.add_subcommand("train", "Train the float classifier");
  add_common(train, train_opts);
  auto* quantize = app.add_subcommand("quantize", "Quantize the trained checkpoint to int8");
  add_common(quantize, quant_opts);
  auto* attack = app.add_subcommand("attack", "Attack float and quantized models");
  add_common(attack, attack_opts);
  attack->add_option("--attack", attack_name)
      ->check(CLI::IsMember({"textfooler", "pwws", "pso"}))
      ->capture_default_str();
  attack->add_option("--mode", attack_mode)
      ->check(CLI::IsMember({"transfer", "adaptive"}))
      ->capture_default_str();
  auto* advtrain = app.add_subcommand("advtrain", "Adversarial training baseline");
  add_common(advtrain, adv_opts);
  auto* evaluate = app.add_subcommand("evaluate", "Clean and under-attack evaluation");
  add_common(evaluate, eval_opts);
  evaluate->add_option("--mode", eval_mode)
      ->check(CLI::IsMember({"transfer", "adaptive"}))
      ->capture_default_str();
  auto* report = app.add_subcommand("report", "Compare evaluation reports");
  add_common(report, report_opts, false);
  report->add_option("--reports", report_inputs,
                     "Evaluation JSON files (default: evaluation_*.json in --out)")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      print(qrobust::train_step(qrobust::load_experiment(resolve(train_opts)), train_opts.out));
    } else if (quantize->parsed()) {
      print(qrobust::quantize_step(qrobust::load_experiment(resolve(quant_opts)), quant_opts.out));
    } else if (attack->parsed()) {
      print(qrobust::attack_step(qrobust::load_experiment(resolve(attack_opts)), attack_opts.out,
                                 qrobust::parse_attack_kind(attack_name),
                                 qrobust::parse_eval_mode(attack_mode)));
    } else if (advtrain->parsed()) {
      print(qrobust::advtrain_step(qrobust::load_experiment(resolve(adv_opts)), adv_opts.out));
    } else if (evaluate->parsed()) {
      print(qrobust::evaluate_step(qrobust::load_experiment(resolve(eval_opts)), eval_opts.out,
                                   qrobust::parse_eval_mode(eval_mode)));
    } else if (report->parsed()) {
      if (report_inputs.empty() && fs::is_directory(report_opts.out)) {
        for (const auto& entry : fs::directory_iterator(report_opts.out)) {
          const std::string name = entry.path().filename().string();
          if (name.starts_with("evaluation_") && name.ends_with(".json")) {
            report_inputs.push_back(entry.path());
          }
        }
        std::sort(report_inputs.begin(), report_inputs.end());
      }
      if (report_inputs.empty()) {
        std::fprintf(stderr, "report: no evaluation reports found in %s\n",
                     report_opts.out.string().c_str());
        return 1;
      }
      std::optional<qrobust::ExperimentConfig> config;
      if (!report_opts.config.empty()) config = resolve(report_opts);
      print(qrobust::report_step(report_inputs, report_opts.out, config ? &*config : nullptr));
    }
  } catch (const qrobust::ReportMismatch& e) {
    std::fprintf(stderr, "report: %s\n", e.what());
    for (const auto& line : e.diff()) std::fprintf(stderr, "  %s\n", line.c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
