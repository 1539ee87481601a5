// SPDX-License-Identifier: Apache-2.0
#include "qrobust/pipeline.hpp"

#include <json.hpp>

#include "qrobust/advtrain.hpp"
#include "qrobust/binary_io.hpp"
#include "qrobust/checkpoint.hpp"
#include "qrobust/errors.hpp"
#include "qrobust/quant.hpp"
#include "qrobust/random.hpp"
#include "qrobust/trainer.hpp"

namespace qrobust {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

Dataset read_split(const fs::path& path, const ExperimentConfig& c, Split split,
                   std::map<std::string, std::string>& hashes, const char* label) {
  const std::string bytes = read_file(path);
  hashes[label] = content_hash(bytes);
  return parse_dataset(bytes, c.dataset, c.num_classes, split);
}

std::string write(const fs::path& path, const std::string& bytes, StepOutput& out) {
  write_file(path, bytes);
  out.files.push_back(path);
  return bytes;
}

TransformerClassifier load_float(const Experiment& e, const fs::path& path) {
  if (!fs::exists(path)) {
    throw IoError(path.string() + " not found; run the train step first");
  }
  TransformerClassifier model = load_checkpoint(path);
  if (model.config.vocab_size != e.vocab.size()) {
    throw IoError(path.string() + " was trained on a different vocabulary (" +
                  std::to_string(model.config.vocab_size) + " vs " +
                  std::to_string(e.vocab.size()) + " entries)");
  }
  return model;
}

QuantizedClassifier load_quantized(const Experiment& e, const fs::path& path) {
  if (!fs::exists(path)) {
    throw IoError(path.string() + " not found; run the quantize step first");
  }
  QuantizedClassifier model = load_quantized_checkpoint(path);
  if (model.config.vocab_size != e.vocab.size()) {
    throw IoError(path.string() + " was built for a different vocabulary");
  }
  return model;
}

Json train_report_json(const TrainReport& r) {
  return Json{{"epoch_loss", r.epoch_loss},
              {"epoch_dev_accuracy", r.epoch_dev_accuracy},
              {"best_epoch", r.best_epoch},
              {"best_dev_accuracy", r.best_dev_accuracy}};
}

std::map<std::string, std::string> with_file_hashes(std::map<std::string, std::string> hashes,
                                                    const std::vector<fs::path>& files) {
  for (const auto& f : files) hashes[f.filename().string()] = content_hash(read_file(f));
  return hashes;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

}  // namespace

Experiment load_experiment(const ExperimentConfig& config) {
  Experiment e{.config = config};
  e.train = read_split(config.train_path, config, Split::kTrain, e.input_hashes, "train");
  e.dev = read_split(config.dev_path, config, Split::kDev, e.input_hashes, "dev");
  e.test = read_split(config.test_path, config, Split::kTest, e.input_hashes, "test");
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(e.train.size());
  for (const auto& ex : e.train.examples) tokens.push_back(tokenize(ex.text));
  e.vocab = Vocabulary::build(tokens);
  const std::string lexicon = read_file(config.lexicon_path);
  e.input_hashes["lexicon"] = content_hash(lexicon);
  e.index = build_index(parse_embeddings(lexicon), e.vocab, config.synonyms_k,
                        config.synonyms_min_cos);
  return e;
}

ModelConfig model_config(const Experiment& e) {
  const ExperimentConfig& c = e.config;
  ModelConfig m;
  m.vocab_size = static_cast<std::uint32_t>(e.vocab.size());
  m.max_seq_len = c.max_seq_len;
  m.embed_dim = c.embed_dim;
  m.num_layers = c.num_layers;
  m.num_heads = c.num_heads;
  m.ffn_dim = c.ffn_dim;
  m.num_classes = static_cast<std::uint32_t>(c.num_classes);
  m.dropout = c.dropout;
  m.seed = c.seed;
  return m;
}

AttackConfig attack_config(const ExperimentConfig& c) {
  AttackConfig a;
  a.kind = c.attack;
  a.max_candidates_per_word = c.max_candidates;
  a.query_budget = c.query_budget;
  a.pso_population = c.pso_population;
  a.pso_iterations = c.pso_iterations;
  a.pso_mutation_prob = c.pso_mutation_prob;
  a.seed = derive_seed(c.seed, "attack");
  return a;
}

std::size_t eval_sample_count(const Experiment& e) {
  const std::size_t n = e.config.eval_samples;
  if (n == 0) return e.test.size();
  if (n > e.test.size()) {
    throw ContractViolation("eval.samples = " + std::to_string(n) + " exceeds the test split (" +
                            std::to_string(e.test.size()) + ")");
  }
  return n;
}

StepOutput train_step(const Experiment& e, const fs::path& out) {
  StepOutput result;
  TrainReport report;
  const TransformerClassifier model =
      train(model_config(e), e.train, e.dev, e.vocab, e.config.train, &report);
  const fs::path ckpt = out / kFloatCheckpointFile;
  const std::size_t bytes = save_checkpoint(model, ckpt);
  result.files.push_back(ckpt);
  write(out / "vocab.txt", e.vocab.serialize(), result);
  write(out / "train_report.json", train_report_json(report).dump(2) + "\n", result);
  result.summary.push_back("best epoch " + std::to_string(report.best_epoch) + ", dev accuracy " +
                           pct(report.best_dev_accuracy));
  result.summary.push_back("checkpoint " + ckpt.string() + " (" + std::to_string(bytes) +
                           " bytes)");
  result.files.push_back(write_manifest(out, "train", e.config, e.input_hashes, result.files));
  return result;
}

StepOutput quantize_step(const Experiment& e, const fs::path& out) {
  StepOutput result;
  const fs::path src = out / kFloatCheckpointFile;
  const TransformerClassifier model = load_float(e, src);
  const fs::path dst = out / kQuantizedCheckpointFile;
  save_checkpoint(quantize_model(model), dst);
  result.files.push_back(dst);
  const double ratio = size_ratio(dst, src);
  const Json info{{"float_bytes", model_size(src)},
                  {"quantized_bytes", model_size(dst)},
                  {"size_ratio", ratio}};
  write(out / "quantize.json", info.dump(2) + "\n", result);
  result.summary.push_back("size ratio " + std::to_string(ratio) + " (" +
                           std::to_string(model_size(dst)) + " / " +
                           std::to_string(model_size(src)) + " bytes)");
  result.files.push_back(write_manifest(out, "quantize", e.config,
                                        with_file_hashes(e.input_hashes, {src}), result.files));
  return result;
}

StepOutput attack_step(const Experiment& e, const fs::path& out, AttackKind kind, EvalMode mode) {
  StepOutput result;
  const fs::path fpath = out / kFloatCheckpointFile, qpath = out / kQuantizedCheckpointFile;
  const TransformerClassifier fmodel = load_float(e, fpath);
  const QuantizedClassifier qmodel = load_quantized(e, qpath);
  const FloatTextClassifier fclf(fmodel, e.vocab);
  const QuantizedTextClassifier qclf(qmodel, e.vocab);
  AttackConfig config = attack_config(e.config);
  config.kind = kind;
  const EvaluationReport report = evaluate_under_attack(
      {{"float", "none", &fclf, model_size(fpath)},
       {"quantized", "quantization", &qclf, model_size(qpath)}},
      e.test, e.index, config, {kind}, mode, eval_sample_count(e));
  const std::string stem = "attack_" + std::string(to_string(kind)) + "_" +
                           std::string(to_string(mode));
  write(out / (stem + ".json"), report_to_json(report), result);
  write(out / (stem + ".jsonl"), results_to_jsonl(report), result);
  for (const auto& m : report.models) {
    result.summary.push_back(m.model_id + ": clean " + pct(m.clean_accuracy) + ", after attack " +
                             pct(m.attacks[0].after_attack_accuracy) + ", success rate " +
                             pct(m.attacks[0].attack_success_rate));
  }
  result.files.push_back(write_manifest(out, stem, e.config,
                                        with_file_hashes(e.input_hashes, {fpath, qpath}),
                                        result.files));
  return result;
}

StepOutput advtrain_step(const Experiment& e, const fs::path& out) {
  StepOutput result;
  const fs::path dir = out / kAdvtrainDir;
  AttackConfig config = attack_config(e.config);
  config.kind = AttackKind::kTextFooler;
  const AdversarialTrainingRun run = adversarial_train(
      model_config(e), e.train, e.dev, e.vocab, e.index, e.config.adv_fraction, config,
      e.config.train);
  const fs::path ckpt = dir / kFloatCheckpointFile;
  save_checkpoint(run.model, ckpt);
  result.files.push_back(ckpt);

  Dataset augmentation{.name = e.train.name + "-adv", .num_classes = e.train.num_classes};
  Json records = Json::array();
  for (const auto& r : run.augmentation) {
    augmentation.examples.push_back({r.adversarial_text, r.label});
    records.push_back({{"source_id", r.source_index},
                       {"label", r.label},
                       {"status", to_string(r.status)},
                       {"queries_used", r.queries_used},
                       {"text", r.adversarial_text}});
  }
  write(dir / "augmented.tsv", format_dataset(augmentation), result);
  const Json provenance{
      {"seed", e.config.seed},
      {"fraction", e.config.adv_fraction},
      {"attempts", run.attempts},
      {"added", run.augmentation.size()},
      {"sample", augmentation_sample(e.train.size(), e.config.adv_fraction, config.seed)},
      {"attack", {{"kind", to_string(config.kind)},
                  {"max_candidates_per_word", config.max_candidates_per_word},
                  {"query_budget", config.query_budget},
                  {"seed", config.seed}}},
      {"base_train_report", train_report_json(run.base_report)},
      {"retrain_report", train_report_json(run.retrain_report)},
      {"records", std::move(records)}};
  write(dir / "augmentation.json", provenance.dump(2) + "\n", result);
  result.summary.push_back("augmentation: " + std::to_string(run.augmentation.size()) + " of " +
                           std::to_string(run.attempts) + " sampled examples flipped");
  result.summary.push_back("dev accuracy base " + pct(run.base_report.best_dev_accuracy) +
                           ", retrained " + pct(run.retrain_report.best_dev_accuracy));
  result.files.push_back(write_manifest(out, "advtrain", e.config, e.input_hashes, result.files));
  return result;
}

StepOutput evaluate_step(const Experiment& e, const fs::path& out, EvalMode mode) {
  StepOutput result;
  const fs::path fpath = out / kFloatCheckpointFile, qpath = out / kQuantizedCheckpointFile;
  const fs::path apath = out / kAdvtrainDir / kFloatCheckpointFile;
  const TransformerClassifier fmodel = load_float(e, fpath);
  const QuantizedClassifier qmodel = load_quantized(e, qpath);
  const FloatTextClassifier fclf(fmodel, e.vocab);
  const QuantizedTextClassifier qclf(qmodel, e.vocab);
  std::vector<ScoredModel> models = {{"float", "none", &fclf, model_size(fpath)},
                                     {"quantized", "quantization", &qclf, model_size(qpath)}};
  std::vector<fs::path> inputs = {fpath, qpath};
  std::optional<TransformerClassifier> amodel;
  std::optional<FloatTextClassifier> aclf;
  if (fs::exists(apath)) {
    amodel.emplace(load_float(e, apath));
    aclf.emplace(*amodel, e.vocab);
    models.push_back({"advtrain", "adversarial-training", &*aclf, model_size(apath)});
    inputs.push_back(apath);
  }
  const EvaluationReport report = evaluate_under_attack(
      models, e.test, e.index, attack_config(e.config),
      {AttackKind::kTextFooler, AttackKind::kPwws, AttackKind::kPso}, mode, eval_sample_count(e));
  const std::string stem = "evaluation_" + std::string(to_string(mode));
  write(out / (stem + ".json"), report_to_json(report), result);
  write(out / (stem + ".jsonl"), results_to_jsonl(report), result);
  for (const auto& m : report.models) {
    std::string line = m.model_id + ": clean " + pct(m.clean_accuracy);
    for (const auto& b : m.attacks) {
      line += ", " + std::string(to_string(b.attack_kind)) + " " + pct(b.after_attack_accuracy);
    }
    result.summary.push_back(line);
  }
  result.files.push_back(write_manifest(out, stem, e.config,
                                        with_file_hashes(e.input_hashes, inputs), result.files));
  return result;
}

StepOutput report_step(const std::vector<fs::path>& paths, const fs::path& out,
                       const ExperimentConfig* config) {
  StepOutput result;
  std::vector<EvaluationReport> reports;
  std::map<std::string, std::string> hashes;
  for (const auto& p : paths) {
    const std::string bytes = read_file(p);
    hashes[p.filename().string()] = content_hash(bytes);
    reports.push_back(report_from_json(bytes));
    check_report(reports.back());
  }
  const Comparison comparison = compare_reports(reports);
  const std::string table = format_table(comparison);
  write(out / "comparison.txt", table, result);
  write(out / "comparison.csv", format_csv(comparison), result);
  result.summary.push_back(table);
  result.files.push_back(
      write_manifest(out, "report", config ? *config : ExperimentConfig{}, hashes, result.files));
  return result;
}

fs::path write_manifest(const fs::path& out, const std::string& step,
                        const ExperimentConfig& config,
                        const std::map<std::string, std::string>& input_hashes,
                        const std::vector<fs::path>& outputs) {
  Json outputs_json = Json::object();
  for (const auto& f : outputs) {
    outputs_json[fs::relative(f, out).generic_string()] = content_hash(read_file(f));
  }
  const Json manifest{{"step", step},
                      {"seed", config.seed},
                      {"config", format_config(config)},
                      {"inputs", input_hashes},
                      {"outputs", std::move(outputs_json)}};
  const fs::path path = out / ("manifest_" + step + ".json");
  write_file(path, manifest.dump(2) + "\n");
  return path;
}

}  // namespace qrobust
