// SPDX-License-Identifier: Apache-2.0
// Writes the desk-scale toy corpus, its synonym lexicon and a matching
// experiment config into one directory.

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "qrobust/binary_io.hpp"
#include "qrobust/config.hpp"
#include "qrobust/toy.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the toy sentiment corpus and lexicon"};
  std::filesystem::path out = "data";
  qrobust::toy::CorpusOptions options;
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--seed", options.seed, "Corpus seed")->capture_default_str();
  app.add_option("--train-size", options.train_size)->capture_default_str();
  app.add_option("--dev-size", options.dev_size)->capture_default_str();
  app.add_option("--test-size", options.test_size)->capture_default_str();
  app.add_option("--lukewarm-bias", options.lukewarm_bias,
                 "Probability a lukewarm word comes from the opposite class")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const qrobust::toy::Corpus corpus = qrobust::toy::make_corpus(options);
    qrobust::write_file(out / "train.tsv", qrobust::format_dataset(corpus.train));
    qrobust::write_file(out / "dev.tsv", qrobust::format_dataset(corpus.dev));
    qrobust::write_file(out / "test.tsv", qrobust::format_dataset(corpus.test));
    qrobust::write_file(out / "lexicon.txt",
                        qrobust::toy::format_embeddings(qrobust::toy::make_lexicon()));

    // Paths in the config are relative to the config file itself.
    qrobust::ExperimentConfig config;
    config.train_path = "train.tsv";
    config.dev_path = "dev.tsv";
    config.test_path = "test.tsv";
    config.lexicon_path = "lexicon.txt";
    qrobust::write_file(out / "toy.conf", "# Toy experiment; paths are relative to this file.\n" +
                                              qrobust::format_config(config));
    std::printf("wrote %zu/%zu/%zu examples and lexicon to %s\n", corpus.train.size(),
                corpus.dev.size(), corpus.test.size(), out.string().c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "make_toy_data: %s\n", e.what());
    return 1;
  }
  return 0;
}
