// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_TESTS_SUPPORT_HPP_
#define QROBUST_TESTS_SUPPORT_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qrobust/lexicon.hpp"
#include "qrobust/model.hpp"
#include "qrobust/quant.hpp"
#include "qrobust/toy.hpp"
#include "qrobust/trainer.hpp"

namespace qrobust::testing {

inline Vocabulary vocab_from(const Dataset& ds) {
  std::vector<std::vector<std::string>> tokens;
  for (const auto& ex : ds.examples) tokens.push_back(tokenize(ex.text));
  return Vocabulary::build(tokens);
}

/// Default toy corpus and a model trained on it with seed 1, built once per
/// test binary.
struct ToySetup {
  toy::Corpus corpus;
  Vocabulary vocab;
  TransformerClassifier model;
  TrainReport report;
  QuantizedClassifier quantized;
  SynonymIndex index;

  static const ToySetup& get() {
    static const ToySetup setup = [] {
      ToySetup s{.corpus = toy::make_corpus({}), .model = TransformerClassifier::zeros({})};
      s.vocab = vocab_from(s.corpus.train);
      ModelConfig c;
      c.vocab_size = static_cast<std::uint32_t>(s.vocab.size());
      c.seed = 1;
      s.model = train(c, s.corpus.train, s.corpus.dev, s.vocab, {}, &s.report);
      s.quantized = quantize_model(s.model);
      s.index = build_index(toy::make_lexicon(), s.vocab, SynonymIndex::kDefaultK,
                            SynonymIndex::kDefaultMinCos);
      return s;
    }();
    return setup;
  }
};

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = std::filesystem::temp_directory_path() /
            ("qrobust_" + tag + "_" + (info ? std::string(info->name()) : std::string("x")));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace qrobust::testing

#endif  // QROBUST_TESTS_SUPPORT_HPP_
