// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "qrobust/binary_io.hpp"
#include "qrobust/checkpoint.hpp"
#include "qrobust/errors.hpp"
#include "qrobust/model.hpp"
#include "qrobust/random.hpp"
#include "qrobust/trainer.hpp"

namespace qrobust {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 4;
  c.max_seq_len = 4;
  c.embed_dim = 2;
  c.num_layers = 1;
  c.num_heads = 1;
  c.ffn_dim = 2;
  c.num_classes = 2;
  c.dropout = 0.0f;
  return c;
}

void set(Tensor2D& t, std::vector<float> values) { t = Tensor2D(t.rows(), t.cols(), std::move(values)); }

// Hand-set weights for the traced forward pass.
TransformerClassifier traced_model() {
  TransformerClassifier m = TransformerClassifier::zeros(tiny_config());
  set(m.token_embeddings, {0, 0, 0.5f, 0.5f, 1, 0, 0, 1});
  set(m.position_embeddings, {0.1f, -0.1f, 0.2f, 0.3f, 0, 0, 0, 0});
  EncoderLayer& l = m.layers[0];
  set(l.wq, {1, 0, 0, 1});
  set(l.wk, {0.5f, 0, 0, 2});
  set(l.wv, {1, 1, 0, 1});
  set(l.wo, {0.5f, 0, 0.25f, 1});
  set(l.ln1_gain, {1.5f, 0.5f});
  set(l.ln1_bias, {0.1f, -0.2f});
  set(l.w1, {1, -1, 0.5f, 2});
  set(l.b1, {0, 0.1f});
  set(l.w2, {1, 0.5f, -0.5f, 1});
  set(l.b2, {0.05f, 0});
  set(l.ln2_gain, {0.8f, 1.2f});
  set(l.ln2_bias, {0, 0.3f});
  set(m.head, {1, -1, 2, 0.5f});
  set(m.head_bias, {0.1f, -0.1f});
  return m;
}

// Independent double-precision evaluation of the traced model.
struct TracedOracle {
  static constexpr double kP23[2] = {0.6570104961908347, 0.34298950380916526};
  static constexpr double kP32[2] = {0.6570104962084796, 0.34298950379152043};
  static constexpr double kP203[2] = {0.6570104961897418, 0.34298950381025817};
  static constexpr double kEmpty[2] = {0.549833997312478, 0.4501660026875221};
};

TEST(ModelConfig, ValidatesInvariants) {
  ModelConfig c = tiny_config();
  EXPECT_NO_THROW(c.validate());
  c.embed_dim = 3;
  c.num_heads = 2;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = tiny_config();
  c.num_classes = 1;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = tiny_config();
  c.dropout = 1.0f;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = tiny_config();
  c.vocab_size = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Forward, ZeroHeadGivesUniform) {
  ModelConfig c;
  c.vocab_size = 10;
  c.num_classes = 3;
  c.seed = 5;
  const TransformerClassifier m = TransformerClassifier::initialize(c);
  for (const std::vector<TokenId>& ids : {std::vector<TokenId>{2, 3, 4}, std::vector<TokenId>{9}}) {
    const ClassifierOutput out = forward(m, ids);
    for (float p : out.probabilities) EXPECT_FLOAT_EQ(p, 1.0f / 3.0f);
    EXPECT_EQ(out.predicted_label, 0);
  }
}

TEST(Forward, DeterministicAcrossCalls) {
  ModelConfig c;
  c.vocab_size = 20;
  c.seed = 9;
  TransformerClassifier m = TransformerClassifier::initialize(c);
  Generator gen(3);
  for (float& v : m.head.values()) v = static_cast<float>(uniform(gen, -1, 1));
  const std::vector<TokenId> ids = {4, 7, 2, 19, 3};
  EXPECT_EQ(forward(m, ids), forward(m, ids));
  EXPECT_EQ(TransformerClassifier::initialize(c).token_embeddings, m.token_embeddings);
}

TEST(Forward, MatchesHandTrace) {
  const TransformerClassifier m = traced_model();
  m.audit_shapes();
  const auto p23 = forward(m, std::vector<TokenId>{2, 3}).probabilities;
  EXPECT_NEAR(p23[0], TracedOracle::kP23[0], 1e-5);
  EXPECT_NEAR(p23[1], TracedOracle::kP23[1], 1e-5);
  const auto p32 = forward(m, std::vector<TokenId>{3, 2}).probabilities;
  EXPECT_NEAR(p32[0], TracedOracle::kP32[0], 1e-5);
  // PAD is skipped but later tokens keep their positions.
  const auto p203 = forward(m, std::vector<TokenId>{2, 0, 3}).probabilities;
  EXPECT_NEAR(p203[0], TracedOracle::kP203[0], 1e-5);
  EXPECT_NEAR(p203[1], TracedOracle::kP203[1], 1e-5);
}

TEST(Forward, AllPadYieldsHeadBiasDistribution) {
  const TransformerClassifier m = traced_model();
  for (const std::vector<TokenId>& ids : {std::vector<TokenId>{}, std::vector<TokenId>{0, 0}}) {
    const auto p = forward(m, ids).probabilities;
    EXPECT_NEAR(p[0], TracedOracle::kEmpty[0], 1e-6);
    EXPECT_NEAR(p[1], TracedOracle::kEmpty[1], 1e-6);
  }
}

TEST(Forward, TruncatesToMaxSeqLen) {
  const TransformerClassifier m = traced_model();
  EXPECT_EQ(forward(m, std::vector<TokenId>{2, 3, 1, 1, 2, 3}),
            forward(m, std::vector<TokenId>{2, 3, 1, 1}));
}

TEST(Forward, RejectsOutOfRangeIds) {
  const TransformerClassifier m = traced_model();
  EXPECT_THROW(forward(m, std::vector<TokenId>{2, 4}), ContractViolation);
  EXPECT_THROW(forward(m, std::vector<TokenId>{-1}), ContractViolation);
}

TEST(Forward, OrderOfEvaluationDoesNotMatter) {
  ModelConfig c;
  c.vocab_size = 30;
  c.seed = 2;
  TransformerClassifier m = TransformerClassifier::initialize(c);
  Generator gen(8);
  for (float& v : m.head.values()) v = static_cast<float>(uniform(gen, -1, 1));
  std::vector<std::vector<TokenId>> batch;
  for (int i = 0; i < 10; ++i) {
    std::vector<TokenId> ids(1 + uniform_index(gen, 8));
    for (auto& id : ids) id = static_cast<TokenId>(1 + uniform_index(gen, 29));
    batch.push_back(ids);
  }
  std::vector<ClassifierOutput> forward_order, reverse_order(batch.size());
  for (const auto& ids : batch) forward_order.push_back(forward(m, ids));
  for (std::size_t i = batch.size(); i-- > 0;) reverse_order[i] = forward(m, batch[i]);
  EXPECT_EQ(forward_order, reverse_order);
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax(std::vector<float>{0.5f, 0.5f}), 0);
  EXPECT_EQ(argmax(std::vector<float>{0.2f, 0.4f, 0.4f}), 1);
  EXPECT_EQ(argmax(std::vector<float>{0.1f, 0.2f, 0.7f}), 2);
}

TEST(Predict, UnknownWordsActLikeUnk) {
  const TransformerClassifier m = traced_model();
  const Vocabulary vocab = Vocabulary::from_words({"alpha", "beta"});
  ASSERT_EQ(vocab.size(), 4u);
  EXPECT_EQ(predict(m, "zzz qqq", vocab),
            forward(m, std::vector<TokenId>{Vocabulary::kUnk, Vocabulary::kUnk}));
  EXPECT_EQ(predict(m, "", vocab), forward(m, std::vector<TokenId>{}));
  EXPECT_EQ(predict(m, "Alpha beta", vocab), forward(m, vocab.encode(tokenize("alpha beta"))));
}

TEST(Gradient, MatchesCentralDifferences) {
  ModelConfig c = tiny_config();
  c.vocab_size = 6;
  c.seed = 21;
  TransformerClassifier m = TransformerClassifier::initialize(c);
  // Larger weights than the init range so every path carries signal.
  Generator gen(4);
  m.for_each_tensor([&](const std::string&, Tensor2D& t) {
    for (float& v : t.values()) v = static_cast<float>(uniform(gen, -1.0, 1.0));
  });
  const std::vector<TokenId> ids = {2, 5, 3};
  const int label = 1;
  const LossAndGradient lg = loss_and_gradient(m, ids, label);
  EXPECT_NEAR(lg.loss, cross_entropy(m, ids, label), 1e-6);

  std::vector<std::pair<std::string, std::size_t>> picks;
  std::vector<std::pair<std::string, std::size_t>> all;
  m.for_each_tensor([&](const std::string& name, Tensor2D& t) {
    for (std::size_t i = 0; i < t.size(); ++i) all.emplace_back(name, i);
  });
  // Rows of unused embeddings have zero gradient by construction; skip them.
  std::erase_if(all, [](const auto& p) {
    if (p.first == "token_embeddings") {
      const std::size_t row = p.second / 2;
      return row != 2 && row != 5 && row != 3;
    }
    if (p.first == "position_embeddings") return p.second / 2 >= 3;
    return false;
  });
  for (int i = 0; i < 20; ++i) picks.push_back(all[uniform_index(gen, all.size())]);

  const float h = 1e-3f;
  for (const auto& [name, index] : picks) {
    float analytic = 0.0f;
    lg.gradient.for_each_tensor([&](const std::string& n, const Tensor2D& t) {
      if (n == name) analytic = t.values()[index];
    });
    auto perturbed_loss = [&](float delta) {
      TransformerClassifier copy = m;
      copy.for_each_tensor([&](const std::string& n, Tensor2D& t) {
        if (n == name) t.values()[index] += delta;
      });
      return static_cast<double>(cross_entropy(copy, ids, label));
    };
    const double numeric = (perturbed_loss(h) - perturbed_loss(-h)) / (2.0 * h);
    // Relative error with a small absolute floor for near-zero gradients,
    // since float32 losses carry ~1e-7 absolute noise.
    const double scale = std::max({std::abs(numeric), std::abs(double{analytic}), 1e-2});
    EXPECT_LE(std::abs(analytic - numeric) / scale, 1e-3)
        << name << "[" << index << "] analytic " << analytic << " numeric " << numeric;
  }
}

Dataset keyword_corpus(std::size_t n, std::uint64_t seed) {
  // The label is carried by exactly one keyword; a bag-of-words rule gets 1.0.
  const std::vector<std::string> filler = {"the", "a", "film", "plot", "was", "really", "quite"};
  Generator gen(seed);
  Dataset ds;
  ds.name = "keywords";
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    std::string text;
    const std::size_t len = 2 + uniform_index(gen, 4);
    const std::size_t at = uniform_index(gen, len + 1);
    for (std::size_t w = 0; w <= len; ++w) {
      if (!text.empty()) text += ' ';
      text += w == at ? (label ? "great" : "awful") : filler[uniform_index(gen, filler.size())];
    }
    ds.examples.push_back({text, label});
  }
  return ds;
}

Vocabulary vocab_of(const Dataset& ds) {
  std::vector<std::vector<std::string>> tokens;
  for (const auto& ex : ds.examples) tokens.push_back(tokenize(ex.text));
  return Vocabulary::build(tokens);
}

ModelConfig small_config(const Vocabulary& vocab) {
  ModelConfig c;
  c.vocab_size = static_cast<std::uint32_t>(vocab.size());
  c.embed_dim = 16;
  c.num_heads = 2;
  c.ffn_dim = 32;
  c.num_layers = 1;
  c.seed = 3;
  return c;
}

TEST(Train, SeparableKeywordCorpus) {
  const Dataset train_set = keyword_corpus(50, 1), dev = keyword_corpus(40, 2);
  const Vocabulary vocab = vocab_of(train_set);
  TrainOptions opts;
  opts.epochs = 10;
  ModelConfig c;  // default architecture
  c.vocab_size = static_cast<std::uint32_t>(vocab.size());
  c.seed = 3;
  TrainReport report;
  const TransformerClassifier m = train(c, train_set, dev, vocab, opts, &report);
  m.audit_shapes();
  EXPECT_GE(report.best_dev_accuracy, 0.95);
  EXPECT_EQ(report.epoch_loss.size(), 10u);
  EXPECT_EQ(predict(m, "the plot was great", vocab).predicted_label, 1);
  EXPECT_EQ(predict(m, "quite awful film", vocab).predicted_label, 0);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const Dataset ds = keyword_corpus(10, 1);
  const Vocabulary vocab = vocab_of(ds);
  TrainOptions opts;
  opts.epochs = 0;
  const ModelConfig c = small_config(vocab);
  EXPECT_EQ(serialize_checkpoint(train(c, ds, ds, vocab, opts)),
            serialize_checkpoint(TransformerClassifier::initialize(c)));
}

TEST(Train, DeterministicCheckpoints) {
  const Dataset train_set = keyword_corpus(30, 1), dev = keyword_corpus(10, 2);
  const Vocabulary vocab = vocab_of(train_set);
  TrainOptions opts;
  opts.epochs = 3;
  const ModelConfig c = small_config(vocab);
  EXPECT_EQ(serialize_checkpoint(train(c, train_set, dev, vocab, opts)),
            serialize_checkpoint(train(c, train_set, dev, vocab, opts)));
}

TEST(Train, LabelOutOfRangeIsRejected) {
  Dataset ds = keyword_corpus(10, 1);
  const Vocabulary vocab = vocab_of(ds);
  ds.examples[3].label = 2;
  EXPECT_THROW(train(small_config(vocab), ds, ds, vocab, {}), ContractViolation);
}

TEST(Train, DivergenceReportsStep) {
  const Dataset ds = keyword_corpus(20, 1);
  const Vocabulary vocab = vocab_of(ds);
  TrainOptions opts;
  opts.learning_rate = 1e30f;
  opts.epochs = 5;
  try {
    train(small_config(vocab), ds, ds, vocab, opts);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_GT(e.step(), 0u);
  }
}

std::size_t expected_checkpoint_bytes(const ModelConfig& c) {
  // magic + version + nine u32 config words
  std::size_t bytes = 4 + 2 + 9 * 4;
  auto tensor = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    bytes += 2 + name.size() + 4 + 4 + 4 * rows * cols;
  };
  tensor("token_embeddings", c.vocab_size, c.embed_dim);
  tensor("position_embeddings", c.max_seq_len, c.embed_dim);
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    for (const char* w : {"attn.q", "attn.k", "attn.v", "attn.o"}) tensor(p + w, c.embed_dim, c.embed_dim);
    tensor(p + "ln1.gain", 1, c.embed_dim);
    tensor(p + "ln1.bias", 1, c.embed_dim);
    tensor(p + "ffn.w1", c.embed_dim, c.ffn_dim);
    tensor(p + "ffn.b1", 1, c.ffn_dim);
    tensor(p + "ffn.w2", c.ffn_dim, c.embed_dim);
    tensor(p + "ffn.b2", 1, c.embed_dim);
    tensor(p + "ln2.gain", 1, c.embed_dim);
    tensor(p + "ln2.bias", 1, c.embed_dim);
  }
  tensor("head.weight", c.embed_dim, c.num_classes);
  tensor("head.bias", 1, c.num_classes);
  return bytes;
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("qrobust_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTripIsBitwise) {
  ModelConfig c;
  c.vocab_size = 50;
  c.seed = 0x1234567890abcdefULL;
  TransformerClassifier m = TransformerClassifier::initialize(c);
  Generator gen(6);
  for (float& v : m.head.values()) v = static_cast<float>(uniform(gen, -1, 1));
  const auto path = dir_ / "m.qgck";
  const std::size_t written = save_checkpoint(m, path);
  EXPECT_EQ(written, std::filesystem::file_size(path));
  EXPECT_EQ(written, expected_checkpoint_bytes(c));
  const TransformerClassifier loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.config.seed, c.seed);
  EXPECT_EQ(serialize_checkpoint(loaded), serialize_checkpoint(m));
  for (int i = 0; i < 100; ++i) {
    std::vector<TokenId> ids(1 + uniform_index(gen, 40));
    for (auto& id : ids) id = static_cast<TokenId>(uniform_index(gen, 50));
    EXPECT_EQ(forward(loaded, ids), forward(m, ids));
  }
}

TEST_F(CheckpointTest, ByteCountMatchesFormatArithmetic) {
  for (std::uint32_t layers : {1u, 2u, 3u}) {
    ModelConfig c;
    c.vocab_size = 37;
    c.num_layers = layers;
    c.ffn_dim = 48;
    EXPECT_EQ(serialize_checkpoint(TransformerClassifier::initialize(c)).size(),
              expected_checkpoint_bytes(c));
  }
}

CheckpointErrorKind parse_error_kind(std::string_view bytes) {
  try {
    parse_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "parse succeeded";
  return CheckpointErrorKind::kTrailingBytes;
}

TEST(CheckpointErrors, DistinctKinds) {
  ModelConfig c;
  c.vocab_size = 12;
  const std::string good = serialize_checkpoint(TransformerClassifier::initialize(c));

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(parse_error_kind(bad_magic), CheckpointErrorKind::kBadMagic);

  std::string bad_version = good;
  bad_version[4] = 9;
  EXPECT_EQ(parse_error_kind(bad_version), CheckpointErrorKind::kVersionMismatch);

  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, std::size_t{42}, good.size() / 2,
                          good.size() - 1}) {
    EXPECT_EQ(parse_error_kind(good.substr(0, cut)), CheckpointErrorKind::kTruncated) << cut;
  }

  std::string bad_heads = good;
  bad_heads[6 + 4 * 4] = 3;  // num_heads = 3 does not divide 64
  EXPECT_EQ(parse_error_kind(bad_heads), CheckpointErrorKind::kInvalidConfig);

  std::string bad_name = good;
  bad_name[42 + 2] = 'X';  // first tensor name
  EXPECT_EQ(parse_error_kind(bad_name), CheckpointErrorKind::kShapeMismatch);

  EXPECT_EQ(parse_error_kind(good + "x"), CheckpointErrorKind::kTrailingBytes);
}

TEST(CheckpointErrors, HugeDeclaredVocabIsTruncationNotAllocation) {
  ModelConfig c;
  c.vocab_size = 12;
  std::string bytes = serialize_checkpoint(TransformerClassifier::initialize(c));
  ByteWriter w;
  w.u32(0xfffffff0u);
  const std::string v = w.take();
  bytes.replace(6, 4, v);
  EXPECT_EQ(parse_error_kind(bytes), CheckpointErrorKind::kTruncated);
}

}  // namespace
}  // namespace qrobust
