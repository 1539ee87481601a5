// SPDX-License-Identifier: Apache-2.0
#include "qrobust/model.hpp"

#include "qrobust/detail/encoder.hpp"
#include "qrobust/errors.hpp"
#include "qrobust/random.hpp"

namespace qrobust {

namespace {

constexpr float kInitRange = 0.05f;

std::string layer_prefix(std::size_t l) { return "layers." + std::to_string(l) + "."; }

template <typename Model, typename Fn>
void visit_tensors(Model& m, Fn&& fn) {
  fn(std::string("token_embeddings"), m.token_embeddings);
  fn(std::string("position_embeddings"), m.position_embeddings);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& layer = m.layers[l];
    const std::string p = layer_prefix(l);
    fn(p + "attn.q", layer.wq);
    fn(p + "attn.k", layer.wk);
    fn(p + "attn.v", layer.wv);
    fn(p + "attn.o", layer.wo);
    fn(p + "ln1.gain", layer.ln1_gain);
    fn(p + "ln1.bias", layer.ln1_bias);
    fn(p + "ffn.w1", layer.w1);
    fn(p + "ffn.b1", layer.b1);
    fn(p + "ffn.w2", layer.w2);
    fn(p + "ffn.b2", layer.b2);
    fn(p + "ln2.gain", layer.ln2_gain);
    fn(p + "ln2.bias", layer.ln2_bias);
  }
  fn(std::string("head.weight"), m.head);
  fn(std::string("head.bias"), m.head_bias);
}

struct Shape {
  std::size_t rows, cols;
};

Shape expected_shape(const ModelConfig& c, std::string_view name) {
  auto ends_with = [&](std::string_view s) { return name.ends_with(s); };
  if (name == "token_embeddings") return {c.vocab_size, c.embed_dim};
  if (name == "position_embeddings") return {c.max_seq_len, c.embed_dim};
  if (name == "head.weight") return {c.embed_dim, c.num_classes};
  if (name == "head.bias") return {1, c.num_classes};
  if (ends_with("attn.q") || ends_with("attn.k") || ends_with("attn.v") || ends_with("attn.o")) {
    return {c.embed_dim, c.embed_dim};
  }
  if (ends_with("ffn.w1")) return {c.embed_dim, c.ffn_dim};
  if (ends_with("ffn.b1")) return {1, c.ffn_dim};
  if (ends_with("ffn.w2")) return {c.ffn_dim, c.embed_dim};
  return {1, c.embed_dim};  // ffn.b2 and layer-norm parameters
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ContractViolation("invalid model config: " + msg); };
  if (vocab_size < 2) fail("vocab_size must cover the reserved PAD and UNK ids");
  if (max_seq_len == 0 || embed_dim == 0 || num_layers == 0 || num_heads == 0 || ffn_dim == 0) {
    fail("dimensions must be positive");
  }
  if (embed_dim % num_heads != 0) fail("embed_dim must be divisible by num_heads");
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (!(dropout >= 0.0f && dropout < 1.0f)) fail("dropout must lie in [0, 1)");
}

TransformerClassifier TransformerClassifier::zeros(const ModelConfig& config) {
  config.validate();
  TransformerClassifier m;
  m.config = config;
  m.layers.resize(config.num_layers);
  visit_tensors(m, [&](const std::string& name, Tensor2D& t) {
    const Shape s = expected_shape(config, name);
    t = Tensor2D(s.rows, s.cols);
    if (name.ends_with(".gain")) {
      for (float& v : t.values()) v = 1.0f;
    }
  });
  return m;
}

TransformerClassifier TransformerClassifier::initialize(const ModelConfig& config) {
  TransformerClassifier m = zeros(config);
  Generator gen(derive_seed(config.seed, "init"));
  visit_tensors(m, [&](const std::string& name, Tensor2D& t) {
    const bool random = name.ends_with("embeddings") ||
                        (is_linear_weight(name) && name != "head.weight");
    if (!random) return;
    for (float& v : t.values()) v = uniform(gen, -kInitRange, kInitRange);
  });
  return m;
}

void TransformerClassifier::audit_shapes() const {
  config.validate();
  if (layers.size() != config.num_layers) {
    throw ContractViolation("model has " + std::to_string(layers.size()) + " layers, config says " +
                            std::to_string(config.num_layers));
  }
  for_each_tensor([&](const std::string& name, const Tensor2D& t) {
    const Shape s = expected_shape(config, name);
    if (t.rows() != s.rows || t.cols() != s.cols) {
      throw ContractViolation("tensor " + name + " has shape " + t.shape_string() + ", expected " +
                              std::to_string(s.rows) + "x" + std::to_string(s.cols));
    }
  });
}

void TransformerClassifier::for_each_tensor(
    const std::function<void(const std::string&, Tensor2D&)>& fn) {
  visit_tensors(*this, fn);
}

void TransformerClassifier::for_each_tensor(
    const std::function<void(const std::string&, const Tensor2D&)>& fn) const {
  visit_tensors(*this, fn);
}

const Tensor2D& TransformerClassifier::weight(LinearSlot slot) const {
  if (slot.kind == LinearKind::kHead) return head;
  const auto& layer = layers.at(slot.layer);
  switch (slot.kind) {
    case LinearKind::kQuery: return layer.wq;
    case LinearKind::kKey: return layer.wk;
    case LinearKind::kValue: return layer.wv;
    case LinearKind::kOutput: return layer.wo;
    case LinearKind::kFfnIn: return layer.w1;
    case LinearKind::kFfnOut: return layer.w2;
    case LinearKind::kHead: break;
  }
  return head;
}

std::span<const float> TransformerClassifier::bias(LinearSlot slot) const {
  switch (slot.kind) {
    case LinearKind::kFfnIn: return layers.at(slot.layer).b1.values();
    case LinearKind::kFfnOut: return layers.at(slot.layer).b2.values();
    case LinearKind::kHead: return head_bias.values();
    default: return {};
  }
}

std::size_t TransformerClassifier::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const Tensor2D& t) { n += t.size(); });
  return n;
}

bool is_linear_weight(std::string_view name) noexcept {
  for (std::string_view suffix : {"attn.q", "attn.k", "attn.v", "attn.o", "ffn.w1", "ffn.w2"}) {
    if (name.ends_with(suffix)) return true;
  }
  return name == "head.weight";
}

int argmax(std::span<const float> values) noexcept {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

ClassifierOutput forward(const TransformerClassifier& model, std::span<const TokenId> token_ids) {
  return detail::run_encoder(model, token_ids, [&](const Tensor2D& x, LinearSlot slot) {
    Tensor2D y = matmul(x, model.weight(slot));
    add_row_vector(y, model.bias(slot));
    return y;
  });
}

ClassifierOutput predict(const TransformerClassifier& model, std::string_view text,
                         const Vocabulary& vocab) {
  const auto tokens = tokenize(text);
  const auto ids = vocab.encode(tokens);
  return forward(model, ids);
}

}  // namespace qrobust
