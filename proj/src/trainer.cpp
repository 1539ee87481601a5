// SPDX-License-Identifier: Apache-2.0
#include "qrobust/trainer.hpp"

#include <cmath>
#include <numeric>

#include "qrobust/detail/encoder.hpp"
#include "qrobust/errors.hpp"
#include "qrobust/random.hpp"

namespace qrobust {

namespace {

struct NormCache {
  Tensor2D xhat;
  std::vector<float> inv_std;
};

struct LayerCache {
  Tensor2D x;
  Tensor2D q, k, v;
  std::vector<Tensor2D> attention;
  Tensor2D context;
  std::vector<float> attn_mask;
  NormCache ln1;
  Tensor2D h1;
  Tensor2D pre_gelu;
  Tensor2D hidden;
  std::vector<float> ffn_mask;
  NormCache ln2;
};

struct ForwardCache {
  detail::ActiveTokens active;
  std::vector<LayerCache> layers;
  Tensor2D pooled;
  std::vector<float> probabilities;
  float loss = 0.0f;
};

Tensor2D norm_forward(const Tensor2D& z, const Tensor2D& gain, const Tensor2D& bias,
                      NormCache& cache) {
  const std::size_t n = z.rows(), d = z.cols();
  cache.xhat = Tensor2D(n, d);
  cache.inv_std.assign(n, 0.0f);
  Tensor2D out(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto in = z.row(r);
    float mean = 0.0f;
    for (float v : in) mean += v;
    mean /= static_cast<float>(d);
    float var = 0.0f;
    for (float v : in) var += (v - mean) * (v - mean);
    var /= static_cast<float>(d);
    const float inv_std = 1.0f / std::sqrt(var + kLayerNormEpsilon);
    cache.inv_std[r] = inv_std;
    for (std::size_t c = 0; c < d; ++c) {
      const float xhat = (in[c] - mean) * inv_std;
      cache.xhat(r, c) = xhat;
      out(r, c) = xhat * gain(0, c) + bias(0, c);
    }
  }
  return out;
}

Tensor2D norm_backward(const Tensor2D& dy, const Tensor2D& gain, const NormCache& cache,
                       Tensor2D& dgain, Tensor2D& dbias) {
  const std::size_t n = dy.rows(), d = dy.cols();
  Tensor2D dx(n, d);
  std::vector<float> dxhat(d);
  for (std::size_t r = 0; r < n; ++r) {
    float sum = 0.0f, sum_xhat = 0.0f;
    for (std::size_t c = 0; c < d; ++c) {
      dxhat[c] = dy(r, c) * gain(0, c);
      sum += dxhat[c];
      sum_xhat += dxhat[c] * cache.xhat(r, c);
      dgain(0, c) += dy(r, c) * cache.xhat(r, c);
      dbias(0, c) += dy(r, c);
    }
    const float inv_d = 1.0f / static_cast<float>(d);
    for (std::size_t c = 0; c < d; ++c) {
      dx(r, c) = cache.inv_std[r] * (dxhat[c] - sum * inv_d - cache.xhat(r, c) * sum_xhat * inv_d);
    }
  }
  return dx;
}

void dropout(Tensor2D& t, float rate, Generator* gen, std::vector<float>& mask) {
  mask.assign(t.size(), 1.0f);
  if (gen == nullptr || rate <= 0.0f) return;
  const float keep = 1.0f - rate;
  auto values = t.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    mask[i] = bernoulli(*gen, keep) ? 1.0f / keep : 0.0f;
    values[i] *= mask[i];
  }
}

void apply_mask(Tensor2D& t, const std::vector<float>& mask) {
  auto values = t.values();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= mask[i];
}

void accumulate(Tensor2D& dst, const Tensor2D& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void accumulate_column_sums(Tensor2D& dst, const Tensor2D& src) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    for (std::size_t c = 0; c < src.cols(); ++c) dst(0, c) += src(r, c);
  }
}

Tensor2D affine(const Tensor2D& x, const Tensor2D& w, const Tensor2D* bias) {
  Tensor2D y = matmul(x, w);
  if (bias) add_row_vector(y, bias->values());
  return y;
}

ForwardCache forward_train(const TransformerClassifier& model, std::span<const TokenId> ids,
                           int label, Generator* dropout_gen) {
  const ModelConfig& config = model.config;
  ForwardCache cache;
  cache.active = detail::active_tokens(config, ids);
  const std::size_t n = cache.active.ids.size();
  cache.pooled = Tensor2D(1, config.embed_dim);

  if (n > 0) {
    Tensor2D x(n, config.embed_dim);
    for (std::size_t i = 0; i < n; ++i) {
      auto tok = model.token_embeddings.row(static_cast<std::size_t>(cache.active.ids[i]));
      auto pos = model.position_embeddings.row(cache.active.positions[i]);
      for (std::size_t c = 0; c < config.embed_dim; ++c) x(i, c) = tok[c] + pos[c];
    }
    cache.layers.resize(config.num_layers);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      const EncoderLayer& w = model.layers[l];
      LayerCache& lc = cache.layers[l];
      lc.x = x;
      lc.q = matmul(x, w.wq);
      lc.k = matmul(x, w.wk);
      lc.v = matmul(x, w.wv);
      lc.context = detail::multi_head_attention(lc.q, lc.k, lc.v, config.num_heads, &lc.attention);
      Tensor2D attended = matmul(lc.context, w.wo);
      dropout(attended, config.dropout, dropout_gen, lc.attn_mask);
      lc.h1 = norm_forward(detail::add(x, attended), w.ln1_gain, w.ln1_bias, lc.ln1);
      lc.pre_gelu = affine(lc.h1, w.w1, &w.b1);
      lc.hidden = gelu(lc.pre_gelu);
      Tensor2D ffn = affine(lc.hidden, w.w2, &w.b2);
      dropout(ffn, config.dropout, dropout_gen, lc.ffn_mask);
      x = norm_forward(detail::add(lc.h1, ffn), w.ln2_gain, w.ln2_bias, lc.ln2);
    }
    cache.pooled = detail::mean_rows(x);
  }

  Tensor2D logits = affine(cache.pooled, model.head, &model.head_bias);
  auto row = logits.row(0);
  const float max = *std::max_element(row.begin(), row.end());
  float sum = 0.0f;
  for (float v : row) sum += std::exp(v - max);
  cache.loss = max + std::log(sum) - row[static_cast<std::size_t>(label)];
  cache.probabilities = softmax(row);
  return cache;
}

void backward(const TransformerClassifier& model, const ForwardCache& cache, int label,
              TransformerClassifier& grad) {
  const ModelConfig& config = model.config;
  Tensor2D dlogits(1, config.num_classes, cache.probabilities);
  dlogits(0, static_cast<std::size_t>(label)) -= 1.0f;

  accumulate(grad.head, matmul_at_b(cache.pooled, dlogits));
  accumulate(grad.head_bias, dlogits);
  const std::size_t n = cache.active.ids.size();
  if (n == 0) return;

  const Tensor2D dpooled = matmul_a_bt(dlogits, model.head);
  Tensor2D dx(n, config.embed_dim);
  const float inv_n = 1.0f / static_cast<float>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < config.embed_dim; ++c) dx(r, c) = dpooled(0, c) * inv_n;
  }

  const std::size_t head_dim = config.head_dim();
  const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
  for (std::size_t li = config.num_layers; li-- > 0;) {
    const EncoderLayer& w = model.layers[li];
    const LayerCache& lc = cache.layers[li];
    EncoderLayer& g = grad.layers[li];

    // x_out = LN2(h1 + dropout(ffn))
    Tensor2D dz2 = norm_backward(dx, w.ln2_gain, lc.ln2, g.ln2_gain, g.ln2_bias);
    Tensor2D dh1 = dz2;
    Tensor2D dffn = dz2;
    apply_mask(dffn, lc.ffn_mask);
    accumulate(g.w2, matmul_at_b(lc.hidden, dffn));
    accumulate_column_sums(g.b2, dffn);
    Tensor2D dpre = matmul_a_bt(dffn, w.w2);
    for (std::size_t i = 0; i < dpre.size(); ++i) {
      dpre.values()[i] *= gelu_grad(lc.pre_gelu.values()[i]);
    }
    accumulate(g.w1, matmul_at_b(lc.h1, dpre));
    accumulate_column_sums(g.b1, dpre);
    accumulate(dh1, matmul_a_bt(dpre, w.w1));

    // h1 = LN1(x + dropout(context * Wo))
    Tensor2D dz1 = norm_backward(dh1, w.ln1_gain, lc.ln1, g.ln1_gain, g.ln1_bias);
    Tensor2D dattended = dz1;
    apply_mask(dattended, lc.attn_mask);
    accumulate(g.wo, matmul_at_b(lc.context, dattended));
    const Tensor2D dcontext = matmul_a_bt(dattended, w.wo);

    Tensor2D dq(n, config.embed_dim), dk(n, config.embed_dim), dv(n, config.embed_dim);
    std::vector<float> dweights(n);
    for (std::size_t h = 0; h < config.num_heads; ++h) {
      const std::size_t off = h * head_dim;
      const Tensor2D& a = lc.attention[h];
      for (std::size_t i = 0; i < n; ++i) {
        float weighted = 0.0f;
        for (std::size_t j = 0; j < n; ++j) {
          float da = 0.0f;
          for (std::size_t c = 0; c < head_dim; ++c) {
            da += dcontext(i, off + c) * lc.v(j, off + c);
            dv(j, off + c) += a(i, j) * dcontext(i, off + c);
          }
          dweights[j] = da;
          weighted += a(i, j) * da;
        }
        for (std::size_t j = 0; j < n; ++j) {
          const float ds = a(i, j) * (dweights[j] - weighted) * scale;
          for (std::size_t c = 0; c < head_dim; ++c) {
            dq(i, off + c) += ds * lc.k(j, off + c);
            dk(j, off + c) += ds * lc.q(i, off + c);
          }
        }
      }
    }
    accumulate(g.wq, matmul_at_b(lc.x, dq));
    accumulate(g.wk, matmul_at_b(lc.x, dk));
    accumulate(g.wv, matmul_at_b(lc.x, dv));
    Tensor2D dx_in = dz1;
    accumulate(dx_in, matmul_a_bt(dq, w.wq));
    accumulate(dx_in, matmul_a_bt(dk, w.wk));
    accumulate(dx_in, matmul_a_bt(dv, w.wv));
    dx = std::move(dx_in);
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto dtok = grad.token_embeddings.row(static_cast<std::size_t>(cache.active.ids[i]));
    auto dpos = grad.position_embeddings.row(cache.active.positions[i]);
    for (std::size_t c = 0; c < config.embed_dim; ++c) {
      dtok[c] += dx(i, c);
      dpos[c] += dx(i, c);
    }
  }
}

TransformerClassifier zero_like(const TransformerClassifier& model) {
  TransformerClassifier z = model;
  z.for_each_tensor([](const std::string&, Tensor2D& t) {
    for (float& v : t.values()) v = 0.0f;
  });
  return z;
}

void check_label(int label, const ModelConfig& config) {
  if (label < 0 || static_cast<std::uint32_t>(label) >= config.num_classes) {
    throw ContractViolation("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(config.num_classes) + ")");
  }
}

}  // namespace

std::vector<EncodedExample> encode_dataset(const Dataset& dataset, const Vocabulary& vocab) {
  std::vector<EncodedExample> out;
  out.reserve(dataset.size());
  for (const auto& ex : dataset.examples) {
    const auto tokens = tokenize(ex.text);
    out.push_back({vocab.encode(tokens), ex.label});
  }
  return out;
}

double accuracy(const TransformerClassifier& model, std::span<const EncodedExample> examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    if (forward(model, ex.ids).predicted_label == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

float cross_entropy(const TransformerClassifier& model, std::span<const TokenId> ids, int label) {
  check_label(label, model.config);
  return forward_train(model, ids, label, nullptr).loss;
}

LossAndGradient loss_and_gradient(const TransformerClassifier& model, std::span<const TokenId> ids,
                                  int label) {
  check_label(label, model.config);
  LossAndGradient out{0.0f, zero_like(model)};
  const ForwardCache cache = forward_train(model, ids, label, nullptr);
  out.loss = cache.loss;
  backward(model, cache, label, out.gradient);
  return out;
}

TransformerClassifier train(const ModelConfig& config, const Dataset& train_set,
                            const Dataset& dev_set, const Vocabulary& vocab,
                            const TrainOptions& options, TrainReport* report) {
  config.validate();
  if (train_set.empty() || dev_set.empty()) throw ContractViolation("train and dev sets must be non-empty");
  if (vocab.size() != config.vocab_size) {
    throw ContractViolation("vocabulary size " + std::to_string(vocab.size()) +
                            " does not match config vocab_size " +
                            std::to_string(config.vocab_size));
  }
  if (options.batch_size == 0) throw ContractViolation("batch_size must be positive");
  const auto train_examples = encode_dataset(train_set, vocab);
  const auto dev_examples = encode_dataset(dev_set, vocab);
  for (const auto& ex : train_examples) check_label(ex.label, config);
  for (const auto& ex : dev_examples) check_label(ex.label, config);

  TransformerClassifier model = TransformerClassifier::initialize(config);
  TransformerClassifier best = model;
  TrainReport local;
  Generator shuffle_gen(derive_seed(config.seed, "shuffle"));
  Generator dropout_gen(derive_seed(config.seed, "dropout"));

  std::vector<std::size_t> order(train_examples.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, shuffle_gen);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      TransformerClassifier grad = zero_like(model);
      for (std::size_t b = begin; b < end; ++b) {
        const auto& ex = train_examples[order[b]];
        const ForwardCache cache = forward_train(model, ex.ids, ex.label, &dropout_gen);
        if (!std::isfinite(cache.loss)) throw TrainingDiverged(step);
        loss_sum += cache.loss;
        backward(model, cache, ex.label, grad);
      }
      const float factor = options.learning_rate / static_cast<float>(end - begin);
      std::vector<std::span<float>> params;
      model.for_each_tensor([&](const std::string&, Tensor2D& t) { params.push_back(t.values()); });
      std::size_t p = 0;
      grad.for_each_tensor([&](const std::string&, Tensor2D& g) {
        auto dst = params[p++];
        auto src = g.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= factor * src[i];
      });
      ++step;
    }
    model.audit_shapes();
    const double dev_acc = accuracy(model, dev_examples);
    local.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
    local.epoch_dev_accuracy.push_back(dev_acc);
    if (local.best_epoch == 0 || dev_acc > local.best_dev_accuracy) {
      local.best_epoch = epoch;
      local.best_dev_accuracy = dev_acc;
      best = model;
    }
  }
  if (report) *report = std::move(local);
  return best;
}

}  // namespace qrobust
