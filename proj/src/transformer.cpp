#include "coreguard/transformer.hpp"

#include <cmath>
#include <string>

#include "coreguard/error.hpp"
#include "coreguard/kernels.hpp"
#include "coreguard/linalg.hpp"
#include "coreguard/random.hpp"

namespace coreguard {

void ModelConfig::validate() const {
  if (num_layers == 0 || d_model == 0 || num_heads == 0 || d_ffn == 0 ||
      seq_len == 0 || vocab_size == 0) {
    throw InputError("model config: all counts must be >= 1");
  }
  if (d_model % num_heads != 0) {
    throw InputError("model config: d_model " + std::to_string(d_model) +
                     " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (auth_position != 0 && auth_position >= num_layers) {
    throw InputError("model config: auth_position " + std::to_string(auth_position) +
                     " outside [1, " + std::to_string(num_layers - 1) + "]");
  }
}

void ModelConfig::validate_lockable() const {
  validate();
  const std::size_t l0 = effective_auth_position();
  if (num_layers < 2 || l0 < 1 || l0 >= num_layers) {
    throw InputError("model config: authorization position " + std::to_string(l0) +
                     " outside [1, num_layers - 1] for num_layers = " +
                     std::to_string(num_layers));
  }
}

namespace {

void expect_shape(const Matrix& m, std::size_t r, std::size_t c, const char* name) {
  if (m.rows() != r || m.cols() != c) {
    throw SizeError(std::string(name) + " is " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + ", expected " + std::to_string(r) +
                    "x" + std::to_string(c));
  }
}

void expect_len(const Vector& v, std::size_t n, const char* name) {
  if (v.size() != n) {
    throw SizeError(std::string(name) + " has length " + std::to_string(v.size()) +
                    ", expected " + std::to_string(n));
  }
}

bool finite(const Vector& v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void LayerWeights::check_shapes(const ModelConfig& cfg) const {
  const std::size_t d = cfg.d_model;
  const std::size_t f = cfg.d_ffn;
  expect_shape(wq, d, d, "W_q");
  expect_shape(wk, d, d, "W_k");
  expect_shape(wv, d, d, "W_v");
  expect_shape(wo, d, d, "W_o");
  expect_len(gamma1, d, "gamma1");
  expect_len(beta1, d, "beta1");
  expect_shape(wm, d, f, "W_m");
  expect_len(bm, f, "b_m");
  expect_shape(wn, f, d, "W_n");
  expect_len(bn, d, "b_n");
  expect_len(gamma2, d, "gamma2");
  expect_len(beta2, d, "beta2");
}

std::size_t LayerWeights::parameter_count() const {
  return wq.size() + wk.size() + wv.size() + wo.size() + gamma1.size() +
         beta1.size() + wm.size() + bm.size() + wn.size() + bn.size() +
         gamma2.size() + beta2.size();
}

bool LayerWeights::all_finite() const {
  return wq.all_finite() && wk.all_finite() && wv.all_finite() && wo.all_finite() &&
         finite(gamma1) && finite(beta1) && wm.all_finite() && finite(bm) &&
         wn.all_finite() && finite(bn) && finite(gamma2) && finite(beta2);
}

bool bitwise_equal(const LayerWeights& a, const LayerWeights& b) noexcept {
  return bitwise_equal(a.wq, b.wq) && bitwise_equal(a.wk, b.wk) &&
         bitwise_equal(a.wv, b.wv) && bitwise_equal(a.wo, b.wo) &&
         bitwise_equal(a.gamma1, b.gamma1) && bitwise_equal(a.beta1, b.beta1) &&
         bitwise_equal(a.wm, b.wm) && bitwise_equal(a.bm, b.bm) &&
         bitwise_equal(a.wn, b.wn) && bitwise_equal(a.bn, b.bn) &&
         bitwise_equal(a.gamma2, b.gamma2) && bitwise_equal(a.beta2, b.beta2);
}

std::size_t layer_parameter_count(const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model;
  const std::size_t f = cfg.d_ffn;
  return 4 * d * d + 2 * d * f + f + 5 * d;
}

Matrix attention_output(const LayerWeights& w, const Matrix& x, const ModelConfig& cfg) {
  const Matrix q = matmul(x, w.wq);
  const Matrix k = matmul(x, w.wk);
  const Matrix v = matmul(x, w.wv);
  return matmul(kernels::parallel::attention(q, k, v, cfg.num_heads, cfg.causal), w.wo);
}

Matrix add_norm(const Matrix& a, const Matrix& b, std::span<const float> gamma,
                std::span<const float> beta) {
  return layer_norm(add(a, b), gamma, beta);
}

Matrix ffn_hidden(const LayerWeights& w, const Matrix& y) {
  return relu(affine(y, w.wm, w.bm));
}

LayerTrace layer_forward_traced(const LayerWeights& w, const Matrix& x,
                                const ModelConfig& cfg, std::size_t layer_index) {
  if (x.cols() != cfg.d_model) {
    throw SizeError("layer " + std::to_string(layer_index) + ": input width " +
                    std::to_string(x.cols()) + " != d_model " +
                    std::to_string(cfg.d_model));
  }
  LayerTrace t;
  t.q = matmul(x, w.wq);
  t.k = matmul(x, w.wk);
  t.v = matmul(x, w.wv);
  t.o = matmul(kernels::parallel::attention(t.q, t.k, t.v, cfg.num_heads, cfg.causal),
               w.wo);
  t.y = add_norm(t.o, x, w.gamma1, w.beta1);
  t.m = ffn_hidden(w, t.y);
  t.n = affine(t.m, w.wn, w.bn);
  t.z = add_norm(t.y, t.n, w.gamma2, w.beta2);
  if (!t.z.all_finite()) {
    throw NumericError("layer " + std::to_string(layer_index) +
                           " produced non-finite values",
                       layer_index);
  }
  return t;
}

Matrix layer_forward(const LayerWeights& w, const Matrix& x, const ModelConfig& cfg,
                     std::size_t layer_index) {
  if (x.cols() != cfg.d_model) {
    throw SizeError("layer " + std::to_string(layer_index) + ": input width " +
                    std::to_string(x.cols()) + " != d_model " +
                    std::to_string(cfg.d_model));
  }
  const Matrix y = add_norm(attention_output(w, x, cfg), x, w.gamma1, w.beta1);
  const Matrix n = affine(ffn_hidden(w, y), w.wn, w.bn);
  Matrix z = add_norm(y, n, w.gamma2, w.beta2);
  if (!z.all_finite()) {
    throw NumericError("layer " + std::to_string(layer_index) +
                           " produced non-finite values",
                       layer_index);
  }
  return z;
}

Model::Model(ModelConfig config, Matrix embedding, std::vector<LayerWeights> layers,
             Matrix output_head)
    : config_(config),
      embedding_(std::move(embedding)),
      layers_(std::move(layers)),
      output_head_(std::move(output_head)) {
  config_.validate();
  if (!config_.plain_architecture()) {
    throw InputError("model: gated_ffn / kv_dim are accounting-only fields");
  }
  if (layers_.size() != config_.num_layers) {
    throw SizeError("model: " + std::to_string(layers_.size()) + " layers, config says " +
                    std::to_string(config_.num_layers));
  }
  expect_shape(embedding_, config_.vocab_size, config_.d_model, "embedding");
  expect_shape(output_head_, config_.d_model, config_.vocab_size, "output head");
  for (const auto& l : layers_) l.check_shapes(config_);
}

std::size_t Model::parameter_count() const {
  return embedding_.size() + output_head_.size() +
         config_.num_layers * layer_parameter_count(config_);
}

bool bitwise_equal(const Model& a, const Model& b) noexcept {
  if (!(a.config() == b.config()) || a.layers().size() != b.layers().size()) return false;
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    if (!bitwise_equal(a.layers()[i], b.layers()[i])) return false;
  }
  return bitwise_equal(a.embedding(), b.embedding()) &&
         bitwise_equal(a.output_head(), b.output_head());
}

void check_tokens(const ModelConfig& cfg, std::span<const Token> tokens) {
  if (tokens.size() != cfg.seq_len) {
    throw InputError("expected " + std::to_string(cfg.seq_len) + " tokens, got " +
                     std::to_string(tokens.size()));
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= cfg.vocab_size) {
      throw InputError("token " + std::to_string(tokens[i]) + " at position " +
                       std::to_string(i) + " is outside vocab of " +
                       std::to_string(cfg.vocab_size));
    }
  }
}

Matrix embed(const Matrix& embedding, const ModelConfig& cfg,
             std::span<const Token> tokens) {
  check_tokens(cfg, tokens);
  Matrix x(tokens.size(), cfg.d_model);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto src = embedding.row(tokens[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  return x;
}

Matrix forward_prefix(const Model& m, std::span<const Token> tokens, std::size_t count) {
  if (count > m.layers().size()) throw SizeError("forward_prefix: too many layers");
  Matrix x = embed(m.embedding(), m.config(), tokens);
  for (std::size_t i = 0; i < count; ++i) x = layer_forward(m.layers()[i], x, m.config(), i);
  return x;
}

Matrix model_forward(const Model& m, std::span<const Token> tokens) {
  return matmul(forward_prefix(m, tokens, m.layers().size()), m.output_head());
}

Model random_model(const ModelConfig& cfg, std::uint64_t seed, const InitOptions& opts) {
  cfg.validate();
  Rng rng(seed);
  const std::size_t d = cfg.d_model;
  const std::size_t f = cfg.d_ffn;
  const float wd = opts.weight_gain / std::sqrt(static_cast<float>(d));
  const float wf = opts.weight_gain / std::sqrt(static_cast<float>(f));
  const float branch =
      opts.scale_residual_branches
          ? 1.0f / std::sqrt(2.0f * static_cast<float>(cfg.num_layers))
          : 1.0f;
  auto vec = [&](std::size_t n, float mean, float sd) {
    Vector v(n);
    for (float& x : v) x = rng.normal(mean, sd);
    return v;
  };

  Matrix embedding = random_matrix(rng, cfg.vocab_size, d, opts.embedding_stddev);
  std::vector<LayerWeights> layers(cfg.num_layers);
  for (auto& w : layers) {
    w.wq = random_matrix(rng, d, d, wd);
    w.wk = random_matrix(rng, d, d, wd);
    w.wv = random_matrix(rng, d, d, wd);
    w.wo = random_matrix(rng, d, d, wd * branch);
    w.gamma1 = vec(d, 1.0f, opts.gamma_stddev);
    w.beta1 = vec(d, 0.0f, opts.beta_stddev);
    w.wm = random_matrix(rng, d, f, wd);
    w.bm = vec(f, 0.0f, opts.bias_stddev);
    w.wn = random_matrix(rng, f, d, wf * branch);
    w.bn = vec(d, 0.0f, opts.bias_stddev);
    w.gamma2 = vec(d, 1.0f, opts.gamma_stddev);
    w.beta2 = vec(d, 0.0f, opts.beta_stddev);
  }
  Matrix head;
  if (opts.tie_head) {
    head = transpose(embedding);
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    for (float& v : head.data()) v *= scale;
  } else {
    head = random_matrix(rng, d, cfg.vocab_size, 1.0f / std::sqrt(static_cast<float>(d)));
  }
  return Model(cfg, std::move(embedding), std::move(layers), std::move(head));
}

std::vector<std::vector<Token>> random_sequences(std::uint64_t seed, std::size_t count,
                                                 const ModelConfig& cfg) {
  Rng rng(seed);
  std::vector<std::vector<Token>> out(count, std::vector<Token>(cfg.seq_len));
  for (auto& s : out) {
    for (auto& t : s) t = static_cast<Token>(rng.below(cfg.vocab_size));
  }
  return out;
}

FlopCount count_flops(const ModelConfig& cfg) {
  cfg.validate();
  using u64 = std::uint64_t;
  const u64 l = cfg.seq_len;
  const u64 d = cfg.d_model;
  const u64 h = cfg.num_heads;
  const u64 f = cfg.d_ffn;
  const u64 kv = cfg.effective_kv_dim();
  FlopCount c;
  c.projections = 2 * l * (2 * d * d + 2 * d * kv);
  c.ffn = 2 * l * d * f * (cfg.gated_ffn ? 3 : 2);
  c.attention = 4 * l * l * d + 7 * l * l * h;
  c.elementwise = 3 * l * d + 2 * l * (8 * d + 4) + 2 * l * f + (cfg.gated_ffn ? l * f : 0);
  c.per_layer = c.projections + c.ffn + c.attention + c.elementwise;
  c.head = 2 * l * d * cfg.vocab_size;
  c.total = c.per_layer * cfg.num_layers + c.head;
  return c;
}

}  // namespace coreguard
