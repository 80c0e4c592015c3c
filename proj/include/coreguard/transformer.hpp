#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "coreguard/matrix.hpp"

namespace coreguard {

using Token = std::uint32_t;

struct ModelConfig {
  std::size_t num_layers = 2;
  std::size_t d_model = 16;
  std::size_t num_heads = 2;
  std::size_t d_ffn = 16;
  std::size_t seq_len = 8;
  std::size_t vocab_size = 64;
  bool causal = true;
  // Layers >= auth_position are permuted when locked. 0 means "middle of the
  // network" (num_layers / 2); see effective_auth_position().
  std::size_t auth_position = 0;

  // Accounting-only architecture fields. They only affect count_flops() and
  // the overhead models; the forward pass implements the plain architecture
  // and Model rejects configs that set them.
  bool gated_ffn = false;    // three d x d_ffn projections instead of two
  std::size_t kv_dim = 0;    // width of the K and V projections; 0 means d_model

  std::size_t head_dim() const { return d_model / num_heads; }
  std::size_t effective_kv_dim() const { return kv_dim == 0 ? d_model : kv_dim; }
  std::size_t effective_auth_position() const {
    return auth_position == 0 ? num_layers / 2 : auth_position;
  }
  bool plain_architecture() const {
    return !gated_ffn && effective_kv_dim() == d_model;
  }

  // Throws InputError on zero counts, d_model % num_heads != 0, or an
  // auth_position outside [1, num_layers - 1].
  void validate() const;
  // validate() plus a usable authorization position (requires num_layers >= 2).
  void validate_lockable() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerWeights {
  Matrix wq, wk, wv, wo;        // d x d
  Vector gamma1, beta1;         // d
  Matrix wm;                    // d x d_ffn
  Vector bm;                    // d_ffn
  Matrix wn;                    // d_ffn x d
  Vector bn;                    // d
  Vector gamma2, beta2;         // d

  void check_shapes(const ModelConfig& cfg) const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

bool bitwise_equal(const LayerWeights& a, const LayerWeights& b) noexcept;
std::size_t layer_parameter_count(const ModelConfig& cfg);

// Every intermediate of one layer, named after the quantities it holds.
struct LayerTrace {
  Matrix q, k, v;  // projections
  Matrix o;        // attention output after W_o
  Matrix y;        // first add & norm
  Matrix m;        // ReLU(y W_m + b_m)
  Matrix n;        // m W_n + b_n
  Matrix z;        // second add & norm
};

// Stages of one post-norm layer; layer_forward() chains them.
Matrix attention_output(const LayerWeights& w, const Matrix& x, const ModelConfig& cfg);
Matrix add_norm(const Matrix& a, const Matrix& b, std::span<const float> gamma,
                std::span<const float> beta);
Matrix ffn_hidden(const LayerWeights& w, const Matrix& y);

LayerTrace layer_forward_traced(const LayerWeights& w, const Matrix& x,
                                const ModelConfig& cfg, std::size_t layer_index = 0);
// Throws NumericError naming `layer_index` if the output is not finite.
Matrix layer_forward(const LayerWeights& w, const Matrix& x, const ModelConfig& cfg,
                     std::size_t layer_index = 0);

// An immutable transformer: embedding -> layers -> output head.
class Model {
 public:
  Model(ModelConfig config, Matrix embedding, std::vector<LayerWeights> layers,
        Matrix output_head);

  const ModelConfig& config() const noexcept { return config_; }
  const Matrix& embedding() const noexcept { return embedding_; }
  const std::vector<LayerWeights>& layers() const noexcept { return layers_; }
  const Matrix& output_head() const noexcept { return output_head_; }
  std::size_t parameter_count() const;

 private:
  ModelConfig config_;
  Matrix embedding_;
  std::vector<LayerWeights> layers_;
  Matrix output_head_;
};

bool bitwise_equal(const Model& a, const Model& b) noexcept;

// Throws InputError unless tokens.size() == seq_len and every id < vocab_size.
void check_tokens(const ModelConfig& cfg, std::span<const Token> tokens);
Matrix embed(const Matrix& embedding, const ModelConfig& cfg, std::span<const Token> tokens);
// Hidden state after the first `count` layers.
Matrix forward_prefix(const Model& m, std::span<const Token> tokens, std::size_t count);
Matrix model_forward(const Model& m, std::span<const Token> tokens);

struct InitOptions {
  float embedding_stddev = 1.0f;
  // Linear weights are N(0, (gain / sqrt(fan_in))^2).
  float weight_gain = 1.0f;
  float bias_stddev = 0.1f;
  float gamma_stddev = 0.1f;  // gamma = 1 + N(0, gamma_stddev^2)
  float beta_stddev = 0.05f;
  // Output head = embedding^T / sqrt(d) (weight tying) instead of an
  // independent N(0, 1/d) draw.
  bool tie_head = true;
  // W_o and W_n are further scaled by 1/sqrt(2L) (GPT-2 style) so the
  // residual stream keeps token identity through deep stacks.
  bool scale_residual_branches = true;
};

Model random_model(const ModelConfig& cfg, std::uint64_t seed,
                   const InitOptions& opts = {});
std::vector<std::vector<Token>> random_sequences(std::uint64_t seed, std::size_t count,
                                                 const ModelConfig& cfg);

// FLOP model: every add, subtract, multiply, divide, compare, exp and sqrt
// counts as one operation; a length-k dot product costs 2k.
//   projections  2l(2d^2 + 2d*kv)
//   ffn          2l*d*f*(gated ? 3 : 2)
//   attention    4l^2*d + 7l^2*h        (scores, scale, mask, softmax, AV)
//   elementwise  3ld + 2l(8d + 4) + 2lf (+ lf gated)
//   head         2l*d*vocab
struct FlopCount {
  std::uint64_t projections = 0;
  std::uint64_t ffn = 0;
  std::uint64_t attention = 0;
  std::uint64_t elementwise = 0;
  std::uint64_t per_layer = 0;
  std::uint64_t head = 0;
  std::uint64_t total = 0;

  std::uint64_t matmul() const { return projections + ffn; }
  // FLOPs of a contiguous run of `count` layers.
  std::uint64_t layers(std::size_t count) const { return per_layer * count; }
};

FlopCount count_flops(const ModelConfig& cfg);

}  // namespace coreguard
