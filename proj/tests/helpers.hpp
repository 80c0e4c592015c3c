#pragma once

#include <cmath>
#include <cstddef>

#include "coreguard/transformer.hpp"

namespace coreguard::testing {

inline ModelConfig tiny_config(std::size_t layers = 4, std::size_t d = 16, std::size_t heads = 2,
                               std::size_t ffn = 16, std::size_t seq = 8,
                               std::size_t vocab = 32) {
  ModelConfig c;
  c.num_layers = layers;
  c.d_model = d;
  c.num_heads = heads;
  c.d_ffn = ffn;
  c.seq_len = seq;
  c.vocab_size = vocab;
  return c;
}

inline double log2_factorial(std::size_t n) {
  return std::lgamma(static_cast<double>(n) + 1.0) / std::log(2.0);
}

}  // namespace coreguard::testing
