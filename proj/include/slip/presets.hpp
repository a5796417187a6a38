#pragma once

#include <cstdint>

#include "slip/csprng.hpp"
#include "slip/models.hpp"

namespace slip {

/// Uniform [-amp, amp] matrix drawn from the stream.
Mat random_matrix(ChaChaStream& rng, size_t rows, size_t cols, double amp);

/// Relu MLP with `n_layers` square layers of width `dim` plus a softmax
/// output layer; one block per layer, type mlp_fc.
ModelParams make_toy_mlp(uint64_t seed, size_t n_layers = 3, size_t dim = 8,
                         size_t n_classes = 0, double amp = 0.4);

/// Single attention head, weights in [-amp, amp].
ModelParams make_toy_attention(uint64_t seed, size_t embed_dim = 8, size_t head_dim = 8,
                               double amp = 0.4);

/// Feed-forward stack shaped like a small transformer backbone: `blocks`
/// blocks of (mlp_fc, mlp_proj) layers of width `dim`, relu between, identity
/// at the end. The default plan splits the first and last blocks.
ModelParams make_toy_transformer_stack(uint64_t seed, size_t blocks = 6, size_t dim = 64,
                                       double amp = 0.15);

} // namespace slip
