#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "slip/counters.hpp"
#include "slip/decompose.hpp"
#include "slip/matrix.hpp"
#include "slip/ring.hpp"

namespace slip {

enum class Activation : uint8_t { relu = 0, softmax = 1, identity = 2 };

const char* to_string(Activation a);

enum class ModelKind : uint8_t { mlp = 0, attention_head = 1, conv = 2 };

struct Layer {
    Mat weight;
    std::optional<std::vector<double>> bias;
    Activation act = Activation::identity;
    LayerId id;
};

/// Ordered layers. An attention head carries exactly W_q, W_k, W_v (d_h x d)
/// and W_o (d x d_h) in that order; MLP layers must compose dimensionally.
struct ModelParams {
    ModelKind kind = ModelKind::mlp;
    std::vector<Layer> layers;

    void validate() const;
    size_t input_dim() const;
    size_t output_dim() const;
    // attention only
    size_t embed_dim() const;
    size_t head_dim() const;
    std::optional<size_t> layer_index(const LayerId& id) const;
};

struct ConvSpec {
    size_t in_h = 1, in_w = 1, channels = 1;
    size_t k_h = 1, k_w = 1, filters = 1; // stride 1, no padding

    size_t out_h() const { return in_h - k_h + 1; }
    size_t out_w() const { return in_w - k_w + 1; }
    void validate() const;
};

/// Kernel entry (u, v, c, n) of a (kH, kW, C, N) tensor, flattened as
/// ((u*kW + v)*C + c)*N + n.
size_t kernel_index(const ConvSpec& spec, size_t u, size_t v, size_t c, size_t n);

/// Input entry (i, j, c): vec(X) is row-major over (row, col, channel).
size_t input_index(const ConvSpec& spec, size_t i, size_t j, size_t c);

/// Fully connected form of the convolution: W of shape
/// (out_h*out_w*N, in_h*in_w*C) with W * vec(X) = flattened conv output.
LayerMatrix conv_to_fc(const ConvSpec& spec, const std::vector<double>& kernel);

/// Monolithic float64 forward pass. MLP input is a column vector (d x 1);
/// an attention head takes X as d x T (one column per token).
Mat forward_reference(const ModelParams& model, const Mat& x);
std::vector<double> forward_reference(const ModelParams& model, const std::vector<double>& x);

Mat softmax_rows(const Mat& s);

// ---------------------------------------------------------------------------
// Quantized pipeline.
//
// The hybrid protocol and the local reference below share these kernels, so
// the single-machine pass is the bit-exactness target for the two-party run:
// integer parts agree through exact mask cancellation, float parts are the
// same operations in the same order.
// ---------------------------------------------------------------------------

/// Charlie's factored product U_k (Sigma_k (V_k^T a)) on grid reals.
std::vector<double> factored_matvec(const Decomposition& d, const std::vector<double>& a,
                                    OpCounters* counters = nullptr);

/// Column-wise factored product for a d x T token matrix.
Mat factored_matmat(const Decomposition& d, const Mat& x, OpCounters* counters = nullptr);

/// modmatvec applied independently to each length-`cols_in` column of a
/// flattened (cols_in x tokens) payload.
FixedVec modmat_cols(const RingMatrix& w, const FixedVec& x_flat, size_t tokens,
                     const RingParams& ring, OpCounters* counters = nullptr);
std::vector<uint64_t> modmat_cols_raw(const RingMatrix& w, const std::vector<uint64_t>& x_flat,
                                      size_t tokens, const RingParams& ring,
                                      OpCounters* counters = nullptr);

/// dequantize with a headroom check on every lifted magnitude; a value past
/// the budget means the ring accumulation wrapped.
std::vector<double> lift_checked(const FixedVec& z, const RingParams& ring);

/// dequantize(z)/scale^2 (+ factored contribution) (+ bias), activation,
/// re-quantize to scale^1. Raises OverflowError when a lifted magnitude
/// breaches the ring's headroom budget.
FixedVec combine_activate_requantize(const FixedVec& z_int, const std::vector<double>* contrib,
                                     const std::optional<std::vector<double>>& bias, Activation act,
                                     const RingParams& ring, OpCounters* counters = nullptr);

/// Flatten column-by-column (token-major) / rebuild.
std::vector<double> flatten_cols(const Mat& m);
Mat unflatten_cols(const std::vector<double>& v, size_t rows, size_t tokens);

/// Projection in reals: lifted integer accumulation plus the factored part
/// when one exists (null or empty skips it).
Mat projection_real(const FixedVec& z_int, size_t rows, size_t tokens, const Decomposition* d,
                    const Mat& grid_in, const RingParams& ring, OpCounters* counters = nullptr);

/// scores = Q^T K / sqrt(head_dim), row softmax, then X A^T.
Mat attention_weighted_input(const Mat& q_real, const Mat& k_real, const Mat& x_grid,
                             size_t head_dim, OpCounters* counters = nullptr);

/// combine_activate_requantize applied per token column of a flattened
/// (rows x tokens) accumulation.
FixedVec combine_tokens(const FixedVec& z_flat, const std::vector<double>* contrib_flat,
                        const std::optional<std::vector<double>>& bias, Activation act,
                        size_t rows, size_t tokens, const RingParams& ring,
                        OpCounters* counters = nullptr);

/// Dense layer on the quantized path: modmatvec then combine, no factored part.
FixedVec dense_quantized_layer(const RingMatrix& w_int, const FixedVec& a,
                               const std::optional<std::vector<double>>& bias, Activation act,
                               const RingParams& ring, OpCounters* counters = nullptr);

/// Same computation path as the hybrid protocol, executed locally with no
/// masking. `decomp` marks which layers carry a factored Charlie part; null
/// means every layer runs dense. Output is the quantized model output
/// (flattened d x T for attention).
FixedVec forward_reference_quantized(const ModelParams& model, const Mat& x,
                                     const RingParams& ring,
                                     const ModelDecomposition* decomp = nullptr,
                                     OpCounters* counters = nullptr);

/// Propagate activation magnitude bounds through the model and verify the
/// ring headroom for every layer. Returns the final output bound; throws
/// OverflowError naming the first violating layer.
double validate_headroom(const ModelParams& model, const RingParams& ring, double max_abs_input);

} // namespace slip
