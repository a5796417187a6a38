#pragma once

#include <cstdint>
#include <vector>

#include "slip/csprng.hpp"

namespace slip {

/// Default modulus: the Mersenne prime 2^61 - 1. Fits a u64 residue with room
/// for a carry bit; products reduce with one u128 multiply.
inline constexpr uint64_t kDefaultModulus = (uint64_t{1} << 61) - 1;

bool is_prime_u64(uint64_t n);

/// Parameters of the fixed-point ring all masked arithmetic runs in.
///
/// Residues live in [0, L); signed values use the centered lift [-L/2, L/2).
/// `scale` maps reals to the grid (value = round(x * scale)); `headroom_bits`
/// is the extra log2 margin required between any true accumulation and L/2,
/// so wrap-around is detectable as a gross out-of-budget magnitude.
struct RingParams {
    uint64_t modulus_L = kDefaultModulus;
    uint64_t scale = 1u << 16;
    uint32_t headroom_bits = 2;

    RingParams() = default;
    RingParams(uint64_t modulus, uint64_t scale_, uint32_t headroom = 2);

    /// Largest |signed value| the ring may hold after the headroom margin.
    double magnitude_budget() const;

    bool operator==(const RingParams&) const = default;
};

/// Vector of ring residues carrying a real value on the fixed-point grid.
/// logical_scale is 1 for activations and 2 for post-matvec accumulations
/// (entries are value * scale^logical_scale).
struct FixedVec {
    std::vector<uint64_t> values;
    uint32_t logical_scale = 1;
};

/// Identifies the CSPRNG stream and position a mask was drawn from.
struct SeedId {
    uint64_t stream_id = 0;
    uint64_t position = 0;

    bool operator==(const SeedId&) const = default;
};

/// One-time pad: uniform residues, never reused across inferences or layers.
struct MaskVec {
    std::vector<uint64_t> values;
    SeedId seed_id;
};

/// Precomputed mod(W_int * r, L) for the mask r it was derived from.
struct CancellationMask {
    std::vector<uint64_t> values;
    uint32_t layer_index = 0;
};

/// Integer matrix with entries already reduced into [0, L), row-major.
struct RingMatrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<uint64_t> values;

    uint64_t at(size_t r, size_t c) const { return values[r * cols + c]; }
    uint64_t& at(size_t r, size_t c) { return values[r * cols + c]; }
};

inline uint64_t add_mod(uint64_t a, uint64_t b, uint64_t L) {
    uint64_t s = a + b; // a,b < L <= 2^63, no u64 overflow
    return s >= L ? s - L : s;
}

inline uint64_t sub_mod(uint64_t a, uint64_t b, uint64_t L) {
    return a >= b ? a - b : a + L - b;
}

inline uint64_t mul_mod(uint64_t a, uint64_t b, uint64_t L) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(a) * b) % L);
}

/// Residue for a signed integer (centered lift encode).
uint64_t encode_signed(int64_t v, uint64_t L);

/// Signed integer in [-L/2, L/2) for a residue (centered lift decode).
int64_t centered_lift(uint64_t v, uint64_t L);

/// Fixed-point encode: values[i] = mod(round(x[i] * scale), L), round half
/// away from zero. Throws OverflowError if |round(x*scale)| >= L/2.
FixedVec quantize(const std::vector<double>& x, const RingParams& params);

/// Inverse of quantize on the grid: centered_lift / scale^logical_scale.
std::vector<double> dequantize(const FixedVec& v, const RingParams& params);

/// Quantize a row-major real matrix entrywise at scale^1.
RingMatrix quantize_matrix(const std::vector<double>& entries, size_t rows, size_t cols,
                           const RingParams& params);

/// Fresh one-time pad: dim residues uniform over [0, L).
MaskVec sample_mask(size_t dim, const RingParams& params, ChaChaStream& stream);

/// output[j] = mod(a[j] + r[j], L).
FixedVec mask(const FixedVec& a, const MaskVec& r, const RingParams& params);

/// output[j] = mod(a_tilde_d[j] - c[j], L): exact W_int * a_int when the
/// true product magnitude stays below L/2.
FixedVec unmask(const FixedVec& a_tilde_d, const CancellationMask& c, const RingParams& params);

/// output[j] = mod(sum_k W[j,k] * x[k], L) in wide integers; the result is a
/// fully reduced residue, so it does not depend on summation order.
FixedVec modmatvec(const RingMatrix& w, const FixedVec& x, const RingParams& params);

/// modmatvec applied to a raw residue vector (masks, concatenated columns).
std::vector<uint64_t> modmatvec_raw(const RingMatrix& w, const std::vector<uint64_t>& x,
                                    const RingParams& params);

} // namespace slip
