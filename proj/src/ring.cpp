#include "slip/ring.hpp"

#include <cmath>
#include <string>

#include "slip/errors.hpp"

namespace slip {

namespace {

uint64_t pow_mod(uint64_t base, uint64_t exp, uint64_t mod) {
    uint64_t result = 1;
    base %= mod;
    while (exp > 0) {
        if (exp & 1) result = mul_mod(result, base, mod);
        base = mul_mod(base, base, mod);
        exp >>= 1;
    }
    return result;
}

} // namespace

bool is_prime_u64(uint64_t n) {
    if (n < 2) return false;
    for (uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        if (n == p) return true;
        if (n % p == 0) return false;
    }
    // Deterministic Miller-Rabin for all 64-bit integers with this base set.
    uint64_t d = n - 1;
    int s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    for (uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        uint64_t x = pow_mod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int i = 0; i < s - 1; ++i) {
            x = mul_mod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

RingParams::RingParams(uint64_t modulus, uint64_t scale_, uint32_t headroom)
    : modulus_L(modulus), scale(scale_), headroom_bits(headroom) {
    if (modulus_L < 2 || modulus_L > (uint64_t{1} << 63))
        throw DomainError("ring modulus out of supported range");
    if (!is_prime_u64(modulus_L))
        throw DomainError("ring modulus " + std::to_string(modulus_L) + " is not prime");
    if (scale < 1) throw DomainError("ring scale must be >= 1");
}

double RingParams::magnitude_budget() const {
    return static_cast<double>(modulus_L) / std::ldexp(2.0, static_cast<int>(headroom_bits));
}

uint64_t encode_signed(int64_t v, uint64_t L) {
    if (v >= 0) return static_cast<uint64_t>(v) % L;
    uint64_t mag = static_cast<uint64_t>(-(v + 1)) + 1; // |v| without INT64_MIN UB
    return L - 1 - (mag - 1) % L;
}

int64_t centered_lift(uint64_t v, uint64_t L) {
    if (v <= (L - 1) / 2) return static_cast<int64_t>(v);
    return static_cast<int64_t>(v) - static_cast<int64_t>(L);
}

FixedVec quantize(const std::vector<double>& x, const RingParams& params) {
    const uint64_t L = params.modulus_L;
    const double half = static_cast<double>(L) / 2.0;
    FixedVec out;
    out.logical_scale = 1;
    out.values.reserve(x.size());
    for (double xi : x) {
        double scaled = xi * static_cast<double>(params.scale);
        if (!std::isfinite(scaled) || std::fabs(scaled) >= 9.2e18)
            throw OverflowError("quantize: value not representable");
        // round half away from zero
        double r = scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
        if (std::fabs(r) >= half) throw OverflowError("quantize: |round(x*scale)| >= L/2");
        out.values.push_back(encode_signed(static_cast<int64_t>(r), L));
    }
    return out;
}

std::vector<double> dequantize(const FixedVec& v, const RingParams& params) {
    if (v.logical_scale != 1 && v.logical_scale != 2)
        throw DomainError("dequantize: logical_scale must be 1 or 2");
    double denom = static_cast<double>(params.scale);
    if (v.logical_scale == 2) denom *= static_cast<double>(params.scale);
    std::vector<double> out;
    out.reserve(v.values.size());
    for (uint64_t raw : v.values)
        out.push_back(static_cast<double>(centered_lift(raw, params.modulus_L)) / denom);
    return out;
}

RingMatrix quantize_matrix(const std::vector<double>& entries, size_t rows, size_t cols,
                           const RingParams& params) {
    if (entries.size() != rows * cols) throw DimensionMismatch("quantize_matrix: size mismatch");
    FixedVec flat = quantize(entries, params);
    RingMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.values = std::move(flat.values);
    return m;
}

MaskVec sample_mask(size_t dim, const RingParams& params, ChaChaStream& stream) {
    MaskVec r;
    r.seed_id = SeedId{stream.stream_id(), stream.position()};
    r.values.reserve(dim);
    for (size_t i = 0; i < dim; ++i) r.values.push_back(stream.next_below(params.modulus_L));
    return r;
}

FixedVec mask(const FixedVec& a, const MaskVec& r, const RingParams& params) {
    if (a.values.size() != r.values.size()) throw DimensionMismatch("mask: dims differ");
    FixedVec out;
    out.logical_scale = a.logical_scale;
    out.values.reserve(a.values.size());
    for (size_t i = 0; i < a.values.size(); ++i)
        out.values.push_back(add_mod(a.values[i], r.values[i], params.modulus_L));
    return out;
}

FixedVec unmask(const FixedVec& a_tilde_d, const CancellationMask& c, const RingParams& params) {
    if (a_tilde_d.values.size() != c.values.size()) throw DimensionMismatch("unmask: dims differ");
    FixedVec out;
    out.logical_scale = a_tilde_d.logical_scale;
    out.values.reserve(a_tilde_d.values.size());
    for (size_t i = 0; i < a_tilde_d.values.size(); ++i)
        out.values.push_back(sub_mod(a_tilde_d.values[i], c.values[i], params.modulus_L));
    return out;
}

std::vector<uint64_t> modmatvec_raw(const RingMatrix& w, const std::vector<uint64_t>& x,
                                    const RingParams& params) {
    if (w.cols != x.size()) throw DimensionMismatch("modmatvec: cols != dim(x)");
    const uint64_t L = params.modulus_L;
    std::vector<uint64_t> out(w.rows);
    for (size_t j = 0; j < w.rows; ++j) {
        const uint64_t* row = w.values.data() + j * w.cols;
        // Each reduced product is < L < 2^63, so a u128 accumulator holds
        // 2^65 of them before wrapping; reduce once at the end.
        __uint128_t acc = 0;
        for (size_t k = 0; k < w.cols; ++k) acc += mul_mod(row[k], x[k], L);
        out[j] = static_cast<uint64_t>(acc % L);
    }
    return out;
}

FixedVec modmatvec(const RingMatrix& w, const FixedVec& x, const RingParams& params) {
    FixedVec out;
    out.logical_scale = x.logical_scale + 1;
    out.values = modmatvec_raw(w, x.values, params);
    return out;
}

} // namespace slip
