#include "slip/csprng.hpp"

#include <cstring>

namespace slip {

namespace {

inline uint32_t rotl32(uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }

inline void quarter_round(uint32_t& a, uint32_t& b, uint32_t& c, uint32_t& d) {
    a += b; d ^= a; d = rotl32(d, 16);
    c += d; b ^= c; b = rotl32(b, 12);
    a += b; d ^= a; d = rotl32(d, 8);
    c += d; b ^= c; b = rotl32(b, 7);
}

void chacha20_block(const std::array<uint32_t, 16>& in, std::array<uint32_t, 16>& out) {
    out = in;
    for (int round = 0; round < 10; ++round) {
        quarter_round(out[0], out[4], out[8], out[12]);
        quarter_round(out[1], out[5], out[9], out[13]);
        quarter_round(out[2], out[6], out[10], out[14]);
        quarter_round(out[3], out[7], out[11], out[15]);
        quarter_round(out[0], out[5], out[10], out[15]);
        quarter_round(out[1], out[6], out[11], out[12]);
        quarter_round(out[2], out[7], out[8], out[13]);
        quarter_round(out[3], out[4], out[9], out[14]);
    }
    for (int i = 0; i < 16; ++i) out[i] += in[i];
}

} // namespace

ChaChaStream::ChaChaStream(uint64_t seed, uint64_t stream_id) : stream_id_(stream_id) {
    // "expand 32-byte k"
    state_[0] = 0x61707865u;
    state_[1] = 0x3320646eu;
    state_[2] = 0x79622d32u;
    state_[3] = 0x6b206574u;
    // 256-bit key from the 64-bit seed, mixed with fixed offsets so distinct
    // seeds give unrelated keys.
    for (int i = 0; i < 4; ++i) {
        uint64_t k = seed ^ (0x9e3779b97f4a7c15ull * static_cast<uint64_t>(i + 1));
        k ^= k >> 31;
        k *= 0xbf58476d1ce4e5b9ull;
        k ^= k >> 27;
        state_[4 + 2 * i] = static_cast<uint32_t>(k);
        state_[5 + 2 * i] = static_cast<uint32_t>(k >> 32);
    }
    state_[12] = 0; // block counter
    state_[13] = 0;
    state_[14] = static_cast<uint32_t>(stream_id);
    state_[15] = static_cast<uint32_t>(stream_id >> 32);
}

void ChaChaStream::refill() {
    chacha20_block(state_, block_);
    if (++state_[12] == 0) ++state_[13];
    block_word_ = 0;
}

uint64_t ChaChaStream::next_u64() {
    if (block_word_ + 2 > 16) refill();
    uint64_t lo = block_[block_word_++];
    uint64_t hi = block_[block_word_++];
    ++words_consumed_;
    return lo | (hi << 32);
}

uint64_t ChaChaStream::next_below(uint64_t bound) {
    // Accept only draws below the largest multiple of bound that fits in 2^64.
    const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % bound + 1) % bound;
    for (;;) {
        uint64_t v = next_u64();
        if (v <= limit) return v % bound;
    }
}

void ChaChaStream::fill_bytes(uint8_t* out, size_t n) {
    size_t i = 0;
    while (i < n) {
        uint64_t v = next_u64();
        size_t take = (n - i < 8) ? (n - i) : 8;
        std::memcpy(out + i, &v, take);
        i += take;
    }
}

} // namespace slip
