#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace slip {

/// Deterministic ChaCha20-based random stream.
///
/// A stream is identified by (seed, stream_id) and keeps an explicit block
/// position, so a session can own a stream exclusively and advancing it never
/// replays earlier output. Fixed seeds give reproducible byte sequences.
class ChaChaStream {
public:
    ChaChaStream(uint64_t seed, uint64_t stream_id);

    uint64_t next_u64();

    /// Uniform draw from [0, bound) by rejection sampling; no modulo bias.
    uint64_t next_below(uint64_t bound);

    void fill_bytes(uint8_t* out, size_t n);

    uint64_t stream_id() const { return stream_id_; }

    /// Count of u64 words consumed so far; identifies a position in the stream.
    uint64_t position() const { return words_consumed_; }

private:
    void refill();

    std::array<uint32_t, 16> state_;
    std::array<uint32_t, 16> block_;
    size_t block_word_ = 16; // forces refill on first use
    uint64_t stream_id_ = 0;
    uint64_t words_consumed_ = 0;
};

} // namespace slip
