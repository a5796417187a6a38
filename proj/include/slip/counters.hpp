#pragma once

#include <cstdint>

namespace slip {

/// Multiply-add and per-element operation tallies for a party or a reference
/// pass. Used to compare a party's local work against the monolithic count.
struct OpCounters {
    uint64_t int_madds = 0;
    uint64_t float_madds = 0;
    uint64_t elementwise = 0;

    uint64_t total() const { return int_madds + float_madds + elementwise; }
    void reset() { int_madds = float_madds = elementwise = 0; }
};

} // namespace slip
