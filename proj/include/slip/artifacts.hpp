#pragma once

#include <string>

#include "slip/protocol.hpp"

namespace slip {

/// charlie.bin: ring params plus, per split layer, the factored sensitive
/// part, the integer residual copy, bias and activation. david.bin: per
/// layer, the integer matrix (residual or full), plus bias/activation for
/// offloaded layers only. Both reuse the tensor container format.
void save_charlie_state(const std::string& path, const CharlieState& state);
void save_david_state(const std::string& path, const DavidState& state);

/// `mask_seed`/`mask_stream` re-arm Charlie's pad generator; pools start
/// empty and next_inference_id at zero.
CharlieState load_charlie_state(const std::string& path, uint64_t mask_seed,
                                uint64_t mask_stream = 0);
DavidState load_david_state(const std::string& path);

} // namespace slip
