#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slip/models.hpp"

namespace slip {

/// Tensor container file:
///   magic "SLPM" | version u16 | count u32 | records...
/// record: name_len u16 | name utf-8 | dtype u8 | rank u8 | dims u64[rank] |
///         payload (little-endian).
/// dtype: 0 = f64, 1 = f32, 2 = u64.
struct TensorRecord {
    std::string name;
    uint8_t dtype = 0;
    std::vector<uint64_t> dims;
    std::vector<uint8_t> payload;

    size_t element_count() const;
    std::vector<double> as_f64() const;
    std::vector<uint64_t> as_u64() const;

    static TensorRecord f64(std::string name, std::vector<uint64_t> dims,
                            const std::vector<double>& values);
    static TensorRecord u64(std::string name, std::vector<uint64_t> dims,
                            const std::vector<uint64_t>& values);
    static TensorRecord scalar_u64(std::string name, uint64_t value);
};

void write_tensor_file(const std::string& path, const std::vector<TensorRecord>& records);
std::vector<TensorRecord> read_tensor_file(const std::string& path);

const TensorRecord* find_record(const std::vector<TensorRecord>& records, const std::string& name);
const TensorRecord& require_record(const std::vector<TensorRecord>& records,
                                   const std::string& name);

void save_model(const std::string& path, const ModelParams& model);
ModelParams load_model(const std::string& path);

} // namespace slip
