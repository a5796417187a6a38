#include "slip/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "slip/errors.hpp"

namespace slip {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'P', 'M'};
constexpr uint16_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
    for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get(const std::vector<uint8_t>& buf, size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw MalformedFrame("tensor file truncated");
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[pos + i]) << (8 * i);
    pos += sizeof(T);
    return v;
}

size_t dtype_size(uint8_t dtype) {
    switch (dtype) {
        case 0: return 8;
        case 1: return 4;
        case 2: return 8;
    }
    throw MalformedFrame("unknown dtype code");
}

} // namespace

size_t TensorRecord::element_count() const {
    size_t n = 1;
    for (uint64_t d : dims) n *= static_cast<size_t>(d);
    return n;
}

std::vector<double> TensorRecord::as_f64() const {
    size_t n = element_count();
    std::vector<double> out(n);
    if (dtype == 0) {
        if (payload.size() != n * 8) throw MalformedFrame("f64 payload size mismatch");
        std::memcpy(out.data(), payload.data(), payload.size());
    } else if (dtype == 1) {
        if (payload.size() != n * 4) throw MalformedFrame("f32 payload size mismatch");
        for (size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, payload.data() + 4 * i, 4);
            out[i] = static_cast<double>(f);
        }
    } else {
        throw MalformedFrame("tensor " + name + " is not floating point");
    }
    return out;
}

std::vector<uint64_t> TensorRecord::as_u64() const {
    if (dtype != 2) throw MalformedFrame("tensor " + name + " is not u64");
    size_t n = element_count();
    if (payload.size() != n * 8) throw MalformedFrame("u64 payload size mismatch");
    std::vector<uint64_t> out(n);
    std::memcpy(out.data(), payload.data(), payload.size());
    return out;
}

TensorRecord TensorRecord::f64(std::string name, std::vector<uint64_t> dims,
                               const std::vector<double>& values) {
    TensorRecord r;
    r.name = std::move(name);
    r.dtype = 0;
    r.dims = std::move(dims);
    r.payload.resize(values.size() * 8);
    std::memcpy(r.payload.data(), values.data(), r.payload.size());
    if (r.element_count() != values.size()) throw ShapeError("tensor dims/value count mismatch");
    return r;
}

TensorRecord TensorRecord::u64(std::string name, std::vector<uint64_t> dims,
                               const std::vector<uint64_t>& values) {
    TensorRecord r;
    r.name = std::move(name);
    r.dtype = 2;
    r.dims = std::move(dims);
    r.payload.resize(values.size() * 8);
    std::memcpy(r.payload.data(), values.data(), r.payload.size());
    if (r.element_count() != values.size()) throw ShapeError("tensor dims/value count mismatch");
    return r;
}

TensorRecord TensorRecord::scalar_u64(std::string name, uint64_t value) {
    return u64(std::move(name), {1}, {value});
}

void write_tensor_file(const std::string& path, const std::vector<TensorRecord>& records) {
    std::string out;
    out.append(kMagic, 4);
    put<uint16_t>(out, kVersion);
    put<uint32_t>(out, static_cast<uint32_t>(records.size()));
    for (const TensorRecord& r : records) {
        if (r.name.size() > 0xffff) throw ShapeError("tensor name too long");
        put<uint16_t>(out, static_cast<uint16_t>(r.name.size()));
        out.append(r.name);
        out.push_back(static_cast<char>(r.dtype));
        out.push_back(static_cast<char>(r.dims.size()));
        for (uint64_t d : r.dims) put<uint64_t>(out, d);
        if (r.payload.size() != r.element_count() * dtype_size(r.dtype))
            throw ShapeError("tensor payload size mismatch: " + r.name);
        out.append(reinterpret_cast<const char*>(r.payload.data()), r.payload.size());
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("short write to " + path);
}

std::vector<TensorRecord> read_tensor_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    size_t pos = 0;
    if (buf.size() < 10 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw MalformedFrame("bad tensor file magic");
    pos = 4;
    uint16_t version = get<uint16_t>(buf, pos);
    if (version != kVersion) throw VersionMismatch("tensor file version " + std::to_string(version));
    uint32_t count = get<uint32_t>(buf, pos);
    std::vector<TensorRecord> records;
    records.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        TensorRecord r;
        uint16_t name_len = get<uint16_t>(buf, pos);
        if (pos + name_len > buf.size()) throw MalformedFrame("tensor file truncated");
        r.name.assign(reinterpret_cast<const char*>(buf.data() + pos), name_len);
        pos += name_len;
        r.dtype = get<uint8_t>(buf, pos);
        uint8_t rank = get<uint8_t>(buf, pos);
        for (uint8_t d = 0; d < rank; ++d) r.dims.push_back(get<uint64_t>(buf, pos));
        size_t bytes = r.element_count() * dtype_size(r.dtype);
        if (pos + bytes > buf.size()) throw MalformedFrame("tensor file truncated");
        r.payload.assign(buf.begin() + static_cast<long>(pos), buf.begin() + static_cast<long>(pos + bytes));
        pos += bytes;
        records.push_back(std::move(r));
    }
    return records;
}

const TensorRecord* find_record(const std::vector<TensorRecord>& records, const std::string& name) {
    for (const TensorRecord& r : records)
        if (r.name == name) return &r;
    return nullptr;
}

const TensorRecord& require_record(const std::vector<TensorRecord>& records,
                                   const std::string& name) {
    const TensorRecord* r = find_record(records, name);
    if (!r) throw MalformedFrame("missing tensor: " + name);
    return *r;
}

void save_model(const std::string& path, const ModelParams& model) {
    model.validate();
    std::vector<TensorRecord> records;
    records.push_back(TensorRecord::scalar_u64("meta/kind", static_cast<uint64_t>(model.kind)));
    records.push_back(TensorRecord::scalar_u64("meta/n_layers", model.layers.size()));
    for (size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& l = model.layers[i];
        std::string prefix = "layer" + std::to_string(i);
        records.push_back(TensorRecord::f64(prefix + "/weight", {l.weight.rows(), l.weight.cols()},
                                            l.weight.data()));
        if (l.bias)
            records.push_back(TensorRecord::f64(prefix + "/bias", {l.bias->size()}, *l.bias));
        records.push_back(TensorRecord::u64(
            prefix + "/meta", {3},
            {static_cast<uint64_t>(static_cast<int64_t>(l.id.block)),
             static_cast<uint64_t>(l.id.type), static_cast<uint64_t>(l.act)}));
    }
    write_tensor_file(path, records);
}

ModelParams load_model(const std::string& path) {
    auto records = read_tensor_file(path);
    ModelParams model;
    model.kind = static_cast<ModelKind>(require_record(records, "meta/kind").as_u64()[0]);
    uint64_t n_layers = require_record(records, "meta/n_layers").as_u64()[0];
    for (uint64_t i = 0; i < n_layers; ++i) {
        std::string prefix = "layer" + std::to_string(i);
        const TensorRecord& wrec = require_record(records, prefix + "/weight");
        if (wrec.dims.size() != 2) throw MalformedFrame("weight tensor must be rank 2");
        Layer l;
        l.weight = Mat(wrec.dims[0], wrec.dims[1], wrec.as_f64());
        if (const TensorRecord* brec = find_record(records, prefix + "/bias"))
            l.bias = brec->as_f64();
        auto meta = require_record(records, prefix + "/meta").as_u64();
        l.id.block = static_cast<int32_t>(static_cast<int64_t>(meta[0]));
        l.id.type = static_cast<LayerType>(meta[1]);
        l.act = static_cast<Activation>(meta[2]);
        model.layers.push_back(std::move(l));
    }
    model.validate();
    return model;
}

} // namespace slip
