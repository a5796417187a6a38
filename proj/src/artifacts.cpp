#include "slip/artifacts.hpp"

#include <string>

#include "slip/checkpoint.hpp"
#include "slip/errors.hpp"

namespace slip {

namespace {

TensorRecord mat_record(const std::string& name, const Mat& m) {
    return TensorRecord::f64(name, {m.rows(), m.cols()}, m.data());
}

Mat record_mat(const TensorRecord& r) {
    if (r.dims.size() != 2) throw MalformedFrame("expected rank-2 tensor: " + r.name);
    return Mat(r.dims[0], r.dims[1], r.as_f64());
}

TensorRecord ring_matrix_record(const std::string& name, const RingMatrix& m) {
    return TensorRecord::u64(name, {m.rows, m.cols}, m.values);
}

RingMatrix record_ring_matrix(const TensorRecord& r) {
    if (r.dims.size() != 2) throw MalformedFrame("expected rank-2 tensor: " + r.name);
    RingMatrix m;
    m.rows = r.dims[0];
    m.cols = r.dims[1];
    m.values = r.as_u64();
    return m;
}

void put_ring(std::vector<TensorRecord>& records, const RingParams& ring) {
    records.push_back(TensorRecord::u64("ring/params", {3},
                                        {ring.modulus_L, ring.scale, ring.headroom_bits}));
}

RingParams get_ring(const std::vector<TensorRecord>& records) {
    auto v = require_record(records, "ring/params").as_u64();
    return RingParams(v[0], v[1], static_cast<uint32_t>(v[2]));
}

void put_shapes(std::vector<TensorRecord>& records, const std::vector<LayerShape>& shapes) {
    std::vector<uint64_t> flat;
    for (const LayerShape& s : shapes) {
        flat.push_back(s.rows);
        flat.push_back(s.cols);
        flat.push_back(s.split ? 1 : 0);
    }
    records.push_back(TensorRecord::u64("meta/shapes", {shapes.size(), 3}, flat));
}

std::vector<LayerShape> get_shapes(const std::vector<TensorRecord>& records) {
    const TensorRecord& r = require_record(records, "meta/shapes");
    auto flat = r.as_u64();
    std::vector<LayerShape> shapes;
    for (size_t i = 0; i + 3 <= flat.size(); i += 3)
        shapes.push_back(LayerShape{static_cast<uint32_t>(flat[i]),
                                    static_cast<uint32_t>(flat[i + 1]), flat[i + 2] != 0});
    return shapes;
}

} // namespace

void save_charlie_state(const std::string& path, const CharlieState& state) {
    std::vector<TensorRecord> records;
    put_ring(records, state.ring);
    records.push_back(TensorRecord::scalar_u64("meta/kind", static_cast<uint64_t>(state.kind)));
    records.push_back(TensorRecord::scalar_u64("meta/tokens", state.tokens));
    records.push_back(TensorRecord::scalar_u64("meta/head_engaged", state.head_engaged ? 1 : 0));
    put_shapes(records, state.shapes);
    for (const auto& [idx, layer] : state.layers) {
        std::string p = "layer" + std::to_string(idx);
        records.push_back(TensorRecord::scalar_u64(p + "/k", layer.decomp.k));
        if (!layer.decomp.empty()) {
            records.push_back(mat_record(p + "/u", layer.decomp.u_k));
            records.push_back(TensorRecord::f64(p + "/sigma", {layer.decomp.sigma_k.size()},
                                                layer.decomp.sigma_k));
            records.push_back(mat_record(p + "/v", layer.decomp.v_k));
            records.push_back(mat_record(p + "/residual", layer.decomp.david_part));
        }
        records.push_back(ring_matrix_record(p + "/wd_int", layer.w_d_int));
        if (layer.bias) records.push_back(TensorRecord::f64(p + "/bias", {layer.bias->size()}, *layer.bias));
        records.push_back(TensorRecord::scalar_u64(p + "/act", static_cast<uint64_t>(layer.act)));
    }
    write_tensor_file(path, records);
}

void save_david_state(const std::string& path, const DavidState& state) {
    std::vector<TensorRecord> records;
    put_ring(records, state.ring);
    records.push_back(TensorRecord::scalar_u64("meta/kind", static_cast<uint64_t>(state.kind)));
    records.push_back(TensorRecord::scalar_u64("meta/tokens", state.tokens));
    records.push_back(TensorRecord::scalar_u64("meta/head_engaged", state.head_engaged ? 1 : 0));
    records.push_back(TensorRecord::scalar_u64("meta/n_layers", state.layers.size()));
    for (size_t i = 0; i < state.layers.size(); ++i) {
        const DavidLayer& l = state.layers[i];
        std::string p = "layer" + std::to_string(i);
        records.push_back(ring_matrix_record(p + "/w_int", l.w_int));
        records.push_back(TensorRecord::scalar_u64(p + "/split", l.split ? 1 : 0));
        if (l.bias) records.push_back(TensorRecord::f64(p + "/bias", {l.bias->size()}, *l.bias));
        records.push_back(TensorRecord::scalar_u64(p + "/act", static_cast<uint64_t>(l.act)));
    }
    write_tensor_file(path, records);
}

CharlieState load_charlie_state(const std::string& path, uint64_t mask_seed,
                                uint64_t mask_stream) {
    auto records = read_tensor_file(path);
    CharlieState state;
    state.ring = get_ring(records);
    state.kind = static_cast<ModelKind>(require_record(records, "meta/kind").as_u64()[0]);
    state.tokens = static_cast<uint32_t>(require_record(records, "meta/tokens").as_u64()[0]);
    state.head_engaged = require_record(records, "meta/head_engaged").as_u64()[0] != 0;
    state.shapes = get_shapes(records);
    state.rng = std::make_shared<ChaChaStream>(mask_seed, mask_stream);
    for (uint32_t i = 0; i < state.shapes.size(); ++i) {
        std::string p = "layer" + std::to_string(i);
        const TensorRecord* k_rec = find_record(records, p + "/k");
        if (!k_rec) continue;
        CharlieLayer layer;
        uint64_t k = k_rec->as_u64()[0];
        if (k > 0) {
            layer.decomp.k = k;
            layer.decomp.u_k = record_mat(require_record(records, p + "/u"));
            layer.decomp.sigma_k = require_record(records, p + "/sigma").as_f64();
            layer.decomp.v_k = record_mat(require_record(records, p + "/v"));
            layer.decomp.david_part = record_mat(require_record(records, p + "/residual"));
        }
        layer.w_d_int = record_ring_matrix(require_record(records, p + "/wd_int"));
        if (const TensorRecord* b = find_record(records, p + "/bias")) layer.bias = b->as_f64();
        layer.act = static_cast<Activation>(require_record(records, p + "/act").as_u64()[0]);
        state.layers.emplace(i, std::move(layer));
    }
    return state;
}

DavidState load_david_state(const std::string& path) {
    auto records = read_tensor_file(path);
    DavidState state;
    state.ring = get_ring(records);
    state.kind = static_cast<ModelKind>(require_record(records, "meta/kind").as_u64()[0]);
    state.tokens = static_cast<uint32_t>(require_record(records, "meta/tokens").as_u64()[0]);
    state.head_engaged = require_record(records, "meta/head_engaged").as_u64()[0] != 0;
    uint64_t n = require_record(records, "meta/n_layers").as_u64()[0];
    for (uint64_t i = 0; i < n; ++i) {
        std::string p = "layer" + std::to_string(i);
        DavidLayer l;
        l.w_int = record_ring_matrix(require_record(records, p + "/w_int"));
        l.split = require_record(records, p + "/split").as_u64()[0] != 0;
        if (const TensorRecord* b = find_record(records, p + "/bias")) l.bias = b->as_f64();
        l.act = static_cast<Activation>(require_record(records, p + "/act").as_u64()[0]);
        state.layers.push_back(std::move(l));
    }
    return state;
}

} // namespace slip
