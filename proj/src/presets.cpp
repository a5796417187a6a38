#include "slip/presets.hpp"

namespace slip {

Mat random_matrix(ChaChaStream& rng, size_t rows, size_t cols, double amp) {
    Mat m(rows, cols);
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) {
            double u = static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53;
            m(r, c) = amp * (2.0 * u - 1.0);
        }
    return m;
}

ModelParams make_toy_mlp(uint64_t seed, size_t n_layers, size_t dim, size_t n_classes,
                         double amp) {
    ChaChaStream rng(seed, 100);
    ModelParams model;
    model.kind = ModelKind::mlp;
    for (size_t i = 0; i < n_layers; ++i) {
        Layer l;
        bool last = i + 1 == n_layers;
        size_t rows = (last && n_classes > 0) ? n_classes : dim;
        l.weight = random_matrix(rng, rows, dim, amp);
        l.act = last ? (n_classes > 0 ? Activation::softmax : Activation::identity)
                     : Activation::relu;
        l.id = LayerId{static_cast<int32_t>(i), LayerType::mlp_fc};
        model.layers.push_back(std::move(l));
    }
    model.validate();
    return model;
}

ModelParams make_toy_attention(uint64_t seed, size_t embed_dim, size_t head_dim, double amp) {
    ChaChaStream rng(seed, 101);
    ModelParams model;
    model.kind = ModelKind::attention_head;
    const LayerType types[4] = {LayerType::attn_q, LayerType::attn_k, LayerType::attn_v,
                                LayerType::attn_o};
    for (int i = 0; i < 4; ++i) {
        Layer l;
        l.weight = (i < 3) ? random_matrix(rng, head_dim, embed_dim, amp)
                           : random_matrix(rng, embed_dim, head_dim, amp);
        l.id = LayerId{0, types[i]};
        model.layers.push_back(std::move(l));
    }
    model.validate();
    return model;
}

ModelParams make_toy_transformer_stack(uint64_t seed, size_t blocks, size_t dim, double amp) {
    ChaChaStream rng(seed, 102);
    ModelParams model;
    model.kind = ModelKind::mlp;
    for (size_t b = 0; b < blocks; ++b) {
        for (LayerType t : {LayerType::mlp_fc, LayerType::mlp_proj}) {
            Layer l;
            l.weight = random_matrix(rng, dim, dim, amp);
            bool last = b + 1 == blocks && t == LayerType::mlp_proj;
            l.act = last ? Activation::identity : Activation::relu;
            l.id = LayerId{static_cast<int32_t>(b), t};
            model.layers.push_back(std::move(l));
        }
    }
    model.validate();
    return model;
}

} // namespace slip
