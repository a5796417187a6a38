#include "slip/decompose.hpp"

#include <algorithm>
#include <set>

#include "slip/errors.hpp"
#include "slip/models.hpp"

namespace slip {

const char* to_string(LayerType t) {
    switch (t) {
        case LayerType::mlp_fc: return "mlp_fc";
        case LayerType::mlp_proj: return "mlp_proj";
        case LayerType::attn_q: return "attn_q";
        case LayerType::attn_k: return "attn_k";
        case LayerType::attn_v: return "attn_v";
        case LayerType::attn_o: return "attn_o";
        case LayerType::generic: return "generic";
    }
    return "generic";
}

LayerType layer_type_from_string(const std::string& s) {
    for (auto t : {LayerType::mlp_fc, LayerType::mlp_proj, LayerType::attn_q, LayerType::attn_k,
                   LayerType::attn_v, LayerType::attn_o, LayerType::generic}) {
        if (s == to_string(t)) return t;
    }
    throw DomainError("unknown layer type: " + s);
}

std::string to_string(const LayerId& id) {
    return "(" + std::to_string(id.block) + "," + to_string(id.type) + ")";
}

Mat Decomposition::charlie_densified() const {
    if (empty()) return Mat(rows(), cols());
    Mat sigma_vt(k, v_k.rows());
    for (size_t j = 0; j < k; ++j)
        for (size_t c = 0; c < v_k.rows(); ++c) sigma_vt(j, c) = sigma_k[j] * v_k(c, j);
    return u_k * sigma_vt;
}

Decomposition split(const Mat& w, size_t k, bool allow_unsafe) {
    if (k < 1) throw UnsafeSplitError("split: k must be >= 1");
    if (k < 2 && !allow_unsafe)
        throw UnsafeSplitError("split: k=1 leaks the withheld component; pass unsafe override");

    SvdResult full = svd(w);
    size_t rank = numerical_rank(full.sigma);
    if (k > rank) throw RankError("split: k exceeds numerical rank");

    Decomposition d;
    d.k = k;
    d.u_k = Mat(w.rows(), k);
    d.v_k = Mat(w.cols(), k);
    d.sigma_k.assign(full.sigma.begin(), full.sigma.begin() + static_cast<long>(k));
    for (size_t j = 0; j < k; ++j) {
        for (size_t r = 0; r < w.rows(); ++r) d.u_k(r, j) = full.u(r, j);
        for (size_t r = 0; r < w.cols(); ++r) d.v_k(r, j) = full.v(r, j);
    }
    d.david_part = w - d.charlie_densified();
    return d;
}

Decomposition split(const LayerMatrix& w, size_t k, bool allow_unsafe) {
    return split(w.weight, k, allow_unsafe);
}

std::vector<double> spectral_profile(const Mat& w) { return singular_values(w); }

void SplitPlan::validate() const {
    std::set<std::pair<int32_t, LayerType>> seen;
    for (const auto& t : triplets) {
        if (t.K < 2) throw UnsafeSplitError("plan: K must be >= 2 for " + to_string(LayerId{t.block, t.layer_type}));
        if (!seen.emplace(t.block, t.layer_type).second)
            throw DomainError("plan: duplicate triplet for " + to_string(LayerId{t.block, t.layer_type}));
    }
}

bool SplitPlan::addresses(const LayerId& id) const {
    return std::any_of(triplets.begin(), triplets.end(), [&](const SplitTriplet& t) {
        return t.block == id.block && t.layer_type == id.type;
    });
}

size_t SplitPlan::k_for(const LayerId& id) const {
    for (const auto& t : triplets)
        if (t.block == id.block && t.layer_type == id.type) return t.K;
    throw UnknownLayerError("plan does not address " + to_string(id));
}

ModelDecomposition plan_decomposition(const ModelParams& model, const SplitPlan& plan) {
    plan.validate();
    for (const auto& t : plan.triplets) {
        if (!model.layer_index(LayerId{t.block, t.layer_type}))
            throw UnknownLayerError("plan addresses missing layer " +
                                    to_string(LayerId{t.block, t.layer_type}));
    }
    ModelDecomposition out;
    for (size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        if (plan.addresses(layer.id)) {
            out.split_layers.emplace(i, split(layer.weight, plan.k_for(layer.id)));
        } else {
            out.offloaded_layers.insert(i);
        }
    }
    return out;
}

DensityReport parameter_density(const SplitPlan& plan, const ModelParams& model) {
    plan.validate();
    DensityReport report;
    for (const auto& t : plan.triplets) {
        auto idx = model.layer_index(LayerId{t.block, t.layer_type});
        if (!idx)
            throw PlanShapeMismatch("density: plan addresses missing layer " +
                                    to_string(LayerId{t.block, t.layer_type}));
        const Mat& w = model.layers[*idx].weight;
        if (t.K > std::min(w.rows(), w.cols()))
            throw PlanShapeMismatch("density: K exceeds layer dimensions for " +
                                    to_string(LayerId{t.block, t.layer_type}));
    }
    for (size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        uint64_t m = layer.weight.rows();
        uint64_t n = layer.weight.cols();
        report.total_params += m * n;
        if (plan.addresses(layer.id)) {
            uint64_t k = plan.k_for(layer.id);
            uint64_t factored = k * (m + n + 1);
            report.charlie_params += factored;
            report.charlie_flops_per_token += 2 * k * (m + n);
            report.david_flops_per_token += 2 * m * n; // dense residual
            if (factored > m * n) report.density_warning = true;
        } else {
            report.david_flops_per_token += 2 * m * n;
        }
    }
    report.eta = report.total_params == 0
                     ? 0.0
                     : static_cast<double>(report.charlie_params) / static_cast<double>(report.total_params);
    if (report.eta > 1.0) report.density_warning = true;
    return report;
}

double usefulness_ratio(double full_risk, double extended_risk) {
    if (full_risk <= 0.0 || extended_risk <= 0.0)
        throw DomainError("usefulness: risks must be positive");
    return full_risk / extended_risk;
}

bool k_useful(double kappa, double K) { return kappa <= 1.0 - K; }

SplitPlan default_plan(const ModelParams& model, size_t K) {
    int32_t lo = 0, hi = 0;
    bool first = true;
    for (const Layer& layer : model.layers) {
        if (first) {
            lo = hi = layer.id.block;
            first = false;
        } else {
            lo = std::min(lo, layer.id.block);
            hi = std::max(hi, layer.id.block);
        }
    }
    SplitPlan plan;
    std::set<std::pair<int32_t, LayerType>> seen;
    for (const Layer& layer : model.layers) {
        if (layer.id.block != lo && layer.id.block != hi) continue;
        if (!seen.emplace(layer.id.block, layer.id.type).second) continue;
        size_t cap = std::min(layer.weight.rows(), layer.weight.cols());
        plan.triplets.push_back({layer.id.block, layer.id.type, std::min(K, cap)});
    }
    return plan;
}

} // namespace slip
