#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "slip/matrix.hpp"
#include "slip/svd.hpp"

namespace slip {

struct ModelParams; // models.hpp

enum class LayerType : uint8_t {
    mlp_fc = 0,
    mlp_proj = 1,
    attn_q = 2,
    attn_k = 3,
    attn_v = 4,
    attn_o = 5,
    generic = 6,
};

const char* to_string(LayerType t);
LayerType layer_type_from_string(const std::string& s);

struct LayerId {
    int32_t block = 0;
    LayerType type = LayerType::generic;

    auto operator<=>(const LayerId&) const = default;
};

std::string to_string(const LayerId& id);

struct LayerMatrix {
    Mat weight;
    LayerId id;

    size_t rows() const { return weight.rows(); }
    size_t cols() const { return weight.cols(); }
};

/// A layer split into Charlie's factored top-k part and David's dense
/// residual. charlie_densified() + david_part reconstructs the original.
struct Decomposition {
    Mat u_k;                     // m x k, orthonormal columns
    std::vector<double> sigma_k; // k values, descending
    Mat v_k;                     // n x k, orthonormal columns
    Mat david_part;              // m x n dense residual
    size_t k = 0;

    bool empty() const { return k == 0; }
    size_t rows() const { return david_part.rows(); }
    size_t cols() const { return david_part.cols(); }
    Mat charlie_densified() const;
};

/// Keep the top k singular components on Charlie, densify the rest for David.
/// k = 1 leaks the withheld component to a rank attack, so it is rejected
/// unless allow_unsafe is set (red-team demos only).
Decomposition split(const Mat& w, size_t k, bool allow_unsafe = false);
Decomposition split(const LayerMatrix& w, size_t k, bool allow_unsafe = false);

/// Full singular spectrum, descending.
std::vector<double> spectral_profile(const Mat& w);

struct SplitTriplet {
    int32_t block = 0;
    LayerType layer_type = LayerType::generic;
    size_t K = 2;
};

struct SplitPlan {
    std::vector<SplitTriplet> triplets;

    /// No duplicate (block, layer_type) pairs; every K >= 2.
    void validate() const;
    bool addresses(const LayerId& id) const;
    size_t k_for(const LayerId& id) const;
};

struct DensityReport {
    double eta = 0.0;
    uint64_t charlie_params = 0;
    uint64_t total_params = 0;
    uint64_t charlie_flops_per_token = 0;
    uint64_t david_flops_per_token = 0;
    bool density_warning = false; // factored storage exceeded dense somewhere
};

/// Split layers by index plus the set of layers handed to David whole.
struct ModelDecomposition {
    std::map<size_t, Decomposition> split_layers;
    std::set<size_t> offloaded_layers;
};

ModelDecomposition plan_decomposition(const ModelParams& model, const SplitPlan& plan);

DensityReport parameter_density(const SplitPlan& plan, const ModelParams& model);

/// kappa = full_risk / extended_risk (Usefulness). Both risks must be > 0.
double usefulness_ratio(double full_risk, double extended_risk);

/// True when kappa <= 1 - K for the configured K.
bool k_useful(double kappa, double K);

/// Split every layer type in the first and last blocks with the given K.
SplitPlan default_plan(const ModelParams& model, size_t K = 50);

} // namespace slip
