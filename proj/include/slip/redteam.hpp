#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slip/decompose.hpp"
#include "slip/matrix.hpp"
#include "slip/protocol.hpp"
#include "slip/stats.hpp"
#include "slip/train.hpp"

namespace slip {

enum class Verdict : uint8_t { broken = 0, resisted = 1 };

const char* to_string(Verdict v);

struct AttackReport {
    std::string attack_name;
    double success_metric = 0.0;
    uint64_t queries_used = 0;
    Verdict verdict = Verdict::resisted;
    std::string notes;
};

struct LinearEquationAttack {
    AttackReport report;
    Mat w_hat;
};

/// Recover a layer's weight matrix from David's transcript view by least
/// squares on (layer input, layer output) pairs. On insecure transcripts the
/// inputs are plaintext and the system is the true linear map; on secure
/// transcripts the inputs are uniform residues and recovery fails. The true W
/// is used only to score the attempt.
LinearEquationAttack linear_equation_attack(const std::vector<Transcript>& transcripts,
                                            uint32_t layer_id, const RingParams& ring,
                                            const Mat& w_true);

struct SubspaceAttack {
    AttackReport report;
    std::vector<double> u1_hat;
    std::vector<double> v1_hat;
};

/// Reconstruct the withheld singular pair of a k=1 split from the residual's
/// orthogonal complement. Throws DegenerateError when the complement is not
/// one-dimensional (k >= 2 leaves a k-dimensional ambiguity).
SubspaceAttack subspace_attack_k1(const Mat& w_d, const std::vector<double>& u1_true,
                                  const std::vector<double>& v1_true);

/// trace identity estimate of the withheld top eigenvalue; valid only for
/// symmetric positive semidefinite matrices, where singular values are
/// eigenvalues. Throws DomainError otherwise.
double sigma1_trace_estimate(const Mat& w_d, double trace_full);

/// Chi-square uniformity of masked payload coordinates over [0, L).
/// Requires at least 100 * L samples.
ChiSquareResult uniformity_distinguisher(const std::vector<uint64_t>& payload_coords, uint64_t L);

struct MutualInformationCheck {
    double mi_bits = 0.0;
    double threshold = 0.0;
    bool independent = false;
    size_t samples = 0;
};

/// Plug-in MI between plaintext and masked coordinates; small L (<= 31) only.
MutualInformationCheck mutual_information_check(const std::vector<uint64_t>& s_samples,
                                                const std::vector<uint64_t>& masked_samples,
                                                uint64_t L);

/// David's float view of the model: dense residuals for split layers (biases
/// withheld), full weights elsewhere.
ModelParams build_exposed_model(const ModelParams& full, const ModelDecomposition& decomp);

struct RestorationResult {
    double baseline_risk = 0.0;
    double exposed_risk = 0.0;
    double restored_risk = 0.0;
    double kappa = 0.0;              // baseline / restored (usefulness surrogate)
    std::vector<double> risk_curve;  // eval risk per epoch, index 0 = no tuning
};

/// Fine-tune the exposed parameters on the task's public train split and
/// report risks before/after. Report-only: there is no pass/fail verdict.
RestorationResult restoration_attack(const ModelParams& full_trained,
                                     const ModelDecomposition& decomp, const EvalTask& task,
                                     size_t epochs, double learning_rate, uint64_t seed);

} // namespace slip
