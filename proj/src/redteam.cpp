#include "slip/redteam.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "slip/errors.hpp"
#include "slip/svd.hpp"

namespace slip {

const char* to_string(Verdict v) { return v == Verdict::broken ? "broken" : "resisted"; }

namespace {

Eigen::MatrixXd to_eigen(const Mat& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (size_t r = 0; r < m.rows(); ++r)
        for (size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    return e;
}

double abs_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::fabs(dot(a, b)) / (na * nb);
}

} // namespace

LinearEquationAttack linear_equation_attack(const std::vector<Transcript>& transcripts,
                                            uint32_t layer_id, const RingParams& ring,
                                            const Mat& w_true) {
    // David's observable pairs: the layer's input frame as he received it
    // (masked or plaintext, depending on the protocol) and the layer's output
    // as it reappears downstream (the next handoff or the final output).
    std::vector<std::vector<double>> ins, outs;
    for (const Transcript& t : transcripts) {
        const FixedVec* in = nullptr;
        const FixedVec* out = nullptr;
        for (const auto& [dir, msg] : t.entries) {
            (void)dir;
            if (msg.type == MsgType::masked_activation && msg.layer_id == layer_id && !in)
                in = &msg.payload;
            if (msg.type == MsgType::plain_activation && msg.layer_id == layer_id + 1)
                out = &msg.payload;
            if (msg.type == MsgType::inference_output && !out) out = &msg.payload;
        }
        if (in && out) {
            ins.push_back(dequantize(*in, ring));
            outs.push_back(dequantize(*out, ring));
        }
    }
    if (ins.empty()) throw RankDeficientError("no usable (input, output) pairs in transcripts");

    const size_t n = ins.front().size();
    const size_t m = outs.front().size();
    if (ins.size() < n)
        throw RankDeficientError("system underdetermined: " + std::to_string(ins.size()) +
                                 " samples for " + std::to_string(n) + " unknowns per row");

    Eigen::MatrixXd a(ins.size(), n), b(ins.size(), m);
    for (size_t i = 0; i < ins.size(); ++i) {
        for (size_t j = 0; j < n; ++j) a(static_cast<long>(i), static_cast<long>(j)) = ins[i][j];
        for (size_t j = 0; j < m; ++j) b(static_cast<long>(i), static_cast<long>(j)) = outs[i][j];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (static_cast<size_t>(qr.rank()) < n)
        throw RankDeficientError("input rows are rank deficient");
    Eigen::MatrixXd solution = qr.solve(b); // n x m, W^T

    Mat w_hat(m, n);
    for (size_t r = 0; r < m; ++r)
        for (size_t c = 0; c < n; ++c)
            w_hat(r, c) = solution(static_cast<long>(c), static_cast<long>(r));

    LinearEquationAttack out;
    out.w_hat = w_hat;
    out.report.attack_name = "linear_equation";
    out.report.queries_used = transcripts.size();
    out.report.success_metric = relative_frobenius_error(w_hat, w_true);
    out.report.verdict = out.report.success_metric <= 1e-6 ? Verdict::broken : Verdict::resisted;
    out.report.notes = "relative Frobenius error of the recovered weight matrix";
    return out;
}

SubspaceAttack subspace_attack_k1(const Mat& w_d, const std::vector<double>& u1_true,
                                  const std::vector<double>& v1_true) {
    if (w_d.rows() != w_d.cols()) throw DomainError("subspace attack expects a square matrix");
    SvdResult s = svd(w_d);
    const double tol = 1e-10 * (s.sigma.empty() ? 1.0 : s.sigma.front());
    size_t null_dim = 0;
    for (double v : s.sigma)
        if (v <= tol) ++null_dim;

    if (null_dim == 0)
        throw DegenerateError("residual has full column rank: nothing was withheld");
    if (null_dim > 1)
        throw DegenerateError("orthogonal complement is " + std::to_string(null_dim) +
                              "-dimensional: the withheld pair is not uniquely recoverable");

    size_t last = s.sigma.size() - 1;
    SubspaceAttack out;
    out.u1_hat.resize(w_d.rows());
    out.v1_hat.resize(w_d.cols());
    for (size_t i = 0; i < w_d.rows(); ++i) out.u1_hat[i] = s.u(i, last);
    for (size_t i = 0; i < w_d.cols(); ++i) out.v1_hat[i] = s.v(i, last);

    double cu = abs_cosine(out.u1_hat, u1_true);
    double cv = abs_cosine(out.v1_hat, v1_true);
    out.report.attack_name = "subspace_k1";
    out.report.queries_used = 0; // offline: needs only the exposed residual
    out.report.success_metric = std::min(cu, cv);
    out.report.verdict =
        out.report.success_metric >= 1.0 - 1e-8 ? Verdict::broken : Verdict::resisted;
    out.report.notes = "min |cos| alignment of recovered singular vectors";
    return out;
}

double sigma1_trace_estimate(const Mat& w_d, double trace_full) {
    if (w_d.rows() != w_d.cols()) throw DomainError("trace estimate expects a square matrix");
    double scale = 0.0;
    for (double v : w_d.data()) scale = std::max(scale, std::fabs(v));
    for (size_t r = 0; r < w_d.rows(); ++r)
        for (size_t c = r + 1; c < w_d.cols(); ++c)
            if (std::fabs(w_d(r, c) - w_d(c, r)) > 1e-9 * (1.0 + scale))
                throw DomainError(
                    "trace identity requires a symmetric PSD matrix (singular values equal "
                    "eigenvalues only there)");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(to_eigen(w_d));
    if (eig.info() != Eigen::Success) throw ConvergenceError("eigendecomposition failed");
    double lambda_max = eig.eigenvalues().maxCoeff();
    if (eig.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, lambda_max))
        throw DomainError(
            "trace identity requires a symmetric PSD matrix (singular values equal eigenvalues "
            "only there)");
    return trace_full - eig.eigenvalues().sum();
}

ChiSquareResult uniformity_distinguisher(const std::vector<uint64_t>& payload_coords, uint64_t L) {
    if (payload_coords.size() < 100 * L)
        throw InsufficientSamples("need at least 100*L masked coordinates");
    return chi_square_uniform(payload_coords, L);
}

MutualInformationCheck mutual_information_check(const std::vector<uint64_t>& s_samples,
                                                const std::vector<uint64_t>& masked_samples,
                                                uint64_t L) {
    if (L > 31) throw DomainError("mutual information check supports L <= 31");
    if (s_samples.size() != masked_samples.size())
        throw InsufficientSamples("paired samples required");
    if (s_samples.size() < 100 * L * L)
        throw InsufficientSamples("need at least 100*L^2 paired samples");
    MutualInformationCheck out;
    out.samples = s_samples.size();
    out.mi_bits = plugin_mutual_information_bits(masked_samples, s_samples, L);
    out.threshold = mi_independence_threshold(L, s_samples.size());
    out.independent = out.mi_bits <= out.threshold;
    return out;
}

ModelParams build_exposed_model(const ModelParams& full, const ModelDecomposition& decomp) {
    ModelParams exposed = full;
    for (auto& [idx, dec] : decomp.split_layers) {
        Layer& layer = exposed.layers[idx];
        layer.weight = dec.david_part;
        if (layer.bias) layer.bias = std::vector<double>(layer.bias->size(), 0.0);
    }
    return exposed;
}

RestorationResult restoration_attack(const ModelParams& full_trained,
                                     const ModelDecomposition& decomp, const EvalTask& task,
                                     size_t epochs, double learning_rate, uint64_t seed) {
    RestorationResult result;
    TrainableMLP baseline = TrainableMLP::from_model(full_trained);
    result.baseline_risk = baseline.risk(task.eval, task.loss);

    ModelParams exposed = build_exposed_model(full_trained, decomp);
    result.risk_curve = train_model(exposed, task, epochs, learning_rate, seed);
    result.exposed_risk = result.risk_curve.front();
    result.restored_risk = result.risk_curve.back();
    result.kappa = usefulness_ratio(result.baseline_risk, result.restored_risk);
    return result;
}

} // namespace slip
