#include "slip/models.hpp"

#include <cmath>
#include <string>

#include "slip/errors.hpp"

namespace slip {

const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::softmax: return "softmax";
        case Activation::identity: return "identity";
    }
    return "identity";
}

void ModelParams::validate() const {
    if (layers.empty()) throw ShapeError("model: no layers");
    for (const Layer& l : layers) {
        if (l.weight.rows() == 0 || l.weight.cols() == 0) throw ShapeError("model: empty weight");
        for (double v : l.weight.data())
            if (!std::isfinite(v)) throw ShapeError("model: non-finite weight");
        if (l.bias && l.bias->size() != l.weight.rows())
            throw ShapeError("model: bias dim != rows");
    }
    if (kind == ModelKind::attention_head) {
        if (layers.size() != 4) throw ShapeError("attention head: expected W_q, W_k, W_v, W_o");
        size_t dh = layers[0].weight.rows();
        size_t d = layers[0].weight.cols();
        for (size_t i : {size_t{1}, size_t{2}})
            if (layers[i].weight.rows() != dh || layers[i].weight.cols() != d)
                throw ShapeError("attention head: W_q/W_k/W_v shapes differ");
        if (layers[3].weight.cols() != dh) throw ShapeError("attention head: W_o cols != d_h");
        for (size_t i = 0; i < 3; ++i) {
            if (layers[i].bias) throw ShapeError("attention head: projections take no bias");
            if (layers[i].act != Activation::identity)
                throw ShapeError("attention head: projections take no activation");
        }
    } else {
        for (size_t i = 1; i < layers.size(); ++i)
            if (layers[i].weight.cols() != layers[i - 1].weight.rows())
                throw ShapeError("model: layer " + std::to_string(i) + " does not compose");
    }
}

size_t ModelParams::input_dim() const { return layers.front().weight.cols(); }

size_t ModelParams::output_dim() const { return layers.back().weight.rows(); }

size_t ModelParams::embed_dim() const {
    if (kind != ModelKind::attention_head) throw ShapeError("embed_dim: not an attention head");
    return layers[0].weight.cols();
}

size_t ModelParams::head_dim() const {
    if (kind != ModelKind::attention_head) throw ShapeError("head_dim: not an attention head");
    return layers[0].weight.rows();
}

std::optional<size_t> ModelParams::layer_index(const LayerId& id) const {
    for (size_t i = 0; i < layers.size(); ++i)
        if (layers[i].id == id) return i;
    return std::nullopt;
}

void ConvSpec::validate() const {
    if (k_h > in_h || k_w > in_w) throw ShapeError("conv: kernel larger than input");
    if (channels == 0 || filters == 0 || in_h == 0 || in_w == 0 || k_h == 0 || k_w == 0)
        throw ShapeError("conv: zero dimension");
}

size_t kernel_index(const ConvSpec& spec, size_t u, size_t v, size_t c, size_t n) {
    return ((u * spec.k_w + v) * spec.channels + c) * spec.filters + n;
}

size_t input_index(const ConvSpec& spec, size_t i, size_t j, size_t c) {
    return (i * spec.in_w + j) * spec.channels + c;
}

LayerMatrix conv_to_fc(const ConvSpec& spec, const std::vector<double>& kernel) {
    spec.validate();
    if (kernel.size() != spec.k_h * spec.k_w * spec.channels * spec.filters)
        throw ShapeError("conv_to_fc: kernel size mismatch");
    size_t out_rows = spec.out_h() * spec.out_w() * spec.filters;
    size_t in_cols = spec.in_h * spec.in_w * spec.channels;
    Mat w(out_rows, in_cols);
    for (size_t i = 0; i < spec.out_h(); ++i)
        for (size_t j = 0; j < spec.out_w(); ++j)
            for (size_t n = 0; n < spec.filters; ++n) {
                size_t row = (i * spec.out_w() + j) * spec.filters + n;
                for (size_t u = 0; u < spec.k_h; ++u)
                    for (size_t v = 0; v < spec.k_w; ++v)
                        for (size_t c = 0; c < spec.channels; ++c)
                            w(row, input_index(spec, i + u, j + v, c)) =
                                kernel[kernel_index(spec, u, v, c, n)];
            }
    return LayerMatrix{std::move(w), LayerId{0, LayerType::generic}};
}

namespace {

std::vector<double> apply_activation(Activation act, std::vector<double> z) {
    switch (act) {
        case Activation::identity: return z;
        case Activation::relu:
            for (double& v : z)
                if (v < 0.0) v = 0.0;
            return z;
        case Activation::softmax: {
            double m = z.empty() ? 0.0 : z[0];
            for (double v : z) m = std::max(m, v);
            double denom = 0.0;
            for (double& v : z) {
                v = std::exp(v - m);
                denom += v;
            }
            for (double& v : z) v /= denom;
            return z;
        }
    }
    return z;
}

std::vector<double> add_bias(std::vector<double> z, const std::optional<std::vector<double>>& bias) {
    if (bias) {
        if (bias->size() != z.size()) throw ShapeError("bias dim mismatch");
        for (size_t i = 0; i < z.size(); ++i) z[i] += (*bias)[i];
    }
    return z;
}

} // namespace

Mat softmax_rows(const Mat& s) {
    Mat a(s.rows(), s.cols());
    for (size_t r = 0; r < s.rows(); ++r) {
        double m = s(r, 0);
        for (size_t c = 1; c < s.cols(); ++c) m = std::max(m, s(r, c));
        double denom = 0.0;
        for (size_t c = 0; c < s.cols(); ++c) {
            a(r, c) = std::exp(s(r, c) - m);
            denom += a(r, c);
        }
        for (size_t c = 0; c < s.cols(); ++c) a(r, c) /= denom;
    }
    return a;
}

Mat forward_reference(const ModelParams& model, const Mat& x) {
    model.validate();
    if (model.kind == ModelKind::attention_head) {
        size_t d = model.embed_dim();
        size_t dh = model.head_dim();
        if (x.rows() != d || x.cols() == 0) throw ShapeError("attention input must be d x T");
        const Mat& wq = model.layers[0].weight;
        const Mat& wk = model.layers[1].weight;
        const Mat& wv = model.layers[2].weight;
        const Layer& out_layer = model.layers[3];

        Mat q = wq * x; // d_h x T
        Mat k = wk * x;
        Mat scores = q.transposed() * k; // T x T
        scores *= 1.0 / std::sqrt(static_cast<double>(dh));
        Mat attn = softmax_rows(scores);
        Mat xs = x * attn.transposed(); // d x T, attention-weighted input
        Mat ctx = wv * xs;              // d_h x T
        Mat out = out_layer.weight * ctx;
        for (size_t t = 0; t < out.cols(); ++t) {
            std::vector<double> col(out.rows());
            for (size_t r = 0; r < out.rows(); ++r) col[r] = out(r, t);
            col = apply_activation(out_layer.act, add_bias(std::move(col), out_layer.bias));
            for (size_t r = 0; r < out.rows(); ++r) out(r, t) = col[r];
        }
        return out;
    }

    if (x.cols() != 1) throw ShapeError("mlp input must be a column vector");
    std::vector<double> a(x.rows());
    for (size_t r = 0; r < x.rows(); ++r) a[r] = x(r, 0);
    a = forward_reference(model, a);
    Mat out(a.size(), 1);
    for (size_t r = 0; r < a.size(); ++r) out(r, 0) = a[r];
    return out;
}

std::vector<double> forward_reference(const ModelParams& model, const std::vector<double>& x) {
    model.validate();
    if (model.kind == ModelKind::attention_head)
        throw ShapeError("attention head takes a token matrix");
    std::vector<double> a = x;
    for (const Layer& layer : model.layers)
        a = apply_activation(layer.act, add_bias(layer.weight.matvec(a), layer.bias));
    return a;
}

// --------------------------- quantized pipeline ----------------------------

std::vector<double> factored_matvec(const Decomposition& d, const std::vector<double>& a,
                                    OpCounters* counters) {
    if (d.empty()) return std::vector<double>(d.rows(), 0.0);
    if (a.size() != d.cols()) throw DimensionMismatch("factored_matvec: dim mismatch");
    size_t m = d.rows(), n = d.cols(), k = d.k;
    std::vector<double> t(k, 0.0);
    for (size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) acc += d.v_k(i, j) * a[i];
        t[j] = d.sigma_k[j] * acc;
    }
    std::vector<double> out(m, 0.0);
    for (size_t j = 0; j < k; ++j) {
        double tj = t[j];
        for (size_t i = 0; i < m; ++i) out[i] += d.u_k(i, j) * tj;
    }
    if (counters) counters->float_madds += k * (m + n) + k;
    return out;
}

Mat factored_matmat(const Decomposition& d, const Mat& x, OpCounters* counters) {
    Mat out(d.rows(), x.cols());
    std::vector<double> col(x.rows());
    for (size_t t = 0; t < x.cols(); ++t) {
        for (size_t r = 0; r < x.rows(); ++r) col[r] = x(r, t);
        std::vector<double> y = factored_matvec(d, col, counters);
        for (size_t r = 0; r < y.size(); ++r) out(r, t) = y[r];
    }
    return out;
}

std::vector<uint64_t> modmat_cols_raw(const RingMatrix& w, const std::vector<uint64_t>& x_flat,
                                      size_t tokens, const RingParams& ring, OpCounters* counters) {
    if (tokens == 0 || x_flat.size() % tokens != 0 || x_flat.size() / tokens != w.cols)
        throw DimensionMismatch("modmat_cols: payload is not tokens x cols");
    std::vector<uint64_t> out(w.rows * tokens);
    std::vector<uint64_t> col(w.cols);
    for (size_t t = 0; t < tokens; ++t) {
        std::copy(x_flat.begin() + t * w.cols, x_flat.begin() + (t + 1) * w.cols, col.begin());
        std::vector<uint64_t> y = modmatvec_raw(w, col, ring);
        std::copy(y.begin(), y.end(), out.begin() + t * w.rows);
    }
    if (counters) counters->int_madds += w.rows * w.cols * tokens;
    return out;
}

FixedVec modmat_cols(const RingMatrix& w, const FixedVec& x_flat, size_t tokens,
                     const RingParams& ring, OpCounters* counters) {
    FixedVec out;
    out.logical_scale = x_flat.logical_scale + 1;
    out.values = modmat_cols_raw(w, x_flat.values, tokens, ring, counters);
    return out;
}

std::vector<double> lift_checked(const FixedVec& z, const RingParams& ring) {
    const double budget = ring.magnitude_budget();
    const double denom = z.logical_scale == 2
                             ? static_cast<double>(ring.scale) * static_cast<double>(ring.scale)
                             : static_cast<double>(ring.scale);
    std::vector<double> out(z.values.size());
    for (size_t i = 0; i < out.size(); ++i) {
        int64_t lifted = centered_lift(z.values[i], ring.modulus_L);
        if (std::fabs(static_cast<double>(lifted)) > budget)
            throw OverflowError("accumulation breached ring headroom");
        out[i] = static_cast<double>(lifted) / denom;
    }
    return out;
}

FixedVec combine_activate_requantize(const FixedVec& z_int, const std::vector<double>* contrib,
                                     const std::optional<std::vector<double>>& bias, Activation act,
                                     const RingParams& ring, OpCounters* counters) {
    if (z_int.logical_scale != 2) throw DomainError("combine: expected scale-2 accumulation");
    std::vector<double> z = lift_checked(z_int, ring);
    if (contrib) {
        if (contrib->size() != z.size()) throw DimensionMismatch("combine: contrib dim mismatch");
        for (size_t i = 0; i < z.size(); ++i) z[i] += (*contrib)[i];
    }
    z = apply_activation(act, add_bias(std::move(z), bias));
    if (counters) counters->elementwise += 3 * z.size();
    return quantize(z, ring);
}

std::vector<double> flatten_cols(const Mat& m) {
    std::vector<double> out(m.rows() * m.cols());
    for (size_t c = 0; c < m.cols(); ++c)
        for (size_t r = 0; r < m.rows(); ++r) out[c * m.rows() + r] = m(r, c);
    return out;
}

Mat unflatten_cols(const std::vector<double>& v, size_t rows, size_t tokens) {
    if (v.size() != rows * tokens) throw DimensionMismatch("unflatten_cols: size mismatch");
    Mat m(rows, tokens);
    for (size_t c = 0; c < tokens; ++c)
        for (size_t r = 0; r < rows; ++r) m(r, c) = v[c * rows + r];
    return m;
}

Mat projection_real(const FixedVec& z_int, size_t rows, size_t tokens, const Decomposition* d,
                    const Mat& grid_in, const RingParams& ring, OpCounters* counters) {
    Mat real = unflatten_cols(lift_checked(z_int, ring), rows, tokens);
    if (d && !d->empty()) real = real + factored_matmat(*d, grid_in, counters);
    return real;
}

Mat attention_weighted_input(const Mat& q_real, const Mat& k_real, const Mat& x_grid,
                             size_t head_dim, OpCounters* counters) {
    Mat scores = q_real.transposed() * k_real;
    scores *= 1.0 / std::sqrt(static_cast<double>(head_dim));
    Mat attn = softmax_rows(scores);
    Mat xs = x_grid * attn.transposed();
    if (counters) {
        size_t t = q_real.cols();
        counters->float_madds += t * t * q_real.rows() + x_grid.rows() * t * t;
        counters->elementwise += 3 * t * t; // softmax exp/normalize
    }
    return xs;
}

FixedVec combine_tokens(const FixedVec& z_flat, const std::vector<double>* contrib_flat,
                        const std::optional<std::vector<double>>& bias, Activation act,
                        size_t rows, size_t tokens, const RingParams& ring, OpCounters* counters) {
    if (z_flat.values.size() != rows * tokens)
        throw DimensionMismatch("combine_tokens: payload is not rows x tokens");
    FixedVec out;
    out.logical_scale = 1;
    for (size_t t = 0; t < tokens; ++t) {
        FixedVec z_col;
        z_col.logical_scale = 2;
        z_col.values.assign(z_flat.values.begin() + t * rows, z_flat.values.begin() + (t + 1) * rows);
        std::vector<double> contrib_col;
        std::vector<double>* col_ptr = nullptr;
        if (contrib_flat) {
            contrib_col.assign(contrib_flat->begin() + static_cast<long>(t * rows),
                               contrib_flat->begin() + static_cast<long>((t + 1) * rows));
            col_ptr = &contrib_col;
        }
        FixedVec col = combine_activate_requantize(z_col, col_ptr, bias, act, ring, counters);
        out.values.insert(out.values.end(), col.values.begin(), col.values.end());
    }
    return out;
}

FixedVec dense_quantized_layer(const RingMatrix& w_int, const FixedVec& a,
                               const std::optional<std::vector<double>>& bias, Activation act,
                               const RingParams& ring, OpCounters* counters) {
    FixedVec z = modmatvec(w_int, a, ring);
    if (counters) counters->int_madds += w_int.rows * w_int.cols;
    return combine_activate_requantize(z, nullptr, bias, act, ring, counters);
}

namespace {

const Decomposition* decomp_for(const ModelDecomposition* decomp, size_t layer) {
    if (!decomp) return nullptr;
    auto it = decomp->split_layers.find(layer);
    return it == decomp->split_layers.end() ? nullptr : &it->second;
}

/// Integer weight David holds for a layer: the residual when split, the full
/// matrix otherwise. Both parties derive it from this single helper so the
/// quantized matrices are bit-identical.
RingMatrix david_integer_weight(const Layer& layer, const Decomposition* d, const RingParams& ring) {
    const Mat& w = d ? d->david_part : layer.weight;
    return quantize_matrix(w.data(), w.rows(), w.cols(), ring);
}

} // namespace

FixedVec forward_reference_quantized(const ModelParams& model, const Mat& x, const RingParams& ring,
                                     const ModelDecomposition* decomp, OpCounters* counters) {
    model.validate();

    if (model.kind == ModelKind::attention_head) {
        size_t tokens = x.cols();
        FixedVec x_int = quantize(flatten_cols(x), ring);
        Mat x_grid = unflatten_cols(dequantize(x_int, ring), x.rows(), tokens);

        auto projection = [&](size_t idx, const FixedVec& in_int, const Mat& in_grid) {
            const Layer& layer = model.layers[idx];
            const Decomposition* d = decomp_for(decomp, idx);
            RingMatrix w_int = david_integer_weight(layer, d, ring);
            FixedVec z = modmat_cols(w_int, in_int, tokens, ring, counters);
            return projection_real(z, layer.weight.rows(), tokens, d, in_grid, ring, counters);
        };
        Mat q = projection(0, x_int, x_grid);
        Mat k = projection(1, x_int, x_grid);

        Mat xs = attention_weighted_input(q, k, x_grid, model.head_dim(), counters);
        FixedVec xs_int = quantize(flatten_cols(xs), ring);
        Mat xs_grid = unflatten_cols(dequantize(xs_int, ring), xs.rows(), tokens);

        Mat ctx = projection(2, xs_int, xs_grid);
        FixedVec ctx_int = quantize(flatten_cols(ctx), ring);
        Mat ctx_grid = unflatten_cols(dequantize(ctx_int, ring), ctx.rows(), tokens);

        const Layer& o_layer = model.layers[3];
        const Decomposition* doo = decomp_for(decomp, 3);
        RingMatrix wo_int = david_integer_weight(o_layer, doo, ring);
        FixedVec zo = modmat_cols(wo_int, ctx_int, tokens, ring, counters);
        std::vector<double> contrib_flat;
        std::vector<double>* contrib_ptr = nullptr;
        if (doo && !doo->empty()) {
            contrib_flat = flatten_cols(factored_matmat(*doo, ctx_grid, counters));
            contrib_ptr = &contrib_flat;
        }
        return combine_tokens(zo, contrib_ptr, o_layer.bias, o_layer.act, o_layer.weight.rows(),
                              tokens, ring, counters);
    }

    if (x.cols() != 1) throw ShapeError("mlp input must be a column vector");
    std::vector<double> x_real(x.rows());
    for (size_t r = 0; r < x.rows(); ++r) x_real[r] = x(r, 0);

    FixedVec a = quantize(x_real, ring);
    for (size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        const Decomposition* d = decomp_for(decomp, i);
        RingMatrix w_int = david_integer_weight(layer, d, ring);
        if (d) {
            FixedVec z = modmatvec(w_int, a, ring);
            if (counters) counters->int_madds += w_int.rows * w_int.cols;
            std::vector<double> contrib = factored_matvec(*d, dequantize(a, ring), counters);
            a = combine_activate_requantize(z, &contrib, layer.bias, layer.act, ring, counters);
        } else {
            a = dense_quantized_layer(w_int, a, layer.bias, layer.act, ring, counters);
        }
    }
    return a;
}

double validate_headroom(const ModelParams& model, const RingParams& ring, double max_abs_input) {
    model.validate();
    const double budget = ring.magnitude_budget();
    const double scale = static_cast<double>(ring.scale);
    double amax = max_abs_input;

    auto check_layer = [&](const Layer& layer, double in_bound) {
        // integer accumulation bound: sum_j |w_int| * |a_int| <= scale^2 * rowl1(W) * amax
        // (+1 slack per entry for rounding)
        double row_l1 = layer.weight.max_row_l1() + 1.0 / scale * layer.weight.cols();
        double acc = scale * scale * row_l1 * (in_bound + 1.0 / scale);
        if (acc > budget)
            throw OverflowError("headroom violated at layer " + to_string(layer.id) +
                                ": accumulation bound " + std::to_string(acc) + " > budget " +
                                std::to_string(budget));
        double out_bound = row_l1 * (in_bound + 1.0 / scale);
        if (layer.bias) {
            double bmax = 0.0;
            for (double b : *layer.bias) bmax = std::max(bmax, std::fabs(b));
            out_bound += bmax;
        }
        if (layer.act == Activation::softmax) out_bound = 1.0;
        if (layer.act == Activation::relu) out_bound = std::max(out_bound, 0.0);
        return out_bound;
    };

    if (model.kind == ModelKind::attention_head) {
        double b = 0.0;
        for (size_t i : {size_t{0}, size_t{1}}) b = std::max(b, check_layer(model.layers[i], amax));
        // softmax mixes tokens with convex weights, so xs is bounded by amax
        double ctx = check_layer(model.layers[2], amax);
        return check_layer(model.layers[3], ctx);
    }
    for (const Layer& layer : model.layers) amax = check_layer(layer, amax);
    return amax;
}

} // namespace slip
