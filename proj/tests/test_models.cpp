#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "slip/csprng.hpp"
#include "slip/errors.hpp"
#include "slip/models.hpp"

using namespace slip;

namespace {

double uniform_pm1(ChaChaStream& rng) {
    return 2.0 * (static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53) - 1.0;
}

Mat random_mat(ChaChaStream& rng, size_t rows, size_t cols, double amp = 1.0) {
    Mat m(rows, cols);
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) m(r, c) = amp * uniform_pm1(rng);
    return m;
}

std::vector<double> random_vec(ChaChaStream& rng, size_t n, double amp = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = amp * uniform_pm1(rng);
    return v;
}

/// Direct convolution, independent of conv_to_fc.
std::vector<double> direct_conv(const ConvSpec& spec, const std::vector<double>& input,
                                const std::vector<double>& kernel) {
    std::vector<double> out(spec.out_h() * spec.out_w() * spec.filters, 0.0);
    for (size_t i = 0; i < spec.out_h(); ++i)
        for (size_t j = 0; j < spec.out_w(); ++j)
            for (size_t n = 0; n < spec.filters; ++n) {
                double acc = 0.0;
                for (size_t u = 0; u < spec.k_h; ++u)
                    for (size_t v = 0; v < spec.k_w; ++v)
                        for (size_t c = 0; c < spec.channels; ++c)
                            acc += input[input_index(spec, i + u, j + v, c)] *
                                   kernel[kernel_index(spec, u, v, c, n)];
                out[(i * spec.out_w() + j) * spec.filters + n] = acc;
            }
    return out;
}

ModelParams two_layer_toy(uint64_t seed, double amp = 0.5, double bias_amp = 0.2) {
    ChaChaStream rng(seed, 0);
    ModelParams model;
    model.kind = ModelKind::mlp;
    Layer l0;
    l0.weight = random_mat(rng, 6, 4, amp);
    l0.bias = random_vec(rng, 6, bias_amp);
    l0.act = Activation::relu;
    l0.id = LayerId{0, LayerType::mlp_fc};
    Layer l1;
    l1.weight = random_mat(rng, 3, 6, amp);
    l1.act = Activation::identity;
    l1.id = LayerId{1, LayerType::mlp_fc};
    model.layers = {l0, l1};
    return model;
}

ModelParams toy_attention(uint64_t seed, size_t d, size_t dh) {
    ChaChaStream rng(seed, 1);
    ModelParams model;
    model.kind = ModelKind::attention_head;
    LayerType types[4] = {LayerType::attn_q, LayerType::attn_k, LayerType::attn_v,
                          LayerType::attn_o};
    for (int i = 0; i < 4; ++i) {
        Layer l;
        l.weight = (i < 3) ? random_mat(rng, dh, d, 0.4) : random_mat(rng, d, dh, 0.4);
        l.id = LayerId{0, types[i]};
        model.layers.push_back(std::move(l));
    }
    return model;
}

} // namespace

TEST_CASE("forward_reference: identity network returns the input") {
    ModelParams model;
    model.kind = ModelKind::mlp;
    Layer l;
    l.weight = Mat::identity(3);
    l.act = Activation::identity;
    l.id = LayerId{0, LayerType::mlp_fc};
    model.layers = {l};
    std::vector<double> x = {1.5, -2.0, 0.25};
    CHECK(forward_reference(model, x) == x);
}

TEST_CASE("forward_reference: single relu layer hand evaluation") {
    ModelParams model;
    model.kind = ModelKind::mlp;
    Layer l;
    l.weight = Mat(1, 2, {1.0, -1.0});
    l.act = Activation::relu;
    l.id = LayerId{0, LayerType::mlp_fc};
    model.layers = {l};
    auto y = forward_reference(model, std::vector<double>{2.0, 3.0});
    REQUIRE(y.size() == 1);
    CHECK(y[0] == 0.0); // relu(2-3)
}

TEST_CASE("forward_reference: softmax layer sums to one") {
    ModelParams model;
    model.kind = ModelKind::mlp;
    Layer l;
    l.weight = Mat::identity(4);
    l.act = Activation::softmax;
    l.id = LayerId{0, LayerType::mlp_fc};
    model.layers = {l};
    auto y = forward_reference(model, std::vector<double>{0.1, 1.0, -2.0, 0.5});
    double sum = 0.0;
    for (double v : y) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("attention reference: identity projections, single token") {
    size_t d = 4;
    ModelParams model;
    model.kind = ModelKind::attention_head;
    LayerType types[4] = {LayerType::attn_q, LayerType::attn_k, LayerType::attn_v,
                          LayerType::attn_o};
    ChaChaStream rng(77, 0);
    for (int i = 0; i < 4; ++i) {
        Layer l;
        l.weight = (i < 3) ? Mat::identity(d) : random_mat(rng, d, d, 0.5);
        l.id = LayerId{0, types[i]};
        model.layers.push_back(std::move(l));
    }
    Mat x(d, 1, {0.3, -0.7, 1.1, 0.2});
    Mat out = forward_reference(model, x);
    // one token: softmax of the single score is 1, context = x, output = W_o x
    std::vector<double> xv = {0.3, -0.7, 1.1, 0.2};
    auto want = model.layers[3].weight.matvec(xv);
    for (size_t r = 0; r < d; ++r) CHECK(out(r, 0) == doctest::Approx(want[r]).epsilon(1e-12));
}

TEST_CASE("attention reference: softmax rows sum to 1 and token permutation equivariance") {
    auto model = toy_attention(3, 6, 5);
    ChaChaStream rng(4, 0);
    size_t T = 5;
    Mat x = random_mat(rng, 6, T, 0.8);

    Mat q = model.layers[0].weight * x;
    Mat k = model.layers[1].weight * x;
    Mat scores = q.transposed() * k;
    scores *= 1.0 / std::sqrt(5.0);
    Mat attn = softmax_rows(scores);
    for (size_t r = 0; r < T; ++r) {
        double sum = 0.0;
        for (size_t c = 0; c < T; ++c) sum += attn(r, c);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }

    Mat out = forward_reference(model, x);
    // permute tokens, run, un-permute: identical for a single head with no
    // positional terms
    std::vector<size_t> perm = {3, 0, 4, 1, 2};
    Mat xp(x.rows(), T);
    for (size_t t = 0; t < T; ++t)
        for (size_t r = 0; r < x.rows(); ++r) xp(r, t) = x(r, perm[t]);
    Mat outp = forward_reference(model, xp);
    for (size_t t = 0; t < T; ++t)
        for (size_t r = 0; r < out.rows(); ++r)
            CHECK(outp(r, t) == doctest::Approx(out(r, perm[t])).epsilon(1e-10));
}

TEST_CASE("conv_to_fc: 1x1 identity kernel gives the identity matrix") {
    ConvSpec spec{3, 3, 1, 1, 1, 1};
    auto lm = conv_to_fc(spec, {1.0});
    REQUIRE(lm.rows() == 9);
    REQUIRE(lm.cols() == 9);
    for (size_t r = 0; r < 9; ++r)
        for (size_t c = 0; c < 9; ++c) CHECK(lm.weight(r, c) == (r == c ? 1.0 : 0.0));
}

TEST_CASE("conv_to_fc: all-ones 2x2 kernel on 2x2 input sums the input") {
    ConvSpec spec{2, 2, 1, 2, 2, 1};
    auto lm = conv_to_fc(spec, {1.0, 1.0, 1.0, 1.0});
    REQUIRE(lm.rows() == 1);
    REQUIRE(lm.cols() == 4);
    for (size_t c = 0; c < 4; ++c) CHECK(lm.weight(0, c) == 1.0);
}

TEST_CASE("conv_to_fc equals direct convolution, 5x5x2 input with 3x3x2x4 kernel") {
    ConvSpec spec{5, 5, 2, 3, 3, 4};
    ChaChaStream rng(10, 0);
    auto kernel = random_vec(rng, 3 * 3 * 2 * 4);
    auto input = random_vec(rng, 5 * 5 * 2);
    auto lm = conv_to_fc(spec, kernel);
    auto via_matrix = lm.weight.matvec(input);
    auto direct = direct_conv(spec, input, kernel);
    REQUIRE(via_matrix.size() == direct.size());
    for (size_t i = 0; i < direct.size(); ++i)
        CHECK(std::fabs(via_matrix[i] - direct[i]) <= 1e-12);
}

TEST_CASE("conv_to_fc equivalence property: 200 random small specs") {
    ChaChaStream rng(11, 0);
    for (int trial = 0; trial < 200; ++trial) {
        ConvSpec spec;
        spec.in_h = 1 + rng.next_below(8);
        spec.in_w = 1 + rng.next_below(8);
        spec.channels = 1 + rng.next_below(3);
        spec.k_h = 1 + rng.next_below(spec.in_h);
        spec.k_w = 1 + rng.next_below(spec.in_w);
        spec.filters = 1 + rng.next_below(3);
        auto kernel = random_vec(rng, spec.k_h * spec.k_w * spec.channels * spec.filters);
        auto input = random_vec(rng, spec.in_h * spec.in_w * spec.channels);
        auto lm = conv_to_fc(spec, kernel);
        auto via_matrix = lm.weight.matvec(input);
        auto direct = direct_conv(spec, input, kernel);
        REQUIRE(via_matrix.size() == direct.size());
        for (size_t i = 0; i < direct.size(); ++i)
            REQUIRE(std::fabs(via_matrix[i] - direct[i]) <= 1e-12);
    }
}

TEST_CASE("quantized reference: zero input gives zero output") {
    auto model = two_layer_toy(21);
    model.layers[0].bias.reset(); // keep the zero case exactly zero
    RingParams ring(10007, 100);
    Mat x(4, 1);
    auto out = forward_reference_quantized(model, x, ring);
    for (uint64_t v : out.values) CHECK(v == 0);
}

TEST_CASE("quantized reference within the interval-arithmetic bound, L=10007 scale=100") {
    // small modulus forces a tiny model so the accumulation fits the ring
    auto model = two_layer_toy(22, 0.1, 0.02);
    RingParams ring(10007, 100);
    validate_headroom(model, ring, 0.25);
    ChaChaStream rng(23, 0);

    // propagate the rounding-error bound layer by layer
    auto bound_for = [&](double amax_in) {
        double s = 100.0;
        double err = 0.5 / s; // input quantization
        double amax = amax_in;
        for (const Layer& l : model.layers) {
            double row_l1 = l.weight.max_row_l1();
            double n = static_cast<double>(l.weight.cols());
            double acc_err = n * (0.5 / s) * (amax + 0.5 / s) + row_l1 * err;
            err = acc_err + 0.5 / s; // requantization after activation
            amax = row_l1 * amax + 0.02;
        }
        return err;
    };

    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x = random_vec(rng, 4, 0.25);
        auto exact = forward_reference(model, x);
        Mat xm(4, 1, x);
        auto q = forward_reference_quantized(model, xm, ring);
        auto approx = dequantize(q, ring);
        for (size_t i = 0; i < exact.size(); ++i)
            worst = std::max(worst, std::fabs(exact[i] - approx[i]));
    }
    CHECK(worst <= bound_for(0.25));
    CHECK(worst > 0.0);
}

TEST_CASE("quantized reference converges as the scale grows") {
    auto model = two_layer_toy(26);
    ChaChaStream rng(126, 0);
    std::vector<std::vector<double>> inputs;
    for (int i = 0; i < 500; ++i) inputs.push_back(random_vec(rng, 4, 1.0));

    auto max_dev = [&](uint64_t scale) {
        RingParams ring(kDefaultModulus, scale);
        double worst = 0.0;
        for (const auto& x : inputs) {
            auto exact = forward_reference(model, x);
            auto q = forward_reference_quantized(model, Mat(4, 1, x), ring);
            auto approx = dequantize(q, ring);
            for (size_t i = 0; i < exact.size(); ++i)
                worst = std::max(worst, std::fabs(exact[i] - approx[i]));
        }
        return worst;
    };

    // The deviation bound is C/scale: each doubling should roughly halve the
    // observed max. The realized max fluctuates around that trend, so assert
    // a weak per-step decay plus the full geometric factor over the ladder.
    std::vector<double> devs;
    for (int p = 8; p <= 14; ++p) devs.push_back(max_dev(uint64_t{1} << p));
    for (size_t i = 1; i < devs.size(); ++i) CHECK(devs[i] <= 0.75 * devs[i - 1]);
    size_t dyads = devs.size() - 1;
    CHECK(devs.back() <= devs.front() / std::ldexp(1.0, static_cast<int>(dyads - 1)));
}

TEST_CASE("validate_headroom accepts a sane configuration and rejects a tiny modulus") {
    auto model = two_layer_toy(27);
    CHECK_NOTHROW(validate_headroom(model, RingParams(kDefaultModulus, 1u << 16), 1.0));
    CHECK_THROWS_AS(validate_headroom(model, RingParams(10007, 1000), 1.0), OverflowError);
}

TEST_CASE("model validation catches shape problems") {
    ModelParams empty;
    CHECK_THROWS_AS(empty.validate(), ShapeError);

    ModelParams bad;
    bad.kind = ModelKind::mlp;
    Layer a;
    a.weight = Mat(3, 2, {1, 0, 0, 1, 1, 1});
    a.id = LayerId{0, LayerType::mlp_fc};
    Layer b;
    b.weight = Mat(2, 2, {1, 0, 0, 1});
    b.id = LayerId{1, LayerType::mlp_fc};
    bad.layers = {a, b}; // 3 rows then 2 cols: does not compose
    CHECK_THROWS_AS(bad.validate(), ShapeError);

    auto attn = toy_attention(30, 4, 4);
    attn.layers.pop_back();
    CHECK_THROWS_AS(attn.validate(), ShapeError);
}
