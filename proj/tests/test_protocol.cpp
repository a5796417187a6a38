#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <vector>

#include "slip/errors.hpp"
#include "slip/presets.hpp"
#include "slip/protocol.hpp"
#include "slip/redteam.hpp"

using namespace slip;

namespace {

RingParams test_ring() { return RingParams(kDefaultModulus, 1u << 16); }

struct Setup {
    ModelParams model;
    ModelDecomposition decomp;
    CharlieState charlie;
    DavidState david;
};

Setup make_mlp_setup(uint64_t seed, size_t n_layers, size_t dim,
                     const std::set<int32_t>& split_blocks, size_t k,
                     const RingParams& ring = test_ring()) {
    Setup s;
    s.model = make_toy_mlp(seed, n_layers, dim);
    SplitPlan plan;
    for (int32_t b : split_blocks) plan.triplets.push_back({b, LayerType::mlp_fc, k});
    s.decomp = plan_decomposition(s.model, plan);
    auto [c, d] = build_party_states(s.model, s.decomp, ring, /*mask_seed=*/seed ^ 0xabcd, 0, 1);
    s.charlie = std::move(c);
    s.david = std::move(d);
    return s;
}

FixedVec quantize_input(const std::vector<double>& x, const RingParams& ring) {
    return quantize(x, ring);
}

std::vector<double> ramp_input(size_t dim) {
    std::vector<double> x(dim);
    for (size_t i = 0; i < dim; ++i) x[i] = 0.1 * static_cast<double>(i % 7) - 0.3;
    return x;
}

} // namespace

TEST_CASE("precompute budget counts pool pairs") {
    auto s = make_mlp_setup(1, 3, 6, {1}, 2);
    CHECK(s.charlie.mask_pool.empty());

    precompute(s.charlie, 0);
    CHECK(s.charlie.mask_pool.empty());

    precompute(s.charlie, 3);
    CHECK(s.charlie.mask_pool.size() == 3);
    CHECK(s.charlie.cancel_pool.size() == 3);
    for (const auto& [key, r] : s.charlie.mask_pool) {
        CHECK(key.layer == 1);
        CHECK(r.values.size() == 6);
    }
    // replenishment continues from the high-water mark
    precompute(s.charlie, 2);
    CHECK(s.charlie.mask_pool.size() == 5);
    CHECK(s.charlie.next_inference_id == 5);
}

TEST_CASE("precompute for an engaged attention head draws q/k/v pairs") {
    auto model = make_toy_attention(7, 6, 4);
    SplitPlan plan;
    plan.triplets.push_back({0, LayerType::attn_q, 2});
    auto decomp = plan_decomposition(model, plan);
    auto [charlie, david] = build_party_states(model, decomp, test_ring(), 9, 0, /*tokens=*/3);
    CHECK(charlie.head_engaged);
    precompute(charlie, 1);
    CHECK(charlie.mask_pool.size() == 3); // q, k, v paths
    std::set<Path> paths;
    for (const auto& [key, r] : charlie.mask_pool) {
        paths.insert(key.path);
        CHECK(r.values.size() == 6 * 3); // d x tokens
    }
    CHECK(paths == std::set<Path>{Path::q, Path::k, Path::v});
}

TEST_CASE("cancellation pool entries equal W_d r for their pads") {
    auto s = make_mlp_setup(2, 2, 5, {0, 1}, 2);
    precompute(s.charlie, 2);
    for (const auto& [key, c] : s.charlie.cancel_pool) {
        const MaskVec& r = s.charlie.mask_pool.at(key);
        auto want = modmatvec_raw(s.charlie.layers.at(key.layer).w_d_int, r.values, s.charlie.ring);
        CHECK(c.values == want);
    }
}

TEST_CASE("secure_layer_step: degenerate split (zero factored part) matches David-only compute") {
    auto s = make_mlp_setup(3, 1, 6, {0}, 2);
    // zero out the factored part: W_C = 0, residual = full weight
    CharlieLayer& cl = s.charlie.layers.at(0);
    cl.decomp = Decomposition{};
    const Mat& w = s.model.layers[0].weight;
    RingMatrix full = quantize_matrix(w.data(), w.rows(), w.cols(), s.charlie.ring);
    cl.w_d_int = full;
    s.david.layers[0].w_int = full;

    precompute(s.charlie, 1);
    FixedVec a = quantize_input(ramp_input(6), s.charlie.ring);
    FixedVec via_step = secure_layer_step(s.charlie, s.david, a, 0, 0);

    FixedVec direct = dense_quantized_layer(full, a, s.model.layers[0].bias,
                                            s.model.layers[0].act, s.charlie.ring);
    CHECK(via_step.values == direct.values);
}

TEST_CASE("secure_layer_step consumes its pool pair exactly once") {
    auto s = make_mlp_setup(4, 1, 6, {0}, 2);
    precompute(s.charlie, 1);
    FixedVec a = quantize_input(ramp_input(6), s.charlie.ring);
    CHECK_NOTHROW(secure_layer_step(s.charlie, s.david, a, 0, 0));
    CHECK(s.charlie.mask_pool.empty());
    CHECK(s.charlie.cancel_pool.empty());
    CHECK_THROWS_AS(secure_layer_step(s.charlie, s.david, a, 0, 0), MaskExhaustedError);
}

TEST_CASE("insecure_layer_step produces identical numbers to the secure step") {
    auto s1 = make_mlp_setup(5, 1, 6, {0}, 3);
    auto s2 = make_mlp_setup(5, 1, 6, {0}, 3);
    precompute(s1.charlie, 1);
    FixedVec a = quantize_input(ramp_input(6), s1.charlie.ring);
    FixedVec secure = secure_layer_step(s1.charlie, s1.david, a, 0, 0);
    FixedVec insecure = insecure_layer_step(s2.charlie, s2.david, a, 0);
    CHECK(secure.values == insecure.values);
}

TEST_CASE("hand-traced 2x2 secure exchange at L=97") {
    // W_int = [[2,3],[1,0]] over L=97, input ints [4,5], pad [90,1]
    RingParams ring(97, 1);
    RingMatrix w;
    w.rows = w.cols = 2;
    w.values = {2, 3, 1, 0};

    FixedVec a;
    a.values = {4, 5};
    MaskVec r;
    r.values = {90, 1};

    FixedVec a_tilde = mask(a, r, ring);
    CHECK(a_tilde.values == std::vector<uint64_t>{94, 6});
    FixedVec reply = modmatvec(w, a_tilde, ring);
    CHECK(reply.values == std::vector<uint64_t>{(2 * 94 + 3 * 6) % 97, 94 % 97});
    CancellationMask c;
    c.values = modmatvec_raw(w, r.values, ring);
    CHECK(c.values == std::vector<uint64_t>{(2 * 90 + 3 * 1) % 97, 90 % 97});
    FixedVec z = unmask(reply, c, ring);
    CHECK(z.values == std::vector<uint64_t>{23, 4}); // [2*4+3*5, 4]
}

TEST_CASE("run_mlp_hybrid equals the quantized reference bit-exactly across plans") {
    for (uint64_t seed : {10ull, 11ull, 12ull}) {
        for (auto split_blocks : std::vector<std::set<int32_t>>{
                 {}, {0}, {2}, {0, 1, 2}, {1, 2}, {0, 2}}) {
            auto s = make_mlp_setup(seed, 3, 8, split_blocks, 2);
            CharlieEndpoint charlie(s.charlie);
            DavidEndpoint david(s.david);
            precompute(charlie.state(), 4);

            for (int trial = 0; trial < 4; ++trial) {
                std::vector<double> x = ramp_input(8);
                for (auto& v : x) v += 0.01 * trial;
                FixedVec x_int = quantize_input(x, test_ring());
                FixedVec got = run_mlp_hybrid(charlie, david, x_int,
                                              static_cast<uint64_t>(trial));
                FixedVec want = forward_reference_quantized(s.model, Mat(8, 1, x), test_ring(),
                                                            &s.decomp);
                REQUIRE(got.values == want.values);
                REQUIRE(charlie.last_output()->values == want.values);
            }
        }
    }
}

TEST_CASE("re-running an inference id raises MaskExhaustedError, never reuses a pad") {
    auto s = make_mlp_setup(13, 3, 8, {1}, 2);
    CharlieEndpoint charlie(s.charlie);
    DavidEndpoint david(s.david);
    precompute(charlie.state(), 1);
    FixedVec x_int = quantize_input(ramp_input(8), test_ring());
    CHECK_NOTHROW(run_mlp_hybrid(charlie, david, x_int, 0));
    CHECK_THROWS_AS(run_mlp_hybrid(charlie, david, x_int, 0), MaskExhaustedError);
}

TEST_CASE("message schedule matches the plan-derived golden sequence") {
    // 5 layers, middle ones split: the canonical boundary pattern
    auto s = make_mlp_setup(14, 5, 6, {1, 3}, 2);
    CharlieEndpoint charlie(s.charlie);
    DavidEndpoint david(s.david);
    precompute(charlie.state(), 1);

    Transcript t;
    FixedVec x_int = quantize_input(ramp_input(6), test_ring());
    run_mlp_hybrid(charlie, david, x_int, 0, &t);

    using P = std::pair<Direction, MsgType>;
    const auto C = Direction::charlie_to_david;
    const auto D = Direction::david_to_charlie;
    std::vector<P> want = {
        {D, MsgType::inference_input},
        {D, MsgType::plain_activation},   // handoff into split layer 1
        {C, MsgType::masked_activation},  {D, MsgType::masked_partial},
        {C, MsgType::plain_activation},   // back to David for layer 2
        {D, MsgType::plain_activation},   // handoff into split layer 3
        {C, MsgType::masked_activation},  {D, MsgType::masked_partial},
        {C, MsgType::plain_activation},   // back to David for layer 4
        {D, MsgType::inference_output},
    };
    REQUIRE(t.entries.size() == want.size());
    for (size_t i = 0; i < want.size(); ++i) {
        CHECK(t.entries[i].first == want[i].first);
        CHECK(t.entries[i].second.type == want[i].second);
    }
    auto derived = expected_schedule(charlie.state().topology());
    REQUIRE(derived.size() == t.entries.size());
    for (size_t i = 0; i < derived.size(); ++i) {
        CHECK(derived[i].first == t.entries[i].first);
        CHECK(derived[i].second == t.entries[i].second.type);
    }
}

TEST_CASE("all layers split: no plain handoffs except final delivery") {
    auto s = make_mlp_setup(15, 4, 6, {0, 1, 2, 3}, 2);
    CharlieEndpoint charlie(s.charlie);
    DavidEndpoint david(s.david);
    precompute(charlie.state(), 1);
    Transcript t;
    run_mlp_hybrid(charlie, david, quantize_input(ramp_input(6), test_ring()), 0, &t);
    size_t plain = 0, masked = 0;
    for (auto& [dir, msg] : t.entries) {
        if (msg.type == MsgType::plain_activation) ++plain;
        if (msg.type == MsgType::masked_activation) ++masked;
    }
    CHECK(plain == 0);
    CHECK(masked == 4);
    CHECK(t.entries.back().second.type == MsgType::inference_output);
    CHECK(t.entries.back().first == Direction::charlie_to_david);
}

TEST_CASE("all layers offloaded: zero masked messages, David computes alone") {
    auto s = make_mlp_setup(16, 4, 6, {}, 2);
    CharlieEndpoint charlie(s.charlie);
    DavidEndpoint david(s.david);
    Transcript t;
    FixedVec x_int = quantize_input(ramp_input(6), test_ring());
    FixedVec got = run_mlp_hybrid(charlie, david, x_int, 0, &t);
    CHECK(t.entries.size() == 2); // input + output
    CHECK(t.masked_activation_coords().empty());
    FixedVec want = forward_reference_quantized(s.model, Mat(6, 1, ramp_input(6)), test_ring(),
                                                &s.decomp);
    CHECK(got.values == want.values);
    CHECK(charlie.last_output()->values == want.values); // both parties hold the output
}

TEST_CASE("insecure mode exposes the plaintext activation in its transcript") {
    auto s = make_mlp_setup(17, 1, 6, {0}, 2);
    CharlieEndpoint charlie(s.charlie, ProtocolMode::insecure);
    DavidEndpoint david(s.david, ProtocolMode::insecure);
    Transcript t;
    FixedVec x_int = quantize_input(ramp_input(6), test_ring());
    run_mlp_hybrid(charlie, david, x_int, 0, &t);
    bool found = false;
    for (auto& [dir, msg] : t.entries)
        if (msg.type == MsgType::masked_activation && msg.payload.values == x_int.values)
            found = true;
    CHECK(found); // a_prev verbatim on the wire
}

TEST_CASE("attention hybrid equals the quantized reference bit-exactly") {
    for (uint64_t seed : {20ull, 21ull}) {
        struct PlanCase {
            std::vector<LayerType> split;
        };
        for (auto& pc : std::vector<PlanCase>{{{}},
                                              {{LayerType::attn_q}},
                                              {{LayerType::attn_q, LayerType::attn_k,
                                                LayerType::attn_v}},
                                              {{LayerType::attn_v, LayerType::attn_o}},
                                              {{LayerType::attn_o}},
                                              {{LayerType::attn_q, LayerType::attn_k,
                                                LayerType::attn_v, LayerType::attn_o}}}) {
            auto model = make_toy_attention(seed, 8, 6);
            SplitPlan plan;
            for (LayerType t : pc.split) plan.triplets.push_back({0, t, 2});
            auto decomp = plan_decomposition(model, plan);
            const size_t tokens = 4;
            auto [cs, ds] =
                build_party_states(model, decomp, test_ring(), seed * 13 + 1, 0, tokens);
            CharlieEndpoint charlie(std::move(cs));
            DavidEndpoint david(std::move(ds));
            precompute(charlie.state(), 2);

            Mat x(8, tokens);
            for (size_t r = 0; r < 8; ++r)
                for (size_t c = 0; c < tokens; ++c)
                    x(r, c) = 0.05 * static_cast<double>(r) - 0.1 * static_cast<double>(c) + 0.02;
            FixedVec x_int = quantize(flatten_cols(x), test_ring());

            FixedVec got = run_attention_hybrid(charlie, david, x_int, 0);
            FixedVec want = forward_reference_quantized(model, x, test_ring(), &decomp);
            REQUIRE(got.values == want.values);

            // and the float reference is within quantization tolerance
            Mat ref = forward_reference(model, x);
            auto approx = dequantize(got, test_ring());
            Mat approx_m = unflatten_cols(approx, 8, tokens);
            for (size_t r = 0; r < 8; ++r)
                for (size_t c = 0; c < tokens; ++c)
                    REQUIRE(std::fabs(approx_m(r, c) - ref(r, c)) < 1e-3);
        }
    }
}

TEST_CASE("single token, identity projections: hybrid equals the float reference") {
    const size_t d = 4;
    ModelParams model;
    model.kind = ModelKind::attention_head;
    const LayerType types[4] = {LayerType::attn_q, LayerType::attn_k, LayerType::attn_v,
                                LayerType::attn_o};
    ChaChaStream rng(99, 0);
    for (int i = 0; i < 4; ++i) {
        Layer l;
        l.weight = (i < 3) ? Mat::identity(d) : random_matrix(rng, d, d, 0.3);
        l.id = LayerId{0, types[i]};
        model.layers.push_back(std::move(l));
    }
    SplitPlan plan;
    plan.triplets.push_back({0, LayerType::attn_q, 2});
    auto decomp = plan_decomposition(model, plan);
    auto [cs, ds] = build_party_states(model, decomp, test_ring(), 5, 0, /*tokens=*/1);
    CharlieEndpoint charlie(std::move(cs));
    DavidEndpoint david(std::move(ds));
    precompute(charlie.state(), 1);

    Mat x(d, 1, {0.3, -0.7, 1.1, 0.2});
    FixedVec out = run_attention_hybrid(charlie, david, quantize(flatten_cols(x), test_ring()), 0);
    Mat ref = forward_reference(model, x); // softmax of one score is 1: W_o x
    auto got = dequantize(out, test_ring());
    for (size_t r = 0; r < d; ++r) CHECK(std::fabs(got[r] - ref(r, 0)) < 1e-3);
}

TEST_CASE("David's split-layer state holds the residual, never the full weight") {
    auto s = make_mlp_setup(33, 2, 6, {0}, 2);
    const Mat& w = s.model.layers[0].weight;
    RingMatrix full = quantize_matrix(w.data(), w.rows(), w.cols(), s.charlie.ring);
    CHECK(s.david.layers[0].split);
    CHECK(s.david.layers[0].w_int.values != full.values);
    CHECK(!s.david.layers[0].bias.has_value()); // split-layer bias stays with Charlie
    RingMatrix residual = quantize_matrix(s.decomp.split_layers.at(0).david_part.data(), w.rows(),
                                          w.cols(), s.charlie.ring);
    CHECK(s.david.layers[0].w_int.values == residual.values);
}

TEST_CASE("degenerate attention split equals the fully offloaded head") {
    auto model = make_toy_attention(23, 6, 6);
    const size_t tokens = 3;
    RingParams ring = test_ring();

    // engaged head whose factored parts are all zero
    SplitPlan plan;
    plan.triplets.push_back({0, LayerType::attn_q, 2});
    auto decomp = plan_decomposition(model, plan);
    auto [cs, ds] = build_party_states(model, decomp, ring, 77, 0, tokens);
    CharlieState charlie_state = std::move(cs);
    DavidState david_state = std::move(ds);
    const Mat& wq = model.layers[0].weight;
    RingMatrix full_q = quantize_matrix(wq.data(), wq.rows(), wq.cols(), ring);
    charlie_state.layers.at(0).decomp = Decomposition{};
    charlie_state.layers.at(0).w_d_int = full_q;
    david_state.layers[0].w_int = full_q;

    CharlieEndpoint charlie(std::move(charlie_state));
    DavidEndpoint david(std::move(david_state));
    precompute(charlie.state(), 1);

    // fully offloaded twin
    auto offloaded = plan_decomposition(model, SplitPlan{});
    auto [cs2, ds2] = build_party_states(model, offloaded, ring, 78, 0, tokens);
    CharlieEndpoint charlie2(std::move(cs2));
    DavidEndpoint david2(std::move(ds2));

    Mat x(6, tokens);
    for (size_t r = 0; r < 6; ++r)
        for (size_t c = 0; c < tokens; ++c) x(r, c) = 0.07 * static_cast<double>(r + c) - 0.15;
    FixedVec x_int = quantize(flatten_cols(x), ring);

    FixedVec masked_run = run_attention_hybrid(charlie, david, x_int, 0);
    FixedVec david_only = run_attention_hybrid(charlie2, david2, x_int, 0);
    CHECK(masked_run.values == david_only.values);
}

TEST_CASE("transcript uniformity: masked payload coordinates pass chi-square at small L") {
    RingParams ring(17, 2, 0);
    ModelParams model;
    model.kind = ModelKind::mlp;
    Layer l;
    l.weight = Mat(4, 4);
    for (size_t i = 0; i < 4; ++i) l.weight(i, i) = 0.5;
    l.act = Activation::identity;
    l.id = LayerId{0, LayerType::mlp_fc};
    model.layers = {l};
    SplitPlan plan;
    plan.triplets.push_back({0, LayerType::mlp_fc, 2});
    auto decomp = plan_decomposition(model, plan);
    auto [cs, ds] = build_party_states(model, decomp, ring, 4242, 0, 1);
    CharlieEndpoint charlie(std::move(cs));
    DavidEndpoint david(std::move(ds));

    const size_t runs = 500; // 4 coords per run at L=17: 100*L needs 1700
    precompute(charlie.state(), runs);
    std::vector<uint64_t> coords;
    std::vector<double> x = {0.5, -0.5, 1.0, 0.0};
    FixedVec x_int = quantize(x, ring);
    for (size_t i = 0; i < runs; ++i) {
        Transcript t;
        run_mlp_hybrid(charlie, david, x_int, i, &t);
        auto c = t.masked_activation_coords();
        coords.insert(coords.end(), c.begin(), c.end());
    }
    auto result = uniformity_distinguisher(coords, 17);
    CHECK(result.p_value > 0.01);

    // insecure transcripts of the same constant input are flat-out rejected
    auto [cs2, ds2] = build_party_states(model, decomp, ring, 4243, 0, 1);
    CharlieEndpoint charlie2(std::move(cs2), ProtocolMode::insecure);
    DavidEndpoint david2(std::move(ds2), ProtocolMode::insecure);
    std::vector<uint64_t> coords2;
    for (size_t i = 0; i < runs; ++i) {
        Transcript t;
        run_mlp_hybrid(charlie2, david2, x_int, i, &t);
        auto c = t.masked_activation_coords();
        coords2.insert(coords2.end(), c.begin(), c.end());
    }
    auto result2 = uniformity_distinguisher(coords2, 17);
    CHECK(result2.p_value < 1e-6);
}

TEST_CASE("charlie's counted work stays under a tenth of the monolithic count") {
    auto model = make_toy_transformer_stack(30, 6, 64);
    SplitPlan plan = default_plan(model, 4);
    auto decomp = plan_decomposition(model, plan);
    auto [cs, ds] = build_party_states(model, decomp, test_ring(), 31, 0, 1);
    CharlieEndpoint charlie(std::move(cs));
    DavidEndpoint david(std::move(ds));
    precompute(charlie.state(), 8);
    charlie.state().counters.reset(); // cost of the offline phase not counted
    david.state().counters.reset();

    std::vector<double> x = ramp_input(64);
    FixedVec x_int = quantize(x, test_ring());
    for (int i = 0; i < 8; ++i) run_mlp_hybrid(charlie, david, x_int, static_cast<uint64_t>(i));

    OpCounters mono;
    for (int i = 0; i < 8; ++i)
        forward_reference_quantized(model, Mat(64, 1, x), test_ring(), nullptr, &mono);

    CHECK(charlie.state().counters.total() * 10 <= mono.total());
    CHECK(charlie.state().counters.total() > 0);
}

TEST_CASE("abort wipes the aborted inference's pool entries") {
    auto s = make_mlp_setup(32, 3, 6, {0, 2}, 2);
    CharlieEndpoint charlie(s.charlie);
    precompute(charlie.state(), 2);
    CHECK(charlie.state().mask_pool.size() == 4);
    charlie.abort_inference(0);
    CHECK(charlie.state().mask_pool.size() == 2);
    for (const auto& [key, r] : charlie.state().mask_pool) CHECK(key.inference_id == 1);
    charlie.abort_inference(1);
    CHECK(charlie.state().mask_pool.empty());
    CHECK(charlie.state().cancel_pool.empty());
}
