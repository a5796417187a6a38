#include "slip/protocol.hpp"

#include <algorithm>
#include <string>

#include "slip/errors.hpp"

namespace slip {

const char* to_string(MsgType t) {
    switch (t) {
        case MsgType::setup: return "setup";
        case MsgType::inference_input: return "inference_input";
        case MsgType::masked_activation: return "masked_activation";
        case MsgType::masked_partial: return "masked_partial";
        case MsgType::plain_activation: return "plain_activation";
        case MsgType::inference_output: return "inference_output";
    }
    return "?";
}

ProtocolMessage make_vector_message(MsgType type, uint64_t session, uint64_t inference,
                                    uint32_t layer, Path path, FixedVec payload) {
    ProtocolMessage m;
    m.type = type;
    m.session_id = session;
    m.inference_id = inference;
    m.layer_id = layer;
    m.path = path;
    m.payload = std::move(payload);
    return m;
}

std::vector<uint64_t> Transcript::masked_activation_coords() const {
    std::vector<uint64_t> out;
    for (const auto& [dir, msg] : entries) {
        (void)dir;
        if (msg.type == MsgType::masked_activation)
            out.insert(out.end(), msg.payload.values.begin(), msg.payload.values.end());
    }
    return out;
}

TopologyInfo CharlieState::topology() const {
    TopologyInfo t;
    t.kind = kind;
    t.tokens = tokens;
    t.layers = shapes;
    return t;
}

TopologyInfo DavidState::topology() const {
    TopologyInfo t;
    t.kind = kind;
    t.tokens = tokens;
    for (const DavidLayer& l : layers) {
        // for split layers David's matrix IS the residual, same shape as W
        t.layers.push_back(LayerShape{static_cast<uint32_t>(l.w_int.rows),
                                      static_cast<uint32_t>(l.w_int.cols), l.split});
    }
    return t;
}

std::pair<CharlieState, DavidState> build_party_states(const ModelParams& model,
                                                       const ModelDecomposition& decomp,
                                                       const RingParams& ring, uint64_t mask_seed,
                                                       uint64_t mask_stream, uint32_t tokens) {
    model.validate();
    CharlieState charlie;
    DavidState david;
    charlie.ring = david.ring = ring;
    charlie.kind = david.kind = model.kind;
    charlie.tokens = david.tokens = tokens;
    charlie.rng = std::make_shared<ChaChaStream>(mask_seed, mask_stream);

    for (size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        auto it = decomp.split_layers.find(i);
        const Decomposition* dec = it == decomp.split_layers.end() ? nullptr : &it->second;
        if (dec && (dec->rows() != layer.weight.rows() || dec->cols() != layer.weight.cols()))
            throw PlanShapeMismatch("decomposition shape differs from layer " + std::to_string(i));

        const Mat& w_d = dec ? dec->david_part : layer.weight;
        RingMatrix w_int = quantize_matrix(w_d.data(), w_d.rows(), w_d.cols(), ring);

        charlie.shapes.push_back(LayerShape{static_cast<uint32_t>(layer.weight.rows()),
                                            static_cast<uint32_t>(layer.weight.cols()),
                                            dec != nullptr});

        DavidLayer dl;
        dl.w_int = w_int;
        dl.split = dec != nullptr;
        if (!dl.split) {
            dl.bias = layer.bias;
            dl.act = layer.act;
        }
        david.layers.push_back(std::move(dl));

        if (dec) {
            CharlieLayer cl;
            cl.decomp = *dec;
            cl.w_d_int = w_int;
            cl.bias = layer.bias;
            cl.act = layer.act;
            charlie.layers.emplace(static_cast<uint32_t>(i), std::move(cl));
        }
    }

    if (model.kind == ModelKind::attention_head) {
        bool engaged = charlie.shapes[0].split || charlie.shapes[1].split || charlie.shapes[2].split;
        charlie.head_engaged = david.head_engaged = engaged;
        if (engaged) {
            // Charlie runs the double step over all three paths; give him the
            // integer copies for the unsplit ones too (empty factored part).
            for (uint32_t i = 0; i < 3; ++i) {
                if (charlie.layers.count(i)) continue;
                CharlieLayer cl;
                cl.w_d_int = david.layers[i].w_int;
                cl.act = model.layers[i].act;
                charlie.layers.emplace(i, std::move(cl));
            }
        }
    }
    return {std::move(charlie), std::move(david)};
}

namespace {

PoolKey key_of(uint64_t inference, uint32_t layer, Path path) {
    return PoolKey{inference, layer, path};
}

std::string key_str(const PoolKey& k) {
    return "(inference " + std::to_string(k.inference_id) + ", layer " + std::to_string(k.layer) +
           ", path " + std::to_string(static_cast<int>(k.path)) + ")";
}

} // namespace

void precompute(CharlieState& charlie, uint64_t inference_budget) {
    auto draw_pair = [&](uint64_t inference, uint32_t layer, Path path, size_t mask_dim,
                         size_t tokens) {
        const CharlieLayer& cl = charlie.layers.at(layer);
        MaskVec r = sample_mask(mask_dim, charlie.ring, *charlie.rng);
        CancellationMask c;
        c.layer_index = layer;
        c.values = modmat_cols_raw(cl.w_d_int, r.values, tokens, charlie.ring, &charlie.counters);
        PoolKey k = key_of(inference, layer, path);
        charlie.mask_pool.emplace(k, std::move(r));
        charlie.cancel_pool.emplace(k, std::move(c));
    };

    for (uint64_t n = 0; n < inference_budget; ++n) {
        uint64_t inference = charlie.next_inference_id + n;
        if (charlie.kind == ModelKind::attention_head) {
            uint32_t t = charlie.tokens;
            if (charlie.head_engaged) {
                draw_pair(inference, 0, Path::q, charlie.shapes[0].cols * t, t);
                draw_pair(inference, 1, Path::k, charlie.shapes[1].cols * t, t);
                draw_pair(inference, 2, Path::v, charlie.shapes[2].cols * t, t);
            }
            if (charlie.shapes[3].split)
                draw_pair(inference, 3, Path::main, charlie.shapes[3].cols * t, t);
        } else {
            for (uint32_t i = 0; i < charlie.n_layers(); ++i)
                if (charlie.is_split(i)) draw_pair(inference, i, Path::main, charlie.shapes[i].cols, 1);
        }
    }
    charlie.next_inference_id += inference_budget;
}

// ----------------------------- CharlieEndpoint -----------------------------

CharlieEndpoint::CharlieEndpoint(CharlieState state, ProtocolMode mode)
    : state_(std::move(state)), mode_(mode) {}

ProtocolMessage CharlieEndpoint::handle_setup(const ProtocolMessage& setup) const {
    if (setup.type != MsgType::setup) throw TopologyMismatch("expected setup frame");
    if (setup.version != kProtocolVersion)
        throw VersionMismatch("protocol version " + std::to_string(setup.version) +
                              " != " + std::to_string(kProtocolVersion));
    if (!(setup.ring == state_.ring)) throw TopologyMismatch("ring parameters differ");
    if (!(setup.topology == state_.topology())) throw TopologyMismatch("topology differs");
    ProtocolMessage reply;
    reply.type = MsgType::setup;
    reply.session_id = setup.session_id;
    reply.version = kProtocolVersion;
    reply.ring = state_.ring;
    reply.topology = state_.topology();
    return reply;
}

ProtocolMessage CharlieEndpoint::vec_msg(MsgType type, uint32_t layer, Path path,
                                         FixedVec payload) const {
    return make_vector_message(type, 0, scratch_.inference_id, layer, path, std::move(payload));
}

FixedVec CharlieEndpoint::apply_mask(const FixedVec& a, uint32_t layer, Path path) {
    state_.counters.elementwise += a.values.size();
    if (mode_ == ProtocolMode::insecure) return a; // pad skipped: payload crosses in the clear
    PoolKey k = key_of(scratch_.inference_id, layer, path);
    auto it = state_.mask_pool.find(k);
    if (it == state_.mask_pool.end())
        throw MaskExhaustedError("no pad available for " + key_str(k));
    FixedVec masked = mask(a, it->second, state_.ring);
    state_.mask_pool.erase(it); // one-time pad: consumed on use
    return masked;
}

FixedVec CharlieEndpoint::remove_mask(const FixedVec& reply, uint32_t layer, Path path) {
    state_.counters.elementwise += reply.values.size();
    if (mode_ == ProtocolMode::insecure) return reply;
    PoolKey k = key_of(scratch_.inference_id, layer, path);
    auto it = state_.cancel_pool.find(k);
    if (it == state_.cancel_pool.end())
        throw MaskExhaustedError("no cancellation mask for " + key_str(k));
    FixedVec clean = unmask(reply, it->second, state_.ring);
    state_.cancel_pool.erase(it);
    return clean;
}

std::vector<ProtocolMessage> CharlieEndpoint::on_message(const ProtocolMessage& msg) {
    switch (msg.type) {
        case MsgType::inference_input:
            if (scratch_.active)
                throw TopologyMismatch("inference started while another is active");
            scratch_ = InferenceScratch{};
            scratch_.active = true;
            scratch_.inference_id = msg.inference_id;
            return state_.kind == ModelKind::attention_head ? start_attention_inference(msg)
                                                            : start_mlp_inference(msg);
        case MsgType::masked_partial:
            if (!scratch_.active) throw TopologyMismatch("partial without active inference");
            return state_.kind == ModelKind::attention_head ? attention_after_partial(msg)
                                                            : mlp_after_partial(msg);
        case MsgType::plain_activation: {
            if (!scratch_.active) throw TopologyMismatch("handoff without active inference");
            uint32_t layer = msg.layer_id;
            if (layer >= state_.n_layers() || !state_.is_split(layer))
                throw TopologyMismatch("handoff for a layer Charlie does not run");
            scratch_.a_current = msg.payload;
            if (state_.kind == ModelKind::attention_head) {
                if (layer != 3) throw TopologyMismatch("unexpected attention handoff layer");
                scratch_.stage_grid = unflatten_cols(dequantize(msg.payload, state_.ring),
                                                  state_.shapes[3].cols, state_.tokens);
                return begin_output_projection();
            }
            return mlp_masking_step(layer);
        }
        case MsgType::inference_output:
            // David finished the tail locally; both parties now hold the output.
            last_output_ = msg.payload;
            scratch_ = InferenceScratch{};
            return {};
        case MsgType::setup:
            throw TopologyMismatch("setup frame inside a session");
        case MsgType::masked_activation:
            throw TopologyMismatch("masked activations flow from Charlie, not to him");
    }
    throw MalformedFrame("unknown message type");
}

std::vector<ProtocolMessage> CharlieEndpoint::start_mlp_inference(const ProtocolMessage& msg) {
    if (msg.payload.values.size() != state_.shapes[0].cols)
        throw DimensionMismatch("inference input dim differs from layer 0");
    scratch_.a_current = msg.payload;
    if (state_.is_split(0)) return mlp_masking_step(0);
    return {}; // David runs the leading offloaded segment
}

std::vector<ProtocolMessage> CharlieEndpoint::mlp_masking_step(uint32_t layer) {
    scratch_.awaiting_layer = layer;
    FixedVec masked = apply_mask(scratch_.a_current, layer, Path::main);
    return {vec_msg(MsgType::masked_activation, layer, Path::main, std::move(masked))};
}

std::vector<ProtocolMessage> CharlieEndpoint::mlp_after_partial(const ProtocolMessage& msg) {
    uint32_t layer = msg.layer_id;
    if (layer != scratch_.awaiting_layer || !state_.is_split(layer))
        throw TopologyMismatch("partial for an unexpected layer");
    const CharlieLayer& cl = state_.layers.at(layer);
    if (msg.payload.values.size() != cl.w_d_int.rows)
        throw DimensionMismatch("partial dim differs from layer rows");

    FixedVec z = msg.payload;
    z.logical_scale = 2;
    z = remove_mask(z, layer, Path::main);
    std::vector<double> contrib;
    std::vector<double>* contrib_ptr = nullptr;
    if (!cl.decomp.empty()) {
        contrib = factored_matvec(cl.decomp, dequantize(scratch_.a_current, state_.ring),
                                  &state_.counters);
        contrib_ptr = &contrib;
    }
    FixedVec a_next =
        combine_activate_requantize(z, contrib_ptr, cl.bias, cl.act, state_.ring, &state_.counters);
    return emit_layer_result(std::move(a_next), layer);
}

std::vector<ProtocolMessage> CharlieEndpoint::emit_layer_result(FixedVec a_next,
                                                                uint32_t done_layer) {
    uint32_t next = done_layer + 1;
    if (next == state_.n_layers()) {
        last_output_ = a_next;
        ProtocolMessage out = vec_msg(MsgType::inference_output, next, Path::main, std::move(a_next));
        scratch_ = InferenceScratch{};
        return {out};
    }
    scratch_.a_current = std::move(a_next);
    if (state_.is_split(next)) return mlp_masking_step(next);
    return {vec_msg(MsgType::plain_activation, next, Path::main, scratch_.a_current)};
}

std::vector<ProtocolMessage> CharlieEndpoint::start_attention_inference(const ProtocolMessage& msg) {
    uint32_t d = state_.shapes[0].cols;
    if (msg.payload.values.size() != static_cast<size_t>(d) * state_.tokens)
        throw DimensionMismatch("attention input is not d x tokens");
    scratch_.a_current = msg.payload;
    scratch_.x_grid =
        unflatten_cols(dequantize(msg.payload, state_.ring), d, state_.tokens);
    if (!state_.head_engaged) return {}; // David computes the head locally
    scratch_.awaiting_q = scratch_.awaiting_k = true;
    FixedVec masked_q = apply_mask(scratch_.a_current, 0, Path::q);
    FixedVec masked_k = apply_mask(scratch_.a_current, 1, Path::k);
    return {vec_msg(MsgType::masked_activation, 0, Path::q, std::move(masked_q)),
            vec_msg(MsgType::masked_activation, 1, Path::k, std::move(masked_k))};
}

std::vector<ProtocolMessage> CharlieEndpoint::begin_output_projection() {
    scratch_.awaiting_layer = 3;
    FixedVec masked = apply_mask(scratch_.a_current, 3, Path::main);
    return {vec_msg(MsgType::masked_activation, 3, Path::main, std::move(masked))};
}

std::vector<ProtocolMessage> CharlieEndpoint::attention_after_partial(const ProtocolMessage& msg) {
    const uint32_t tokens = state_.tokens;
    FixedVec z = msg.payload;
    z.logical_scale = 2;

    if (msg.layer_id == 0 && msg.path == Path::q && scratch_.awaiting_q) {
        scratch_.zq = remove_mask(z, 0, Path::q);
        scratch_.awaiting_q = false;
        return {};
    }
    if (msg.layer_id == 1 && msg.path == Path::k && scratch_.awaiting_k) {
        if (scratch_.awaiting_q) throw TopologyMismatch("k partial before q partial");
        scratch_.zk = remove_mask(z, 1, Path::k);
        scratch_.awaiting_k = false;

        const CharlieLayer& lq = state_.layers.at(0);
        const CharlieLayer& lk = state_.layers.at(1);
        uint32_t dh = state_.shapes[0].rows;
        Mat q = projection_real(scratch_.zq, dh, tokens, &lq.decomp, scratch_.x_grid, state_.ring,
                                &state_.counters);
        Mat k = projection_real(scratch_.zk, dh, tokens, &lk.decomp, scratch_.x_grid, state_.ring,
                                &state_.counters);
        Mat xs = attention_weighted_input(q, k, scratch_.x_grid, dh, &state_.counters);
        FixedVec xs_int = quantize(flatten_cols(xs), state_.ring);
        scratch_.stage_grid =
            unflatten_cols(dequantize(xs_int, state_.ring), xs.rows(), tokens);
        scratch_.a_current = xs_int;
        scratch_.awaiting_v = true;
        FixedVec masked = apply_mask(xs_int, 2, Path::v);
        return {vec_msg(MsgType::masked_activation, 2, Path::v, std::move(masked))};
    }
    if (msg.layer_id == 2 && msg.path == Path::v && scratch_.awaiting_v) {
        scratch_.awaiting_v = false;
        FixedVec zv = remove_mask(z, 2, Path::v);
        const CharlieLayer& lv = state_.layers.at(2);
        Mat ctx = projection_real(zv, state_.shapes[2].rows, tokens, &lv.decomp, scratch_.stage_grid,
                                  state_.ring, &state_.counters);
        FixedVec ctx_int = quantize(flatten_cols(ctx), state_.ring);
        scratch_.a_current = ctx_int;
        if (state_.is_split(3)) {
            scratch_.stage_grid =
                unflatten_cols(dequantize(ctx_int, state_.ring), ctx.rows(), tokens);
            return begin_output_projection();
        }
        return {vec_msg(MsgType::plain_activation, 3, Path::main, std::move(ctx_int))};
    }
    if (msg.layer_id == 3 && msg.path == Path::main && scratch_.awaiting_layer == 3) {
        FixedVec zo = remove_mask(z, 3, Path::main);
        const CharlieLayer& lo = state_.layers.at(3);
        std::vector<double> contrib_flat;
        std::vector<double>* contrib_ptr = nullptr;
        if (!lo.decomp.empty()) {
            contrib_flat =
                flatten_cols(factored_matmat(lo.decomp, scratch_.stage_grid, &state_.counters));
            contrib_ptr = &contrib_flat;
        }
        FixedVec out = combine_tokens(zo, contrib_ptr, lo.bias, lo.act, state_.shapes[3].rows,
                                      tokens, state_.ring, &state_.counters);
        last_output_ = out;
        ProtocolMessage reply =
            vec_msg(MsgType::inference_output, 4, Path::main, std::move(out));
        scratch_ = InferenceScratch{};
        return {reply};
    }
    throw TopologyMismatch("partial for an unexpected attention path");
}

void CharlieEndpoint::abort_inference(uint64_t inference_id) {
    // Never leave a reusable pad behind for an aborted inference.
    auto wipe = [&](auto& pool) {
        for (auto it = pool.begin(); it != pool.end();) {
            if (it->first.inference_id == inference_id)
                it = pool.erase(it);
            else
                ++it;
        }
    };
    wipe(state_.mask_pool);
    wipe(state_.cancel_pool);
    if (scratch_.active && scratch_.inference_id == inference_id) scratch_ = InferenceScratch{};
}

// ------------------------------ LocalChannel -------------------------------

void LocalChannel::send(const ProtocolMessage& msg) {
    for (ProtocolMessage& reply : charlie_.on_message(msg)) queue_.push_back(std::move(reply));
}

ProtocolMessage LocalChannel::recv() {
    if (head_ >= queue_.size())
        throw TopologyMismatch("protocol deadlock: no frame pending from Charlie");
    return queue_[head_++];
}

// ------------------------------ DavidEndpoint ------------------------------

DavidEndpoint::DavidEndpoint(DavidState state, ProtocolMode mode)
    : state_(std::move(state)), mode_(mode) {}

ProtocolMessage DavidEndpoint::setup_message(uint64_t session_id) const {
    ProtocolMessage m;
    m.type = MsgType::setup;
    m.session_id = session_id;
    m.version = kProtocolVersion;
    m.ring = state_.ring;
    m.topology = state_.topology();
    return m;
}

FixedVec DavidEndpoint::local_layer(uint32_t layer, const FixedVec& a) {
    const DavidLayer& l = state_.layers[layer];
    if (l.split) throw TopologyMismatch("David cannot run a split layer locally");
    return dense_quantized_layer(l.w_int, a, l.bias, l.act, state_.ring, &state_.counters);
}

FixedVec DavidEndpoint::local_attention_head(const FixedVec& x_int) {
    // Fully offloaded head: the same pipeline as the engaged protocol, all
    // integer matrices full and no factored parts.
    const uint32_t tokens = state_.tokens;
    uint32_t d = static_cast<uint32_t>(state_.layers[0].w_int.cols);
    uint32_t dh = static_cast<uint32_t>(state_.layers[0].w_int.rows);
    Mat x_grid = unflatten_cols(dequantize(x_int, state_.ring), d, tokens);

    FixedVec zq = modmat_cols(state_.layers[0].w_int, x_int, tokens, state_.ring, &state_.counters);
    FixedVec zk = modmat_cols(state_.layers[1].w_int, x_int, tokens, state_.ring, &state_.counters);
    Mat q = projection_real(zq, dh, tokens, nullptr, x_grid, state_.ring, &state_.counters);
    Mat k = projection_real(zk, dh, tokens, nullptr, x_grid, state_.ring, &state_.counters);
    Mat xs = attention_weighted_input(q, k, x_grid, dh, &state_.counters);
    FixedVec xs_int = quantize(flatten_cols(xs), state_.ring);

    Mat xs_grid = unflatten_cols(dequantize(xs_int, state_.ring), d, tokens);
    FixedVec zv = modmat_cols(state_.layers[2].w_int, xs_int, tokens, state_.ring, &state_.counters);
    Mat ctx = projection_real(zv, dh, tokens, nullptr, xs_grid, state_.ring, &state_.counters);
    return quantize(flatten_cols(ctx), state_.ring);
}

FixedVec DavidEndpoint::run_inference(const FixedVec& x_int, uint64_t inference_id,
                                      MessageTransport& channel, Transcript* transcript) {
    if (transcript) transcript->inference_id = inference_id;
    auto send = [&](ProtocolMessage m) {
        if (transcript) transcript->entries.emplace_back(Direction::david_to_charlie, m);
        channel.send(m);
    };
    auto recv = [&](MsgType want) {
        ProtocolMessage m = channel.recv();
        if (transcript) transcript->entries.emplace_back(Direction::charlie_to_david, m);
        if (m.type != want)
            throw TopologyMismatch(std::string("expected ") + to_string(want) + ", got " +
                                   to_string(m.type));
        return m;
    };
    auto make = [&](MsgType type, uint32_t layer, Path path, FixedVec payload) {
        return make_vector_message(type, session_id_, inference_id, layer, path,
                                   std::move(payload));
    };

    send(make(MsgType::inference_input, 0, Path::main, x_int));

    if (state_.kind == ModelKind::attention_head) {
        const uint32_t tokens = state_.tokens;
        FixedVec ctx_int;
        if (state_.head_engaged) {
            ProtocolMessage mq = recv(MsgType::masked_activation);
            ProtocolMessage mk = recv(MsgType::masked_activation);
            if (mq.path != Path::q || mk.path != Path::k)
                throw TopologyMismatch("unexpected inner-step paths");
            FixedVec zq =
                modmat_cols(state_.layers[0].w_int, mq.payload, tokens, state_.ring, &state_.counters);
            FixedVec zk =
                modmat_cols(state_.layers[1].w_int, mk.payload, tokens, state_.ring, &state_.counters);
            send(make(MsgType::masked_partial, 0, Path::q, std::move(zq)));
            send(make(MsgType::masked_partial, 1, Path::k, std::move(zk)));

            ProtocolMessage mv = recv(MsgType::masked_activation);
            if (mv.path != Path::v) throw TopologyMismatch("expected outer-step mask");
            FixedVec zv =
                modmat_cols(state_.layers[2].w_int, mv.payload, tokens, state_.ring, &state_.counters);
            send(make(MsgType::masked_partial, 2, Path::v, std::move(zv)));

            if (state_.layers[3].split) {
                ProtocolMessage mo = recv(MsgType::masked_activation);
                FixedVec zo = modmat_cols(state_.layers[3].w_int, mo.payload, tokens, state_.ring,
                                          &state_.counters);
                send(make(MsgType::masked_partial, 3, Path::main, std::move(zo)));
                return recv(MsgType::inference_output).payload;
            }
            ctx_int = recv(MsgType::plain_activation).payload;
        } else {
            ctx_int = local_attention_head(x_int);
            if (state_.layers[3].split) {
                send(make(MsgType::plain_activation, 3, Path::main, ctx_int));
                ProtocolMessage mo = recv(MsgType::masked_activation);
                FixedVec zo = modmat_cols(state_.layers[3].w_int, mo.payload, tokens, state_.ring,
                                          &state_.counters);
                send(make(MsgType::masked_partial, 3, Path::main, std::move(zo)));
                return recv(MsgType::inference_output).payload;
            }
        }
        // o layer offloaded: finish locally and hand the output back
        const DavidLayer& lo = state_.layers[3];
        FixedVec zo = modmat_cols(lo.w_int, ctx_int, tokens, state_.ring, &state_.counters);
        FixedVec out = combine_tokens(zo, nullptr, lo.bias, lo.act, lo.w_int.rows, tokens,
                                      state_.ring, &state_.counters);
        send(make(MsgType::inference_output, 4, Path::main, out));
        return out;
    }

    // MLP drive
    FixedVec a = x_int;
    const uint32_t n = state_.n_layers();
    std::optional<FixedVec> output;
    for (uint32_t i = 0; i < n; ++i) {
        const DavidLayer& l = state_.layers[i];
        if (l.split) {
            if (i > 0 && !state_.layers[i - 1].split)
                send(make(MsgType::plain_activation, i, Path::main, a));
            ProtocolMessage masked = recv(MsgType::masked_activation);
            if (masked.layer_id != i) throw TopologyMismatch("mask for an unexpected layer");
            FixedVec reply = modmatvec(l.w_int, masked.payload, state_.ring);
            state_.counters.int_madds += l.w_int.rows * l.w_int.cols;
            send(make(MsgType::masked_partial, i, Path::main, std::move(reply)));
            if (i + 1 == n) {
                output = recv(MsgType::inference_output).payload;
            } else if (!state_.layers[i + 1].split) {
                a = recv(MsgType::plain_activation).payload;
            }
        } else {
            a = local_layer(i, a);
            if (i + 1 == n) {
                output = a;
                send(make(MsgType::inference_output, n, Path::main, a));
            }
        }
    }
    if (!output) throw TopologyMismatch("inference finished without an output");
    return *output;
}

// ------------------------- in-memory runners / steps ------------------------

FixedVec secure_layer_step(CharlieState& charlie, DavidState& david, const FixedVec& a_prev,
                           uint32_t layer, uint64_t inference_id) {
    const CharlieLayer& cl = charlie.layers.at(layer);
    PoolKey k{inference_id, layer, Path::main};
    auto rit = charlie.mask_pool.find(k);
    auto cit = charlie.cancel_pool.find(k);
    if (rit == charlie.mask_pool.end() || cit == charlie.cancel_pool.end())
        throw MaskExhaustedError("no pad available for " + key_str(k));

    charlie.counters.elementwise += a_prev.values.size();
    FixedVec a_tilde = mask(a_prev, rit->second, charlie.ring);
    charlie.mask_pool.erase(rit);

    FixedVec z_tilde = modmatvec(david.layers[layer].w_int, a_tilde, david.ring);
    david.counters.int_madds += david.layers[layer].w_int.rows * david.layers[layer].w_int.cols;

    charlie.counters.elementwise += z_tilde.values.size();
    FixedVec z = unmask(z_tilde, cit->second, charlie.ring);
    charlie.cancel_pool.erase(cit);

    std::vector<double> contrib;
    std::vector<double>* contrib_ptr = nullptr;
    if (!cl.decomp.empty()) {
        contrib = factored_matvec(cl.decomp, dequantize(a_prev, charlie.ring), &charlie.counters);
        contrib_ptr = &contrib;
    }
    return combine_activate_requantize(z, contrib_ptr, cl.bias, cl.act, charlie.ring,
                                       &charlie.counters);
}

FixedVec insecure_layer_step(CharlieState& charlie, DavidState& david, const FixedVec& a_prev,
                             uint32_t layer) {
    const CharlieLayer& cl = charlie.layers.at(layer);
    FixedVec z = modmatvec(david.layers[layer].w_int, a_prev, david.ring);
    david.counters.int_madds += david.layers[layer].w_int.rows * david.layers[layer].w_int.cols;
    std::vector<double> contrib;
    std::vector<double>* contrib_ptr = nullptr;
    if (!cl.decomp.empty()) {
        contrib = factored_matvec(cl.decomp, dequantize(a_prev, charlie.ring), &charlie.counters);
        contrib_ptr = &contrib;
    }
    return combine_activate_requantize(z, contrib_ptr, cl.bias, cl.act, charlie.ring,
                                       &charlie.counters);
}

FixedVec run_mlp_hybrid(CharlieEndpoint& charlie, DavidEndpoint& david, const FixedVec& x_int,
                        uint64_t inference_id, Transcript* transcript) {
    if (david.state().kind != ModelKind::mlp) throw ShapeError("run_mlp_hybrid: not an MLP");
    LocalChannel channel(charlie);
    return david.run_inference(x_int, inference_id, channel, transcript);
}

FixedVec run_attention_hybrid(CharlieEndpoint& charlie, DavidEndpoint& david,
                              const FixedVec& x_int, uint64_t inference_id,
                              Transcript* transcript) {
    if (david.state().kind != ModelKind::attention_head)
        throw ShapeError("run_attention_hybrid: not an attention head");
    LocalChannel channel(charlie);
    return david.run_inference(x_int, inference_id, channel, transcript);
}

std::vector<std::pair<Direction, MsgType>> expected_schedule(const TopologyInfo& topology) {
    using P = std::pair<Direction, MsgType>;
    const auto C = Direction::charlie_to_david;
    const auto D = Direction::david_to_charlie;
    std::vector<P> s;
    s.emplace_back(D, MsgType::inference_input);

    if (topology.kind == ModelKind::attention_head) {
        bool engaged =
            topology.layers[0].split || topology.layers[1].split || topology.layers[2].split;
        bool o_split = topology.layers[3].split;
        if (engaged) {
            s.emplace_back(C, MsgType::masked_activation); // q
            s.emplace_back(C, MsgType::masked_activation); // k
            s.emplace_back(D, MsgType::masked_partial);
            s.emplace_back(D, MsgType::masked_partial);
            s.emplace_back(C, MsgType::masked_activation); // v
            s.emplace_back(D, MsgType::masked_partial);
            if (o_split) {
                s.emplace_back(C, MsgType::masked_activation);
                s.emplace_back(D, MsgType::masked_partial);
                s.emplace_back(C, MsgType::inference_output);
            } else {
                s.emplace_back(C, MsgType::plain_activation);
                s.emplace_back(D, MsgType::inference_output);
            }
        } else if (o_split) {
            s.emplace_back(D, MsgType::plain_activation);
            s.emplace_back(C, MsgType::masked_activation);
            s.emplace_back(D, MsgType::masked_partial);
            s.emplace_back(C, MsgType::inference_output);
        } else {
            s.emplace_back(D, MsgType::inference_output);
        }
        return s;
    }

    const size_t n = topology.layers.size();
    for (size_t i = 0; i < n; ++i) {
        bool split = topology.layers[i].split;
        if (split) {
            if (i > 0 && !topology.layers[i - 1].split) s.emplace_back(D, MsgType::plain_activation);
            s.emplace_back(C, MsgType::masked_activation);
            s.emplace_back(D, MsgType::masked_partial);
            if (i + 1 == n)
                s.emplace_back(C, MsgType::inference_output);
            else if (!topology.layers[i + 1].split)
                s.emplace_back(C, MsgType::plain_activation);
        } else if (i + 1 == n) {
            s.emplace_back(D, MsgType::inference_output);
        }
    }
    return s;
}

} // namespace slip
