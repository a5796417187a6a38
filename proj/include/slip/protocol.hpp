#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "slip/counters.hpp"
#include "slip/csprng.hpp"
#include "slip/decompose.hpp"
#include "slip/models.hpp"
#include "slip/ring.hpp"

namespace slip {

constexpr uint8_t kProtocolVersion = 0x01;

enum class MsgType : uint8_t {
    setup = 1,
    inference_input = 2,
    masked_activation = 3,
    masked_partial = 4,
    plain_activation = 5,
    inference_output = 6,
};

enum class Path : uint8_t { main = 0, q = 1, k = 2, v = 3 };

const char* to_string(MsgType t);

struct LayerShape {
    uint32_t rows = 0;
    uint32_t cols = 0;
    bool split = false;

    bool operator==(const LayerShape&) const = default;
};

struct TopologyInfo {
    ModelKind kind = ModelKind::mlp;
    uint32_t tokens = 1;
    std::vector<LayerShape> layers;

    bool operator==(const TopologyInfo&) const = default;
};

/// One protocol frame. Vector-carrying frames use `payload`; setup frames use
/// version/ring/topology instead.
struct ProtocolMessage {
    MsgType type = MsgType::setup;
    uint64_t session_id = 0;
    uint64_t inference_id = 0;
    uint32_t layer_id = 0;
    Path path = Path::main;
    FixedVec payload;

    uint8_t version = kProtocolVersion;
    RingParams ring;
    TopologyInfo topology;
};

ProtocolMessage make_vector_message(MsgType type, uint64_t session, uint64_t inference,
                                    uint32_t layer, Path path, FixedVec payload);

enum class Direction : uint8_t { charlie_to_david = 0, david_to_charlie = 1 };

/// David's view of one inference: every frame he sent or received, in order.
struct Transcript {
    uint64_t inference_id = 0;
    std::vector<std::pair<Direction, ProtocolMessage>> entries;

    /// Payload residues of every MaskedActivation coordinate, in order.
    std::vector<uint64_t> masked_activation_coords() const;
};

struct PoolKey {
    uint64_t inference_id = 0;
    uint32_t layer = 0;
    Path path = Path::main;

    auto operator<=>(const PoolKey&) const = default;
};

/// Per-layer material Charlie keeps for a split layer: the factored sensitive
/// part plus the exact integer copy of David's matrix for cancellation masks.
struct CharlieLayer {
    Decomposition decomp;
    RingMatrix w_d_int;
    std::optional<std::vector<double>> bias;
    Activation act = Activation::identity;
};

struct CharlieState {
    RingParams ring;
    ModelKind kind = ModelKind::mlp;
    uint32_t tokens = 1;
    std::vector<LayerShape> shapes;
    bool head_engaged = false; // attention: any of q/k/v split
    std::map<uint32_t, CharlieLayer> layers;

    std::map<PoolKey, MaskVec> mask_pool;
    std::map<PoolKey, CancellationMask> cancel_pool;
    std::shared_ptr<ChaChaStream> rng;
    uint64_t next_inference_id = 0;

    OpCounters counters;

    uint32_t n_layers() const { return static_cast<uint32_t>(shapes.size()); }
    bool is_split(uint32_t layer) const { return shapes[layer].split; }
    TopologyInfo topology() const;
};

struct DavidLayer {
    RingMatrix w_int; // residual when split, full weight otherwise
    std::optional<std::vector<double>> bias;
    Activation act = Activation::identity;
    bool split = false;
};

struct DavidState {
    RingParams ring;
    ModelKind kind = ModelKind::mlp;
    uint32_t tokens = 1;
    bool head_engaged = false;
    std::vector<DavidLayer> layers;

    OpCounters counters;

    uint32_t n_layers() const { return static_cast<uint32_t>(layers.size()); }
    TopologyInfo topology() const;
};

/// Build both parties' states from a planned decomposition. David's split
/// entries hold only the integer residual; Charlie keeps the factored part,
/// a bit-identical copy of the residual, and the split layers' biases.
std::pair<CharlieState, DavidState> build_party_states(const ModelParams& model,
                                                       const ModelDecomposition& decomp,
                                                       const RingParams& ring, uint64_t mask_seed,
                                                       uint64_t mask_stream = 0,
                                                       uint32_t tokens = 1);

/// Draw fresh (pad, cancellation) pairs for the next `inference_budget`
/// inference ids, one pair per (inference, layer, path) that the schedule
/// needs. Pairs are never shared across inferences.
void precompute(CharlieState& charlie, uint64_t inference_budget);

enum class ProtocolMode : uint8_t { secure = 0, insecure = 1 };

/// Charlie's reactive endpoint: consumes one frame, returns its replies.
class CharlieEndpoint {
public:
    explicit CharlieEndpoint(CharlieState state, ProtocolMode mode = ProtocolMode::secure);

    ProtocolMessage handle_setup(const ProtocolMessage& setup) const;
    std::vector<ProtocolMessage> on_message(const ProtocolMessage& msg);
    void abort_inference(uint64_t inference_id);

    CharlieState& state() { return state_; }
    ProtocolMode mode() const { return mode_; }
    const std::optional<FixedVec>& last_output() const { return last_output_; }
    bool inference_active() const { return scratch_.active; }
    uint64_t active_inference_id() const { return scratch_.inference_id; }

private:
    struct InferenceScratch {
        bool active = false;
        uint64_t inference_id = 0;
        uint32_t awaiting_layer = 0;   // layer whose MaskedPartial is pending
        FixedVec a_current;            // activation Charlie currently holds
        // attention double step
        bool awaiting_q = false, awaiting_k = false, awaiting_v = false;
        FixedVec zq, zk;
        Mat x_grid;     // grid input tokens
        Mat stage_grid; // grid payload feeding the next factored part
    };

    std::vector<ProtocolMessage> start_mlp_inference(const ProtocolMessage& msg);
    std::vector<ProtocolMessage> start_attention_inference(const ProtocolMessage& msg);
    std::vector<ProtocolMessage> mlp_masking_step(uint32_t layer);
    std::vector<ProtocolMessage> mlp_after_partial(const ProtocolMessage& msg);
    std::vector<ProtocolMessage> attention_after_partial(const ProtocolMessage& msg);
    std::vector<ProtocolMessage> emit_layer_result(FixedVec a_next, uint32_t done_layer);
    std::vector<ProtocolMessage> begin_output_projection();

    ProtocolMessage vec_msg(MsgType type, uint32_t layer, Path path, FixedVec payload) const;
    FixedVec apply_mask(const FixedVec& a, uint32_t layer, Path path);
    FixedVec remove_mask(const FixedVec& reply, uint32_t layer, Path path);

    CharlieState state_;
    ProtocolMode mode_;
    InferenceScratch scratch_;
    std::optional<FixedVec> last_output_;
};

/// Blocking frame transport from David's point of view.
struct MessageTransport {
    virtual ~MessageTransport() = default;
    virtual void send(const ProtocolMessage& msg) = 0;
    virtual ProtocolMessage recv() = 0;
};

/// In-memory transport pumping a CharlieEndpoint directly.
class LocalChannel : public MessageTransport {
public:
    explicit LocalChannel(CharlieEndpoint& charlie) : charlie_(charlie) {}
    void send(const ProtocolMessage& msg) override;
    ProtocolMessage recv() override;

private:
    CharlieEndpoint& charlie_;
    std::vector<ProtocolMessage> queue_;
    size_t head_ = 0;
};

/// David's driving endpoint: walks the schedule, does his local compute, and
/// returns the inference output (which both parties end up holding).
class DavidEndpoint {
public:
    explicit DavidEndpoint(DavidState state, ProtocolMode mode = ProtocolMode::secure);

    ProtocolMessage setup_message(uint64_t session_id) const;
    FixedVec run_inference(const FixedVec& x_int, uint64_t inference_id,
                           MessageTransport& channel, Transcript* transcript = nullptr);

    DavidState& state() { return state_; }

private:
    FixedVec local_layer(uint32_t layer, const FixedVec& a);
    FixedVec local_attention_head(const FixedVec& x_int);

    DavidState state_;
    ProtocolMode mode_;
    uint64_t session_id_ = 0;
};

// ---- single-layer step and whole-model runners (in-memory) ----

FixedVec secure_layer_step(CharlieState& charlie, DavidState& david, const FixedVec& a_prev,
                           uint32_t layer, uint64_t inference_id);
FixedVec insecure_layer_step(CharlieState& charlie, DavidState& david, const FixedVec& a_prev,
                             uint32_t layer);

FixedVec run_mlp_hybrid(CharlieEndpoint& charlie, DavidEndpoint& david, const FixedVec& x_int,
                        uint64_t inference_id, Transcript* transcript = nullptr);
FixedVec run_attention_hybrid(CharlieEndpoint& charlie, DavidEndpoint& david,
                              const FixedVec& x_int, uint64_t inference_id,
                              Transcript* transcript = nullptr);

/// Frame-type schedule for a plan: pure function of the topology.
std::vector<std::pair<Direction, MsgType>> expected_schedule(const TopologyInfo& topology);

} // namespace slip
