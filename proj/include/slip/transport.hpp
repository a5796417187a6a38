#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "slip/protocol.hpp"

namespace slip {

/// Frame layout, all integers little-endian:
///   magic "SLP1" | msg_type u8 | session_id u64 | inference_id u64 |
///   layer_id u32 | path u8 | payload_len u32 | payload
/// payload is 8 bytes per ring residue. Setup frames instead carry:
///   version u8 | modulus u64 | scale u64 | headroom u8 | kind u8 |
///   tokens u32 | n_layers u32 | n_layers x (rows u32, cols u32, split u8)
constexpr size_t kFrameHeaderBytes = 30;
constexpr size_t kDefaultMaxFrameBytes = 1u << 24;

std::vector<uint8_t> encode_frame(const ProtocolMessage& msg);

/// Decodes one frame. Residue payloads are validated against the ring when
/// one is supplied (everything but the setup handshake). Throws
/// MalformedFrame on bad magic, truncation, oversized payloads, or residues
/// >= L; never crashes on arbitrary bytes.
ProtocolMessage decode_frame(const std::vector<uint8_t>& bytes, const RingParams* ring,
                             size_t max_frame_bytes = kDefaultMaxFrameBytes);

/// Frame length implied by a complete header (for stream reassembly).
size_t frame_length(const uint8_t* header, size_t available, size_t max_frame_bytes);

enum class Role : uint8_t { charlie = 0, david = 1 };

struct EndpointConfig {
    Role role = Role::charlie;
    std::string host = "127.0.0.1";
    uint16_t port = 0;
    size_t max_frame_bytes = kDefaultMaxFrameBytes;
    double session_timeout_sec = 10.0;
};

/// Blocking byte stream with exact-read semantics.
class ByteChannel {
public:
    virtual ~ByteChannel() = default;
    virtual void write_all(const uint8_t* data, size_t n) = 0;
    /// Reads exactly n bytes; throws ConnectionClosed / Timeout.
    virtual void read_all(uint8_t* data, size_t n) = 0;
};

/// Two-ended in-memory duplex pipe.
class InMemoryDuplex {
public:
    InMemoryDuplex();
    ByteChannel& charlie_side();
    ByteChannel& david_side();
    void close();
    ~InMemoryDuplex();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Connected TCP socket wrapper.
class TcpChannel : public ByteChannel {
public:
    explicit TcpChannel(int fd, double timeout_sec);
    ~TcpChannel() override;
    TcpChannel(const TcpChannel&) = delete;
    TcpChannel& operator=(const TcpChannel&) = delete;

    void write_all(const uint8_t* data, size_t n) override;
    void read_all(uint8_t* data, size_t n) override;

    static std::unique_ptr<TcpChannel> connect(const std::string& host, uint16_t port,
                                               double timeout_sec);

private:
    int fd_;
};

/// Frame reader/writer over a byte channel.
class FrameIO {
public:
    FrameIO(ByteChannel& channel, size_t max_frame_bytes = kDefaultMaxFrameBytes)
        : channel_(channel), max_frame_bytes_(max_frame_bytes) {}

    void send(const ProtocolMessage& msg);
    ProtocolMessage recv(const RingParams* ring);

private:
    ByteChannel& channel_;
    size_t max_frame_bytes_;
};

/// MessageTransport over a byte channel, for DavidEndpoint::run_inference.
class WireTransport : public MessageTransport {
public:
    WireTransport(ByteChannel& channel, RingParams ring,
                  size_t max_frame_bytes = kDefaultMaxFrameBytes)
        : io_(channel, max_frame_bytes), ring_(ring) {}

    void send(const ProtocolMessage& msg) override { io_.send(msg); }
    ProtocolMessage recv() override { return io_.recv(&ring_); }

private:
    FrameIO io_;
    RingParams ring_;
};

/// Runs Charlie's side of one session over a byte channel: setup handshake,
/// then frames until the peer closes. Aborted inferences have their pool
/// entries retired. Returns the number of completed inferences.
size_t serve_charlie_session(CharlieEndpoint& charlie, ByteChannel& channel,
                             size_t max_frame_bytes = kDefaultMaxFrameBytes);

/// TCP server hosting one CharlieEndpoint per connection.
class CharlieServer {
public:
    using StateFactory = std::function<CharlieEndpoint(uint64_t session_id)>;

    CharlieServer(const EndpointConfig& config, StateFactory factory);
    ~CharlieServer();

    void start();
    void stop();
    uint16_t port() const { return port_; }

private:
    void accept_loop();

    EndpointConfig config_;
    StateFactory factory_;
    int listen_fd_ = -1;
    uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::vector<std::thread> sessions_;
    std::mutex session_fds_mutex_;
    std::vector<int> session_fds_;
    std::atomic<uint64_t> next_session_{1};
};

/// Client-side full run: handshake then a batch of inferences over one
/// connected session. Outputs land in the same order as the inputs.
std::vector<FixedVec> david_request_inference(ByteChannel& channel, DavidEndpoint& david,
                                              const std::vector<FixedVec>& inputs,
                                              uint64_t first_inference_id, uint64_t session_id,
                                              std::vector<Transcript>* transcripts = nullptr);

} // namespace slip
