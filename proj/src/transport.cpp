#include "slip/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include "slip/errors.hpp"

namespace slip {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'P', '1'};

template <typename T>
void put(std::vector<uint8_t>& out, T v) {
    for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get(const std::vector<uint8_t>& buf, size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw MalformedFrame("frame truncated");
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[pos + i]) << (8 * i);
    pos += sizeof(T);
    return v;
}

bool is_vector_type(MsgType t) {
    switch (t) {
        case MsgType::inference_input:
        case MsgType::masked_activation:
        case MsgType::masked_partial:
        case MsgType::plain_activation:
        case MsgType::inference_output: return true;
        case MsgType::setup: return false;
    }
    return false;
}

uint32_t wire_logical_scale(MsgType t) {
    return t == MsgType::masked_partial ? 2 : 1;
}

} // namespace

std::vector<uint8_t> encode_frame(const ProtocolMessage& msg) {
    std::vector<uint8_t> payload;
    if (msg.type == MsgType::setup) {
        put<uint8_t>(payload, msg.version);
        put<uint64_t>(payload, msg.ring.modulus_L);
        put<uint64_t>(payload, msg.ring.scale);
        put<uint8_t>(payload, static_cast<uint8_t>(msg.ring.headroom_bits));
        put<uint8_t>(payload, static_cast<uint8_t>(msg.topology.kind));
        put<uint32_t>(payload, msg.topology.tokens);
        put<uint32_t>(payload, static_cast<uint32_t>(msg.topology.layers.size()));
        for (const LayerShape& s : msg.topology.layers) {
            put<uint32_t>(payload, s.rows);
            put<uint32_t>(payload, s.cols);
            put<uint8_t>(payload, s.split ? 1 : 0);
        }
    } else {
        payload.reserve(msg.payload.values.size() * 8);
        for (uint64_t v : msg.payload.values) put<uint64_t>(payload, v);
    }

    std::vector<uint8_t> out;
    out.reserve(kFrameHeaderBytes + payload.size());
    out.insert(out.end(), kMagic, kMagic + 4);
    put<uint8_t>(out, static_cast<uint8_t>(msg.type));
    put<uint64_t>(out, msg.session_id);
    put<uint64_t>(out, msg.inference_id);
    put<uint32_t>(out, msg.layer_id);
    put<uint8_t>(out, static_cast<uint8_t>(msg.path));
    put<uint32_t>(out, static_cast<uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

size_t frame_length(const uint8_t* header, size_t available, size_t max_frame_bytes) {
    if (available < kFrameHeaderBytes) throw MalformedFrame("header truncated");
    if (std::memcmp(header, kMagic, 4) != 0) throw MalformedFrame("bad magic");
    uint32_t payload_len = 0;
    for (int i = 0; i < 4; ++i)
        payload_len |= static_cast<uint32_t>(header[26 + i]) << (8 * i);
    size_t total = kFrameHeaderBytes + payload_len;
    if (total > max_frame_bytes) throw MalformedFrame("frame exceeds max size");
    return total;
}

ProtocolMessage decode_frame(const std::vector<uint8_t>& bytes, const RingParams* ring,
                             size_t max_frame_bytes) {
    if (bytes.size() > max_frame_bytes) throw MalformedFrame("frame exceeds max size");
    size_t pos = 0;
    if (bytes.size() < kFrameHeaderBytes) throw MalformedFrame("header truncated");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw MalformedFrame("bad magic");
    pos = 4;

    ProtocolMessage msg;
    uint8_t raw_type = get<uint8_t>(bytes, pos);
    if (raw_type < 1 || raw_type > 6) throw MalformedFrame("unknown msg_type");
    msg.type = static_cast<MsgType>(raw_type);
    msg.session_id = get<uint64_t>(bytes, pos);
    msg.inference_id = get<uint64_t>(bytes, pos);
    msg.layer_id = get<uint32_t>(bytes, pos);
    uint8_t raw_path = get<uint8_t>(bytes, pos);
    if (raw_path > 3) throw MalformedFrame("unknown path");
    msg.path = static_cast<Path>(raw_path);
    uint32_t payload_len = get<uint32_t>(bytes, pos);
    if (pos + payload_len != bytes.size()) throw MalformedFrame("payload length mismatch");

    if (msg.type == MsgType::setup) {
        msg.version = get<uint8_t>(bytes, pos);
        uint64_t modulus = get<uint64_t>(bytes, pos);
        uint64_t scale = get<uint64_t>(bytes, pos);
        uint8_t headroom = get<uint8_t>(bytes, pos);
        try {
            msg.ring = RingParams(modulus, scale, headroom);
        } catch (const DomainError& e) {
            throw MalformedFrame(std::string("setup ring rejected: ") + e.what());
        }
        uint8_t kind = get<uint8_t>(bytes, pos);
        if (kind > 2) throw MalformedFrame("unknown model kind");
        msg.topology.kind = static_cast<ModelKind>(kind);
        msg.topology.tokens = get<uint32_t>(bytes, pos);
        if (msg.topology.tokens == 0) throw MalformedFrame("zero tokens");
        uint32_t n_layers = get<uint32_t>(bytes, pos);
        if (n_layers > 65536) throw MalformedFrame("implausible layer count");
        for (uint32_t i = 0; i < n_layers; ++i) {
            LayerShape s;
            s.rows = get<uint32_t>(bytes, pos);
            s.cols = get<uint32_t>(bytes, pos);
            s.split = get<uint8_t>(bytes, pos) != 0;
            msg.topology.layers.push_back(s);
        }
        if (pos != bytes.size()) throw MalformedFrame("trailing bytes in setup frame");
        return msg;
    }

    if (!is_vector_type(msg.type)) throw MalformedFrame("unknown msg_type");
    if (payload_len % 8 != 0) throw MalformedFrame("payload not a whole number of residues");
    msg.payload.logical_scale = wire_logical_scale(msg.type);
    msg.payload.values.reserve(payload_len / 8);
    for (uint32_t i = 0; i < payload_len / 8; ++i) {
        uint64_t v = get<uint64_t>(bytes, pos);
        if (ring && v >= ring->modulus_L) throw MalformedFrame("residue >= modulus");
        msg.payload.values.push_back(v);
    }
    return msg;
}

// ------------------------------ InMemoryDuplex ------------------------------

struct InMemoryDuplex::Impl {
    struct Pipe {
        std::deque<uint8_t> buf;
        bool closed = false;
    };
    std::mutex m;
    std::condition_variable cv;
    Pipe to_charlie, to_david;

    class End : public ByteChannel {
    public:
        End(Impl* impl, Pipe* in, Pipe* out) : impl_(impl), in_(in), out_(out) {}
        void write_all(const uint8_t* data, size_t n) override {
            std::lock_guard<std::mutex> lk(impl_->m);
            if (out_->closed) throw ConnectionClosed("pipe closed");
            out_->buf.insert(out_->buf.end(), data, data + n);
            impl_->cv.notify_all();
        }
        void read_all(uint8_t* data, size_t n) override {
            std::unique_lock<std::mutex> lk(impl_->m);
            impl_->cv.wait(lk, [&] { return in_->buf.size() >= n || in_->closed; });
            if (in_->buf.size() < n) throw ConnectionClosed("pipe closed");
            for (size_t i = 0; i < n; ++i) {
                data[i] = in_->buf.front();
                in_->buf.pop_front();
            }
        }

    private:
        Impl* impl_;
        Pipe* in_;
        Pipe* out_;
    };

    End charlie_end{this, &to_charlie, &to_david};
    End david_end{this, &to_david, &to_charlie};
};

InMemoryDuplex::InMemoryDuplex() : impl_(std::make_unique<Impl>()) {}
InMemoryDuplex::~InMemoryDuplex() { close(); }

ByteChannel& InMemoryDuplex::charlie_side() { return impl_->charlie_end; }
ByteChannel& InMemoryDuplex::david_side() { return impl_->david_end; }

void InMemoryDuplex::close() {
    std::lock_guard<std::mutex> lk(impl_->m);
    impl_->to_charlie.closed = impl_->to_david.closed = true;
    impl_->cv.notify_all();
}

// -------------------------------- TcpChannel --------------------------------

TcpChannel::TcpChannel(int fd, double timeout_sec) : fd_(fd) {
    timeval tv;
    tv.tv_sec = static_cast<long>(timeout_sec);
    tv.tv_usec = static_cast<long>((timeout_sec - static_cast<double>(tv.tv_sec)) * 1e6);
    setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpChannel::~TcpChannel() {
    if (fd_ >= 0) ::close(fd_);
}

void TcpChannel::write_all(const uint8_t* data, size_t n) {
    size_t sent = 0;
    while (sent < n) {
        ssize_t w = ::send(fd_, data + sent, n - sent, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK) throw Timeout("send timed out");
            throw ConnectionClosed("send failed");
        }
        sent += static_cast<size_t>(w);
    }
}

void TcpChannel::read_all(uint8_t* data, size_t n) {
    size_t got = 0;
    while (got < n) {
        ssize_t r = ::recv(fd_, data + got, n - got, 0);
        if (r == 0) throw ConnectionClosed("peer closed");
        if (r < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK) throw Timeout("recv timed out");
            throw ConnectionClosed("recv failed");
        }
        got += static_cast<size_t>(r);
    }
}

std::unique_ptr<TcpChannel> TcpChannel::connect(const std::string& host, uint16_t port,
                                                double timeout_sec) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ConnectionClosed("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw ConnectionClosed("bad address: " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd);
        throw ConnectionClosed("connect failed");
    }
    return std::make_unique<TcpChannel>(fd, timeout_sec);
}

// --------------------------------- FrameIO ---------------------------------

void FrameIO::send(const ProtocolMessage& msg) {
    std::vector<uint8_t> bytes = encode_frame(msg);
    if (bytes.size() > max_frame_bytes_) throw MalformedFrame("frame exceeds max size");
    channel_.write_all(bytes.data(), bytes.size());
}

ProtocolMessage FrameIO::recv(const RingParams* ring) {
    std::vector<uint8_t> bytes(kFrameHeaderBytes);
    channel_.read_all(bytes.data(), kFrameHeaderBytes);
    size_t total = frame_length(bytes.data(), bytes.size(), max_frame_bytes_);
    bytes.resize(total);
    if (total > kFrameHeaderBytes)
        channel_.read_all(bytes.data() + kFrameHeaderBytes, total - kFrameHeaderBytes);
    return decode_frame(bytes, ring, max_frame_bytes_);
}

// ----------------------------- Charlie sessions -----------------------------

size_t serve_charlie_session(CharlieEndpoint& charlie, ByteChannel& channel,
                             size_t max_frame_bytes) {
    FrameIO io(channel, max_frame_bytes);
    const RingParams ring = charlie.state().ring;

    // handshake: no residue validation before the ring is agreed
    ProtocolMessage setup = io.recv(nullptr);
    io.send(charlie.handle_setup(setup));

    size_t completed = 0;
    for (;;) {
        ProtocolMessage msg;
        try {
            msg = io.recv(&ring);
        } catch (const ConnectionClosed&) {
            break; // client done, or dropped mid-inference (abort below)
        } catch (const Timeout&) {
            break;
        }
        bool was_active = charlie.inference_active();
        uint64_t active_id = charlie.active_inference_id();
        try {
            for (const ProtocolMessage& reply : charlie.on_message(msg)) io.send(reply);
        } catch (const Error&) {
            charlie.abort_inference(msg.type == MsgType::inference_input ? msg.inference_id
                                                                         : active_id);
            throw;
        }
        if ((was_active || msg.type == MsgType::inference_input) && !charlie.inference_active())
            ++completed;
    }
    if (charlie.inference_active()) charlie.abort_inference(charlie.active_inference_id());
    return completed;
}

// ------------------------------- CharlieServer ------------------------------

CharlieServer::CharlieServer(const EndpointConfig& config, StateFactory factory)
    : config_(config), factory_(std::move(factory)) {}

CharlieServer::~CharlieServer() { stop(); }

void CharlieServer::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ConnectionClosed("socket() failed");
    int one = 1;
    setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(config_.port);
    if (inet_pton(AF_INET, config_.host.c_str(), &addr.sin_addr) != 1)
        throw ConnectionClosed("bad bind address: " + config_.host);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw ConnectionClosed("bind failed");
    if (::listen(listen_fd_, 8) != 0) throw ConnectionClosed("listen failed");
    // accept() honors the receive timeout, so the loop can notice stop()
    timeval tv{0, 200000};
    setsockopt(listen_fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    socklen_t len = sizeof(addr);
    getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void CharlieServer::accept_loop() {
    while (running_) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_) break;
            continue;
        }
        {
            std::lock_guard<std::mutex> lk(session_fds_mutex_);
            session_fds_.push_back(fd);
        }
        uint64_t session = next_session_.fetch_add(1);
        sessions_.emplace_back([this, fd, session] {
            TcpChannel channel(fd, config_.session_timeout_sec);
            try {
                CharlieEndpoint endpoint = factory_(session);
                serve_charlie_session(endpoint, channel, config_.max_frame_bytes);
            } catch (const Error&) {
                // session aborted; socket closes on scope exit
            }
        });
    }
}

void CharlieServer::stop() {
    if (!running_) return;
    running_ = false;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    {
        // unblock session threads still waiting on their peers
        std::lock_guard<std::mutex> lk(session_fds_mutex_);
        for (int fd : session_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    for (std::thread& t : sessions_)
        if (t.joinable()) t.join();
    sessions_.clear();
}

// --------------------------------- client ----------------------------------

std::vector<FixedVec> david_request_inference(ByteChannel& channel, DavidEndpoint& david,
                                              const std::vector<FixedVec>& inputs,
                                              uint64_t first_inference_id, uint64_t session_id,
                                              std::vector<Transcript>* transcripts) {
    FrameIO io(channel);
    io.send(david.setup_message(session_id));
    ProtocolMessage reply = io.recv(nullptr);
    if (reply.type != MsgType::setup) throw TopologyMismatch("expected setup echo");
    if (reply.version != kProtocolVersion)
        throw VersionMismatch("server protocol version " + std::to_string(reply.version));
    if (!(reply.ring == david.state().ring)) throw TopologyMismatch("server ring differs");

    WireTransport transport(channel, david.state().ring);
    std::vector<FixedVec> outputs;
    for (size_t i = 0; i < inputs.size(); ++i) {
        Transcript* t = nullptr;
        if (transcripts) {
            transcripts->emplace_back();
            t = &transcripts->back();
        }
        outputs.push_back(
            david.run_inference(inputs[i], first_inference_id + i, transport, t));
    }
    return outputs;
}

} // namespace slip
