#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <thread>

#include "comm_impl.hpp"
#include "oocnmf/error.hpp"

namespace oocnmf {

namespace {

// Wire format: every message is a length-prefixed frame.
//   u64 frame_len (bytes after this field)
//   header { u64 group_id, u64 seq, u32 phase_tag, u64 rows, u64 cols }
//   payload: rows*cols little-endian f64
#pragma pack(push, 1)
struct FrameHeader {
    std::uint64_t group_id;
    std::uint64_t seq;
    std::uint32_t phase_tag;
    std::uint64_t rows;
    std::uint64_t cols;
};
#pragma pack(pop)

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close_fd();
            fd_ = o.fd_;
            o.fd_ = -1;
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close_fd(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }

    void set_timeout(double seconds) const {
        timeval tv{};
        tv.tv_sec = static_cast<time_t>(seconds);
        tv.tv_usec = static_cast<suseconds_t>((seconds - static_cast<double>(tv.tv_sec)) * 1e6);
        setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
        setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
        int one = 1;
        setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }

    void send_all(const void* data, std::size_t len) const {
        const char* p = static_cast<const char*>(data);
        while (len > 0) {
            const ssize_t n = ::send(fd_, p, len, MSG_NOSIGNAL);
            if (n <= 0) throw CommError("tcp send failed: " + std::string(std::strerror(errno)));
            p += n;
            len -= static_cast<std::size_t>(n);
        }
    }

    void recv_all(void* data, std::size_t len) const {
        char* p = static_cast<char*>(data);
        while (len > 0) {
            const ssize_t n = ::recv(fd_, p, len, 0);
            if (n == 0) throw CommError("tcp peer closed the connection");
            if (n < 0) throw CommError("tcp recv failed: " + std::string(std::strerror(errno)));
            p += n;
            len -= static_cast<std::size_t>(n);
        }
    }

private:
    void close_fd() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_ = -1;
};

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& ep) {
    const auto colon = ep.rfind(':');
    if (colon == std::string::npos)
        throw ShapeError("endpoint must be host:port, got " + ep);
    return {ep.substr(0, colon), static_cast<std::uint16_t>(std::stoi(ep.substr(colon + 1)))};
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
            throw CommError("cannot resolve host: " + host);
        addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
        freeaddrinfo(res);
    }
    return addr;
}

void send_frame(const Socket& s, const FrameHeader& h, const double* payload) {
    const std::uint64_t payload_bytes = h.rows * h.cols * sizeof(double);
    const std::uint64_t frame_len = sizeof(FrameHeader) + payload_bytes;
    s.send_all(&frame_len, sizeof(frame_len));
    s.send_all(&h, sizeof(h));
    if (payload_bytes > 0) s.send_all(payload, payload_bytes);
}

FrameHeader recv_frame(const Socket& s, std::vector<double>& payload) {
    std::uint64_t frame_len = 0;
    s.recv_all(&frame_len, sizeof(frame_len));
    if (frame_len < sizeof(FrameHeader)) throw CommError("tcp frame shorter than header");
    FrameHeader h{};
    s.recv_all(&h, sizeof(h));
    const std::uint64_t payload_bytes = frame_len - sizeof(FrameHeader);
    if (payload_bytes != h.rows * h.cols * sizeof(double))
        throw CommError("tcp frame length disagrees with header shape");
    payload.resize(h.rows * h.cols);
    if (payload_bytes > 0) s.recv_all(payload.data(), payload_bytes);
    return h;
}

} // namespace

namespace detail {

/// Root-based reduction over TCP: every rank ships its buffer to rank 0,
/// rank 0 sums ascending rank and broadcasts. Arithmetic is therefore
/// identical to the in-process backends.
class TcpImpl final : public CollectiveImpl {
public:
    TcpImpl(int n, int rank, const std::vector<std::string>& peers, std::uint64_t group_id,
            double timeout_s)
        : CollectiveImpl(n), my_rank_(rank), group_id_(group_id), timeout_s_(timeout_s) {
        if (rank < 0 || rank >= n) throw ShapeError("tcp rank out of range");
        if (peers.empty()) throw ShapeError("tcp backend needs endpoint addresses");
        const auto [host, port] = parse_endpoint(peers[0]);
        if (rank == 0)
            accept_peers(port);
        else
            connect_to_root(host, port);
    }

    void all_reduce_sum(int rank, DenseMatrix& buffer, PhaseTag tag) override {
        if (poisoned_) throw CommError("comm group poisoned: " + poison_msg_);
        try {
            const std::uint64_t seq = ++seq_;
            FrameHeader h{group_id_, seq, static_cast<std::uint32_t>(tag), buffer.rows(),
                          buffer.cols()};
            if (rank == 0) {
                std::vector<double> incoming;
                for (int r = 1; r < n_; ++r) {
                    const FrameHeader peer = recv_frame(peers_[static_cast<std::size_t>(r - 1)],
                                                        incoming);
                    if (peer.group_id != group_id_ || peer.seq != seq ||
                        peer.phase_tag != h.phase_tag || peer.rows != h.rows ||
                        peer.cols != h.cols)
                        throw CommError("collective mismatch from rank " + std::to_string(r) +
                                        ": seq " + std::to_string(peer.seq) + " vs " +
                                        std::to_string(seq) + ", shape " +
                                        std::to_string(peer.rows) + "x" +
                                        std::to_string(peer.cols) + " vs " + buffer.shape_str());
                    double* dst = buffer.data();
                    for (index_t i = 0; i < buffer.size(); ++i) dst[i] += incoming[i];
                }
                for (int r = 1; r < n_; ++r)
                    send_frame(peers_[static_cast<std::size_t>(r - 1)], h, buffer.data());
            } else {
                send_frame(root_, h, buffer.data());
                std::vector<double> result;
                const FrameHeader res = recv_frame(root_, result);
                if (res.seq != seq || res.rows != h.rows || res.cols != h.cols)
                    throw CommError("tcp reduce result does not match request");
                std::memcpy(buffer.data(), result.data(), result.size() * sizeof(double));
            }
        } catch (const CommError& e) {
            poisoned_ = true;
            poison_msg_ = e.what();
            throw;
        }
    }

private:
    void accept_peers(std::uint16_t port) {
        Socket listener(::socket(AF_INET, SOCK_STREAM, 0));
        if (!listener.valid()) throw CommError("tcp socket() failed");
        int one = 1;
        setsockopt(listener.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        addr.sin_port = htons(port);
        if (bind(listener.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw CommError("tcp bind failed on port " + std::to_string(port) + ": " +
                            std::strerror(errno));
        if (listen(listener.fd(), n_) != 0) throw CommError("tcp listen failed");
        listener.set_timeout(timeout_s_);

        peers_.resize(static_cast<std::size_t>(n_ - 1));
        std::vector<bool> seen(static_cast<std::size_t>(n_), false);
        for (int i = 1; i < n_; ++i) {
            Socket s(::accept(listener.fd(), nullptr, nullptr));
            if (!s.valid())
                throw CommError("tcp accept timed out waiting for " +
                                std::to_string(n_ - i) + " peer(s)");
            s.set_timeout(timeout_s_);
            std::uint64_t hello[2];
            s.recv_all(hello, sizeof(hello));
            if (hello[0] != group_id_) throw CommError("tcp hello from wrong group");
            const auto r = hello[1];
            if (r == 0 || r >= static_cast<std::uint64_t>(n_) || seen[r])
                throw CommError("tcp hello with invalid or duplicate rank " + std::to_string(r));
            seen[r] = true;
            peers_[r - 1] = std::move(s);
        }
    }

    void connect_to_root(const std::string& host, std::uint16_t port) {
        const auto addr = resolve(host, port);
        const auto deadline =
            std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s_);
        for (;;) {
            Socket s(::socket(AF_INET, SOCK_STREAM, 0));
            if (!s.valid()) throw CommError("tcp socket() failed");
            if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
                s.set_timeout(timeout_s_);
                const std::uint64_t hello[2] = {group_id_,
                                                static_cast<std::uint64_t>(my_rank_)};
                s.send_all(hello, sizeof(hello));
                root_ = std::move(s);
                return;
            }
            if (std::chrono::steady_clock::now() >= deadline)
                throw CommError("tcp connect to " + host + ":" + std::to_string(port) +
                                " timed out");
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
    }

    int my_rank_;
    std::uint64_t group_id_;
    double timeout_s_;
    Socket root_;                 // rank > 0: connection to rank 0
    std::vector<Socket> peers_;   // rank 0: index r-1 holds rank r
    std::uint64_t seq_ = 0;
    bool poisoned_ = false;
    std::string poison_msg_;
};

} // namespace detail

CommHandle connect_tcp(int n, int rank, const std::vector<std::string>& peers,
                       std::uint64_t group_id, double timeout_s) {
    if (n < 1) throw ShapeError("connect_tcp: need at least one rank");
    auto impl = std::make_shared<detail::TcpImpl>(n, rank, peers, group_id, timeout_s);
    return detail::make_handle(std::move(impl), rank);
}

} // namespace oocnmf
