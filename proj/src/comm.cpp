#include "oocnmf/comm.hpp"

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <mutex>

#include "comm_impl.hpp"
#include "oocnmf/error.hpp"

namespace oocnmf {

Backend backend_from_string(const std::string& s) {
    if (s == "loopback") return Backend::loopback;
    if (s == "threads") return Backend::threads;
    if (s == "tcp") return Backend::tcp;
    throw ShapeError("unknown backend: " + s);
}

index_t CollectiveStats::total_bytes() const {
    index_t n = 0;
    for (const auto& t : per_tag) n += t.bytes;
    return n;
}
index_t CollectiveStats::total_calls() const {
    index_t n = 0;
    for (const auto& t : per_tag) n += t.calls;
    return n;
}
double CollectiveStats::total_seconds() const {
    double n = 0;
    for (const auto& t : per_tag) n += t.seconds;
    return n;
}

namespace detail {

class LoopbackImpl final : public CollectiveImpl {
public:
    LoopbackImpl() : CollectiveImpl(1) {}
    void all_reduce_sum(int, DenseMatrix&, PhaseTag) override {}
};

// --------------------------------------------------------------------------

/// In-process rendezvous for N worker threads. The last thread to arrive
/// performs the ascending-rank reduction; each round's result lives in a
/// fresh shared_ptr so slow leavers can never observe the next round.
class ThreadsImpl final : public CollectiveImpl {
public:
    ThreadsImpl(int n, double timeout_s)
        : CollectiveImpl(n), timeout_s_(timeout_s), bufs_(static_cast<std::size_t>(n), nullptr),
          rank_seq_(static_cast<std::size_t>(n), 0) {}

    void all_reduce_sum(int rank, DenseMatrix& buffer, PhaseTag tag) override {
        std::unique_lock lk(m_);
        check_poison();
        const std::uint64_t my_seq = ++rank_seq_[static_cast<std::size_t>(rank)];
        if (arrived_ == 0) {
            round_seq_ = my_seq;
            round_rows_ = buffer.rows();
            round_cols_ = buffer.cols();
            round_tag_ = tag;
        } else if (my_seq != round_seq_ || buffer.rows() != round_rows_ ||
                   buffer.cols() != round_cols_ || tag != round_tag_) {
            poison("collective mismatch at rank " + std::to_string(rank) + ": seq " +
                   std::to_string(my_seq) + " vs " + std::to_string(round_seq_) + ", shape " +
                   buffer.shape_str() + " vs " + std::to_string(round_rows_) + "x" +
                   std::to_string(round_cols_));
            cv_.notify_all();
            throw CommError(poison_msg_);
        }
        bufs_[static_cast<std::size_t>(rank)] = &buffer;
        ++arrived_;

        std::shared_ptr<DenseMatrix> result;
        if (arrived_ == n_) {
            result = std::make_shared<DenseMatrix>(*bufs_[0]);
            for (int r = 1; r < n_; ++r) {
                const double* src = bufs_[static_cast<std::size_t>(r)]->data();
                double* dst = result->data();
                for (index_t i = 0; i < result->size(); ++i) dst[i] += src[i];
            }
            round_result_ = result;
            arrived_ = 0;
            ++gen_;
            cv_.notify_all();
        } else {
            const std::uint64_t g = gen_;
            if (!cv_.wait_for(lk, std::chrono::duration<double>(timeout_s_),
                              [&] { return gen_ != g || poisoned_; })) {
                poison("collective timeout at rank " + std::to_string(rank) + " after " +
                       std::to_string(timeout_s_) + " s");
                cv_.notify_all();
                throw CommError(poison_msg_);
            }
            check_poison();
            result = round_result_;
        }
        lk.unlock();
        buffer = *result;
    }

private:
    void check_poison() const {
        if (poisoned_) throw CommError(poison_msg_);
    }
    void poison(const std::string& msg) {
        poisoned_ = true;
        poison_msg_ = "comm group poisoned: " + msg;
    }

    double timeout_s_;
    std::mutex m_;
    std::condition_variable cv_;
    std::vector<DenseMatrix*> bufs_;
    std::vector<std::uint64_t> rank_seq_;
    std::shared_ptr<DenseMatrix> round_result_;
    std::uint64_t round_seq_ = 0;
    index_t round_rows_ = 0, round_cols_ = 0;
    PhaseTag round_tag_ = PhaseTag::generic;
    int arrived_ = 0;
    std::uint64_t gen_ = 0;
    bool poisoned_ = false;
    std::string poison_msg_;
};

CommHandle make_handle(std::shared_ptr<CollectiveImpl> impl, int rank) {
    return CommHandle(std::move(impl), rank);
}

} // namespace detail

CommHandle::CommHandle(std::shared_ptr<detail::CollectiveImpl> impl, int rank)
    : impl_(std::move(impl)), rank_(rank) {}

int CommHandle::size() const { return impl_ ? impl_->size() : 0; }

void CommHandle::all_reduce_sum(DenseMatrix& buffer, PhaseTag tag) {
    if (!impl_) throw CommError("all_reduce_sum on an unconnected handle");
    const auto t0 = std::chrono::steady_clock::now();
    impl_->all_reduce_sum(rank_, buffer, tag);
    auto& s = (*stats_)[tag];
    s.calls += 1;
    s.bytes += buffer.size() * sizeof(double);
    s.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void CommHandle::barrier() {
    DenseMatrix empty(0, 0);
    all_reduce_sum(empty, PhaseTag::barrier);
}

void CommHandle::reset_stats() { *stats_ = CollectiveStats{}; }

CommGroup spawn_group(int n, Backend backend, double timeout_s) {
    if (n < 1) throw ShapeError("spawn_group: need at least one rank");
    CommGroup group;
    switch (backend) {
        case Backend::loopback: {
            if (n != 1) throw ShapeError("loopback backend supports exactly one rank");
            group.handles.push_back(
                detail::make_handle(std::make_shared<detail::LoopbackImpl>(), 0));
            break;
        }
        case Backend::threads: {
            auto impl = std::make_shared<detail::ThreadsImpl>(n, timeout_s);
            for (int r = 0; r < n; ++r) group.handles.push_back(detail::make_handle(impl, r));
            break;
        }
        case Backend::tcp:
            throw ShapeError("tcp groups are created per process via connect_tcp");
    }
    return group;
}

} // namespace oocnmf
