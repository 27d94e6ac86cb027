#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "oocnmf/matrix.hpp"

namespace oocnmf {

enum class Backend { loopback, threads, tcp };

Backend backend_from_string(const std::string& s);

/// Tags collectives so stats can be attributed to algorithm phases.
enum class PhaseTag : std::uint32_t {
    generic = 0,
    w_update = 1,
    h_update = 2,
    error_check = 3,
    gather = 4,
    barrier = 5,
};
inline constexpr std::size_t kNumPhaseTags = 6;

struct CollectiveStats {
    struct PerTag {
        index_t bytes = 0;
        index_t calls = 0;
        double seconds = 0;
    };
    std::array<PerTag, kNumPhaseTags> per_tag{};

    PerTag& operator[](PhaseTag t) { return per_tag[static_cast<std::size_t>(t)]; }
    const PerTag& operator[](PhaseTag t) const { return per_tag[static_cast<std::size_t>(t)]; }

    index_t total_bytes() const;
    index_t total_calls() const;
    double total_seconds() const;
};

namespace detail {
class CollectiveImpl;
}

/// Per-rank handle into a collective group. Owned by exactly one worker
/// thread or process. All collectives are blocking rendezvous; the reduction
/// is applied in ascending rank order, so results are bit-identical across
/// backends, runs, and arrival interleavings.
class CommHandle {
public:
    CommHandle() = default;
    CommHandle(std::shared_ptr<detail::CollectiveImpl> impl, int rank);

    int rank() const { return rank_; }
    int size() const;

    /// In-place elementwise sum across all ranks.
    void all_reduce_sum(DenseMatrix& buffer, PhaseTag tag);

    /// Returns once every rank has entered.
    void barrier();

    const CollectiveStats& stats() const { return *stats_; }
    void reset_stats();

private:
    std::shared_ptr<detail::CollectiveImpl> impl_;
    std::shared_ptr<CollectiveStats> stats_ = std::make_shared<CollectiveStats>();
    int rank_ = 0;
};

/// All handles of an in-process group (loopback or threads backend).
struct CommGroup {
    std::vector<CommHandle> handles;
};

/// loopback: n must be 1. threads: n handles sharing one in-process
/// rendezvous object, to be distributed one per worker thread.
CommGroup spawn_group(int n, Backend backend, double timeout_s = 60.0);

/// tcp backend: rank 0 listens on peers[0] ("host:port"); other ranks
/// connect to it. One handle per process.
CommHandle connect_tcp(int n, int rank, const std::vector<std::string>& peers,
                       std::uint64_t group_id = 0, double timeout_s = 60.0);

} // namespace oocnmf
