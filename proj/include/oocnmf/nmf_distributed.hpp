#pragma once

#include <string>
#include <vector>

#include "oocnmf/chunk_store.hpp"
#include "oocnmf/comm.hpp"
#include "oocnmf/nmf.hpp"
#include "oocnmf/partition.hpp"

namespace oocnmf {

/// Where a worker's slab of A comes from: an in-memory matrix shared by all
/// ranks, or a PDN1 file each rank reads windows from.
struct ASource {
    MatrixRef mem;
    std::string pdn1_path;

    static ASource memory(MatrixRef a) { return {a, {}}; }
    static ASource file(std::string path) { return {{}, std::move(path)}; }
};

struct StoreConfig {
    index_t budget_bytes = 0;  // 0 = unlimited
    int n_cb = 1;
    bool prefetch = false;
};

/// Batched distributed MU-NMF over one communicator rank. All ranks must
/// call collectively with identical cfg and plan. Under CNMF the W update
/// performs one k x k all-reduce plus one I x k all-reduce per batch and the
/// H update none; RNMF mirrors this. The returned result (gathered factors,
/// error trace) is identical on every rank.
NmfResult nmf_distributed(const ASource& a, const NmfConfig& cfg, const PartitionPlan& plan,
                          CommHandle& comm, const StoreConfig& store_cfg = {},
                          StoreCounters* store_counters_out = nullptr);

/// Convenience driver: runs all ranks of a threads-backend group on worker
/// threads and returns the per-rank results (index = rank).
std::vector<NmfResult> run_distributed_threads(const ASource& a, const NmfConfig& cfg,
                                               const PartitionPlan& plan,
                                               const StoreConfig& store_cfg = {},
                                               std::vector<CollectiveStats>* stats_out = nullptr);

/// Same over tcp sockets on 127.0.0.1 (one in-process thread per rank).
std::vector<NmfResult> run_distributed_tcp_local(const ASource& a, const NmfConfig& cfg,
                                                 const PartitionPlan& plan, std::uint16_t base_port,
                                                 const StoreConfig& store_cfg = {});

} // namespace oocnmf
