#pragma once

#include <string>
#include <vector>

#include "oocnmf/matrix.hpp"

namespace oocnmf {

/// Column partition (CNMF): A and H split by columns, W replicated.
/// Row partition (RNMF): A and W split by rows, H replicated.
enum class Strategy { cnmf, rnmf };

std::string to_string(Strategy s);

/// CNMF iff n > m; ties go to RNMF.
Strategy choose_strategy(index_t m, index_t n);

struct WorkerSlab {
    int rank = 0;
    IndexRange a_rows;  // window of A owned by this worker
    IndexRange a_cols;
};

/// Data layout for N workers with n_b out-of-core batches. Slabs tile A
/// exactly; when the worker count does not divide the partitioned axis, the
/// first (extent mod N) workers carry one extra index. Batches cut the
/// non-partitioned axis (rows under CNMF, columns under RNMF), remainders
/// handled the same way.
struct PartitionPlan {
    Strategy strategy = Strategy::rnmf;
    int n_workers = 1;
    index_t m = 0, n = 0, k = 0;
    index_t n_b = 1;
    std::vector<WorkerSlab> slabs;
    std::vector<IndexRange> batches;  // global coordinates along the batched axis

    /// Largest per-worker slab extent (J) / batch extent (I).
    index_t max_slab_extent() const;
    index_t max_batch_extent() const;

    std::string to_json() const;
};

PartitionPlan make_plan(index_t m, index_t n, index_t k, int n_workers, index_t n_b,
                        Strategy strategy);

/// Per-worker byte accounting for a plan against a memory budget.
/// store_peak covers the batched A windows (n_cb concurrently resident);
/// factor and intermediate arrays stay cached in worker memory.
struct MemoryReport {
    index_t a_slab_bytes = 0;        // full A slab on backing store
    index_t store_peak_bytes = 0;    // n_cb concurrently resident batch windows
    index_t factor_bytes = 0;        // W + H as held by one worker
    index_t intermediate_bytes = 0;  // heaviest per-batch products + residual block
    index_t peak_bytes = 0;          // store_peak + factor + intermediate
    index_t min_n_b = 0;             // smallest batch count with peak <= budget
    bool feasible = false;

    std::string to_json() const;
};

MemoryReport memory_estimate(const PartitionPlan& plan, double density, index_t budget_bytes,
                             index_t n_cb = 1);

} // namespace oocnmf
