#pragma once

#include <list>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "oocnmf/io.hpp"
#include "oocnmf/matrix.hpp"

namespace oocnmf {

struct Window {
    IndexRange rows;
    IndexRange cols;
    bool operator==(const Window&) const = default;
};

struct StoreCounters {
    index_t loads = 0;            // batch materializations (cache misses)
    index_t evictions = 0;        // batches reclaimed from memory
    index_t bytes_read = 0;       // file backing only
    index_t resident_bytes = 0;
    index_t peak_resident_bytes = 0;
    double io_seconds = 0;
};

struct LoadedBatch {
    index_t id = 0;
    MatrixRef ref;  // local coordinates [0, rows) x [0, cols) of the window
};

/// Budget-capped batch server over a matrix held either in memory (batches
/// are zero-copy views) or in a PDN1 file (batches are materialized reads).
/// At most n_cb batches may be held loaded at once; file-backed batches are
/// reclaimed when released, so peak_resident_bytes never exceeds the budget.
/// Dense file windows are read row-block-wise; CSR windows materialize the
/// whole row range and leave column sub-ranging to the caller's kernels.
class ChunkStore {
public:
    /// In-memory backing over a caller-owned matrix (not copied).
    ChunkStore(MatrixRef source, index_t budget_bytes, int n_cb);

    /// File backing over a PDN1 file.
    ChunkStore(const std::string& pdn1_path, index_t budget_bytes, int n_cb);

    index_t rows() const;
    index_t cols() const;
    bool is_dense() const;

    LoadedBatch load_batch(Window w);
    void release_batch(const LoadedBatch& batch);

    /// Optional read-ahead: materializes the window as an evictable cache
    /// entry if it fits the budget and the n_cb cap; otherwise does nothing.
    void prefetch(Window w);

    const StoreCounters& counters() const { return counters_; }

private:
    struct Entry {
        Window win;
        std::variant<std::monostate, DenseMatrix, CsrMatrix> owned;
        index_t bytes = 0;
        bool in_use = false;
        index_t lru_stamp = 0;  // advance on release/prefetch; smallest evicts first
    };

    void check_window(const Window& w) const;
    index_t file_window_bytes(const Window& w) const;
    Entry materialize(const Window& w);
    void make_room(index_t incoming_bytes);
    MatrixRef entry_ref(const Entry& e) const;
    index_t in_use_count() const;

    MatrixRef mem_source_;                 // in-memory backing
    std::unique_ptr<Pdn1File> file_;       // file backing
    index_t budget_bytes_ = 0;
    int n_cb_ = 1;
    index_t next_id_ = 1;
    index_t lru_clock_ = 0;
    std::map<index_t, Entry> entries_;
    StoreCounters counters_;
};

} // namespace oocnmf
