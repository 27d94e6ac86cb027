#include "oocnmf/chunk_store.hpp"

#include <algorithm>
#include <chrono>

#include "oocnmf/error.hpp"

namespace oocnmf {

namespace {
using clock = std::chrono::steady_clock;
std::string win_str(const Window& w) {
    return "[" + std::to_string(w.rows.begin) + "," + std::to_string(w.rows.end) + ")x[" +
           std::to_string(w.cols.begin) + "," + std::to_string(w.cols.end) + ")";
}
} // namespace

ChunkStore::ChunkStore(MatrixRef source, index_t budget_bytes, int n_cb)
    : mem_source_(source), budget_bytes_(budget_bytes), n_cb_(n_cb) {
    if (source.empty()) throw StoreError("open_store: empty source matrix");
    if (budget_bytes == 0) throw StoreError("open_store: budget must be > 0");
    if (n_cb < 1) throw StoreError("open_store: n_cb must be >= 1");
}

ChunkStore::ChunkStore(const std::string& pdn1_path, index_t budget_bytes, int n_cb)
    : file_(std::make_unique<Pdn1File>(pdn1_path)), budget_bytes_(budget_bytes), n_cb_(n_cb) {
    if (budget_bytes == 0) throw StoreError("open_store: budget must be > 0");
    if (n_cb < 1) throw StoreError("open_store: n_cb must be >= 1");
}

index_t ChunkStore::rows() const { return file_ ? file_->rows() : mem_source_.rows(); }
index_t ChunkStore::cols() const { return file_ ? file_->cols() : mem_source_.cols(); }
bool ChunkStore::is_dense() const { return file_ ? file_->is_dense() : mem_source_.is_dense(); }

void ChunkStore::check_window(const Window& w) const {
    if (w.rows.begin > w.rows.end || w.rows.end > rows() || w.cols.begin > w.cols.end ||
        w.cols.end > cols())
        throw StoreError("load_batch: window " + win_str(w) + " out of bounds for " +
                         std::to_string(rows()) + "x" + std::to_string(cols()));
}

index_t ChunkStore::file_window_bytes(const Window& w) const {
    return file_->window_bytes(w.rows, w.cols);
}

MatrixRef ChunkStore::entry_ref(const Entry& e) const {
    if (std::holds_alternative<std::monostate>(e.owned))
        return mem_source_.window(e.win.rows, e.win.cols);
    if (std::holds_alternative<DenseMatrix>(e.owned)) {
        const auto& d = std::get<DenseMatrix>(e.owned);
        return MatrixRef(d);
    }
    // CSR: whole rows materialized; apply the column window, global indices.
    const auto& s = std::get<CsrMatrix>(e.owned);
    return MatrixRef(s).window({0, s.rows()}, e.win.cols);
}

index_t ChunkStore::in_use_count() const {
    index_t n = 0;
    for (const auto& [id, e] : entries_)
        if (e.in_use) ++n;
    return n;
}

void ChunkStore::make_room(index_t incoming_bytes) {
    if (incoming_bytes > budget_bytes_)
        throw StoreError("load_batch: window of " + std::to_string(incoming_bytes) +
                         " B alone exceeds the budget of " + std::to_string(budget_bytes_) + " B");
    while (counters_.resident_bytes + incoming_bytes > budget_bytes_) {
        // Evict the least-recently-released cached entry.
        auto victim = entries_.end();
        for (auto it = entries_.begin(); it != entries_.end(); ++it) {
            if (it->second.in_use || std::holds_alternative<std::monostate>(it->second.owned))
                continue;
            if (victim == entries_.end() || it->second.lru_stamp < victim->second.lru_stamp)
                victim = it;
        }
        if (victim == entries_.end())
            throw StoreError("load_batch: budget deadlock, " +
                             std::to_string(counters_.resident_bytes) +
                             " B in use and nothing evictable");
        counters_.resident_bytes -= victim->second.bytes;
        counters_.evictions += 1;
        entries_.erase(victim);
    }
}

ChunkStore::Entry ChunkStore::materialize(const Window& w) {
    Entry e;
    e.win = w;
    if (!file_) {
        e.bytes = 0;  // zero-copy view
        return e;
    }
    e.bytes = file_window_bytes(w);
    const auto t0 = clock::now();
    if (file_->is_dense())
        e.owned = file_->read_dense_window(w.rows, w.cols);
    else
        e.owned = file_->read_csr_rows(w.rows);
    counters_.io_seconds += std::chrono::duration<double>(clock::now() - t0).count();
    counters_.bytes_read += e.bytes;
    return e;
}

LoadedBatch ChunkStore::load_batch(Window w) {
    check_window(w);

    // Cache hit: in-memory views persist; file entries persist only while
    // prefetched (releases reclaim them immediately).
    for (auto& [id, e] : entries_) {
        if (e.win == w) {
            if (e.in_use)
                throw StoreError("load_batch: window " + win_str(w) + " is already loaded");
            e.in_use = true;
            return {id, entry_ref(e)};
        }
    }

    if (in_use_count() >= static_cast<index_t>(n_cb_))
        throw StoreError("load_batch: concurrent-batch cap n_cb=" + std::to_string(n_cb_) +
                         " reached; release a batch first");

    if (file_) make_room(file_window_bytes(w));
    Entry e = materialize(w);
    e.in_use = true;
    counters_.loads += 1;
    counters_.resident_bytes += e.bytes;
    counters_.peak_resident_bytes =
        std::max(counters_.peak_resident_bytes, counters_.resident_bytes);

    const index_t id = next_id_++;
    auto [it, ok] = entries_.emplace(id, std::move(e));
    return {id, entry_ref(it->second)};
}

void ChunkStore::release_batch(const LoadedBatch& batch) {
    auto it = entries_.find(batch.id);
    if (it == entries_.end() || !it->second.in_use)
        throw StoreError("release_batch: batch " + std::to_string(batch.id) +
                         " is unknown or already released");
    it->second.in_use = false;
    it->second.lru_stamp = ++lru_clock_;
    if (file_) {
        // File-backed batches are reclaimed on release.
        counters_.resident_bytes -= it->second.bytes;
        counters_.evictions += 1;
        entries_.erase(it);
    }
}

void ChunkStore::prefetch(Window w) {
    if (!file_) return;  // in-memory loads are free
    check_window(w);
    for (const auto& [id, e] : entries_)
        if (e.win == w) return;
    // The n_cb cap counts every materialized batch, in use or cached.
    if (static_cast<index_t>(entries_.size()) + 1 > static_cast<index_t>(n_cb_)) return;
    const index_t bytes = file_window_bytes(w);
    if (counters_.resident_bytes + bytes > budget_bytes_) return;  // never displaces live data
    Entry e = materialize(w);
    e.lru_stamp = ++lru_clock_;
    counters_.loads += 1;
    counters_.resident_bytes += e.bytes;
    counters_.peak_resident_bytes =
        std::max(counters_.peak_resident_bytes, counters_.resident_bytes);
    entries_.emplace(next_id_++, std::move(e));
}

} // namespace oocnmf
