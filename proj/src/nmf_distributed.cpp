#include "oocnmf/nmf_distributed.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "oocnmf/rng.hpp"

namespace oocnmf {

namespace {

using clock = std::chrono::steady_clock;

/// Times a phase with communication and IO excluded, so the per-phase
/// counters are disjoint (total >= their sum).
class PhaseTimer {
public:
    PhaseTimer(double& sink, const CommHandle& comm, const ChunkStore& store,
               PhaseCounters& counters)
        : sink_(sink), comm_(comm), store_(store), counters_(counters),
          t0_(clock::now()), comm0_(comm.stats().total_seconds()),
          io0_(store.counters().io_seconds) {}
    ~PhaseTimer() {
        const double dt = std::chrono::duration<double>(clock::now() - t0_).count();
        const double comm_dt = comm_.stats().total_seconds() - comm0_;
        const double io_dt = store_.counters().io_seconds - io0_;
        sink_ += std::max(0.0, dt - comm_dt - io_dt);
        counters_.allreduce_s += comm_dt;
        counters_.io_s += io_dt;
    }

private:
    double& sink_;
    const CommHandle& comm_;
    const ChunkStore& store_;
    PhaseCounters& counters_;
    clock::time_point t0_;
    double comm0_, io0_;
};

struct Worker {
    const NmfConfig& cfg;
    const PartitionPlan& plan;
    CommHandle& comm;
    ChunkStore store;
    WorkerSlab slab;

    DenseMatrix w;  // replicated m x k under CNMF, slab under RNMF
    DenseMatrix h;  // slab k x J under CNMF, replicated under RNMF
    PhaseCounters counters;

    Worker(const ASource& a, const NmfConfig& cfg_, const PartitionPlan& plan_, CommHandle& comm_,
           const StoreConfig& store_cfg)
        : cfg(cfg_), plan(plan_), comm(comm_),
          store(make_store(a, store_cfg)),
          slab(plan_.slabs[static_cast<std::size_t>(comm_.rank())]) {}

    static ChunkStore make_store(const ASource& a, const StoreConfig& sc) {
        const index_t budget =
            sc.budget_bytes ? sc.budget_bytes : std::numeric_limits<index_t>::max() / 4;
        if (!a.pdn1_path.empty()) return ChunkStore(a.pdn1_path, budget, sc.n_cb);
        return ChunkStore(a.mem, budget, sc.n_cb);
    }

    Window batch_window(index_t p) const {
        if (plan.strategy == Strategy::cnmf) return {plan.batches[p], slab.a_cols};
        return {slab.a_rows, plan.batches[p]};
    }

    void init_factors() {
        if (cfg.init == FactorInit::from_files) {
            const auto& w0 = *cfg.init_w;
            const auto& h0 = *cfg.init_h;
            if (w0.rows() != plan.m || w0.cols() != plan.k || h0.rows() != plan.k ||
                h0.cols() != plan.n)
                throw ShapeError("nmf_distributed: provided factors do not match plan");
            if (plan.strategy == Strategy::cnmf) {
                w = w0;
                h = DenseMatrix(plan.k, slab.a_cols.extent());
                for (index_t r = 0; r < plan.k; ++r)
                    for (index_t j = 0; j < h.cols(); ++j)
                        h.at(r, j) = h0.at(r, slab.a_cols.begin + j);
            } else {
                h = h0;
                w = DenseMatrix(slab.a_rows.extent(), plan.k);
                for (index_t i = 0; i < w.rows(); ++i)
                    for (index_t j = 0; j < plan.k; ++j)
                        w.at(i, j) = w0.at(slab.a_rows.begin + i, j);
            }
        } else if (plan.strategy == Strategy::cnmf) {
            w = init_w_rows(plan.m, plan.k, cfg.seed, {0, plan.m});
            h = init_h_cols(plan.n, plan.k, cfg.seed, slab.a_cols);
        } else {
            w = init_w_rows(plan.m, plan.k, cfg.seed, slab.a_rows);
            h = init_h_cols(plan.n, plan.k, cfg.seed, {0, plan.n});
        }
    }

    /// Sum of squared entries of the local A slab, batch by batch.
    double local_sq_norm() {
        double sum = 0;
        for (index_t p = 0; p < plan.n_b; ++p) {
            auto batch = store.load_batch(batch_window(p));
            sum += sq_frobenius(batch.ref);
            store.release_batch(batch);
        }
        return sum;
    }

    void w_update_cnmf() {
        PhaseTimer timer(counters.w_update_s, comm, store, counters);
        DenseMatrix ht = transpose(h);                     // J x k
        DenseMatrix hht = gram_t(MatrixRef(ht));           // k x k
        comm.all_reduce_sum(hht, PhaseTag::w_update);
        for (index_t p = 0; p < plan.n_b; ++p) {
            auto batch = store.load_batch(batch_window(p));
            maybe_prefetch(p);
            const IndexRange rows = plan.batches[p];
            MatrixRef wwin = MatrixRef(w).window(rows, {0, plan.k});
            DenseMatrix whht = matmul(wwin, hht);          // I x k
            DenseMatrix aht = matmul(batch.ref, ht);       // I x k
            comm.all_reduce_sum(aht, PhaseTag::w_update);
            hadamard_update_rows(w, rows.begin, aht, whht, cfg.epsilon);
            store.release_batch(batch);
            counters.flops += 2.0 * static_cast<double>(rows.extent()) * plan.k *
                              (slab.a_cols.extent() + plan.k);
        }
    }

    void h_update_cnmf() {
        PhaseTimer timer(counters.h_update_s, comm, store, counters);
        const index_t j_ext = slab.a_cols.extent();
        DenseMatrix wta(plan.k, j_ext);
        DenseMatrix wtw(plan.k, plan.k);
        for (index_t p = 0; p < plan.n_b; ++p) {
            auto batch = store.load_batch(batch_window(p));
            maybe_prefetch(p);
            MatrixRef wwin = MatrixRef(w).window(plan.batches[p], {0, plan.k});
            matmul_ta_acc(wwin, batch.ref, wta);
            gram_acc(wwin, wtw);
            store.release_batch(batch);
            counters.flops += 2.0 * static_cast<double>(plan.batches[p].extent()) * plan.k *
                              (j_ext + plan.k);
        }
        DenseMatrix wtwh = matmul(MatrixRef(wtw), h);
        hadamard_update(h, wta, wtwh, cfg.epsilon);
    }

    void w_update_rnmf() {
        PhaseTimer timer(counters.w_update_s, comm, store, counters);
        DenseMatrix ht = transpose(h);                     // n x k
        DenseMatrix hht = gram_t(MatrixRef(ht));           // local: H is replicated
        DenseMatrix aht(slab.a_rows.extent(), plan.k);
        for (index_t p = 0; p < plan.n_b; ++p) {
            auto batch = store.load_batch(batch_window(p));
            maybe_prefetch(p);
            matmul_acc(batch.ref, MatrixRef(ht).window(plan.batches[p], {0, plan.k}), aht);
            store.release_batch(batch);
            counters.flops += 2.0 * static_cast<double>(slab.a_rows.extent()) * plan.k *
                              plan.batches[p].extent();
        }
        DenseMatrix whht = matmul(MatrixRef(w), hht);
        hadamard_update(w, aht, whht, cfg.epsilon);
    }

    void h_update_rnmf() {
        PhaseTimer timer(counters.h_update_s, comm, store, counters);
        DenseMatrix wtw = gram_t(MatrixRef(w));
        comm.all_reduce_sum(wtw, PhaseTag::h_update);
        for (index_t p = 0; p < plan.n_b; ++p) {
            auto batch = store.load_batch(batch_window(p));
            maybe_prefetch(p);
            const IndexRange cols = plan.batches[p];
            DenseMatrix wta(plan.k, cols.extent());
            matmul_ta_acc(MatrixRef(w), batch.ref, wta);
            comm.all_reduce_sum(wta, PhaseTag::h_update);
            DenseMatrix wtwh = matmul(MatrixRef(wtw), MatrixRef(h).window({0, plan.k}, cols));
            hadamard_update_cols(h, cols.begin, wta, wtwh, cfg.epsilon);
            store.release_batch(batch);
            counters.flops += 2.0 * static_cast<double>(slab.a_rows.extent()) * plan.k *
                              (cols.extent() + plan.k);
        }
    }

    void maybe_prefetch(index_t p) {
        // Read-ahead of batch p+1 while p is in use, capped by n_cb.
        if (!store_prefetch || p + 1 >= plan.n_b) return;
        store.prefetch(batch_window(p + 1));
    }

    double local_residual_sq() {
        double sum = 0;
        for (index_t p = 0; p < plan.n_b; ++p) {
            auto batch = store.load_batch(batch_window(p));
            if (plan.strategy == Strategy::cnmf)
                sum += residual_sq(batch.ref, w, plan.batches[p].begin, h, 0);
            else
                sum += residual_sq(batch.ref, w, 0, h, plan.batches[p].begin);
            store.release_batch(batch);
        }
        return sum;
    }

    bool store_prefetch = false;
};

} // namespace

NmfResult nmf_distributed(const ASource& a, const NmfConfig& cfg, const PartitionPlan& plan,
                          CommHandle& comm, const StoreConfig& store_cfg,
                          StoreCounters* store_counters_out) {
    cfg.validate();
    if (cfg.k != plan.k)
        throw ShapeError("nmf_distributed: cfg.k=" + std::to_string(cfg.k) +
                         " disagrees with plan.k=" + std::to_string(plan.k));
    if (comm.size() != plan.n_workers)
        throw ShapeError("nmf_distributed: group size " + std::to_string(comm.size()) +
                         " != plan workers " + std::to_string(plan.n_workers));

    const auto t_start = clock::now();
    Worker worker(a, cfg, plan, comm, store_cfg);
    worker.store_prefetch = store_cfg.prefetch;
    worker.init_factors();

    // ||A||_F, reduced once up front.
    DenseMatrix norm_buf(1, 1);
    {
        PhaseTimer timer(worker.counters.error_check_s, comm, worker.store, worker.counters);
        norm_buf.at(0, 0) = worker.local_sq_norm();
        comm.all_reduce_sum(norm_buf, PhaseTag::error_check);
    }
    if (norm_buf.at(0, 0) == 0.0) throw DataError("nmf_distributed: ||A||_F is zero");
    const double norm_a = std::sqrt(norm_buf.at(0, 0));

    NmfResult res;
    index_t iter = 0;
    for (iter = 1; iter <= cfg.max_iters; ++iter) {
        if (plan.strategy == Strategy::cnmf) {
            worker.w_update_cnmf();
            worker.h_update_cnmf();
        } else {
            worker.w_update_rnmf();
            worker.h_update_rnmf();
        }
        if (iter % cfg.error_check_interval == 0 || iter == cfg.max_iters) {
            PhaseTimer timer(worker.counters.error_check_s, comm, worker.store, worker.counters);
            if (!all_finite(worker.w) || !all_finite(worker.h))
                throw DataError("nmf_distributed: non-finite factor entries at iteration " +
                                std::to_string(iter));
            DenseMatrix local(1, 1);
            local.at(0, 0) = worker.local_residual_sq();
            comm.all_reduce_sum(local, PhaseTag::error_check);
            const double err = std::sqrt(local.at(0, 0)) / norm_a;
            res.error_trace.emplace_back(iter, err);
            if (err <= cfg.eta) {
                res.converged = true;
                break;
            }
        }
    }
    res.iterations_run = std::min(iter, cfg.max_iters);

    // Gather the distributed factor to every rank via a zero-padded reduce.
    if (plan.strategy == Strategy::cnmf) {
        res.w = std::move(worker.w);
        DenseMatrix full_h(plan.k, plan.n);
        for (index_t r = 0; r < plan.k; ++r)
            for (index_t j = 0; j < worker.slab.a_cols.extent(); ++j)
                full_h.at(r, worker.slab.a_cols.begin + j) = worker.h.at(r, j);
        comm.all_reduce_sum(full_h, PhaseTag::gather);
        res.h = std::move(full_h);
    } else {
        res.h = std::move(worker.h);
        DenseMatrix full_w(plan.m, plan.k);
        for (index_t i = 0; i < worker.slab.a_rows.extent(); ++i)
            for (index_t j = 0; j < plan.k; ++j)
                full_w.at(worker.slab.a_rows.begin + i, j) = worker.w.at(i, j);
        comm.all_reduce_sum(full_w, PhaseTag::gather);
        res.w = std::move(full_w);
    }

    res.counters = worker.counters;
    res.counters.peak_resident_bytes = worker.store.counters().peak_resident_bytes;
    res.counters.total_s = std::chrono::duration<double>(clock::now() - t_start).count();
    if (store_counters_out) *store_counters_out = worker.store.counters();
    return res;
}

std::vector<NmfResult> run_distributed_threads(const ASource& a, const NmfConfig& cfg,
                                               const PartitionPlan& plan,
                                               const StoreConfig& store_cfg,
                                               std::vector<CollectiveStats>* stats_out) {
    auto group = spawn_group(plan.n_workers, plan.n_workers == 1 ? Backend::loopback
                                                                 : Backend::threads);
    std::vector<NmfResult> results(static_cast<std::size_t>(plan.n_workers));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(plan.n_workers));
    std::vector<std::thread> threads;
    for (int r = 0; r < plan.n_workers; ++r) {
        threads.emplace_back([&, r] {
            try {
                results[static_cast<std::size_t>(r)] =
                    nmf_distributed(a, cfg, plan, group.handles[static_cast<std::size_t>(r)],
                                    store_cfg);
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (stats_out) {
        stats_out->clear();
        for (auto& h : group.handles) stats_out->push_back(h.stats());
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

std::vector<NmfResult> run_distributed_tcp_local(const ASource& a, const NmfConfig& cfg,
                                                 const PartitionPlan& plan,
                                                 std::uint16_t base_port,
                                                 const StoreConfig& store_cfg) {
    const int n = plan.n_workers;
    const std::vector<std::string> peers{"127.0.0.1:" + std::to_string(base_port)};
    std::vector<NmfResult> results(static_cast<std::size_t>(n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::vector<std::thread> threads;
    for (int r = 0; r < n; ++r) {
        threads.emplace_back([&, r] {
            try {
                CommHandle comm = connect_tcp(n, r, peers, /*group_id=*/base_port);
                results[static_cast<std::size_t>(r)] =
                    nmf_distributed(a, cfg, plan, comm, store_cfg);
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

} // namespace oocnmf
