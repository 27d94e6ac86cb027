#include "oocnmf/nmf.hpp"

#include <chrono>
#include <cmath>

#include <tuple>

#include "oocnmf/rng.hpp"

namespace oocnmf {

namespace {
using clock = std::chrono::steady_clock;
double seconds_since(clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
}
constexpr std::uint64_t kStreamW = 1;
constexpr std::uint64_t kStreamH = 2;
} // namespace

void NmfConfig::validate() const {
    if (k < 1) throw ShapeError("NmfConfig: k must be >= 1");
    if (!(eta >= 0)) throw ShapeError("NmfConfig: eta must be >= 0");
    if (max_iters < 1) throw ShapeError("NmfConfig: max_iters must be >= 1");
    if (error_check_interval < 1) throw ShapeError("NmfConfig: error_check_interval must be >= 1");
    if (!(epsilon > 0)) throw ShapeError("NmfConfig: epsilon must be > 0");
    if (init == FactorInit::from_files && (!init_w || !init_h))
        throw ShapeError("NmfConfig: init=from_files requires both factors");
}

DenseMatrix init_w_rows(index_t m, index_t k, std::uint64_t seed, IndexRange rows) {
    CounterRng rng(seed, kStreamW);
    DenseMatrix w(rows.extent(), k);
    for (index_t i = 0; i < rows.extent(); ++i)
        for (index_t j = 0; j < k; ++j)
            w.at(i, j) = rng.uniform((rows.begin + i) * k + j);
    (void)m;
    return w;
}

DenseMatrix init_h_cols(index_t n, index_t k, std::uint64_t seed, IndexRange cols) {
    CounterRng rng(seed, kStreamH);
    DenseMatrix h(k, cols.extent());
    for (index_t r = 0; r < k; ++r)
        for (index_t j = 0; j < cols.extent(); ++j)
            h.at(r, j) = rng.uniform(r * n + cols.begin + j);
    return h;
}

std::pair<DenseMatrix, DenseMatrix> init_factors(index_t m, index_t n, index_t k,
                                                 std::uint64_t seed) {
    if (m < 1 || n < 1 || k < 1) throw ShapeError("init_factors: dimensions must be >= 1");
    return {init_w_rows(m, k, seed, {0, m}), init_h_cols(n, k, seed, {0, n})};
}

NmfResult nmf_serial(MatrixRef a, const NmfConfig& cfg) {
    cfg.validate();
    const index_t m = a.rows();
    const index_t n = a.cols();
    const index_t k = cfg.k;
    if (m < 1 || n < 1) throw ShapeError("nmf_serial: empty input " + a.shape_str());

    const auto t_start = clock::now();
    const double norm_a_sq = sq_frobenius(a);
    if (norm_a_sq == 0.0) throw DataError("nmf_serial: ||A||_F is zero");
    const double norm_a = std::sqrt(norm_a_sq);

    NmfResult res;
    if (cfg.init == FactorInit::from_files) {
        if (cfg.init_w->rows() != m || cfg.init_w->cols() != k || cfg.init_h->rows() != k ||
            cfg.init_h->cols() != n)
            throw ShapeError("nmf_serial: provided factors do not match A and k");
        res.w = *cfg.init_w;
        res.h = *cfg.init_h;
    } else {
        std::tie(res.w, res.h) = init_factors(m, n, k, cfg.seed);
    }

    const double flops_per_iter =
        4.0 * static_cast<double>(m) * n * k + 2.0 * static_cast<double>(m + n) * k * k;

    index_t iter = 0;
    for (iter = 1; iter <= cfg.max_iters; ++iter) {
        {   // W <- W * (A H^T) / (W (H H^T) + eps)
            auto t0 = clock::now();
            DenseMatrix ht = transpose(res.h);
            DenseMatrix hht = gram_t(MatrixRef(ht));
            DenseMatrix aht = matmul(a, ht);
            DenseMatrix whht = matmul(MatrixRef(res.w), hht);
            hadamard_update(res.w, aht, whht, cfg.epsilon);
            res.counters.w_update_s += seconds_since(t0);
        }
        {   // H <- H * (W^T A) / ((W^T W) H + eps)
            auto t0 = clock::now();
            DenseMatrix wtw = gram_t(MatrixRef(res.w));
            DenseMatrix wta(k, n);
            matmul_ta_acc(MatrixRef(res.w), a, wta);
            DenseMatrix wtwh = matmul(MatrixRef(wtw), res.h);
            hadamard_update(res.h, wta, wtwh, cfg.epsilon);
            res.counters.h_update_s += seconds_since(t0);
        }
        res.counters.flops += flops_per_iter;

        if (iter % cfg.error_check_interval == 0 || iter == cfg.max_iters) {
            auto t0 = clock::now();
            if (!all_finite(res.w) || !all_finite(res.h))
                throw DataError("nmf_serial: non-finite factor entries at iteration " +
                                std::to_string(iter));
            const double err = std::sqrt(residual_sq(a, res.w, 0, res.h, 0)) / norm_a;
            res.error_trace.emplace_back(iter, err);
            res.counters.error_check_s += seconds_since(t0);
            if (err <= cfg.eta) {
                res.converged = true;
                break;
            }
        }
    }
    res.iterations_run = std::min(iter, cfg.max_iters);
    res.counters.total_s = seconds_since(t_start);
    return res;
}

} // namespace oocnmf
