#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "oocnmf/kernels.hpp"
#include "oocnmf/matrix.hpp"

namespace oocnmf {

enum class FactorInit { uniform01, from_files };

struct NmfConfig {
    index_t k = 1;
    double eta = 1e-4;               // convergence tolerance on relative error
    index_t max_iters = 1000;
    index_t error_check_interval = 10;
    double epsilon = kDefaultEpsilon;
    std::uint64_t seed = 0;
    FactorInit init = FactorInit::uniform01;
    std::optional<DenseMatrix> init_w;  // required when init == from_files
    std::optional<DenseMatrix> init_h;

    void validate() const;
};

/// Wall time and work accounting per algorithm phase.
struct PhaseCounters {
    double h_update_s = 0;
    double w_update_s = 0;
    double allreduce_s = 0;
    double error_check_s = 0;
    double io_s = 0;
    double total_s = 0;
    double flops = 0;                  // floating-point multiply-add estimate
    index_t peak_resident_bytes = 0;   // out-of-core store peak; 0 for in-core
};

struct NmfResult {
    DenseMatrix w;  // m x k
    DenseMatrix h;  // k x n
    std::vector<std::pair<index_t, double>> error_trace;  // (iteration, relative error)
    index_t iterations_run = 0;
    bool converged = false;
    PhaseCounters counters;
};

/// Draw W (m x k) and H (k x n) i.i.d. uniform(0,1) from the counter-based
/// PRNG. Entry (i, j) of either factor depends only on (seed, i, j), so any
/// slab equals the corresponding slice of the full draw.
std::pair<DenseMatrix, DenseMatrix> init_factors(index_t m, index_t n, index_t k,
                                                 std::uint64_t seed);

/// Slab variants used by distributed workers.
DenseMatrix init_w_rows(index_t m, index_t k, std::uint64_t seed, IndexRange rows);
DenseMatrix init_h_cols(index_t n, index_t k, std::uint64_t seed, IndexRange cols);

/// Single-worker multiplicative-update NMF, W update before H update each
/// iteration. Relative error is evaluated every cfg.error_check_interval
/// iterations and on the final iteration; the loop exits early when it
/// reaches cfg.eta.
NmfResult nmf_serial(MatrixRef a, const NmfConfig& cfg);

} // namespace oocnmf
