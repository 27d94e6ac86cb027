#pragma once

#include <cstdint>

#include "oocnmf/matrix.hpp"

namespace oocnmf {

/// Parameters for the low-rank dense generator.
struct LowrankSpec {
    index_t m = 0;
    index_t n = 0;
    index_t k_true = 0;
    double noise = 0.0;     ///< multiplicative noise amplitude (0 disables)
    std::uint64_t seed = 0;
};

/// A generated low-rank problem together with its ground-truth factors.
struct LowrankData {
    DenseMatrix a;   // m x n
    DenseMatrix w0;  // m x k_true
    DenseMatrix h0;  // k_true x n
};

/// Builds A = W0 * H0 where the columns of W0 are smooth nonnegative bumps
/// centred at evenly spaced rows (plus a small uniform floor so no entry is
/// exactly zero) and H0 is uniform(0,1).  With noise > 0 each entry of A is
/// additionally scaled by uniform(1 - noise, 1 + noise).
LowrankData gen_lowrank(const LowrankSpec& spec);

/// Parameters for the sparse random generator.
struct SparseSpec {
    index_t m = 0;
    index_t n = 0;
    double density = 0.0;   ///< independent per-entry Bernoulli probability
    std::uint64_t seed = 0;
};

/// Generates an m x n CSR matrix where each entry is present with probability
/// `density` and, when present, drawn uniform(0,1).  Rows are built one at a
/// time; no dense m x n buffer is ever materialized.
CsrMatrix gen_sparse_random(const SparseSpec& spec);

}  // namespace oocnmf
