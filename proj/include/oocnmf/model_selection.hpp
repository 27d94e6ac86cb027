#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oocnmf/matrix.hpp"
#include "oocnmf/nmf.hpp"

namespace oocnmf {

/// Configuration for automatic latent-dimension estimation.
struct SelectionConfig {
    index_t k_min = 1;
    index_t k_max = 1;
    index_t n_perturbations = 16;   ///< P: runs per candidate k
    double delta = 0.03;            ///< perturbation amplitude, in (0,1)
    double sil_threshold = 0.75;    ///< min-silhouette acceptance bar
    NmfConfig nmf;                  ///< per-run template (k is overridden)
    std::uint64_t seed = 0;

    void validate(index_t m, index_t n) const;
};

/// Per-candidate-k scoring record.
struct KRecord {
    index_t k = 0;
    bool valid = false;         ///< at least two runs survived
    index_t runs_used = 0;
    double min_silhouette = 0.0;
    double mean_silhouette = 0.0;
    double mean_relative_error = 0.0;
    DenseMatrix medians;        ///< m x k elementwise-median cluster columns
};

/// Outcome of a select_k sweep.
struct SelectionReport {
    std::vector<KRecord> records;
    std::optional<index_t> chosen_k;   ///< empty means no k qualified
    std::string rationale;

    std::string to_json() const;
    std::string to_csv() const;
};

/// Multiplies every stored entry of `a` by an i.i.d. draw from
/// [1 - delta, 1 + delta].  Zeros (and the CSR sparsity pattern) are preserved.
DenseMatrix perturb_dense(MatrixRef a, double delta, std::uint64_t seed);
CsrMatrix perturb_sparse(const CsrMatrix& a, double delta, std::uint64_t seed);

/// Column-cluster assignment over an ensemble of W factors.
struct ColumnClusters {
    // members[c] lists (run, column) pairs assigned to cluster c; the columns
    // themselves (L2-normalized) are stored in `points` in the same order.
    std::vector<std::vector<std::pair<index_t, index_t>>> member_ids;
    std::vector<std::vector<std::vector<double>>> points;
    DenseMatrix medians;              // m x k
    index_t dropped_zero_columns = 0;
};

/// Normalizes columns to unit L2 norm, anchors clusters at run 0's columns,
/// and assigns each later run's columns one-to-one to anchors by maximal
/// total cosine similarity (exact assignment for k <= 16, greedy above).
ColumnClusters cluster_columns(const std::vector<DenseMatrix>& runs, index_t k);

/// Standard silhouette with cosine distance.  k=1 is reported as 1.0 by
/// convention; a singleton cluster member scores 0.
struct SilhouetteScore {
    double min_sil = 0.0;
    double mean_sil = 0.0;
    std::vector<double> per_cluster;
};
SilhouetteScore silhouette(const ColumnClusters& clusters);

/// Entry (i, j) is the Pearson correlation between column i of w_true and
/// column j of w_est.  Throws DataError on a zero-variance column.
DenseMatrix pearson_correlation_matrix(const DenseMatrix& w_true,
                                       const DenseMatrix& w_est);

/// Runs P perturbed factorizations for every k in [k_min, k_max] on a single
/// process (runs execute in parallel via OpenMP), clusters the W columns,
/// scores silhouettes and errors, and picks the largest qualifying k.
SelectionReport select_k(MatrixRef a, const SelectionConfig& cfg);

}  // namespace oocnmf
