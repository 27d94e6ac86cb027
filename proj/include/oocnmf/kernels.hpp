#pragma once

#include "oocnmf/matrix.hpp"

namespace oocnmf {

/// Row block height used when streaming ||A - WH||_F^2. Matching block
/// geometry between the serial and distributed error checks keeps single
/// worker runs bit-identical.
inline constexpr index_t kDefaultResidualBlockRows = 256;

/// Default denominator guard for multiplicative updates.
inline constexpr double kDefaultEpsilon = 1e-12;

// All kernels use a fixed summation order (ascending inner index) so that
// results are bit-reproducible across runs and across thread counts: OpenMP
// parallelism is over independent output elements only.

/// acc += a @ b. b must be dense; a may be a dense or CSR window.
void matmul_acc(MatrixRef a, MatrixRef b, DenseMatrix& acc);

DenseMatrix matmul(MatrixRef a, MatrixRef b);
DenseMatrix matmul(MatrixRef a, const DenseMatrix& b);

/// acc += w^T @ a with w a dense window and a dense or CSR. The sparse path
/// scatters a_ij * w[i,:] into column j, avoiding an explicit CSR transpose.
void matmul_ta_acc(MatrixRef w, MatrixRef a, DenseMatrix& acc);

/// acc += a^T a (a dense window). Upper triangle computed, then mirrored,
/// so the result is symmetric to the bit.
void gram_acc(MatrixRef a, DenseMatrix& acc);
DenseMatrix gram_t(MatrixRef a);

DenseMatrix transpose(const DenseMatrix& a);

/// target <- target * numer / (denom + epsilon), elementwise in place.
void hadamard_update(DenseMatrix& target, const DenseMatrix& numer,
                     const DenseMatrix& denom, double epsilon);

/// Same, restricted to target rows [row0, row0 + numer.rows()).
void hadamard_update_rows(DenseMatrix& target, index_t row0, const DenseMatrix& numer,
                          const DenseMatrix& denom, double epsilon);

/// Same, restricted to target columns [col0, col0 + numer.cols()).
void hadamard_update_cols(DenseMatrix& target, index_t col0, const DenseMatrix& numer,
                          const DenseMatrix& denom, double epsilon);

/// Sum of squared entries (stored values only for CSR).
double sq_frobenius(MatrixRef a);
double frobenius_norm(MatrixRef a);

/// Sum of squared residuals (a[i][j] - (W H)[i][j])^2 over the window of a,
/// where the window of a corresponds to rows [w_row0, ...) of W and columns
/// [h_col0, ...) of H. WH is materialized block_rows rows at a time.
double residual_sq(MatrixRef a, const DenseMatrix& w, index_t w_row0,
                   const DenseMatrix& h, index_t h_col0,
                   index_t block_rows = kDefaultResidualBlockRows);

/// ||A - WH||_F / ||A||_F. Throws DataError when ||A||_F == 0.
double relative_error(MatrixRef a, const DenseMatrix& w, const DenseMatrix& h,
                      index_t block_rows = kDefaultResidualBlockRows);

/// Throws DataError naming the first (row, col, value) below zero.
void validate_nonnegative(MatrixRef a);

/// True iff every entry of m is finite.
bool all_finite(const DenseMatrix& m);

} // namespace oocnmf
