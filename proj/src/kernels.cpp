#include "oocnmf/kernels.hpp"

#include <cmath>
#include <cstdint>

namespace oocnmf {

namespace {

void check_matmul_shapes(const MatrixRef& a, const MatrixRef& b, const DenseMatrix& acc) {
    if (b.empty() || !b.is_dense())
        throw ShapeError("matmul: right operand must be dense");
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions disagree: " + a.shape_str() + " @ " +
                         b.shape_str());
    if (acc.rows() != a.rows() || acc.cols() != b.cols())
        throw ShapeError("matmul: accumulator " + acc.shape_str() + " does not match product " +
                         std::to_string(a.rows()) + "x" + std::to_string(b.cols()));
}

// Pointer to row q of a dense window, offset to the window's first column.
inline const double* window_row(const MatrixRef& b, index_t q) {
    return b.dense().row(b.row_range().begin + q) + b.col_range().begin;
}

} // namespace

void matmul_acc(MatrixRef a, MatrixRef b, DenseMatrix& acc) {
    check_matmul_shapes(a, b, acc);
    const index_t out_cols = b.cols();
    const std::int64_t out_rows = static_cast<std::int64_t>(a.rows());

    if (a.is_dense()) {
        const index_t inner = a.cols();
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < out_rows; ++r) {
            const double* arow = window_row(a, static_cast<index_t>(r));
            double* out = acc.row(static_cast<index_t>(r));
            for (index_t q = 0; q < inner; ++q) {
                const double av = arow[q];
                const double* brow = window_row(b, q);
                for (index_t c = 0; c < out_cols; ++c)
                    out[c] += av * brow[c];
            }
        }
    } else {
        const CsrMatrix& s = a.sparse();
        const auto& rp = s.row_ptr();
        const auto& ci = s.col_idx();
        const auto& vals = s.values();
        const index_t r0 = a.row_range().begin;
        const index_t c0 = a.col_range().begin;
        const index_t c1 = a.col_range().end;
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < out_rows; ++r) {
            const index_t gi = r0 + static_cast<index_t>(r);
            double* out = acc.row(static_cast<index_t>(r));
            for (index_t p = rp[gi]; p < rp[gi + 1]; ++p) {
                const index_t j = ci[p];
                if (j < c0 || j >= c1) continue;
                const double av = vals[p];
                const double* brow = window_row(b, j - c0);
                for (index_t c = 0; c < out_cols; ++c)
                    out[c] += av * brow[c];
            }
        }
    }
}

DenseMatrix matmul(MatrixRef a, MatrixRef b) {
    DenseMatrix out(a.rows(), b.cols());
    matmul_acc(a, b, out);
    return out;
}

DenseMatrix matmul(MatrixRef a, const DenseMatrix& b) { return matmul(a, MatrixRef(b)); }

void matmul_ta_acc(MatrixRef w, MatrixRef a, DenseMatrix& acc) {
    if (w.empty() || !w.is_dense())
        throw ShapeError("matmul_ta: left operand must be dense");
    if (w.rows() != a.rows())
        throw ShapeError("matmul_ta: row counts disagree: " + w.shape_str() + " vs " +
                         a.shape_str());
    if (acc.rows() != w.cols() || acc.cols() != a.cols())
        throw ShapeError("matmul_ta: accumulator " + acc.shape_str() + " does not match product " +
                         std::to_string(w.cols()) + "x" + std::to_string(a.cols()));
    const index_t n_rows = w.rows();
    const std::int64_t k = static_cast<std::int64_t>(w.cols());
    const index_t out_cols = a.cols();

    if (a.is_dense()) {
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < k; ++r) {
            double* out = acc.row(static_cast<index_t>(r));
            for (index_t i = 0; i < n_rows; ++i) {
                const double wv = window_row(w, i)[r];
                const double* arow = window_row(a, i);
                for (index_t c = 0; c < out_cols; ++c)
                    out[c] += wv * arow[c];
            }
        }
    } else {
        const CsrMatrix& s = a.sparse();
        const auto& rp = s.row_ptr();
        const auto& ci = s.col_idx();
        const auto& vals = s.values();
        const index_t r0 = a.row_range().begin;
        const index_t c0 = a.col_range().begin;
        const index_t c1 = a.col_range().end;
        // Scatter a_ij * w[i,:] into column j. Serial: nnz writes land on
        // arbitrary output columns.
        for (index_t i = 0; i < n_rows; ++i) {
            const double* wrow = window_row(w, i);
            const index_t gi = r0 + i;
            for (index_t p = rp[gi]; p < rp[gi + 1]; ++p) {
                const index_t j = ci[p];
                if (j < c0 || j >= c1) continue;
                const double av = vals[p];
                const index_t lc = j - c0;
                for (index_t r = 0; r < static_cast<index_t>(k); ++r)
                    acc.at(r, lc) += av * wrow[r];
            }
        }
    }
}

void gram_acc(MatrixRef a, DenseMatrix& acc) {
    if (a.rows() == 0 || a.cols() == 0)
        throw ShapeError("gram_t: empty operand " + a.shape_str());
    const index_t k = a.cols();
    if (acc.rows() != k || acc.cols() != k)
        throw ShapeError("gram_t: accumulator " + acc.shape_str() + " is not " +
                         std::to_string(k) + "x" + std::to_string(k));
    const index_t n_rows = a.rows();

    if (a.is_dense()) {
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < static_cast<std::int64_t>(k); ++r) {
            for (index_t c = static_cast<index_t>(r); c < k; ++c) {
                double sum = acc.at(static_cast<index_t>(r), c);
                for (index_t i = 0; i < n_rows; ++i) {
                    const double* arow = window_row(a, i);
                    sum += arow[r] * arow[c];
                }
                acc.at(static_cast<index_t>(r), c) = sum;
            }
        }
    } else {
        const CsrMatrix& s = a.sparse();
        const auto& rp = s.row_ptr();
        const auto& ci = s.col_idx();
        const auto& vals = s.values();
        const index_t r0 = a.row_range().begin;
        const index_t c0 = a.col_range().begin;
        const index_t c1 = a.col_range().end;
        for (index_t i = 0; i < n_rows; ++i) {
            const index_t gi = r0 + i;
            for (index_t p = rp[gi]; p < rp[gi + 1]; ++p) {
                const index_t j = ci[p];
                if (j < c0 || j >= c1) continue;
                for (index_t q = p; q < rp[gi + 1]; ++q) {
                    const index_t j2 = ci[q];
                    if (j2 < c0 || j2 >= c1) continue;
                    acc.at(j - c0, j2 - c0) += vals[p] * vals[q];
                }
            }
        }
    }
    // Mirror the upper triangle: symmetry holds to the bit.
    for (index_t r = 0; r < k; ++r)
        for (index_t c = r + 1; c < k; ++c)
            acc.at(c, r) = acc.at(r, c);
}

DenseMatrix gram_t(MatrixRef a) {
    DenseMatrix out(a.cols(), a.cols());
    gram_acc(a, out);
    return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix out(a.cols(), a.rows());
    const std::int64_t rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i)
        for (index_t j = 0; j < a.cols(); ++j)
            out.at(j, static_cast<index_t>(i)) = a.at(static_cast<index_t>(i), j);
    return out;
}

namespace {

void check_hadamard(const DenseMatrix& t, index_t rows, index_t cols, const DenseMatrix& numer,
                    const DenseMatrix& denom, double epsilon) {
    if (numer.rows() != rows || numer.cols() != cols || denom.rows() != rows ||
        denom.cols() != cols)
        throw ShapeError("hadamard_update: shapes disagree: target window " +
                         std::to_string(rows) + "x" + std::to_string(cols) + ", numer " +
                         numer.shape_str() + ", denom " + denom.shape_str());
    if (!(epsilon >= 0.0))
        throw ShapeError("hadamard_update: epsilon must be >= 0");
    (void)t;
}

} // namespace

void hadamard_update(DenseMatrix& target, const DenseMatrix& numer, const DenseMatrix& denom,
                     double epsilon) {
    hadamard_update_rows(target, 0, numer, denom, epsilon);
}

void hadamard_update_rows(DenseMatrix& target, index_t row0, const DenseMatrix& numer,
                          const DenseMatrix& denom, double epsilon) {
    check_hadamard(target, numer.rows(), target.cols(), numer, denom, epsilon);
    if (row0 + numer.rows() > target.rows())
        throw ShapeError("hadamard_update_rows: row window out of bounds");
    const std::int64_t rows = static_cast<std::int64_t>(numer.rows());
    const index_t cols = target.cols();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) {
        double* t = target.row(row0 + static_cast<index_t>(i));
        const double* nu = numer.row(static_cast<index_t>(i));
        const double* de = denom.row(static_cast<index_t>(i));
        for (index_t j = 0; j < cols; ++j)
            t[j] = t[j] * nu[j] / (de[j] + epsilon);
    }
}

void hadamard_update_cols(DenseMatrix& target, index_t col0, const DenseMatrix& numer,
                          const DenseMatrix& denom, double epsilon) {
    check_hadamard(target, target.rows(), numer.cols(), numer, denom, epsilon);
    if (col0 + numer.cols() > target.cols())
        throw ShapeError("hadamard_update_cols: column window out of bounds");
    const std::int64_t rows = static_cast<std::int64_t>(target.rows());
    const index_t cols = numer.cols();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) {
        double* t = target.row(static_cast<index_t>(i)) + col0;
        const double* nu = numer.row(static_cast<index_t>(i));
        const double* de = denom.row(static_cast<index_t>(i));
        for (index_t j = 0; j < cols; ++j)
            t[j] = t[j] * nu[j] / (de[j] + epsilon);
    }
}

double sq_frobenius(MatrixRef a) {
    // Serial, ascending index: the value feeds bit-reproducibility contracts.
    double sum = 0.0;
    if (a.is_dense()) {
        for (index_t i = 0; i < a.rows(); ++i) {
            const double* row = window_row(a, i);
            for (index_t j = 0; j < a.cols(); ++j)
                sum += row[j] * row[j];
        }
    } else if (a.is_sparse()) {
        const CsrMatrix& s = a.sparse();
        const auto& rp = s.row_ptr();
        const auto& ci = s.col_idx();
        const auto& vals = s.values();
        const index_t c0 = a.col_range().begin;
        const index_t c1 = a.col_range().end;
        for (index_t i = a.row_range().begin; i < a.row_range().end; ++i)
            for (index_t p = rp[i]; p < rp[i + 1]; ++p)
                if (ci[p] >= c0 && ci[p] < c1)
                    sum += vals[p] * vals[p];
    }
    return sum;
}

double frobenius_norm(MatrixRef a) { return std::sqrt(sq_frobenius(a)); }

double residual_sq(MatrixRef a, const DenseMatrix& w, index_t w_row0, const DenseMatrix& h,
                   index_t h_col0, index_t block_rows) {
    if (w.cols() != h.rows())
        throw ShapeError("residual_sq: W " + w.shape_str() + " and H " + h.shape_str() +
                         " do not conform");
    if (w_row0 + a.rows() > w.rows() || h_col0 + a.cols() > h.cols())
        throw ShapeError("residual_sq: window exceeds factor extents");
    if (block_rows == 0) block_rows = 1;

    const index_t n_cols = a.cols();
    MatrixRef wref(w);
    MatrixRef href(h);
    MatrixRef hwin = href.window({0, h.rows()}, {h_col0, h_col0 + n_cols});

    double total = 0.0;
    for (index_t b0 = 0; b0 < a.rows(); b0 += block_rows) {
        const index_t b1 = std::min(a.rows(), b0 + block_rows);
        DenseMatrix wh = matmul(wref.window({w_row0 + b0, w_row0 + b1}, {0, w.cols()}), hwin);
        double block_sum = 0.0;
        if (a.is_dense()) {
            for (index_t i = b0; i < b1; ++i) {
                const double* arow = window_row(a, i);
                const double* whrow = wh.row(i - b0);
                for (index_t j = 0; j < n_cols; ++j) {
                    const double d = arow[j] - whrow[j];
                    block_sum += d * d;
                }
            }
        } else {
            const CsrMatrix& s = a.sparse();
            const auto& rp = s.row_ptr();
            const auto& ci = s.col_idx();
            const auto& vals = s.values();
            const index_t r0 = a.row_range().begin;
            const index_t c0 = a.col_range().begin;
            for (index_t i = b0; i < b1; ++i) {
                const index_t gi = r0 + i;
                const double* whrow = wh.row(i - b0);
                index_t p = rp[gi];
                const index_t pe = rp[gi + 1];
                while (p < pe && ci[p] < c0) ++p;
                for (index_t j = 0; j < n_cols; ++j) {
                    double av = 0.0;
                    if (p < pe && ci[p] == c0 + j) {
                        av = vals[p];
                        ++p;
                    }
                    const double d = av - whrow[j];
                    block_sum += d * d;
                }
            }
        }
        total += block_sum;
    }
    return total;
}

double relative_error(MatrixRef a, const DenseMatrix& w, const DenseMatrix& h,
                      index_t block_rows) {
    if (a.rows() != w.rows() || a.cols() != h.cols())
        throw ShapeError("relative_error: A " + a.shape_str() + " vs W " + w.shape_str() +
                         " H " + h.shape_str());
    const double norm_sq = sq_frobenius(a);
    if (norm_sq == 0.0)
        throw DataError("relative_error: ||A||_F is zero");
    return std::sqrt(residual_sq(a, w, 0, h, 0, block_rows)) / std::sqrt(norm_sq);
}

void validate_nonnegative(MatrixRef a) {
    if (a.is_dense()) {
        for (index_t i = 0; i < a.rows(); ++i) {
            const double* row = window_row(a, i);
            for (index_t j = 0; j < a.cols(); ++j)
                if (!(row[j] >= 0.0))
                    throw DataError("negative entry at (" +
                                    std::to_string(a.row_range().begin + i) + ", " +
                                    std::to_string(a.col_range().begin + j) +
                                    "): " + std::to_string(row[j]));
        }
    } else if (a.is_sparse()) {
        const CsrMatrix& s = a.sparse();
        const auto& rp = s.row_ptr();
        const auto& ci = s.col_idx();
        const auto& vals = s.values();
        const index_t c0 = a.col_range().begin;
        const index_t c1 = a.col_range().end;
        for (index_t i = a.row_range().begin; i < a.row_range().end; ++i)
            for (index_t p = rp[i]; p < rp[i + 1]; ++p)
                if (ci[p] >= c0 && ci[p] < c1 && !(vals[p] >= 0.0))
                    throw DataError("negative entry at (" + std::to_string(i) + ", " +
                                    std::to_string(ci[p]) + "): " + std::to_string(vals[p]));
    }
}

bool all_finite(const DenseMatrix& m) {
    for (index_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m.data()[i])) return false;
    return true;
}

} // namespace oocnmf
