#include "oocnmf/reference.hpp"

namespace oocnmf::refk {

namespace {
inline const double* window_row(const MatrixRef& b, index_t q) {
    return b.dense().row(b.row_range().begin + q) + b.col_range().begin;
}
} // namespace

void matmul_acc(MatrixRef a, MatrixRef b, DenseMatrix& acc) {
    if (a.cols() != b.rows())
        throw ShapeError("refk::matmul: inner dimensions disagree: " + a.shape_str() + " @ " +
                         b.shape_str());
    const index_t out_cols = b.cols();
    if (a.is_dense()) {
        for (index_t r = 0; r < a.rows(); ++r) {
            const double* arow = window_row(a, r);
            double* out = acc.row(r);
            for (index_t q = 0; q < a.cols(); ++q) {
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
        for (index_t r = 0; r < a.rows(); ++r) {
            const index_t gi = r0 + r;
            double* out = acc.row(r);
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

DenseMatrix matmul(MatrixRef a, const DenseMatrix& b) {
    DenseMatrix out(a.rows(), b.cols());
    matmul_acc(a, MatrixRef(b), out);
    return out;
}

void matmul_ta_acc(MatrixRef w, MatrixRef a, DenseMatrix& acc) {
    if (w.rows() != a.rows())
        throw ShapeError("refk::matmul_ta: row counts disagree");
    const index_t k = w.cols();
    const index_t out_cols = a.cols();
    if (a.is_dense()) {
        for (index_t r = 0; r < k; ++r) {
            double* out = acc.row(r);
            for (index_t i = 0; i < w.rows(); ++i) {
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
        for (index_t i = 0; i < w.rows(); ++i) {
            const double* wrow = window_row(w, i);
            const index_t gi = r0 + i;
            for (index_t p = rp[gi]; p < rp[gi + 1]; ++p) {
                const index_t j = ci[p];
                if (j < c0 || j >= c1) continue;
                for (index_t r = 0; r < k; ++r)
                    acc.at(r, j - c0) += vals[p] * wrow[r];
            }
        }
    }
}

void gram_acc(MatrixRef a, DenseMatrix& acc) {
    const index_t k = a.cols();
    for (index_t r = 0; r < k; ++r) {
        for (index_t c = r; c < k; ++c) {
            double sum = acc.at(r, c);
            for (index_t i = 0; i < a.rows(); ++i) {
                const double* arow = window_row(a, i);
                sum += arow[r] * arow[c];
            }
            acc.at(r, c) = sum;
        }
    }
    for (index_t r = 0; r < k; ++r)
        for (index_t c = r + 1; c < k; ++c)
            acc.at(c, r) = acc.at(r, c);
}

void hadamard_update(DenseMatrix& target, const DenseMatrix& numer, const DenseMatrix& denom,
                     double epsilon) {
    for (index_t i = 0; i < target.rows(); ++i) {
        double* t = target.row(i);
        const double* nu = numer.row(i);
        const double* de = denom.row(i);
        for (index_t j = 0; j < target.cols(); ++j)
            t[j] = t[j] * nu[j] / (de[j] + epsilon);
    }
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix out(a.cols(), a.rows());
    for (index_t i = 0; i < a.rows(); ++i)
        for (index_t j = 0; j < a.cols(); ++j)
            out.at(j, i) = a.at(i, j);
    return out;
}

} // namespace oocnmf::refk
