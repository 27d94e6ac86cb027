#include "oocnmf/matrix.hpp"

#include <algorithm>

namespace oocnmf {

void CsrMatrix::validate_structure() const {
    if (row_ptr_.size() != rows_ + 1)
        throw ShapeError("CsrMatrix: row_ptr length " + std::to_string(row_ptr_.size()) +
                         " != rows+1 = " + std::to_string(rows_ + 1));
    if (row_ptr_.front() != 0)
        throw ShapeError("CsrMatrix: row_ptr[0] != 0");
    if (row_ptr_.back() != values_.size() || col_idx_.size() != values_.size())
        throw ShapeError("CsrMatrix: row_ptr[rows]=" + std::to_string(row_ptr_.back()) +
                         " disagrees with nnz=" + std::to_string(values_.size()));
    for (index_t i = 0; i < rows_; ++i) {
        if (row_ptr_[i] > row_ptr_[i + 1])
            throw ShapeError("CsrMatrix: row_ptr decreases at row " + std::to_string(i));
        for (index_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
            if (col_idx_[p] >= cols_)
                throw ShapeError("CsrMatrix: column index " + std::to_string(col_idx_[p]) +
                                 " >= cols=" + std::to_string(cols_) + " in row " + std::to_string(i));
            if (p > row_ptr_[i] && col_idx_[p] <= col_idx_[p - 1])
                throw ShapeError("CsrMatrix: column indices not strictly increasing in row " +
                                 std::to_string(i));
        }
    }
}

DenseMatrix CsrMatrix::to_dense() const {
    DenseMatrix out(rows_, cols_);
    for (index_t i = 0; i < rows_; ++i)
        for (index_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
            out.at(i, col_idx_[p]) = values_[p];
    return out;
}

CsrMatrix CsrMatrix::from_dense(const DenseMatrix& d, double zero_tol) {
    std::vector<index_t> rp{0}, ci;
    std::vector<double> v;
    rp.reserve(d.rows() + 1);
    for (index_t i = 0; i < d.rows(); ++i) {
        for (index_t j = 0; j < d.cols(); ++j) {
            double x = d.at(i, j);
            if (std::abs(x) > zero_tol) {
                ci.push_back(j);
                v.push_back(x);
            }
        }
        rp.push_back(v.size());
    }
    return CsrMatrix(d.rows(), d.cols(), std::move(rp), std::move(ci), std::move(v));
}

double MatrixRef::at(index_t i, index_t j) const {
    index_t gi = rows_.begin + i;
    index_t gj = cols_.begin + j;
    if (dense_) return dense_->at(gi, gj);
    const auto& rp = sparse_->row_ptr();
    const auto& ci = sparse_->col_idx();
    auto first = ci.begin() + static_cast<std::ptrdiff_t>(rp[gi]);
    auto last = ci.begin() + static_cast<std::ptrdiff_t>(rp[gi + 1]);
    auto it = std::lower_bound(first, last, gj);
    if (it != last && *it == gj)
        return sparse_->values()[static_cast<index_t>(it - ci.begin())];
    return 0.0;
}

} // namespace oocnmf
