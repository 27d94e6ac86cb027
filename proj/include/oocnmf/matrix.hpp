#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "oocnmf/error.hpp"

namespace oocnmf {

using index_t = std::size_t;

/// Half-open index interval [begin, end).
struct IndexRange {
    index_t begin = 0;
    index_t end = 0;

    index_t extent() const { return end - begin; }
    bool contains(index_t i) const { return i >= begin && i < end; }
    bool operator==(const IndexRange&) const = default;
};

/// Row-major dense matrix of 64-bit floats.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(index_t rows, index_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(index_t rows, index_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("DenseMatrix: data length " + std::to_string(data_.size()) +
                             " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    index_t rows() const { return rows_; }
    index_t cols() const { return cols_; }
    index_t size() const { return data_.size(); }

    double& at(index_t i, index_t j) { return data_[i * cols_ + j]; }
    double at(index_t i, index_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(index_t i) { return data_.data() + i * cols_; }
    const double* row(index_t i) const { return data_.data() + i * cols_; }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    bool operator==(const DenseMatrix&) const = default;

private:
    index_t rows_ = 0;
    index_t cols_ = 0;
    std::vector<double> data_;
};

/// Compressed sparse row matrix. Column indices strictly increase within a
/// row; stored values are expected nonnegative and nonzero.
class CsrMatrix {
public:
    CsrMatrix() = default;
    CsrMatrix(index_t rows, index_t cols, std::vector<index_t> row_ptr,
              std::vector<index_t> col_idx, std::vector<double> values)
        : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)),
          col_idx_(std::move(col_idx)), values_(std::move(values)) {
        validate_structure();
    }

    index_t rows() const { return rows_; }
    index_t cols() const { return cols_; }
    index_t nnz() const { return values_.size(); }

    const std::vector<index_t>& row_ptr() const { return row_ptr_; }
    const std::vector<index_t>& col_idx() const { return col_idx_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    /// Throws ShapeError if the CSR invariants do not hold.
    void validate_structure() const;

    /// Dense copy (test/diagnostic use).
    DenseMatrix to_dense() const;

    static CsrMatrix from_dense(const DenseMatrix& d, double zero_tol = 0.0);

    bool operator==(const CsrMatrix&) const = default;

private:
    index_t rows_ = 0;
    index_t cols_ = 0;
    std::vector<index_t> row_ptr_{0};
    std::vector<index_t> col_idx_;
    std::vector<double> values_;
};

/// Zero-copy window over a dense or CSR matrix. The window is expressed in
/// the coordinates of the underlying matrix; kernels see local coordinates
/// [0, rows()) x [0, cols()).
class MatrixRef {
public:
    MatrixRef() = default;

    explicit MatrixRef(const DenseMatrix& m)
        : dense_(&m), rows_{0, m.rows()}, cols_{0, m.cols()} {}
    explicit MatrixRef(const CsrMatrix& m)
        : sparse_(&m), rows_{0, m.rows()}, cols_{0, m.cols()} {}

    /// Sub-window in the coordinates of this ref.
    MatrixRef window(IndexRange r, IndexRange c) const {
        if (r.begin > r.end || r.end > rows() || c.begin > c.end || c.end > cols())
            throw ShapeError("MatrixRef::window: window [" + std::to_string(r.begin) + "," +
                             std::to_string(r.end) + ")x[" + std::to_string(c.begin) + "," +
                             std::to_string(c.end) + ") out of bounds for " + shape_str());
        MatrixRef out = *this;
        out.rows_ = {rows_.begin + r.begin, rows_.begin + r.end};
        out.cols_ = {cols_.begin + c.begin, cols_.begin + c.end};
        return out;
    }

    index_t rows() const { return rows_.extent(); }
    index_t cols() const { return cols_.extent(); }
    IndexRange row_range() const { return rows_; }
    IndexRange col_range() const { return cols_; }

    bool is_dense() const { return dense_ != nullptr; }
    bool is_sparse() const { return sparse_ != nullptr; }
    bool empty() const { return dense_ == nullptr && sparse_ == nullptr; }

    const DenseMatrix& dense() const { return *dense_; }
    const CsrMatrix& sparse() const { return *sparse_; }

    /// Entry in local window coordinates (slow path; tests and validation).
    double at(index_t i, index_t j) const;

    std::string shape_str() const {
        return std::to_string(rows()) + "x" + std::to_string(cols());
    }

private:
    const DenseMatrix* dense_ = nullptr;
    const CsrMatrix* sparse_ = nullptr;
    IndexRange rows_, cols_;
};

} // namespace oocnmf
