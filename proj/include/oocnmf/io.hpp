#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <variant>

#include "oocnmf/matrix.hpp"

namespace oocnmf {

/// Dense-or-CSR matrix holder used at module boundaries (file loads, CLI).
struct AnyMatrix {
    std::variant<DenseMatrix, CsrMatrix> value;

    bool is_dense() const { return std::holds_alternative<DenseMatrix>(value); }
    const DenseMatrix& dense() const { return std::get<DenseMatrix>(value); }
    const CsrMatrix& sparse() const { return std::get<CsrMatrix>(value); }

    MatrixRef ref() const {
        return is_dense() ? MatrixRef(dense()) : MatrixRef(sparse());
    }
    index_t rows() const { return is_dense() ? dense().rows() : sparse().rows(); }
    index_t cols() const { return is_dense() ? dense().cols() : sparse().cols(); }
};

// "PDN1" binary matrix format:
//   8-byte magic "PDNMF\0v1", u8 kind (0=dense, 1=CSR), u8 dtype (0=f64),
//   u64 rows, u64 cols, all little-endian.
//   dense payload: row-major f64.
//   CSR payload: u64 nnz, row_ptr u64[rows+1], col_idx u64[nnz], values f64[nnz].

void write_pdn1(const std::string& path, const DenseMatrix& m);
void write_pdn1(const std::string& path, const CsrMatrix& m);
AnyMatrix read_pdn1(const std::string& path);

/// Random-access reader over a PDN1 file; serves windowed loads for the
/// out-of-core store.
class Pdn1File {
public:
    explicit Pdn1File(const std::string& path);

    bool is_dense() const { return kind_ == 0; }
    index_t rows() const { return rows_; }
    index_t cols() const { return cols_; }
    index_t nnz() const { return nnz_; }

    /// Dense window [r) x [c), read row by row.
    DenseMatrix read_dense_window(IndexRange r, IndexRange c) const;

    /// CSR row range, full column extent; row_ptr rebased to the range.
    /// Column indices stay in global coordinates (cols() wide).
    CsrMatrix read_csr_rows(IndexRange r) const;

    /// Byte size of the payload for a window, as the store accounts it.
    index_t window_bytes(IndexRange r, IndexRange c) const;

private:
    mutable std::ifstream in_;
    std::string path_;
    std::uint8_t kind_ = 0;
    index_t rows_ = 0, cols_ = 0, nnz_ = 0;
    std::streamoff payload_off_ = 0;   // start of dense payload / nnz field
    std::streamoff row_ptr_off_ = 0;
    std::streamoff col_idx_off_ = 0;
    std::streamoff values_off_ = 0;
};

// Matrix Market interchange ("array" for dense, "coordinate" for sparse,
// field real, symmetry general).
void write_mtx(const std::string& path, const DenseMatrix& m);
void write_mtx(const std::string& path, const CsrMatrix& m);
AnyMatrix read_mtx(const std::string& path);

/// Dispatch on extension: .pdn1 or .mtx.
AnyMatrix read_matrix(const std::string& path);

} // namespace oocnmf
