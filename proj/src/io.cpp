#include "oocnmf/io.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <map>
#include <sstream>

namespace oocnmf {

namespace {

constexpr std::array<char, 8> kMagic = {'P', 'D', 'N', 'M', 'F', '\0', 'v', '1'};

// Little-endian raw IO. The build targets little-endian hosts only.
static_assert(std::endian::native == std::endian::little,
              "PDN1 IO assumes a little-endian host");

template <typename T>
void write_raw(std::ofstream& out, const T* p, index_t count) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(sizeof(T) * count));
}

template <typename T>
void read_raw(std::ifstream& in, T* p, index_t count) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(sizeof(T) * count));
    if (!in) throw IoError("PDN1: truncated read");
}

void write_header(std::ofstream& out, std::uint8_t kind, index_t rows, index_t cols) {
    out.write(kMagic.data(), kMagic.size());
    std::uint8_t dtype = 0;
    write_raw(out, &kind, 1);
    write_raw(out, &dtype, 1);
    std::uint64_t r = rows, c = cols;
    write_raw(out, &r, 1);
    write_raw(out, &c, 1);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

} // namespace

void write_pdn1(const std::string& path, const DenseMatrix& m) {
    auto out = open_out(path);
    write_header(out, 0, m.rows(), m.cols());
    write_raw(out, m.data(), m.size());
    if (!out) throw IoError("write failed: " + path);
}

void write_pdn1(const std::string& path, const CsrMatrix& m) {
    auto out = open_out(path);
    write_header(out, 1, m.rows(), m.cols());
    std::uint64_t nnz = m.nnz();
    write_raw(out, &nnz, 1);
    std::vector<std::uint64_t> tmp(m.row_ptr().begin(), m.row_ptr().end());
    write_raw(out, tmp.data(), tmp.size());
    tmp.assign(m.col_idx().begin(), m.col_idx().end());
    write_raw(out, tmp.data(), tmp.size());
    write_raw(out, m.values().data(), nnz);
    if (!out) throw IoError("write failed: " + path);
}

Pdn1File::Pdn1File(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open: " + path);
    std::array<char, 8> magic{};
    in_.read(magic.data(), magic.size());
    if (!in_ || magic != kMagic) throw IoError("bad PDN1 magic in " + path);
    std::uint8_t dtype = 0;
    read_raw(in_, &kind_, 1);
    read_raw(in_, &dtype, 1);
    if (kind_ > 1) throw IoError("unknown PDN1 kind " + std::to_string(kind_) + " in " + path);
    if (dtype != 0) throw IoError("unknown PDN1 dtype " + std::to_string(dtype) + " in " + path);
    std::uint64_t r = 0, c = 0;
    read_raw(in_, &r, 1);
    read_raw(in_, &c, 1);
    rows_ = r;
    cols_ = c;
    payload_off_ = in_.tellg();
    if (kind_ == 1) {
        std::uint64_t nnz = 0;
        read_raw(in_, &nnz, 1);
        nnz_ = nnz;
        row_ptr_off_ = payload_off_ + 8;
        col_idx_off_ = row_ptr_off_ + static_cast<std::streamoff>(8 * (rows_ + 1));
        values_off_ = col_idx_off_ + static_cast<std::streamoff>(8 * nnz_);
    }
}

DenseMatrix Pdn1File::read_dense_window(IndexRange r, IndexRange c) const {
    if (kind_ != 0) throw IoError("dense window read on CSR file " + path_);
    if (r.end > rows_ || c.end > cols_ || r.begin > r.end || c.begin > c.end)
        throw ShapeError("PDN1 window out of bounds");
    DenseMatrix out(r.extent(), c.extent());
    for (index_t i = 0; i < r.extent(); ++i) {
        std::streamoff off =
            payload_off_ + static_cast<std::streamoff>(8 * ((r.begin + i) * cols_ + c.begin));
        in_.seekg(off);
        read_raw(in_, out.row(i), c.extent());
    }
    return out;
}

CsrMatrix Pdn1File::read_csr_rows(IndexRange r) const {
    if (kind_ != 1) throw IoError("CSR row read on dense file " + path_);
    if (r.end > rows_ || r.begin > r.end) throw ShapeError("PDN1 row range out of bounds");
    std::vector<std::uint64_t> rp(r.extent() + 1);
    in_.seekg(row_ptr_off_ + static_cast<std::streamoff>(8 * r.begin));
    read_raw(in_, rp.data(), rp.size());
    const index_t p0 = rp.front();
    const index_t count = rp.back() - p0;
    std::vector<index_t> row_ptr(rp.size());
    for (index_t i = 0; i < rp.size(); ++i) row_ptr[i] = rp[i] - p0;
    std::vector<std::uint64_t> ci64(count);
    in_.seekg(col_idx_off_ + static_cast<std::streamoff>(8 * p0));
    read_raw(in_, ci64.data(), count);
    std::vector<index_t> ci(ci64.begin(), ci64.end());
    std::vector<double> vals(count);
    in_.seekg(values_off_ + static_cast<std::streamoff>(8 * p0));
    read_raw(in_, vals.data(), count);
    return CsrMatrix(r.extent(), cols_, std::move(row_ptr), std::move(ci), std::move(vals));
}

index_t Pdn1File::window_bytes(IndexRange r, IndexRange c) const {
    if (kind_ == 0) return r.extent() * c.extent() * 8;
    // CSR loads materialize whole rows: row_ptr + col_idx + values.
    in_.seekg(row_ptr_off_ + static_cast<std::streamoff>(8 * r.begin));
    std::uint64_t p0 = 0, p1 = 0;
    read_raw(in_, &p0, 1);
    in_.seekg(row_ptr_off_ + static_cast<std::streamoff>(8 * r.end));
    read_raw(in_, &p1, 1);
    return (r.extent() + 1) * 8 + (p1 - p0) * 16;
}

AnyMatrix read_pdn1(const std::string& path) {
    Pdn1File f(path);
    if (f.is_dense())
        return AnyMatrix{f.read_dense_window({0, f.rows()}, {0, f.cols()})};
    return AnyMatrix{f.read_csr_rows({0, f.rows()})};
}

// ---------------------------------------------------------------------------
// Matrix Market

void write_mtx(const std::string& path, const DenseMatrix& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "%%MatrixMarket matrix array real general\n";
    out << m.rows() << " " << m.cols() << "\n";
    out << std::setprecision(17);
    // Array format is column-major.
    for (index_t j = 0; j < m.cols(); ++j)
        for (index_t i = 0; i < m.rows(); ++i)
            out << m.at(i, j) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

void write_mtx(const std::string& path, const CsrMatrix& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.rows() << " " << m.cols() << " " << m.nnz() << "\n";
    out << std::setprecision(17);
    for (index_t i = 0; i < m.rows(); ++i)
        for (index_t p = m.row_ptr()[i]; p < m.row_ptr()[i + 1]; ++p)
            out << i + 1 << " " << m.col_idx()[p] + 1 << " " << m.values()[p] << "\n";
    if (!out) throw IoError("write failed: " + path);
}

AnyMatrix read_mtx(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string header;
    if (!std::getline(in, header) || header.rfind("%%MatrixMarket", 0) != 0)
        throw IoError("not a Matrix Market file: " + path);
    std::istringstream hs(header);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (object != "matrix" || (field != "real" && field != "integer") || symmetry != "general")
        throw IoError("unsupported Matrix Market flavor in " + path + ": " + header);

    std::string line;
    do {
        if (!std::getline(in, line)) throw IoError("truncated Matrix Market file: " + path);
    } while (!line.empty() && line[0] == '%');

    std::istringstream sizes(line);
    if (format == "array") {
        index_t rows = 0, cols = 0;
        sizes >> rows >> cols;
        if (!sizes) throw IoError("bad array size line in " + path);
        DenseMatrix m(rows, cols);
        for (index_t j = 0; j < cols; ++j)
            for (index_t i = 0; i < rows; ++i)
                if (!(in >> m.at(i, j))) throw IoError("truncated array data in " + path);
        return AnyMatrix{std::move(m)};
    }
    if (format == "coordinate") {
        index_t rows = 0, cols = 0, nnz = 0;
        sizes >> rows >> cols >> nnz;
        if (!sizes) throw IoError("bad coordinate size line in " + path);
        // Entries may arrive in any order; sort into CSR via per-row maps.
        std::vector<std::map<index_t, double>> by_row(rows);
        for (index_t e = 0; e < nnz; ++e) {
            index_t i = 0, j = 0;
            double v = 0;
            if (!(in >> i >> j >> v)) throw IoError("truncated coordinate data in " + path);
            if (i < 1 || i > rows || j < 1 || j > cols)
                throw IoError("coordinate out of range in " + path);
            by_row[i - 1][j - 1] = v;
        }
        std::vector<index_t> rp{0}, ci;
        std::vector<double> vals;
        for (index_t i = 0; i < rows; ++i) {
            for (auto& [j, v] : by_row[i]) {
                ci.push_back(j);
                vals.push_back(v);
            }
            rp.push_back(vals.size());
        }
        return AnyMatrix{CsrMatrix(rows, cols, std::move(rp), std::move(ci), std::move(vals))};
    }
    throw IoError("unsupported Matrix Market format in " + path + ": " + format);
}

AnyMatrix read_matrix(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".mtx") return read_mtx(path);
    return read_pdn1(path);
}

} // namespace oocnmf
