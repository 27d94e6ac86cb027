#include "oocnmf/synth.hpp"

#include <cmath>

#include "oocnmf/error.hpp"
#include "oocnmf/kernels.hpp"
#include "oocnmf/rng.hpp"

namespace oocnmf {

namespace {
constexpr std::uint64_t kStreamW0 = 11;
constexpr std::uint64_t kStreamH0 = 12;
constexpr std::uint64_t kStreamNoise = 13;
constexpr std::uint64_t kStreamSparse = 14;
}  // namespace

LowrankData gen_lowrank(const LowrankSpec& spec) {
    if (spec.m == 0 || spec.n == 0 || spec.k_true == 0)
        throw ShapeError("gen_lowrank: m, n and k_true must be positive");
    if (spec.k_true > spec.m || spec.k_true > spec.n)
        throw ShapeError("gen_lowrank: k_true must not exceed min(m, n)");
    if (spec.noise < 0.0 || spec.noise >= 1.0)
        throw ShapeError("gen_lowrank: noise must lie in [0, 1)");

    LowrankData out;
    out.w0 = DenseMatrix(spec.m, spec.k_true);
    out.h0 = DenseMatrix(spec.k_true, spec.n);

    // Each column of W0 is a Gaussian bump over the row index, so the columns
    // are well separated and the product has numerical rank exactly k_true.
    CounterRng wrng(spec.seed, kStreamW0);
    const double width = static_cast<double>(spec.m) / (4.0 * spec.k_true);
    for (index_t c = 0; c < spec.k_true; ++c) {
        const double mu = (c + 0.5) * static_cast<double>(spec.m) / spec.k_true;
        for (index_t i = 0; i < spec.m; ++i) {
            const double d = (static_cast<double>(i) - mu) / width;
            const double floor = 0.01 * wrng.uniform(i * spec.k_true + c);
            out.w0.at(i, c) = std::exp(-0.5 * d * d) + floor;
        }
    }

    CounterRng hrng(spec.seed, kStreamH0);
    for (index_t r = 0; r < spec.k_true; ++r)
        for (index_t j = 0; j < spec.n; ++j)
            out.h0.at(r, j) = hrng.uniform(r * spec.n + j);

    out.a = matmul(MatrixRef(out.w0), MatrixRef(out.h0));
    if (spec.noise > 0.0) {
        CounterRng nrng(spec.seed, kStreamNoise);
        for (index_t i = 0; i < spec.m; ++i)
            for (index_t j = 0; j < spec.n; ++j) {
                const double u = nrng.uniform(i * spec.n + j);
                out.a.at(i, j) *= 1.0 + spec.noise * (2.0 * u - 1.0);
            }
    }
    return out;
}

CsrMatrix gen_sparse_random(const SparseSpec& spec) {
    if (spec.m == 0 || spec.n == 0)
        throw ShapeError("gen_sparse_random: m and n must be positive");
    if (spec.density < 0.0 || spec.density > 1.0)
        throw ShapeError("gen_sparse_random: density must lie in [0, 1]");

    std::vector<index_t> row_ptr(spec.m + 1, 0);
    std::vector<index_t> col_idx;
    std::vector<double> values;

    // Two decoupled streams: one decides presence, one draws the value, so
    // the value at (i, j) does not depend on which other entries exist.
    CounterRng mask(spec.seed, kStreamSparse);
    CounterRng vals(spec.seed, kStreamSparse + 1);
    for (index_t i = 0; i < spec.m; ++i) {
        for (index_t j = 0; j < spec.n; ++j) {
            const index_t flat = i * spec.n + j;
            if (mask.uniform(flat) < spec.density) {
                col_idx.push_back(j);
                values.push_back(vals.uniform(flat));
            }
        }
        row_ptr[i + 1] = col_idx.size();
    }
    return CsrMatrix(spec.m, spec.n, std::move(row_ptr), std::move(col_idx),
                     std::move(values));
}

}  // namespace oocnmf
