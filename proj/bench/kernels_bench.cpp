#include <benchmark/benchmark.h>

#include "oocnmf/kernels.hpp"
#include "oocnmf/reference.hpp"
#include "oocnmf/rng.hpp"
#include "oocnmf/synth.hpp"

using namespace oocnmf;

namespace {

DenseMatrix random_dense(index_t m, index_t n, std::uint64_t seed) {
    DenseMatrix out(m, n);
    CounterRng rng(seed, 99);
    for (index_t i = 0; i < m; ++i)
        for (index_t j = 0; j < n; ++j) out.at(i, j) = rng.uniform(i * n + j);
    return out;
}

void bm_matmul_parallel(benchmark::State& state) {
    const index_t s = static_cast<index_t>(state.range(0));
    DenseMatrix a = random_dense(s, s, 1), b = random_dense(s, s, 2);
    for (auto _ : state) {
        DenseMatrix c = matmul(MatrixRef(a), MatrixRef(b));
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * s * s * s);
}

void bm_matmul_serial(benchmark::State& state) {
    const index_t s = static_cast<index_t>(state.range(0));
    DenseMatrix a = random_dense(s, s, 1), b = random_dense(s, s, 2);
    for (auto _ : state) {
        DenseMatrix c = refk::matmul(MatrixRef(a), b);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * s * s * s);
}

void bm_matmul_ta_parallel(benchmark::State& state) {
    const index_t s = static_cast<index_t>(state.range(0));
    DenseMatrix w = random_dense(s, 16, 1), a = random_dense(s, s, 2);
    for (auto _ : state) {
        DenseMatrix c(16, s);
        matmul_ta_acc(MatrixRef(w), MatrixRef(a), c);
        benchmark::DoNotOptimize(c.data());
    }
}

void bm_matmul_ta_serial(benchmark::State& state) {
    const index_t s = static_cast<index_t>(state.range(0));
    DenseMatrix w = random_dense(s, 16, 1), a = random_dense(s, s, 2);
    for (auto _ : state) {
        DenseMatrix c(16, s);
        refk::matmul_ta_acc(MatrixRef(w), MatrixRef(a), c);
        benchmark::DoNotOptimize(c.data());
    }
}

void bm_gram_parallel(benchmark::State& state) {
    const index_t s = static_cast<index_t>(state.range(0));
    DenseMatrix a = random_dense(s, 64, 1);
    for (auto _ : state) {
        DenseMatrix g = gram_t(MatrixRef(a));
        benchmark::DoNotOptimize(g.data());
    }
}

void bm_gram_serial(benchmark::State& state) {
    const index_t s = static_cast<index_t>(state.range(0));
    DenseMatrix a = random_dense(s, 64, 1);
    for (auto _ : state) {
        DenseMatrix g(64, 64);
        refk::gram_acc(MatrixRef(a), g);
        benchmark::DoNotOptimize(g.data());
    }
}

void bm_hadamard_parallel(benchmark::State& state) {
    const index_t s = static_cast<index_t>(state.range(0));
    DenseMatrix t = random_dense(s, s, 1), nu = random_dense(s, s, 2),
                de = random_dense(s, s, 3);
    for (auto _ : state) {
        hadamard_update(t, nu, de, kDefaultEpsilon);
        benchmark::DoNotOptimize(t.data());
    }
}

void bm_hadamard_serial(benchmark::State& state) {
    const index_t s = static_cast<index_t>(state.range(0));
    DenseMatrix t = random_dense(s, s, 1), nu = random_dense(s, s, 2),
                de = random_dense(s, s, 3);
    for (auto _ : state) {
        refk::hadamard_update(t, nu, de, kDefaultEpsilon);
        benchmark::DoNotOptimize(t.data());
    }
}

void bm_spmm_parallel(benchmark::State& state) {
    const index_t s = static_cast<index_t>(state.range(0));
    CsrMatrix a = gen_sparse_random({s, s, 0.05, 7});
    DenseMatrix b = random_dense(s, 16, 2);
    for (auto _ : state) {
        DenseMatrix c = matmul(MatrixRef(a), MatrixRef(b));
        benchmark::DoNotOptimize(c.data());
    }
}

void bm_spmm_serial(benchmark::State& state) {
    const index_t s = static_cast<index_t>(state.range(0));
    CsrMatrix a = gen_sparse_random({s, s, 0.05, 7});
    DenseMatrix b = random_dense(s, 16, 2);
    for (auto _ : state) {
        DenseMatrix c = refk::matmul(MatrixRef(a), b);
        benchmark::DoNotOptimize(c.data());
    }
}

}  // namespace

BENCHMARK(bm_matmul_serial)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_matmul_parallel)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_matmul_ta_serial)->Arg(512)->Arg(1024);
BENCHMARK(bm_matmul_ta_parallel)->Arg(512)->Arg(1024);
BENCHMARK(bm_gram_serial)->Arg(1024)->Arg(4096);
BENCHMARK(bm_gram_parallel)->Arg(1024)->Arg(4096);
BENCHMARK(bm_hadamard_serial)->Arg(512)->Arg(1024);
BENCHMARK(bm_hadamard_parallel)->Arg(512)->Arg(1024);
BENCHMARK(bm_spmm_serial)->Arg(1024)->Arg(2048);
BENCHMARK(bm_spmm_parallel)->Arg(1024)->Arg(2048);

BENCHMARK_MAIN();
