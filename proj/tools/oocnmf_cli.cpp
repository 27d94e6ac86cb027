// Command-line front end: generate synthetic matrices, run (possibly
// distributed, possibly out-of-core) factorizations, sweep k for model
// selection, and emit phase-timing CSVs.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "oocnmf/error.hpp"
#include "oocnmf/io.hpp"
#include "oocnmf/model_selection.hpp"
#include "oocnmf/nmf_distributed.hpp"
#include "oocnmf/synth.hpp"

using namespace oocnmf;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "oocnmf 1.0.0";

enum LogLevel { kLogError = 0, kLogInfo = 1, kLogDebug = 2 };
int g_log_level = kLogError;

void init_log_level() {
    const char* env = std::getenv("OOCNMF_LOG");
    if (!env) return;
    const std::string v(env);
    if (v == "info") g_log_level = kLogInfo;
    else if (v == "debug") g_log_level = kLogDebug;
    else g_log_level = kLogError;
}

void log_info(const std::string& msg) {
    if (g_log_level >= kLogInfo) std::cerr << "[info] " << msg << "\n";
}
void log_debug(const std::string& msg) {
    if (g_log_level >= kLogDebug) std::cerr << "[debug] " << msg << "\n";
}

int fail(const std::string& type, const std::string& message, int code) {
    json j;
    j["error"]["type"] = type;
    j["error"]["message"] = message;
    std::cerr << j.dump() << "\n";
    return code;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out << text;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

json counters_json(const PhaseCounters& c) {
    return json{{"w_update_s", c.w_update_s},   {"h_update_s", c.h_update_s},
                {"allreduce_s", c.allreduce_s}, {"error_check_s", c.error_check_s},
                {"io_s", c.io_s},               {"total_s", c.total_s},
                {"flops", c.flops},             {"peak_resident_bytes", c.peak_resident_bytes}};
}

const char* tag_name(PhaseTag t) {
    switch (t) {
        case PhaseTag::generic: return "generic";
        case PhaseTag::w_update: return "w_update";
        case PhaseTag::h_update: return "h_update";
        case PhaseTag::error_check: return "error_check";
        case PhaseTag::gather: return "gather";
        case PhaseTag::barrier: return "barrier";
    }
    return "?";
}

json stats_json(const CollectiveStats& s) {
    json per = json::object();
    for (std::size_t i = 0; i < kNumPhaseTags; ++i) {
        const auto& t = s.per_tag[i];
        per[tag_name(static_cast<PhaseTag>(i))] =
            json{{"bytes", t.bytes}, {"calls", t.calls}, {"seconds", t.seconds}};
    }
    return json{{"per_tag", per},
                {"total_bytes", s.total_bytes()},
                {"total_calls", s.total_calls()},
                {"total_seconds", s.total_seconds()}};
}

std::string trace_csv(const NmfResult& r) {
    std::ostringstream out;
    out.precision(17);
    out << "iteration,relative_error\n";
    for (const auto& [it, err] : r.error_trace) out << it << ',' << err << '\n';
    return out.str();
}

// ---------------------------------------------------------------- gen

struct GenArgs {
    std::string type = "lowrank";
    index_t rows = 0, cols = 0, k_true = 4;
    double noise = 0.0, density = 0.05;
    std::uint64_t seed = 0;
    std::string out, out_w0, out_h0;
};

void write_matrix_auto(const std::string& path, const DenseMatrix& m) {
    if (path.ends_with(".mtx")) write_mtx(path, m);
    else write_pdn1(path, m);
}

int cmd_gen(const GenArgs& a) {
    if (a.type == "lowrank") {
        LowrankData d = gen_lowrank({a.rows, a.cols, a.k_true, a.noise, a.seed});
        write_matrix_auto(a.out, d.a);
        if (!a.out_w0.empty()) write_matrix_auto(a.out_w0, d.w0);
        if (!a.out_h0.empty()) write_matrix_auto(a.out_h0, d.h0);
    } else {
        CsrMatrix m = gen_sparse_random({a.rows, a.cols, a.density, a.seed});
        if (a.out.ends_with(".mtx")) write_mtx(a.out, m);
        else write_pdn1(a.out, m);
        log_info("generated " + m.shape_str() + " CSR, nnz=" + std::to_string(m.nnz()));
    }
    std::cout << json{{"written", a.out}}.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------- factorize

struct FactorizeArgs {
    std::string input, out = ".", strategy = "auto", backend = "threads";
    index_t k = 0, max_iters = 1000, batches = 1, budget = 0;
    double eta = 1e-4;
    std::uint64_t seed = 0;
    int workers = 1, rank = 0, spawn_local = 0;
    std::vector<std::string> peers;
    bool dump_plan = false;
};

PartitionPlan plan_for(const FactorizeArgs& a, index_t m, index_t n) {
    Strategy s;
    if (a.strategy == "auto") s = choose_strategy(m, n);
    else if (a.strategy == "cnmf") s = Strategy::cnmf;
    else if (a.strategy == "rnmf") s = Strategy::rnmf;
    else throw ShapeError("unknown strategy: " + a.strategy);
    return make_plan(m, n, a.k, a.workers, a.batches, s);
}

void write_run_outputs(const FactorizeArgs& a, const PartitionPlan& plan, const NmfResult& r,
                       const CollectiveStats* stats) {
    namespace fs = std::filesystem;
    fs::create_directories(a.out);
    const std::string dir = a.out + "/";
    write_pdn1(dir + "w.pdn1", r.w);
    write_pdn1(dir + "h.pdn1", r.h);
    write_text(dir + "error_trace.csv", trace_csv(r));
    write_text(dir + "counters.json", counters_json(r.counters).dump(2) + "\n");
    if (stats) write_text(dir + "stats.json", stats_json(*stats).dump(2) + "\n");

    json manifest;
    manifest["command"] = "factorize";
    manifest["version"] = kVersion;
    manifest["created"] = iso_now();
    manifest["config"] = {{"input", a.input},     {"k", a.k},
                          {"eta", a.eta},         {"max_iters", a.max_iters},
                          {"workers", a.workers}, {"backend", a.backend},
                          {"batches", a.batches}, {"budget", a.budget},
                          {"strategy", a.strategy}, {"seed", a.seed}};
    manifest["plan"] = json::parse(plan.to_json());
    manifest["outputs"] = {{"w", dir + "w.pdn1"},
                           {"h", dir + "h.pdn1"},
                           {"error_trace", dir + "error_trace.csv"},
                           {"counters", dir + "counters.json"}};
    manifest["result"] = {{"iterations_run", r.iterations_run},
                          {"converged", r.converged},
                          {"final_error", r.error_trace.back().second}};
    write_text(dir + "manifest.json", manifest.dump(2) + "\n");
}

int run_tcp_rank(const FactorizeArgs& a, const NmfConfig& cfg, const PartitionPlan& plan,
                 const ASource& src, const StoreConfig& store, int rank,
                 const std::vector<std::string>& peers) {
    CommHandle comm = connect_tcp(a.workers, rank, peers);
    NmfResult r = nmf_distributed(src, cfg, plan, comm);
    if (rank == 0) {
        CollectiveStats stats = comm.stats();
        write_run_outputs(a, plan, r, &stats);
        std::cout << json{{"final_error", r.error_trace.back().second},
                          {"iterations", r.iterations_run},
                          {"converged", r.converged},
                          {"out", a.out}}
                         .dump()
                  << "\n";
    }
    return 0;
}

int cmd_factorize(const FactorizeArgs& a) {
    if (!std::filesystem::exists(a.input))
        return fail("usage", "input file not found: " + a.input, 2);

    AnyMatrix in = read_matrix(a.input);
    const index_t m = in.rows(), n = in.cols();
    PartitionPlan plan = plan_for(a, m, n);
    log_info("plan: " + to_string(plan.strategy) + " N=" + std::to_string(plan.n_workers) +
             " n_b=" + std::to_string(plan.n_b));
    if (a.dump_plan) {
        std::cout << plan.to_json() << "\n";
        return 0;
    }

    NmfConfig cfg;
    cfg.k = a.k;
    cfg.eta = a.eta;
    cfg.max_iters = a.max_iters;
    cfg.seed = a.seed;
    cfg.validate();

    StoreConfig store;
    store.budget_bytes = a.budget;

    // Out-of-core file streaming only makes sense for a pdn1 input; mtx is
    // parsed fully regardless.
    const bool file_backed = a.input.ends_with(".pdn1") && a.budget > 0;
    ASource src = file_backed ? ASource::file(a.input) : ASource::memory(in.ref());

    const Backend backend = backend_from_string(a.backend);
    if (backend == Backend::tcp) {
        if (a.spawn_local > 0) {
            // Fork one local process per rank over localhost sockets.
            const std::uint16_t port = static_cast<std::uint16_t>(19000 + (getpid() % 4000));
            std::vector<std::string> peers = {"127.0.0.1:" + std::to_string(port)};
            std::vector<pid_t> pids;
            for (int r = 0; r < a.workers; ++r) {
                const pid_t pid = fork();
                if (pid == 0) {
                    try {
                        _exit(run_tcp_rank(a, cfg, plan, src, store, r, peers));
                    } catch (const std::exception& e) {
                        std::cerr << json{{"error", {{"type", "runtime"}, {"message", e.what()}}}}
                                         .dump()
                                  << "\n";
                        _exit(3);
                    }
                }
                pids.push_back(pid);
            }
            int code = 0;
            for (pid_t pid : pids) {
                int st = 0;
                waitpid(pid, &st, 0);
                if (!WIFEXITED(st) || WEXITSTATUS(st) != 0) code = 3;
            }
            return code;
        }
        if (a.peers.empty()) return fail("usage", "--backend tcp needs --peers or --spawn-local", 2);
        return run_tcp_rank(a, cfg, plan, src, store, a.rank, a.peers);
    }

    std::vector<CollectiveStats> stats;
    std::vector<NmfResult> results = run_distributed_threads(src, cfg, plan, store, &stats);
    write_run_outputs(a, plan, results[0], &stats[0]);
    std::cout << json{{"final_error", results[0].error_trace.back().second},
                      {"iterations", results[0].iterations_run},
                      {"converged", results[0].converged},
                      {"out", a.out}}
                     .dump()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------- select-k

struct SelectKArgs {
    std::string input, out = ".";
    index_t k_min = 1, k_max = 1, perturbations = 16, max_iters = 500;
    double delta = 0.03, sil_threshold = 0.75, eta = 1e-6;
    std::uint64_t seed = 0;
};

int cmd_select_k(const SelectKArgs& a) {
    if (!std::filesystem::exists(a.input))
        return fail("usage", "input file not found: " + a.input, 2);
    AnyMatrix in = read_matrix(a.input);

    SelectionConfig cfg;
    cfg.k_min = a.k_min;
    cfg.k_max = a.k_max;
    cfg.n_perturbations = a.perturbations;
    cfg.delta = a.delta;
    cfg.sil_threshold = a.sil_threshold;
    cfg.seed = a.seed;
    cfg.nmf.eta = a.eta;
    cfg.nmf.max_iters = a.max_iters;
    try {
        cfg.validate(in.rows(), in.cols());
    } catch (const ShapeError& e) {
        return fail("usage", e.what(), 2);
    }

    SelectionReport rep = select_k(in.ref(), cfg);
    namespace fs = std::filesystem;
    fs::create_directories(a.out);
    write_text(a.out + "/selection.json", rep.to_json() + "\n");
    write_text(a.out + "/selection.csv", rep.to_csv());
    std::cout << rep.to_json() << "\n";
    return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    index_t rows = 0, cols = 0, batches = 1, iters = 30;
    std::vector<index_t> ks, workers;
    std::uint64_t seed = 0;
    std::string out;  // empty = stdout
};

int cmd_bench(const BenchArgs& a) {
    if (a.ks.empty() || a.workers.empty())
        return fail("usage", "bench needs at least one --k and one --workers value", 2);

    LowrankData d = gen_lowrank({a.rows, a.cols, std::min<index_t>(8, a.ks.front()), 0.0, a.seed});
    std::ostringstream csv;
    csv << "strategy,N,n_B,k,phase,seconds,bytes\n";
    for (index_t k : a.ks) {
        for (index_t w : a.workers) {
            NmfConfig cfg;
            cfg.k = k;
            cfg.eta = 0.0;  // run the full iteration budget
            cfg.max_iters = a.iters;
            cfg.seed = a.seed;
            PartitionPlan plan = make_plan(a.rows, a.cols, k, static_cast<int>(w), a.batches,
                                           choose_strategy(a.rows, a.cols));
            std::vector<CollectiveStats> stats;
            auto res = run_distributed_threads(ASource::memory(MatrixRef(d.a)), cfg, plan, {},
                                               &stats);
            const PhaseCounters& c = res[0].counters;
            const CollectiveStats& s = stats[0];
            auto row = [&](const char* phase, double sec, index_t bytes) {
                csv << to_string(plan.strategy) << ',' << w << ',' << a.batches << ',' << k << ','
                    << phase << ',' << sec << ',' << bytes << '\n';
            };
            row("w_update", c.w_update_s, s[PhaseTag::w_update].bytes);
            row("h_update", c.h_update_s, s[PhaseTag::h_update].bytes);
            row("allreduce", c.allreduce_s, s.total_bytes());
            row("error_check", c.error_check_s, s[PhaseTag::error_check].bytes);
            row("io", c.io_s, 0);
            row("total", c.total_s, s.total_bytes());
            log_debug("bench k=" + std::to_string(k) + " N=" + std::to_string(w) + " done");
        }
    }
    if (a.out.empty()) std::cout << csv.str();
    else write_text(a.out, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    init_log_level();
    CLI::App app{"Distributed out-of-core nonnegative matrix factorization"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    GenArgs g;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic matrix");
    gen->add_option("--type", g.type)->check(CLI::IsMember({"lowrank", "sparse"}));
    gen->add_option("--rows", g.rows)->required();
    gen->add_option("--cols", g.cols)->required();
    gen->add_option("--k-true", g.k_true);
    gen->add_option("--noise", g.noise);
    gen->add_option("--density", g.density);
    gen->add_option("--seed", g.seed);
    gen->add_option("--out", g.out)->required();
    gen->add_option("--out-w0", g.out_w0);
    gen->add_option("--out-h0", g.out_h0);

    FactorizeArgs f;
    auto* fac = app.add_subcommand("factorize", "Run NMF on a matrix file");
    fac->add_option("--input", f.input)->required();
    fac->add_option("--k", f.k)->required();
    fac->add_option("--eta", f.eta);
    fac->add_option("--max-iters", f.max_iters);
    fac->add_option("--workers", f.workers);
    fac->add_option("--backend", f.backend)
        ->check(CLI::IsMember({"loopback", "threads", "tcp"}));
    fac->add_option("--rank", f.rank);
    fac->add_option("--peers", f.peers);
    fac->add_option("--budget", f.budget);
    fac->add_option("--batches", f.batches);
    fac->add_option("--strategy", f.strategy)->check(CLI::IsMember({"auto", "cnmf", "rnmf"}));
    fac->add_option("--seed", f.seed);
    fac->add_option("--out", f.out);
    fac->add_option("--spawn-local", f.spawn_local);
    fac->add_flag("--dump-plan", f.dump_plan);

    SelectKArgs s;
    auto* sel = app.add_subcommand("select-k", "Estimate the latent dimension");
    sel->add_option("--input", s.input)->required();
    sel->add_option("--k-min", s.k_min)->required();
    sel->add_option("--k-max", s.k_max)->required();
    sel->add_option("--perturbations", s.perturbations);
    sel->add_option("--delta", s.delta);
    sel->add_option("--sil-threshold", s.sil_threshold);
    sel->add_option("--eta", s.eta);
    sel->add_option("--max-iters", s.max_iters);
    sel->add_option("--seed", s.seed);
    sel->add_option("--out", s.out);

    BenchArgs b;
    auto* ben = app.add_subcommand("bench", "Phase-timing sweep, long-form CSV");
    ben->add_option("--rows", b.rows)->required();
    ben->add_option("--cols", b.cols)->required();
    ben->add_option("--k", b.ks)->required();
    ben->add_option("--workers", b.workers)->required();
    ben->add_option("--batches", b.batches);
    ben->add_option("--iters", b.iters);
    ben->add_option("--seed", b.seed);
    ben->add_option("--out", b.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help/--version
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(g);
        if (fac->parsed()) return cmd_factorize(f);
        if (sel->parsed()) return cmd_select_k(s);
        if (ben->parsed()) return cmd_bench(b);
    } catch (const ShapeError& e) {
        return fail("usage", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), 3);
    }
    return 2;
}
