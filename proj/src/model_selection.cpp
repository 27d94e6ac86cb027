#include "oocnmf/model_selection.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oocnmf/error.hpp"
#include "oocnmf/rng.hpp"

namespace oocnmf {

namespace {
constexpr std::uint64_t kStreamPerturb = 21;
constexpr double kZeroColumnNorm = 1e-300;
constexpr index_t kExactAssignmentMaxK = 16;
}  // namespace

void SelectionConfig::validate(index_t m, index_t n) const {
    if (k_min < 1 || k_max < k_min)
        throw ShapeError("SelectionConfig: need 1 <= k_min <= k_max");
    if (k_max >= std::min(m, n))
        throw ShapeError("SelectionConfig: k_max must be below min(m, n)");
    if (n_perturbations < 2)
        throw ShapeError("SelectionConfig: need at least 2 perturbations");
    if (delta <= 0.0 || delta >= 1.0)
        throw ShapeError("SelectionConfig: delta must lie in (0, 1)");
    if (sil_threshold < -1.0 || sil_threshold > 1.0)
        throw ShapeError("SelectionConfig: sil_threshold must lie in [-1, 1]");
}

DenseMatrix perturb_dense(MatrixRef a, double delta, std::uint64_t seed) {
    if (delta < 0.0 || delta >= 1.0)
        throw ShapeError("perturb: delta must lie in [0, 1)");
    const index_t m = a.rows(), n = a.cols();
    DenseMatrix out(m, n);
    CounterRng rng(seed, kStreamPerturb);
    for (index_t i = 0; i < m; ++i)
        for (index_t j = 0; j < n; ++j) {
            const double f = 1.0 - delta + 2.0 * delta * rng.uniform(i * n + j);
            out.at(i, j) = a.at(i, j) * f;
        }
    return out;
}

CsrMatrix perturb_sparse(const CsrMatrix& a, double delta, std::uint64_t seed) {
    if (delta < 0.0 || delta >= 1.0)
        throw ShapeError("perturb: delta must lie in [0, 1)");
    CsrMatrix out = a;
    CounterRng rng(seed, kStreamPerturb);
    for (index_t i = 0; i < a.rows(); ++i)
        for (index_t p = a.row_ptr()[i]; p < a.row_ptr()[i + 1]; ++p) {
            const index_t flat = i * a.cols() + a.col_idx()[p];
            out.values()[p] *= 1.0 - delta + 2.0 * delta * rng.uniform(flat);
        }
    return out;
}

namespace {

// Unit-normalizes each column of w; columns with ~zero norm are flagged.
std::vector<std::vector<double>> normalized_columns(const DenseMatrix& w,
                                                    std::vector<bool>& alive) {
    std::vector<std::vector<double>> cols(w.cols(), std::vector<double>(w.rows()));
    alive.assign(w.cols(), true);
    for (index_t c = 0; c < w.cols(); ++c) {
        double sq = 0.0;
        for (index_t i = 0; i < w.rows(); ++i) {
            cols[c][i] = w.at(i, c);
            sq += cols[c][i] * cols[c][i];
        }
        const double norm = std::sqrt(sq);
        if (norm < kZeroColumnNorm) {
            alive[c] = false;
            continue;
        }
        for (double& v : cols[c]) v /= norm;
    }
    return cols;
}

double cosine(const std::vector<double>& x, const std::vector<double>& y) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += x[i] * y[i];
    return d;
}

// One-to-one matching of `cols` to `anchors` maximizing total cosine
// similarity.  Exact bitmask DP up to kExactAssignmentMaxK anchors,
// greedy above.  Returns per-column anchor index (or npos if unmatched).
std::vector<index_t> match_to_anchors(
    const std::vector<std::vector<double>>& anchors,
    const std::vector<const std::vector<double>*>& cols) {
    const index_t na = anchors.size(), nc = cols.size();
    constexpr index_t npos = static_cast<index_t>(-1);
    std::vector<std::vector<double>> sim(nc, std::vector<double>(na));
    for (index_t c = 0; c < nc; ++c)
        for (index_t a = 0; a < na; ++a) sim[c][a] = cosine(*cols[c], anchors[a]);

    std::vector<index_t> assign(nc, npos);
    if (na <= kExactAssignmentMaxK) {
        // dp[mask] = best total similarity after assigning the first
        // popcount-feasible columns to the anchor set `mask`.
        const std::size_t nmask = std::size_t{1} << na;
        constexpr double kNeg = -std::numeric_limits<double>::infinity();
        std::vector<double> dp(nmask, kNeg);
        std::vector<int> from(nmask, -1);  // anchor added to reach this mask
        dp[0] = 0.0;
        for (std::size_t mask = 0; mask < nmask; ++mask) {
            if (dp[mask] == kNeg) continue;
            const index_t c = static_cast<index_t>(std::popcount(mask));
            if (c >= nc) continue;
            for (index_t a = 0; a < na; ++a) {
                if (mask & (std::size_t{1} << a)) continue;
                const std::size_t next = mask | (std::size_t{1} << a);
                if (dp[mask] + sim[c][a] > dp[next]) {
                    dp[next] = dp[mask] + sim[c][a];
                    from[next] = static_cast<int>(a);
                }
            }
        }
        // Best final mask with exactly nc anchors used.
        std::size_t best = 0;
        double best_v = kNeg;
        for (std::size_t mask = 0; mask < nmask; ++mask)
            if (static_cast<index_t>(std::popcount(mask)) == nc && dp[mask] > best_v) {
                best_v = dp[mask];
                best = mask;
            }
        std::size_t mask = best;
        while (mask != 0) {
            const index_t a = static_cast<index_t>(from[mask]);
            mask &= ~(std::size_t{1} << a);
            assign[std::popcount(mask)] = a;
        }
    } else {
        // Greedy: repeatedly take the globally best unused (column, anchor).
        std::vector<bool> cu(nc, false), au(na, false);
        for (index_t step = 0; step < std::min(na, nc); ++step) {
            double best = -std::numeric_limits<double>::infinity();
            index_t bc = npos, ba = npos;
            for (index_t c = 0; c < nc; ++c) {
                if (cu[c]) continue;
                for (index_t a = 0; a < na; ++a)
                    if (!au[a] && sim[c][a] > best) {
                        best = sim[c][a];
                        bc = c;
                        ba = a;
                    }
            }
            cu[bc] = au[ba] = true;
            assign[bc] = ba;
        }
    }
    return assign;
}

}  // namespace

ColumnClusters cluster_columns(const std::vector<DenseMatrix>& runs, index_t k) {
    if (runs.size() < 2)
        throw ShapeError("cluster_columns: need at least 2 runs");
    const index_t m = runs[0].rows();
    for (const auto& w : runs)
        if (w.rows() != m || w.cols() != k)
            throw ShapeError("cluster_columns: all runs must be m x k");

    ColumnClusters out;
    out.member_ids.resize(k);
    out.points.resize(k);

    std::vector<bool> alive0;
    auto anchors_all = normalized_columns(runs[0], alive0);
    std::vector<std::vector<double>> anchors;
    std::vector<index_t> anchor_cluster;  // surviving anchor -> cluster index
    for (index_t c = 0; c < k; ++c) {
        if (!alive0[c]) {
            ++out.dropped_zero_columns;
            continue;
        }
        anchors.push_back(anchors_all[c]);
        anchor_cluster.push_back(c);
        out.member_ids[c].push_back({0, c});
        out.points[c].push_back(std::move(anchors_all[c]));
    }

    for (index_t r = 1; r < runs.size(); ++r) {
        std::vector<bool> alive;
        auto cols = normalized_columns(runs[r], alive);
        std::vector<const std::vector<double>*> live;
        std::vector<index_t> live_id;
        for (index_t c = 0; c < k; ++c) {
            if (!alive[c]) {
                ++out.dropped_zero_columns;
                continue;
            }
            live.push_back(&cols[c]);
            live_id.push_back(c);
        }
        auto assign = match_to_anchors(anchors, live);
        for (index_t i = 0; i < live.size(); ++i) {
            if (assign[i] == static_cast<index_t>(-1)) continue;
            const index_t cluster = anchor_cluster[assign[i]];
            out.member_ids[cluster].push_back({r, live_id[i]});
            out.points[cluster].push_back(*live[i]);
        }
    }

    out.medians = DenseMatrix(m, k);
    std::vector<double> scratch;
    for (index_t c = 0; c < k; ++c) {
        const auto& members = out.points[c];
        if (members.empty()) continue;
        for (index_t i = 0; i < m; ++i) {
            scratch.clear();
            for (const auto& col : members) scratch.push_back(col[i]);
            auto mid = scratch.begin() + scratch.size() / 2;
            std::nth_element(scratch.begin(), mid, scratch.end());
            double med = *mid;
            if (scratch.size() % 2 == 0) {
                const double lo = *std::max_element(scratch.begin(), mid);
                med = 0.5 * (lo + med);
            }
            out.medians.at(i, c) = med;
        }
    }
    return out;
}

SilhouetteScore silhouette(const ColumnClusters& clusters) {
    const index_t k = clusters.points.size();
    SilhouetteScore out;
    out.per_cluster.assign(k, 0.0);
    if (k == 1) {
        // Undefined for a single cluster; fixed at 1.0 by convention.
        out.min_sil = out.mean_sil = 1.0;
        out.per_cluster[0] = 1.0;
        return out;
    }

    auto dist = [](const std::vector<double>& x, const std::vector<double>& y) {
        return 1.0 - cosine(x, y);
    };

    double total = 0.0;
    index_t count = 0;
    out.min_sil = 1.0;
    for (index_t c = 0; c < k; ++c) {
        const auto& mine = clusters.points[c];
        if (mine.empty()) throw ShapeError("silhouette: empty cluster");
        double cluster_sum = 0.0;
        for (index_t s = 0; s < mine.size(); ++s) {
            double sil = 0.0;
            if (mine.size() > 1) {
                double a = 0.0;
                for (index_t t = 0; t < mine.size(); ++t)
                    if (t != s) a += dist(mine[s], mine[t]);
                a /= static_cast<double>(mine.size() - 1);
                double b = std::numeric_limits<double>::infinity();
                for (index_t o = 0; o < k; ++o) {
                    if (o == c || clusters.points[o].empty()) continue;
                    double d = 0.0;
                    for (const auto& y : clusters.points[o]) d += dist(mine[s], y);
                    b = std::min(b, d / static_cast<double>(clusters.points[o].size()));
                }
                const double denom = std::max(a, b);
                sil = denom > 0.0 ? (b - a) / denom : 0.0;
            }
            cluster_sum += sil;
            total += sil;
            ++count;
            out.min_sil = std::min(out.min_sil, sil);
        }
        out.per_cluster[c] = cluster_sum / static_cast<double>(mine.size());
    }
    out.mean_sil = count > 0 ? total / static_cast<double>(count) : 0.0;
    return out;
}

DenseMatrix pearson_correlation_matrix(const DenseMatrix& w_true,
                                       const DenseMatrix& w_est) {
    if (w_true.rows() != w_est.rows())
        throw ShapeError("pearson_correlation_matrix: row counts differ");
    const index_t m = w_true.rows();

    auto standardize = [m](const DenseMatrix& w) {
        std::vector<std::vector<double>> cols(w.cols(), std::vector<double>(m));
        for (index_t c = 0; c < w.cols(); ++c) {
            double mean = 0.0;
            for (index_t i = 0; i < m; ++i) mean += w.at(i, c);
            mean /= static_cast<double>(m);
            double sq = 0.0;
            for (index_t i = 0; i < m; ++i) {
                cols[c][i] = w.at(i, c) - mean;
                sq += cols[c][i] * cols[c][i];
            }
            if (sq <= 0.0)
                throw DataError("pearson_correlation_matrix: zero-variance column");
            const double inv = 1.0 / std::sqrt(sq);
            for (double& v : cols[c]) v *= inv;
        }
        return cols;
    };

    auto a = standardize(w_true);
    auto b = standardize(w_est);
    DenseMatrix corr(w_true.cols(), w_est.cols());
    for (index_t i = 0; i < w_true.cols(); ++i)
        for (index_t j = 0; j < w_est.cols(); ++j) corr.at(i, j) = cosine(a[i], b[j]);
    return corr;
}

SelectionReport select_k(MatrixRef a, const SelectionConfig& cfg) {
    cfg.validate(a.rows(), a.cols());
    const index_t p_count = cfg.n_perturbations;

    SelectionReport report;
    for (index_t k = cfg.k_min; k <= cfg.k_max; ++k) {
        std::vector<std::optional<NmfResult>> results(p_count);
        std::exception_ptr first_err;

        #pragma omp parallel for schedule(dynamic)
        for (long long pi = 0; pi < static_cast<long long>(p_count); ++pi) {
            const index_t p = static_cast<index_t>(pi);
            for (int attempt = 0; attempt < 2 && !results[p]; ++attempt) {
                const std::uint64_t pert_seed =
                    derive_seed(cfg.seed, k, 2 * p + attempt * 1000003);
                const std::uint64_t run_seed =
                    derive_seed(cfg.seed, k, 2 * p + 1 + attempt * 1000003);
                try {
                    NmfConfig run_cfg = cfg.nmf;
                    run_cfg.k = k;
                    run_cfg.seed = run_seed;
                    if (a.is_sparse()) {
                        CsrMatrix ap = perturb_sparse(a.sparse(), cfg.delta, pert_seed);
                        results[p] = nmf_serial(MatrixRef(ap), run_cfg);
                    } else {
                        DenseMatrix ap = perturb_dense(a, cfg.delta, pert_seed);
                        results[p] = nmf_serial(MatrixRef(ap), run_cfg);
                    }
                } catch (const std::exception&) {
                    if (attempt == 1) {
                        #pragma omp critical
                        if (!first_err) first_err = std::current_exception();
                    }
                }
            }
        }
        (void)first_err;  // failed runs are excluded, not fatal

        std::vector<DenseMatrix> ws;
        double err_sum = 0.0;
        for (auto& r : results) {
            if (!r) continue;
            ws.push_back(std::move(r->w));
            err_sum += r->error_trace.back().second;
        }

        KRecord rec;
        rec.k = k;
        rec.runs_used = ws.size();
        if (ws.size() >= 2) {
            auto clusters = cluster_columns(ws, k);
            auto score = silhouette(clusters);
            rec.valid = true;
            rec.min_silhouette = score.min_sil;
            rec.mean_silhouette = score.mean_sil;
            rec.mean_relative_error = err_sum / static_cast<double>(ws.size());
            rec.medians = std::move(clusters.medians);
        }
        report.records.push_back(std::move(rec));
    }

    // Best-scoring k: highest min-silhouette, ties broken by lower error.
    const KRecord* best = nullptr;
    for (const auto& r : report.records) {
        if (!r.valid) continue;
        if (!best || r.min_silhouette > best->min_silhouette ||
            (r.min_silhouette == best->min_silhouette &&
             r.mean_relative_error < best->mean_relative_error))
            best = &r;
    }
    if (!best) {
        report.rationale = "no candidate k produced at least two successful runs";
        return report;
    }
    const double err_cap = 1.5 * best->mean_relative_error;
    for (const auto& r : report.records) {
        if (!r.valid) continue;
        if (r.min_silhouette >= cfg.sil_threshold && r.mean_relative_error <= err_cap)
            report.chosen_k = r.k;  // records are in ascending k, keep the largest
    }
    std::ostringstream why;
    if (report.chosen_k) {
        why << "k=" << *report.chosen_k << " is the largest candidate with min silhouette >= "
            << cfg.sil_threshold << " and mean relative error <= " << err_cap;
    } else {
        why << "no candidate met min silhouette >= " << cfg.sil_threshold
            << " with mean relative error <= " << err_cap;
    }
    report.rationale = why.str();
    return report;
}

std::string SelectionReport::to_json() const {
    nlohmann::json j;
    j["chosen_k"] = chosen_k ? nlohmann::json(*chosen_k) : nlohmann::json("none");
    j["rationale"] = rationale;
    j["records"] = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json rec;
        rec["k"] = r.k;
        rec["valid"] = r.valid;
        rec["runs_used"] = r.runs_used;
        rec["min_silhouette"] = r.min_silhouette;
        rec["mean_silhouette"] = r.mean_silhouette;
        rec["mean_relative_error"] = r.mean_relative_error;
        j["records"].push_back(std::move(rec));
    }
    return j.dump(2);
}

std::string SelectionReport::to_csv() const {
    std::ostringstream out;
    out << "k,valid,runs_used,min_silhouette,mean_silhouette,mean_relative_error\n";
    for (const auto& r : records)
        out << r.k << ',' << (r.valid ? 1 : 0) << ',' << r.runs_used << ','
            << r.min_silhouette << ',' << r.mean_silhouette << ','
            << r.mean_relative_error << '\n';
    return out.str();
}

}  // namespace oocnmf
