#include "oocnmf/partition.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace oocnmf {

std::string to_string(Strategy s) { return s == Strategy::cnmf ? "cnmf" : "rnmf"; }

Strategy choose_strategy(index_t m, index_t n) {
    return n > m ? Strategy::cnmf : Strategy::rnmf;
}

namespace {

/// Split [0, extent) into `parts` contiguous ranges; the first
/// (extent mod parts) ranges get one extra index.
std::vector<IndexRange> split_even(index_t extent, index_t parts) {
    std::vector<IndexRange> out;
    out.reserve(parts);
    const index_t base = extent / parts;
    const index_t rem = extent % parts;
    index_t pos = 0;
    for (index_t p = 0; p < parts; ++p) {
        const index_t width = base + (p < rem ? 1 : 0);
        out.push_back({pos, pos + width});
        pos += width;
    }
    return out;
}

} // namespace

index_t PartitionPlan::max_slab_extent() const {
    index_t best = 0;
    for (const auto& s : slabs)
        best = std::max(best, strategy == Strategy::cnmf ? s.a_cols.extent() : s.a_rows.extent());
    return best;
}

index_t PartitionPlan::max_batch_extent() const {
    index_t best = 0;
    for (const auto& b : batches) best = std::max(best, b.extent());
    return best;
}

PartitionPlan make_plan(index_t m, index_t n, index_t k, int n_workers, index_t n_b,
                        Strategy strategy) {
    if (m < 1 || n < 1 || k < 1) throw ShapeError("make_plan: dimensions must be >= 1");
    if (n_workers < 1) throw ShapeError("make_plan: need at least one worker");
    if (n_b < 1) throw ShapeError("make_plan: need at least one batch");
    const index_t part_axis = strategy == Strategy::cnmf ? n : m;
    const index_t batch_axis = strategy == Strategy::cnmf ? m : n;
    if (static_cast<index_t>(n_workers) > part_axis)
        throw ShapeError("make_plan: " + std::to_string(n_workers) + " workers exceed the " +
                         std::to_string(part_axis) + " slabs available under " +
                         to_string(strategy));
    if (n_b > batch_axis)
        throw ShapeError("make_plan: " + std::to_string(n_b) + " batches exceed the " +
                         std::to_string(batch_axis) + "-extent batched axis");

    PartitionPlan plan;
    plan.strategy = strategy;
    plan.n_workers = n_workers;
    plan.m = m;
    plan.n = n;
    plan.k = k;
    plan.n_b = n_b;

    const auto slabs = split_even(part_axis, static_cast<index_t>(n_workers));
    for (int r = 0; r < n_workers; ++r) {
        WorkerSlab s;
        s.rank = r;
        if (strategy == Strategy::cnmf) {
            s.a_rows = {0, m};
            s.a_cols = slabs[static_cast<index_t>(r)];
        } else {
            s.a_rows = slabs[static_cast<index_t>(r)];
            s.a_cols = {0, n};
        }
        plan.slabs.push_back(s);
    }
    plan.batches = split_even(batch_axis, n_b);
    return plan;
}

std::string PartitionPlan::to_json() const {
    nlohmann::json j;
    j["strategy"] = to_string(strategy);
    j["n_workers"] = n_workers;
    j["m"] = m;
    j["n"] = n;
    j["k"] = k;
    j["n_b"] = n_b;
    j["w_role"] = strategy == Strategy::cnmf ? "replicated" : "slab";
    j["h_role"] = strategy == Strategy::cnmf ? "slab" : "replicated";
    for (const auto& s : slabs)
        j["workers"].push_back({{"rank", s.rank},
                                {"a_rows", {s.a_rows.begin, s.a_rows.end}},
                                {"a_cols", {s.a_cols.begin, s.a_cols.end}}});
    for (const auto& b : batches) j["batches"].push_back({b.begin, b.end});
    return j.dump(2);
}

namespace {

struct EstimateParts {
    index_t store_peak, factors, intermediates;
};

EstimateParts estimate_parts(const PartitionPlan& plan, double density, index_t n_cb,
                             index_t batch_extent) {
    const index_t k = plan.k;
    const index_t slab = plan.max_slab_extent();  // J
    const index_t i_max = batch_extent;           // I

    index_t window_bytes;
    if (density >= 1.0) {
        window_bytes = i_max * slab * 8;
    } else {
        // CSR windows materialize whole rows of the batched axis.
        const index_t full_width = plan.strategy == Strategy::cnmf ? plan.n : plan.m;
        const double nnz = static_cast<double>(i_max) * static_cast<double>(full_width) * density;
        window_bytes = static_cast<index_t>(std::ceil(nnz * 16.0)) + (i_max + 1) * 8;
    }

    index_t factors;
    if (plan.strategy == Strategy::cnmf)
        factors = plan.m * k * 8 + k * slab * 8;  // W replicated + H slab
    else
        factors = slab * k * 8 + k * plan.n * 8;  // W slab + H replicated

    // H^T (or local equivalents), two I x k per-batch products, the k x J
    // accumulators, k x k grams, and a residual block.
    const index_t resid_rows = std::min<index_t>(256, i_max);
    index_t intermediates = (plan.strategy == Strategy::cnmf ? slab : plan.n) * k * 8  // H^T
                            + 2 * i_max * k * 8 + 2 * k * slab * 8 + 2 * k * k * 8
                            + resid_rows * slab * 8;

    return {n_cb * window_bytes, factors, intermediates};
}

} // namespace

MemoryReport memory_estimate(const PartitionPlan& plan, double density, index_t budget_bytes,
                             index_t n_cb) {
    if (!(density > 0.0) || density > 1.0)
        throw ShapeError("memory_estimate: density must be in (0, 1]");
    if (budget_bytes == 0) throw ShapeError("memory_estimate: budget must be > 0");
    if (n_cb < 1) throw ShapeError("memory_estimate: n_cb must be >= 1");

    MemoryReport rep;
    const auto parts = estimate_parts(plan, density, n_cb, plan.max_batch_extent());
    rep.store_peak_bytes = parts.store_peak;
    rep.factor_bytes = parts.factors;
    rep.intermediate_bytes = parts.intermediates;
    rep.peak_bytes = parts.store_peak + parts.factors + parts.intermediates;

    const index_t slab = plan.max_slab_extent();
    if (density >= 1.0)
        rep.a_slab_bytes = (plan.strategy == Strategy::cnmf ? plan.m : slab) *
                           (plan.strategy == Strategy::cnmf ? slab : plan.n) * 8;
    else {
        const double slab_elems = static_cast<double>(slab) *
                                  (plan.strategy == Strategy::cnmf ? plan.m : plan.n);
        rep.a_slab_bytes = static_cast<index_t>(std::ceil(slab_elems * density * 16.0));
    }

    // Smallest n_b whose peak fits the budget. Peak is nonincreasing in n_b
    // (batch extents only shrink), so binary search applies.
    const index_t batch_axis = plan.strategy == Strategy::cnmf ? plan.m : plan.n;
    auto peak_at = [&](index_t nb) {
        const index_t i_max = (batch_axis + nb - 1) / nb;
        const auto p = estimate_parts(plan, density, n_cb, i_max);
        return p.store_peak + p.factors + p.intermediates;
    };
    rep.min_n_b = 0;
    if (peak_at(batch_axis) <= budget_bytes) {
        index_t lo = 1, hi = batch_axis;
        while (lo < hi) {
            const index_t mid = lo + (hi - lo) / 2;
            if (peak_at(mid) <= budget_bytes)
                hi = mid;
            else
                lo = mid + 1;
        }
        rep.min_n_b = lo;
    }
    rep.feasible = rep.min_n_b > 0;
    if (!rep.feasible && parts.factors > budget_bytes)
        throw ShapeError("memory_estimate: factor arrays alone (" +
                         std::to_string(parts.factors) + " B) exceed the budget of " +
                         std::to_string(budget_bytes) + " B");
    return rep;
}

std::string MemoryReport::to_json() const {
    nlohmann::json j;
    j["a_slab_bytes"] = a_slab_bytes;
    j["store_peak_bytes"] = store_peak_bytes;
    j["factor_bytes"] = factor_bytes;
    j["intermediate_bytes"] = intermediate_bytes;
    j["peak_bytes"] = peak_bytes;
    j["min_n_b"] = min_n_b;
    j["feasible"] = feasible;
    return j.dump(2);
}

} // namespace oocnmf
