#include "etsim/workloads.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <utility>

namespace etsim {

GraphFunction splitk_rowsum() {
    GraphFunction g;
    g.symbols = {"n"};
    g.size_symbol = "n";
    g.duration_models["partial"] = DurationModel::constant(1);
    g.duration_models["final"] = DurationModel::constant(1);
    g.device_functions.push_back(
        {"partial_sum", {parse_expr("n"), parse_expr("4")}, Resource::SM, "partial", ""});
    g.device_functions.push_back({"final_sum", {parse_expr("n")}, Resource::SM, "final", ""});
    g.event_tensors.push_back({"E", {parse_expr("n")}, false, "", ""});
    CallDevice partial;
    partial.fn = "partial_sum";
    partial.out_edges.push_back({"E", MapKind::StaticMap, {parse_expr("t0")}, "", ""});
    CallDevice final_sum;
    final_sum.fn = "final_sum";
    final_sum.in_edges.push_back({"E", MapKind::StaticMap, {parse_expr("t0")}, "", ""});
    g.calls = {partial, final_sum};
    return g;
}

GraphFunction gemm_reduce_scatter(const ExprPtr& mm_tiles, int fan_in) {
    if (fan_in < 1) throw Error("fan_in must be positive");
    GraphFunction g;
    for (const auto& s : free_symbols(mm_tiles)) g.symbols.push_back(s);
    if (!g.symbols.empty()) g.size_symbol = g.symbols.front();
    g.duration_models["mm"] = DurationModel::constant(1);
    g.duration_models["rs"] = DurationModel::constant(1);
    ExprPtr rs_tiles = floordiv(mm_tiles, SymExpr::constant(fan_in));
    g.device_functions.push_back({"mm", {mm_tiles}, Resource::SM, "mm", ""});
    g.device_functions.push_back({"rs", {rs_tiles}, Resource::SM, "rs", ""});
    g.event_tensors.push_back({"E", {rs_tiles}, false, "", ""});
    CallDevice mm;
    mm.fn = "mm";
    mm.out_edges.push_back(
        {"E", MapKind::StaticMap, {parse_expr("t0 // " + std::to_string(fan_in))}, "", ""});
    CallDevice rs;
    rs.fn = "rs";
    rs.in_edges.push_back({"E", MapKind::StaticMap, {parse_expr("t0")}, "", ""});
    g.calls = {mm, rs};
    return g;
}

GraphFunction gemm_reduce_scatter(const std::string& mm_tiles, int fan_in) {
    return gemm_reduce_scatter(parse_expr(mm_tiles), fan_in);
}

GraphFunction all_gather_gemm(Int chunks, Int tiles_per_chunk) {
    if (chunks < 1 || tiles_per_chunk < 1)
        throw Error("all_gather_gemm needs at least one chunk and one tile per chunk");
    GraphFunction g;
    g.duration_models["copy"] = DurationModel::constant(1);
    g.duration_models["gemm"] = DurationModel::constant(1);
    auto c = [](Int v) { return SymExpr::constant(v); };
    g.device_functions.push_back({"copy", {c(chunks)}, Resource::DMA, "copy", ""});
    g.device_functions.push_back({"gemm", {c(chunks), c(tiles_per_chunk)}, Resource::SM, "gemm", ""});
    // chain[r] gates copy r (chain[0] is pre-triggered); arrival[r] fans out
    // to that chunk's GEMM tiles.
    g.event_tensors.push_back({"chain", {c(chunks + 1)}, false, "", ""});
    g.event_tensors.push_back({"arrival", {c(chunks)}, false, "", ""});
    CallDevice copy;
    copy.fn = "copy";
    copy.in_edges.push_back({"chain", MapKind::StaticMap, {parse_expr("t0")}, "", ""});
    copy.out_edges.push_back({"chain", MapKind::StaticMap, {parse_expr("t0 + 1")}, "", ""});
    copy.out_edges.push_back({"arrival", MapKind::StaticMap, {parse_expr("t0")}, "", ""});
    CallDevice gemm;
    gemm.fn = "gemm";
    gemm.in_edges.push_back({"arrival", MapKind::StaticMap, {parse_expr("t0")}, "", ""});
    g.calls = {copy, gemm};
    return g;
}

GraphFunction moe_layer(const MoEParams& p) {
    if (p.experts < 1 || p.top_k < 1 || p.top_k > p.experts || p.tile_size < 1)
        throw Error("invalid mixture parameters");
    GraphFunction g;
    g.symbols = {"tokens"};
    g.size_symbol = "tokens";
    g.duration_models["route"] = DurationModel::constant(1);
    g.duration_models["group"] = DurationModel::constant(1);
    g.duration_models["expert"] = DurationModel::constant(1);
    auto c = [](Int v) { return SymExpr::constant(v); };
    ExprPtr slots = parse_expr("tokens * " + std::to_string(p.top_k));
    g.device_functions.push_back({"route", {c(1)}, Resource::SM, "route", ""});
    g.device_functions.push_back({"group", {slots}, Resource::SM, "group", ""});
    g.device_functions.push_back({"expert_mm", {slots}, Resource::SM, "expert", ""});
    g.runtime_tensors.push_back(
        {"topk", {parse_expr("tokens"), c(p.top_k)}, TensorRole::Routing, "route"});
    g.runtime_tensors.push_back({"expert_counts", {c(p.experts)}, TensorRole::Counts, "route"});
    g.runtime_tensors.push_back({"exp_indptr", {c(p.experts + 1)}, TensorRole::Indptr, "route"});
    g.event_tensors.push_back({"R", {c(1)}, false, "", ""});
    g.event_tensors.push_back({"EXP", {c(p.experts)}, true, "expert_counts", "route"});
    CallDevice route;
    route.fn = "route";
    route.out_edges.push_back({"R", MapKind::StaticMap, {parse_expr("0")}, "", ""});
    CallDevice group;
    group.fn = "group";
    group.in_edges.push_back({"R", MapKind::StaticMap, {parse_expr("0")}, "", ""});
    group.out_edges.push_back({"EXP", MapKind::DataDependentNotify, {}, "topk", ""});
    CallDevice expert;
    expert.fn = "expert_mm";
    expert.extent_from = "exp_indptr";
    expert.in_edges.push_back({"EXP", MapKind::RangeTrigger, {}, "", "exp_indptr"});
    g.calls = {route, group, expert};
    return g;
}

RoutingRealization moe_realization(const MoEParams& p, Int seed) {
    if (p.tokens < 0 || p.experts < 1 || p.top_k < 1 || p.top_k > p.experts || p.tile_size < 1)
        throw Error("invalid mixture parameters");
    std::mt19937_64 rng(static_cast<uint64_t>(seed) ^ 0x6d6f655f726e67ull);
    auto draw = [&](Int n) { return static_cast<Int>(rng() % static_cast<uint64_t>(n)); };

    std::vector<Int> topk(static_cast<size_t>(p.tokens * p.top_k), 0);
    std::vector<Int> counts(static_cast<size_t>(p.experts), 0);
    for (Int t = 0; t < p.tokens; ++t) {
        std::vector<Int> chosen;
        while (static_cast<Int>(chosen.size()) < p.top_k) {
            Int e;
            if (p.hot_fraction > 0 &&
                static_cast<double>(draw(1'000'000)) < p.hot_fraction * 1'000'000.0)
                e = p.hot_expert;
            else
                e = draw(p.experts);
            if (std::find(chosen.begin(), chosen.end(), e) == chosen.end()) chosen.push_back(e);
        }
        for (Int j = 0; j < p.top_k; ++j) {
            topk[static_cast<size_t>(t * p.top_k + j)] = chosen[static_cast<size_t>(j)];
            ++counts[static_cast<size_t>(chosen[static_cast<size_t>(j)])];
        }
    }
    std::vector<Int> indptr(static_cast<size_t>(p.experts + 1), 0);
    for (Int e = 0; e < p.experts; ++e) {
        Int tiles = (counts[static_cast<size_t>(e)] + p.tile_size - 1) / p.tile_size;
        indptr[static_cast<size_t>(e + 1)] = indptr[static_cast<size_t>(e)] + tiles;
    }
    RoutingRealization r;
    r.tensors["topk"] = std::move(topk);
    r.tensors["expert_counts"] = std::move(counts);
    r.tensors["exp_indptr"] = std::move(indptr);
    return r;
}

GraphFunction random_dag(int nodes, int edges, Int seed) {
    if (nodes < 1) throw Error("random_dag needs at least one node");
    std::mt19937_64 rng(static_cast<uint64_t>(seed) ^ 0x646167ull);
    auto draw = [&](Int n) { return static_cast<Int>(rng() % static_cast<uint64_t>(n)); };

    std::set<std::pair<int, int>> chosen;
    for (int i = 0; i < edges && nodes > 1; ++i) {
        int v = 1 + static_cast<int>(draw(nodes - 1));
        int u = static_cast<int>(draw(v));
        chosen.insert({u, v});  // u < v keeps program order topological
    }

    GraphFunction g;
    auto c = [](Int v) { return SymExpr::constant(v); };
    for (int v = 0; v < nodes; ++v) {
        std::string id = std::to_string(v);
        g.duration_models["d" + id] = DurationModel::constant(1 + draw(5));
        g.device_functions.push_back({"f" + id, {c(1)}, Resource::SM, "d" + id, ""});
        g.event_tensors.push_back({"e" + id, {c(1)}, false, "", ""});
        CallDevice call;
        call.fn = "f" + id;
        call.out_edges.push_back({"e" + id, MapKind::StaticMap, {parse_expr("0")}, "", ""});
        g.calls.push_back(call);
    }
    for (const auto& [u, v] : chosen)
        g.calls[static_cast<size_t>(v)].in_edges.push_back(
            {"e" + std::to_string(u), MapKind::StaticMap, {parse_expr("0")}, "", ""});
    return g;
}

}  // namespace etsim
