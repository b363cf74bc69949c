#pragma once

#include "etsim/materialize.hpp"

namespace etsim {

// Split-K row reduction: a (n, 4) grid of partial sums notifies E[row]; the
// (n) grid of final sums waits on E[row]. Size symbol: n.
GraphFunction splitk_rowsum();

// Two-stage matmul + reduce-scatter pipeline: mm_tiles MM tasks notify
// E[t0 // fan_in]; mm_tiles // fan_in RS tasks wait on E[t0], so every event
// element has fan_in producers. mm_tiles may reference the symbol "b".
GraphFunction gemm_reduce_scatter(const ExprPtr& mm_tiles, int fan_in);
GraphFunction gemm_reduce_scatter(const std::string& mm_tiles, int fan_in);

// Ring all-gather feeding a GEMM: a DMA-class copy chain (copy r waits on the
// chain event written by copy r-1) notifies per-chunk arrival events; GEMM
// tile (r, t) waits on arrival r.
GraphFunction all_gather_gemm(Int chunks, Int tiles_per_chunk);

struct MoEParams {
    Int tokens = 8;           // bound to the symbol "tokens" at run time
    Int experts = 4;
    Int top_k = 1;
    Int tile_size = 1;        // tokens per expert-GEMM tile
    double hot_fraction = 0;  // extra probability mass routed to hot_expert
    Int hot_expert = 0;
};

// Mixture-of-experts block: route (grid 1) writes the routing structure; the
// grouping grid (tokens * top_k) notifies per-expert events through the
// routing tensor; the expert GEMM worst-case grid (tokens * top_k) is
// range-triggered by exp_indptr and sized at runtime by its last entry.
// Size symbol: tokens.
GraphFunction moe_layer(const MoEParams& p);

// Draws per-token expert choices (distinct experts per token; hot_fraction
// biases each draw toward hot_expert) and derives topk, expert_counts and
// exp_indptr. Tile granularity follows p.tile_size.
RoutingRealization moe_realization(const MoEParams& p, Int seed);

// Layered random DAG: each node is its own unit-grid call with an own event;
// edges only point from lower to higher node ids, so program order is
// topological by construction.
GraphFunction random_dag(int nodes, int edges, Int seed);

}  // namespace etsim
