#pragma once

#include "etsim/materialize.hpp"

namespace etsim {

// Per-call instruction skeleton for the dynamically scheduled kernel. Each
// in-edge contributes one WAIT slot; the slot is armed only when early push
// is on (pushes may precede counter zero) or the event's counts are
// data-dependent. Consumer trigger tables are built at launch time from the
// instantiated graph.
struct DynamicCallTemplate {
    int call = 0;
    bool has_prefetch = false;
    std::vector<uint8_t> wait_edges;  // aligned with the call's in_edges
};

struct DynamicMegakernel {
    GraphFunction graph;
    bool early_push = false;
    std::vector<DynamicCallTemplate> templates;  // one per call, in order
};

// Lowers to the centralized ready-queue form. Any validated graph is
// accepted, including data-dependent ones (no worst-case rewrite needed).
DynamicMegakernel lower_dynamic(const GraphFunction& g, bool early_push = false);

// Turns on the early-push optimization: consumers enter the ready queue once
// every producer has been dispatched (execution started), guarded by arming
// every WAIT slot. Idempotent.
DynamicMegakernel enable_early_push(DynamicMegakernel k);

}  // namespace etsim
