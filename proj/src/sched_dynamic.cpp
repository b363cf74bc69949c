#include "etsim/sched_dynamic.hpp"

namespace etsim {

namespace {

void arm_waits(DynamicMegakernel& k) {
    for (size_t ci = 0; ci < k.graph.calls.size(); ++ci) {
        const auto& call = k.graph.calls[ci];
        auto& tmpl = k.templates[ci];
        tmpl.wait_edges.assign(call.in_edges.size(), 0);
        for (size_t ei = 0; ei < call.in_edges.size(); ++ei) {
            bool armed = k.early_push;
            int ti = k.graph.event_index(call.in_edges[ei].event);
            if (ti >= 0 && k.graph.event_tensors[ti].data_dependent) armed = true;
            tmpl.wait_edges[ei] = armed ? 1 : 0;
        }
    }
}

}  // namespace

DynamicMegakernel lower_dynamic(const GraphFunction& g, bool early_push) {
    auto diags = validate_graph(g);
    if (!diags.empty()) throw Error("invalid graph: " + diags.front());

    DynamicMegakernel k;
    k.graph = g;
    k.early_push = early_push;
    k.templates.resize(g.calls.size());
    for (size_t ci = 0; ci < g.calls.size(); ++ci) {
        auto& tmpl = k.templates[ci];
        tmpl.call = static_cast<int>(ci);
        const auto* fn = g.find_fn(g.calls[ci].fn);
        tmpl.has_prefetch = fn && !fn->prefetch.empty();
    }
    arm_waits(k);
    return k;
}

DynamicMegakernel enable_early_push(DynamicMegakernel k) {
    k.early_push = true;
    arm_waits(k);
    return k;
}

}  // namespace etsim
