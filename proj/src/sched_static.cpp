#include "etsim/sched_static.hpp"

#include <algorithm>

namespace etsim {

Int SampledSchedule::num_tasks() const {
    Int n = static_cast<Int>(dma_queue.size());
    for (const auto& q : sm_queues) n += static_cast<Int>(q.size());
    return n;
}

GraphFunction worst_case_rewrite(const GraphFunction& g) {
    // Event tensors needing the barrier treatment: data-dependent counts or
    // any data-dependent edge touching them.
    std::set<std::string> doomed;
    for (const auto& e : g.event_tensors)
        if (e.data_dependent) doomed.insert(e.name);
    for (const auto& c : g.calls) {
        for (const auto& e : c.in_edges)
            if (e.kind != MapKind::StaticMap) doomed.insert(e.event);
        for (const auto& e : c.out_edges)
            if (e.kind != MapKind::StaticMap) doomed.insert(e.event);
    }
    if (doomed.empty()) return g;

    GraphFunction out = g;
    for (auto& e : out.event_tensors) {
        if (!doomed.count(e.name)) continue;
        e.shape = {SymExpr::constant(1)};
        e.data_dependent = false;
        e.counts_tensor.clear();
        e.writer.clear();
    }
    auto to_barrier = [&](EdgeSpec& e) {
        if (!doomed.count(e.event)) return;
        e.kind = MapKind::StaticMap;
        e.map = {SymExpr::constant(0)};
        e.routing_tensor.clear();
        e.indptr_tensor.clear();
    };
    for (auto& c : out.calls) {
        for (auto& e : c.in_edges) to_barrier(e);
        for (auto& e : c.out_edges) to_barrier(e);
    }
    return out;
}

StaticMegakernel lower_static(const GraphFunction& g, const std::vector<ShapeBinding>& samples,
                              int num_sms) {
    if (num_sms < 1) throw Error("static lowering requires at least one SM");
    if (samples.empty()) throw Error("static lowering requires at least one sampled binding");
    auto diags = validate_graph(g);
    if (!diags.empty()) throw Error("invalid graph: " + diags.front());
    if (summarize_graph(g).has_data_dependent)
        throw Error("graph has data-dependent structure; apply worst_case_rewrite before static lowering");

    StaticMegakernel k;
    k.graph = g;
    k.num_sms = num_sms;

    for (const auto& binding : samples) {
        auto m = instantiate(g, binding);
        SampledSchedule s;
        s.binding = binding;
        if (!g.size_symbol.empty()) {
            auto it = binding.find(g.size_symbol);
            if (it == binding.end())
                throw Error("sample " + binding_to_string(binding) + " does not bind the size symbol");
            s.size_value = it->second;
        }
        s.sm_queues.resize(num_sms);
        s.initial_counts.reserve(m.events.size());
        for (const auto& e : m.events) s.initial_counts.push_back(e.initial_count);
        s.tensor_offsets = m.tensor_offsets;

        // Tasks are already in program order then row-major; SM-class tasks
        // round-robin over the SM queues, DMA-class tasks keep their order on
        // the single DMA queue.
        int rr = 0;
        for (const auto& t : m.tasks) {
            QueueTask q;
            q.id = t.id;
            q.call = t.call;
            q.coord = t.coord;
            q.flat = t.flat;
            const auto* fn = g.find_fn(g.calls[t.call].fn);
            q.has_prefetch = fn && !fn->prefetch.empty();
            q.waits = m.task_waits[t.id];
            q.notifies = m.task_notifies[t.id];
            if (t.resource == Resource::DMA) {
                s.dma_queue.push_back(std::move(q));
            } else {
                s.sm_queues[rr % num_sms].push_back(std::move(q));
                ++rr;
            }
        }
        k.samples.push_back(std::move(s));
    }

    std::stable_sort(k.samples.begin(), k.samples.end(),
                     [](const SampledSchedule& a, const SampledSchedule& b) {
                         return a.size_value < b.size_value;
                     });
    for (size_t i = 1; i < k.samples.size(); ++i)
        if (k.samples[i].binding == k.samples[i - 1].binding)
            throw Error("duplicate sample binding " + binding_to_string(k.samples[i].binding));
    return k;
}

SelectedQueues select_queues(const StaticMegakernel& k, const ShapeBinding& actual) {
    for (const auto& s : k.graph.symbols)
        if (!actual.count(s))
            throw Error("binding " + binding_to_string(actual) + " does not bind symbol '" + s + "'");

    // Samples are sorted by size value; the first whose binding covers the
    // actual one componentwise is the next-larger sampled shape.
    const SampledSchedule* chosen = nullptr;
    int index = -1;
    for (size_t i = 0; i < k.samples.size(); ++i) {
        const auto& s = k.samples[i];
        bool covers = true;
        for (const auto& sym : k.graph.symbols)
            if (s.binding.at(sym) < actual.at(sym)) {
                covers = false;
                break;
            }
        if (covers) {
            chosen = &s;
            index = static_cast<int>(i);
            break;
        }
    }
    if (!chosen) {
        std::string sizes;
        for (const auto& s : k.samples) sizes += (sizes.empty() ? "" : ", ") + binding_to_string(s.binding);
        throw Error("binding " + binding_to_string(actual) +
                    " exceeds every sampled shape (samples: " + sizes + ")");
    }

    SelectedQueues sel;
    sel.sample_index = index;
    sel.sample = chosen;

    // Mask tasks whose coordinates fall outside the actual grid extents.
    std::vector<std::vector<Int>> actual_extents, sample_extents;
    for (const auto& c : k.graph.calls) {
        std::vector<Int> ae, se;
        for (const auto& d : k.graph.call_grid(c)) {
            ae.push_back(eval_expr(d, actual));
            se.push_back(eval_expr(d, chosen->binding));
        }
        for (size_t di = 0; di < ae.size(); ++di)
            if (ae[di] > se[di])
                throw Error("sampled shape " + binding_to_string(chosen->binding) +
                            " does not cover the actual grid of call fn '" + c.fn + "'");
        actual_extents.push_back(std::move(ae));
        sample_extents.push_back(std::move(se));
    }
    Int total = chosen->num_tasks();
    sel.masked.assign(static_cast<size_t>(total), 0);
    auto mask_queue = [&](const std::vector<QueueTask>& q) {
        for (const auto& t : q) {
            const auto& ae = actual_extents[t.call];
            bool out = false;
            for (size_t di = 0; di < ae.size(); ++di)
                if (t.coord[di] >= ae[di]) out = true;
            sel.masked[t.id] = out ? 1 : 0;
            if (!out) ++sel.real_tasks;
        }
    };
    for (const auto& q : chosen->sm_queues) mask_queue(q);
    mask_queue(chosen->dma_queue);
    return sel;
}

}  // namespace etsim
