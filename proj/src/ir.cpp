#include "etsim/ir.hpp"

#include <algorithm>
#include <sstream>

namespace etsim {

DurationModel DurationModel::constant(Int v) {
    DurationModel m;
    m.kind = Kind::Constant;
    m.value = v;
    return m;
}

DurationModel DurationModel::table_of(std::vector<Int> values) {
    DurationModel m;
    m.kind = Kind::Table;
    m.table = std::move(values);
    return m;
}

DurationModel DurationModel::uniform(Int lo, Int hi) {
    DurationModel m;
    m.kind = Kind::Uniform;
    m.lo = lo;
    m.hi = hi;
    return m;
}

DurationModel DurationModel::skewed(Int base, Int factor, std::string indptr, Int hot_group) {
    DurationModel m;
    m.kind = Kind::SkewedByGroup;
    m.base = base;
    m.factor = factor;
    m.group_indptr = std::move(indptr);
    m.hot_group = hot_group;
    return m;
}

const DeviceFunctionDecl* GraphFunction::find_fn(const std::string& name) const {
    for (const auto& f : device_functions)
        if (f.name == name) return &f;
    return nullptr;
}

int GraphFunction::event_index(const std::string& name) const {
    for (size_t i = 0; i < event_tensors.size(); ++i)
        if (event_tensors[i].name == name) return static_cast<int>(i);
    return -1;
}

int GraphFunction::runtime_index(const std::string& name) const {
    for (size_t i = 0; i < runtime_tensors.size(); ++i)
        if (runtime_tensors[i].name == name) return static_cast<int>(i);
    return -1;
}

const std::vector<ExprPtr>& GraphFunction::call_grid(const CallDevice& c) const {
    if (!c.grid.empty()) return c.grid;
    const auto* fn = find_fn(c.fn);
    static const std::vector<ExprPtr> kEmpty;
    return fn ? fn->grid : kEmpty;
}

namespace {

// Task coordinate symbols are t0..t{rank-1}; they are the only symbols edge
// maps may use beyond the graph's own symbols.
bool is_task_coord(const std::string& s, int rank) {
    if (s.size() < 2 || s[0] != 't') return false;
    for (size_t i = 1; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    int idx = std::stoi(s.substr(1));
    return idx >= 0 && idx < rank;
}

}  // namespace

std::vector<std::string> validate_graph(const GraphFunction& g) {
    std::vector<std::string> diags;
    auto diag = [&](const std::string& m) { diags.push_back(m); };

    std::set<std::string> declared(g.symbols.begin(), g.symbols.end());
    if (!g.size_symbol.empty() && !declared.count(g.size_symbol))
        diag("size symbol '" + g.size_symbol + "' is not a declared symbol");

    std::set<std::string> fn_names, ev_names, rt_names;
    for (const auto& f : g.device_functions) {
        if (!fn_names.insert(f.name).second) diag("duplicate device function '" + f.name + "'");
        if (!f.duration.empty() && !g.duration_models.count(f.duration))
            diag("function '" + f.name + "' references unknown duration model '" + f.duration + "'");
        if (!f.prefetch.empty() && !g.duration_models.count(f.prefetch))
            diag("function '" + f.name + "' references unknown prefetch model '" + f.prefetch + "'");
    }
    for (const auto& e : g.event_tensors) {
        if (!ev_names.insert(e.name).second) diag("duplicate event tensor '" + e.name + "'");
        if (e.shape.empty()) diag("event tensor '" + e.name + "' has empty shape");
        if (e.data_dependent) {
            if (e.counts_tensor.empty())
                diag("data-dependent event tensor '" + e.name + "' missing counts tensor");
            if (e.writer.empty())
                diag("data-dependent event tensor '" + e.name + "' missing writer function");
        }
    }
    for (const auto& r : g.runtime_tensors) {
        if (!rt_names.insert(r.name).second) diag("duplicate runtime tensor '" + r.name + "'");
        if (r.writer.empty() || !fn_names.count(r.writer))
            diag("runtime tensor '" + r.name + "' has unknown writer '" + r.writer + "'");
    }
    for (const auto& e : g.event_tensors) {
        if (!e.data_dependent) continue;
        if (!e.counts_tensor.empty() && !rt_names.count(e.counts_tensor))
            diag("event tensor '" + e.name + "' counts tensor '" + e.counts_tensor + "' undeclared");
        if (!e.writer.empty() && !fn_names.count(e.writer))
            diag("event tensor '" + e.name + "' writer '" + e.writer + "' undeclared");
    }

    // Symbol closure of declared shapes and grids.
    auto check_symbols = [&](const std::vector<ExprPtr>& exprs, const std::string& where, int task_rank) {
        for (const auto& ex : exprs) {
            if (!ex) {
                diag(where + ": null expression");
                continue;
            }
            for (const auto& s : free_symbols(ex)) {
                if (declared.count(s)) continue;
                if (task_rank >= 0 && is_task_coord(s, task_rank)) continue;
                diag(where + ": unbound symbol '" + s + "'");
            }
        }
    };
    for (const auto& f : g.device_functions)
        check_symbols(f.grid, "grid of function '" + f.name + "'", -1);
    for (const auto& e : g.event_tensors)
        check_symbols(e.shape, "shape of event tensor '" + e.name + "'", -1);
    for (const auto& r : g.runtime_tensors)
        check_symbols(r.shape, "shape of runtime tensor '" + r.name + "'", -1);

    // Which calls write which event tensors (tensor-level), in program order.
    std::map<std::string, int> first_writer_call;  // event name -> earliest call index
    for (size_t ci = 0; ci < g.calls.size(); ++ci)
        for (const auto& e : g.calls[ci].out_edges)
            if (!first_writer_call.count(e.event))
                first_writer_call[e.event] = static_cast<int>(ci);

    std::map<std::string, int> writer_call_count;  // fn name -> # calls launching it
    for (const auto& c : g.calls) writer_call_count[c.fn]++;

    for (size_t ci = 0; ci < g.calls.size(); ++ci) {
        const auto& c = g.calls[ci];
        std::string where = "call " + std::to_string(ci) + " (" + c.fn + ")";
        if (!fn_names.count(c.fn)) {
            diag(where + ": unknown device function");
            continue;
        }
        const auto& grid = g.call_grid(c);
        if (grid.empty()) diag(where + ": empty grid");
        int rank = static_cast<int>(grid.size());
        check_symbols(grid, where + " grid", -1);
        if (!c.extent_from.empty() && !rt_names.count(c.extent_from))
            diag(where + ": extent tensor '" + c.extent_from + "' undeclared");

        auto check_edge = [&](const EdgeSpec& e, bool is_in) {
            std::string ewhere = where + (is_in ? " in-edge" : " out-edge") + " on '" + e.event + "'";
            int ei = g.event_index(e.event);
            if (ei < 0) {
                diag(ewhere + ": unresolved event");
                return;
            }
            const auto& decl = g.event_tensors[ei];
            switch (e.kind) {
                case MapKind::StaticMap:
                    if (e.map.size() != decl.shape.size())
                        diag(ewhere + ": map arity " + std::to_string(e.map.size()) +
                             " != event rank " + std::to_string(decl.shape.size()));
                    check_symbols(e.map, ewhere + " map", rank);
                    break;
                case MapKind::DataDependentNotify: {
                    if (is_in) diag(ewhere + ": data-dependent notify is only legal on out-edges");
                    int ri = g.runtime_index(e.routing_tensor);
                    if (ri < 0)
                        diag(ewhere + ": routing tensor '" + e.routing_tensor + "' undeclared");
                    else if (g.runtime_tensors[ri].role != TensorRole::Routing)
                        diag(ewhere + ": tensor '" + e.routing_tensor + "' does not have the routing role");
                    break;
                }
                case MapKind::RangeTrigger: {
                    if (!is_in) diag(ewhere + ": range trigger is only legal on in-edges");
                    int ri = g.runtime_index(e.indptr_tensor);
                    if (ri < 0)
                        diag(ewhere + ": indptr tensor '" + e.indptr_tensor + "' undeclared");
                    else if (g.runtime_tensors[ri].role != TensorRole::Indptr)
                        diag(ewhere + ": tensor '" + e.indptr_tensor + "' does not have the indptr role");
                    if (decl.shape.size() != 1)
                        diag(ewhere + ": range triggers require a rank-1 event tensor");
                    break;
                }
            }
            if (is_in) {
                auto it = first_writer_call.find(e.event);
                if (it == first_writer_call.end()) {
                    // Never written: only consistent if all its counts are zero
                    // (pre-triggered); legal, the materializer enforces counts.
                } else if (it->second > static_cast<int>(ci)) {
                    diag(ewhere + ": event tensor is first written by later call " +
                         std::to_string(it->second) + " (feed-forward violation)");
                }
            }
        };
        for (const auto& e : c.in_edges) check_edge(e, true);
        for (const auto& e : c.out_edges) check_edge(e, false);

        // DMA functions must be pure data movement: no data-dependent out-edges.
        const auto* fn = g.find_fn(c.fn);
        if (fn && fn->resource == Resource::DMA)
            for (const auto& e : c.out_edges)
                if (e.kind != MapKind::StaticMap)
                    diag(where + ": DMA-class call has a data-dependent out-edge");
    }

    // Data-dependent writers must be launched by exactly one call so runtime
    // values have a well-defined availability time.
    for (const auto& e : g.event_tensors) {
        if (!e.data_dependent || e.writer.empty()) continue;
        if (writer_call_count[e.writer] != 1)
            diag("writer '" + e.writer + "' of event tensor '" + e.name + "' must be launched by exactly one call");
    }
    for (const auto& r : g.runtime_tensors) {
        if (r.writer.empty()) continue;
        if (writer_call_count[r.writer] != 1)
            diag("writer '" + r.writer + "' of runtime tensor '" + r.name + "' must be launched by exactly one call");
    }

    return diags;
}

GraphSummary summarize_graph(const GraphFunction& g) {
    GraphSummary s;
    s.num_calls = static_cast<int>(g.calls.size());
    s.num_event_tensors = static_cast<int>(g.event_tensors.size());
    s.num_runtime_tensors = static_cast<int>(g.runtime_tensors.size());
    s.symbols.insert(g.symbols.begin(), g.symbols.end());
    for (const auto& e : g.event_tensors)
        if (e.data_dependent) s.has_data_dependent = true;
    for (const auto& c : g.calls)
        for (const auto& e : c.in_edges)
            if (e.kind != MapKind::StaticMap) s.has_data_dependent = true;
    for (const auto& c : g.calls)
        for (const auto& e : c.out_edges)
            if (e.kind != MapKind::StaticMap) s.has_data_dependent = true;
    return s;
}

}  // namespace etsim
