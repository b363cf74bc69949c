#include "etsim/materialize.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

namespace etsim {

Int flatten_coord(const std::vector<Int>& coord, const std::vector<Int>& extents) {
    Int flat = 0;
    for (size_t i = 0; i < extents.size(); ++i) flat = flat * extents[i] + coord[i];
    return flat;
}

std::vector<Int> unflatten_coord(Int flat, const std::vector<Int>& extents) {
    std::vector<Int> coord(extents.size(), 0);
    for (size_t i = extents.size(); i-- > 0;) {
        coord[i] = flat % extents[i];
        flat /= extents[i];
    }
    return coord;
}

namespace {

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t task_hash(Int seed, int call_index, const std::vector<Int>& coord) {
    uint64_t h = mix64(static_cast<uint64_t>(seed) ^ 0x5bf03635d1d2c147ull);
    h = mix64(h ^ static_cast<uint64_t>(call_index));
    for (Int c : coord) h = mix64(h ^ static_cast<uint64_t>(c));
    return h;
}

Int group_of(Int flat, const std::vector<Int>& indptr) {
    // indptr has G+1 entries; group g covers [indptr[g], indptr[g+1]).
    auto it = std::upper_bound(indptr.begin(), indptr.end(), flat);
    if (it == indptr.begin() || it == indptr.end()) return -1;
    return static_cast<Int>(it - indptr.begin()) - 1;
}

std::vector<Int> eval_dims(const std::vector<ExprPtr>& dims, const ShapeBinding& b,
                           const std::string& where) {
    std::vector<Int> out;
    out.reserve(dims.size());
    for (const auto& d : dims) {
        Int v;
        try {
            v = eval_expr(d, b);
        } catch (const Error& e) {
            throw Error(where + ": " + e.what());
        }
        out.push_back(v);
    }
    return out;
}

Int total_of(const std::vector<Int>& extents) {
    Int t = 1;
    for (Int e : extents) t *= e;
    return t;
}

}  // namespace

Int eval_duration(const DurationModel& m, Int seed, int call_index, const std::vector<Int>& coord,
                  const std::vector<Int>& extents, const RoutingRealization* realization) {
    switch (m.kind) {
        case DurationModel::Kind::Constant:
            if (m.value < 0) throw Error("negative constant duration");
            return m.value;
        case DurationModel::Kind::Table: {
            if (m.table.empty()) throw Error("empty duration table");
            Int flat = flatten_coord(coord, extents);
            return m.table[static_cast<size_t>(flat % static_cast<Int>(m.table.size()))];
        }
        case DurationModel::Kind::Uniform: {
            if (m.lo < 0 || m.hi < m.lo) throw Error("invalid uniform duration bounds");
            uint64_t h = task_hash(seed, call_index, coord);
            return m.lo + static_cast<Int>(h % static_cast<uint64_t>(m.hi - m.lo + 1));
        }
        case DurationModel::Kind::SkewedByGroup: {
            const std::vector<Int>* indptr =
                realization ? realization->find(m.group_indptr) : nullptr;
            if (!indptr) return m.base;  // no realization: every group is cold
            Int g = group_of(flatten_coord(coord, extents), *indptr);
            return g == m.hot_group ? m.base * m.factor : m.base;
        }
    }
    throw Error("corrupt duration model");
}

MaterializedTaskGraph instantiate(const GraphFunction& g, const ShapeBinding& binding,
                                  const RoutingRealization* realization, Int seed) {
    for (const auto& s : g.symbols)
        if (!binding.count(s))
            throw Error("binding " + binding_to_string(binding) + " does not bind symbol '" + s + "'");

    MaterializedTaskGraph m;
    m.binding = binding;
    m.seed = seed;

    // Event element layout: tensors packed consecutively.
    std::vector<std::vector<Int>> ev_extents(g.event_tensors.size());
    m.tensor_offsets.resize(g.event_tensors.size(), 0);
    Int next_elem = 0;
    for (size_t ti = 0; ti < g.event_tensors.size(); ++ti) {
        const auto& decl = g.event_tensors[ti];
        ev_extents[ti] = eval_dims(decl.shape, binding, "event tensor '" + decl.name + "'");
        m.tensor_offsets[ti] = next_elem;
        Int total = total_of(ev_extents[ti]);
        for (Int f = 0; f < total; ++f) {
            EventElement e;
            e.id = static_cast<int>(next_elem + f);
            e.tensor = static_cast<int>(ti);
            e.flat = f;
            m.events.push_back(e);
        }
        next_elem += total;
    }
    m.event_producers.resize(m.events.size());
    m.event_consumers.resize(m.events.size());

    // Runtime tensor checks: every provided tensor must be declared with a
    // matching flat size; required tensors are checked at their use sites.
    auto runtime_tensor = [&](const std::string& name, const std::string& why) -> const std::vector<Int>& {
        int ri = g.runtime_index(name);
        if (ri < 0) throw Error("undeclared runtime tensor '" + name + "' (" + why + ")");
        if (!realization) throw Error("realization required: " + why + " reads tensor '" + name + "'");
        const auto* vals = realization->find(name);
        if (!vals) throw Error("realization missing tensor '" + name + "' (" + why + ")");
        Int expect = total_of(eval_dims(g.runtime_tensors[ri].shape, binding,
                                        "runtime tensor '" + name + "'"));
        if (static_cast<Int>(vals->size()) != expect)
            throw Error("realization tensor '" + name + "' has " + std::to_string(vals->size()) +
                        " entries, shape requires " + std::to_string(expect));
        return *vals;
    };
    if (realization)
        for (const auto& [name, vals] : realization->tensors) {
            int ri = g.runtime_index(name);
            if (ri < 0) throw Error("realization provides undeclared tensor '" + name + "'");
            Int expect = total_of(eval_dims(g.runtime_tensors[ri].shape, binding,
                                            "runtime tensor '" + name + "'"));
            if (static_cast<Int>(vals.size()) != expect)
                throw Error("realization tensor '" + name + "' has " + std::to_string(vals.size()) +
                            " entries, shape requires " + std::to_string(expect));
        }

    // Tasks, with runtime extents applied.
    m.call_extents.resize(g.calls.size());
    m.call_task_counts.resize(g.calls.size(), 0);
    m.call_first_task.resize(g.calls.size(), 0);
    for (size_t ci = 0; ci < g.calls.size(); ++ci) {
        const auto& c = g.calls[ci];
        const auto* fn = g.find_fn(c.fn);
        if (!fn) throw Error("call " + std::to_string(ci) + " names unknown function '" + c.fn + "'");
        auto extents = eval_dims(g.call_grid(c), binding, "grid of call " + std::to_string(ci));
        Int worst = total_of(extents);
        Int actual = worst;
        if (!c.extent_from.empty() && realization) {
            const auto& indptr = runtime_tensor(c.extent_from, "call extent");
            if (indptr.empty()) throw Error("extent tensor '" + c.extent_from + "' is empty");
            actual = indptr.back();
            if (actual > worst)
                throw Error("runtime extent " + std::to_string(actual) +
                            " of call " + std::to_string(ci) + " exceeds worst-case grid " +
                            std::to_string(worst));
        }
        m.call_extents[ci] = extents;
        m.call_task_counts[ci] = actual;
        m.call_first_task[ci] = static_cast<int>(m.tasks.size());
        for (Int f = 0; f < actual; ++f) {
            Task t;
            t.id = static_cast<int>(m.tasks.size());
            t.call = static_cast<int>(ci);
            t.coord = unflatten_coord(f, extents);
            t.flat = f;
            t.resource = fn->resource;
            m.tasks.push_back(std::move(t));
        }
    }
    m.task_waits.resize(m.tasks.size());
    m.task_notifies.resize(m.tasks.size());

    // Durations.
    for (auto& t : m.tasks) {
        const auto* fn = g.find_fn(g.calls[t.call].fn);
        const auto& extents = m.call_extents[t.call];
        if (!fn->duration.empty()) {
            auto it = g.duration_models.find(fn->duration);
            if (it == g.duration_models.end())
                throw Error("unknown duration model '" + fn->duration + "'");
            t.duration = eval_duration(it->second, seed, t.call, t.coord, extents, realization);
        }
        if (!fn->prefetch.empty()) {
            auto it = g.duration_models.find(fn->prefetch);
            if (it == g.duration_models.end())
                throw Error("unknown prefetch model '" + fn->prefetch + "'");
            t.prefetch = eval_duration(it->second, seed, t.call, t.coord, extents, realization);
        }
    }

    // Edge resolution.
    auto element_id = [&](int tensor, const std::vector<Int>& coord,
                          const std::string& where) -> int {
        const auto& ext = ev_extents[tensor];
        if (coord.size() != ext.size())
            throw Error(where + ": map arity " + std::to_string(coord.size()) +
                        " != event rank " + std::to_string(ext.size()));
        for (size_t d = 0; d < ext.size(); ++d)
            if (coord[d] < 0 || coord[d] >= ext[d])
                throw Error(where + ": event index " + std::to_string(coord[d]) +
                            " out of bounds for dim " + std::to_string(d) + " (extent " +
                            std::to_string(ext[d]) + ")");
        return static_cast<int>(m.tensor_offsets[tensor] + flatten_coord(coord, ext));
    };

    for (size_t ci = 0; ci < g.calls.size(); ++ci) {
        const auto& c = g.calls[ci];
        std::string where = "call " + std::to_string(ci) + " (" + c.fn + ")";
        int first = m.call_first_task[ci];
        Int count = m.call_task_counts[ci];

        auto resolve_static = [&](const EdgeSpec& e, const Task& t) -> int {
            int ti = g.event_index(e.event);
            if (ti < 0) throw Error(where + ": unresolved event '" + e.event + "'");
            ShapeBinding extended = binding;
            for (size_t d = 0; d < t.coord.size(); ++d)
                extended["t" + std::to_string(d)] = t.coord[d];
            std::vector<Int> coord;
            coord.reserve(e.map.size());
            for (const auto& ex : e.map) coord.push_back(eval_expr(ex, extended));
            return element_id(ti, coord, where + " edge on '" + e.event + "'");
        };

        for (const auto& e : c.in_edges) {
            int ti = g.event_index(e.event);
            if (ti < 0) throw Error(where + ": unresolved event '" + e.event + "'");
            if (e.kind == MapKind::StaticMap) {
                for (Int f = 0; f < count; ++f) {
                    Task& t = m.tasks[first + f];
                    int el = resolve_static(e, t);
                    m.task_waits[t.id].push_back(el);
                    m.event_consumers[el].push_back(t.id);
                }
            } else if (e.kind == MapKind::RangeTrigger) {
                const auto& indptr = runtime_tensor(e.indptr_tensor, "range trigger");
                Int groups = total_of(ev_extents[ti]);
                if (static_cast<Int>(indptr.size()) != groups + 1)
                    throw Error(where + ": indptr '" + e.indptr_tensor + "' has " +
                                std::to_string(indptr.size()) + " entries, expected " +
                                std::to_string(groups + 1));
                for (size_t k = 1; k < indptr.size(); ++k)
                    if (indptr[k] < indptr[k - 1])
                        throw Error(where + ": indptr '" + e.indptr_tensor + "' is not nondecreasing");
                if (indptr.front() != 0)
                    throw Error(where + ": indptr '" + e.indptr_tensor + "' does not start at 0");
                if (indptr.back() != count)
                    throw Error(where + ": indptr total " + std::to_string(indptr.back()) +
                                " != task count " + std::to_string(count));
                for (Int f = 0; f < count; ++f) {
                    Task& t = m.tasks[first + f];
                    Int grp = group_of(f, indptr);
                    int el = static_cast<int>(m.tensor_offsets[ti] + grp);
                    m.task_waits[t.id].push_back(el);
                    m.event_consumers[el].push_back(t.id);
                }
            } else {
                throw Error(where + ": data-dependent notify cannot appear on an in-edge");
            }
        }
        for (const auto& e : c.out_edges) {
            int ti = g.event_index(e.event);
            if (ti < 0) throw Error(where + ": unresolved event '" + e.event + "'");
            if (e.kind == MapKind::StaticMap) {
                for (Int f = 0; f < count; ++f) {
                    Task& t = m.tasks[first + f];
                    int el = resolve_static(e, t);
                    m.task_notifies[t.id].push_back(el);
                    m.event_producers[el].push_back(t.id);
                }
            } else if (e.kind == MapKind::DataDependentNotify) {
                const auto& routing = runtime_tensor(e.routing_tensor, "routed notify");
                Int extent = total_of(ev_extents[ti]);
                for (Int f = 0; f < count; ++f) {
                    Task& t = m.tasks[first + f];
                    if (f >= static_cast<Int>(routing.size()))
                        throw Error(where + ": routing tensor '" + e.routing_tensor +
                                    "' shorter than task count");
                    Int idx = routing[f];
                    if (idx < 0 || idx >= extent)
                        throw Error(where + ": routing value " + std::to_string(idx) +
                                    " out of bounds for event '" + e.event + "' (extent " +
                                    std::to_string(extent) + ")");
                    int el = static_cast<int>(m.tensor_offsets[ti] + idx);
                    m.task_notifies[t.id].push_back(el);
                    m.event_producers[el].push_back(t.id);
                }
            } else {
                throw Error(where + ": range trigger cannot appear on an out-edge");
            }
        }
    }

    // Initial counts.
    for (auto& e : m.events) {
        const auto& decl = g.event_tensors[e.tensor];
        Int producers = static_cast<Int>(m.event_producers[e.id].size());
        if (!decl.data_dependent) {
            e.initial_count = producers;
        } else {
            const auto& counts = runtime_tensor(decl.counts_tensor,
                                                "counts of event tensor '" + decl.name + "'");
            e.initial_count = counts[static_cast<size_t>(e.flat)];
            if (e.initial_count < 0)
                throw Error("negative count for event '" + decl.name + "' element " +
                            std::to_string(e.flat));
            if (e.initial_count != producers)
                throw Error("event '" + decl.name + "' element " + std::to_string(e.flat) +
                            " has count " + std::to_string(e.initial_count) + " but " +
                            std::to_string(producers) + " producer edges");
        }
    }

    // Element-level acyclicity (Kahn over producer->consumer pairs).
    std::vector<Int> indeg(m.tasks.size(), 0);
    for (const auto& e : m.events) {
        Int p = static_cast<Int>(m.event_producers[e.id].size());
        for (int c : m.event_consumers[e.id]) indeg[c] += p;
    }
    std::queue<int> q;
    for (const auto& t : m.tasks)
        if (indeg[t.id] == 0) q.push(t.id);
    size_t done = 0;
    while (!q.empty()) {
        int t = q.front();
        q.pop();
        ++done;
        for (int el : m.task_notifies[t])
            for (int c : m.event_consumers[el])
                if (--indeg[c] == 0) q.push(c);
    }
    if (done != m.tasks.size())
        throw Error("dependency cycle: materialized graph is not a DAG (" +
                    std::to_string(m.tasks.size() - done) + " tasks unreachable)");

    return m;
}

Int critical_path(const MaterializedTaskGraph& m) {
    // Longest path in topological order; task weight = prefetch + duration.
    std::vector<Int> indeg(m.tasks.size(), 0), finish(m.tasks.size(), 0);
    for (const auto& e : m.events) {
        Int p = static_cast<Int>(m.event_producers[e.id].size());
        for (int c : m.event_consumers[e.id]) indeg[c] += p;
    }
    std::queue<int> q;
    for (const auto& t : m.tasks)
        if (indeg[t.id] == 0) q.push(t.id);
    Int best = 0;
    while (!q.empty()) {
        int t = q.front();
        q.pop();
        finish[t] += m.tasks[t].prefetch + m.tasks[t].duration;
        best = std::max(best, finish[t]);
        for (int el : m.task_notifies[t])
            for (int c : m.event_consumers[el]) {
                finish[c] = std::max(finish[c], finish[t]);
                if (--indeg[c] == 0) q.push(c);
            }
    }
    return best;
}

Int list_schedule(const MaterializedTaskGraph& m, int num_sms) {
    if (num_sms < 1) throw Error("list_schedule requires at least one SM");
    std::vector<Int> remaining(m.tasks.size(), 0);
    for (const auto& e : m.events) {
        Int p = static_cast<Int>(m.event_producers[e.id].size());
        for (int c : m.event_consumers[e.id]) remaining[c] += p;
    }
    // Ready pools per resource class, ordered by task id.
    std::priority_queue<int, std::vector<int>, std::greater<>> ready_sm, ready_dma;
    for (const auto& t : m.tasks)
        if (remaining[t.id] == 0)
            (t.resource == Resource::SM ? ready_sm : ready_dma).push(t.id);

    using Running = std::pair<Int, int>;  // (finish time, task)
    std::priority_queue<Running, std::vector<Running>, std::greater<>> running;
    int free_sm = num_sms;
    bool free_dma = true;
    Int now = 0, makespan = 0;
    size_t started = 0;

    auto launch = [&]() {
        while (free_sm > 0 && !ready_sm.empty()) {
            int t = ready_sm.top();
            ready_sm.pop();
            --free_sm;
            ++started;
            running.emplace(now + m.tasks[t].prefetch + m.tasks[t].duration, t);
        }
        while (free_dma && !ready_dma.empty()) {
            int t = ready_dma.top();
            ready_dma.pop();
            free_dma = false;
            ++started;
            running.emplace(now + m.tasks[t].prefetch + m.tasks[t].duration, t);
        }
    };
    launch();
    while (!running.empty()) {
        now = running.top().first;
        makespan = std::max(makespan, now);
        // Retire everything finishing now, then launch.
        while (!running.empty() && running.top().first == now) {
            int t = running.top().second;
            running.pop();
            if (m.tasks[t].resource == Resource::SM)
                ++free_sm;
            else
                free_dma = true;
            for (int el : m.task_notifies[t])
                for (int c : m.event_consumers[el])
                    if (--remaining[c] == 0)
                        (m.tasks[c].resource == Resource::SM ? ready_sm : ready_dma).push(c);
        }
        launch();
    }
    if (started != m.tasks.size())
        throw Error("list_schedule: dependency cycle left " +
                    std::to_string(m.tasks.size() - started) + " tasks unscheduled");
    return makespan;
}

std::vector<std::string> check_trace(const Trace& t, const MaterializedTaskGraph& m) {
    std::vector<std::string> diags;
    auto diag = [&](const std::string& s) { diags.push_back(s); };
    auto key = [](int call, const std::vector<Int>& coord) {
        std::string k = std::to_string(call) + ":";
        for (Int c : coord) k += std::to_string(c) + ",";
        return k;
    };

    std::map<std::string, int> graph_task;
    for (const auto& task : m.tasks) graph_task[key(task.call, task.coord)] = task.id;

    std::vector<int> record_of(m.tasks.size(), -1);
    for (size_t ri = 0; ri < t.tasks.size(); ++ri) {
        const auto& rec = t.tasks[ri];
        auto it = graph_task.find(key(rec.call, rec.coord));
        if (rec.noop) {
            if (it != graph_task.end())
                diag("task " + key(rec.call, rec.coord) + " was masked but is a real graph task");
            if (rec.exec.length() != 0)
                diag("masked task " + key(rec.call, rec.coord) + " has nonzero exec time");
            continue;
        }
        if (it == graph_task.end()) {
            diag("trace task " + key(rec.call, rec.coord) + " does not exist in the graph");
            continue;
        }
        int id = it->second;
        if (record_of[id] != -1) {
            diag("task " + key(rec.call, rec.coord) + " executed more than once");
            continue;
        }
        record_of[id] = static_cast<int>(ri);
        bool on_dma = t.has_dma && rec.resource == t.num_sms;
        if ((m.tasks[id].resource == Resource::DMA) != on_dma)
            diag("task " + key(rec.call, rec.coord) + " ran on the wrong resource class");
        if (rec.exec.length() != m.tasks[id].duration)
            diag("task " + key(rec.call, rec.coord) + " exec length " +
                 std::to_string(rec.exec.length()) + " != duration " +
                 std::to_string(m.tasks[id].duration));
    }
    for (const auto& task : m.tasks)
        if (record_of[task.id] == -1)
            diag("graph task " + key(task.call, task.coord) + " never executed");
    if (!diags.empty()) return diags;  // timing checks need full coverage

    // Dependency timing: consumer exec start >= every producer's exec end.
    for (const auto& e : m.events)
        for (int p : m.event_producers[e.id])
            for (int c : m.event_consumers[e.id]) {
                Int pend = t.tasks[record_of[p]].exec.end;
                Int cstart = t.tasks[record_of[c]].exec.start;
                if (cstart < pend)
                    diag("task " + key(m.tasks[c].call, m.tasks[c].coord) + " started at " +
                         std::to_string(cstart) + " before producer " +
                         key(m.tasks[p].call, m.tasks[p].coord) + " ended at " +
                         std::to_string(pend));
            }

    // Resource exclusivity over every occupying interval (prefetch is
    // background and may overlap its own task's waits).
    std::vector<std::vector<std::pair<Interval, int>>> busy(t.num_resources());
    for (size_t ri = 0; ri < t.tasks.size(); ++ri) {
        const auto& rec = t.tasks[ri];
        if (rec.resource < 0 || rec.resource >= t.num_resources()) {
            diag("trace record has out-of-range resource " + std::to_string(rec.resource));
            continue;
        }
        auto add = [&](const Interval& iv) {
            if (iv.length() > 0) busy[rec.resource].emplace_back(iv, static_cast<int>(ri));
        };
        if (rec.pop) add(*rec.pop);
        for (const auto& w : rec.waits) add(w);
        add(rec.exec);
        for (const auto& n : rec.notifies) add(n);
        for (const auto& p : rec.pushes) add(p);
    }
    for (int r = 0; r < t.num_resources(); ++r) {
        auto& ivs = busy[r];
        std::sort(ivs.begin(), ivs.end(),
                  [](const auto& a, const auto& b) { return a.first.start < b.first.start; });
        for (size_t i = 1; i < ivs.size(); ++i)
            if (ivs[i].first.start < ivs[i - 1].first.end && ivs[i].second != ivs[i - 1].second)
                diag("resource " + t.resource_name(r) + " runs two tasks at once around t=" +
                     std::to_string(ivs[i].first.start));
    }

    // Makespan is the last recorded completion.
    Int last = 0;
    for (const auto& rec : t.tasks) {
        last = std::max(last, rec.exec.end);
        for (const auto& n : rec.notifies) last = std::max(last, n.end);
        for (const auto& p : rec.pushes) last = std::max(last, p.end);
        for (const auto& w : rec.waits) last = std::max(last, w.end);
    }
    if (t.makespan != last)
        diag("trace makespan " + std::to_string(t.makespan) + " != last completion " +
             std::to_string(last));

    for (size_t i = 0; i < t.final_counters.size(); ++i)
        if (t.final_counters[i] != 0)
            diag("counter " + std::to_string(i) + " finished nonzero (" +
                 std::to_string(t.final_counters[i]) + ")");

    return diags;
}

std::string to_dot(const MaterializedTaskGraph& m, const GraphFunction& g) {
    std::ostringstream os;
    os << "digraph tasks {\n  rankdir=LR;\n";
    for (const auto& t : m.tasks) {
        os << "  t" << t.id << " [label=\"" << g.calls[t.call].fn << "(";
        for (size_t i = 0; i < t.coord.size(); ++i) os << (i ? "," : "") << t.coord[i];
        os << ")\\nd=" << t.duration << "\" shape=box];\n";
    }
    for (const auto& e : m.events) {
        if (m.event_producers[e.id].empty() && m.event_consumers[e.id].empty()) continue;
        os << "  e" << e.id << " [label=\"" << g.event_tensors[e.tensor].name << "[" << e.flat
           << "]=" << e.initial_count << "\" shape=ellipse];\n";
        for (int p : m.event_producers[e.id]) os << "  t" << p << " -> e" << e.id << ";\n";
        for (int c : m.event_consumers[e.id]) os << "  e" << e.id << " -> t" << c << ";\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace etsim
