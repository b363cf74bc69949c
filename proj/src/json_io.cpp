#include "etsim/json_io.hpp"

#include <json.hpp>

namespace etsim {

namespace {

using J = nlohmann::ordered_json;

J parse_text(const std::string& text, const char* what) {
    try {
        return J::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string(what) + ": " + e.what());
    }
}

// Runs a conversion, translating json access errors into this library's own.
template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string(what) + ": " + e.what());
    }
}

std::vector<std::string> exprs_to_strings(const std::vector<ExprPtr>& v) {
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& e : v) out.push_back(e->to_string());
    return out;
}

std::vector<ExprPtr> exprs_from_json(const J& arr, const char* what) {
    if (!arr.is_array()) throw Error(std::string(what) + " must be an array of expressions");
    std::vector<ExprPtr> out;
    for (const auto& s : arr) out.push_back(parse_expr(s.get<std::string>()));
    return out;
}

J model_to_json(const DurationModel& m) {
    switch (m.kind) {
        case DurationModel::Kind::Constant:
            return J{{"kind", "constant"}, {"value", m.value}};
        case DurationModel::Kind::Table:
            return J{{"kind", "table"}, {"values", m.table}};
        case DurationModel::Kind::Uniform:
            return J{{"kind", "uniform"}, {"lo", m.lo}, {"hi", m.hi}};
        case DurationModel::Kind::SkewedByGroup:
            return J{{"kind", "skewed"},
                     {"base", m.base},
                     {"factor", m.factor},
                     {"group_indptr", m.group_indptr},
                     {"hot_group", m.hot_group}};
    }
    throw Error("unknown duration model kind");
}

DurationModel model_from_json(const J& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return DurationModel::constant(j.at("value").get<Int>());
    if (kind == "table") return DurationModel::table_of(j.at("values").get<std::vector<Int>>());
    if (kind == "uniform") return DurationModel::uniform(j.at("lo").get<Int>(), j.at("hi").get<Int>());
    if (kind == "skewed")
        return DurationModel::skewed(j.at("base").get<Int>(), j.at("factor").get<Int>(),
                                     j.at("group_indptr").get<std::string>(),
                                     j.at("hot_group").get<Int>());
    throw Error("unknown duration model kind '" + kind + "'");
}

J edge_to_json(const EdgeSpec& e) {
    J j{{"event", e.event}};
    switch (e.kind) {
        case MapKind::StaticMap: j["map"] = exprs_to_strings(e.map); break;
        case MapKind::DataDependentNotify: j["routed_by"] = e.routing_tensor; break;
        case MapKind::RangeTrigger: j["indptr"] = e.indptr_tensor; break;
    }
    return j;
}

EdgeSpec edge_from_json(const J& j) {
    EdgeSpec e;
    e.event = j.at("event").get<std::string>();
    int forms = (j.contains("map") ? 1 : 0) + (j.contains("routed_by") ? 1 : 0) +
                (j.contains("indptr") ? 1 : 0);
    if (forms != 1)
        throw Error("edge on '" + e.event + "' needs exactly one of map / routed_by / indptr");
    if (j.contains("map")) {
        e.kind = MapKind::StaticMap;
        e.map = exprs_from_json(j["map"], "edge map");
    } else if (j.contains("routed_by")) {
        e.kind = MapKind::DataDependentNotify;
        e.routing_tensor = j["routed_by"].get<std::string>();
    } else {
        e.kind = MapKind::RangeTrigger;
        e.indptr_tensor = j["indptr"].get<std::string>();
    }
    return e;
}

J binding_to_json(const ShapeBinding& b) {
    J j = J::object();
    for (const auto& [k, v] : b) j[k] = v;
    return j;
}

ShapeBinding binding_from_json(const J& j) {
    ShapeBinding b;
    for (auto it = j.begin(); it != j.end(); ++it) b[it.key()] = it.value().get<Int>();
    return b;
}

J graph_to_j(const GraphFunction& g) {
    J j;
    j["symbols"] = g.symbols;
    if (!g.size_symbol.empty()) j["size_symbol"] = g.size_symbol;
    J models = J::object();
    for (const auto& [id, m] : g.duration_models) models[id] = model_to_json(m);
    j["duration_models"] = std::move(models);
    J fns = J::array();
    for (const auto& f : g.device_functions) {
        J fj{{"name", f.name},
             {"grid", exprs_to_strings(f.grid)},
             {"resource", f.resource == Resource::DMA ? "dma" : "sm"}};
        if (!f.duration.empty()) fj["duration"] = f.duration;
        if (!f.prefetch.empty()) fj["prefetch"] = f.prefetch;
        fns.push_back(std::move(fj));
    }
    j["device_functions"] = std::move(fns);
    J evs = J::array();
    for (const auto& e : g.event_tensors) {
        J ej{{"name", e.name}, {"shape", exprs_to_strings(e.shape)}};
        if (e.data_dependent) {
            ej["data_dependent"] = true;
            ej["counts"] = e.counts_tensor;
            ej["writer"] = e.writer;
        }
        evs.push_back(std::move(ej));
    }
    j["event_tensors"] = std::move(evs);
    if (!g.runtime_tensors.empty()) {
        J rts = J::array();
        for (const auto& r : g.runtime_tensors) {
            const char* role = r.role == TensorRole::Routing ? "routing"
                               : r.role == TensorRole::Counts ? "counts"
                                                              : "indptr";
            rts.push_back(J{{"name", r.name},
                            {"shape", exprs_to_strings(r.shape)},
                            {"role", role},
                            {"writer", r.writer}});
        }
        j["runtime_tensors"] = std::move(rts);
    }
    J calls = J::array();
    for (const auto& c : g.calls) {
        J cj{{"fn", c.fn}};
        if (!c.grid.empty()) cj["grid"] = exprs_to_strings(c.grid);
        if (!c.extent_from.empty()) cj["extent_from"] = c.extent_from;
        if (!c.in_edges.empty()) {
            J arr = J::array();
            for (const auto& e : c.in_edges) arr.push_back(edge_to_json(e));
            cj["in"] = std::move(arr);
        }
        if (!c.out_edges.empty()) {
            J arr = J::array();
            for (const auto& e : c.out_edges) arr.push_back(edge_to_json(e));
            cj["out"] = std::move(arr);
        }
        calls.push_back(std::move(cj));
    }
    j["calls"] = std::move(calls);
    return j;
}

GraphFunction graph_from_j(const J& j) {
    GraphFunction g;
    g.symbols = j.value("symbols", std::vector<std::string>{});
    g.size_symbol = j.value("size_symbol", std::string{});
    if (j.contains("duration_models"))
        for (auto it = j["duration_models"].begin(); it != j["duration_models"].end(); ++it)
            g.duration_models[it.key()] = model_from_json(it.value());
    for (const auto& fj : j.value("device_functions", J::array())) {
        DeviceFunctionDecl f;
        f.name = fj.at("name").get<std::string>();
        f.grid = exprs_from_json(fj.at("grid"), "device function grid");
        std::string res = fj.value("resource", "sm");
        if (res != "sm" && res != "dma") throw Error("resource must be sm or dma, got '" + res + "'");
        f.resource = res == "dma" ? Resource::DMA : Resource::SM;
        f.duration = fj.value("duration", std::string{});
        f.prefetch = fj.value("prefetch", std::string{});
        g.device_functions.push_back(std::move(f));
    }
    for (const auto& ej : j.value("event_tensors", J::array())) {
        EventTensorDecl e;
        e.name = ej.at("name").get<std::string>();
        e.shape = exprs_from_json(ej.at("shape"), "event tensor shape");
        e.data_dependent = ej.value("data_dependent", false);
        e.counts_tensor = ej.value("counts", std::string{});
        e.writer = ej.value("writer", std::string{});
        g.event_tensors.push_back(std::move(e));
    }
    for (const auto& rj : j.value("runtime_tensors", J::array())) {
        RuntimeTensorDecl r;
        r.name = rj.at("name").get<std::string>();
        r.shape = exprs_from_json(rj.at("shape"), "runtime tensor shape");
        std::string role = rj.at("role").get<std::string>();
        if (role == "routing")
            r.role = TensorRole::Routing;
        else if (role == "counts")
            r.role = TensorRole::Counts;
        else if (role == "indptr")
            r.role = TensorRole::Indptr;
        else
            throw Error("unknown runtime tensor role '" + role + "'");
        r.writer = rj.at("writer").get<std::string>();
        g.runtime_tensors.push_back(std::move(r));
    }
    for (const auto& cj : j.value("calls", J::array())) {
        CallDevice c;
        c.fn = cj.at("fn").get<std::string>();
        if (cj.contains("grid")) c.grid = exprs_from_json(cj["grid"], "call grid");
        c.extent_from = cj.value("extent_from", std::string{});
        for (const auto& e : cj.value("in", J::array())) c.in_edges.push_back(edge_from_json(e));
        for (const auto& e : cj.value("out", J::array())) c.out_edges.push_back(edge_from_json(e));
        g.calls.push_back(std::move(c));
    }
    return g;
}

J config_to_j(const SimConfig& c) {
    return J{{"num_sms", c.num_sms},
             {"notify_cost", c.notify_cost},
             {"pop_cost", c.pop_cost},
             {"push_cost_per_task", c.push_cost_per_task},
             {"poll_quantum", c.poll_quantum},
             {"seed", c.seed},
             {"step_limit", c.step_limit},
             {"enable_prefetch", c.enable_prefetch}};
}

SimConfig config_from_j(const J& j) {
    SimConfig c;
    c.num_sms = j.value("num_sms", c.num_sms);
    c.notify_cost = j.value("notify_cost", c.notify_cost);
    c.pop_cost = j.value("pop_cost", c.pop_cost);
    c.push_cost_per_task = j.value("push_cost_per_task", c.push_cost_per_task);
    c.poll_quantum = j.value("poll_quantum", c.poll_quantum);
    c.seed = j.value("seed", c.seed);
    c.step_limit = j.value("step_limit", c.step_limit);
    c.enable_prefetch = j.value("enable_prefetch", c.enable_prefetch);
    return c;
}

J moe_params_to_j(const MoEParams& p) {
    return J{{"kind", "moe"},          {"tokens", p.tokens},
             {"experts", p.experts},   {"top_k", p.top_k},
             {"tile_size", p.tile_size}, {"hot_fraction", p.hot_fraction},
             {"hot_expert", p.hot_expert}};
}

MoEParams moe_params_from_j(const J& j) {
    std::string kind = j.value("kind", "moe");
    if (kind != "moe") throw Error("unknown realization generator kind '" + kind + "'");
    MoEParams p;
    p.tokens = j.value("tokens", p.tokens);
    p.experts = j.value("experts", p.experts);
    p.top_k = j.value("top_k", p.top_k);
    p.tile_size = j.value("tile_size", p.tile_size);
    p.hot_fraction = j.value("hot_fraction", p.hot_fraction);
    p.hot_expert = j.value("hot_expert", p.hot_expert);
    return p;
}

J queue_task_to_j(const QueueTask& t) {
    return J{{"id", t.id},     {"call", t.call},           {"coord", t.coord},
             {"flat", t.flat}, {"prefetch", t.has_prefetch}, {"waits", t.waits},
             {"notifies", t.notifies}};
}

QueueTask queue_task_from_j(const J& j) {
    QueueTask t;
    t.id = j.at("id").get<int>();
    t.call = j.at("call").get<int>();
    t.coord = j.at("coord").get<std::vector<Int>>();
    t.flat = j.at("flat").get<Int>();
    t.has_prefetch = j.value("prefetch", false);
    t.waits = j.value("waits", std::vector<int>{});
    t.notifies = j.value("notifies", std::vector<int>{});
    return t;
}

J static_to_j(const StaticMegakernel& k) {
    J j;
    j["format"] = "megakernel";
    j["version"] = 1;
    j["mode"] = "static";
    j["num_sms"] = k.num_sms;
    j["rewritten"] = k.rewritten;
    j["graph"] = graph_to_j(k.graph);
    J samples = J::array();
    for (const auto& s : k.samples) {
        J sj;
        sj["binding"] = binding_to_json(s.binding);
        sj["size_value"] = s.size_value;
        J qs = J::array();
        for (const auto& q : s.sm_queues) {
            J qj = J::array();
            for (const auto& t : q) qj.push_back(queue_task_to_j(t));
            qs.push_back(std::move(qj));
        }
        sj["sm_queues"] = std::move(qs);
        J dq = J::array();
        for (const auto& t : s.dma_queue) dq.push_back(queue_task_to_j(t));
        sj["dma_queue"] = std::move(dq);
        sj["initial_counts"] = s.initial_counts;
        sj["tensor_offsets"] = s.tensor_offsets;
        samples.push_back(std::move(sj));
    }
    j["samples"] = std::move(samples);
    return j;
}

StaticMegakernel static_from_j(const J& j) {
    StaticMegakernel k;
    k.graph = graph_from_j(j.at("graph"));
    k.rewritten = j.value("rewritten", false);
    k.num_sms = j.at("num_sms").get<int>();
    for (const auto& sj : j.at("samples")) {
        SampledSchedule s;
        s.binding = binding_from_json(sj.at("binding"));
        s.size_value = sj.value("size_value", Int{0});
        for (const auto& qj : sj.at("sm_queues")) {
            std::vector<QueueTask> q;
            for (const auto& tj : qj) q.push_back(queue_task_from_j(tj));
            s.sm_queues.push_back(std::move(q));
        }
        for (const auto& tj : sj.value("dma_queue", J::array()))
            s.dma_queue.push_back(queue_task_from_j(tj));
        s.initial_counts = sj.at("initial_counts").get<std::vector<Int>>();
        s.tensor_offsets = sj.value("tensor_offsets", std::vector<Int>{});
        k.samples.push_back(std::move(s));
    }
    return k;
}

J dynamic_to_j(const DynamicMegakernel& k) {
    J j;
    j["format"] = "megakernel";
    j["version"] = 1;
    j["mode"] = "dynamic";
    j["early_push"] = k.early_push;
    j["graph"] = graph_to_j(k.graph);
    J tpl = J::array();
    for (const auto& t : k.templates)
        tpl.push_back(J{{"call", t.call},
                        {"prefetch", t.has_prefetch},
                        {"wait_edges", t.wait_edges}});
    j["templates"] = std::move(tpl);
    return j;
}

DynamicMegakernel dynamic_from_j(const J& j) {
    DynamicMegakernel k;
    k.graph = graph_from_j(j.at("graph"));
    k.early_push = j.value("early_push", false);
    for (const auto& tj : j.at("templates")) {
        DynamicCallTemplate t;
        t.call = tj.at("call").get<int>();
        t.has_prefetch = tj.value("prefetch", false);
        t.wait_edges = tj.value("wait_edges", std::vector<uint8_t>{});
        k.templates.push_back(std::move(t));
    }
    return k;
}

J metrics_to_j(const TraceMetrics& m) {
    J j{{"makespan", m.makespan},
        {"total_busy", m.total_busy},
        {"total_spin", m.total_spin},
        {"total_idle", m.total_idle},
        {"utilization", m.utilization},
        {"real_tasks", m.real_tasks},
        {"noop_tasks", m.noop_tasks},
        {"notifies", m.notifies},
        {"wait_blocks", m.wait_blocks},
        {"pushes", m.pushes},
        {"pops", m.pops},
        {"empty_polls", m.empty_polls}};
    J per_res = J::array();
    for (const auto& r : m.per_resource)
        per_res.push_back(J{{"busy", r.busy}, {"spin", r.spin}, {"idle", r.idle}});
    j["per_resource"] = std::move(per_res);
    J per_call = J::array();
    for (const auto& c : m.per_call)
        per_call.push_back(
            J{{"first_start", c.first_start}, {"last_end", c.last_end}, {"tasks", c.tasks}});
    j["per_call"] = std::move(per_call);
    return j;
}

TraceMetrics metrics_from_j(const J& j) {
    TraceMetrics m;
    m.makespan = j.value("makespan", Int{0});
    m.total_busy = j.value("total_busy", Int{0});
    m.total_spin = j.value("total_spin", Int{0});
    m.total_idle = j.value("total_idle", Int{0});
    m.utilization = j.value("utilization", 0.0);
    m.real_tasks = j.value("real_tasks", Int{0});
    m.noop_tasks = j.value("noop_tasks", Int{0});
    m.notifies = j.value("notifies", Int{0});
    m.wait_blocks = j.value("wait_blocks", Int{0});
    m.pushes = j.value("pushes", Int{0});
    m.pops = j.value("pops", Int{0});
    m.empty_polls = j.value("empty_polls", Int{0});
    for (const auto& r : j.value("per_resource", J::array()))
        m.per_resource.push_back(
            {r.value("busy", Int{0}), r.value("spin", Int{0}), r.value("idle", Int{0})});
    for (const auto& c : j.value("per_call", J::array()))
        m.per_call.push_back({c.value("first_start", Int{0}), c.value("last_end", Int{0}),
                              c.value("tasks", Int{0})});
    return m;
}

}  // namespace

std::string graph_to_json(const GraphFunction& g, int indent) {
    return graph_to_j(g).dump(indent);
}

GraphFunction graph_from_json(const std::string& text) {
    J j = parse_text(text, "graph spec");
    return guarded("graph spec", [&] { return graph_from_j(j); });
}

std::optional<SimConfig> sim_config_from_spec(const std::string& text) {
    J j = parse_text(text, "graph spec");
    if (!j.contains("sim")) return std::nullopt;
    return guarded("sim block", [&] { return config_from_j(j["sim"]); });
}

std::optional<MoEParams> realization_gen_from_spec(const std::string& text) {
    J j = parse_text(text, "graph spec");
    if (!j.contains("realization_gen")) return std::nullopt;
    return guarded("realization_gen block", [&] { return moe_params_from_j(j["realization_gen"]); });
}

std::string attach_realization_gen(const std::string& graph_json, const MoEParams& p) {
    J j = parse_text(graph_json, "graph spec");
    j["realization_gen"] = moe_params_to_j(p);
    return j.dump(2);
}

std::string kernel_to_json(const StaticMegakernel& k, int indent) {
    return static_to_j(k).dump(indent);
}

std::string kernel_to_json(const DynamicMegakernel& k, int indent) {
    return dynamic_to_j(k).dump(indent);
}

std::string kernel_to_json(const LoadedKernel& k, int indent) {
    J j;
    if (k.static_kernel)
        j = static_to_j(*k.static_kernel);
    else if (k.dynamic_kernel)
        j = dynamic_to_j(*k.dynamic_kernel);
    else
        throw Error("kernel holds neither form");
    if (k.realization_gen) j["realization_gen"] = moe_params_to_j(*k.realization_gen);
    if (k.sim_defaults) j["sim"] = config_to_j(*k.sim_defaults);
    return j.dump(indent);
}

LoadedKernel kernel_from_json(const std::string& text) {
    J j = parse_text(text, "kernel file");
    if (j.value("format", "") != "megakernel") throw Error("not a compiled kernel file");
    if (j.value("version", 0) != 1) throw Error("unsupported kernel version");
    LoadedKernel k;
    k.mode = j.value("mode", "");
    return guarded("kernel file", [&] {
        if (k.mode == "static")
            k.static_kernel = static_from_j(j);
        else if (k.mode == "dynamic")
            k.dynamic_kernel = dynamic_from_j(j);
        else
            throw Error("kernel mode must be static or dynamic, got '" + k.mode + "'");
        if (j.contains("realization_gen"))
            k.realization_gen = moe_params_from_j(j["realization_gen"]);
        if (j.contains("sim")) k.sim_defaults = config_from_j(j["sim"]);
        return std::move(k);
    });
}

std::string realization_to_json(const RoutingRealization& r, int indent) {
    J tensors = J::object();
    for (const auto& [name, values] : r.tensors) tensors[name] = values;
    return J{{"tensors", std::move(tensors)}}.dump(indent);
}

RoutingRealization realization_from_json(const std::string& text) {
    J j = parse_text(text, "realization file");
    return guarded("realization file", [&] {
        RoutingRealization r;
        for (auto it = j.at("tensors").begin(); it != j.at("tensors").end(); ++it)
            r.tensors[it.key()] = it.value().get<std::vector<Int>>();
        return r;
    });
}

std::string report_to_json(const std::string& label, const Trace& t, const TraceMetrics& m,
                           const SimConfig& cfg, int indent) {
    J j;
    j["label"] = label;
    j["mode"] = t.mode;
    j["binding"] = binding_to_json(t.binding);
    j["seed"] = t.seed;
    j["makespan"] = t.makespan;
    j["config"] = config_to_j(cfg);
    j["metrics"] = metrics_to_j(m);
    return j.dump(indent);
}

LabelledRun report_from_json(const std::string& text) {
    J j = parse_text(text, "report file");
    return guarded("report file", [&] {
        LabelledRun run;
        run.label = j.value("label", "unnamed");
        run.metrics = metrics_from_j(j.value("metrics", J::object()));
        if (run.metrics.makespan == 0) run.metrics.makespan = j.value("makespan", Int{0});
        return run;
    });
}

std::string config_to_json(const SimConfig& cfg) { return config_to_j(cfg).dump(2); }

}  // namespace etsim
