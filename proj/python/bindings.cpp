// Python bindings for the event-tensor compiler and simulator. The surface
// mirrors the CLI: build or load a graph, lower it statically or dynamically,
// simulate at a shape binding, and inspect the trace and its metrics.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "etsim/json_io.hpp"

namespace py = pybind11;
using namespace etsim;

namespace {

RoutingRealization realization_from_dict(const py::dict& d) {
    RoutingRealization r;
    for (auto item : d)
        r.tensors[item.first.cast<std::string>()] = item.second.cast<std::vector<Int>>();
    return r;
}

py::dict realization_to_dict(const RoutingRealization& r) {
    py::dict d;
    for (const auto& [name, values] : r.tensors) d[py::str(name)] = values;
    return d;
}

std::optional<RoutingRealization> opt_realization(const py::object& routing) {
    if (routing.is_none()) return std::nullopt;
    return realization_from_dict(routing.cast<py::dict>());
}

SimConfig make_config(int num_sms, Int notify_cost, Int pop_cost, Int push_cost,
                      Int poll_quantum, Int seed, Int step_limit, bool prefetch) {
    SimConfig cfg;
    cfg.num_sms = num_sms;
    cfg.notify_cost = notify_cost;
    cfg.pop_cost = pop_cost;
    cfg.push_cost_per_task = push_cost;
    cfg.poll_quantum = poll_quantum;
    cfg.seed = seed;
    cfg.step_limit = step_limit;
    cfg.enable_prefetch = prefetch;
    return cfg;
}

py::dict metrics_to_dict(const TraceMetrics& tm) {
    py::dict d;
    d["makespan"] = tm.makespan;
    d["total_busy"] = tm.total_busy;
    d["total_spin"] = tm.total_spin;
    d["total_idle"] = tm.total_idle;
    d["utilization"] = tm.utilization;
    d["real_tasks"] = tm.real_tasks;
    d["noop_tasks"] = tm.noop_tasks;
    d["notifies"] = tm.notifies;
    d["wait_blocks"] = tm.wait_blocks;
    d["pushes"] = tm.pushes;
    d["pops"] = tm.pops;
    d["empty_polls"] = tm.empty_polls;
    py::list per_resource;
    for (const auto& r : tm.per_resource) {
        py::dict rd;
        rd["busy"] = r.busy;
        rd["spin"] = r.spin;
        rd["idle"] = r.idle;
        per_resource.append(rd);
    }
    d["per_resource"] = per_resource;
    py::list per_call;
    for (const auto& span : tm.per_call) {
        py::dict cd;
        cd["first_start"] = span.first_start;
        cd["last_end"] = span.last_end;
        cd["tasks"] = span.tasks;
        per_call.append(cd);
    }
    d["per_call"] = per_call;
    return d;
}

MoEParams moe_params(Int tokens, Int experts, Int top_k, Int tile_size, double hot_fraction,
                     Int hot_expert) {
    MoEParams p;
    p.tokens = tokens;
    p.experts = experts;
    p.top_k = top_k;
    p.tile_size = tile_size;
    p.hot_fraction = hot_fraction;
    p.hot_expert = hot_expert;
    return p;
}

}  // namespace

PYBIND11_MODULE(_etsim, m) {
    m.doc() = "Event-tensor megakernel compiler and deterministic multi-SM simulator";

    static py::exception<Error> graph_error(m, "GraphError");
    static py::exception<SimError> sim_error(m, "SimulationError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const SimError& e) {
            py::set_error(sim_error, e.what());
        } catch (const Error& e) {
            py::set_error(graph_error, e.what());
        }
    });

    py::class_<MaterializedTaskGraph>(m, "Materialized")
        .def_property_readonly("num_tasks", &MaterializedTaskGraph::num_tasks)
        .def_property_readonly("num_events", &MaterializedTaskGraph::num_events)
        .def_property_readonly("binding",
                               [](const MaterializedTaskGraph& mg) { return mg.binding; })
        .def_property_readonly("call_task_counts",
                               [](const MaterializedTaskGraph& mg) { return mg.call_task_counts; })
        .def_property_readonly("initial_counts",
                               [](const MaterializedTaskGraph& mg) {
                                   std::vector<Int> counts;
                                   for (const auto& e : mg.events) counts.push_back(e.initial_count);
                                   return counts;
                               })
        .def("critical_path", [](const MaterializedTaskGraph& mg) { return critical_path(mg); })
        .def("list_schedule",
             [](const MaterializedTaskGraph& mg, int num_sms) { return list_schedule(mg, num_sms); },
             py::arg("num_sms"))
        .def("check", [](const MaterializedTaskGraph& mg, const Trace& t) { return check_trace(t, mg); },
             py::arg("trace"), "Dependency diagnostics for a trace; empty means clean.");

    py::class_<Trace>(m, "Trace")
        .def_property_readonly("mode", [](const Trace& t) { return t.mode; })
        .def_property_readonly("makespan", [](const Trace& t) { return t.makespan; })
        .def_property_readonly("seed", [](const Trace& t) { return t.seed; })
        .def_property_readonly("num_sms", [](const Trace& t) { return t.num_sms; })
        .def_property_readonly("binding", [](const Trace& t) { return t.binding; })
        .def_property_readonly("final_counters", [](const Trace& t) { return t.final_counters; })
        .def_property_readonly("empty_polls", [](const Trace& t) { return t.empty_polls; })
        .def_property_readonly("num_records",
                               [](const Trace& t) { return static_cast<Int>(t.tasks.size()); })
        .def_property_readonly("noop_records",
                               [](const Trace& t) {
                                   Int n = 0;
                                   for (const auto& r : t.tasks) n += r.noop ? 1 : 0;
                                   return n;
                               })
        .def("to_chrome_json", [](const Trace& t) { return trace_to_chrome_json(t); })
        .def("to_csv", [](const Trace& t) { return trace_to_csv(t); })
        .def("__repr__", [](const Trace& t) {
            return "<Trace mode=" + t.mode + " makespan=" + std::to_string(t.makespan) + ">";
        });

    py::class_<GraphFunction>(m, "Graph")
        .def("validate", &validate_graph)
        .def("to_json", [](const GraphFunction& g) { return graph_to_json(g); })
        .def_static("from_json", [](const std::string& text) { return graph_from_json(text); },
                    py::arg("text"))
        .def("summary",
             [](const GraphFunction& g) {
                 auto s = summarize_graph(g);
                 py::dict d;
                 d["num_calls"] = s.num_calls;
                 d["num_event_tensors"] = s.num_event_tensors;
                 d["num_runtime_tensors"] = s.num_runtime_tensors;
                 d["has_data_dependent"] = s.has_data_dependent;
                 d["symbols"] = s.symbols;
                 return d;
             })
        .def("instantiate",
             [](const GraphFunction& g, const ShapeBinding& binding, const py::object& routing,
                Int seed) {
                 auto real = opt_realization(routing);
                 return instantiate(g, binding, real ? &*real : nullptr, seed);
             },
             py::arg("binding") = ShapeBinding{}, py::arg("routing") = py::none(),
             py::arg("seed") = 0)
        .def("__repr__", [](const GraphFunction& g) {
            auto s = summarize_graph(g);
            return "<Graph calls=" + std::to_string(s.num_calls) +
                   " events=" + std::to_string(s.num_event_tensors) + ">";
        });

    py::class_<StaticMegakernel>(m, "StaticKernel")
        .def_property_readonly("num_sms", [](const StaticMegakernel& k) { return k.num_sms; })
        .def_property_readonly("rewritten", [](const StaticMegakernel& k) { return k.rewritten; })
        .def_property_readonly("graph", [](const StaticMegakernel& k) { return k.graph; })
        .def_property_readonly("sample_bindings",
                               [](const StaticMegakernel& k) {
                                   std::vector<ShapeBinding> out;
                                   for (const auto& s : k.samples) out.push_back(s.binding);
                                   return out;
                               })
        .def("to_json", [](const StaticMegakernel& k) { return kernel_to_json(k); })
        .def("__repr__", [](const StaticMegakernel& k) {
            return "<StaticKernel sms=" + std::to_string(k.num_sms) +
                   " samples=" + std::to_string(k.samples.size()) + ">";
        });

    py::class_<DynamicMegakernel>(m, "DynamicKernel")
        .def_property_readonly("early_push", [](const DynamicMegakernel& k) { return k.early_push; })
        .def_property_readonly("graph", [](const DynamicMegakernel& k) { return k.graph; })
        .def("to_json", [](const DynamicMegakernel& k) { return kernel_to_json(k); })
        .def("__repr__", [](const DynamicMegakernel& k) {
            return std::string("<DynamicKernel early_push=") + (k.early_push ? "True" : "False") +
                   ">";
        });

    // Workload generators.
    m.def("splitk_rowsum", &splitk_rowsum);
    m.def("gemm_reduce_scatter",
          [](const std::string& mm_tiles, int fan_in) {
              return gemm_reduce_scatter(mm_tiles, fan_in);
          },
          py::arg("mm_tiles"), py::arg("fan_in"));
    m.def("all_gather_gemm", &all_gather_gemm, py::arg("chunks"), py::arg("tiles_per_chunk"));
    m.def("moe_layer",
          [](Int tokens, Int experts, Int top_k, Int tile_size, double hot_fraction,
             Int hot_expert) {
              return moe_layer(moe_params(tokens, experts, top_k, tile_size, hot_fraction,
                                          hot_expert));
          },
          py::arg("tokens") = 8, py::arg("experts") = 4, py::arg("top_k") = 1,
          py::arg("tile_size") = 1, py::arg("hot_fraction") = 0.0, py::arg("hot_expert") = 0);
    m.def("moe_realization",
          [](Int tokens, Int experts, Int top_k, Int tile_size, double hot_fraction,
             Int hot_expert, Int seed) {
              return realization_to_dict(moe_realization(
                  moe_params(tokens, experts, top_k, tile_size, hot_fraction, hot_expert), seed));
          },
          py::arg("tokens") = 8, py::arg("experts") = 4, py::arg("top_k") = 1,
          py::arg("tile_size") = 1, py::arg("hot_fraction") = 0.0, py::arg("hot_expert") = 0,
          py::arg("seed") = 0);
    m.def("random_dag", &random_dag, py::arg("nodes"), py::arg("edges"), py::arg("seed") = 0);

    // Lowering.
    m.def("worst_case_rewrite", &worst_case_rewrite, py::arg("graph"));
    m.def("lower_static", &lower_static, py::arg("graph"), py::arg("samples"),
          py::arg("num_sms") = 4);
    m.def("lower_dynamic", &lower_dynamic, py::arg("graph"), py::arg("early_push") = false);
    m.def("enable_early_push", &enable_early_push, py::arg("kernel"));
    m.def("load_kernel",
          [](const std::string& text) -> py::object {
              LoadedKernel k = kernel_from_json(text);
              if (k.static_kernel) return py::cast(*k.static_kernel);
              return py::cast(*k.dynamic_kernel);
          },
          py::arg("text"), "Parse a kernel file into a StaticKernel or DynamicKernel.");

    // Simulation. One entry point per kernel flavor plus the unfused baseline.
    m.def("simulate",
          [](const StaticMegakernel& k, const ShapeBinding& binding, const py::object& routing,
             int num_sms, Int notify_cost, Int pop_cost, Int push_cost, Int poll_quantum, Int seed,
             Int step_limit, bool prefetch) {
              auto real = opt_realization(routing);
              return simulate(k, binding, real ? &*real : nullptr,
                              make_config(num_sms > 0 ? num_sms : k.num_sms, notify_cost, pop_cost,
                                          push_cost, poll_quantum, seed, step_limit, prefetch));
          },
          py::arg("kernel"), py::arg("binding") = ShapeBinding{}, py::arg("routing") = py::none(),
          py::arg("num_sms") = 0, py::arg("notify_cost") = 0, py::arg("pop_cost") = 0,
          py::arg("push_cost") = 0, py::arg("poll_quantum") = 1, py::arg("seed") = 0,
          py::arg("step_limit") = 50'000'000, py::arg("prefetch") = true);
    m.def("simulate",
          [](const DynamicMegakernel& k, const ShapeBinding& binding, const py::object& routing,
             int num_sms, Int notify_cost, Int pop_cost, Int push_cost, Int poll_quantum, Int seed,
             Int step_limit, bool prefetch) {
              auto real = opt_realization(routing);
              return simulate(k, binding, real ? &*real : nullptr,
                              make_config(num_sms > 0 ? num_sms : 4, notify_cost, pop_cost,
                                          push_cost, poll_quantum, seed, step_limit, prefetch));
          },
          py::arg("kernel"), py::arg("binding") = ShapeBinding{}, py::arg("routing") = py::none(),
          py::arg("num_sms") = 0, py::arg("notify_cost") = 0, py::arg("pop_cost") = 0,
          py::arg("push_cost") = 0, py::arg("poll_quantum") = 1, py::arg("seed") = 0,
          py::arg("step_limit") = 50'000'000, py::arg("prefetch") = true);
    m.def("simulate_barrier",
          [](const GraphFunction& g, const ShapeBinding& binding, const py::object& routing,
             int num_sms, Int seed) {
              auto real = opt_realization(routing);
              return simulate_barrier_baseline(g, binding, real ? &*real : nullptr,
                                               make_config(num_sms, 0, 0, 0, 1, seed, 50'000'000,
                                                           true));
          },
          py::arg("graph"), py::arg("binding") = ShapeBinding{}, py::arg("routing") = py::none(),
          py::arg("num_sms") = 4, py::arg("seed") = 0);

    m.def("metrics", [](const Trace& t) { return metrics_to_dict(compute_metrics(t)); },
          py::arg("trace"), "Busy/spin/idle partition, queue traffic and per-call spans.");
}
