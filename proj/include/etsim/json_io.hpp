#pragma once

#include <optional>
#include <string>

#include "etsim/metrics.hpp"
#include "etsim/sched_dynamic.hpp"
#include "etsim/sched_static.hpp"
#include "etsim/simulate.hpp"
#include "etsim/workloads.hpp"

namespace etsim {

// Graph template serialization. The JSON spec form mirrors the in-memory
// structures: symbols, duration models, device functions, event and runtime
// tensors, and the call list with index-map / routed / range-triggered edges.
// Optional blocks: "sim" (default SimConfig overrides) and "realization_gen"
// (mixture parameters used to draw a routing realization from a seed).
std::string graph_to_json(const GraphFunction& g, int indent = 2);
GraphFunction graph_from_json(const std::string& text);

// Optional blocks carried alongside a graph spec.
std::optional<SimConfig> sim_config_from_spec(const std::string& text);
std::optional<MoEParams> realization_gen_from_spec(const std::string& text);
std::string attach_realization_gen(const std::string& graph_json, const MoEParams& p);

// Compiled-kernel serialization ("format": "megakernel", "mode": static or
// dynamic). A loaded kernel holds exactly one of the two forms.
std::string kernel_to_json(const StaticMegakernel& k, int indent = 2);
std::string kernel_to_json(const DynamicMegakernel& k, int indent = 2);

struct LoadedKernel {
    std::string mode;
    std::optional<StaticMegakernel> static_kernel;
    std::optional<DynamicMegakernel> dynamic_kernel;
    std::optional<MoEParams> realization_gen;
    std::optional<SimConfig> sim_defaults;
};
LoadedKernel kernel_from_json(const std::string& text);
std::string kernel_to_json(const LoadedKernel& k, int indent = 2);

// Routing realization files: {"tensors": {name: [ints...]}}.
std::string realization_to_json(const RoutingRealization& r, int indent = 2);
RoutingRealization realization_from_json(const std::string& text);

// Run reports: label, mode, binding, seed, effective config and metrics.
std::string report_to_json(const std::string& label, const Trace& t, const TraceMetrics& m,
                           const SimConfig& cfg, int indent = 2);
LabelledRun report_from_json(const std::string& text);

std::string config_to_json(const SimConfig& cfg);

}  // namespace etsim
