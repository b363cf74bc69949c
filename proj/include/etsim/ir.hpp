#pragma once

#include <optional>
#include <vector>

#include "etsim/symexpr.hpp"

namespace etsim {

enum class Resource { SM, DMA };

// Seeded integer duration model attached to device functions. Task identity
// (call index + coordinates) keys the random draws, so a task's duration does
// not depend on padding or scheduling. Table indexes the task's flat row-major
// coordinate modulo the table length.
struct DurationModel {
    enum class Kind { Constant, Table, Uniform, SkewedByGroup };
    Kind kind = Kind::Constant;
    Int value = 1;                 // Constant
    std::vector<Int> table;        // Table
    Int lo = 1, hi = 1;            // Uniform: inclusive bounds
    Int base = 1;                  // SkewedByGroup: duration for cold groups
    Int factor = 1;                //   multiplier for the hot group
    std::string group_indptr;      //   runtime tensor assigning coords to groups
    Int hot_group = 0;

    static DurationModel constant(Int v);
    static DurationModel table_of(std::vector<Int> values);
    static DurationModel uniform(Int lo, Int hi);
    static DurationModel skewed(Int base, Int factor, std::string indptr, Int hot_group);
};

struct DeviceFunctionDecl {
    std::string name;
    std::vector<ExprPtr> grid;       // default launch grid; calls may specialize
    Resource resource = Resource::SM;
    std::string duration;            // duration model id; empty = unit duration
    std::string prefetch;            // optional prefetch duration model id
};

struct EventTensorDecl {
    std::string name;
    std::vector<ExprPtr> shape;
    bool data_dependent = false;  // counts known only at runtime
    std::string counts_tensor;    // data-dependent: runtime tensor holding counts
    std::string writer;           // data-dependent: device function producing them
};

enum class TensorRole { Routing, Counts, Indptr };

struct RuntimeTensorDecl {
    std::string name;
    std::vector<ExprPtr> shape;
    TensorRole role = TensorRole::Routing;
    std::string writer;  // device function whose tasks write this tensor
};

enum class MapKind {
    StaticMap,            // affine-ish index map from task coords to event coords
    DataDependentNotify,  // event index read from a routing tensor at runtime
    RangeTrigger          // event i covers tasks [indptr[i], indptr[i+1])
};

struct EdgeSpec {
    std::string event;
    MapKind kind = MapKind::StaticMap;
    std::vector<ExprPtr> map;    // StaticMap: one expr per event dim, over t0..tN
    std::string routing_tensor;  // DataDependentNotify
    std::string indptr_tensor;   // RangeTrigger
};

struct CallDevice {
    std::string fn;
    std::vector<ExprPtr> grid;    // empty = use the decl's grid
    std::vector<EdgeSpec> in_edges;
    std::vector<EdgeSpec> out_edges;
    std::string extent_from;      // indptr tensor whose last entry is the
                                  // runtime task count (grid is the worst case)
};

struct GraphFunction {
    std::vector<std::string> symbols;
    std::string size_symbol;  // distinguished symbol shape sampling ranges over
    std::vector<DeviceFunctionDecl> device_functions;
    std::vector<EventTensorDecl> event_tensors;
    std::vector<RuntimeTensorDecl> runtime_tensors;
    std::vector<CallDevice> calls;
    std::map<std::string, DurationModel> duration_models;

    const DeviceFunctionDecl* find_fn(const std::string& name) const;
    int event_index(const std::string& name) const;     // -1 if absent
    int runtime_index(const std::string& name) const;   // -1 if absent
    const std::vector<ExprPtr>& call_grid(const CallDevice& c) const;
};

// Structural validation; returns human-readable diagnostics (empty = valid).
// Checks name resolution, map arities, symbol closure, edge-kind/tensor-role
// agreement, DMA purity, and program-order feed-forwardness (an in-edge may
// not name an event tensor written only by later calls; same-call chains are
// legal and checked element-wise at instantiation).
std::vector<std::string> validate_graph(const GraphFunction& g);

struct GraphSummary {
    int num_calls = 0;
    int num_event_tensors = 0;
    int num_runtime_tensors = 0;
    bool has_data_dependent = false;
    std::set<std::string> symbols;
};

GraphSummary summarize_graph(const GraphFunction& g);

}  // namespace etsim
