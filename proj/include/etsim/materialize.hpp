#pragma once

#include "etsim/ir.hpp"
#include "etsim/trace.hpp"

namespace etsim {

// Concrete values for runtime tensors (routing targets, per-group counts,
// group index pointers), flattened row-major.
struct RoutingRealization {
    std::map<std::string, std::vector<Int>> tensors;

    const std::vector<Int>* find(const std::string& name) const {
        auto it = tensors.find(name);
        return it == tensors.end() ? nullptr : &it->second;
    }
};

struct Task {
    int id = 0;
    int call = 0;
    std::vector<Int> coord;
    Int flat = 0;  // row-major within the call's (runtime) grid
    Resource resource = Resource::SM;
    Int duration = 1;
    Int prefetch = 0;  // 0 = no prefetch stage
};

struct EventElement {
    int id = 0;
    int tensor = 0;  // index into GraphFunction::event_tensors
    Int flat = 0;    // row-major within the tensor's shape at this binding
    Int initial_count = 0;
};

// Fully instantiated task/event graph at one shape binding (and realization,
// when the graph has data-dependent structure).
struct MaterializedTaskGraph {
    ShapeBinding binding;
    Int seed = 0;
    std::vector<Task> tasks;
    std::vector<EventElement> events;
    std::vector<std::vector<int>> task_waits;      // task id -> event element ids (in-edge order)
    std::vector<std::vector<int>> task_notifies;   // task id -> event element ids (out-edge order)
    std::vector<std::vector<int>> event_producers; // element id -> task ids
    std::vector<std::vector<int>> event_consumers; // element id -> task ids
    std::vector<Int> tensor_offsets;               // event tensor -> first element id
    std::vector<std::vector<Int>> call_extents;    // call -> per-dim extents (worst case)
    std::vector<Int> call_task_counts;             // call -> actual task count (after extent_from)
    std::vector<int> call_first_task;              // call -> id of its first task

    int num_tasks() const { return static_cast<int>(tasks.size()); }
    int num_events() const { return static_cast<int>(events.size()); }
};

// Expands every call's grid, resolves edges into concrete producer/consumer
// links, and computes initial counts (derived: #producers; data-dependent:
// realization counts, cross-checked against producer edges). Durations and
// prefetch lengths are drawn from the decl's models with the given seed.
// Throws Error on unbound symbols, realization mismatches, or element-level
// dependency cycles.
MaterializedTaskGraph instantiate(const GraphFunction& g, const ShapeBinding& binding,
                                  const RoutingRealization* realization = nullptr, Int seed = 0);

// Longest path through the task dependency DAG, weighting each task by
// prefetch + duration (a lower bound on any schedule's makespan).
Int critical_path(const MaterializedTaskGraph& m);

// Greedy ready-list schedule onto num_sms SMs plus one DMA channel, ignoring
// all scheduling overheads; ties broken by task id. An idealized-dispatch
// upper-bound reference (no queues, no notify costs).
Int list_schedule(const MaterializedTaskGraph& m, int num_sms);

// Validates a simulated trace against the graph: every real task executes
// exactly once on its resource class, no consumer starts before all its
// producers end, and no two tasks overlap on one resource. Returns
// diagnostics; empty means the trace respects every dependency.
std::vector<std::string> check_trace(const Trace& t, const MaterializedTaskGraph& m);

// Graphviz dump of the element-level dependency structure.
std::string to_dot(const MaterializedTaskGraph& m, const GraphFunction& g);

// Duration model evaluation, shared by the materializer and the simulators.
// coord/extents give the task's position in its call's runtime grid; the
// realization supplies group indptrs for skewed models.
Int eval_duration(const DurationModel& m, Int seed, int call_index, const std::vector<Int>& coord,
                  const std::vector<Int>& extents, const RoutingRealization* realization);

Int flatten_coord(const std::vector<Int>& coord, const std::vector<Int>& extents);
std::vector<Int> unflatten_coord(Int flat, const std::vector<Int>& extents);

}  // namespace etsim
