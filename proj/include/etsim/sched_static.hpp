#pragma once

#include "etsim/materialize.hpp"

namespace etsim {

// One task's slot in a persistent-kernel queue: the instruction sequence is
// [PREFETCH?] [WAIT counter]* EXEC [NOTIFY counter]* with counter ids resolved
// against the sample's event layout.
struct QueueTask {
    int id = 0;  // task id within the sample's materialization
    int call = 0;
    std::vector<Int> coord;
    Int flat = 0;
    bool has_prefetch = false;
    std::vector<int> waits;
    std::vector<int> notifies;
};

// Host-built schedule for one sampled shape binding.
struct SampledSchedule {
    ShapeBinding binding;
    Int size_value = 0;  // the size symbol's value (0 when there is none)
    std::vector<std::vector<QueueTask>> sm_queues;
    std::vector<QueueTask> dma_queue;
    std::vector<Int> initial_counts;  // per event element
    std::vector<Int> tensor_offsets;  // event tensor -> first element id

    Int num_tasks() const;
};

struct StaticMegakernel {
    GraphFunction graph;  // worst-case-rewritten when the input was data-dependent
    bool rewritten = false;
    int num_sms = 1;
    std::vector<SampledSchedule> samples;  // sorted by size_value
};

// Rewrites every data-dependent event tensor into a rank-1 single-element
// barrier with derived counts: routed notifies and range triggers collapse to
// element 0, so the worst-case grid runs after all producers finish. Keeps
// runtime tensors and extent_from so simulation can mask unused padding.
// Idempotent; output passes validate_graph.
GraphFunction worst_case_rewrite(const GraphFunction& g);

// Builds per-SM round-robin queues from the global topological order (program
// order, then row-major within each call) for every sampled binding. The
// graph must be fully static; pass data-dependent graphs through
// worst_case_rewrite first.
StaticMegakernel lower_static(const GraphFunction& g, const std::vector<ShapeBinding>& samples,
                              int num_sms);

struct SelectedQueues {
    int sample_index = 0;
    const SampledSchedule* sample = nullptr;
    std::vector<uint8_t> masked;  // by task id; masked tasks run wait/notify only
    Int real_tasks = 0;
};

// Picks the smallest sampled binding covering the actual one (componentwise on
// all symbols) and marks tasks outside the actual grid extents as no-ops.
// Throws Error when the actual binding exceeds every sample.
SelectedQueues select_queues(const StaticMegakernel& k, const ShapeBinding& actual);

}  // namespace etsim
