#pragma once

#include "etsim/sched_dynamic.hpp"
#include "etsim/sched_static.hpp"

namespace etsim {

struct SimConfig {
    int num_sms = 4;
    Int notify_cost = 0;         // ticks per NOTIFY (atomic decrement lands at its end)
    Int pop_cost = 0;            // ticks per ready-queue pop
    Int push_cost_per_task = 0;  // ticks per pushed consumer
    Int poll_quantum = 1;        // blocked waits re-check the counter every q ticks
    Int seed = 0;                // drives the duration models
    Int step_limit = 50'000'000; // processed-event backstop against runaways
    bool enable_prefetch = true; // false: prefetch time is charged serially before exec
};

// Executes the statically scheduled kernel at the given binding. Queue
// selection (next-larger sampled shape) and shape/extent masking happen here;
// masked tasks run their event instructions with zero exec time. The
// realization is optional and supplies runtime extents and skewed durations.
Trace simulate(const StaticMegakernel& k, const ShapeBinding& binding,
               const RoutingRealization* realization, const SimConfig& cfg);

// Executes the dynamically scheduled kernel: centralized FIFO ready queues
// (one per resource class), idle resources popping in ascending index order,
// consumers pushed on counter zero (or producer dispatch under early push).
Trace simulate(const DynamicMegakernel& k, const ShapeBinding& binding,
               const RoutingRealization* realization, const SimConfig& cfg);

// Unfused reference: one stage per call, stages separated by full barriers,
// tasks inside a stage greedily scheduled over the same resources with no
// event or queue overheads.
Trace simulate_barrier_baseline(const GraphFunction& g, const ShapeBinding& binding,
                                const RoutingRealization* realization, const SimConfig& cfg);

}  // namespace etsim
