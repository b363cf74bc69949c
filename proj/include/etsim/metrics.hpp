#pragma once

#include <string>
#include <vector>

#include "etsim/trace.hpp"

namespace etsim {

// Integer-exact time accounting for one resource. Busy covers exec, notify,
// pop, push and prefetch; spin is blocked wait time not overlapped by an
// in-flight prefetch; idle is the rest of the makespan. The three always sum
// to the makespan.
struct ResourceMetrics {
    Int busy = 0;
    Int spin = 0;
    Int idle = 0;
};

// Per-call span over the real (non-noop) task executions.
struct CallSpan {
    Int first_start = 0;
    Int last_end = 0;
    Int tasks = 0;
};

struct TraceMetrics {
    Int makespan = 0;
    Int total_busy = 0;
    Int total_spin = 0;
    Int total_idle = 0;
    double utilization = 0;  // busy share of resources * makespan
    Int real_tasks = 0;
    Int noop_tasks = 0;
    Int notifies = 0;
    Int wait_blocks = 0;  // waits that actually blocked (positive length)
    Int pushes = 0;
    Int pops = 0;
    Int empty_polls = 0;
    std::vector<ResourceMetrics> per_resource;
    std::vector<CallSpan> per_call;
};

TraceMetrics compute_metrics(const Trace& t);

// Chrome trace-event JSON (load via chrome://tracing or Perfetto): one row
// per resource, duration slices for pop/prefetch/wait/exec/notify/push and
// instant events for the scheduler pushes and pops.
std::string trace_to_chrome_json(const Trace& t);

// Flat CSV: one row per recorded interval.
std::string trace_to_csv(const Trace& t);

// Side-by-side comparison of labelled runs; speedup is relative to the
// baseline label's makespan (baseline / run).
struct LabelledRun {
    std::string label;
    TraceMetrics metrics;
};

std::string format_comparison(const std::vector<LabelledRun>& runs, const std::string& baseline);

}  // namespace etsim
