#pragma once

#include <optional>
#include <vector>

#include "etsim/symexpr.hpp"

namespace etsim {

struct Interval {
    Int start = 0;
    Int end = 0;
    Int length() const { return end - start; }
};

// One simulated task occurrence. Identity for cross-checking against a
// materialized graph is (call, coord); noop marks shape- or extent-masked
// padding tasks that executed only their event instructions.
struct TaskRecord {
    int task_id = -1;
    int call = 0;
    std::vector<Int> coord;
    int resource = 0;  // 0..num_sms-1 are SMs, num_sms is the DMA channel
    bool noop = false;
    std::optional<Interval> pop;
    std::optional<Interval> prefetch;
    std::vector<Interval> waits;     // one per in-edge wait, blocking or not
    Interval exec{0, 0};
    std::vector<Interval> notifies;  // one per out-edge notify
    std::vector<Interval> pushes;    // ready-queue pushes charged to this SM
};

struct SchedEvent {
    enum class Kind { Push, Pop };
    Kind kind = Kind::Push;
    Int time = 0;
    int task_id = -1;
    int resource = -1;  // pusher / popper; -1 for the initial seeding pushes
};

struct Trace {
    std::string mode;  // "static" | "dynamic" | "barrier"
    int num_sms = 0;
    bool has_dma = false;
    Int seed = 0;
    ShapeBinding binding;
    Int makespan = 0;
    std::vector<TaskRecord> tasks;
    std::vector<SchedEvent> sched_events;
    std::vector<Int> empty_polls;    // per resource
    std::vector<Int> final_counters;

    int num_resources() const { return num_sms + (has_dma ? 1 : 0); }
    std::string resource_name(int r) const;
};

// Simulation-time failures (deadlock, counter underflow, step-limit blowup).
// The CLI maps these to exit code 2.
struct SimError : Error {
    enum class Kind { Deadlock, CounterUnderflow, StepLimit };
    Kind sim_kind;
    std::vector<std::string> blocked;  // human-readable blocked-task summaries
    SimError(Kind k, const std::string& msg, std::vector<std::string> blocked_tasks = {})
        : Error(msg), sim_kind(k), blocked(std::move(blocked_tasks)) {}
};

}  // namespace etsim
