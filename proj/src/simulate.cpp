#include "etsim/simulate.hpp"

#include <algorithm>
#include <deque>
#include <queue>

namespace etsim {

namespace {

Int ceil_div(Int a, Int b) { return (a + b - 1) / b; }

// Heap events are ordered by (time, acting resource, insertion sequence):
// simultaneous atomics serialize by SM index, then instruction order.
struct HeapEvent {
    Int time = 0;
    int actor = -1;
    uint64_t seq = 0;
    int kind = 0;
    int a = 0;  // payload: resource / event element / task id
    bool operator>(const HeapEvent& o) const {
        if (time != o.time) return time > o.time;
        if (actor != o.actor) return actor > o.actor;
        return seq > o.seq;
    }
};

enum EventKind {
    kAdvance = 0,      // resume a resource's instruction stream
    kCounterDec = 1,   // apply a notify's decrement (static engine)
    kQueueInsert = 2,  // a pushed task becomes visible (dynamic engine)
    kPopAttempt = 3,   // an idle resource checks its ready queue (dynamic)
};

struct EventHeap {
    std::priority_queue<HeapEvent, std::vector<HeapEvent>, std::greater<>> q;
    uint64_t seq = 0;
    void push(Int time, int actor, int kind, int a = 0) { q.push({time, actor, seq++, kind, a}); }
    bool empty() const { return q.empty(); }
    HeapEvent pop() {
        HeapEvent e = q.top();
        q.pop();
        return e;
    }
};

struct DurationSource {
    const GraphFunction* g = nullptr;
    const RoutingRealization* realization = nullptr;
    Int seed = 0;
    std::vector<std::vector<Int>> actual_extents;  // per call, at the run binding

    void init(const GraphFunction& graph, const ShapeBinding& binding,
              const RoutingRealization* r, Int s) {
        g = &graph;
        realization = r;
        seed = s;
        for (const auto& c : graph.calls) {
            std::vector<Int> ext;
            for (const auto& d : graph.call_grid(c)) ext.push_back(eval_expr(d, binding));
            actual_extents.push_back(std::move(ext));
        }
    }
    Int duration(int call, const std::vector<Int>& coord) const {
        const auto* fn = g->find_fn(g->calls[call].fn);
        if (!fn || fn->duration.empty()) return 1;
        return eval_duration(g->duration_models.at(fn->duration), seed, call, coord,
                             actual_extents[call], realization);
    }
    Int prefetch(int call, const std::vector<Int>& coord) const {
        const auto* fn = g->find_fn(g->calls[call].fn);
        if (!fn || fn->prefetch.empty()) return 0;
        return eval_duration(g->duration_models.at(fn->prefetch), seed, call, coord,
                             actual_extents[call], realization);
    }
};

std::string task_label(const GraphFunction& g, int call, const std::vector<Int>& coord) {
    std::string s = g.calls[call].fn + "(";
    for (size_t i = 0; i < coord.size(); ++i) s += (i ? "," : "") + std::to_string(coord[i]);
    return s + ")";
}

// ---------------------------------------------------------------------------
// Static engine: fixed per-resource queues, spin-wait on counters, notify
// decrements land at the end of each NOTIFY slot.

class StaticEngine {
public:
    StaticEngine(const StaticMegakernel& k, const ShapeBinding& binding,
                 const RoutingRealization* realization, const SimConfig& cfg)
        : k_(k), cfg_(cfg) {
        if (cfg.num_sms != k.num_sms)
            throw Error("kernel was compiled for " + std::to_string(k.num_sms) + " SMs, run asked for " +
                        std::to_string(cfg.num_sms));
        sel_ = select_queues(k, binding);
        durs_.init(k.graph, binding, realization, cfg.seed);

        // Runtime-extent masking: tasks of extent_from calls whose position in
        // the actual grid falls beyond the realized total are no-ops too.
        runtime_extent_.assign(k.graph.calls.size(), -1);
        if (realization)
            for (size_t ci = 0; ci < k.graph.calls.size(); ++ci) {
                const auto& from = k.graph.calls[ci].extent_from;
                if (from.empty()) continue;
                const auto* indptr = realization->find(from);
                if (!indptr || indptr->empty()) continue;
                runtime_extent_[ci] = indptr->back();
            }

        trace_.mode = "static";
        trace_.num_sms = cfg.num_sms;
        trace_.has_dma = !sel_.sample->dma_queue.empty();
        trace_.seed = cfg.seed;
        trace_.binding = binding;
        trace_.empty_polls.assign(cfg.num_sms + (trace_.has_dma ? 1 : 0), 0);

        counters_ = sel_.sample->initial_counts;
        waiters_.resize(counters_.size());

        res_.resize(cfg.num_sms + (trace_.has_dma ? 1 : 0));
        for (int r = 0; r < cfg.num_sms; ++r)
            for (const auto& t : sel_.sample->sm_queues[r]) res_[r].queue.push_back(&t);
        if (trace_.has_dma)
            for (const auto& t : sel_.sample->dma_queue) res_[cfg.num_sms].queue.push_back(&t);
    }

    Trace run() {
        for (size_t r = 0; r < res_.size(); ++r) heap_.push(0, static_cast<int>(r), kAdvance, static_cast<int>(r));
        Int steps = 0;
        while (!heap_.empty()) {
            if (++steps > cfg_.step_limit)
                throw SimError(SimError::Kind::StepLimit,
                               "step limit " + std::to_string(cfg_.step_limit) + " exceeded");
            HeapEvent e = heap_.pop();
            if (e.kind == kAdvance)
                advance(e.a, e.time);
            else
                apply_dec(e.a, e.time);
        }
        size_t finished = 0;
        for (const auto& r : res_)
            if (r.next >= r.queue.size()) ++finished;
        if (finished != res_.size()) {
            std::vector<std::string> blocked;
            for (size_t r = 0; r < res_.size(); ++r) {
                const auto& st = res_[r];
                if (st.next >= st.queue.size()) continue;
                const QueueTask* qt = st.queue[st.in_flight ? st.next - 1 : st.next];
                std::string what = trace_.resource_name(static_cast<int>(r)) + " blocked in " +
                                   task_label(k_.graph, qt->call, qt->coord);
                if (st.in_flight && st.block_start >= 0 && st.wi < qt->waits.size())
                    what += " waiting on counter " + std::to_string(qt->waits[st.wi]) + " (value " +
                            std::to_string(counters_[qt->waits[st.wi]]) + ")";
                blocked.push_back(what);
            }
            throw SimError(SimError::Kind::Deadlock,
                           "deadlock: " + std::to_string(blocked.size()) + " resource(s) blocked; first: " +
                               blocked.front(),
                           blocked);
        }
        trace_.makespan = last_;
        trace_.final_counters = counters_;
        return trace_;
    }

private:
    enum Phase { PhaseStart, PhaseWait, PhaseNotify };

    struct Res {
        std::vector<const QueueTask*> queue;
        size_t next = 0;
        bool in_flight = false;
        Phase phase = PhaseStart;
        size_t wi = 0;
        Int prefetch_done = 0;
        Int serial_prefetch = 0;
        Int duration = 0;
        Int block_start = -1;
        TaskRecord rec;
    };

    void advance(int r, Int t) {
        Res& st = res_[static_cast<size_t>(r)];
        while (true) {
            if (!st.in_flight) {
                if (st.next >= st.queue.size()) return;
                const QueueTask* qt = st.queue[st.next++];
                st.in_flight = true;
                st.phase = PhaseWait;
                st.wi = 0;
                st.block_start = -1;
                st.rec = TaskRecord{};
                st.rec.task_id = qt->id;
                st.rec.call = qt->call;
                st.rec.coord = qt->coord;
                st.rec.resource = r;
                bool masked = sel_.masked[static_cast<size_t>(qt->id)] != 0;
                if (!masked && runtime_extent_[qt->call] >= 0) {
                    Int aflat = flatten_coord(qt->coord, durs_.actual_extents[qt->call]);
                    if (aflat >= runtime_extent_[qt->call]) masked = true;
                }
                st.rec.noop = masked;
                st.duration = masked ? 0 : durs_.duration(qt->call, qt->coord);
                Int pf = masked ? 0 : durs_.prefetch(qt->call, qt->coord);
                st.prefetch_done = t;
                st.serial_prefetch = 0;
                if (pf > 0) {
                    if (cfg_.enable_prefetch) {
                        st.rec.prefetch = Interval{t, t + pf};
                        st.prefetch_done = t + pf;
                        note(t + pf);
                    } else {
                        st.serial_prefetch = pf;
                    }
                }
            }
            const QueueTask* qt = st.queue[st.next - 1];
            if (st.phase == PhaseWait) {
                bool blocked = false;
                while (st.wi < qt->waits.size()) {
                    int el = qt->waits[st.wi];
                    if (counters_[static_cast<size_t>(el)] == 0) {
                        Int start = st.block_start >= 0 ? st.block_start : t;
                        st.rec.waits.push_back({start, t});
                        note(t);
                        st.block_start = -1;
                        ++st.wi;
                    } else {
                        if (st.block_start < 0) st.block_start = t;
                        waiters_[static_cast<size_t>(el)].push_back({r, st.block_start});
                        blocked = true;
                        break;
                    }
                }
                if (blocked) return;
                // EXEC: starts when waits and (overlapped) prefetch are done.
                Int start = std::max(t, st.prefetch_done);
                if (st.serial_prefetch > 0) {
                    st.rec.prefetch = Interval{start, start + st.serial_prefetch};
                    start += st.serial_prefetch;
                }
                st.rec.exec = {start, start + st.duration};
                note(st.rec.exec.end);
                st.phase = PhaseNotify;
                if (st.rec.exec.end > t) {
                    heap_.push(st.rec.exec.end, r, kAdvance, r);
                    return;
                }
                t = st.rec.exec.end;
            }
            if (st.phase == PhaseNotify) {
                Int at = t;
                for (int el : qt->notifies) {
                    st.rec.notifies.push_back({at, at + cfg_.notify_cost});
                    heap_.push(at + cfg_.notify_cost, r, kCounterDec, el);
                    at += cfg_.notify_cost;
                }
                note(at);
                trace_.tasks.push_back(std::move(st.rec));
                st.in_flight = false;
                st.phase = PhaseStart;
                if (at > t) {
                    heap_.push(at, r, kAdvance, r);
                    return;
                }
            }
        }
    }

    void apply_dec(int el, Int t) {
        Int& v = counters_[static_cast<size_t>(el)];
        if (--v < 0)
            throw SimError(SimError::Kind::CounterUnderflow,
                           "counter " + std::to_string(el) + " went negative at t=" + std::to_string(t));
        if (v == 0) {
            for (auto [r, tb] : waiters_[static_cast<size_t>(el)]) {
                Int wake = tb + ceil_div(t - tb, cfg_.poll_quantum) * cfg_.poll_quantum;
                heap_.push(wake, r, kAdvance, r);
            }
            waiters_[static_cast<size_t>(el)].clear();
        }
    }

    void note(Int end) { last_ = std::max(last_, end); }

    const StaticMegakernel& k_;
    const SimConfig& cfg_;
    SelectedQueues sel_;
    DurationSource durs_;
    std::vector<Int> runtime_extent_;
    std::vector<Int> counters_;
    std::vector<std::vector<std::pair<int, Int>>> waiters_;
    std::vector<Res> res_;
    EventHeap heap_;
    Trace trace_;
    Int last_ = 0;
};

// ---------------------------------------------------------------------------
// Dynamic engine: centralized FIFO ready queues per resource class.

class DynamicEngine {
public:
    DynamicEngine(const DynamicMegakernel& k, const ShapeBinding& binding,
                  const RoutingRealization* realization, const SimConfig& cfg)
        : k_(k), cfg_(cfg), m_(instantiate(k.graph, binding, realization, cfg.seed)) {
        bool any_dma = false;
        for (const auto& t : m_.tasks) any_dma |= t.resource == Resource::DMA;
        trace_.mode = "dynamic";
        trace_.num_sms = cfg.num_sms;
        trace_.has_dma = any_dma;
        trace_.seed = cfg.seed;
        trace_.binding = binding;
        int nres = cfg.num_sms + (any_dma ? 1 : 0);
        trace_.empty_polls.assign(static_cast<size_t>(nres), 0);
        res_.resize(static_cast<size_t>(nres));

        counters_.reserve(m_.events.size());
        for (const auto& e : m_.events) counters_.push_back(e.initial_count);
        dispatch_ = counters_;
        waiters_.resize(counters_.size());
        fired_.assign(counters_.size(), 0);
        dispatch_fired_.assign(counters_.size(), 0);

        // Data-dependent counters become visible when their writer call's
        // last task finishes executing.
        visible_.assign(counters_.size(), 1);
        writer_remaining_.assign(k.graph.event_tensors.size(), 0);
        writer_of_call_.assign(k.graph.calls.size(), std::vector<int>{});
        for (size_t ti = 0; ti < k.graph.event_tensors.size(); ++ti) {
            const auto& decl = k.graph.event_tensors[ti];
            if (!decl.data_dependent) continue;
            int wc = -1;
            for (size_t ci = 0; ci < k.graph.calls.size(); ++ci)
                if (k.graph.calls[ci].fn == decl.writer) wc = static_cast<int>(ci);
            if (wc < 0) throw Error("event tensor '" + decl.name + "' writer is never launched");
            writer_remaining_[ti] = m_.call_task_counts[static_cast<size_t>(wc)];
            writer_of_call_[static_cast<size_t>(wc)].push_back(static_cast<int>(ti));
            Int base = m_.tensor_offsets[ti];
            Int count = (ti + 1 < m_.tensor_offsets.size() ? m_.tensor_offsets[ti + 1]
                                                           : static_cast<Int>(counters_.size())) -
                        base;
            for (Int i = 0; i < count; ++i) visible_[static_cast<size_t>(base + i)] = 0;
        }

        // Tasks are ready once every armed-in-principle wait element has
        // fired; elements that start at zero and are visible never fire.
        remaining_.assign(m_.tasks.size(), 0);
        for (const auto& t : m_.tasks)
            for (int el : m_.task_waits[t.id])
                if (counters_[static_cast<size_t>(el)] > 0 || !visible_[static_cast<size_t>(el)])
                    ++remaining_[static_cast<size_t>(t.id)];
    }

    Trace run() {
        // Host seeds the queue with the initially ready tasks in id order.
        for (const auto& t : m_.tasks)
            if (remaining_[static_cast<size_t>(t.id)] == 0) heap_.push(0, -1, kQueueInsert, t.id);
        for (size_t r = 0; r < res_.size(); ++r) {
            res_[r].wake_scheduled = true;
            heap_.push(0, static_cast<int>(r), kPopAttempt, static_cast<int>(r));
        }
        Int steps = 0;
        while (!heap_.empty()) {
            if (++steps > cfg_.step_limit)
                throw SimError(SimError::Kind::StepLimit,
                               "step limit " + std::to_string(cfg_.step_limit) + " exceeded");
            HeapEvent e = heap_.pop();
            switch (e.kind) {
                case kQueueInsert: on_insert(e.a, e.time, e.actor); break;
                case kPopAttempt: on_pop_attempt(e.a, e.time); break;
                case kAdvance: advance(e.a, e.time); break;
                default: throw Error("corrupt event");
            }
        }
        if (completed_ != m_.tasks.size()) {
            std::vector<std::string> blocked;
            for (size_t r = 0; r < res_.size(); ++r) {
                const auto& st = res_[r];
                if (st.task >= 0 && st.block_start >= 0) {
                    int el = m_.task_waits[st.task][st.wi];
                    blocked.push_back(trace_.resource_name(static_cast<int>(r)) + " blocked in " +
                                      task_label(k_.graph, m_.tasks[st.task].call, m_.tasks[st.task].coord) +
                                      " waiting on counter " + std::to_string(el) + " (value " +
                                      std::to_string(counters_[static_cast<size_t>(el)]) + ")");
                }
            }
            std::vector<uint8_t> seen(m_.tasks.size(), 0);
            for (const auto& rec : trace_.tasks)
                if (rec.task_id >= 0) seen[static_cast<size_t>(rec.task_id)] = 1;
            for (const auto& st : res_)
                if (st.task >= 0) seen[static_cast<size_t>(st.task)] = 1;
            int unready = 0;
            for (const auto& t : m_.tasks)
                if (!seen[static_cast<size_t>(t.id)]) {
                    if (++unready <= 4)
                        blocked.push_back(task_label(k_.graph, t.call, t.coord) + " never became ready");
                }
            throw SimError(SimError::Kind::Deadlock,
                           "deadlock: " + std::to_string(m_.tasks.size() - completed_) +
                               " task(s) unfinished; first: " + (blocked.empty() ? "?" : blocked.front()),
                           blocked);
        }
        trace_.makespan = last_;
        trace_.final_counters = counters_;
        return trace_;
    }

private:
    struct Res {
        bool idle = false;
        bool wake_scheduled = false;
        // In-flight task state.
        int task = -1;
        size_t wi = 0;
        size_t ni = 0;
        int pending_dec = -1;  // notify slot that ends when the next advance fires
        Int prefetch_done = 0;
        Int serial_prefetch = 0;
        Int block_start = -1;
        bool exec_done = false;
        TaskRecord rec;
    };

    bool is_dma_res(size_t r) const { return trace_.has_dma && r == static_cast<size_t>(cfg_.num_sms); }

    std::deque<int>& class_queue(size_t r) { return is_dma_res(r) ? dma_queue_ : sm_queue_; }

    void on_insert(int task, Int t, int pusher) {
        bool dma = m_.tasks[task].resource == Resource::DMA;
        (dma ? dma_queue_ : sm_queue_).push_back(task);
        trace_.sched_events.push_back({SchedEvent::Kind::Push, t, task, pusher});
        note(t);
        for (size_t r = 0; r < res_.size(); ++r) {
            if (is_dma_res(r) != dma) continue;
            if (res_[r].idle && !res_[r].wake_scheduled) {
                res_[r].wake_scheduled = true;
                heap_.push(t, static_cast<int>(r), kPopAttempt, static_cast<int>(r));
            }
        }
    }

    void on_pop_attempt(int r, Int t) {
        Res& st = res_[static_cast<size_t>(r)];
        st.wake_scheduled = false;
        if (st.task >= 0) return;  // already busy (stale wake)
        auto& q = class_queue(static_cast<size_t>(r));
        if (q.empty()) {
            ++trace_.empty_polls[static_cast<size_t>(r)];
            st.idle = true;
            return;
        }
        st.idle = false;
        int task = q.front();
        q.pop_front();
        trace_.sched_events.push_back({SchedEvent::Kind::Pop, t, task, r});

        st.task = task;
        st.wi = 0;
        st.ni = 0;
        st.block_start = -1;
        st.exec_done = false;
        st.rec = TaskRecord{};
        st.rec.task_id = task;
        st.rec.call = m_.tasks[task].call;
        st.rec.coord = m_.tasks[task].coord;
        st.rec.resource = r;
        st.rec.pop = Interval{t, t + cfg_.pop_cost};
        note(t + cfg_.pop_cost);
        Int after_pop = t + cfg_.pop_cost;
        Int pf = m_.tasks[task].prefetch;
        st.prefetch_done = after_pop;
        st.serial_prefetch = 0;
        if (pf > 0) {
            if (cfg_.enable_prefetch) {
                st.rec.prefetch = Interval{after_pop, after_pop + pf};
                st.prefetch_done = after_pop + pf;
                note(st.prefetch_done);
            } else {
                st.serial_prefetch = pf;
            }
        }
        if (after_pop > t) {
            heap_.push(after_pop, r, kAdvance, r);
        } else {
            advance(r, t);
        }
    }

    void advance(int r, Int t) {
        Res& st = res_[static_cast<size_t>(r)];
        int task = st.task;
        const auto& waits = m_.task_waits[task];
        const auto& tmpl = k_.templates[static_cast<size_t>(m_.tasks[task].call)];

        if (!st.exec_done) {
            while (st.wi < waits.size()) {
                if (!tmpl.wait_edges.empty() && !tmpl.wait_edges[st.wi]) {
                    ++st.wi;  // wait slot not armed: counter already zero by push rule
                    continue;
                }
                int el = waits[st.wi];
                if (counters_[static_cast<size_t>(el)] == 0 && visible_[static_cast<size_t>(el)]) {
                    Int start = st.block_start >= 0 ? st.block_start : t;
                    st.rec.waits.push_back({start, t});
                    note(t);
                    st.block_start = -1;
                    ++st.wi;
                } else {
                    if (st.block_start < 0) st.block_start = t;
                    waiters_[static_cast<size_t>(el)].push_back({r, st.block_start});
                    return;
                }
            }
            Int start = std::max(t, st.prefetch_done);
            if (st.serial_prefetch > 0) {
                st.rec.prefetch = Interval{start, start + st.serial_prefetch};
                start += st.serial_prefetch;
            }
            Int dur = m_.tasks[task].duration;
            st.rec.exec = {start, start + dur};
            note(st.rec.exec.end);
            st.exec_done = true;
            if (k_.early_push) on_dispatch(task, start);
            if (st.rec.exec.end > t) {
                heap_.push(st.rec.exec.end, r, kAdvance, r);
                return;
            }
            t = st.rec.exec.end;
        }

        // Notify sequence: each decrement lands at the end of its slot; a
        // resulting zero pushes the consumers from this SM before the next
        // notify begins.
        if (st.pending_dec >= 0) {
            int el = st.pending_dec;
            st.pending_dec = -1;
            t = apply_dec(el, t, r, st);
        }
        const auto& notifies = m_.task_notifies[task];
        while (st.ni < notifies.size()) {
            int el = notifies[st.ni++];
            st.rec.notifies.push_back({t, t + cfg_.notify_cost});
            note(t + cfg_.notify_cost);
            if (cfg_.notify_cost > 0) {
                st.pending_dec = el;
                heap_.push(t + cfg_.notify_cost, r, kAdvance, r);
                return;
            }
            t = apply_dec(el, t, r, st);
        }
        finish_task(r, t);
    }

    // Applies the decrement for the notify slot that just ended, handling the
    // resulting pushes on this SM's timeline. Returns the time after pushes.
    Int apply_dec(int el, Int t, int r, Res& st) {
        Int& v = counters_[static_cast<size_t>(el)];
        if (--v < 0)
            throw SimError(SimError::Kind::CounterUnderflow,
                           "counter " + std::to_string(el) + " went negative at t=" + std::to_string(t));
        if (v == 0) {
            wake_waiters(el, t);
            if (!k_.early_push) t = fire_push(el, t, r, &st);
        }
        return t;
    }

    void wake_waiters(int el, Int t) {
        for (auto [rw, tb] : waiters_[static_cast<size_t>(el)]) {
            Int wake = tb + ceil_div(t - tb, cfg_.poll_quantum) * cfg_.poll_quantum;
            heap_.push(wake, rw, kAdvance, rw);
        }
        waiters_[static_cast<size_t>(el)].clear();
    }

    // Pushes every consumer of el that became ready. With a pushing SM (st)
    // the pushes occupy its timeline; host-side pushes only delay visibility.
    // Returns the pusher's time after the pushes.
    Int fire_push(int el, Int t, int pusher, Res* st) {
        if (fired_[static_cast<size_t>(el)]) return t;
        fired_[static_cast<size_t>(el)] = 1;
        Int at = t;
        for (int c : m_.event_consumers[static_cast<size_t>(el)]) {
            if (--remaining_[static_cast<size_t>(c)] != 0) continue;
            Int vis = at + cfg_.push_cost_per_task;
            if (st) {
                st->rec.pushes.push_back({at, vis});
                note(vis);
            }
            heap_.push(vis, pusher, kQueueInsert, c);
            at = vis;
        }
        return at;
    }

    // Early push: a producer dispatches (execution starts), decrement the
    // dispatch counters; zeros push consumers without occupying the SM.
    void on_dispatch(int task, Int t) {
        Int at = t;
        for (int el : m_.task_notifies[task]) {
            Int& v = dispatch_[static_cast<size_t>(el)];
            if (--v == 0) at = fire_push_early(el, at);
        }
    }

    Int fire_push_early(int el, Int t) {
        if (dispatch_fired_[static_cast<size_t>(el)]) return t;
        dispatch_fired_[static_cast<size_t>(el)] = 1;
        Int at = t;
        for (int c : m_.event_consumers[static_cast<size_t>(el)]) {
            if (--remaining_[static_cast<size_t>(c)] != 0) continue;
            at += cfg_.push_cost_per_task;
            heap_.push(at, -1, kQueueInsert, c);
        }
        return at;
    }

    void finish_task(int r, Int t) {
        Res& st = res_[static_cast<size_t>(r)];
        int task = st.task;
        trace_.tasks.push_back(std::move(st.rec));
        st.task = -1;
        ++completed_;
        // Writer completion makes data-dependent counters visible.
        for (int ti : writer_of_call_[static_cast<size_t>(m_.tasks[task].call)])
            if (--writer_remaining_[static_cast<size_t>(ti)] == 0) reveal_tensor(ti, t);
        heap_.push(t, r, kPopAttempt, r);
    }

    void reveal_tensor(int ti, Int t) {
        Int base = m_.tensor_offsets[static_cast<size_t>(ti)];
        Int count = (static_cast<size_t>(ti) + 1 < m_.tensor_offsets.size()
                         ? m_.tensor_offsets[static_cast<size_t>(ti) + 1]
                         : static_cast<Int>(counters_.size())) -
                    base;
        for (Int i = 0; i < count; ++i) {
            size_t el = static_cast<size_t>(base + i);
            visible_[el] = 1;
            if (counters_[el] == 0) {
                wake_waiters(static_cast<int>(el), t);
                if (k_.early_push)
                    fire_push_early(static_cast<int>(el), t);
                else
                    fire_push(static_cast<int>(el), t, -1, nullptr);
            }
        }
    }

    void note(Int end) { last_ = std::max(last_, end); }

    const DynamicMegakernel& k_;
    const SimConfig& cfg_;
    MaterializedTaskGraph m_;
    std::vector<Int> counters_, dispatch_;
    std::vector<uint8_t> visible_, fired_, dispatch_fired_;
    std::vector<Int> remaining_;
    std::vector<std::vector<std::pair<int, Int>>> waiters_;
    std::vector<Int> writer_remaining_;
    std::vector<std::vector<int>> writer_of_call_;
    std::vector<Res> res_;
    std::deque<int> sm_queue_, dma_queue_;
    EventHeap heap_;
    Trace trace_;
    Int last_ = 0;
    size_t completed_ = 0;
};

}  // namespace

Trace simulate(const StaticMegakernel& k, const ShapeBinding& binding,
               const RoutingRealization* realization, const SimConfig& cfg) {
    return StaticEngine(k, binding, realization, cfg).run();
}

Trace simulate(const DynamicMegakernel& k, const ShapeBinding& binding,
               const RoutingRealization* realization, const SimConfig& cfg) {
    return DynamicEngine(k, binding, realization, cfg).run();
}

Trace simulate_barrier_baseline(const GraphFunction& g, const ShapeBinding& binding,
                                const RoutingRealization* realization, const SimConfig& cfg) {
    auto diags = validate_graph(g);
    if (!diags.empty()) throw Error("invalid graph: " + diags.front());
    auto m = instantiate(g, binding, realization, cfg.seed);

    bool any_dma = false;
    for (const auto& t : m.tasks) any_dma |= t.resource == Resource::DMA;
    Trace trace;
    trace.mode = "barrier";
    trace.num_sms = cfg.num_sms;
    trace.has_dma = any_dma;
    trace.seed = cfg.seed;
    trace.binding = binding;
    trace.empty_polls.assign(static_cast<size_t>(cfg.num_sms + (any_dma ? 1 : 0)), 0);

    Int stage_start = 0;
    for (size_t ci = 0; ci < g.calls.size(); ++ci) {
        int first = m.call_first_task[ci];
        Int count = m.call_task_counts[ci];
        if (count == 0) continue;
        // Intra-stage dependencies (same-call chains) still apply; producers
        // in earlier stages finished before the barrier.
        std::vector<Int> remaining(static_cast<size_t>(count), 0);
        for (Int f = 0; f < count; ++f)
            for (int el : m.task_waits[first + f])
                for (int p : m.event_producers[static_cast<size_t>(el)])
                    if (m.tasks[p].call == static_cast<int>(ci)) ++remaining[static_cast<size_t>(f)];

        std::priority_queue<int, std::vector<int>, std::greater<>> ready_sm, ready_dma;
        for (Int f = 0; f < count; ++f)
            if (remaining[static_cast<size_t>(f)] == 0) {
                int id = first + f;
                (m.tasks[id].resource == Resource::SM ? ready_sm : ready_dma).push(id);
            }
        using Running = std::pair<Int, int>;
        std::priority_queue<Running, std::vector<Running>, std::greater<>> running;
        std::vector<int> free_sms;
        for (int r = cfg.num_sms - 1; r >= 0; --r) free_sms.push_back(r);
        bool dma_free = true;
        Int now = stage_start, stage_end = stage_start;
        Int launched = 0;

        auto launch = [&]() {
            while (!free_sms.empty() && !ready_sm.empty()) {
                int id = ready_sm.top();
                ready_sm.pop();
                int r = free_sms.back();
                free_sms.pop_back();
                ++launched;
                TaskRecord rec;
                rec.task_id = id;
                rec.call = m.tasks[id].call;
                rec.coord = m.tasks[id].coord;
                rec.resource = r;
                Int s = now;
                if (m.tasks[id].prefetch > 0) {
                    rec.prefetch = Interval{s, s + m.tasks[id].prefetch};
                    s += m.tasks[id].prefetch;
                }
                rec.exec = {s, s + m.tasks[id].duration};
                running.emplace(rec.exec.end, static_cast<int>(trace.tasks.size()));
                trace.tasks.push_back(std::move(rec));
            }
            while (dma_free && !ready_dma.empty()) {
                int id = ready_dma.top();
                ready_dma.pop();
                dma_free = false;
                ++launched;
                TaskRecord rec;
                rec.task_id = id;
                rec.call = m.tasks[id].call;
                rec.coord = m.tasks[id].coord;
                rec.resource = cfg.num_sms;
                Int s = now;
                if (m.tasks[id].prefetch > 0) {
                    rec.prefetch = Interval{s, s + m.tasks[id].prefetch};
                    s += m.tasks[id].prefetch;
                }
                rec.exec = {s, s + m.tasks[id].duration};
                running.emplace(rec.exec.end, static_cast<int>(trace.tasks.size()));
                trace.tasks.push_back(std::move(rec));
            }
        };
        launch();
        while (!running.empty()) {
            now = running.top().first;
            stage_end = std::max(stage_end, now);
            while (!running.empty() && running.top().first == now) {
                int rec_idx = running.top().second;
                running.pop();
                const auto& rec = trace.tasks[static_cast<size_t>(rec_idx)];
                if (rec.resource == cfg.num_sms && any_dma)
                    dma_free = true;
                else
                    free_sms.push_back(rec.resource);
                for (int el : m.task_notifies[rec.task_id])
                    for (int c : m.event_consumers[static_cast<size_t>(el)])
                        if (m.tasks[c].call == static_cast<int>(ci) &&
                            --remaining[static_cast<size_t>(c - first)] == 0)
                            (m.tasks[c].resource == Resource::SM ? ready_sm : ready_dma).push(c);
            }
            std::sort(free_sms.rbegin(), free_sms.rend());
            launch();
        }
        if (launched != count)
            throw SimError(SimError::Kind::Deadlock,
                           "stage " + std::to_string(ci) + " has an unsatisfiable internal dependency");
        stage_start = stage_end;
    }
    trace.makespan = stage_start;
    return trace;
}

}  // namespace etsim
