#include "etsim/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

namespace etsim {

namespace {

using IntervalList = std::vector<Interval>;

Int merged_length(IntervalList v) {
    std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) {
        return a.start < b.start;
    });
    Int total = 0, cur_start = 0, cur_end = -1;
    bool open = false;
    for (const auto& iv : v) {
        if (iv.length() <= 0) continue;
        if (!open || iv.start > cur_end) {
            if (open) total += cur_end - cur_start;
            cur_start = iv.start;
            cur_end = iv.end;
            open = true;
        } else {
            cur_end = std::max(cur_end, iv.end);
        }
    }
    if (open) total += cur_end - cur_start;
    return total;
}

// |a \ b| for merged interval sets.
Int subtracted_length(IntervalList a, IntervalList b) {
    auto norm = [](IntervalList& v) {
        std::sort(v.begin(), v.end(),
                  [](const Interval& x, const Interval& y) { return x.start < y.start; });
    };
    norm(a);
    norm(b);
    Int total = 0;
    size_t j = 0;
    for (auto iv : a) {
        if (iv.length() <= 0) continue;
        Int pos = iv.start;
        for (size_t k = j; k < b.size() && pos < iv.end; ++k) {
            const auto& cut = b[k];
            if (cut.length() <= 0 || cut.end <= pos) continue;
            if (cut.start >= iv.end) break;
            if (cut.start > pos) total += std::min(cut.start, iv.end) - pos;
            pos = std::max(pos, cut.end);
        }
        if (pos < iv.end) total += iv.end - pos;
    }
    return total;
}

}  // namespace

TraceMetrics compute_metrics(const Trace& t) {
    TraceMetrics m;
    m.makespan = t.makespan;
    int nres = t.num_resources();
    m.per_resource.resize(static_cast<size_t>(nres));

    std::vector<IntervalList> busy(static_cast<size_t>(nres)), spin(static_cast<size_t>(nres)),
        prefetch(static_cast<size_t>(nres));
    std::map<int, CallSpan> spans;

    for (const auto& r : t.tasks) {
        auto& b = busy[static_cast<size_t>(r.resource)];
        if (r.pop) b.push_back(*r.pop);
        if (r.prefetch) {
            b.push_back(*r.prefetch);
            prefetch[static_cast<size_t>(r.resource)].push_back(*r.prefetch);
        }
        b.push_back(r.exec);
        for (const auto& n : r.notifies) {
            b.push_back(n);
            ++m.notifies;
        }
        for (const auto& p : r.pushes) b.push_back(p);
        for (const auto& w : r.waits) {
            spin[static_cast<size_t>(r.resource)].push_back(w);
            if (w.length() > 0) ++m.wait_blocks;
        }
        if (r.noop) {
            ++m.noop_tasks;
        } else {
            ++m.real_tasks;
            auto [it, fresh] = spans.try_emplace(r.call, CallSpan{r.exec.start, r.exec.end, 1});
            if (!fresh) {
                it->second.first_start = std::min(it->second.first_start, r.exec.start);
                it->second.last_end = std::max(it->second.last_end, r.exec.end);
                ++it->second.tasks;
            }
        }
    }

    for (int r = 0; r < nres; ++r) {
        auto& pr = m.per_resource[static_cast<size_t>(r)];
        pr.busy = merged_length(busy[static_cast<size_t>(r)]);
        // spinning under an in-flight prefetch is hidden latency, not waste
        pr.spin = subtracted_length(spin[static_cast<size_t>(r)], prefetch[static_cast<size_t>(r)]);
        pr.idle = t.makespan - pr.busy - pr.spin;
        m.total_busy += pr.busy;
        m.total_spin += pr.spin;
        m.total_idle += pr.idle;
    }
    if (t.makespan > 0 && nres > 0)
        m.utilization =
            static_cast<double>(m.total_busy) / (static_cast<double>(t.makespan) * nres);

    for (const auto& e : t.sched_events) {
        if (e.kind == SchedEvent::Kind::Push) ++m.pushes;
        if (e.kind == SchedEvent::Kind::Pop) ++m.pops;
    }
    for (Int p : t.empty_polls) m.empty_polls += p;

    if (!spans.empty()) {
        int max_call = spans.rbegin()->first;
        m.per_call.resize(static_cast<size_t>(max_call) + 1);
        for (const auto& [call, span] : spans) m.per_call[static_cast<size_t>(call)] = span;
    }
    return m;
}

std::string trace_to_chrome_json(const Trace& t) {
    nlohmann::json events = nlohmann::json::array();
    auto slice = [&](const char* name, const char* cat, int tid, const Interval& iv) {
        events.push_back({{"name", name},
                          {"cat", cat},
                          {"ph", "X"},
                          {"pid", 0},
                          {"tid", tid},
                          {"ts", iv.start},
                          {"dur", iv.length()}});
    };
    for (int r = 0; r < t.num_resources(); ++r)
        events.push_back({{"name", "thread_name"},
                          {"ph", "M"},
                          {"pid", 0},
                          {"tid", r},
                          {"args", {{"name", t.resource_name(r)}}}});

    for (const auto& rec : t.tasks) {
        std::string label = "call" + std::to_string(rec.call) + "(";
        for (size_t i = 0; i < rec.coord.size(); ++i)
            label += (i ? "," : "") + std::to_string(rec.coord[i]);
        label += ")";
        if (rec.noop) label += " noop";
        if (rec.pop && rec.pop->length() > 0) slice("pop", "pop", rec.resource, *rec.pop);
        if (rec.prefetch) slice((label + " prefetch").c_str(), "prefetch", rec.resource, *rec.prefetch);
        for (const auto& w : rec.waits)
            if (w.length() > 0) slice((label + " wait").c_str(), "wait", rec.resource, w);
        slice(label.c_str(), "exec", rec.resource, rec.exec);
        for (const auto& n : rec.notifies)
            if (n.length() > 0) slice("notify", "notify", rec.resource, n);
        for (const auto& p : rec.pushes)
            if (p.length() > 0) slice("push", "push", rec.resource, p);
    }
    for (const auto& e : t.sched_events)
        events.push_back({{"name", e.kind == SchedEvent::Kind::Push ? "queue_push" : "queue_pop"},
                          {"cat", "sched"},
                          {"ph", "i"},
                          {"pid", 0},
                          {"tid", e.resource < 0 ? t.num_resources() : e.resource},
                          {"ts", e.time},
                          {"s", "t"},
                          {"args", {{"task", e.task_id}}}});

    nlohmann::json doc;
    doc["traceEvents"] = std::move(events);
    doc["displayTimeUnit"] = "ns";
    doc["otherData"] = {{"mode", t.mode}, {"makespan", t.makespan}, {"seed", t.seed}};
    return doc.dump(2);
}

std::string trace_to_csv(const Trace& t) {
    std::ostringstream os;
    os << "kind,resource,call,task_id,coord,start,end,noop\n";
    auto row = [&](const char* kind, const TaskRecord& rec, const Interval& iv) {
        os << kind << ',' << t.resource_name(rec.resource) << ',' << rec.call << ',' << rec.task_id
           << ',';
        for (size_t i = 0; i < rec.coord.size(); ++i) os << (i ? " " : "") << rec.coord[i];
        os << ',' << iv.start << ',' << iv.end << ',' << (rec.noop ? 1 : 0) << '\n';
    };
    for (const auto& rec : t.tasks) {
        if (rec.pop) row("pop", rec, *rec.pop);
        if (rec.prefetch) row("prefetch", rec, *rec.prefetch);
        for (const auto& w : rec.waits) row("wait", rec, w);
        row("exec", rec, rec.exec);
        for (const auto& n : rec.notifies) row("notify", rec, n);
        for (const auto& p : rec.pushes) row("push", rec, p);
    }
    for (const auto& e : t.sched_events) {
        os << (e.kind == SchedEvent::Kind::Push ? "queue_push" : "queue_pop") << ','
           << (e.resource < 0 ? "host" : t.resource_name(e.resource)) << ",,," << e.task_id << ','
           << e.time << ',' << e.time << ",0\n";
    }
    return os.str();
}

std::string format_comparison(const std::vector<LabelledRun>& runs, const std::string& baseline) {
    Int base = -1;
    for (const auto& r : runs)
        if (r.label == baseline) base = r.metrics.makespan;
    if (base < 0) throw Error("baseline label '" + baseline + "' not among the runs");

    std::ostringstream os;
    os << std::left << std::setw(18) << "run" << std::right << std::setw(12) << "makespan"
       << std::setw(10) << "speedup" << std::setw(8) << "util" << std::setw(10) << "spin"
       << std::setw(12) << "empty_polls" << '\n';
    for (const auto& r : runs) {
        double speedup = r.metrics.makespan > 0
                             ? static_cast<double>(base) / static_cast<double>(r.metrics.makespan)
                             : 0.0;
        os << std::left << std::setw(18) << r.label << std::right << std::setw(12)
           << r.metrics.makespan << std::setw(9) << std::fixed << std::setprecision(2) << speedup
           << 'x' << std::setw(7) << std::setprecision(2) << r.metrics.utilization << std::setw(10)
           << r.metrics.total_spin << std::setw(12) << r.metrics.empty_polls << '\n';
    }
    return os.str();
}

}  // namespace etsim
