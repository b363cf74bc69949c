#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "etsim/simulate.hpp"
#include "etsim/workloads.hpp"

using namespace etsim;

// Scheduling-event accounting: in the dynamic modes every task enters the
// ready queue exactly once and leaves it exactly once, across random graphs
// and both push policies.
TEST_CASE("every task is pushed and popped exactly once") {
    for (Int seed = 0; seed < 20; ++seed) {
        auto g = random_dag(18, 30, seed);
        auto m = instantiate(g, {});
        for (bool early : {false, true}) {
            CAPTURE(seed);
            CAPTURE(early);
            auto k = lower_dynamic(g, early);
            SimConfig cfg;
            cfg.num_sms = 3;
            auto t = simulate(k, {}, nullptr, cfg);
            CHECK(check_trace(t, m).empty());
            std::map<int, int> pushes, pops;
            for (const auto& e : t.sched_events) {
                if (e.kind == SchedEvent::Kind::Push) ++pushes[e.task_id];
                if (e.kind == SchedEvent::Kind::Pop) ++pops[e.task_id];
            }
            CHECK(pushes.size() == m.tasks.size());
            CHECK(pops.size() == m.tasks.size());
            for (const auto& [task, n] : pushes) CHECK(n == 1);
            for (const auto& [task, n] : pops) CHECK(n == 1);
        }
    }
}

TEST_CASE("pop order within a class is by ascending sm index") {
    // 6 equal tasks, 3 SMs: at t=0 the idle SMs pop in index order, so the
    // first three tasks land on SM0, SM1, SM2 in turn.
    auto g = random_dag(6, 0, 3);
    for (auto& [name, model] : g.duration_models) model = DurationModel::constant(4);
    auto k = lower_dynamic(g);
    SimConfig cfg;
    cfg.num_sms = 3;
    auto t = simulate(k, {}, nullptr, cfg);
    std::map<int, int> popper;
    for (const auto& e : t.sched_events)
        if (e.kind == SchedEvent::Kind::Pop) popper[e.task_id] = e.resource;
    CHECK(popper[0] == 0);
    CHECK(popper[1] == 1);
    CHECK(popper[2] == 2);
    CHECK(popper[3] == 0);
    CHECK(popper[4] == 1);
    CHECK(popper[5] == 2);
}
