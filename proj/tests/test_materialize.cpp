#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "etsim/materialize.hpp"

using namespace etsim;

namespace {

GraphFunction splitk() {
    GraphFunction g;
    g.symbols = {"n"};
    g.size_symbol = "n";
    g.duration_models["unit"] = DurationModel::constant(1);
    g.device_functions.push_back(
        {"partial", {parse_expr("n"), parse_expr("4")}, Resource::SM, "unit", ""});
    g.device_functions.push_back({"final", {parse_expr("n")}, Resource::SM, "unit", ""});
    g.event_tensors.push_back({"E", {parse_expr("n")}, false, "", ""});
    CallDevice partial;
    partial.fn = "partial";
    partial.out_edges.push_back({"E", MapKind::StaticMap, {parse_expr("t0")}, "", ""});
    CallDevice final_sum;
    final_sum.fn = "final";
    final_sum.in_edges.push_back({"E", MapKind::StaticMap, {parse_expr("t0")}, "", ""});
    g.calls = {partial, final_sum};
    return g;
}

// Minimal routed workload: route writes topk/counts/indptr, a grouping grid
// notifies per-expert events through topk, expert tiles are range-triggered.
GraphFunction routed(Int tokens, Int experts) {
    GraphFunction g;
    g.duration_models["unit"] = DurationModel::constant(1);
    auto c = [](Int v) { return SymExpr::constant(v); };
    g.device_functions.push_back({"route", {c(1)}, Resource::SM, "unit", ""});
    g.device_functions.push_back({"group", {c(tokens)}, Resource::SM, "unit", ""});
    g.device_functions.push_back({"mm", {c(tokens)}, Resource::SM, "unit", ""});
    g.runtime_tensors.push_back({"topk", {c(tokens)}, TensorRole::Routing, "route"});
    g.runtime_tensors.push_back({"counts", {c(experts)}, TensorRole::Counts, "route"});
    g.runtime_tensors.push_back({"indptr", {c(experts + 1)}, TensorRole::Indptr, "route"});
    g.event_tensors.push_back({"R", {c(1)}, false, "", ""});
    g.event_tensors.push_back({"EXP", {c(experts)}, true, "counts", "route"});
    CallDevice route{"route", {}, {}, {}, ""};
    route.out_edges.push_back({"R", MapKind::StaticMap, {parse_expr("0")}, "", ""});
    CallDevice group{"group", {}, {}, {}, ""};
    group.in_edges.push_back({"R", MapKind::StaticMap, {parse_expr("0")}, "", ""});
    group.out_edges.push_back({"EXP", MapKind::DataDependentNotify, {}, "topk", ""});
    CallDevice mm{"mm", {}, {}, {}, ""};
    mm.extent_from = "indptr";
    mm.in_edges.push_back({"EXP", MapKind::RangeTrigger, {}, "", "indptr"});
    g.calls = {route, group, mm};
    return g;
}

}  // namespace

TEST_CASE("split-k instantiation at n=1") {
    auto m = instantiate(splitk(), {{"n", 1}});
    REQUIRE(m.num_tasks() == 5);  // 4 partial sums + 1 final sum
    REQUIRE(m.num_events() == 1);
    CHECK(m.events[0].initial_count == 4);
    CHECK(m.event_producers[0].size() == 4);
    CHECK(m.event_consumers[0] == std::vector<int>{4});
    CHECK(m.task_waits[4] == std::vector<int>{0});
    for (int t = 0; t < 4; ++t) CHECK(m.task_notifies[t] == std::vector<int>{0});
    CHECK(m.call_task_counts == std::vector<Int>{4, 1});
}

TEST_CASE("split-k instantiation scales with the binding") {
    auto m = instantiate(splitk(), {{"n", 3}});
    CHECK(m.num_tasks() == 15);
    CHECK(m.num_events() == 3);
    for (const auto& e : m.events) CHECK(e.initial_count == 4);
    // Row i's final sum waits exactly on E[i].
    for (int i = 0; i < 3; ++i) CHECK(m.task_waits[12 + i] == std::vector<int>{i});
}

TEST_CASE("empty binding instantiates an empty graph") {
    auto m = instantiate(splitk(), {{"n", 0}});
    CHECK(m.num_tasks() == 0);
    CHECK(m.num_events() == 0);
    CHECK(critical_path(m) == 0);
    CHECK(list_schedule(m, 2) == 0);
}

TEST_CASE("unbound binding is rejected") {
    CHECK_THROWS_WITH_AS(instantiate(splitk(), {}), doctest::Contains("does not bind symbol 'n'"),
                         Error);
}

TEST_CASE("out-of-bounds static map is rejected") {
    auto g = splitk();
    g.calls[0].out_edges[0].map[0] = parse_expr("t0 + n");
    CHECK_THROWS_WITH_AS(instantiate(g, {{"n", 2}}), doctest::Contains("out of bounds"), Error);
}

TEST_CASE("element-level cycles are detected") {
    GraphFunction g;
    g.duration_models["unit"] = DurationModel::constant(1);
    g.device_functions.push_back({"f", {parse_expr("2")}, Resource::SM, "unit", ""});
    g.event_tensors.push_back({"E", {parse_expr("2")}, false, "", ""});
    CallDevice call{"f", {}, {}, {}, ""};
    call.in_edges.push_back({"E", MapKind::StaticMap, {parse_expr("t0")}, "", ""});
    call.out_edges.push_back({"E", MapKind::StaticMap, {parse_expr("(t0 + 1) % 2")}, "", ""});
    g.calls = {call};
    CHECK_THROWS_WITH_AS(instantiate(g, {}), doctest::Contains("dependency cycle"), Error);
}

TEST_CASE("same-call forward chain instantiates") {
    GraphFunction g;
    g.duration_models["unit"] = DurationModel::constant(1);
    g.device_functions.push_back({"copy", {parse_expr("4")}, Resource::DMA, "unit", ""});
    g.event_tensors.push_back({"N", {parse_expr("5")}, false, "", ""});
    CallDevice copy{"copy", {}, {}, {}, ""};
    copy.in_edges.push_back({"N", MapKind::StaticMap, {parse_expr("t0")}, "", ""});
    copy.out_edges.push_back({"N", MapKind::StaticMap, {parse_expr("t0 + 1")}, "", ""});
    g.calls = {copy};
    auto m = instantiate(g, {});
    REQUIRE(m.num_tasks() == 4);
    CHECK(m.events[0].initial_count == 0);  // pre-triggered head of the chain
    for (int i = 1; i <= 4; ++i) CHECK(m.events[i].initial_count == 1);
    CHECK(critical_path(m) == 4);  // fully serial chain
    CHECK(list_schedule(m, 8) == 4);
}

TEST_CASE("critical path and list schedule on split-k") {
    auto g = splitk();
    g.duration_models["unit"] = DurationModel::table_of({3, 1, 2, 5});
    auto m = instantiate(g, {{"n", 1}});
    // Longest partial is 5, final adds its table value 3 (flat 0 of call 1).
    CHECK(critical_path(m) == 5 + 3);
    // 2 SMs, greedy by id: [3],[1,2] then the 5 lands at t=3; final at 8.
    CHECK(list_schedule(m, 2) == 11);
    CHECK(list_schedule(m, 4) == 8);   // all partials parallel: 5 + 3
    CHECK(list_schedule(m, 1) == 14);  // serial: 11 + 3
}

TEST_CASE("duration models are deterministic and respect bounds") {
    auto g = splitk();
    g.duration_models["unit"] = DurationModel::uniform(2, 9);
    auto a = instantiate(g, {{"n", 4}}, nullptr, 7);
    auto b = instantiate(g, {{"n", 4}}, nullptr, 7);
    auto c = instantiate(g, {{"n", 4}}, nullptr, 8);
    bool any_diff = false;
    for (int i = 0; i < a.num_tasks(); ++i) {
        CHECK(a.tasks[i].duration == b.tasks[i].duration);
        CHECK(a.tasks[i].duration >= 2);
        CHECK(a.tasks[i].duration <= 9);
        any_diff |= a.tasks[i].duration != c.tasks[i].duration;
    }
    CHECK(any_diff);
}

TEST_CASE("durations do not depend on the shape padding") {
    // The same task coordinate draws the same duration at different bindings,
    // so padded static schedules agree with the exact materialization.
    auto g = splitk();
    g.duration_models["unit"] = DurationModel::uniform(1, 100);
    auto small = instantiate(g, {{"n", 2}}, nullptr, 13);
    auto large = instantiate(g, {{"n", 4}}, nullptr, 13);
    for (const auto& t : small.tasks) {
        const auto& big = large.tasks[large.call_first_task[t.call] +
                                      flatten_coord(t.coord, large.call_extents[t.call])];
        CHECK(big.duration == t.duration);
    }
}

TEST_CASE("routed instantiation resolves runtime structure") {
    auto g = routed(4, 2);
    RoutingRealization r;
    r.tensors["topk"] = {0, 1, 0, 0};
    r.tensors["counts"] = {3, 1};
    r.tensors["indptr"] = {0, 3, 4};
    auto m = instantiate(g, {}, &r);
    REQUIRE(m.num_tasks() == 1 + 4 + 4);
    // Events: R[0] id 0, EXP[0] id 1, EXP[1] id 2.
    CHECK(m.events[1].initial_count == 3);
    CHECK(m.events[2].initial_count == 1);
    CHECK(m.event_producers[1].size() == 3);
    CHECK(m.event_producers[2].size() == 1);
    // Tiles 0..2 wait on EXP[0], tile 3 on EXP[1] (ids 5..8 are the mm tasks).
    CHECK(m.task_waits[5] == std::vector<int>{1});
    CHECK(m.task_waits[6] == std::vector<int>{1});
    CHECK(m.task_waits[7] == std::vector<int>{1});
    CHECK(m.task_waits[8] == std::vector<int>{2});

    SUBCASE("runtime extent shrinks the triggered call") {
        r.tensors["topk"] = {0, 0, 0, 0};
        r.tensors["counts"] = {4, 0};
        r.tensors["indptr"] = {0, 4, 4};
        auto m2 = instantiate(g, {}, &r);
        CHECK(m2.call_task_counts[2] == 4);
        r.tensors["topk"] = {1, 1, 1, 1};
        r.tensors["counts"] = {0, 4};
        r.tensors["indptr"] = {0, 0, 4};
        auto m3 = instantiate(g, {}, &r);
        CHECK(m3.events[m3.tensor_offsets[1]].initial_count == 0);
    }
    SUBCASE("count mismatch against producer edges is rejected") {
        r.tensors["counts"] = {2, 2};
        CHECK_THROWS_WITH_AS(instantiate(g, {}, &r), doctest::Contains("producer edges"), Error);
    }
    SUBCASE("routing values out of range are rejected") {
        r.tensors["topk"] = {0, 5, 0, 0};
        CHECK_THROWS_WITH_AS(instantiate(g, {}, &r), doctest::Contains("routing value"), Error);
    }
    SUBCASE("non-monotone indptr is rejected") {
        r.tensors["indptr"] = {0, 3, 2};
        CHECK_THROWS_AS(instantiate(g, {}, &r), Error);
    }
    SUBCASE("indptr total must match the task count") {
        // Without extent_from the call runs its full grid (4 tasks), so an
        // indptr summing to 3 no longer covers every task.
        g.calls[2].extent_from = "";
        r.tensors["indptr"] = {0, 3, 3};
        CHECK_THROWS_WITH_AS(instantiate(g, {}, &r), doctest::Contains("task count"), Error);
    }
    SUBCASE("realization size must match the declared shape") {
        r.tensors["topk"] = {0, 1};
        CHECK_THROWS_WITH_AS(instantiate(g, {}, &r), doctest::Contains("entries"), Error);
    }
    SUBCASE("undeclared realization tensors are rejected") {
        r.tensors["mystery"] = {1};
        CHECK_THROWS_WITH_AS(instantiate(g, {}, &r), doctest::Contains("undeclared tensor"), Error);
    }
    SUBCASE("range triggers require a realization") {
        CHECK_THROWS_WITH_AS(instantiate(g, {}), doctest::Contains("realization required"), Error);
    }
}

TEST_CASE("skewed duration model charges the hot group") {
    auto g = routed(4, 2);
    g.duration_models["hot"] = DurationModel::skewed(2, 5, "indptr", 0);
    g.device_functions[2].duration = "hot";
    RoutingRealization r;
    r.tensors["topk"] = {0, 1, 0, 0};
    r.tensors["counts"] = {3, 1};
    r.tensors["indptr"] = {0, 3, 4};
    auto m = instantiate(g, {}, &r);
    CHECK(m.tasks[5].duration == 10);
    CHECK(m.tasks[6].duration == 10);
    CHECK(m.tasks[7].duration == 10);
    CHECK(m.tasks[8].duration == 2);
}

TEST_CASE("check_trace accepts a faithful schedule and flags corruptions") {
    auto m = instantiate(splitk(), {{"n", 1}});
    Trace t;
    t.mode = "static";
    t.num_sms = 2;
    t.binding = {{"n", 1}};
    // SM0: partial 0 [0,1), partial 2 [1,2), final [2,3). SM1: partials 1, 3.
    auto rec = [&](int id, int call, Int coord0, Int coord1, int res, Int s, Int e,
                   std::vector<Int> coord = {}) {
        TaskRecord r;
        r.task_id = id;
        r.call = call;
        r.coord = coord.empty() ? std::vector<Int>{coord0, coord1} : coord;
        r.resource = res;
        r.exec = {s, e};
        t.tasks.push_back(r);
    };
    rec(0, 0, 0, 0, 0, 0, 1);
    rec(2, 0, 0, 2, 0, 1, 2);
    rec(1, 0, 0, 1, 1, 0, 1);
    rec(3, 0, 0, 3, 1, 1, 2);
    rec(4, 1, 0, 0, 0, 2, 3, {0});
    t.makespan = 3;
    CHECK(check_trace(t, m).empty());

    SUBCASE("missing task") {
        t.tasks.pop_back();
        auto d = check_trace(t, m);
        REQUIRE(!d.empty());
        CHECK(d[0].find("never executed") != std::string::npos);
    }
    SUBCASE("duplicated task") {
        t.tasks.push_back(t.tasks[0]);
        auto d = check_trace(t, m);
        REQUIRE(!d.empty());
        CHECK(d[0].find("more than once") != std::string::npos);
    }
    SUBCASE("consumer starting before a producer ends") {
        t.tasks[4].exec = {1, 2};
        t.tasks[1].exec = {2, 3};  // keep SM0 exclusive
        auto d = check_trace(t, m);
        REQUIRE(!d.empty());
        CHECK(d[0].find("before producer") != std::string::npos);
    }
    SUBCASE("two tasks overlapping on one SM") {
        t.tasks[1].exec = {0, 1};  // collides with partial 0 on SM0
        t.tasks[4].exec = {2, 3};
        auto d = check_trace(t, m);
        CHECK(!d.empty());
    }
    SUBCASE("wrong exec length") {
        t.tasks[0].exec = {0, 2};
        auto d = check_trace(t, m);
        CHECK(!d.empty());
    }
    SUBCASE("makespan must equal the last completion") {
        t.makespan = 99;
        auto d = check_trace(t, m);
        REQUIRE(!d.empty());
        CHECK(d[0].find("makespan") != std::string::npos);
    }
    SUBCASE("phantom task") {
        rec(9, 0, 0, 9, 1, 5, 6);
        auto d = check_trace(t, m);
        REQUIRE(!d.empty());
        CHECK(d[0].find("does not exist") != std::string::npos);
    }
    SUBCASE("nonzero final counter") {
        t.final_counters = {1};
        auto d = check_trace(t, m);
        REQUIRE(!d.empty());
        CHECK(d[0].find("finished nonzero") != std::string::npos);
    }
}

TEST_CASE("dot dump names tasks and events") {
    auto g = splitk();
    auto m = instantiate(g, {{"n", 1}});
    auto dot = to_dot(m, g);
    CHECK(dot.find("partial(0,3)") != std::string::npos);
    CHECK(dot.find("E[0]=4") != std::string::npos);
    CHECK(dot.find("digraph") != std::string::npos);
}
