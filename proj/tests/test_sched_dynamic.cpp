#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "etsim/sched_dynamic.hpp"
#include "etsim/workloads.hpp"

using namespace etsim;

TEST_CASE("templates mirror the call list") {
    auto k = lower_dynamic(splitk_rowsum());
    REQUIRE(k.templates.size() == 2);
    CHECK(k.templates[0].call == 0);
    CHECK(k.templates[0].wait_edges.empty());
    REQUIRE(k.templates[1].wait_edges.size() == 1);
    CHECK_FALSE(k.early_push);
}

TEST_CASE("waits stay disarmed when pushes already imply readiness") {
    // with push-on-zero, a popped task's static-event counters are zero, so
    // the WAIT slots are compiled out
    auto k = lower_dynamic(splitk_rowsum());
    CHECK(k.templates[1].wait_edges[0] == 0);

    SUBCASE("early push arms every slot") {
        auto e = enable_early_push(k);
        CHECK(e.early_push);
        CHECK(e.templates[1].wait_edges[0] == 1);
        // idempotent
        auto e2 = enable_early_push(e);
        CHECK(e2.early_push);
        CHECK(e2.templates[1].wait_edges == e.templates[1].wait_edges);
    }
    SUBCASE("lowering with the flag matches enabling it afterwards") {
        auto a = lower_dynamic(splitk_rowsum(), true);
        auto b = enable_early_push(lower_dynamic(splitk_rowsum()));
        CHECK(a.early_push == b.early_push);
        for (size_t i = 0; i < a.templates.size(); ++i)
            CHECK(a.templates[i].wait_edges == b.templates[i].wait_edges);
    }
}

TEST_CASE("data-dependent events keep their waits armed") {
    auto k = lower_dynamic(moe_layer(MoEParams{}));
    REQUIRE(k.templates.size() == 3);
    // grouping waits on the static routing event: disarmed
    CHECK(k.templates[1].wait_edges == std::vector<uint8_t>{0});
    // expert tiles wait on the data-dependent per-expert events: armed
    CHECK(k.templates[2].wait_edges == std::vector<uint8_t>{1});
}

TEST_CASE("lowering validates the graph") {
    auto g = splitk_rowsum();
    g.calls[1].in_edges[0].event = "missing";
    CHECK_THROWS_AS(lower_dynamic(g), Error);
}
