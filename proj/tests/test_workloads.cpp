#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <set>

#include "etsim/workloads.hpp"

using namespace etsim;

TEST_CASE("every generator produces a clean graph") {
    CHECK(validate_graph(splitk_rowsum()).empty());
    CHECK(validate_graph(gemm_reduce_scatter("8", 2)).empty());
    CHECK(validate_graph(gemm_reduce_scatter("b * 4", 2)).empty());
    CHECK(validate_graph(all_gather_gemm(4, 3)).empty());
    CHECK(validate_graph(moe_layer(MoEParams{})).empty());
    for (Int seed = 0; seed < 5; ++seed) CHECK(validate_graph(random_dag(12, 20, seed)).empty());
}

TEST_CASE("split-k rowsum wiring") {
    auto g = splitk_rowsum();
    auto m = instantiate(g, {{"n", 2}});
    CHECK(m.tasks.size() == 10);  // 2*4 partials + 2 finals
    REQUIRE(m.events.size() == 2);
    for (const auto& e : m.events) CHECK(e.initial_count == 4);
    // each final task waits exactly on its own row event
    for (const auto& t : m.tasks) {
        if (t.call == 1) {
            REQUIRE(m.task_waits[static_cast<size_t>(t.id)].size() == 1);
            CHECK(m.task_waits[static_cast<size_t>(t.id)][0] == t.flat);
        }
    }
}

TEST_CASE("gemm + reduce-scatter fan-in") {
    SUBCASE("constant tile count") {
        auto m = instantiate(gemm_reduce_scatter("8", 2), {});
        CHECK(m.call_task_counts == std::vector<Int>{8, 4});
        REQUIRE(m.events.size() == 4);
        for (const auto& e : m.events) CHECK(e.initial_count == 2);
        for (const auto& t : m.tasks)
            if (t.call == 0)
                CHECK(m.task_notifies[static_cast<size_t>(t.id)][0] == t.flat / 2);
    }
    SUBCASE("symbolic tile count") {
        auto m = instantiate(gemm_reduce_scatter("b * 4", 2), {{"b", 2}});
        CHECK(m.call_task_counts == std::vector<Int>{8, 4});
    }
    SUBCASE("fan-in of one gives one event per tile") {
        auto m = instantiate(gemm_reduce_scatter("6", 1), {});
        REQUIRE(m.events.size() == 6);
        for (const auto& e : m.events) CHECK(e.initial_count == 1);
    }
    CHECK_THROWS_AS(gemm_reduce_scatter("8", 0), Error);
}

TEST_CASE("all-gather + gemm chain") {
    auto g = all_gather_gemm(4, 3);
    auto m = instantiate(g, {});
    CHECK(m.call_task_counts == std::vector<Int>{4, 12});
    // chain[0] has no producer so the first copy is ready immediately;
    // every later link and every arrival is produced exactly once.
    std::map<std::string, std::vector<Int>> counts;
    for (const auto& e : m.events)
        counts[g.event_tensors[static_cast<size_t>(e.tensor)].name].push_back(e.initial_count);
    CHECK(counts["chain"] == std::vector<Int>{0, 1, 1, 1, 1});
    CHECK(counts["arrival"] == std::vector<Int>{1, 1, 1, 1});
    // copies ride the DMA engine, gemms the SMs
    for (const auto& t : m.tasks) CHECK(t.resource == (t.call == 0 ? Resource::DMA : Resource::SM));
    // critical path: copies serialize, last chunk's gemm follows the last copy
    CHECK(critical_path(m) == 5);
    CHECK_THROWS_AS(all_gather_gemm(0, 3), Error);
}

TEST_CASE("mixture-of-experts realization algebra") {
    MoEParams p;
    p.tokens = 16;
    p.experts = 4;
    p.top_k = 2;
    p.tile_size = 2;
    p.hot_fraction = 0.3;
    p.hot_expert = 1;
    auto g = moe_layer(p);
    REQUIRE(validate_graph(g).empty());

    for (Int seed = 0; seed < 50; ++seed) {
        auto r = moe_realization(p, seed);
        const auto& topk = r.tensors.at("topk");
        const auto& counts = r.tensors.at("expert_counts");
        const auto& indptr = r.tensors.at("exp_indptr");
        REQUIRE(topk.size() == static_cast<size_t>(p.tokens * p.top_k));
        REQUIRE(counts.size() == static_cast<size_t>(p.experts));
        REQUIRE(indptr.size() == static_cast<size_t>(p.experts + 1));

        // assignments are conserved and per-token experts are distinct
        CHECK(std::accumulate(counts.begin(), counts.end(), Int{0}) == p.tokens * p.top_k);
        std::vector<Int> recount(static_cast<size_t>(p.experts), 0);
        for (Int t = 0; t < p.tokens; ++t) {
            std::set<Int> seen;
            for (Int j = 0; j < p.top_k; ++j) {
                Int e = topk[static_cast<size_t>(t * p.top_k + j)];
                REQUIRE(e >= 0);
                REQUIRE(e < p.experts);
                seen.insert(e);
                ++recount[static_cast<size_t>(e)];
            }
            CHECK(seen.size() == static_cast<size_t>(p.top_k));
        }
        CHECK(recount == counts);

        // tile ranges cover exactly ceil(count/tile_size) tiles per expert
        CHECK(indptr.front() == 0);
        Int tiles = 0;
        for (Int e = 0; e < p.experts; ++e) {
            Int want = (counts[static_cast<size_t>(e)] + p.tile_size - 1) / p.tile_size;
            CHECK(indptr[static_cast<size_t>(e + 1)] - indptr[static_cast<size_t>(e)] == want);
            tiles += want;
        }
        CHECK(indptr.back() == tiles);

        // the instantiated graph agrees with the realization
        auto m = instantiate(g, {{"tokens", p.tokens}}, &r, seed);
        CHECK(m.call_task_counts[2] == tiles);
        for (const auto& e : m.events)
            if (g.event_tensors[static_cast<size_t>(e.tensor)].name == "EXP")
                CHECK(e.initial_count == counts[static_cast<size_t>(e.flat)]);
    }
}

TEST_CASE("fully hot routing sends every token to the hot expert") {
    MoEParams p;
    p.tokens = 8;
    p.experts = 4;
    p.top_k = 1;
    p.hot_fraction = 1.0;
    p.hot_expert = 2;
    auto r = moe_realization(p, 7);
    for (Int v : r.tensors.at("topk")) CHECK(v == 2);
    CHECK(r.tensors.at("expert_counts") == std::vector<Int>{0, 0, 8, 0});
}

TEST_CASE("realizations are deterministic in the seed") {
    MoEParams p;
    p.tokens = 12;
    p.experts = 5;
    p.top_k = 2;
    auto a = moe_realization(p, 3);
    auto b = moe_realization(p, 3);
    auto c = moe_realization(p, 4);
    CHECK(a.tensors == b.tensors);
    CHECK(a.tensors != c.tensors);
    CHECK_THROWS_AS(moe_realization(MoEParams{.tokens = 4, .experts = 2, .top_k = 3}, 0), Error);
}

TEST_CASE("random dags are topological and reproducible") {
    for (Int seed = 0; seed < 10; ++seed) {
        auto g = random_dag(15, 25, seed);
        auto m = instantiate(g, {});
        CHECK(m.tasks.size() == 15);
        // every dependency flows from a lower-numbered call to a higher one
        for (size_t v = 0; v < g.calls.size(); ++v)
            for (const auto& in : g.calls[v].in_edges)
                CHECK(std::stoll(in.event.substr(1)) < static_cast<long long>(v));
        CHECK(critical_path(m) >= 1);
    }
    auto a = instantiate(random_dag(10, 15, 42), {});
    auto b = instantiate(random_dag(10, 15, 42), {});
    REQUIRE(a.tasks.size() == b.tasks.size());
    for (size_t i = 0; i < a.tasks.size(); ++i) CHECK(a.tasks[i].duration == b.tasks[i].duration);
    CHECK(a.task_waits == b.task_waits);
    CHECK_THROWS_AS(random_dag(0, 3, 1), Error);
}
