#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "etsim/json_io.hpp"

using namespace etsim;

namespace {

Trace run_static(const StaticMegakernel& k, const ShapeBinding& b) {
    SimConfig cfg;
    cfg.num_sms = k.num_sms;
    return simulate(k, b, nullptr, cfg);
}

}  // namespace

TEST_CASE("graph specs round-trip through json") {
    std::vector<GraphFunction> graphs = {splitk_rowsum(), gemm_reduce_scatter("b * 4", 2),
                                         all_gather_gemm(3, 2), moe_layer(MoEParams{}),
                                         random_dag(10, 15, 3)};
    for (const auto& g : graphs) {
        auto text = graph_to_json(g);
        auto back = graph_from_json(text);
        CHECK(validate_graph(back).empty());
        CHECK(graph_to_json(back) == text);
    }
}

TEST_CASE("static kernels round-trip and replay identically") {
    auto g = splitk_rowsum();
    auto k = lower_static(g, {{{"n", 1}}, {{"n", 2}}}, 2);
    auto loaded = kernel_from_json(kernel_to_json(k));
    CHECK(loaded.mode == "static");
    REQUIRE(loaded.static_kernel.has_value());
    CHECK(kernel_to_json(*loaded.static_kernel) == kernel_to_json(k));

    auto a = run_static(k, {{"n", 2}});
    auto b = run_static(*loaded.static_kernel, {{"n", 2}});
    CHECK(a.makespan == b.makespan);
    CHECK(a.tasks.size() == b.tasks.size());
    CHECK(check_trace(b, instantiate(g, {{"n", 2}})).empty());
}

TEST_CASE("dynamic kernels round-trip with their push policy") {
    auto k = enable_early_push(lower_dynamic(moe_layer(MoEParams{})));
    auto loaded = kernel_from_json(kernel_to_json(k));
    CHECK(loaded.mode == "dynamic");
    REQUIRE(loaded.dynamic_kernel.has_value());
    CHECK(loaded.dynamic_kernel->early_push);
    CHECK(kernel_to_json(*loaded.dynamic_kernel) == kernel_to_json(k));
}

TEST_CASE("kernel files carry realization generators and sim defaults") {
    LoadedKernel k;
    k.mode = "dynamic";
    k.dynamic_kernel = lower_dynamic(moe_layer(MoEParams{.tokens = 16, .experts = 8}));
    MoEParams p;
    p.tokens = 16;
    p.experts = 8;
    p.hot_fraction = 0.5;
    k.realization_gen = p;
    SimConfig cfg;
    cfg.num_sms = 8;
    cfg.pop_cost = 2;
    k.sim_defaults = cfg;

    auto loaded = kernel_from_json(kernel_to_json(k));
    REQUIRE(loaded.realization_gen.has_value());
    CHECK(loaded.realization_gen->tokens == 16);
    CHECK(loaded.realization_gen->hot_fraction == doctest::Approx(0.5));
    REQUIRE(loaded.sim_defaults.has_value());
    CHECK(loaded.sim_defaults->num_sms == 8);
    CHECK(loaded.sim_defaults->pop_cost == 2);
}

TEST_CASE("realizations round-trip") {
    MoEParams p;
    p.tokens = 12;
    p.experts = 4;
    p.top_k = 2;
    auto r = moe_realization(p, 9);
    auto back = realization_from_json(realization_to_json(r));
    CHECK(back.tensors == r.tensors);
}

TEST_CASE("run reports round-trip the fields the comparator needs") {
    auto g = splitk_rowsum();
    auto k = lower_static(g, {{{"n", 2}}}, 2);
    auto t = run_static(k, {{"n", 2}});
    auto m = compute_metrics(t);
    SimConfig cfg;
    cfg.num_sms = 2;
    auto run = report_from_json(report_to_json("fused-static", t, m, cfg));
    CHECK(run.label == "fused-static");
    CHECK(run.metrics.makespan == t.makespan);
    CHECK(run.metrics.utilization == doctest::Approx(m.utilization));
    CHECK(run.metrics.total_spin == m.total_spin);
    CHECK(run.metrics.empty_polls == m.empty_polls);
}

TEST_CASE("spec files can embed a realization generator") {
    MoEParams p;
    p.tokens = 8;
    p.experts = 4;
    p.hot_fraction = 0.9;
    p.hot_expert = 3;
    auto text = attach_realization_gen(graph_to_json(moe_layer(p)), p);
    auto gen = realization_gen_from_spec(text);
    REQUIRE(gen.has_value());
    CHECK(gen->hot_expert == 3);
    CHECK(gen->hot_fraction == doctest::Approx(0.9));
    // the graph itself still parses with the extra block present
    CHECK(validate_graph(graph_from_json(text)).empty());
    CHECK_FALSE(realization_gen_from_spec(graph_to_json(splitk_rowsum())).has_value());
    CHECK_FALSE(sim_config_from_spec(graph_to_json(splitk_rowsum())).has_value());
}

TEST_CASE("malformed inputs raise clear errors") {
    CHECK_THROWS_AS(graph_from_json("not json"), Error);
    CHECK_THROWS_AS(kernel_from_json("{}"), Error);
    CHECK_THROWS_AS(kernel_from_json(R"({"format":"megakernel","version":1,"mode":"x"})"), Error);
    CHECK_THROWS_AS(kernel_from_json(R"({"format":"megakernel","version":9,"mode":"static"})"),
                    Error);
    CHECK_THROWS_AS(graph_from_json(R"({"calls":[{"fn":"f","in":[{"event":"E"}]}]})"), Error);
    CHECK_THROWS_AS(
        graph_from_json(
            R"({"calls":[{"fn":"f","in":[{"event":"E","map":["0"],"indptr":"t"}]}]})"),
        Error);
    CHECK_THROWS_AS(realization_from_json(R"({"no_tensors":1})"), Error);
}
