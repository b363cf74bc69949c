"""Smoke tests for the python bindings: build, lower, simulate, inspect."""

import json

import pytest

import etsim


def test_splitk_structure():
    g = etsim.splitk_rowsum()
    assert g.validate() == []
    m = g.instantiate({"n": 2})
    assert m.num_tasks == 10
    assert m.call_task_counts == [8, 2]
    assert m.initial_counts == [4, 4]


def test_static_simulation_round_trip():
    g = etsim.gemm_reduce_scatter("b * 2", 2)
    k = etsim.lower_static(g, [{"b": 1}, {"b": 2}, {"b": 4}], num_sms=2)
    assert k.sample_bindings == [{"b": 1}, {"b": 2}, {"b": 4}]

    t = etsim.simulate(k, {"b": 3}, seed=7)
    m = g.instantiate({"b": 3})
    assert m.check(t) == []
    assert t.mode == "static"
    assert t.noop_records == 3  # binding 3 runs on the b=4 sample
    assert all(c == 0 for c in t.final_counters)
    assert t.makespan >= m.critical_path()

    k2 = etsim.load_kernel(k.to_json())
    assert isinstance(k2, etsim.StaticKernel)
    assert etsim.simulate(k2, {"b": 3}, seed=7).makespan == t.makespan


def test_dynamic_and_barrier():
    g = etsim.splitk_rowsum()
    dk = etsim.lower_dynamic(g)
    ek = etsim.enable_early_push(dk)
    assert not dk.early_push and ek.early_push

    m = g.instantiate({"n": 4})
    td = etsim.simulate(dk, {"n": 4}, num_sms=3, seed=1)
    te = etsim.simulate(ek, {"n": 4}, num_sms=3, seed=1, push_cost=2)
    tb = etsim.simulate_barrier(g, {"n": 4}, num_sms=3, seed=1)
    for t in (td, te, tb):
        assert m.check(t) == []
    assert m.critical_path() <= td.makespan <= tb.makespan


def test_moe_routing_realization():
    routing = etsim.moe_realization(
        tokens=16, experts=4, top_k=2, tile_size=2, hot_fraction=0.6, hot_expert=1, seed=3
    )
    counts = routing["expert_counts"]
    assert sum(counts) == 32
    indptr = routing["exp_indptr"]
    assert indptr[0] == 0 and indptr[-1] == sum((c + 1) // 2 for c in counts)

    g = etsim.moe_layer(tokens=16, experts=4, top_k=2, tile_size=2)
    assert g.summary()["has_data_dependent"]
    sk = etsim.lower_static(etsim.worst_case_rewrite(g), [{"tokens": 16}], num_sms=4)
    assert sk.graph.summary()["has_data_dependent"] is False
    ts = etsim.simulate(sk, {"tokens": 16}, routing=routing, seed=3)
    td = etsim.simulate(etsim.lower_dynamic(g), {"tokens": 16}, routing=routing, seed=3)
    assert g.instantiate({"tokens": 16}, routing=routing, seed=3).check(td) == []
    assert all(c == 0 for c in ts.final_counters + td.final_counters)


def test_metrics_and_exports():
    g = etsim.all_gather_gemm(3, 2)
    t = etsim.simulate(etsim.lower_dynamic(g), num_sms=2, seed=0)
    stats = etsim.metrics(t)
    assert stats["makespan"] == t.makespan
    per = stats["per_resource"]
    assert len(per) == 3  # 2 SMs + 1 DMA channel
    assert all(r["busy"] + r["spin"] + r["idle"] == t.makespan for r in per)

    chrome = json.loads(t.to_chrome_json())
    assert chrome["otherData"]["makespan"] == t.makespan
    assert t.to_csv().splitlines()[0].startswith("kind,resource")


def test_graph_json_round_trip():
    g = etsim.random_dag(10, 14, seed=5)
    text = g.to_json()
    assert etsim.Graph.from_json(text).to_json() == text


def test_errors_are_typed():
    g = etsim.gemm_reduce_scatter("4", 2)
    k = etsim.lower_static(g, [{}], num_sms=2)
    with pytest.raises(etsim.SimulationError):
        etsim.simulate(k, step_limit=2)
    with pytest.raises(etsim.GraphError):
        etsim.Graph.from_json("not a graph")
    with pytest.raises(etsim.GraphError):
        etsim.lower_static(etsim.moe_layer(tokens=4), [{"tokens": 4}])


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
