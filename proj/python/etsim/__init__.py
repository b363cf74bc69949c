"""Event-tensor megakernel compiler and deterministic multi-SM simulator."""

from ._etsim import (
    DynamicKernel,
    Graph,
    GraphError,
    Materialized,
    SimulationError,
    StaticKernel,
    Trace,
    all_gather_gemm,
    enable_early_push,
    gemm_reduce_scatter,
    load_kernel,
    lower_dynamic,
    lower_static,
    metrics,
    moe_layer,
    moe_realization,
    random_dag,
    simulate,
    simulate_barrier,
    splitk_rowsum,
    worst_case_rewrite,
)

__all__ = [
    "DynamicKernel",
    "Graph",
    "GraphError",
    "Materialized",
    "SimulationError",
    "StaticKernel",
    "Trace",
    "all_gather_gemm",
    "enable_early_push",
    "gemm_reduce_scatter",
    "load_kernel",
    "lower_dynamic",
    "lower_static",
    "metrics",
    "moe_layer",
    "moe_realization",
    "random_dag",
    "simulate",
    "simulate_barrier",
    "splitk_rowsum",
    "worst_case_rewrite",
]
