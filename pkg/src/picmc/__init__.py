"""1D3V electrostatic particle-in-cell engine with Monte Carlo collisions.

Cell-sorted particle storage, deterministic counter-based RNG streams, a
task-dependency scheduler, rank-style domain decomposition, and a benchmark
harness for scaling and memory-layout studies. Results are bitwise
reproducible for a fixed seed across worker counts, layouts, and backends.
"""

from . import backends
from .collisions import CollisionRates, CollisionTally, Roles
from .config import CollisionSetup, RunConfig, config_from_dict, load_config
from .core import (
    CellSortedStore,
    Grid1D,
    PhysicalConstants,
    SpeciesDef,
    init_plasma,
    store_total,
)
from .errors import (
    CflViolation,
    ConfigError,
    ContractViolation,
    EngineError,
    InitError,
    SchedulerError,
)
from .harness import (
    RunMetrics,
    ScalingReport,
    compute_parallel_efficiency,
    compute_speedup,
    run_simulation,
    strong_scaling_sweep,
    weak_scaling_sweep,
)
from .layout_lab import LayoutVariant, bench_layouts, convert_layout, mover_kernel
from .scheduler import DataRegion, Scheduler, TaskSpec, TraceEvent

__version__ = "0.1.0"

__all__ = [
    "CellSortedStore",
    "CflViolation",
    "CollisionRates",
    "CollisionSetup",
    "CollisionTally",
    "ConfigError",
    "ContractViolation",
    "DataRegion",
    "EngineError",
    "Grid1D",
    "InitError",
    "LayoutVariant",
    "PhysicalConstants",
    "Roles",
    "RunConfig",
    "RunMetrics",
    "ScalingReport",
    "Scheduler",
    "SchedulerError",
    "SpeciesDef",
    "TaskSpec",
    "TraceEvent",
    "backends",
    "bench_layouts",
    "compute_parallel_efficiency",
    "compute_speedup",
    "config_from_dict",
    "convert_layout",
    "init_plasma",
    "load_config",
    "mover_kernel",
    "run_simulation",
    "store_total",
    "strong_scaling_sweep",
    "weak_scaling_sweep",
]
