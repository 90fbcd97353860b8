"""Benchmarking analytics for HPC AI systems.

The package measures, models, audits, and ranks distributed deep
learning training systems:

* :mod:`hpcbench.core` -- domain types, JSON schemas, hardware peaks
* :mod:`hpcbench.metrics` -- quality-penalized scores (VFLOPS, VFLOPS/W,
  time-to-quality) and measurement arithmetic
* :mod:`hpcbench.roofline` -- communication-intensity rooflines with
  measured ceilings, bound classification, and what-if transforms
* :mod:`hpcbench.rules` -- nine-layer equivalence policies, learning
  rate schedules, run aggregation, repeatability and replicability
* :mod:`hpcbench.simulator` -- analytical data-parallel training model
  that emits synthetic run records
* :mod:`hpcbench.store` / :mod:`hpcbench.report` -- file store,
  ingestion, ranking, and report generation
* :mod:`hpcbench.cli` -- the ``hpcbench`` command
"""

from .core import (
    AcceleratorSpec,
    BenchLevel,
    NineLayerDeclaration,
    NodeSpec,
    PrecisionMode,
    RunRecord,
    SystemConfig,
    TargetQuality,
    WorkloadSpec,
    derive_peaks,
)
from .metrics import (
    Score,
    flops_per_sample_from_profile,
    parallel_efficiency,
    penalty_coefficient,
    scaling_ratio,
    score_run,
    throughput_flops,
    vflops,
    vflops_per_watt,
)
from .roofline import (
    Boundedness,
    Ceiling,
    CeilingKind,
    Compress,
    PrecisionShift,
    RooflineMode,
    RooflineModel,
    RooflinePoint,
    apply_whatif,
    attained_bound,
    build_model,
    classify,
    coi,
    export_plot,
    place_run,
    ridge_point,
    validate_point,
)
from .rules import (
    AggregateResult,
    Decay,
    Severity,
    Violation,
    aggregate_runs,
    check_equivalence,
    lr_schedule,
    repeatability_report,
    replicability_check,
    validate_declaration,
)
from .simulator import (
    OverlapModel,
    PhaseTimeline,
    SimulationOptions,
    TopologyKind,
    TopologySpec,
    allreduce_time,
    allreduce_traffic,
    phase_breakdown,
    simulate_training,
    step_time,
)
from .report import RankingRow, emit_report, rank
from .store import ResultsStore, ingest

__version__ = "0.1.0"
