"""Canonical domain types shared by every other module.

Defines the hardware description (accelerator, node, system), the
benchmark workload definition, the nine-layer system declaration, and
the per-trial run record, together with strict JSON (de)serialization
and the derived hardware peak rates.

All types are immutable after construction and safe to share across
threads.  Construction validates invariants and raises
:class:`~hpcbench.errors.SchemaError` naming the offending field.
"""

from dataclasses import dataclass, field, fields
from enum import Enum
import json
import math
from typing import Any, Mapping, Optional

from .errors import MissingPrecision, ParseError, SchemaError

__all__ = [
    "PrecisionMode",
    "BenchLevel",
    "TargetQuality",
    "AcceleratorSpec",
    "NodeSpec",
    "SystemConfig",
    "WorkloadSpec",
    "NineLayerDeclaration",
    "RunRecord",
    "derive_peaks",
    "loads",
    "dumps",
]


class PrecisionMode(str, Enum):
    """Numeric formats a run may declare.

    MIXED denotes half-precision compute with single-precision
    accumulation.
    """

    FP32 = "fp32"
    FP16 = "fp16"
    BF16 = "bf16"
    MIXED = "mixed"
    INT8 = "int8"
    INT4 = "int4"


class BenchLevel(str, Enum):
    """Benchmarking level: which layer group is under test."""

    HARDWARE = "hardware"
    SYSTEM = "system"
    FREE = "free"


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise SchemaError(message)


def _num(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{name} must be a number, got {value!r}")
    if isinstance(value, float) and not math.isfinite(value):
        raise SchemaError(f"{name} must be finite, got {value!r}")
    return float(value)


def _check_known_fields(data: Mapping[str, Any], cls, lenient: bool) -> dict:
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown and not lenient:
        raise SchemaError(
            f"unknown fields for {cls.__name__}: {', '.join(sorted(unknown))}"
        )
    return {k: v for k, v in data.items() if k in known}


def _construct(cls, kwargs: dict):
    try:
        return cls(**kwargs)
    except TypeError as exc:  # missing required fields
        raise SchemaError(f"{cls.__name__}: {exc}") from None


@dataclass(frozen=True)
class TargetQuality:
    """Quality bar a run is scored against, as a fraction in (0, 1]."""

    metric: str
    value: float

    def __post_init__(self):
        _require(isinstance(self.metric, str) and self.metric != "",
                 "target_quality.metric must be a non-empty string")
        v = _num(self.value, "target_quality.value")
        _require(0.0 < v <= 1.0,
                 f"target_quality.value must be a fraction in (0, 1], got {v} "
                 "(percentages are rejected; write 0.763, not 76.3)")
        object.__setattr__(self, "value", v)

    def to_dict(self) -> dict:
        return {"metric": self.metric, "value": self.value}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], lenient: bool = False):
        return _construct(cls, _check_known_fields(data, cls, lenient))


@dataclass(frozen=True)
class AcceleratorSpec:
    """One AI accelerator: peak rates per precision plus local memory."""

    name: str
    peak_flops: Mapping[PrecisionMode, float]
    memory_bandwidth: float  # bytes/s
    memory_capacity: float   # bytes

    def __post_init__(self):
        peaks = {}
        for mode, rate in dict(self.peak_flops).items():
            mode = PrecisionMode(mode)
            rate = _num(rate, f"peak_flops[{mode.value}]")
            _require(rate > 0, f"peak_flops[{mode.value}] must be positive")
            peaks[mode] = rate
        _require(PrecisionMode.FP32 in peaks, "peak_flops must include fp32")
        object.__setattr__(self, "peak_flops", peaks)
        _require(_num(self.memory_bandwidth, "memory_bandwidth") > 0,
                 "memory_bandwidth must be positive")
        _require(_num(self.memory_capacity, "memory_capacity") > 0,
                 "memory_capacity must be positive")

    def peak_for(self, precision: PrecisionMode) -> float:
        try:
            return self.peak_flops[PrecisionMode(precision)]
        except (KeyError, ValueError):
            raise MissingPrecision(
                f"accelerator {self.name!r} declares no peak for "
                f"{getattr(precision, 'value', precision)}"
            ) from None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "peak_flops": {m.value: v for m, v in self.peak_flops.items()},
            "memory_bandwidth": self.memory_bandwidth,
            "memory_capacity": self.memory_capacity,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], lenient: bool = False):
        kwargs = _check_known_fields(data, cls, lenient)
        raw = kwargs.get("peak_flops")
        if not isinstance(raw, Mapping):
            raise SchemaError("peak_flops must be a mapping of precision to FLOPS")
        try:
            kwargs["peak_flops"] = {PrecisionMode(k): v for k, v in raw.items()}
        except ValueError as exc:
            raise SchemaError(f"unknown precision mode in peak_flops: {exc}") from None
        return _construct(cls, kwargs)


@dataclass(frozen=True)
class NodeSpec:
    """One node of the system: accelerators and their interconnect."""

    accelerators_per_node: int
    accelerator: AcceleratorSpec
    intra_node_bandwidth: float  # bytes/s, accelerator interconnect
    system_memory: float         # bytes
    storage: float               # bytes

    def __post_init__(self):
        _require(isinstance(self.accelerators_per_node, int)
                 and self.accelerators_per_node >= 1,
                 "accelerators_per_node must be an integer >= 1")
        _require(_num(self.intra_node_bandwidth, "intra_node_bandwidth") > 0,
                 "intra_node_bandwidth must be positive")
        _num(self.system_memory, "system_memory")
        _num(self.storage, "storage")

    def to_dict(self) -> dict:
        return {
            "accelerators_per_node": self.accelerators_per_node,
            "accelerator": self.accelerator.to_dict(),
            "intra_node_bandwidth": self.intra_node_bandwidth,
            "system_memory": self.system_memory,
            "storage": self.storage,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], lenient: bool = False):
        kwargs = _check_known_fields(data, cls, lenient)
        acc = kwargs.get("accelerator")
        if not isinstance(acc, Mapping):
            raise SchemaError("accelerator must be an object")
        kwargs["accelerator"] = AcceleratorSpec.from_dict(acc, lenient)
        return _construct(cls, kwargs)


@dataclass(frozen=True)
class SystemConfig:
    """Hardware description of the system under test.

    Bandwidths are bytes/s.  ``inter_node_bandwidth_effective`` is the
    achievable rate of one inter-node link (defaults to the nominal
    rate); it is kept separate because quoted link speeds are usually
    optimistic and often given in bits.
    """

    num_nodes: int
    node: NodeSpec
    inter_node_bandwidth_nominal: float
    inter_node_bandwidth_effective: Optional[float] = None

    def __post_init__(self):
        _require(isinstance(self.num_nodes, int) and self.num_nodes >= 1,
                 "num_nodes must be an integer >= 1")
        nominal = _num(self.inter_node_bandwidth_nominal,
                       "inter_node_bandwidth_nominal")
        _require(nominal > 0, "inter_node_bandwidth_nominal must be positive")
        if self.inter_node_bandwidth_effective is None:
            object.__setattr__(self, "inter_node_bandwidth_effective", nominal)
        eff = _num(self.inter_node_bandwidth_effective,
                   "inter_node_bandwidth_effective")
        _require(0 < eff <= nominal,
                 "inter_node_bandwidth_effective must be positive and <= nominal")

    @property
    def total_accelerators(self) -> int:
        return self.num_nodes * self.node.accelerators_per_node

    def to_dict(self) -> dict:
        return {
            "num_nodes": self.num_nodes,
            "node": self.node.to_dict(),
            "inter_node_bandwidth_nominal": self.inter_node_bandwidth_nominal,
            "inter_node_bandwidth_effective": self.inter_node_bandwidth_effective,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], lenient: bool = False):
        kwargs = _check_known_fields(data, cls, lenient)
        node = kwargs.get("node")
        if not isinstance(node, Mapping):
            raise SchemaError("node must be an object")
        kwargs["node"] = NodeSpec.from_dict(node, lenient)
        return _construct(cls, kwargs)


@dataclass(frozen=True)
class WorkloadSpec:
    """Benchmark definition: per-sample work, gradient size, quality bar.

    ``comp_per_step`` and ``comm_per_step`` describe one training step of
    one rank at the reference per-rank batch: FLOPs of compute and the
    number of parameters exchanged.  ``bytes_per_param`` defaults to 4
    (single-precision gradients) and is declarable per workload.
    """

    name: str
    flops_per_sample: float      # FLOPs, work per sample (not a rate)
    params_count: int
    target_quality: TargetQuality
    quality_exponent_n: int
    epochs: int
    dataset_samples: int
    min_runs: int
    comp_per_step: float = 0.0   # FLOPs per rank per step
    comm_per_step: int = 0       # parameters exchanged per step
    bytes_per_param: int = 4

    def __post_init__(self):
        _require(isinstance(self.name, str) and self.name != "",
                 "workload name must be a non-empty string")
        _require(_num(self.flops_per_sample, "flops_per_sample") > 0,
                 "flops_per_sample must be positive")
        _require(isinstance(self.quality_exponent_n, int)
                 and self.quality_exponent_n >= 1,
                 "quality_exponent_n must be an integer >= 1")
        _require(isinstance(self.min_runs, int) and self.min_runs >= 1,
                 "min_runs must be an integer >= 1")
        _require(isinstance(self.epochs, int) and self.epochs >= 1,
                 "epochs must be an integer >= 1")
        _require(isinstance(self.dataset_samples, int) and self.dataset_samples >= 1,
                 "dataset_samples must be an integer >= 1")
        for name in ("params_count", "comm_per_step", "bytes_per_param"):
            _require(isinstance(getattr(self, name), int) and getattr(self, name) >= 0,
                     f"{name} must be a non-negative integer")
        _require(_num(self.comp_per_step, "comp_per_step") >= 0,
                 "comp_per_step must be non-negative")

    @property
    def gradient_bytes(self) -> int:
        """Size of one rank's gradient message in bytes."""
        return self.params_count * self.bytes_per_param

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "flops_per_sample": self.flops_per_sample,
            "params_count": self.params_count,
            "bytes_per_param": self.bytes_per_param,
            "comp_per_step": self.comp_per_step,
            "comm_per_step": self.comm_per_step,
            "target_quality": self.target_quality.to_dict(),
            "quality_exponent_n": self.quality_exponent_n,
            "epochs": self.epochs,
            "dataset_samples": self.dataset_samples,
            "min_runs": self.min_runs,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], lenient: bool = False):
        kwargs = _check_known_fields(data, cls, lenient)
        tq = kwargs.get("target_quality")
        if not isinstance(tq, Mapping):
            raise SchemaError("target_quality must be an object")
        kwargs["target_quality"] = TargetQuality.from_dict(tq, lenient)
        return _construct(cls, kwargs)


#: 1-based layer indices of the nine-layer system decomposition.
LAYER_NAMES = {
    1: "hardware",
    2: "os",
    3: "communication_libraries",
    4: "accelerators_and_libraries",
    5: "ai_framework",
    6: "programming_model",
    7: "workload",
    8: "hyper_parameters",
    9: "problem_domain",
}


@dataclass(frozen=True)
class NineLayerDeclaration:
    """Full-stack declaration of a run, one key/value map per layer.

    Layers, bottom up: 1 hardware, 2 OS, 3 communication libraries,
    4 accelerators and their libraries, 5 AI framework, 6 programming
    model (``parallel_mode``, ``sync_mode``), 7 workload/algorithm id,
    8 hyper-parameters (``batchsize``, ``lr_policy``, others),
    9 problem domain (``dataset``, ``target_quality``, ``epochs``).
    """

    layers: tuple

    def __post_init__(self):
        _require(isinstance(self.layers, (tuple, list)) and len(self.layers) == 9,
                 "declaration must contain exactly nine layers")
        frozen = []
        for i, layer in enumerate(self.layers, start=1):
            if not isinstance(layer, Mapping):
                raise SchemaError(f"layer {i} must be a key/value mapping")
            for key in layer:
                _require(isinstance(key, str) and key != "",
                         f"layer {i} keys must be non-empty strings")
            frozen.append(dict(layer))
        object.__setattr__(self, "layers", tuple(frozen))

    def layer(self, index: int) -> Mapping[str, Any]:
        """Return layer ``index`` (1-based)."""
        _require(1 <= index <= 9, "layer index must be in [1, 9]")
        return self.layers[index - 1]

    @property
    def workload_id(self) -> Any:
        l7 = self.layer(7)
        return l7.get("algorithm", l7.get("id"))

    @property
    def sync_mode(self) -> Any:
        return self.layer(6).get("sync_mode")

    def to_dict(self) -> dict:
        return {"layers": [dict(layer) for layer in self.layers]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], lenient: bool = False):
        kwargs = _check_known_fields(data, cls, lenient)
        layers = kwargs.get("layers")
        if not isinstance(layers, (list, tuple)):
            raise SchemaError("layers must be an array of nine objects")
        return cls(layers=tuple(layers))


@dataclass(frozen=True)
class RunRecord:
    """One benchmarking trial.

    ``wall_time`` is the time-to-quality clock: it starts when the
    workload reads its first batch and stops when the reported epochs
    are reached.  ``achieved_quality`` is always a measured input,
    never derived.
    """

    run_id: str
    workload: WorkloadSpec
    system: SystemConfig
    scale: int                      # accelerators used
    precision: PrecisionMode
    global_batchsize: int
    achieved_quality: float
    wall_time: float                # seconds
    epochs_to_quality: float
    samples_per_second_per_rank: float
    num_ranks: int
    level: BenchLevel
    declaration: NineLayerDeclaration
    average_power: Optional[float] = None  # watts

    def __post_init__(self):
        _require(isinstance(self.run_id, str) and self.run_id != "",
                 "run_id must be a non-empty string")
        _require(_num(self.wall_time, "wall_time") > 0, "wall_time must be positive")
        q = _num(self.achieved_quality, "achieved_quality")
        _require(0.0 <= q <= 1.0, f"achieved_quality must be in [0, 1], got {q}")
        _require(isinstance(self.scale, int) and self.scale >= 1,
                 "scale must be an integer >= 1")
        _require(self.scale <= self.system.total_accelerators,
                 f"scale {self.scale} exceeds the system's "
                 f"{self.system.total_accelerators} accelerators")
        _require(isinstance(self.num_ranks, int) and self.num_ranks >= 1,
                 "num_ranks must be an integer >= 1")
        _require(isinstance(self.global_batchsize, int) and self.global_batchsize >= 1,
                 "global_batchsize must be an integer >= 1")
        _require(_num(self.epochs_to_quality, "epochs_to_quality") > 0,
                 "epochs_to_quality must be positive")
        _require(_num(self.samples_per_second_per_rank,
                      "samples_per_second_per_rank") >= 0,
                 "samples_per_second_per_rank must be non-negative")
        if self.average_power is not None:
            _require(_num(self.average_power, "average_power") > 0,
                     "average_power must be positive when present")
        object.__setattr__(self, "precision", PrecisionMode(self.precision))
        object.__setattr__(self, "level", BenchLevel(self.level))

    def to_dict(self) -> dict:
        doc = {
            "run_id": self.run_id,
            "workload": self.workload.to_dict(),
            "system": self.system.to_dict(),
            "scale": self.scale,
            "precision": self.precision.value,
            "global_batchsize": self.global_batchsize,
            "achieved_quality": self.achieved_quality,
            "wall_time": self.wall_time,
            "epochs_to_quality": self.epochs_to_quality,
            "samples_per_second_per_rank": self.samples_per_second_per_rank,
            "num_ranks": self.num_ranks,
            "level": self.level.value,
            "declaration": self.declaration.to_dict(),
            "average_power": self.average_power,
        }
        return doc

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], lenient: bool = False):
        kwargs = _check_known_fields(data, cls, lenient)
        for name, sub in (("workload", WorkloadSpec),
                          ("system", SystemConfig),
                          ("declaration", NineLayerDeclaration)):
            raw = kwargs.get(name)
            if not isinstance(raw, Mapping):
                raise SchemaError(f"{name} must be an object")
            kwargs[name] = sub.from_dict(raw, lenient)
        try:
            kwargs["precision"] = PrecisionMode(kwargs.get("precision"))
            kwargs["level"] = BenchLevel(kwargs.get("level"))
        except ValueError as exc:
            raise SchemaError(str(exc)) from None
        return _construct(cls, kwargs)


def derive_peaks(system: SystemConfig,
                 precision: PrecisionMode) -> tuple[float, float]:
    """Theoretical peak rates of one node and of the full system.

    Both are linear aggregates of the per-accelerator peak: the
    single-node peak is ``accelerators_per_node`` times the accelerator
    rate, the distributed peak is ``num_nodes`` times the single-node
    peak.

    Raises :class:`MissingPrecision` if the accelerator declares no
    peak for ``precision``.
    """
    per_accelerator = system.node.accelerator.peak_for(precision)
    single_node = system.node.accelerators_per_node * per_accelerator
    return single_node, system.num_nodes * single_node


_TYPE_BY_KIND = {
    "system": SystemConfig,
    "workload": WorkloadSpec,
    "run": RunRecord,
    "declaration": NineLayerDeclaration,
}


def loads(text: str, kind: str, lenient: bool = False, path=None):
    """Parse a JSON document into the named domain type.

    ``kind`` is one of ``system``, ``workload``, ``run``,
    ``declaration``.  Unknown fields are rejected unless ``lenient``.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, offset=exc.colno) from None
    if not isinstance(data, Mapping):
        raise SchemaError(f"top-level JSON value must be an object ({path or kind})")
    try:
        cls = _TYPE_BY_KIND[kind]
    except KeyError:
        raise ValueError(f"unknown document kind {kind!r}") from None
    return cls.from_dict(data, lenient=lenient)


def dumps(obj, indent: int = 2) -> str:
    """Serialize a domain object to JSON (inverse of :func:`loads`)."""
    return json.dumps(obj.to_dict(), indent=indent, sort_keys=False)
