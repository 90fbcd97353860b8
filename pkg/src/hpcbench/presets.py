"""Ready-made fixtures: the case-study cluster and the two benchmark
workloads used throughout the tests and demos.

The cluster is eight nodes of eight V100-class accelerators (15 TFLOPS
FP32, 130 TFLOPS mixed per device), 300 GB/s intra-node interconnect,
and a 10 Gb/s inter-node link stored as 1.25 GB/s nominal with
1.2 GB/s effective.  Measured kernel ceilings and sustained-efficiency
figures are empirical inputs, recorded here as data.
"""

from .core import (
    AcceleratorSpec,
    NineLayerDeclaration,
    NodeSpec,
    PrecisionMode,
    SystemConfig,
    TargetQuality,
    WorkloadSpec,
)
from .roofline import Ceiling, CeilingKind
from .units import GIGA, TERA, BITS_PER_BYTE

__all__ = [
    "case_study_system",
    "ewa_workload",
    "image_classification_workload",
    "single_node_ceilings",
    "distributed_ceilings",
    "COMPUTE_EFFICIENCY",
    "reference_declaration",
]

#: Sustained fraction of peak the workloads' kernels reach (measured).
COMPUTE_EFFICIENCY = {
    ("image_classification", PrecisionMode.FP32): 0.48,
    ("image_classification", PrecisionMode.MIXED): 0.12,
    ("extreme_weather", PrecisionMode.FP32): 0.26,
}


def case_study_system(num_nodes: int = 8) -> SystemConfig:
    accelerator = AcceleratorSpec(
        name="V100",
        peak_flops={PrecisionMode.FP32: 15 * TERA,
                    PrecisionMode.MIXED: 130 * TERA},
        memory_bandwidth=1134 * GIGA,
        memory_capacity=32 * GIGA,
    )
    node = NodeSpec(
        accelerators_per_node=8,
        accelerator=accelerator,
        intra_node_bandwidth=300 * GIGA,
        system_memory=1.5e12,
        storage=8e12,
    )
    return SystemConfig(
        num_nodes=num_nodes,
        node=node,
        inter_node_bandwidth_nominal=10 * GIGA / BITS_PER_BYTE,
        inter_node_bandwidth_effective=1.2 * GIGA,
    )


def ewa_workload() -> WorkloadSpec:
    """Extreme weather analytics: object detection on climate images."""
    return WorkloadSpec(
        name="extreme_weather",
        flops_per_sample=691 * GIGA,
        params_count=41_000_000,
        bytes_per_param=4,
        comp_per_step=691 * GIGA,   # per-rank batch of 1
        comm_per_step=41_000_000,
        target_quality=TargetQuality(metric="map_iou_0.5", value=0.35),
        quality_exponent_n=10,
        epochs=50,
        dataset_samples=13_140,
        min_runs=5,
    )


def image_classification_workload() -> WorkloadSpec:
    """Large-scale image classification on a 1.28M-sample dataset."""
    return WorkloadSpec(
        name="image_classification",
        flops_per_sample=23 * GIGA,
        params_count=25_000_000,
        bytes_per_param=4,
        comp_per_step=2944 * GIGA,  # per-rank batch of 128
        comm_per_step=25_000_000,
        target_quality=TargetQuality(metric="top1_accuracy", value=0.763),
        quality_exponent_n=5,
        epochs=90,
        dataset_samples=1_280_000,
        min_runs=10,
    )


def single_node_ceilings() -> tuple:
    """Measured kernel and memory ceilings of one case-study node."""
    return (
        Ceiling("gemm_mixed", CeilingKind.COMPUTATION, 636 * TERA),
        Ceiling("conv_mixed", CeilingKind.COMPUTATION, 176 * TERA),
        Ceiling("gemm_fp32", CeilingKind.COMPUTATION, 115 * TERA),
        Ceiling("conv_fp32", CeilingKind.COMPUTATION, 112 * TERA),
        Ceiling("memory_bandwidth", CeilingKind.COMMUNICATION, 1134 * GIGA),
    )


def distributed_ceilings() -> tuple:
    """Measured kernel ceilings of the full case-study cluster; the
    intra-node interconnect sits above the inter-node slant."""
    return (
        Ceiling("gemm_mixed", CeilingKind.COMPUTATION, 5091 * TERA),
        Ceiling("conv_mixed", CeilingKind.COMPUTATION, 2376 * TERA),
        Ceiling("conv_fp32", CeilingKind.COMPUTATION, 976 * TERA),
        Ceiling("gemm_fp32", CeilingKind.COMPUTATION, 920 * TERA),
        Ceiling("intra_node_interconnect", CeilingKind.COMMUNICATION,
                300 * GIGA),
    )


def reference_declaration(workload: WorkloadSpec,
                          batchsize: int = 256) -> NineLayerDeclaration:
    """The committee reference declaration submissions are audited against."""
    return NineLayerDeclaration(layers=(
        {"cpu": "xeon-platinum-8268", "network": "10gbe", "nodes": 8},
        {"os": "linux"},
        {"allreduce": "ring", "collectives": "nccl"},
        {"accelerator": "V100", "precision": "fp32",
         "kernel_library": "cudnn"},
        {"framework": "tensorflow"},
        {"parallel_mode": "data_parallel", "sync_mode": "synchronous"},
        {"algorithm": workload.name},
        {"batchsize": batchsize, "lr_policy": "linear_scaling_warmup",
         "weight_decay": "reference", "momentum": "reference"},
        {"dataset": f"{workload.name}-dataset",
         "target_quality": workload.target_quality.value,
         "epochs": workload.epochs},
    ))
