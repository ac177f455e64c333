"""Quantized-weight training of a one-hidden-layer binary-activation network
with coarse (straight-through) gradients: projections, dynamics, analysis."""

from .dynamics import (
    ExperimentConfig,
    GradientSource,
    LearningRateSchedule,
    Trajectory,
    UpdateRule,
    run,
)
from .geometry import VertexSet, cone_of, decompose_in_cone, vertex_set
from .model import GaussianSampler, Teacher, population_coarse_grad, population_loss
from .quantize import QuantizationMode, QuantizedWeight, normalized_project, project

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "GaussianSampler",
    "GradientSource",
    "LearningRateSchedule",
    "QuantizationMode",
    "QuantizedWeight",
    "Teacher",
    "Trajectory",
    "UpdateRule",
    "VertexSet",
    "cone_of",
    "decompose_in_cone",
    "normalized_project",
    "population_coarse_grad",
    "population_loss",
    "project",
    "run",
    "vertex_set",
]
