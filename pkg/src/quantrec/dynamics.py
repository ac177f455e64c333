"""The QUANT iteration: step float weights by the coarse gradient taken at
their normalized projection, then re-project.

    y^{t+1} = y^t - eta_t * g(w^t),    w^{t+1} = nproj(y^{t+1})
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .model import GaussianSampler, Teacher, coarse_grad_constant, population_coarse_grad, sample_coarse_grad
from .quantize import QuantizationMode, QuantizedWeight, _as_vector, normalized_project


class StepError(RuntimeError):
    def __init__(self, t: int, message: str):
        super().__init__(f"step t={t}: {message}")
        self.t = t


@dataclass(frozen=True)
class LearningRateSchedule:
    """Step sizes ``eta_t`` for ``t = 0, 1, ...``.

    ``constant``: ``eta``. ``harmonic``: ``a / (t + 1)``. ``table``: explicit
    values; after the table ends the last value repeats when ``repeat_last``
    is set, otherwise asking for it is an error.
    """

    kind: str
    value: float = 0.0
    table: tuple[float, ...] = ()
    repeat_last: bool = True
    eta_max: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic", "table"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        object.__setattr__(self, "table", tuple(float(x) for x in self.table))
        if self.kind == "table":
            if not self.table:
                raise ValueError("table schedule needs at least one value")
            peak = max(self.table)
            if min(self.table) <= 0:
                raise ValueError("learning rates must be positive")
        else:
            if not self.value > 0:
                raise ValueError("learning rate must be positive")
            peak = self.value
        if self.eta_max is None:
            object.__setattr__(self, "eta_max", float(peak))
        elif peak > self.eta_max:
            raise ValueError(f"schedule exceeds eta_max={self.eta_max}")

    @classmethod
    def constant(cls, eta: float) -> "LearningRateSchedule":
        return cls("constant", float(eta))

    @classmethod
    def harmonic(cls, a: float) -> "LearningRateSchedule":
        return cls("harmonic", float(a))

    @classmethod
    def from_table(cls, values, repeat_last: bool = True) -> "LearningRateSchedule":
        return cls("table", table=tuple(values), repeat_last=repeat_last)

    @property
    def sum_diverges(self) -> bool:
        return self.kind != "table" or self.repeat_last

    def __call__(self, t: int) -> float:
        if t < 0:
            raise ValueError("t must be nonnegative")
        if self.kind == "constant":
            return self.value
        if self.kind == "harmonic":
            return self.value / (t + 1)
        if t < len(self.table):
            return self.table[t]
        if not self.repeat_last:
            raise IndexError(f"table schedule has no entry for t={t}")
        return self.table[-1]

    def to_dict(self) -> dict:
        if self.kind == "constant":
            d = {"kind": "constant", "eta": self.value}
        elif self.kind == "harmonic":
            d = {"kind": "harmonic", "a": self.value}
        else:
            d = {"kind": "table", "values": list(self.table), "repeat_last": self.repeat_last}
        d["eta_max"] = self.eta_max
        return d


class UpdateRule(str, enum.Enum):
    QUANT = "quant"
    BINARYCONNECT = "binaryconnect"


@dataclass(frozen=True)
class GradientSource:
    """Population (closed-form) coarse gradient, or a sampled mini-batch average.

    Sampled batches for step ``t`` come from ``GaussianSampler(seed, shard=t)``,
    so a step is reproducible on its own.
    """

    kind: str = "population"
    batch: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("population", "sampled"):
            raise ValueError(f"unknown gradient source {self.kind!r}")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")

    def to_dict(self) -> dict:
        if self.kind == "population":
            return {"source": "population"}
        return {"source": "sampled", "batch": self.batch, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    n: int
    mode: QuantizationMode
    teacher: Teacher
    schedule: LearningRateSchedule
    iterations: int
    y0: np.ndarray
    gradient: GradientSource = field(default_factory=GradientSource)
    update_rule: UpdateRule = UpdateRule.QUANT
    name: str = "run"

    def __post_init__(self):
        object.__setattr__(self, "mode", QuantizationMode.parse(self.mode))
        object.__setattr__(self, "update_rule", UpdateRule(self.update_rule))
        y0 = _as_vector(self.y0).copy()
        y0.setflags(write=False)
        object.__setattr__(self, "y0", y0)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if y0.size != self.n or self.teacher.n != self.n:
            raise ValueError("dimension mismatch between n, y0 and teacher")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not np.any(y0):
            raise ValueError("y0 must be nonzero")
        if self.gradient.kind == "sampled":
            self.teacher.require_v()

    def replace(self, **changes) -> "ExperimentConfig":
        fields = dict(
            n=self.n, mode=self.mode, teacher=self.teacher, schedule=self.schedule,
            iterations=self.iterations, y0=self.y0, gradient=self.gradient,
            update_rule=self.update_rule, name=self.name,
        )
        fields.update(changes)
        return ExperimentConfig(**fields)


def coarse_gradient(w: QuantizedWeight, t: int, config: ExperimentConfig) -> np.ndarray:
    src = config.gradient
    if src.kind == "population":
        return population_coarse_grad(w.vector, config.teacher)
    v = config.teacher.require_v()
    Z = GaussianSampler(src.seed, shard=t).draw(src.batch, v.size, config.n)
    return sample_coarse_grad(Z, w.vector, config.teacher).mean(axis=0)


def _advance(y, w, t, config):
    y_next = y - config.schedule(t) * coarse_gradient(w, t, config)
    if not np.any(y_next):
        raise StepError(t, "float weights hit exactly zero; restart from a perturbed y0")
    return y_next, normalized_project(y_next, config.mode)


def quant_step(y, t: int, config: ExperimentConfig):
    """One QUANT step from ``y^t``; returns ``(y^{t+1}, w^{t+1})``."""
    y = _as_vector(y)
    if not np.any(y):
        raise StepError(t, "y must be nonzero")
    return _advance(y, normalized_project(y, config.mode), t, config)


def binaryconnect_step(y, t: int, config: ExperimentConfig):
    """BinaryConnect-style step: update ``y^t`` (not ``w^t``) with the gradient at ``w^t``.

    With the coarse gradient plugged in, this is the same map as
    :func:`quant_step`; it is kept separate so the coincidence is testable.
    """
    y = _as_vector(y)
    if not np.any(y):
        raise StepError(t, "y must be nonzero")
    w = normalized_project(y, config.mode)
    g = coarse_gradient(w, t, config)
    y_next = y - config.schedule(t) * g
    if not np.any(y_next):
        raise StepError(t, "float weights hit exactly zero; restart from a perturbed y0")
    return y_next, normalized_project(y_next, config.mode)


def true_gradient_step(y, t, config):
    """Projected descent on the true gradient; deliberately unsupported.

    The sample loss is piecewise constant in ``w`` (binary activations), so
    its gradient is zero almost everywhere and the step would never move.
    """
    raise NotImplementedError(
        "the true gradient of the quantized-activation loss is zero almost everywhere; "
        "use the coarse (straight-through) gradient instead"
    )


class Record(NamedTuple):
    t: int
    eta: float
    y: np.ndarray
    w: QuantizedWeight


@dataclass(eq=False)
class Trajectory:
    """Full-precision record of a run.

    Row ``t`` holds ``y^t``, the sign pattern of ``w^t = nproj(y^t)`` and
    ``eta_t``, the step size that maps ``y^t`` to ``y^{t+1}``.
    """

    mode: QuantizationMode
    eta: np.ndarray
    y: np.ndarray
    signs: np.ndarray
    config: ExperimentConfig | None = None

    def __post_init__(self):
        self.mode = QuantizationMode.parse(self.mode)
        self.eta = np.asarray(self.eta, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.signs = np.asarray(self.signs, dtype=np.int8)
        if self.y.ndim != 2 or self.signs.shape != self.y.shape or self.eta.shape != (self.y.shape[0],):
            raise ValueError("inconsistent trajectory array shapes")

    def __len__(self):
        return self.y.shape[0]

    @property
    def n(self) -> int:
        return self.y.shape[1]

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def delta(self) -> np.ndarray:
        k = np.count_nonzero(self.signs, axis=1)
        return 1.0 / np.sqrt(k)

    @property
    def w(self) -> np.ndarray:
        return self.signs * self.delta[:, None]

    def w_at(self, t: int) -> QuantizedWeight:
        return QuantizedWeight.unit(self.signs[t], self.mode)

    def keys(self) -> list[tuple[int, ...]]:
        return [tuple(int(s) for s in row) for row in self.signs]

    def records(self) -> Iterator[Record]:
        for t in range(len(self)):
            yield Record(t, float(self.eta[t]), self.y[t], self.w_at(t))

    def sign_matrix(self, last: int | None = None) -> np.ndarray:
        """Coordinates by iterations, entries in {-1, 0, 1}."""
        s = self.signs if last is None else self.signs[-last:]
        return s.T.copy()

    def tail(self, fraction: float) -> "Trajectory":
        if not 0 < fraction <= 1:
            raise ValueError("tail fraction must lie in (0, 1]")
        start = len(self) - max(1, math.ceil(fraction * len(self)))
        return Trajectory(self.mode, self.eta[start:], self.y[start:], self.signs[start:], self.config)

    def tail_start(self, fraction: float) -> int:
        return len(self) - len(self.tail(fraction))


def run(config: ExperimentConfig) -> Trajectory:
    """Iterate ``config.iterations`` steps from ``config.y0``, recording every state."""
    T = config.iterations
    ys = np.empty((T + 1, config.n))
    signs = np.empty((T + 1, config.n), dtype=np.int8)
    etas = np.empty(T + 1)
    y = np.array(config.y0, dtype=float)
    w = normalized_project(y, config.mode)
    for t in range(T):
        ys[t] = y
        signs[t] = w.signs
        etas[t] = config.schedule(t)
        if config.update_rule is UpdateRule.BINARYCONNECT:
            y, w = binaryconnect_step(y, t, config)
        else:
            y, w = _advance(y, w, t, config)
    ys[T] = y
    signs[T] = w.signs
    etas[T] = config.schedule(T)
    return Trajectory(config.mode, etas, ys, signs, config)


EXAMPLE1_W_STAR = (1 / 6, 1 / 6, 1 / 6, 0.5 * math.sqrt(11 / 3))


def example1_lambda(eta: float, v_norm_sq: float) -> float:
    """Per-step unit ``eta ||v||^2 / (6 sqrt(2 pi))`` of the period-3 example."""
    return eta * coarse_grad_constant(v_norm_sq) / 3.0


def example1_config(y0_fractions=(0.5, 0.5, 0.5, 0.5), eta: float = 0.1, v=(1.0, 1.0, 1.0, 1.0),
                    iterations: int = 1000) -> ExperimentConfig:
    """Binary period-3 counterexample: ``w^t`` cycles and never hits the optimum.

    The fractions place ``y0`` in ``(-lam, 0)``, ``(0, lam)``, ``(lam, 2 lam)``
    and ``(0, inf)`` respectively; the last one through ``f / (1 - f)``.
    """
    f = tuple(float(x) for x in y0_fractions)
    if len(f) != 4 or not all(0 < x < 1 for x in f):
        raise ValueError("need four fractions strictly inside (0, 1)")
    teacher = Teacher.from_vectors(EXAMPLE1_W_STAR, v)
    lam = example1_lambda(eta, teacher.v_norm_sq)
    y0 = np.array([-lam * f[0], lam * f[1], lam * (1 + f[2]), f[3] / (1 - f[3])])
    return ExperimentConfig(
        n=4, mode=QuantizationMode.BINARY, teacher=teacher,
        schedule=LearningRateSchedule.constant(eta), iterations=iterations, y0=y0,
        name="example1",
    )
