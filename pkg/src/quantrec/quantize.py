"""Projection of real vectors onto binary and ternary weight sets.

The quantized set is a nonnegative scale times a sign pattern: ``{-1, +1}^n``
in binary mode, ``{-1, 0, +1}^n`` in ternary mode.
"""

from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

BRUTE_FORCE_MAX_DIM = 12


class QuantizationMode(str, enum.Enum):
    BINARY = "binary"
    TERNARY = "ternary"

    @classmethod
    def parse(cls, value: "str | QuantizationMode") -> "QuantizationMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown quantization mode {value!r}") from None


@dataclass(frozen=True)
class QuantizedWeight:
    """A point ``delta * signs`` of the quantized set.

    Two normalized states are the same iff their sign patterns agree; use
    :attr:`key` rather than float comparison of coordinates.
    """

    delta: float
    signs: tuple[int, ...]
    mode: QuantizationMode = QuantizationMode.TERNARY

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "mode", QuantizationMode.parse(self.mode))
        if not signs:
            raise ValueError("sign pattern must be non-empty")
        if any(s not in (-1, 0, 1) for s in signs):
            raise ValueError(f"signs must lie in {{-1, 0, 1}}: {signs}")
        if self.mode is QuantizationMode.BINARY and 0 in signs:
            raise ValueError("binary weights cannot have zero entries")
        if not self.delta >= 0:
            raise ValueError(f"scale must be nonnegative, got {self.delta}")

    @property
    def n(self) -> int:
        return len(self.signs)

    @property
    def key(self) -> tuple[int, ...]:
        return self.signs

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.signs) if s != 0)

    @property
    def support_size(self) -> int:
        return sum(1 for s in self.signs if s != 0)

    @property
    def vector(self) -> np.ndarray:
        return self.delta * np.asarray(self.signs, dtype=float)

    def normalized(self) -> "QuantizedWeight":
        return QuantizedWeight.unit(self.signs, self.mode)

    def same_state(self, other: "QuantizedWeight") -> bool:
        return self.signs == other.signs

    @classmethod
    def unit(cls, signs, mode=QuantizationMode.TERNARY) -> "QuantizedWeight":
        """Unit-norm weight with the given sign pattern."""
        signs = tuple(int(s) for s in signs)
        k = sum(1 for s in signs if s != 0)
        if k == 0:
            raise ValueError("the all-zero pattern has no unit-norm scaling")
        return cls(1.0 / math.sqrt(k), signs, mode)


def _as_vector(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError(f"expected a non-empty 1-d vector, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("vector has non-finite entries")
    return y


def _nonzero_vector(y) -> np.ndarray:
    y = _as_vector(y)
    if not np.any(y):
        raise ValueError("projection of the zero vector is undefined")
    return y


def magnitude_order(x) -> np.ndarray:
    """Indices sorting ``|x|`` in descending order, ties by ascending index."""
    return np.argsort(-np.abs(np.asarray(x, dtype=float)), kind="stable")


def bsign(y) -> np.ndarray:
    """Binary sign with ``bsign(0) = +1``."""
    return np.where(np.asarray(y) >= 0, 1, -1).astype(int)


def project_binary(y) -> QuantizedWeight:
    y = _nonzero_vector(y)
    delta = float(np.sum(np.abs(y))) / y.size
    return QuantizedWeight(delta, tuple(bsign(y)), QuantizationMode.BINARY)


def ternary_support_size(y) -> int:
    """Number of largest-magnitude entries kept by the ternary projection.

    Maximizes ``||y_[j]||_1^2 / j`` over ``j``; the smallest maximizer wins.
    """
    y = _nonzero_vector(y)
    mags = np.abs(y)[magnitude_order(y)]
    cums = np.cumsum(mags)
    scores = cums * cums / np.arange(1, y.size + 1)
    return int(np.argmax(scores)) + 1


def project_ternary(y) -> QuantizedWeight:
    y = _nonzero_vector(y)
    order = magnitude_order(y)
    mags = np.abs(y)[order]
    cums = np.cumsum(mags)
    scores = cums * cums / np.arange(1, y.size + 1)
    j = int(np.argmax(scores)) + 1
    signs = np.zeros(y.size, dtype=int)
    top = order[:j]
    signs[top] = np.sign(y[top]).astype(int)
    return QuantizedWeight(float(cums[j - 1]) / j, tuple(signs), QuantizationMode.TERNARY)


def project(y, mode) -> QuantizedWeight:
    mode = QuantizationMode.parse(mode)
    if mode is QuantizationMode.BINARY:
        return project_binary(y)
    return project_ternary(y)


def normalized_project(y, mode) -> QuantizedWeight:
    """Projection onto the quantized set rescaled to unit Euclidean norm."""
    return project(y, mode).normalized()


def projection_distance(y, w: QuantizedWeight) -> float:
    return float(np.linalg.norm(_as_vector(y) - w.vector))


@functools.lru_cache(maxsize=None)
def sign_patterns(n: int, mode: QuantizationMode) -> np.ndarray:
    """All candidate sign patterns in lexicographic order (zero pattern excluded)."""
    values = (-1, 1) if mode is QuantizationMode.BINARY else (-1, 0, 1)
    pats = np.array(list(itertools.product(values, repeat=n)), dtype=float)
    if mode is QuantizationMode.TERNARY:
        pats = pats[np.any(pats != 0, axis=1)]
    pats.setflags(write=False)
    return pats


def brute_force_candidates(y, mode, rtol: float = 1e-12) -> list[QuantizedWeight]:
    """Every distance-optimal quantized point, by exhaustive enumeration.

    Candidates within ``rtol * ||y||^2`` of the best squared distance are
    returned sorted by support size, then lexicographically by pattern.
    """
    mode = QuantizationMode.parse(mode)
    y = _nonzero_vector(y)
    n = y.size
    if n > BRUTE_FORCE_MAX_DIM:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_DIM}, got {n}")
    pats = sign_patterns(n, mode)
    dots = pats @ y
    sizes = np.sum(pats != 0, axis=1)
    deltas = np.maximum(dots / sizes, 0.0)
    yy = float(y @ y)
    dist2 = yy - 2.0 * deltas * dots + deltas * deltas * sizes
    best = float(dist2.min())
    hits = np.flatnonzero(dist2 <= best + rtol * yy)
    hits = hits[np.argsort(sizes[hits], kind="stable")]
    return [QuantizedWeight(float(deltas[i]), tuple(pats[i].astype(int)), mode) for i in hits]


def brute_force_project(y, mode) -> QuantizedWeight:
    """Exhaustive-search projection; the independent oracle for :func:`project`."""
    return brute_force_candidates(y, mode)[0]
