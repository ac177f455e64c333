"""Post-hoc analysis of QUANT trajectories.

Quantized states are compared by sign pattern, never by float coordinates.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import Trajectory
from .geometry import cone_of, decompose_in_cone, vertex_set
from .model import Teacher
from .quantize import QuantizationMode, QuantizedWeight, bsign, normalized_project

BOUNDARY_RTOL = 1e-12


@dataclass
class RecurrenceReport:
    target: tuple[int, ...]
    visit_times: list[int]
    visit_count: int
    first_visit: int | None
    gaps: list[int]

    def to_dict(self) -> dict:
        return asdict(self)


def detect_recurrence(traj: Trajectory, target: QuantizedWeight) -> RecurrenceReport:
    if target.n != traj.n:
        raise ValueError("target and trajectory dimensions differ")
    if target.mode is not traj.mode:
        raise ValueError(f"target mode {target.mode.value} does not match trajectory mode {traj.mode.value}")
    if abs(float(np.linalg.norm(target.vector)) - 1.0) > 1e-12:
        raise ValueError("target must be unit-norm")
    hits = np.all(traj.signs == np.asarray(target.signs, dtype=np.int8), axis=1)
    times = [int(t) for t in np.flatnonzero(hits)]
    return RecurrenceReport(
        target=target.key,
        visit_times=times,
        visit_count=len(times),
        first_visit=times[0] if times else None,
        gaps=[b - a for a, b in zip(times[:-1], times[1:])],
    )


def detect_cycle(traj: Trajectory, window: int | None = None) -> int | None:
    """Smallest period ``p <= window // 2`` of the ``w`` sequence over the last ``window`` states."""
    T = len(traj)
    window = T if window is None else window
    if not 1 <= window <= T:
        raise ValueError(f"window must lie in [1, {T}]")
    s = traj.signs[T - window:]
    for p in range(1, window // 2 + 1):
        if np.array_equal(s[p:], s[:-p]):
            return p
    return None


def sign_oscillation_report(traj: Trajectory) -> list[dict]:
    """Per coordinate: number of sign changes of ``w_j^t``, last change time, signs seen."""
    s = traj.signs
    changes = s[1:] != s[:-1]
    out = []
    for j in range(traj.n):
        idx = np.flatnonzero(changes[:, j])
        out.append({
            "coordinate": j,
            "sign_change_count": int(idx.size),
            "last_change_t": int(idx[-1] + 1) if idx.size else None,
            "attained_signs": sorted(int(v) for v in np.unique(s[:, j])),
        })
    return out


def sign_counts(traj: Trajectory, j: int) -> dict[int, int]:
    vals, counts = np.unique(traj.signs[:, j], return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


def tail_limit_set(traj: Trajectory, tail_fraction: float = 0.5) -> list[QuantizedWeight]:
    """Distinct ``w^t`` over the final ``tail_fraction`` of the run, in order of first appearance."""
    tail = traj.tail(tail_fraction)
    seen = {}
    for key in tail.keys():
        seen.setdefault(key, None)
    return [QuantizedWeight.unit(k, traj.mode) for k in seen]


def _entry_time(ok: np.ndarray) -> int | None:
    if not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    return int(bad[-1] + 1) if bad.size else 0


def region_entry_times(traj: Trajectory, teacher: Teacher) -> dict:
    """First times after which ``y^t`` stays in the orthant and in the cone of ``w*``.

    Coordinates where ``w*`` vanishes use closure semantics: they only need
    ``w_j^t = 0``, and the largest ``|y_j^t|`` is reported so boundedness can be
    inspected. The cone test asks every strict magnitude order of ``w*`` to hold
    strictly for ``y^t``; for a regular ``w*`` this is cone interior membership.
    ``None`` means the condition is still violated at the last record.
    """
    w = teacher.w_star
    if w.size != traj.n:
        raise ValueError("teacher and trajectory dimensions differ")
    sw = np.sign(w).astype(int)
    nz = sw != 0
    y = traj.y
    orth = np.all(np.sign(y[:, nz]) == sw[nz], axis=1) & np.all(traj.signs[:, ~nz] == 0, axis=1)

    mags = np.abs(w)
    ay = np.abs(y)
    cone = orth.copy()
    for i in range(traj.n):
        for j in range(traj.n):
            if mags[i] > mags[j]:
                cone &= ay[:, i] > ay[:, j]

    zero_bounds = {int(j): float(np.max(np.abs(y[:, j]))) for j in np.flatnonzero(~nz)}
    return {
        "orthant_entry_t": _entry_time(orth),
        "cone_entry_t": _entry_time(cone),
        "teacher_regular": bool(cone_of(w).regular),
        "zero_coordinate_max_abs_y": zero_bounds,
    }


@dataclass
class ConditionReport:
    mode: str
    satisfied: bool
    margin: float
    value: float
    bound: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _margin(value: float, bound: float) -> float:
    m = min(value, bound - value)
    if abs(m) <= BOUNDARY_RTOL * bound:
        return 0.0
    return m


def check_binary_condition(teacher: Teacher, n: int | None = None) -> ConditionReport:
    """Sufficient condition ``0 < S < 2/sqrt(n)`` for recurrence with binary weights.

    ``S`` sums ``|w*_j - w_hat_j|`` over coordinates with ``|w*_j| < 1/sqrt(n)``,
    where ``w_hat = bsign(w*) / sqrt(n)``. Values within a relative 1e-12 of
    either end count as on the boundary (margin 0, not satisfied).
    """
    w = teacher.w_star
    n = w.size if n is None else n
    if n != w.size:
        raise ValueError("n does not match the teacher dimension")
    thr = 1.0 / math.sqrt(n)
    w_hat = bsign(w) * thr
    small = np.abs(w) < thr
    terms = np.abs(w - w_hat)
    S = math.fsum(terms[small])
    bound = 2.0 * thr
    margin = _margin(S, bound)
    return ConditionReport(
        mode="binary",
        satisfied=margin > 0,
        margin=margin,
        value=S,
        bound=bound,
        details={
            "optimum": [int(s) for s in bsign(w)],
            "w_star_in_Q": bool(np.all(np.abs(np.abs(w) - thr) <= 1e-12)),
            "oscillating_coordinates": [int(j) for j in np.flatnonzero(small)],
            "per_coordinate": [float(x) if s else 0.0 for x, s in zip(terms, small)],
        },
    )


def ternary_decomposition(teacher: Teacher):
    """Vertex set of ``w*`` with the optimum first, and the coefficients of ``w*`` on it."""
    w = teacher.w_star
    opt = normalized_project(w, QuantizationMode.TERNARY)
    verts = vertex_set(w).with_first(opt)
    coeffs = decompose_in_cone(w, verts)
    lambdas = [coeffs[z.key] for z in verts]
    return verts, lambdas


def check_ternary_condition(teacher: Teacher) -> ConditionReport:
    """Sufficient condition ``0 < sum_{j>=2} lambda_j < 1`` for ternary recurrence.

    ``w* = sum_j lambda_j z_j`` over the vertex set of ``w*`` with ``z_1`` the
    optimum.
    """
    verts, lambdas = ternary_decomposition(teacher)
    rest = math.fsum(lambdas[1:])
    margin = _margin(rest, 1.0)
    recon = sum((lam * z.vector for lam, z in zip(lambdas, verts)), np.zeros(teacher.n))
    return ConditionReport(
        mode="ternary",
        satisfied=margin > 0,
        margin=margin,
        value=rest,
        bound=1.0,
        details={
            "vertices": [list(z.signs) for z in verts],
            "lambdas": lambdas,
            "reconstruction_error": float(np.linalg.norm(recon - teacher.w_star)),
        },
    )


def visit_frequency_vs_lambda(traj: Trajectory, teacher: Teacher, tail_fraction: float = 0.5) -> list[dict]:
    """Share of tail iterations spent at each vertex of ``w*``, next to its coefficient.

    Informational: there is no claimed rate at which the two should agree.
    """
    if traj.mode is not QuantizationMode.TERNARY:
        raise ValueError("visit frequencies against lambda are defined for ternary runs")
    verts, lambdas = ternary_decomposition(teacher)
    keys = traj.tail(tail_fraction).keys()
    total = len(keys)
    out = []
    for z, lam in zip(verts, lambdas):
        freq = sum(1 for k in keys if k == z.key) / total
        out.append({"vertex": list(z.signs), "lambda": lam, "empirical_freq": freq})
    return out
