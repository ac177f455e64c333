"""Random problem instances: teachers, starting points, and teachers built to
meet (or sit at a controlled distance from) the recurrence conditions."""

from __future__ import annotations

import math

import numpy as np

from .analysis import check_binary_condition, check_ternary_condition
from .geometry import cone_of
from .model import Teacher
from .quantize import QuantizationMode, normalized_project

MAX_TRIES = 100_000


def random_y0(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """I.i.d. normal entries times ``scale``; redrawn while any entry is exactly 0."""
    while True:
        y = scale * rng.standard_normal(n)
        if np.all(y != 0):
            return y


def random_v(m: int, rng: np.random.Generator, norm_sq: float | None = None) -> np.ndarray:
    """``v ~ N(0, I_m)``, optionally rescaled so that ``||v||^2 = norm_sq``."""
    v = rng.standard_normal(m)
    if norm_sq is not None:
        v *= math.sqrt(norm_sq / float(v @ v))
    return v


def random_teacher(n: int, m: int, rng: np.random.Generator, v_norm_sq: float | None = None) -> Teacher:
    """``w* ~ N(0, I_n)`` normalized and ``v`` from :func:`random_v`."""
    w = rng.standard_normal(n)
    v = random_v(m, rng, v_norm_sq)
    return Teacher.from_vectors(w / np.linalg.norm(w), v)


def _unit(x) -> np.ndarray:
    return np.asarray(x, dtype=float) / np.linalg.norm(x)


def separated_teacher(n: int, m: int, rng: np.random.Generator, min_gap: float,
                      v_norm_sq: float | None = None) -> Teacher:
    """Random unit teacher whose sorted magnitudes differ by at least ``min_gap``
    (with the smallest magnitude at least ``min_gap`` too), so its cone is regular."""
    v = random_v(m, rng, v_norm_sq)
    for _ in range(MAX_TRIES):
        w = _unit(rng.standard_normal(n))
        mags = np.sort(np.abs(w))
        if mags[0] >= min_gap and np.all(np.diff(mags) >= min_gap):
            t = Teacher.from_vectors(w, v)
            assert cone_of(t.w_star).regular
            return t
    raise RuntimeError("no teacher with the requested magnitude gap found")


def oscillating_binary_teacher(n: int, m: int, rng: np.random.Generator, min_offset: float = 0.1,
                               v_norm_sq: float | None = None) -> Teacher:
    """Random unit teacher with at least one ``|w*_j| < 1/sqrt(n)`` and every
    coordinate at least ``min_offset / sqrt(n)`` away from ``1/sqrt(n)`` in magnitude."""
    thr = 1.0 / math.sqrt(n)
    v = random_v(m, rng, v_norm_sq)
    for _ in range(MAX_TRIES):
        w = _unit(rng.standard_normal(n))
        a = np.abs(w)
        if np.any(a < thr) and np.all(np.abs(a - thr) >= min_offset * thr):
            return Teacher.from_vectors(w, v)
    raise RuntimeError("no oscillating teacher found")


def binary_recurrent_teacher(n: int, m: int, rng: np.random.Generator, min_margin: float = 0.2,
                             v_norm_sq: float | None = None) -> Teacher:
    """Teacher with ``0 < S < 2/sqrt(n)`` and margin at least ``min_margin / sqrt(n)``.

    Built by perturbing a random binary vertex ``s / sqrt(n)`` and renormalizing.
    """
    thr = 1.0 / math.sqrt(n)
    v = random_v(m, rng, v_norm_sq)
    for _ in range(MAX_TRIES):
        s = rng.choice((-1.0, 1.0), size=n)
        w = _unit(s * thr + rng.uniform(0.05, 1.0) * thr * rng.standard_normal(n))
        if not np.array_equal(np.where(w >= 0, 1.0, -1.0), s):
            continue
        t = Teacher.from_vectors(w, v)
        rep = check_binary_condition(t)
        if rep.satisfied and rep.margin >= min_margin * thr:
            return t
    raise RuntimeError("no binary recurrent teacher found")


def ternary_recurrent_teacher(n: int, m: int, rng: np.random.Generator, max_rest: float = 0.5,
                              min_rest: float = 0.0, v_norm_sq: float | None = None) -> Teacher:
    """Teacher off the ternary grid with ``min_rest < sum_{j>=2} lambda_j <= max_rest``.

    Built as a positive combination of nested staircase vertices along a random
    signed permutation, weighted towards one vertex, then normalized.
    """
    v = random_v(m, rng, v_norm_sq)
    for _ in range(MAX_TRIES):
        perm = rng.permutation(n)
        signs = rng.choice((-1.0, 1.0), size=n)
        k1 = int(rng.integers(1, n + 1))
        mu = rng.uniform(0.02, 0.3, size=n)
        mu[k1 - 1] = rng.uniform(1.0, 3.0)
        w = np.zeros(n)
        for k in range(1, n + 1):
            z = np.zeros(n)
            z[perm[:k]] = signs[perm[:k]] / math.sqrt(k)
            w += mu[k - 1] * z
        t = Teacher.from_vectors(_unit(w), v)
        rep = check_ternary_condition(t)
        if rep.satisfied and min_rest < rep.value <= max_rest:
            return t
    raise RuntimeError("no ternary recurrent teacher found")


def in_quantized_set(w, mode) -> bool:
    """Whether the unit vector ``w`` already equals its normalized projection."""
    w = np.asarray(w, dtype=float)
    q = normalized_project(w, QuantizationMode.parse(mode)).vector
    return bool(np.allclose(w, q, rtol=0, atol=1e-12))
