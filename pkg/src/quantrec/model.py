"""One-hidden-layer network with binary activation and its coarse gradient.

The network is ``y(Z; w) = v^T sigma(Z w)`` with ``sigma(x) = 1{x > 0}`` and
Gaussian inputs ``Z`` with i.i.d. N(0, 1) entries. The coarse gradient replaces
``sigma'`` by the ReLU derivative ``1{x > 0}`` (straight-through estimator).

Random streams
--------------
:class:`GaussianSampler` draws from numpy's Philox4x64-10 counter-based bit
generator, keyed by ``SeedSequence([seed, shard])``, and maps bits to normals
with numpy's ``Generator.standard_normal`` (ziggurat). Streams are therefore
reproducible for a fixed seed and numpy version, and Monte-Carlo shards are
independent of how many workers consume them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quantize import _as_vector

MC_SHARD_SIZE = 100_000


def coarse_grad_constant(v_norm_sq: float) -> float:
    """Scale ``||v||^2 / (2 sqrt(2 pi))`` of the expected coarse gradient."""
    return v_norm_sq / (2.0 * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True, eq=False)
class Teacher:
    """Teacher weights ``w_star`` (unit norm) and second-layer weights.

    Only ``||v||^2`` enters the closed forms; ``v`` itself is needed for
    anything that evaluates the network on sampled data.
    """

    w_star: np.ndarray
    v_norm_sq: float
    v: np.ndarray | None = None

    def __post_init__(self):
        w = _as_vector(self.w_star).copy()
        w.setflags(write=False)
        object.__setattr__(self, "w_star", w)
        if abs(float(np.linalg.norm(w)) - 1.0) > 1e-12:
            raise ValueError(f"teacher weights must have unit norm, got {np.linalg.norm(w)!r}")
        if not self.v_norm_sq > 0:
            raise ValueError("||v||^2 must be positive")
        object.__setattr__(self, "v_norm_sq", float(self.v_norm_sq))
        if self.v is not None:
            v = _as_vector(self.v).copy()
            v.setflags(write=False)
            object.__setattr__(self, "v", v)
            if abs(float(v @ v) - self.v_norm_sq) > 1e-12 * max(1.0, self.v_norm_sq):
                raise ValueError("v_norm_sq does not match ||v||^2")

    @classmethod
    def from_vectors(cls, w_star, v, normalize: bool = False) -> "Teacher":
        w = np.asarray(w_star, dtype=float)
        if normalize:
            w = w / np.linalg.norm(w)
        v = np.asarray(v, dtype=float)
        return cls(w, float(v @ v), v)

    @property
    def n(self) -> int:
        return self.w_star.size

    @property
    def m(self) -> int | None:
        return None if self.v is None else self.v.size

    @property
    def constant(self) -> float:
        return coarse_grad_constant(self.v_norm_sq)

    def require_v(self) -> np.ndarray:
        if self.v is None:
            raise ValueError("this operation needs the second-layer weights v")
        return self.v


@dataclass
class GaussianSampler:
    """Deterministic source of standard-normal input matrices.

    See the module docstring for the algorithm. ``shard`` selects an
    independent stream for the same seed.
    """

    seed: int
    shard: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._gen = self.stream(self.seed, self.shard)

    @staticmethod
    def stream(seed: int, shard: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(shard)])
        return np.random.Generator(np.random.Philox(ss))

    def spawn(self, shard: int) -> "GaussianSampler":
        return GaussianSampler(self.seed, shard)

    def draw(self, count: int, m: int, n: int) -> np.ndarray:
        return self._gen.standard_normal((count, m, n))


def _check_shapes(Z: np.ndarray, w: np.ndarray, v: np.ndarray):
    if Z.ndim not in (2, 3):
        raise ValueError(f"Z must be m x n or batch x m x n, got shape {Z.shape}")
    m, n = Z.shape[-2:]
    if w.shape != (n,):
        raise ValueError(f"w has shape {w.shape}, expected ({n},)")
    if v.shape != (m,):
        raise ValueError(f"v has shape {v.shape}, expected ({m},)")


def sigma(x):
    return (np.asarray(x) > 0).astype(float)


def forward(Z, w, v) -> float:
    Z = np.asarray(Z, dtype=float)
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_shapes(Z, w, v)
    return sigma(Z @ w) @ v


def _residual(Z, w, teacher):
    v = teacher.require_v()
    Z = np.asarray(Z, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_shapes(Z, w, v)
    if teacher.n != w.size:
        raise ValueError("w and teacher dimensions differ")
    act = Z @ w > 0
    r = (act.astype(float) - (Z @ teacher.w_star > 0)) @ v
    return act, r


def sample_loss(Z, w, teacher):
    """Squared loss ``0.5 (v^T sigma(Z w) - v^T sigma(Z w*))^2``; batched over a leading axis."""
    _, r = _residual(Z, w, teacher)
    return 0.5 * r * r


def sample_coarse_grad(Z, w, teacher):
    """ReLU-STE gradient ``Z^T (1{Z w > 0} * v) * residual``; batched over a leading axis."""
    act, r = _residual(Z, w, teacher)
    mask = act * teacher.v
    Z = np.asarray(Z, dtype=float)
    g = np.einsum("...mn,...m->...n", Z, mask)
    return g * np.asarray(r)[..., None]


def _nonzero(w) -> np.ndarray:
    w = _as_vector(w)
    if not np.any(w):
        raise ValueError("w must be nonzero")
    return w


def angle(w, w_star) -> float:
    w = _nonzero(w)
    cos = float(w @ w_star) / float(np.linalg.norm(w))
    return math.acos(min(1.0, max(-1.0, cos)))


def population_loss(w, teacher: Teacher) -> float:
    """Expected loss ``||v||^2 / (2 pi) * theta(w, w*)``."""
    return teacher.v_norm_sq / (2.0 * math.pi) * angle(w, teacher.w_star)


def population_coarse_grad(w, teacher: Teacher, constant: float | None = None) -> np.ndarray:
    """Expected coarse gradient ``c (w / ||w|| - w*)``.

    ``constant`` overrides ``c``; it exists so a corrupted constant can be
    fed to the verification suite as a negative control.
    """
    w = _nonzero(w)
    c = teacher.constant if constant is None else constant
    return c * (w / np.linalg.norm(w) - teacher.w_star)


def _merge(stats, batch: np.ndarray):
    """Chan et al. pairwise update of (count, mean, M2) with a new batch."""
    count, mean, m2 = stats
    nb = batch.shape[0]
    mb = batch.mean(axis=0)
    m2b = ((batch - mb) ** 2).sum(axis=0)
    if count == 0:
        return nb, mb, m2b
    tot = count + nb
    delta = mb - mean
    return tot, mean + delta * nb / tot, m2 + m2b + delta * delta * count * nb / tot


def _mc(fn, w, teacher, sampler: GaussianSampler, count: int):
    if count < 1:
        raise ValueError("count must be >= 1")
    w = _nonzero(w)
    v = teacher.require_v()
    stats = (0, 0.0, 0.0)
    done = 0
    shard = 0
    while done < count:
        size = min(MC_SHARD_SIZE, count - done)
        Z = sampler.spawn(shard).draw(size, v.size, w.size)
        stats = _merge(stats, np.asarray(fn(Z, w, teacher), dtype=float))
        done += size
        shard += 1
    n, mean, m2 = stats
    var = m2 / (n - 1) if n > 1 else np.zeros_like(mean)
    return mean, np.sqrt(var / n)


def mc_estimate_loss(w, teacher, sampler, count):
    """Monte-Carlo mean and standard error of the sample loss.

    Draws are split in shards of ``MC_SHARD_SIZE``; shard ``k`` uses the
    stream ``(sampler.seed, k)``.
    """
    mean, se = _mc(sample_loss, w, teacher, sampler, count)
    return float(mean), float(se)


def mc_estimate_grad(w, teacher, sampler, count):
    """Monte-Carlo mean and standard error (per component) of the coarse gradient."""
    return _mc(sample_coarse_grad, w, teacher, sampler, count)
