"""Orthants, cones and vertex sets of sign patterns in R^n.

An orthant is identified with a sign pattern. A cone refines an orthant by
the ordering of coordinate magnitudes: two vectors share a cone iff they have
the same signs and ``sign(|y_j| - |y_i|)`` agrees for every pair ``i, j``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .quantize import QuantizationMode, QuantizedWeight, _as_vector, magnitude_order

MAX_COUNT_DIM = 8


class Membership(str, enum.Enum):
    INTERIOR = "interior"
    CLOSURE = "closure"
    OUTSIDE = "outside"


class NotInConeError(ValueError):
    """Raised when a vector lies outside the closure of a cone."""


def orthant_of(x) -> tuple[int, ...]:
    x = _as_vector(x)
    return tuple(int(s) for s in np.sign(x))


def is_regular_orthant(signs) -> bool:
    return 0 not in signs


def _tie_groups(mags: np.ndarray, order: np.ndarray, tol: float) -> list[tuple[int, ...]]:
    """Split ``order`` into maximal runs of equal magnitude.

    Consecutive sorted magnitudes are tied when they differ by at most ``tol``.
    """
    groups: list[list[int]] = [[int(order[0])]]
    for prev, cur in zip(order[:-1], order[1:]):
        if mags[prev] - mags[cur] <= tol:
            groups[-1].append(int(cur))
        else:
            groups.append([int(cur)])
    return [tuple(sorted(g)) for g in groups]


@dataclass(frozen=True, eq=False)
class ConeDescriptor:
    """Sign pattern plus the (tie-aware) magnitude ordering of a vector.

    ``order`` is 0-based. Equality ignores the order of indices inside a tie
    group, so it is defined through ``signs`` and ``tie_groups`` only.
    """

    signs: tuple[int, ...]
    order: tuple[int, ...]
    tie_groups: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return len(self.signs)

    @property
    def regular(self) -> bool:
        return is_regular_orthant(self.signs) and all(len(g) == 1 for g in self.tie_groups)

    def __eq__(self, other):
        if not isinstance(other, ConeDescriptor):
            return NotImplemented
        return self.signs == other.signs and self.tie_groups == other.tie_groups

    def __hash__(self):
        return hash((self.signs, self.tie_groups))


def cone_of(x, tol: float = 0.0) -> ConeDescriptor:
    x = _as_vector(x)
    mags = np.abs(x)
    order = magnitude_order(x)
    groups = _tie_groups(mags, order, tol)
    return ConeDescriptor(orthant_of(x), tuple(int(i) for i in order), tuple(groups))


@dataclass(frozen=True)
class VertexSet:
    """Unit-norm quantized vertices of a cone, nested by support.

    Vertices are stored by ascending support size; :meth:`with_first` moves a
    chosen vertex (normally the optimum) to the front.
    """

    vertices: tuple[QuantizedWeight, ...]

    @property
    def k(self) -> int:
        return len(self.vertices)

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __getitem__(self, i):
        return self.vertices[i]

    def keys(self) -> list[tuple[int, ...]]:
        return [z.key for z in self.vertices]

    def index(self, w: QuantizedWeight) -> int:
        return self.keys().index(w.key)

    def __contains__(self, w) -> bool:
        return isinstance(w, QuantizedWeight) and w.key in self.keys()

    def with_first(self, w: QuantizedWeight) -> "VertexSet":
        i = self.index(w)
        rest = self.vertices[:i] + self.vertices[i + 1:]
        return VertexSet((self.vertices[i],) + rest)

    def by_support(self) -> "VertexSet":
        return VertexSet(tuple(sorted(self.vertices, key=lambda z: z.support_size)))

    def matrix(self) -> np.ndarray:
        """Vertices as columns."""
        return np.column_stack([z.vector for z in self.vertices])


def admissible_prefix_lengths(x, tol: float = 0.0) -> list[int]:
    """Support sizes ``k`` at which a vertex of ``x`` exists.

    ``k`` is admissible iff the k-th largest magnitude is nonzero and either
    ``k = n`` or it strictly exceeds the (k+1)-th largest magnitude.
    """
    x = _as_vector(x)
    mags = np.abs(x)[magnitude_order(x)]
    n = x.size
    out = []
    for k in range(1, n + 1):
        if mags[k - 1] == 0:
            break
        if k == n or mags[k - 1] - mags[k] > tol:
            out.append(k)
    return out


def vertex_set(x, tol: float = 0.0) -> VertexSet:
    x = _as_vector(x)
    order = magnitude_order(x)
    signs = np.sign(x).astype(int)
    verts = []
    for k in admissible_prefix_lengths(x, tol):
        pattern = np.zeros(x.size, dtype=int)
        pattern[order[:k]] = signs[order[:k]]
        verts.append(QuantizedWeight(1.0 / math.sqrt(k), tuple(pattern), QuantizationMode.TERNARY))
    return VertexSet(tuple(verts))


def decompose_in_cone(y, basis: VertexSet, tol: float = 1e-12) -> dict[tuple[int, ...], float]:
    """Nonnegative coefficients ``mu`` with ``y = sum_z mu_z z`` over ``basis``.

    Keys are vertex sign patterns. The vertices must have nested supports.
    Back-substitution: on the block added by the vertex with support ``k``,
    ``y`` equals the signed level ``a_k``, and ``mu_k = sqrt(k) (a_k - a_next)``.

    Raises
    ------
    NotInConeError
        If ``y`` is not a nonnegative combination of the basis (up to
        ``tol * ||y||``).
    """
    y = _as_vector(y)
    verts = sorted(basis.vertices, key=lambda z: z.support_size)
    if not verts:
        if np.any(y):
            raise NotInConeError("not in cone closure: empty vertex set")
        return {}
    if any(z.n != y.size for z in verts):
        raise ValueError("dimension mismatch between y and the vertex set")
    scale = float(np.linalg.norm(y))
    atol = tol * scale

    prev: set[int] = set()
    levels = []
    for z in verts:
        supp = set(z.support)
        if not prev < supp:
            raise ValueError("vertex supports are not strictly nested")
        block = sorted(supp - prev)
        s = np.asarray([z.signs[i] for i in block], dtype=float)
        levels.append(float(np.mean(s * y[block])))
        prev = supp

    coeffs = {}
    for i, z in enumerate(verts):
        nxt = levels[i + 1] if i + 1 < len(verts) else 0.0
        coeffs[z.key] = math.sqrt(z.support_size) * (levels[i] - nxt)

    recon = np.zeros_like(y)
    for z in verts:
        recon += coeffs[z.key] * z.vector
    err = float(np.linalg.norm(recon - y))
    if err > atol:
        raise NotInConeError(f"not in cone closure: y is off the span (residual {err:.3e})")
    worst = min(coeffs.values())
    if worst < -atol:
        raise NotInConeError(f"not in cone closure: negative coefficient {worst:.3e}")
    return {key: max(mu, 0.0) for key, mu in coeffs.items()}


def in_cone(y, x, tol: float = 1e-12) -> Membership:
    y = _as_vector(y)
    x = _as_vector(x)
    if y.size != x.size:
        raise ValueError("dimension mismatch")
    if not np.any(x):
        raise ValueError("the cone of the zero vector is not defined")
    if cone_of(y) == cone_of(x):
        return Membership.INTERIOR
    try:
        decompose_in_cone(y, vertex_set(x), tol=tol)
    except NotInConeError:
        return Membership.OUTSIDE
    return Membership.CLOSURE


def count_geometry(n: int, enumerate_: bool = False) -> tuple[int, int, int]:
    """Numbers of orthants, regular orthants and regular cones per regular orthant.

    With ``enumerate_=True`` the counts come from explicit enumeration of sign
    patterns and magnitude orderings instead of the closed forms.
    """
    if not 1 <= n <= MAX_COUNT_DIM:
        raise ValueError(f"n must lie in [1, {MAX_COUNT_DIM}], got {n}")
    if not enumerate_:
        return 3 ** n, 2 ** n, math.factorial(n)
    patterns = set(itertools.product((-1, 0, 1), repeat=n))
    regular = {p for p in patterns if is_regular_orthant(p)}
    base = np.asarray(next(iter(sorted(regular))), dtype=float)
    cones = set()
    for perm in itertools.permutations(range(n)):
        mags = np.empty(n)
        mags[list(perm)] = np.arange(n, 0, -1, dtype=float)
        cones.add(cone_of(base * mags))
    assert all(c.regular for c in cones)
    return len(patterns), len(regular), len(cones)
