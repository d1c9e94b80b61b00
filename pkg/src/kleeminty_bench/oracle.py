"""Independent checks of the problem construction.

Vertex enumeration of the perturbed cube, a constructive feasible sampler,
and :func:`certify`, which bundles the checks run by ``kleeminty validate``.
Everything here uses the dense matrices of :class:`ProblemInstance` rather
than the structured evaluation kernel, so the two routes check each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .problem import ProblemConfig, ProblemInstance, evaluate

MAX_ENUMERATION_DIM = 20
DEFAULT_BLOCK = 1 << 16


def _vertices_from_indices(idx: np.ndarray, n: int, epsilon: float) -> np.ndarray:
    # bit i of the index picks the lower or upper face of row i
    X = np.empty((idx.size, n))
    prev = np.zeros(idx.size)
    for i in range(n):
        upper = ((idx >> i) & 1).astype(bool)
        low = epsilon * prev
        X[:, i] = np.where(upper, 1.0 - low, low)
        prev = X[:, i]
    return X


@dataclass(frozen=True)
class VertexSet:
    """The ``2**N`` vertices of the perturbed cube in unrotated coordinates.

    Vertices are generated on demand; use :meth:`blocks` to stream them.
    """

    dimension: int
    epsilon: float

    def __len__(self) -> int:
        return 1 << self.dimension

    def blocks(self, size: int = DEFAULT_BLOCK) -> Iterator[np.ndarray]:
        total = len(self)
        for start in range(0, total, size):
            idx = np.arange(start, min(start + size, total), dtype=np.int64)
            yield _vertices_from_indices(idx, self.dimension, self.epsilon)

    def to_array(self) -> np.ndarray:
        return np.vstack(list(self.blocks()))


def enumerate_vertices(n: int, epsilon: float) -> VertexSet:
    ProblemConfig(n, epsilon)
    if n > MAX_ENUMERATION_DIM:
        raise ValueError(f"vertex enumeration is limited to N <= {MAX_ENUMERATION_DIM}, got {n}")
    return VertexSet(int(n), float(epsilon))


def _search_points(instance: ProblemInstance, X: np.ndarray) -> np.ndarray:
    # y = t + Q^T x, row-wise
    return instance.t + X @ instance.constraint_rotation_matrix


def min_vertex_objective(vertices: VertexSet, instance: ProblemInstance) -> tuple[np.ndarray, float]:
    """Vertex with the smallest objective after mapping into the search space."""
    if vertices.dimension != instance.dimension:
        raise ValueError("vertex set and instance dimensions differ")
    col = instance.constraint_rotation_matrix[:, -1]
    t_last = float(instance.t[-1])
    best_f, best_x = math.inf, None
    for X in vertices.blocks():
        f = t_last + X @ col
        j = int(np.argmin(f))
        if f[j] < best_f:
            best_f, best_x = float(f[j]), X[j].copy()
    return best_x, best_f


def sample_feasible(n: int, epsilon: float, rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform draws along the chain ``eps*x[i-1] <= x[i] <= 1 - eps*x[i-1]``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    X = np.empty((int(count), int(n)))
    prev = np.zeros(int(count))
    for i in range(int(n)):
        lo = epsilon * prev
        X[:, i] = lo + (1.0 - 2.0 * lo) * rng.random(int(count))
        prev = X[:, i]
    return X


def box_containment(instance: ProblemInstance) -> tuple[bool, float, str]:
    """Is the mapped polytope inside the search box?

    Returns ``(ok, margin, method)`` where ``margin`` is the smallest distance
    to a box face (negative when outside). Exact over all vertices for small
    N; for larger N an interval bound over the unit cube, which contains the
    polytope, gives a sufficient condition.
    """
    lo, hi = instance.lower_bound, instance.upper_bound
    n = instance.dimension
    if n <= MAX_ENUMERATION_DIM:
        ymin = np.full(n, math.inf)
        ymax = np.full(n, -math.inf)
        for X in enumerate_vertices(n, instance.config.epsilon).blocks():
            Y = _search_points(instance, X)
            ymin = np.minimum(ymin, Y.min(axis=0))
            ymax = np.maximum(ymax, Y.max(axis=0))
        method = "vertices"
    else:
        Q = instance.constraint_rotation_matrix
        ymin = instance.t + np.minimum(Q, 0.0).sum(axis=0)
        ymax = instance.t + np.maximum(Q, 0.0).sum(axis=0)
        method = "interval_bound"
    margin = float(min((ymin - lo).min(), (hi - ymax).min()))
    return margin >= 0.0, margin, method


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


@dataclass
class CertificationReport:
    config: ProblemConfig
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            mark = "ok  " if c.passed else "FAIL"
            extra = f" ({c.detail})" if c.detail else ""
            out.append(f"[{mark}] N={self.config.dimension} {c.name}: {c.value!r} "
                       f"(threshold {c.threshold!r}){extra}")
        return out


def certify(config: ProblemConfig, vertex_tol: float = 1e-9) -> CertificationReport:
    """Run every oracle check on one configuration."""
    inst = ProblemInstance.from_config(config)
    n = inst.dimension
    rep = CertificationReport(config)
    R = inst.R
    orth = float(np.abs(R @ R.T - np.eye(n)).max())
    rep.checks.append(Check("orthogonality_residual", orth <= 1e-12, orth, 1e-12))
    det = abs(float(np.linalg.det(R)) - 1.0)
    rep.checks.append(Check("determinant_error", det <= 1e-10, det, 1e-10))
    at_opt = evaluate(inst, inst.optimum_point)
    rep.checks.append(Check("violation_at_optimum", at_opt.nu == 0.0, at_opt.nu, 0.0))
    f_err = abs(at_opt.f - inst.optimum_value)
    f_tol = 1e-12 * max(1.0, abs(inst.optimum_value))
    rep.checks.append(Check("objective_at_optimum_error", f_err <= f_tol, f_err, f_tol))
    if n <= MAX_ENUMERATION_DIM:
        x, f = min_vertex_objective(enumerate_vertices(n, config.epsilon), inst)
        err = abs(f - inst.optimum_value)
        rep.checks.append(Check("vertex_optimum", err <= vertex_tol, f, inst.optimum_value,
                                f"error {err!r}, attained at x={[float(v) for v in x]}"
                                if n <= 5 else f"error {err!r}"))
    ok, margin, method = box_containment(inst)
    rep.checks.append(Check("box_containment_margin", ok, margin, 0.0, method))
    return rep
