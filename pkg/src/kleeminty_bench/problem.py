"""Construction and evaluation of the rotated Klee-Minty problem.

The feasible region is the perturbed unit cube ``A x <= b`` expressed in
rotated and translated coordinates ``x = T(y)``. The objective ``c^T y``
picks the last component of ``y`` and is evaluated without transformation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels


class ConfigError(ValueError):
    """Raised for problem parameters outside the admissible ranges."""


DEFAULT_EPSILON = 0.1
DEFAULT_ANGLE = 350.0 / 180.0 * math.pi
ANGLE_RANGE = (1.5 * math.pi, 2.0 * math.pi)
CONSTRAINT_ROTATIONS = ("transpose", "direct")


@dataclass(frozen=True)
class ProblemConfig:
    """Parameters of one rotated Klee-Minty instance.

    ``constraint_rotation`` selects how the rotation matrix ``R`` enters the
    constraints: ``"transpose"`` checks ``A R^T (y - t) <= b`` (optimum at
    ``t`` for every admissible angle), ``"direct"`` checks ``A R (y - t) <= b``.
    ``allow_any_angle`` lifts the admissible-angle check.
    """

    dimension: int
    epsilon: float = DEFAULT_EPSILON
    rotation_angle: float = DEFAULT_ANGLE
    translation_scale: float = 1.0
    box_upper_scale: float = 5.0
    constraint_rotation: str = "transpose"
    allow_any_angle: bool = False

    def __post_init__(self):
        if isinstance(self.dimension, bool) or int(self.dimension) != self.dimension or self.dimension < 1:
            raise ConfigError(f"dimension must be a positive integer, got {self.dimension!r}")
        if not (0.0 < self.epsilon <= 1.0 / 3.0):
            raise ConfigError(f"epsilon must lie in (0, 1/3], got {self.epsilon!r}")
        lo, hi = ANGLE_RANGE
        if not math.isfinite(self.rotation_angle):
            raise ConfigError("rotation angle must be finite")
        if not self.allow_any_angle and not (lo <= self.rotation_angle <= hi):
            raise ConfigError(
                f"rotation angle {self.rotation_angle!r} rad outside the admissible range "
                f"[3pi/2, 2pi]; set allow_any_angle to override"
            )
        if self.constraint_rotation not in CONSTRAINT_ROTATIONS:
            raise ConfigError(f"constraint_rotation must be one of {CONSTRAINT_ROTATIONS}")
        if not self.box_upper_scale > 0:
            raise ConfigError("box_upper_scale must be positive")
        if not math.isfinite(self.translation_scale):
            raise ConfigError("translation_scale must be finite")

    def to_dict(self) -> dict:
        return {
            "dimension": int(self.dimension),
            "epsilon": float(self.epsilon),
            "rotation_angle": float(self.rotation_angle),
            "translation_scale": float(self.translation_scale),
            "box_upper_scale": float(self.box_upper_scale),
            "constraint_rotation": self.constraint_rotation,
            "allow_any_angle": bool(self.allow_any_angle),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemConfig":
        return cls(**d)


class EvaluationResult(NamedTuple):
    f: float
    nu: float


def build_constraint_matrices(n: int, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Return the stacked ``(2n, n)`` constraint matrix and right-hand side.

    Both blocks are lower bidiagonal with ``epsilon`` on the subdiagonal; the
    upper block has ``+1`` on the diagonal, the lower block ``-1``.
    """
    ProblemConfig(n, epsilon)
    n = int(n)
    a1 = np.eye(n) + np.diag(np.full(n - 1, float(epsilon)), -1)
    a2 = a1 - 2.0 * np.eye(n)
    A = np.vstack([a1, a2])
    b = np.concatenate([np.ones(n), np.zeros(n)])
    return A, b


def _spanning_vectors(n: int) -> tuple[np.ndarray, np.ndarray]:
    v1 = np.zeros(n)
    v1[-1] = 1.0
    u = np.ones(n)
    u[-1] = 0.0
    return v1, u / np.linalg.norm(u)


def build_rotation_matrix(n: int, angle: float) -> np.ndarray:
    """Dense rotation by ``angle`` in the plane spanned by ``e_n`` and ``(1,..,1,0)``."""
    n = int(n)
    if n < 1:
        raise ConfigError("dimension must be positive")
    if n == 1:
        return np.eye(1)
    v1, v2 = _spanning_vectors(n)
    c, s = math.cos(angle), math.sin(angle)
    return (
        np.eye(n)
        + (c - 1.0) * (np.outer(v1, v1) + np.outer(v2, v2))
        - s * (np.outer(v1, v2) - np.outer(v2, v1))
    )


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable problem data for one dimension.

    ``A`` and ``R`` are kept dense for inspection and for the independent
    checks in :mod:`kleeminty_bench.oracle`; evaluation itself runs through
    the structured kernel, which needs only the rotation coefficients.
    """

    config: ProblemConfig
    A: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    lower_bound: np.ndarray = field(repr=False)
    upper_bound: np.ndarray = field(repr=False)
    # alpha, beta, q for the kernels
    coefficients: tuple = field(repr=False)

    @classmethod
    def from_config(cls, config: ProblemConfig) -> "ProblemInstance":
        n = int(config.dimension)
        A, b = build_constraint_matrices(n, config.epsilon)
        c = np.zeros(n)
        c[-1] = 1.0
        R = build_rotation_matrix(n, config.rotation_angle)
        cube = float(n) ** 3
        t = np.full(n, config.translation_scale * cube)
        upper = np.full(n, config.box_upper_scale * cube)
        if n == 1:
            coeffs = (0.0, 0.0, 0.0)
        else:
            sign = 1.0 if config.constraint_rotation == "transpose" else -1.0
            coeffs = (
                math.cos(config.rotation_angle) - 1.0,
                sign * math.sin(config.rotation_angle),
                1.0 / math.sqrt(n - 1),
            )
        return cls(
            config=config,
            A=_readonly(A),
            b=_readonly(b),
            c=_readonly(c),
            R=_readonly(R),
            t=_readonly(t),
            lower_bound=_readonly(np.zeros(n)),
            upper_bound=_readonly(upper),
            coefficients=coeffs,
        )

    @property
    def dimension(self) -> int:
        return int(self.config.dimension)

    @property
    def optimum_point(self) -> np.ndarray:
        return self.t

    @property
    def optimum_value(self) -> float:
        """Objective at the relocated optimum, ``t_N`` (``N**3`` by default)."""
        return float(self.t[-1])

    @property
    def constraint_rotation_matrix(self) -> np.ndarray:
        """The matrix ``Q`` with ``x = Q (y - t)``."""
        return self.R.T if self.config.constraint_rotation == "transpose" else self.R


def make_instance(dimension: int, **overrides) -> ProblemInstance:
    return ProblemInstance.from_config(ProblemConfig(dimension, **overrides))


def _as_batch(instance: ProblemInstance, Y) -> tuple[np.ndarray, bool]:
    Y = np.asarray(Y, dtype=np.float64)
    single = Y.ndim == 1
    if single:
        Y = Y[None, :]
    if Y.ndim != 2 or Y.shape[1] != instance.dimension:
        raise ValueError(f"expected vectors of length {instance.dimension}, got shape {Y.shape}")
    return Y, single


def transform(instance: ProblemInstance, y) -> np.ndarray:
    """Map search-space points to cube coordinates, ``x = Q (y - t)``.

    Accepts one vector or a ``(k, N)`` batch.
    """
    Y, single = _as_batch(instance, y)
    alpha, beta, q = instance.coefficients
    X = kernels.rotate_batch(Y - instance.t, alpha, beta, q)
    return X[0] if single else X


def inverse_transform(instance: ProblemInstance, x) -> np.ndarray:
    """Map cube coordinates back to the search space, ``y = Q^T x + t``."""
    X, single = _as_batch(instance, x)
    alpha, beta, q = instance.coefficients
    Y = kernels.rotate_batch(X, alpha, -beta, q) + instance.t
    return Y[0] if single else Y


def evaluate_batch(instance: ProblemInstance, Y) -> tuple[np.ndarray, np.ndarray]:
    """Objective and violation arrays for a ``(k, N)`` batch of points."""
    Y, _ = _as_batch(instance, Y)
    alpha, beta, q = instance.coefficients
    return kernels.evaluate_batch(Y, instance.t, float(instance.config.epsilon), alpha, beta, q)


def evaluate(instance: ProblemInstance, y) -> EvaluationResult:
    """Evaluate one point: ``f = y_N`` and the violation summed over all ``2N`` rows.

    Box bounds are not part of the violation; see :func:`in_box`.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("evaluate expects a single vector; use evaluate_batch")
    f, nu = evaluate_batch(instance, y[None, :])
    return EvaluationResult(float(f[0]), float(nu[0]))


def in_box(instance: ProblemInstance, y) -> bool:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (instance.dimension,):
        raise ValueError(f"expected a vector of length {instance.dimension}")
    return bool(np.all(y >= instance.lower_bound) and np.all(y <= instance.upper_bound))
