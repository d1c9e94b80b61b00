"""Benchmarking conventions: budget accounting, ordering, termination, runs."""
from __future__ import annotations

import math
import traceback
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import kernels
from .problem import EvaluationResult, ProblemInstance, evaluate_batch

if TYPE_CHECKING:
    from .solvers import Optimizer

BUDGET_EXHAUSTED = "budget_exhausted"
SUCCESS = "success"
STAGNATION = "stagnation"
FAILED = "failed"
TERMINATION_REASONS = (BUDGET_EXHAUSTED, SUCCESS, STAGNATION, FAILED)


class BudgetExhaustedError(RuntimeError):
    """An optimizer asked for more evaluations than the budget allows."""


def make_rng(seed: int) -> np.random.Generator:
    """The harness RNG: numpy's PCG64 seeded with the run seed."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def lex_compare(a: EvaluationResult, b: EvaluationResult) -> int:
    """Three-way lexicographic comparison: -1, 0 or 1.

    Lower violation wins; equal violations are decided by the objective.
    """
    fa, na = float(a[0]), float(a[1])
    fb, nb = float(b[0]), float(b[1])
    if math.isnan(fa) or math.isnan(na) or math.isnan(fb) or math.isnan(nb):
        raise ValueError(f"NaN in evaluation result: {a!r} vs {b!r}")
    if na == nb:
        return (fa > fb) - (fa < fb)
    return -1 if na < nb else 1


def lex_key(result: EvaluationResult) -> tuple[float, float]:
    """Sort key consistent with :func:`lex_compare`."""
    return (result[1], result[0])


STAGNATION_UNITS = ("generations", "evaluations")


@dataclass(frozen=True)
class TerminationRule:
    """Budget, success tolerance and stagnation window of one run.

    ``stagnation_unit`` fixes what the window counts: ``"generations"``
    (each batch handed to the black box is one generation) or
    ``"evaluations"``.
    """

    budget: int
    success_tolerance: float = 1e-8
    stagnation_window: int = 1
    stagnation_unit: str = "generations"

    def __post_init__(self):
        if self.budget <= 0 or self.success_tolerance <= 0 or self.stagnation_window <= 0:
            raise ValueError("budget, success_tolerance and stagnation_window must be positive")
        if self.stagnation_unit not in STAGNATION_UNITS:
            raise ValueError(f"stagnation_unit must be one of {STAGNATION_UNITS}")

    @classmethod
    def for_dimension(cls, n: int, budget_factor: int = 20_000, window_factor: int = 100,
                      success_tolerance: float = 1e-8,
                      stagnation_unit: str = "generations") -> "TerminationRule":
        return cls(budget=budget_factor * n, success_tolerance=success_tolerance,
                   stagnation_window=window_factor * n, stagnation_unit=stagnation_unit)

    def to_dict(self) -> dict:
        return {"budget": self.budget, "success_tolerance": self.success_tolerance,
                "stagnation_window": self.stagnation_window,
                "stagnation_unit": self.stagnation_unit}


class BudgetedBlackBox:
    """Counts evaluations and tracks the lexicographic best-so-far.

    ``trajectory`` holds ``(evaluation_index, f, nu)`` at every strict
    improvement; indices are 1-based.
    """

    def __init__(self, instance: ProblemInstance, budget: int):
        if budget <= 0:
            raise ValueError("budget must be positive")
        self.instance = instance
        self.budget = int(budget)
        self.evaluations_used = 0
        self.best_y: np.ndarray | None = None
        self.best: EvaluationResult | None = None
        self.trajectory: list[tuple[int, float, float]] = []
        self.generations = 0
        self.last_improvement_generation = 0

    @property
    def remaining(self) -> int:
        return self.budget - self.evaluations_used

    @property
    def last_improvement(self) -> int:
        return self.trajectory[-1][0] if self.trajectory else 0

    def _best_pair(self):
        if self.best is None:
            return math.inf, math.inf
        return self.best.f, self.best.nu

    def evaluate(self, y) -> EvaluationResult:
        """Counted evaluation of one point."""
        f, nu, _ = self.evaluate_batch(np.asarray(y, dtype=np.float64)[None, :])
        return EvaluationResult(float(f[0]), float(nu[0]))

    def evaluate_batch(self, Y, rule: TerminationRule | None = None,
                       skip_stagnation: bool = False):
        """Evaluate the rows of ``Y`` in order, one counted evaluation each.

        With a ``rule`` the batch stops right after the evaluation at which
        :func:`check_termination` would first fire; only that prefix is
        counted. Returns ``(f, nu, reason)`` for the counted prefix.
        """
        Y = np.asarray(Y, dtype=np.float64)
        k = Y.shape[0]
        if k > self.remaining:
            raise BudgetExhaustedError(
                f"{k} evaluations requested with {self.remaining} of {self.budget} left")
        f, nu = evaluate_batch(self.instance, Y)
        if np.isnan(f).any() or np.isnan(nu).any():
            raise ValueError("evaluation produced NaN")
        best_f, best_nu = self._best_pair()
        imp = kernels.improvement_indices(f, nu, best_f, best_nu)
        stop = k
        reason = None
        if rule is not None:
            stop, reason = self._termination_point(f, nu, imp, k, rule, skip_stagnation)
        used0 = self.evaluations_used
        self.generations += 1
        for j in imp:
            if j >= stop:
                break
            self.trajectory.append((used0 + int(j) + 1, float(f[j]), float(nu[j])))
            self.best = EvaluationResult(float(f[j]), float(nu[j]))
            self.best_y = Y[j].copy()
            self.last_improvement_generation = self.generations
        self.evaluations_used = used0 + stop
        return f[:stop], nu[:stop], reason

    def _termination_point(self, f, nu, imp, k, rule, skip_stagnation):
        # earliest evaluation (1-based within batch) where the rule fires
        used0 = self.evaluations_used
        f_opt = self.instance.optimum_value
        fire = k + 1
        reason = None
        for j in imp:
            if nu[j] == 0.0 and abs(f[j] - f_opt) <= rule.success_tolerance:
                fire, reason = int(j) + 1, SUCCESS
                break
        if used0 + k >= rule.budget or used0 + k >= self.budget:
            cand = min(rule.budget, self.budget) - used0
            if cand < fire:
                fire, reason = cand, BUDGET_EXHAUSTED
        if skip_stagnation:
            pass
        elif rule.stagnation_unit == "generations":
            improved = len(imp) > 0 and int(imp[0]) < fire
            last = self.generations + 1 if improved else self.last_improvement_generation
            if self.generations + 1 - last >= rule.stagnation_window and k < fire:
                fire, reason = k, STAGNATION
        else:
            last = self.last_improvement
            events = [used0 + int(j) + 1 for j in imp] + [math.inf]
            for ev in events:
                e = last + rule.stagnation_window
                if e < ev:
                    cand = e - used0
                    if 1 <= cand <= k and cand < fire:
                        fire, reason = cand, STAGNATION
                    break
                last = ev
        if reason is None:
            return k, None
        return fire, reason


def check_termination(box: BudgetedBlackBox, rule: TerminationRule,
                      skip_stagnation: bool = False) -> str | None:
    """Termination reason for the current box state, or ``None``."""
    if box.best is not None and box.best.nu == 0.0 and \
            abs(box.best.f - box.instance.optimum_value) <= rule.success_tolerance:
        return SUCCESS
    if box.evaluations_used >= min(rule.budget, box.budget):
        return BUDGET_EXHAUSTED
    if not skip_stagnation:
        if rule.stagnation_unit == "generations":
            idle = box.generations - box.last_improvement_generation
        else:
            idle = box.evaluations_used - box.last_improvement
        if idle >= rule.stagnation_window:
            return STAGNATION
    return None


def sample_initial(instance: ProblemInstance, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` points drawn uniformly from the search box, shape ``(count, N)``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    lo, hi = instance.lower_bound, instance.upper_bound
    return lo + (hi - lo) * rng.random((int(count), instance.dimension))


@dataclass
class RunRecord:
    algorithm: str
    dimension: int
    seed: int
    final_y: list[float] | None
    final: EvaluationResult | None
    evaluations_used: int
    termination_reason: str
    trajectory: list[tuple[int, float, float]] = field(default_factory=list)
    error: str | None = None

    @property
    def feasible(self) -> bool:
        return self.final is not None and self.final.nu == 0.0


def run_experiment(algorithm: "Optimizer", instance: ProblemInstance,
                   rule: TerminationRule, seed: int) -> RunRecord:
    """Drive ``algorithm`` on ``instance`` until the termination rule fires.

    Solver exceptions produce a record with reason ``"failed"``.
    """
    rng = make_rng(seed)
    box = BudgetedBlackBox(instance, rule.budget)
    skip = bool(getattr(algorithm, "skip_stagnation", False))
    reason = None
    error = None
    try:
        algorithm.initialize(instance, rng, rule.budget)
        while reason is None:
            Y = np.asarray(algorithm.ask(), dtype=np.float64)
            if Y.ndim != 2 or Y.shape[0] == 0:
                raise RuntimeError(f"{algorithm.name} proposed an empty or malformed batch")
            Y = Y[: box.remaining]
            f, nu, reason = box.evaluate_batch(Y, rule, skip)
            if reason is None:
                algorithm.tell(Y, f, nu)
                reason = check_termination(box, rule, skip)
    except Exception:
        error = traceback.format_exc(limit=5)
        reason = FAILED
    return RunRecord(
        algorithm=algorithm.name,
        dimension=instance.dimension,
        seed=int(seed),
        final_y=None if box.best_y is None else [float(v) for v in box.best_y],
        final=box.best,
        evaluations_used=box.evaluations_used,
        termination_reason=reason,
        trajectory=list(box.trajectory),
        error=error,
    )
