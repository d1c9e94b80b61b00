"""Quality indicators, ECDF targets and curves, and the three-factor ranking."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .problem import EvaluationResult, ProblemInstance
from .protocol import RunRecord, lex_key

N_INFEASIBLE_TARGETS = 51
N_FEASIBLE_TARGETS = 52
N_TARGETS = N_INFEASIBLE_TARGETS + N_FEASIBLE_TARGETS
AREA_CHECKPOINTS = 101

ECDF_SCOPES = ("single_run", "runs", "runs_and_dimensions")


@dataclass(frozen=True)
class IndicatorReport:
    """Batch indicators for one algorithm in one dimension.

    ``mean_param_dev`` is ``None`` when no run ended feasible.
    """

    algorithm: str
    N: int
    runs: int
    f_opt: float
    f_best: float
    nu_best: float
    f_med: float
    nu_med: float
    abs_err: float
    FR: float
    mean_param_dev: float | None
    meanFevals: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _check_result(r: EvaluationResult) -> EvaluationResult:
    if math.isnan(r[0]) or math.isnan(r[1]):
        raise ValueError(f"NaN in evaluation result {r!r}")
    return r


def median_solution(finals: Sequence[tuple]) -> tuple:
    """Middle element of ``(y, EvaluationResult)`` pairs under the lexicographic order.

    The sort is stable, so tied entries keep their input order. For an even
    count the lower-middle element is returned.
    """
    finals = list(finals)
    if not finals:
        raise ValueError("median of an empty batch")
    ordered = sorted(finals, key=lambda p: lex_key(_check_result(p[1])))
    return ordered[(len(ordered) - 1) // 2]


_MISSING = EvaluationResult(math.inf, math.inf)


def _final_pair(rec: RunRecord) -> tuple:
    return (rec.final_y, rec.final if rec.final is not None else _MISSING)


def compute_indicators(records: Sequence[RunRecord], instance: ProblemInstance,
                       algorithm: str | None = None) -> IndicatorReport:
    records = list(records)
    if not records:
        raise ValueError("no records")
    dims = {r.dimension for r in records}
    if dims != {instance.dimension}:
        raise ValueError(f"records span dimensions {sorted(dims)}, instance has N={instance.dimension}")
    algos = {r.algorithm for r in records}
    if len(algos) > 1:
        raise ValueError(f"records mix algorithms {sorted(algos)}")
    finals = [_final_pair(r) for r in records]
    _, best = min(finals, key=lambda p: lex_key(_check_result(p[1])))
    _, med = median_solution(finals)
    f_opt = instance.optimum_value
    feasible = [np.asarray(y, dtype=np.float64) for y, res in finals if res.nu == 0.0]
    if feasible:
        devs = [float(np.linalg.norm(y - instance.optimum_point)) for y in feasible]
        mean_dev = math.fsum(devs) / len(devs)
    else:
        mean_dev = None
    return IndicatorReport(
        algorithm=algorithm if algorithm is not None else algos.pop(),
        N=instance.dimension,
        runs=len(records),
        f_opt=f_opt,
        f_best=float(best.f),
        nu_best=float(best.nu),
        f_med=float(med.f),
        nu_med=float(med.nu),
        abs_err=abs(float(med.f) - f_opt),
        FR=len(feasible) / len(records),
        mean_param_dev=mean_dev,
        meanFevals=math.fsum(r.evaluations_used for r in records) / len(records),
    )


@dataclass(frozen=True)
class TargetSet:
    """51 violation targets followed by 52 objective-error targets.

    Target indices used in hit maps run over the concatenation: ``0..50``
    are the violation targets, ``51..102`` the objective-error targets.
    """

    f_opt: float
    infeasible: np.ndarray
    feasible: np.ndarray

    def __len__(self) -> int:
        return len(self.infeasible) + len(self.feasible)

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.infeasible, self.feasible])


def _log_targets(hi_exp: float, lo_exp: float, count: int) -> np.ndarray:
    v = np.logspace(hi_exp, lo_exp, count)
    v[0], v[-1] = 10.0 ** hi_exp, 10.0 ** lo_exp
    return v


def make_targets(f_opt: float) -> TargetSet:
    infeasible = np.append(_log_targets(4, -6, N_INFEASIBLE_TARGETS - 1), 0.0)
    feasible = _log_targets(0, -8, N_FEASIBLE_TARGETS)
    for a in (infeasible, feasible):
        a.setflags(write=False)
    return TargetSet(float(f_opt), infeasible, feasible)


def update_hits(trajectory: Iterable[Sequence[float]], targets: TargetSet) -> dict[int, int]:
    """First evaluation at which each target is hit; unhit targets are absent."""
    traj = np.asarray(list(trajectory), dtype=np.float64).reshape(-1, 3)
    if traj.shape[0] == 0:
        return {}
    ev, f, nu = traj[:, 0], traj[:, 1], traj[:, 2]
    hits: dict[int, int] = {}
    masks = [nu[:, None] <= targets.infeasible[None, :],
             (nu[:, None] == 0.0) & ((f - targets.f_opt)[:, None] <= targets.feasible[None, :])]
    offset = 0
    for m in masks:
        reached = m.any(axis=0)
        first = m.argmax(axis=0)
        for j in np.flatnonzero(reached):
            hits[offset + int(j)] = int(ev[first[j]])
        offset += m.shape[1]
    return hits


@dataclass(frozen=True)
class ECDFCurve:
    """Step function of the fraction of targets hit against evaluations.

    ``hit_evaluations`` is the sorted multiset of first-hit counts over all
    runs; ``total`` is the denominator (targets times runs).
    """

    hit_evaluations: np.ndarray
    total: int
    budget: float
    scope: str = "runs"

    def fraction_at(self, e) -> np.ndarray | float:
        e_arr = np.asarray(e, dtype=np.float64)
        frac = np.searchsorted(self.hit_evaluations, e_arr, side="right") / self.total
        return float(frac) if e_arr.ndim == 0 else frac

    def steps(self) -> list[tuple[float, float]]:
        """``(evaluation, fraction)`` at 1, at every jump inside the budget, and at the budget."""
        inside = self.hit_evaluations[(self.hit_evaluations > 1) & (self.hit_evaluations <= self.budget)]
        xs = np.unique(np.concatenate([[1.0], inside, [float(self.budget)]]))
        return [(float(x), float(y)) for x, y in zip(xs, self.fraction_at(xs))]

    def area(self, checkpoints: int = AREA_CHECKPOINTS) -> float:
        """Mean of ``1 - fraction`` over log-spaced checkpoints from 1 to the budget."""
        cps = np.logspace(0.0, math.log10(self.budget), checkpoints)
        return float(np.mean(1.0 - self.fraction_at(cps)))


def ecdf_curve(hit_maps: Sequence[Mapping[int, float]], budget: float,
               n_targets: int = N_TARGETS, scope: str | None = None) -> ECDFCurve:
    hit_maps = list(hit_maps)
    if not hit_maps:
        raise ValueError("no hit maps")
    if scope is None:
        scope = "single_run" if len(hit_maps) == 1 else "runs"
    if scope not in ECDF_SCOPES:
        raise ValueError(f"scope must be one of {ECDF_SCOPES}")
    for h in hit_maps:
        if any(not 0 <= k < n_targets for k in h):
            raise ValueError("hit map refers to a target outside the target set")
    evals = np.sort(np.fromiter((v for h in hit_maps for v in h.values()), dtype=np.float64))
    return ECDFCurve(evals, n_targets * len(hit_maps), float(budget), scope)


def aggregate_ecdf(hit_maps_by_dim: Mapping[int, Sequence[Mapping[int, float]]],
                   budget_factor: float, n_targets: int = N_TARGETS) -> ECDFCurve:
    """Mean curve over runs and dimensions on the evaluations-per-dimension axis."""
    scaled = [{k: v / n for k, v in h.items()}
              for n, maps in sorted(hit_maps_by_dim.items()) for h in maps]
    return ecdf_curve(scaled, budget_factor, n_targets, scope="runs_and_dimensions")


def average_ranks(keys: Sequence) -> list[float]:
    """1-based ranks of ``keys`` in ascending order; ties share the mean rank."""
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    ranks = [0.0] * len(keys)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and keys[order[j + 1]] == keys[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass(frozen=True)
class RankRow:
    N: int
    algorithm: str
    quality_rank: float
    deviation_rank: float
    runtime_rank: float
    consensus: float
    ecdf_area: float
    meanFevals: float


@dataclass(frozen=True)
class RankingTable:
    rows: tuple[RankRow, ...]
    overall: tuple[tuple[str, float], ...]

    def winner(self) -> str:
        return self.overall[0][0]

    def order(self, n: int) -> list[str]:
        return [r.algorithm for r in self.rows if r.N == n]


def rank_algorithms(entries: Mapping[str, Mapping[int, tuple[IndicatorReport, ECDFCurve]]]) -> RankingTable:
    """Rank algorithms per dimension on three factors and aggregate.

    Factors, all ascending: ``(nu_med, abs_err)``; ``mean_param_dev`` with
    runs that never became feasible last; ECDF area. Ties share average ranks.
    The consensus is the mean of the three; the overall score is the mean
    consensus over dimensions. Remaining ties fall to ``meanFevals``, then name.
    """
    algos = sorted(entries)
    if len(algos) < 2:
        raise ValueError("ranking needs at least two algorithms")
    dims = set(entries[algos[0]])
    for a in algos[1:]:
        if set(entries[a]) != dims:
            raise ValueError(f"{a!r} covers dimensions {sorted(entries[a])}, expected {sorted(dims)}")
    rows: list[RankRow] = []
    for n in sorted(dims):
        reps = [entries[a][n][0] for a in algos]
        areas = [entries[a][n][1].area() for a in algos]
        r1 = average_ranks([(r.nu_med, r.abs_err) for r in reps])
        r2 = average_ranks([(r.mean_param_dev is None or r.FR == 0.0,
                             r.mean_param_dev if r.mean_param_dev is not None else 0.0) for r in reps])
        r3 = average_ranks(areas)
        block = [RankRow(n, a, r1[i], r2[i], r3[i], (r1[i] + r2[i] + r3[i]) / 3.0,
                         areas[i], reps[i].meanFevals) for i, a in enumerate(algos)]
        block.sort(key=lambda r: (r.consensus, r.meanFevals, r.algorithm))
        rows.extend(block)
    overall = []
    for a in algos:
        mine = [r for r in rows if r.algorithm == a]
        overall.append((a, math.fsum(r.consensus for r in mine) / len(mine),
                        math.fsum(r.meanFevals for r in mine) / len(mine)))
    overall.sort(key=lambda t: (t[1], t[2], t[0]))
    return RankingTable(tuple(rows), tuple((a, s) for a, s, _ in overall))
