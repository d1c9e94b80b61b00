"""Optimizer contract and the reference baselines.

Optimizers follow an ask/tell protocol: :meth:`Optimizer.ask` proposes a
batch of points, the harness evaluates them through the budgeted black box
and hands the results back via :meth:`Optimizer.tell`. All randomness comes
from the generator passed to :meth:`Optimizer.initialize`.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass

import numpy as np

from .problem import ProblemInstance
from .protocol import RunRecord, TerminationRule, run_experiment, sample_initial


class Optimizer(ABC):
    name: str = "optimizer"
    #: disable the stagnation criterion for this solver
    skip_stagnation: bool = False

    @abstractmethod
    def initialize(self, instance: ProblemInstance, rng: np.random.Generator, budget: int) -> None:
        """Reset all internal state for a fresh run."""

    @abstractmethod
    def ask(self) -> np.ndarray:
        """Next batch of candidates, shape ``(k, N)``."""

    @abstractmethod
    def tell(self, Y: np.ndarray, f: np.ndarray, nu: np.ndarray) -> None:
        """Receive the evaluations of the last batch."""

    def config_dict(self) -> dict:
        return {}


def lex_order(f: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Indices sorting a batch by violation, then objective (stable)."""
    return np.lexsort((f, nu))


def _clip(instance: ProblemInstance, Y: np.ndarray) -> np.ndarray:
    return np.clip(Y, instance.lower_bound, instance.upper_bound)


@dataclass(frozen=True)
class RandomSearchConfig:
    batch_size: int = 1000

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


class RandomSearch(Optimizer):
    """Uniform sampling in the search box."""

    name = "rs"
    skip_stagnation = True

    def __init__(self, config: RandomSearchConfig | None = None):
        self.config = config or RandomSearchConfig()

    def initialize(self, instance, rng, budget):
        self.instance, self.rng = instance, rng

    def ask(self):
        return sample_initial(self.instance, self.rng, self.config.batch_size)

    def tell(self, Y, f, nu):
        pass

    def config_dict(self):
        return asdict(self.config)


def _distinct_donors(rng: np.random.Generator, size: int) -> np.ndarray:
    """Per row i, three indices distinct from each other and from i (rejection sampling)."""
    picked = [np.arange(size)]
    for _ in range(3):
        col = rng.integers(0, size, size)
        while True:
            bad = np.zeros(size, dtype=bool)
            for p in picked:
                bad |= col == p
            if not bad.any():
                break
            col[bad] = rng.integers(0, size, int(bad.sum()))
        picked.append(col)
    return np.stack(picked[1:], axis=1)


@dataclass(frozen=True)
class DEConfig:
    """DE/rand/1/bin parameters; ``population_size=None`` means ``max(20, 5N)``.

    With ``self_adaptive`` each individual carries its own ``F`` and ``CR``
    (initialised from ``scale_factor`` and ``crossover_rate``); a trial
    resamples them with probability ``adapt_prob`` and keeps them only if the
    trial survives.
    """

    population_size: int | None = None
    scale_factor: float = 0.5
    crossover_rate: float = 0.9
    self_adaptive: bool = True
    adapt_prob: float = 0.1
    scale_range: tuple[float, float] = (0.1, 1.0)

    def __post_init__(self):
        if self.population_size is not None and self.population_size < 4:
            raise ValueError("population_size must be at least 4")
        if not (0.0 < self.scale_factor <= 2.0):
            raise ValueError("scale_factor must lie in (0, 2]")
        if not (0.0 <= self.crossover_rate <= 1.0):
            raise ValueError("crossover_rate must lie in [0, 1]")
        if not (0.0 <= self.adapt_prob <= 1.0):
            raise ValueError("adapt_prob must lie in [0, 1]")
        lo, hi = self.scale_range
        if not (0.0 < lo <= hi <= 2.0):
            raise ValueError("scale_range must satisfy 0 < lo <= hi <= 2")

    def population_for(self, n: int) -> int:
        return self.population_size if self.population_size is not None else max(20, 5 * n)


class DifferentialEvolution(Optimizer):
    """DE/rand/1/bin with greedy lexicographic survivor selection.

    Mutant components outside the box are clamped to the nearest bound.
    """

    name = "de"

    def __init__(self, config: DEConfig | None = None):
        self.config = config or DEConfig()

    def initialize(self, instance, rng, budget):
        n = instance.dimension
        self.instance, self.rng = instance, rng
        self.np_ = self.config.population_for(n)
        if budget < self.np_:
            raise ValueError(f"budget {budget} smaller than population size {self.np_}")
        self.pop = None
        self.pop_f = self.pop_nu = None
        self.scale = np.full(self.np_, self.config.scale_factor)
        self.cr = np.full(self.np_, self.config.crossover_rate)
        self._trial_scale, self._trial_cr = self.scale, self.cr

    def _trial_parameters(self):
        cfg, rng, size = self.config, self.rng, self.np_
        if not cfg.self_adaptive:
            return self.scale, self.cr
        lo, hi = cfg.scale_range
        new_scale = rng.random(size) < cfg.adapt_prob
        scale = np.where(new_scale, lo + (hi - lo) * rng.random(size), self.scale)
        new_cr = rng.random(size) < cfg.adapt_prob
        cr = np.where(new_cr, rng.random(size), self.cr)
        return scale, cr

    def _trials(self) -> np.ndarray:
        pop, rng = self.pop, self.rng
        size, n = pop.shape
        self._trial_scale, self._trial_cr = self._trial_parameters()
        donors = _distinct_donors(rng, size)
        a, b, c = pop[donors[:, 0]], pop[donors[:, 1]], pop[donors[:, 2]]
        mutant = _clip(self.instance, a + self._trial_scale[:, None] * (b - c))
        cross = rng.random((size, n)) < self._trial_cr[:, None]
        forced = rng.integers(0, n, size)
        cross[np.arange(size), forced] = True
        return np.where(cross, mutant, pop)

    def ask(self):
        if self.pop is None:
            return sample_initial(self.instance, self.rng, self.np_)
        return self._trials()

    def tell(self, Y, f, nu):
        if self.pop is None:
            self.pop, self.pop_f, self.pop_nu = Y.copy(), f.copy(), nu.copy()
            return
        # trial survives when it is no worse than its target
        keep = (nu < self.pop_nu) | ((nu == self.pop_nu) & (f <= self.pop_f))
        self.pop[keep] = Y[keep]
        self.pop_f[keep] = f[keep]
        self.pop_nu[keep] = nu[keep]
        self.scale[keep] = self._trial_scale[keep]
        self.cr[keep] = self._trial_cr[keep]

    def config_dict(self):
        d = asdict(self.config)
        d["scale_range"] = list(d["scale_range"])
        return d


@dataclass(frozen=True)
class ESConfig:
    """Matrix-adaptation ES parameters.

    ``None`` entries take dimension-dependent defaults: ``lambda = 4N``,
    ``mu = lambda // 4``, ``sigma0 = N**3 / 2``, ``tau = 1/sqrt(2N)``.
    ``step_size`` is ``"csa"`` (cumulative path length control) or
    ``"self_adaptive"`` (log-normal mutation of per-offspring step sizes,
    rate ``tau``).
    """

    offspring: int | None = None
    parents: int | None = None
    sigma0: float | None = None
    tau: float | None = None
    step_size: str = "csa"

    def __post_init__(self):
        if self.step_size not in ("csa", "self_adaptive"):
            raise ValueError("step_size must be 'csa' or 'self_adaptive'")

    def resolve(self, n: int) -> tuple[int, int, float, float]:
        lam = self.offspring if self.offspring is not None else 4 * n
        mu = self.parents if self.parents is not None else lam // 4
        sigma0 = self.sigma0 if self.sigma0 is not None else n ** 3 / 2.0
        tau = self.tau if self.tau is not None else 1.0 / math.sqrt(2.0 * n)
        if not (1 <= mu < lam):
            raise ValueError(f"need 1 <= mu < lambda, got mu={mu}, lambda={lam}")
        if not sigma0 > 0 or not tau > 0:
            raise ValueError("sigma0 and tau must be positive")
        return lam, mu, float(sigma0), float(tau)


class EvolutionStrategy(Optimizer):
    """(mu/mu_w, lambda)-MA-ES ranking offspring lexicographically.

    Offspring are clamped into the box and the clamped points drive every
    update: the mean is recombined from them and the mutation vectors are
    recovered as ``M^-1 (y - m) / sigma``. Without this the mean can leave
    the box and the search collapses onto a box face.
    """

    name = "es"

    def __init__(self, config: ESConfig | None = None):
        self.config = config or ESConfig()

    def initialize(self, instance, rng, budget):
        n = instance.dimension
        self.instance, self.rng = instance, rng
        self.lam, self.mu, sigma0, self.tau = self.config.resolve(n)
        if budget < self.lam:
            raise ValueError(f"budget {budget} smaller than offspring count {self.lam}")
        w = np.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        mu_eff = 1.0 / float(np.sum(self.weights ** 2))
        self.mu_eff = mu_eff
        self.c_s = (mu_eff + 2.0) / (n + mu_eff + 5.0)
        self.c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
        self.c_mu = min(1.0 - self.c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
        self.d_s = 1.0 + self.c_s + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0)
        self.chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
        self.mean = sample_initial(instance, rng, 1)[0]
        self.sigma = sigma0
        self.M = np.eye(n)
        self.path = np.zeros(n)
        self.sigma_history = [sigma0]
        self._sigmas = None

    def ask(self):
        n = self.instance.dimension
        if self.config.step_size == "self_adaptive":
            self._sigmas = self.sigma * np.exp(self.tau * self.rng.standard_normal(self.lam))
        else:
            self._sigmas = np.full(self.lam, self.sigma)
        z = self.rng.standard_normal((self.lam, n))
        return _clip(self.instance, self.mean + self._sigmas[:, None] * (z @ self.M.T))

    def tell(self, Y, f, nu):
        n = self.instance.dimension
        sel = lex_order(f, nu)[: self.mu]
        w = self.weights
        d = (Y[sel] - self.mean) / self._sigmas[sel, None]
        z = np.linalg.solve(self.M, d.T).T
        self.mean = w @ Y[sel]
        eye = np.eye(n)
        if self.config.step_size == "self_adaptive":
            zw = math.sqrt(self.mu_eff) * (w @ z)
            self.M = self.M @ (eye + 0.5 * self.c_1 * (np.outer(zw, zw) - eye)
                               + 0.5 * self.c_mu * ((z.T * w) @ z - eye))
            self.sigma = float(w @ self._sigmas[sel])
        else:
            cs = self.c_s
            self.path = (1.0 - cs) * self.path + math.sqrt(self.mu_eff * cs * (2.0 - cs)) * (w @ z)
            self.M = self.M @ (eye + 0.5 * self.c_1 * (np.outer(self.path, self.path) - eye)
                               + 0.5 * self.c_mu * ((z.T * w) @ z - eye))
            # cap the per-generation increase; far-off clamped steps can be huge
            self.sigma *= math.exp(min(1.0, cs / self.d_s * (np.linalg.norm(self.path) / self.chi_n - 1.0)))
        self.sigma_history.append(self.sigma)

    def config_dict(self):
        return asdict(self.config)


SOLVERS = {
    "rs": (RandomSearch, RandomSearchConfig),
    "de": (DifferentialEvolution, DEConfig),
    "es": (EvolutionStrategy, ESConfig),
}


def make_solver(name: str, params: dict | None = None) -> Optimizer:
    try:
        cls, cfg = SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(SOLVERS)}") from None
    return cls(cfg(**(params or {})))


def random_search_run(instance: ProblemInstance, rule: TerminationRule, seed: int,
                      config: RandomSearchConfig | None = None) -> RunRecord:
    return run_experiment(RandomSearch(config), instance, rule, seed)


def de_run(instance: ProblemInstance, rule: TerminationRule, seed: int,
           config: DEConfig | None = None) -> RunRecord:
    return run_experiment(DifferentialEvolution(config), instance, rule, seed)


def es_run(instance: ProblemInstance, rule: TerminationRule, seed: int,
           config: ESConfig | None = None) -> RunRecord:
    return run_experiment(EvolutionStrategy(config), instance, rule, seed)
