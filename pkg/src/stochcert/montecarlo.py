"""Simulation and exact-enumeration oracles for exit and reach-avoid events.

Randomness: paths are processed in chunks of ``CHUNK`` paths and chunk ``j``
draws from ``numpy.random.default_rng([seed, j])`` (PCG64 seeded through
SeedSequence), one disturbance batch per time step. Results therefore depend
only on ``(seed, n_paths)``, not on how the work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.stats import beta as beta_dist

from .model import FiniteSupport, ProblemError, ProblemKind, ProblemSpec

CHUNK = 65_536
CONFIDENCE = 0.99
EXACT_BUDGET = 10 ** 7


class BudgetExceeded(ValueError):
    pass


def clopper_pearson(k: int, n: int, level: float = CONFIDENCE) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval for ``k`` successes in ``n``."""
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n and n >= 1, got k={k}, n={n}")
    a = (1 - level) / 2
    lo = 0.0 if k == 0 else float(beta_dist.ppf(a, k, n - k + 1))
    hi = 1.0 if k == n else float(beta_dist.ppf(1 - a, k + 1, n - k))
    return lo, hi


@dataclass(frozen=True)
class MCResult:
    estimate: float
    n_paths: int
    ci_lo: float
    ci_hi: float
    seed: int
    event: str
    hits: int = 0

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "n": self.n_paths, "ci_lo": self.ci_lo,
                "ci_hi": self.ci_hi, "seed": self.seed, "event": self.event}


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray        # (N+1, n_state)
    disturbances: np.ndarray  # (N, n_dist)

    @property
    def horizon(self) -> int:
        return self.disturbances.shape[0]

    def is_consistent(self, step) -> bool:
        """True iff ``states[l+1] == step(states[l], disturbances[l])`` for all l."""
        return all(np.array_equal(self.states[l + 1], step(self.states[l], self.disturbances[l]))
                   for l in range(self.horizon))


def _check_start(problem: ProblemSpec, n_paths: int) -> None:
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    x0 = np.asarray([problem.x0])
    if not problem.in_safe(x0)[0]:
        raise ProblemError("x0 ∉ X")
    if problem.kind is ProblemKind.REACH_AVOID and problem.in_target(x0)[0]:
        raise ProblemError("x0 ∉ X \\ X_r")


def _chunks(n_paths: int, seed: int) -> Iterator[tuple[int, np.random.Generator]]:
    for j, start in enumerate(range(0, n_paths, CHUNK)):
        yield min(CHUNK, n_paths - start), np.random.default_rng([seed, j])


def _event_name(problem: ProblemSpec) -> str:
    return "exit" if problem.kind is ProblemKind.SAFETY else "reach_avoid"


def simulate_event(problem: ProblemSpec, n_paths: int, seed: int = 0) -> MCResult:
    """Estimate the exit probability (safety) or the reach-before-exit
    probability (reach-avoid) over the problem's horizon."""
    _check_start(problem, n_paths)
    sys = problem.system
    ra = problem.kind is ProblemKind.REACH_AVOID
    hits = 0
    for n, rng in _chunks(n_paths, seed):
        x = np.tile(np.asarray(problem.x0, float), (n, 1))
        active = np.ones(n, dtype=bool)
        fired = np.zeros(n, dtype=bool)
        for _ in range(problem.horizon):
            theta = problem.system.disturbance.sample(rng, n)
            idx = np.flatnonzero(active)
            if idx.size == 0:
                continue  # keep the stream aligned with the coupled simulator
            x[idx] = sys.step_many(x[idx], theta[idx])
            inside = problem.in_safe(x[idx])
            if ra:
                hit = problem.in_target(x[idx])
                fired[idx[hit]] = True
                active[idx[hit | ~inside]] = False
            else:
                fired[idx[~inside]] = True
                active[idx[~inside]] = False
        hits += int(fired.sum())
    lo, hi = clopper_pearson(hits, n_paths)
    return MCResult(hits / n_paths, n_paths, lo, hi, seed, _event_name(problem), hits)


@dataclass(frozen=True)
class CoupledPaths:
    """Original and switched trajectories driven by identical disturbances.

    Arrays have shape ``(n_paths, N+1, n_state)`` for states and
    ``(n_paths, N, n_dist)`` for disturbances.
    """

    original: np.ndarray
    switched: np.ndarray
    disturbances: np.ndarray

    def __len__(self) -> int:
        return self.original.shape[0]

    def pair(self, i: int) -> tuple[Trajectory, Trajectory]:
        return (Trajectory(self.original[i], self.disturbances[i]),
                Trajectory(self.switched[i], self.disturbances[i]))

    def pairs(self) -> Iterator[tuple[Trajectory, Trajectory]]:
        for i in range(len(self)):
            yield self.pair(i)


def simulate_switched_coupled(problem: ProblemSpec, n_paths: int, seed: int = 0) -> CoupledPaths:
    """Simulate the original system and its frozen (switched) counterpart on
    the same disturbance sequences. The switched system stops moving once
    the state leaves X, or (reach-avoid) once it enters X_r."""
    _check_start(problem, n_paths)
    sys = problem.system
    N = problem.horizon
    dim = len(problem.state_vars)
    mdim = len(sys.disturbance_vars)
    ra = problem.kind is ProblemKind.REACH_AVOID
    orig_parts, sw_parts, dist_parts = [], [], []
    for n, rng in _chunks(n_paths, seed):
        orig = np.empty((n, N + 1, dim))
        sw = np.empty((n, N + 1, dim))
        dist = np.empty((n, N, mdim))
        orig[:, 0] = problem.x0
        sw[:, 0] = problem.x0
        with np.errstate(over="ignore", invalid="ignore"):
            for l in range(N):
                theta = sys.disturbance.sample(rng, n)
                dist[:, l] = theta
                orig[:, l + 1] = sys.step_many(orig[:, l], theta)
                moving = problem.in_safe(sw[:, l])
                if ra:
                    moving &= ~problem.in_target(sw[:, l])
                nxt = sw[:, l].copy()
                if moving.any():
                    nxt[moving] = sys.step_many(sw[moving, l], theta[moving])
                sw[:, l + 1] = nxt
        orig_parts.append(orig)
        sw_parts.append(sw)
        dist_parts.append(dist)
    return CoupledPaths(np.concatenate(orig_parts), np.concatenate(sw_parts),
                        np.concatenate(dist_parts))


def exact_probability(problem: ProblemSpec, N: int | None = None) -> float:
    """Exact event probability for a finite-support disturbance, by
    enumerating all disturbance sequences level by level."""
    dist = problem.system.disturbance
    if not isinstance(dist, FiniteSupport):
        raise ProblemError("exact enumeration needs a finite-support disturbance")
    N = problem.horizon if N is None else int(N)
    if N < 0:
        raise ValueError("horizon must be nonnegative")
    s = len(dist.points)
    if s ** N > EXACT_BUDGET:
        raise BudgetExceeded(f"{s}^{N} paths exceed the enumeration budget {EXACT_BUDGET}")
    _check_start(problem, 1)
    pts = np.asarray(dist.points, float)
    probs = np.asarray(dist.probabilities, float)
    ra = problem.kind is ProblemKind.REACH_AVOID
    x = np.asarray([problem.x0], float)
    w = np.ones(1)
    total = 0.0
    for _ in range(N):
        if x.shape[0] == 0:
            break
        k = x.shape[0]
        x = problem.system.step_many(np.repeat(x, s, axis=0), np.tile(pts, (k, 1)))
        w = np.repeat(w, s) * np.tile(probs, k)
        inside = problem.in_safe(x)
        if ra:
            hit = problem.in_target(x)
            total += float(w[hit].sum())
            keep = inside & ~hit
        else:
            total += float(w[~inside].sum())
            keep = inside
        x, w = x[keep], w[keep]
    return total
