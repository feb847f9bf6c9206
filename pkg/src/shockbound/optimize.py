"""Global optimization engine.

Three solvers drive everything in this package:

* :func:`nelder_mead` -- a bounded derivative-free simplex search, used both
  directly and as the worker of :func:`lattice`.
* :func:`lattice` -- a deterministic multistart ensemble of Nelder-Mead
  runs started at the center points of a uniform grid over the search box.
* :func:`differential_evolution` -- a seeded DE/rand/1/bin global optimizer
  with an optional constraint-projection transform applied to every trial
  vector before evaluation, and composable termination conditions.

All solvers are deterministic: the simplex solvers have no random state at
all, and DE is driven by a single ``numpy.random.Generator`` (PCG64) seeded
from the configuration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonFiniteObjective

_INF = float("inf")

# Lacking finite bounds, grid and initial-simplex geometry fall back to this
# box per dimension.
DEFAULT_BOX = (-2.0, 2.0)


@dataclass(frozen=True)
class Bounds:
    """Componentwise box bounds; ``None`` entries mean unbounded.

    Parameters
    ----------
    lower, upper : sequence of float or None
        Per-dimension limits. Where both are finite, ``lower[i] <= upper[i]``
        is required.
    """

    lower: tuple
    upper: tuple

    def __init__(self, lower: Sequence, upper: Sequence):
        lo = tuple(-_INF if v is None else float(v) for v in lower)
        hi = tuple(_INF if v is None else float(v) for v in upper)
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same length")
        for a, b in zip(lo, hi):
            if a > b:
                raise ValueError(f"lower bound {a} exceeds upper bound {b}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __len__(self):
        return len(self.lower)

    def clip(self, x: Sequence[float]) -> list:
        """Return ``x`` clipped into the box, as a new list."""
        out = list(map(float, x))
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if out[i] < lo:
                out[i] = lo
            elif out[i] > hi:
                out[i] = hi
        return out

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        return all(
            lo - tol <= v <= hi + tol
            for v, lo, hi in zip(x, self.lower, self.upper)
        )

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.lower) and all(
            math.isfinite(v) for v in self.upper
        )


def _finite_box(bounds: Bounds, i: int) -> tuple:
    """Finite search box for dimension i (DEFAULT_BOX where unbounded)."""
    lo, hi = bounds.lower[i], bounds.upper[i]
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi
    if math.isfinite(lo):
        return lo, lo + (DEFAULT_BOX[1] - DEFAULT_BOX[0])
    if math.isfinite(hi):
        return hi - (DEFAULT_BOX[1] - DEFAULT_BOX[0]), hi
    return DEFAULT_BOX


@dataclass(frozen=True)
class NmResult:
    x: tuple
    fun: float
    evals: int


def nelder_mead(
    f: Callable[[Sequence[float]], float],
    x0: Sequence[float],
    bounds: Bounds,
    ftol: float = 1e-8,
    max_evals: int = 2000,
    stop_below: Optional[float] = None,
    xtol: Optional[float] = None,
) -> NmResult:
    """Minimize ``f`` with a bounded Nelder-Mead simplex search.

    Every trial point is clipped into ``bounds`` before evaluation, so the
    reported minimizer always lies inside the box. The search terminates when
    both the function spread ``max|f_i - f_best|`` drops to ``ftol`` and the
    coordinate spread of the simplex drops to ``xtol`` (default: ``ftol``),
    when the evaluation budget runs out, or (if given) as soon as the best
    value reaches ``stop_below``.

    Uses the canonical reflection/expansion/contraction/shrink coefficients
    (1, 2, 0.5, 0.5). The initial simplex steps 0.1 of the per-dimension box
    away from ``x0`` (stepping backward when that would leave the box).

    Raises
    ------
    NonFiniteObjective
        If ``f`` is non-finite at every vertex of the initial simplex.
    """
    ndim = len(x0)
    npts = ndim + 1
    if xtol is None:
        xtol = ftol

    def feval(x):
        v = float(f(x))
        return v if math.isfinite(v) else _INF

    # initial simplex: clipped start plus one 10%-of-box step per dimension
    verts = [bounds.clip(x0)]
    for i in range(ndim):
        lo, hi = _finite_box(bounds, i)
        step = 0.1 * (hi - lo)
        v = list(verts[0])
        if v[i] + step > bounds.upper[i]:
            v[i] = v[i] - step
        else:
            v[i] = v[i] + step
        verts.append(bounds.clip(v))

    fvals = []
    evals = 0
    for v in verts:
        fvals.append(feval(v))
        evals += 1
    if all(fv == _INF for fv in fvals):
        raise NonFiniteObjective("objective non-finite at every initial simplex vertex")

    while True:
        # stable sort keeps first-found ordering on ties
        order = sorted(range(npts), key=lambda i: fvals[i])
        verts = [verts[i] for i in order]
        fvals = [fvals[i] for i in order]

        if stop_below is not None and fvals[0] <= stop_below:
            break
        fspread = fvals[npts - 1] - fvals[0]
        xspread = 0.0
        for v in verts[1:]:
            for j in range(ndim):
                d = abs(v[j] - verts[0][j])
                if d > xspread:
                    xspread = d
        if fspread <= ftol and xspread <= xtol:
            break
        if evals >= max_evals:
            break

        centroid = [0.0] * ndim
        for v in verts[: npts - 1]:
            for j in range(ndim):
                centroid[j] += v[j]
        for j in range(ndim):
            centroid[j] = centroid[j] / (npts - 1)

        worst = verts[npts - 1]
        reflect = bounds.clip(
            [centroid[j] + 1.0 * (centroid[j] - worst[j]) for j in range(ndim)]
        )
        f_r = feval(reflect)
        evals += 1

        if f_r < fvals[0]:
            expand = bounds.clip(
                [centroid[j] + 2.0 * (centroid[j] - worst[j]) for j in range(ndim)]
            )
            f_e = feval(expand)
            evals += 1
            if f_e < f_r:
                verts[npts - 1], fvals[npts - 1] = expand, f_e
            else:
                verts[npts - 1], fvals[npts - 1] = reflect, f_r
        elif f_r < fvals[npts - 2]:
            verts[npts - 1], fvals[npts - 1] = reflect, f_r
        else:
            if f_r < fvals[npts - 1]:
                contract = bounds.clip(
                    [centroid[j] + 0.5 * (centroid[j] - worst[j]) for j in range(ndim)]
                )
            else:
                contract = bounds.clip(
                    [centroid[j] - 0.5 * (centroid[j] - worst[j]) for j in range(ndim)]
                )
            f_c = feval(contract)
            evals += 1
            if f_c < min(f_r, fvals[npts - 1]):
                verts[npts - 1], fvals[npts - 1] = contract, f_c
            else:
                for i in range(1, npts):
                    verts[i] = bounds.clip(
                        [
                            verts[0][j] + 0.5 * (verts[i][j] - verts[0][j])
                            for j in range(ndim)
                        ]
                    )
                    fvals[i] = feval(verts[i])
                    evals += 1

    order = sorted(range(npts), key=lambda i: fvals[i])
    best = order[0]
    return NmResult(x=tuple(verts[best]), fun=fvals[best], evals=evals)


def balanced_bins(nbins: int, ndim: int) -> tuple:
    """Split a total optimizer count into per-dimension grid bins.

    Prime factors of ``nbins`` are assigned largest-first to the dimension
    with the fewest bins so far (ties go to the lowest index), e.g.
    ``balanced_bins(4, 2) == (2, 2)`` and ``balanced_bins(16, 2) == (4, 4)``.
    """
    if nbins < 1:
        raise ValueError("nbins must be >= 1")
    factors = []
    n = nbins
    p = 2
    while p * p <= n:
        while n % p == 0:
            factors.append(p)
            n //= p
        p += 1
    if n > 1:
        factors.append(n)
    bins = [1] * ndim
    for fac in sorted(factors, reverse=True):
        k = min(range(ndim), key=lambda i: bins[i])
        bins[k] *= fac
    return tuple(bins)


def grid_centers(bounds: Bounds, bins: Sequence[int]) -> list:
    """Cell-center start points of a uniform grid over the search box.

    Unbounded dimensions are gridded over ``DEFAULT_BOX``. Points are emitted
    in row-major order (last dimension fastest).
    """
    axes = []
    for i, nb in enumerate(bins):
        lo, hi = _finite_box(bounds, i)
        width = (hi - lo) / nb
        axes.append([lo + (k + 0.5) * width for k in range(nb)])
    points = [[]]
    for axis in axes:
        points = [p + [c] for p in points for c in axis]
    return points


def lattice(
    f: Callable[[Sequence[float]], float],
    ndim: int,
    nbins: int,
    bounds: Bounds,
    ftol: float = 1e-8,
    max_evals: int = 2000,
    xtol: Optional[float] = None,
) -> NmResult:
    """Best result over ``nbins`` Nelder-Mead runs started at grid centers.

    Deterministic: start points are the cell centers of a uniform grid over
    the (finite or defaulted) search box, and ties between runs keep the
    first-found result. ``max_evals`` is the per-run budget.
    """
    if len(bounds) != ndim:
        raise ValueError("bounds length must equal ndim")
    bins = balanced_bins(nbins, ndim)
    best = None
    total_evals = 0
    for start in grid_centers(bounds, bins):
        res = nelder_mead(f, start, bounds, ftol=ftol, max_evals=max_evals,
                          xtol=xtol)
        total_evals += res.evals
        if best is None or res.fun < best.fun:
            best = res
    return NmResult(x=best.x, fun=best.fun, evals=total_evals)


# ---------------------------------------------------------------------------
# differential evolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeConfig:
    """Differential evolution settings (paper-tuned defaults)."""

    npop: int = 10
    maxiter: int = 1000
    maxfun: int = 1_000_000
    crossover: float = 0.9
    scaling: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.npop < 4:
            raise ValueError("npop must be >= 4 (three donors plus a candidate)")
        if not 0.0 <= self.crossover <= 1.0:
            raise ValueError("crossover must be in [0, 1]")
        if self.scaling <= 0.0:
            raise ValueError("scaling must be positive")


@dataclass(frozen=True)
class ChangeOverGeneration:
    """Fires when the best value moved at most ``tol`` over ``ngen`` generations."""

    tol: float = 1e-6
    ngen: int = 10

    def check(self, history: Sequence[float]) -> Optional[str]:
        if len(history) > self.ngen:
            if abs(history[-1] - history[-1 - self.ngen]) <= self.tol:
                return f"ChangeOverGeneration(tol={self.tol}, ngen={self.ngen})"
        return None


@dataclass(frozen=True)
class ValueTargetReached:
    """Fires when the best value reaches ``target`` (absolute tolerance)."""

    tol: float = 1e-6
    target: float = 0.0

    def check(self, history: Sequence[float]) -> Optional[str]:
        if history and history[-1] <= self.target + self.tol:
            return f"ValueTargetReached(tol={self.tol}, target={self.target})"
        return None


@dataclass(frozen=True)
class Or:
    """Fires when any child condition fires; reason names the child."""

    children: tuple

    def __init__(self, *children):
        object.__setattr__(self, "children", tuple(children))

    def check(self, history: Sequence[float]) -> Optional[str]:
        for child in self.children:
            reason = child.check(history)
            if reason is not None:
                return reason
        return None


@dataclass(frozen=True)
class EvaluationBudget:
    """Never fires on history; the budget stop is reported by the solver."""

    def check(self, history: Sequence[float]) -> Optional[str]:
        return None


def check_termination(history: Sequence[float], termination) -> tuple:
    """Evaluate a termination condition against a best-value history.

    Returns ``(fired, reason)`` where ``reason`` names the firing condition.
    """
    reason = termination.check(list(history))
    return reason is not None, reason


@dataclass
class DeResult:
    x: np.ndarray
    fun: float
    evals: int
    generations: int
    termination_reason: str
    history: list = field(default_factory=list)
    state: Optional["DeState"] = None


class DeState:
    """Mutable solver state, checkpointable to a portable JSON document."""

    def __init__(self, population, energies, generation, evals, seed):
        self.population = population
        self.energies = energies
        self.generation = generation
        self.evals = evals
        self.seed = seed

    def best_index(self) -> int:
        return int(np.argmin(self.energies))

    def to_dict(self) -> dict:
        i = self.best_index()
        return {
            "seed": self.seed,
            "generation": self.generation,
            "evals": self.evals,
            "best_x": [float(v) for v in self.population[i]],
            "best_f": float(self.energies[i]),
            "population": [[float(v) for v in row] for row in self.population],
            "energies": [float(v) for v in self.energies],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "DeState":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(
            population=np.asarray(doc["population"], dtype=float),
            energies=np.asarray(doc["energies"], dtype=float),
            generation=int(doc["generation"]),
            evals=int(doc["evals"]),
            seed=int(doc["seed"]),
        )


def differential_evolution(
    f: Callable[[np.ndarray], float],
    bounds: Bounds,
    cfg: DeConfig,
    constraints: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    termination=None,
    monitor: Optional[Callable[[int, np.ndarray, float], None]] = None,
) -> DeResult:
    """DE/rand/1/bin with constraint projection and generational update.

    Every candidate (initial members and trial vectors alike) is passed
    through ``constraints`` and then clipped to ``bounds`` before evaluation,
    so the population only ever holds projected, in-bounds vectors. Trial
    vectors are compared against their current population member and replace
    it when not worse (the classic acceptance rule); the reported best keeps
    the first-found vector on ties. Reproducible: identical seed, config and
    objective give an identical trajectory.

    Parameters
    ----------
    f : callable
        Objective to minimize; receives a 1-D float array.
    bounds : Bounds
        Finite box for every dimension.
    cfg : DeConfig
        Population size, budgets, crossover/scaling, seed.
    constraints : callable, optional
        Projection onto the feasible set. Must map any in-bounds vector to a
        feasible in-bounds vector; applied before bound clipping.
    termination : optional
        Condition with a ``check(history)`` method (COG, VTR, Or, ...).
        The evaluation/generation budget always applies as well.
    monitor : callable, optional
        Called once per generation as ``monitor(generation, best_x, best_f)``.
    """
    if not bounds.is_finite():
        raise ValueError("differential_evolution requires finite bounds")
    if termination is None:
        termination = ChangeOverGeneration()

    ndim = len(bounds)
    lb = np.asarray(bounds.lower, dtype=float)
    ub = np.asarray(bounds.upper, dtype=float)
    rng = np.random.default_rng(cfg.seed)

    def project(x: np.ndarray) -> np.ndarray:
        # trials are boxed first (the transform's contract assumes in-bounds
        # input), then projected, then re-clipped as a guard
        x = np.clip(x, lb, ub)
        if constraints is not None:
            x = np.asarray(constraints(np.asarray(x, dtype=float)), dtype=float)
        return np.clip(x, lb, ub)

    population = np.empty((cfg.npop, ndim), dtype=float)
    energies = np.empty(cfg.npop, dtype=float)
    evals = 0
    for i in range(cfg.npop):
        x = lb + rng.random(ndim) * (ub - lb)
        x = project(x)
        population[i] = x
        energies[i] = float(f(x))
        evals += 1

    best = int(np.argmin(energies))
    history = [float(energies[best])]
    generation = 0
    reason = "EvaluationBudget"
    if monitor is not None:
        monitor(generation, population[best].copy(), float(energies[best]))
    fired, why = check_termination(history, termination)
    if fired:
        reason = why
    else:
        while generation < cfg.maxiter and evals < cfg.maxfun:
            generation += 1
            new_pop = population.copy()
            new_energies = energies.copy()
            for i in range(cfg.npop):
                while True:
                    r = rng.integers(0, cfg.npop, size=3)
                    if len({int(r[0]), int(r[1]), int(r[2]), i}) == 4:
                        break
                mutant = population[r[0]] + cfg.scaling * (
                    population[r[1]] - population[r[2]]
                )
                cross = rng.random(ndim) < cfg.crossover
                cross[rng.integers(0, ndim)] = True
                trial = np.where(cross, mutant, population[i])
                trial = project(trial)
                f_trial = float(f(trial))
                evals += 1
                # classic acceptance: equal-cost trials replace, which keeps
                # the population drifting across objective plateaus
                if f_trial <= energies[i]:
                    new_pop[i] = trial
                    new_energies[i] = f_trial
            population, energies = new_pop, new_energies
            best = int(np.argmin(energies))
            history.append(float(energies[best]))
            if monitor is not None:
                monitor(generation, population[best].copy(), float(energies[best]))
            fired, why = check_termination(history, termination)
            if fired:
                reason = why
                break

    best = int(np.argmin(energies))
    return DeResult(
        x=population[best].copy(),
        fun=float(energies[best]),
        evals=evals,
        generations=generation,
        termination_reason=reason,
        history=history,
        state=DeState(population, energies, generation, evals, cfg.seed),
    )
