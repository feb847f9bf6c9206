"""Monte Carlo pipeline for transition-layer futures.

Draw boundary perturbations from a uniform or moment-matched truncated
Gaussian distribution, solve the steady Burgers system per draw, keep only
solves whose residual meets the acceptance tolerance, and summarize the
resulting transition locations (moments, empirical CDF, probability of
success). Sample sets persist to a CSV of ``z,delta,fit`` rows plus a JSON
sidecar carrying the run configuration, so downstream statistics never need
to repeat the expensive solves.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from . import _backend
from .burgers import SolveConfig
from .errors import BufferExhausted, EmptyAfterFilter
from .optimize import balanced_bins

# standardized truncation edges of the moment-matched Gaussian: the window
# [0, eps] sits sqrt(3) standard deviations either side of the mean eps/2
_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class DeltaDistribution:
    """Sampling distribution for the boundary perturbation on [0, eps].

    ``uniform`` is U(0, eps). ``truncgauss`` is the Gaussian truncated to
    [0, eps] with location ``eps/2`` and scale ``sqrt(eps^2/12)``, i.e. the
    first two moments of the uniform distribution, so the two choices are
    directly comparable.
    """

    kind: str
    eps: float

    def __post_init__(self):
        if self.kind not in ("uniform", "truncgauss"):
            raise ValueError(f"unknown distribution kind: {self.kind!r}")
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")

    @property
    def loc(self) -> float:
        return 0.5 * self.eps

    @property
    def scale(self) -> float:
        return math.sqrt(self.eps * self.eps / 12.0)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(0.0, self.eps, size=n)
        # inverse-CDF sampling through the erf-based normal CDF/quantile
        lo = ndtr(-_SQRT3)
        hi = ndtr(_SQRT3)
        u = rng.uniform(0.0, 1.0, size=n)
        return self.loc + self.scale * ndtri(lo + u * (hi - lo))

    def cdf(self, x) -> np.ndarray:
        """Theoretical CDF, for distribution-fidelity checks."""
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return np.clip(x / self.eps, 0.0, 1.0)
        lo = ndtr(-_SQRT3)
        hi = ndtr(_SQRT3)
        out = (ndtr((x - self.loc) / self.scale) - lo) / (hi - lo)
        return np.clip(out, 0.0, 1.0)

    def theoretical_std(self) -> float:
        if self.kind == "uniform":
            return self.scale
        # truncated-normal variance on symmetric edges +-sqrt(3)
        phi = math.exp(-1.5) / math.sqrt(2.0 * math.pi)
        mass = 2.0 * ndtr(_SQRT3) - 1.0
        return self.scale * math.sqrt(1.0 - 2.0 * _SQRT3 * phi / mass)


def draw(dist: DeltaDistribution, n: int, seed: int) -> np.ndarray:
    """``n`` reproducible draws in [0, eps]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return dist.draw(n, np.random.default_rng(seed))


@dataclass(frozen=True)
class SampleSet:
    """Accepted (z, delta, fit) triples sorted ascending by z."""

    z: np.ndarray
    delta: np.ndarray
    fit: np.ndarray
    v: float
    eps: float
    n: int
    dist: str
    seed: int
    miss_count: int
    missed_deltas: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.z)


def _solve_chunk(args):
    v, deltas, nbins_z, nbins_a, ftol, xtol, max_evals = args
    return [
        _backend.solve_lattice(v, d, nbins_z, nbins_a, ftol, xtol, max_evals)
        for d in deltas
    ]


def _solve_many(v, deltas, cfg: SolveConfig, workers: int):
    nbins_z, nbins_a = balanced_bins(cfg.nbins, 2)
    if workers <= 1 or len(deltas) < 64:
        return _solve_chunk((v, list(deltas), nbins_z, nbins_a, cfg.ftol,
                             cfg.xtol, cfg.max_evals))
    chunks = np.array_split(np.asarray(deltas), workers * 4)
    tasks = [
        (v, chunk.tolist(), nbins_z, nbins_a, cfg.ftol, cfg.xtol, cfg.max_evals)
        for chunk in chunks
        if len(chunk)
    ]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_solve_chunk, tasks):
            out.extend(part)
    return out


def mc_run(
    v: float,
    eps: float,
    n: int,
    dist: str = "uniform",
    accept_tol: float = 1e-9,
    seed: int = 0,
    solve_cfg: Optional[SolveConfig] = None,
    workers: int = 1,
) -> SampleSet:
    """Collect exactly ``n`` accepted transition-layer solves.

    Draws ``ceil(1.1 n)`` perturbations up front (the padding covers the rare
    solves that miss the acceptance tolerance), solves them independently in
    draw order, and accepts until ``n`` records are in hand. Misses are
    counted and their perturbations kept for inspection. If the padded buffer
    runs short, more draws arrive in chunks of ``ceil(0.1 n)`` from the same
    stream, up to a hard cap of ``2 n`` total draws.

    The output is independent of ``workers``: the draw sequence is fixed by
    the seed and acceptance scans in draw order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cfg = solve_cfg or SolveConfig(accept_tol=accept_tol)
    distribution = DeltaDistribution(kind=dist, eps=eps)
    rng = np.random.default_rng(seed)

    hard_cap = 2 * n
    drawn = 0
    accepted_z, accepted_d, accepted_f = [], [], []
    missed = []

    pending = distribution.draw(min(math.ceil(1.1 * n), hard_cap), rng)
    drawn += len(pending)
    while True:
        results = _solve_many(v, pending, cfg, workers)
        for d, (z, _a, fit, _evals) in zip(pending, results):
            if len(accepted_z) == n:
                break
            if fit > accept_tol:
                missed.append(float(d))
                continue
            accepted_z.append(float(z))
            accepted_d.append(float(d))
            accepted_f.append(float(fit))
        if len(accepted_z) == n:
            break
        if drawn >= hard_cap:
            raise BufferExhausted(
                f"only {len(accepted_z)} of {n} samples accepted after "
                f"{drawn} draws (accept_tol={accept_tol:g})"
            )
        chunk = min(math.ceil(0.1 * n), hard_cap - drawn)
        pending = distribution.draw(chunk, rng)
        drawn += len(pending)

    z = np.asarray(accepted_z)
    d = np.asarray(accepted_d)
    f = np.asarray(accepted_f)
    order = np.argsort(z, kind="stable")
    return SampleSet(
        z=z[order],
        delta=d[order],
        fit=f[order],
        v=v,
        eps=eps,
        n=n,
        dist=dist,
        seed=seed,
        miss_count=len(missed),
        missed_deltas=tuple(missed),
    )


def subsample(samples: SampleSet, m: int, seed: int) -> SampleSet:
    """``m`` records chosen without replacement, re-sorted by z."""
    if not 1 <= m <= len(samples):
        raise ValueError("subsample size must be in [1, len(samples)]")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(samples), size=m, replace=False)
    idx = idx[np.argsort(samples.z[idx], kind="stable")]
    return SampleSet(
        z=samples.z[idx],
        delta=samples.delta[idx],
        fit=samples.fit[idx],
        v=samples.v,
        eps=samples.eps,
        n=m,
        dist=samples.dist,
        seed=seed,
        miss_count=samples.miss_count,
        missed_deltas=samples.missed_deltas,
    )


def cdf(values, lo: Optional[float] = None, hi: Optional[float] = None):
    """Empirical CDF step points of ``values`` filtered to [lo, hi].

    The sorted values get heights ``(1..m)/m``; when ``lo`` sits below the
    smallest value a (lo, 0) point is prepended, and when ``hi`` sits above
    the largest a (hi, 1) point is appended.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise EmptyAfterFilter("no values supplied")
    lo = float(arr.min()) if lo is None else float(lo)
    hi = float(arr.max()) if hi is None else float(hi)
    arr = np.sort(arr[np.logical_and(arr >= lo, arr <= hi)])
    if arr.size == 0:
        raise EmptyAfterFilter(f"no values inside [{lo}, {hi}]")
    ys = (1.0 + np.arange(arr.size)) / arr.size
    if lo < arr[0]:
        arr, ys = np.insert(arr, 0, lo), np.insert(ys, 0, 0.0)
    if hi > arr[-1]:
        arr, ys = np.append(arr, hi), np.append(ys, 1.0)
    return arr, ys


def moments(values) -> tuple:
    """Arithmetic mean and population standard deviation (divide by n)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("values must be non-empty")
    return float(arr.mean()), float(arr.std())


def p_success(samples: SampleSet, dx_percent: int) -> float:
    """Fraction of records strictly beyond ``(1 + dx/100)`` times the mean z.

    The reference mean is computed from the same sample set.
    """
    if not 0 <= dx_percent <= 15:
        raise ValueError("dx_percent must be in [0, 15]")
    if len(samples) == 0:
        raise ValueError("samples must be non-empty")
    zbar = float(samples.z.mean())
    threshold = (100 + dx_percent) / 100.0 * zbar
    return float(np.count_nonzero(samples.z > threshold) / len(samples))


@dataclass(frozen=True)
class McBoundEstimate:
    minimum: float
    mean: float
    maximum: float
    values: tuple


def mc_bound_estimate(
    v: float,
    eps: float,
    n: int,
    dist: str,
    repeats: int,
    dx_percent: int,
    seed: int = 0,
    accept_tol: float = 1e-9,
    workers: int = 1,
) -> McBoundEstimate:
    """(min, mean, max) of the success probability over independent runs.

    Each repeat is a full sampling run with a seed derived from ``seed``, so
    the estimate is reproducible and repeats are independent.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    child_seeds = np.random.SeedSequence(seed).generate_state(repeats)
    values = []
    for s in child_seeds:
        run = mc_run(
            v, eps, n, dist=dist, accept_tol=accept_tol, seed=int(s),
            workers=workers,
        )
        values.append(p_success(run, dx_percent))
    return McBoundEstimate(
        minimum=min(values),
        mean=float(np.mean(values)),
        maximum=max(values),
        values=tuple(values),
    )


def ks_statistic(values, cdf_fn) -> float:
    """One-sample Kolmogorov-Smirnov statistic against a theoretical CDF."""
    arr = np.sort(np.asarray(values, dtype=float))
    nvals = arr.size
    theo = np.asarray(cdf_fn(arr), dtype=float)
    steps_hi = (1.0 + np.arange(nvals)) / nvals
    steps_lo = np.arange(nvals) / nvals
    return float(max((steps_hi - theo).max(), (theo - steps_lo).max()))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def save_sample_set(samples: SampleSet, csv_path, comment: Optional[str] = None) -> None:
    """Write records to CSV (``z,delta,fit``) plus a JSON config sidecar."""
    path = Path(csv_path)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["z", "delta", "fit"])
        for z, d, f in zip(samples.z, samples.delta, samples.fit):
            writer.writerow([repr(float(z)), repr(float(d)), repr(float(f))])
    sidecar = {
        "v": samples.v,
        "eps": samples.eps,
        "n": samples.n,
        "dist": samples.dist,
        "seed": samples.seed,
        "miss_count": samples.miss_count,
        "missed_deltas": list(samples.missed_deltas),
        "z_mean": float(samples.z.mean()),
        "z_std": float(samples.z.std()),
        "d_mean": float(samples.delta.mean()),
        "d_std": float(samples.delta.std()),
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=1)


def load_sample_set(csv_path) -> SampleSet:
    path = Path(csv_path)
    z, d, f = [], [], []
    with open(path, newline="") as fh:
        rows = (line for line in fh if not line.startswith("#"))
        reader = csv.DictReader(rows)
        for row in reader:
            z.append(float(row["z"]))
            d.append(float(row["delta"]))
            f.append(float(row["fit"]))
    meta = {}
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        with open(sidecar) as fh:
            meta = json.load(fh)
    return SampleSet(
        z=np.asarray(z),
        delta=np.asarray(d),
        fit=np.asarray(f),
        v=float(meta.get("v", math.nan)),
        eps=float(meta.get("eps", math.nan)),
        n=int(meta.get("n", len(z))),
        dist=str(meta.get("dist", "unknown")),
        seed=int(meta.get("seed", -1)),
        miss_count=int(meta.get("miss_count", 0)),
        missed_deltas=tuple(meta.get("missed_deltas", ())),
    )
