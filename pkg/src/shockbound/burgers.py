"""Steady-state solution of the viscous Burgers equation with a perturbed
left boundary.

For viscosity ``v`` and boundary values ``u(-1) = 1 + delta``, ``u(1) = -1``,
the steady profile is ``u(x) = -a * tanh(a / (2 v) * (x - z_star))`` with the
transition layer at ``u(z_star) = 0``. The two unknowns ``(z_star, a)`` are
the simultaneous roots of

    a * tanh(a / (2 v) * (1 - z)) - 1         = 0
    a * tanh(a / (2 v) * (1 + z)) - 1 - delta = 0

found by minimizing the summed absolute residuals with a deterministic
multistart Nelder-Mead ensemble (grid-centered starts, ``z`` bounded in
[0, 1], ``a`` unbounded). The transition location is supersensitive to
``delta``, which is what makes this system a good stress test downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import _backend
from .errors import ConvergenceFailure
from .optimize import balanced_bins


@dataclass(frozen=True)
class BurgersParams:
    """Problem data: viscosity ``v > 0`` and boundary perturbation ``delta >= 0``."""

    v: float
    delta: float

    def __post_init__(self):
        if not self.v > 0.0:
            raise ValueError("viscosity v must be positive")
        if self.delta < 0.0:
            raise ValueError("delta must be non-negative")


@dataclass(frozen=True)
class SolveConfig:
    """Solver settings.

    ``ftol``/``xtol`` terminate the simplex search (the tight ``xtol`` keeps
    it contracting to machine-level residuals); ``accept_tol`` is the
    separate residual threshold a solution must meet to be accepted (solves
    whose best fit exceeds it raise :class:`ConvergenceFailure`).
    """

    nbins: int = 4
    ftol: float = 1e-8
    xtol: float = 1e-13
    accept_tol: float = 1e-9
    max_evals: int = 1200


@dataclass(frozen=True)
class BurgersSolution:
    z_star: float
    a: float
    fit: float
    evals: int = 0


def residuals(params: BurgersParams, z: float, a: float) -> tuple:
    """The two boundary-condition residuals at a candidate ``(z, a)``."""
    t = 0.5 * (a / params.v)
    r1 = a * math.tanh(t * (1.0 - z)) - 1.0
    r2 = a * math.tanh(t * (1.0 + z)) - 1.0 - params.delta
    return r1, r2


def objective(params: BurgersParams, z: float, a: float) -> float:
    """Summed absolute residuals; zero exactly at a root. Even in ``a``."""
    return _backend.objective_value(params.v, params.delta, z, a)


def solve(params: BurgersParams, cfg: SolveConfig = SolveConfig()) -> BurgersSolution:
    """Locate the transition layer for the given parameters.

    Runs ``cfg.nbins`` Nelder-Mead searches from the center points of a
    uniform grid over ``z in [0, 1]`` x ``a in [-2, 2]`` (the search itself
    leaves ``a`` unbounded) and returns the best root found. Deterministic.

    Raises
    ------
    ConvergenceFailure
        If the best fit exceeds ``cfg.accept_tol``.
    """
    nbins_z, nbins_a = balanced_bins(cfg.nbins, 2)
    z, a, fit, evals = _backend.solve_lattice(
        params.v, params.delta, nbins_z, nbins_a, cfg.ftol, cfg.xtol,
        cfg.max_evals,
    )
    if fit > cfg.accept_tol:
        raise ConvergenceFailure(
            f"best fit {fit:.3e} exceeds accept_tol {cfg.accept_tol:.1e} "
            f"at v={params.v}, delta={params.delta}",
            z=z,
            a=a,
            fit=fit,
        )
    return BurgersSolution(z_star=z, a=a, fit=fit, evals=evals)


def solve_z(v: float, delta: float, cfg: SolveConfig = SolveConfig()) -> float:
    """Shorthand for ``solve(...).z_star``."""
    return solve(BurgersParams(v=v, delta=delta), cfg).z_star


def u_profile(params: BurgersParams, sol: BurgersSolution, x: float) -> float:
    """Steady profile ``u(x)``; zero at ``x = z_star`` by construction."""
    a = sol.a
    return -a * math.tanh(0.5 * (a / params.v) * (x - sol.z_star))
