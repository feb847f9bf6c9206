"""Pure-Python solve kernel: the lattice ensemble over the steady-state
residual objective, composed from the generic optimizer.

This is the fallback selected when the compiled extension is unavailable
(or when SHOCKBOUND_PURE_PYTHON is set). It must stay operation-for-operation
identical to the compiled kernel; the backend equivalence tests assert
bit-equal results.
"""

from math import tanh

from .optimize import Bounds, nelder_mead, grid_centers

BACKEND = "python"

_BOUNDS = Bounds(lower=(0.0, None), upper=(1.0, None))


def objective_value(v, delta, z, a):
    t = 0.5 * (a / v)
    return abs(a * tanh(t * (1.0 - z)) - 1.0) + abs(
        a * tanh(t * (1.0 + z)) - 1.0 - delta
    )


def solve_lattice(v, delta, nbins_z, nbins_a, ftol, xtol, max_evals):
    """Best (z, a, fit, evals) over the grid-center Nelder-Mead ensemble."""

    def obj(x):
        return objective_value(v, delta, x[0], x[1])

    best = None
    total = 0
    for start in grid_centers(_BOUNDS, (nbins_z, nbins_a)):
        res = nelder_mead(obj, start, _BOUNDS, ftol=ftol, max_evals=max_evals,
                          xtol=xtol)
        total += res.evals
        if best is None or res.fun < best.fun:
            best = res
    return best.x[0], best.x[1], best.fun, total
