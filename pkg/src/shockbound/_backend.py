"""Kernel backend selection.

The compiled extension is preferred; the pure-Python fallback is used when it
is missing or when the SHOCKBOUND_PURE_PYTHON environment variable is set to
a non-empty value. Both expose the same `solve_lattice` / `objective_value`
surface and produce bit-identical results.
"""

import os

if os.environ.get("SHOCKBOUND_PURE_PYTHON"):
    from . import _kernel_py as kernel
else:
    try:
        from . import _kernel as kernel  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernel_py as kernel

BACKEND = kernel.BACKEND
solve_lattice = kernel.solve_lattice
objective_value = kernel.objective_value
