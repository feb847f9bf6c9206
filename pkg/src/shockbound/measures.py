"""Discrete weighted measures and their products.

A :class:`DiscreteMeasure` is one random variable represented by support
positions and non-negative weights; a :class:`ProductMeasure` is an ordered
collection of independent components whose joint support is the cartesian
product and whose joint weights are the products of component weights.
Expectations under such a measure are finite sums over the joint support,
which is what makes the bound optimization downstream finite-dimensional.

All values are immutable: transforms (`normalized`, `with_mean`, ...) return
new measures. The flatten/load pair maps measures to flat parameter vectors
(per component: weights block then positions block) for use by optimizers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateSpread, InfeasibleConstraint, LengthMismatch, ZeroMass
from .optimize import Bounds, nelder_mead

# operations needing probability semantics renormalize a working copy when
# the total mass drifts further than this from 1
MASS_TOL = 1e-8


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted support points of a single random variable."""

    weights: tuple
    positions: tuple

    def __init__(self, weights: Sequence[float], positions: Sequence[float]):
        w = tuple(float(x) for x in weights)
        p = tuple(float(x) for x in positions)
        if len(w) != len(p):
            raise ValueError("weights and positions must have equal length")
        if len(w) == 0:
            raise ValueError("a measure needs at least one support point")
        if any(x < 0.0 for x in w):
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "positions", p)

    def __len__(self):
        return len(self.weights)

    @property
    def mass(self) -> float:
        return sum(self.weights)

    def normalized(self) -> "DiscreteMeasure":
        """Scale weights to unit mass; positions unchanged."""
        total = self.mass
        if total <= 0.0:
            raise ZeroMass("cannot normalize a measure with zero total weight")
        return DiscreteMeasure([w / total for w in self.weights], self.positions)

    def _prob(self) -> "DiscreteMeasure":
        if abs(self.mass - 1.0) > MASS_TOL:
            return self.normalized()
        return self

    def mean(self) -> float:
        m = self._prob()
        return float(sum(w * x for w, x in zip(m.weights, m.positions)))

    def variance(self) -> float:
        m = self._prob()
        mu = m.mean()
        return float(sum(w * (x - mu) ** 2 for w, x in zip(m.weights, m.positions)))

    def std(self) -> float:
        return math.sqrt(self.variance())

    def with_mean(self, target: float) -> "DiscreteMeasure":
        """Shift all positions uniformly so the mean lands on ``target``."""
        shift = target - self.mean()
        return DiscreteMeasure(self.weights, [x + shift for x in self.positions])

    def with_variance(self, target: float) -> "DiscreteMeasure":
        """Rescale positions about the mean to hit a variance of ``target``.

        The mean is preserved. Raises :class:`DegenerateSpread` when asked to
        spread out a (numerically) zero-variance measure: rescaling pure
        rounding noise would amplify it into arbitrary positions.
        """
        if target < 0.0:
            raise ValueError("variance target must be non-negative")
        current = self.variance()
        mu = self.mean()
        scale_x = max(1.0, abs(mu), max(abs(x) for x in self.positions))
        if math.sqrt(current) <= 1e-12 * scale_x:
            if target == 0.0:
                return self
            raise DegenerateSpread("cannot rescale a zero-variance measure")
        scale = math.sqrt(target / current)
        return DiscreteMeasure(
            self.weights, [mu + scale * (x - mu) for x in self.positions]
        )

    def with_std(self, target: float) -> "DiscreteMeasure":
        return self.with_variance(target * target)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "positions": list(self.positions)}

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscreteMeasure":
        return cls(doc["weights"], doc["positions"])


@dataclass(frozen=True)
class ParamLayout:
    """Flat-vector layout: per component, all weights then all positions."""

    npts: tuple

    def __init__(self, npts: Sequence[int]):
        pts = tuple(int(n) for n in npts)
        if not pts or any(n < 1 for n in pts):
            raise ValueError("npts must be positive integers")
        object.__setattr__(self, "npts", pts)

    @property
    def size(self) -> int:
        return 2 * sum(self.npts)


@dataclass(frozen=True)
class ProductMeasure:
    """Ordered product of independent discrete components."""

    components: tuple

    def __init__(self, components: Sequence[DiscreteMeasure]):
        comps = tuple(components)
        if not comps:
            raise ValueError("a product measure needs at least one component")
        object.__setattr__(self, "components", comps)

    def __len__(self):
        return len(self.components)

    def __getitem__(self, k) -> DiscreteMeasure:
        return self.components[k]

    @property
    def layout(self) -> ParamLayout:
        return ParamLayout([len(c) for c in self.components])

    def support_size(self) -> int:
        n = 1
        for c in self.components:
            n *= len(c)
        return n

    def normalized(self) -> "ProductMeasure":
        return ProductMeasure([c.normalized() for c in self.components])

    def _prob(self) -> "ProductMeasure":
        return ProductMeasure([c._prob() for c in self.components])

    def support(self):
        """Joint (weight, point) pairs, last component varying fastest."""
        m = self._prob()
        idx_ranges = [range(len(c)) for c in m.components]
        for multi in itertools.product(*idx_ranges):
            w = 1.0
            for k, i in enumerate(multi):
                w *= m.components[k].weights[i]
            point = tuple(m.components[k].positions[i] for k, i in enumerate(multi))
            yield w, point

    def expect(self, f: Callable[[tuple], float]) -> float:
        """Expected value of ``f`` over the joint support (finite sum)."""
        return float(sum(w * float(f(point)) for w, point in self.support()))

    def pof(self, failure: Callable[[tuple], bool]) -> float:
        """Total joint weight on points where the predicate holds."""
        return float(sum(w for w, point in self.support() if failure(point)))

    def flatten(self, layout: Optional[ParamLayout] = None) -> np.ndarray:
        layout = layout or self.layout
        if layout.npts != self.layout.npts:
            raise LengthMismatch("layout does not match measure shape")
        parts = []
        for c in self.components:
            parts.extend(c.weights)
            parts.extend(c.positions)
        return np.asarray(parts, dtype=float)

    @classmethod
    def load(cls, vector: Sequence[float], layout: ParamLayout) -> "ProductMeasure":
        vec = np.asarray(vector, dtype=float)
        if vec.ndim != 1 or vec.size != layout.size:
            raise LengthMismatch(
                f"vector length {vec.size} does not match layout length {layout.size}"
            )
        comps = []
        at = 0
        for n in layout.npts:
            w = vec[at : at + n]
            x = vec[at + n : at + 2 * n]
            comps.append(DiscreteMeasure(w, x))
            at += 2 * n
        return cls(comps)

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, doc: dict) -> "ProductMeasure":
        return cls([DiscreteMeasure.from_dict(c) for c in doc["components"]])


def set_expect(
    pm: ProductMeasure,
    model: Callable[[tuple], float],
    target: float,
    error: float,
    position_bounds: Sequence[tuple],
    inner_constraint: Optional[Callable[[ProductMeasure], ProductMeasure]] = None,
    max_evals: int = 5000,
) -> ProductMeasure:
    """Drive ``E[model]`` into ``target +- error`` by adjusting the measure.

    If the expectation is already inside the band the measure is returned
    unchanged. Otherwise a Nelder-Mead search over the flattened parameter
    vector is started from the incoming measure; every iterate is clipped to
    ``position_bounds``, renormalized, and passed through ``inner_constraint``
    (when given) before the expectation is evaluated, and the search stops as
    soon as the band is reached.

    Raises
    ------
    InfeasibleConstraint
        If the band is not reached within ``max_evals`` evaluations.
    """
    pm = pm._prob()
    current = pm.expect(model)
    if abs(current - target) <= error:
        return pm

    layout = pm.layout
    if len(position_bounds) != len(layout.npts):
        raise ValueError("position_bounds must give one (lo, hi) per component")
    lower, upper = [], []
    for k, n in enumerate(layout.npts):
        lo, hi = position_bounds[k]
        lower.extend([0.0] * n + [float(lo)] * n)
        upper.extend([1.0] * n + [float(hi)] * n)
    box = Bounds(lower=lower, upper=upper)

    def transform(vec) -> ProductMeasure:
        m = ProductMeasure.load(vec, layout)
        comps = []
        for c in m.components:
            if c.mass <= 0.0:
                c = DiscreteMeasure([1.0 / len(c)] * len(c), c.positions)
            comps.append(c.normalized())
        m = ProductMeasure(comps)
        if inner_constraint is not None:
            m = inner_constraint(m)
        return m

    def objective(vec) -> float:
        return abs(transform(vec).expect(model) - target)

    res = nelder_mead(
        objective, pm.flatten(), box, ftol=0.0, max_evals=max_evals,
        stop_below=error,
    )
    result = transform(res.x)
    if abs(result.expect(model) - target) <= error:
        return result
    raise InfeasibleConstraint(
        f"could not reach expectation {target} +- {error} within {max_evals} "
        f"evaluations (best deviation {res.fun:.3e})"
    )
