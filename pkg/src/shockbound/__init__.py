"""Bounds on the probability of success for the perturbed-boundary Burgers
transition layer: exact steady-state solves, Monte Carlo estimation, and
optimal bounds over constrained discrete product measures."""

from ._backend import BACKEND
from .burgers import BurgersParams, BurgersSolution, SolveConfig
from .measures import DiscreteMeasure, ParamLayout, ProductMeasure
from .optimize import Bounds, DeConfig
from .ouq import BoundResult, ConstraintSet, OuqProblem
from .sampling import DeltaDistribution, SampleSet

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BurgersParams",
    "BurgersSolution",
    "SolveConfig",
    "DiscreteMeasure",
    "ParamLayout",
    "ProductMeasure",
    "Bounds",
    "DeConfig",
    "BoundResult",
    "ConstraintSet",
    "OuqProblem",
    "DeltaDistribution",
    "SampleSet",
    "__version__",
]
