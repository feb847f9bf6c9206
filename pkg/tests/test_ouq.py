import dataclasses

import numpy as np
import pytest

from shockbound.burgers import SolveConfig
from shockbound.errors import InfeasibleConstraint
from shockbound.measures import DiscreteMeasure, ProductMeasure
from shockbound.optimize import DeConfig
from shockbound.ouq import (
    ConstraintSet,
    OuqProblem,
    TransitionModel,
    bound_sweep,
    constraints_transform,
    failure_indicator,
    meanconf,
    objective,
    solve_bound,
)


@pytest.fixture(scope="module")
def targets(v01_eps01_targets):
    return v01_eps01_targets


def make_problem(targets, variant="mean_delta", direction="upper", dx=0, **kw):
    cs = ConstraintSet.from_moments(
        variant,
        z_mean=targets["z_mean"],
        z_std=targets["z_std"],
        d_mean=targets["d_mean"],
        d_std=targets["d_std"],
        n=targets["n"],
    )
    solver = kw.pop("solver", DeConfig(seed=11, npop=40))
    return OuqProblem(
        v=0.1, eps=0.1, z_mean_ref=targets["z_mean"], constraint_set=cs,
        direction=direction, dx_percent=dx, solver=solver, **kw,
    )


class TestMeanconf:
    def test_zero_std(self):
        assert meanconf(0.0, 12345) == 0.0

    def test_simple_value(self):
        assert meanconf(1.0, 4) == pytest.approx(0.98, abs=1e-15)

    def test_reference_band(self):
        # 1.96 * 0.105011650866 / sqrt(100000), frozen from the formula
        assert meanconf(0.105011650866, 100000) == pytest.approx(
            6.508689552782684e-4, abs=1e-12
        )

    def test_validation(self):
        with pytest.raises(ValueError):
            meanconf(-1.0, 10)
        with pytest.raises(ValueError):
            meanconf(1.0, 0)


class TestConstraintSet:
    def test_missing_band_rejected(self):
        with pytest.raises(ValueError):
            ConstraintSet(variant="mean_delta", d_mean=0.05)
        with pytest.raises(ValueError):
            ConstraintSet(variant="mean_z", z_mean=0.6)
        with pytest.raises(ValueError):
            ConstraintSet(variant="bogus")

    def test_from_moments_bands(self, targets):
        cs = ConstraintSet.from_moments("mean_delta_mean_z", **{
            k: targets[k] for k in ("z_mean", "z_std", "d_mean", "d_std", "n")
        })
        assert cs.d_range == pytest.approx(meanconf(targets["d_std"], targets["n"]))
        assert cs.z_range == pytest.approx(meanconf(targets["z_std"], targets["n"]))


class TestFailureIndicator:
    def test_well_above_threshold(self, targets):
        problem = make_problem(targets)
        model = TransitionModel(0.1, SolveConfig())
        failure = failure_indicator(problem, model)
        assert failure((0.1,)) is False  # z*(0.1) = 0.723 > 0.614

    def test_unperturbed_fails(self, targets):
        problem = make_problem(targets)
        model = TransitionModel(0.1, SolveConfig())
        failure = failure_indicator(problem, model)
        assert failure((0.0,)) is True

    def test_exact_threshold_is_failure(self, targets):
        model = TransitionModel(0.1, SolveConfig())
        z_at = model(0.05)
        problem = dataclasses.replace(make_problem(targets), z_mean_ref=z_at)
        failure = failure_indicator(problem, model)
        assert failure((0.05,)) is True  # strict inequality in success

    def test_memoized(self, targets):
        model = TransitionModel(0.1, SolveConfig())
        model(0.03)
        hits_before = model._solve.cache_info().hits
        model(0.03)
        assert model._solve.cache_info().hits == hits_before + 1


class TestConstraintsTransform:
    def test_feasible_vector_is_fixed_point(self, targets):
        problem = make_problem(targets, variant="mean_delta")
        model = TransitionModel(0.1, SolveConfig())
        m = DiscreteMeasure([1 / 3, 1 / 3, 1 / 3], [0.03, 0.05, 0.07])
        rv = ProductMeasure([m]).flatten()
        out = constraints_transform(problem, rv, model)
        assert np.max(np.abs(out - rv)) <= 1e-10
        again = constraints_transform(problem, out, model)
        assert np.max(np.abs(again - out)) <= 1e-10

    def test_mean_delta_imposed(self, targets):
        problem = make_problem(targets, variant="mean_delta")
        model = TransitionModel(0.1, SolveConfig())
        m = DiscreteMeasure([0.2, 0.5, 0.3], [0.001, 0.002, 0.003])
        out = constraints_transform(problem, ProductMeasure([m]).flatten(), model)
        result = ProductMeasure.load(out, problem.layout)
        assert abs(result[0].mean() - targets["d_mean"]) <= 1e-10

    def test_mean_delta_mean_z_both_bands(self, targets):
        problem = make_problem(targets, variant="mean_delta_mean_z")
        cs = problem.constraint_set
        model = TransitionModel(0.1, SolveConfig())
        m = DiscreteMeasure([0.4, 0.3, 0.3], [0.01, 0.04, 0.09])
        out = constraints_transform(problem, ProductMeasure([m]).flatten(), model)
        result = ProductMeasure.load(out, problem.layout)
        assert abs(result.expect(model.at_point) - cs.z_mean) <= cs.z_range
        assert abs(result[0].mean() - cs.d_mean) <= cs.d_range

    def test_variance_imposed(self, targets):
        problem = make_problem(targets, variant="mean_delta_var_delta")
        cs = problem.constraint_set
        model = TransitionModel(0.1, SolveConfig())
        m = DiscreteMeasure([0.3, 0.4, 0.3], [0.02, 0.05, 0.08])
        out = constraints_transform(problem, ProductMeasure([m]).flatten(), model)
        result = ProductMeasure.load(out, problem.layout)
        assert abs(result[0].mean() - cs.d_mean) <= cs.d_range
        assert abs(result[0].std() - cs.d_std) <= 1e-8


class TestObjective:
    def test_infeasible_vector_sentinel(self, targets):
        problem = make_problem(targets, variant="mean_delta")
        model = TransitionModel(0.1, SolveConfig())
        bad = ProductMeasure([DiscreteMeasure([1.0], [0.0])])
        layout = dataclasses.replace(problem, nx=1)
        assert objective(layout, bad.flatten(), model) == float("inf")

    def test_all_failing_measure(self, targets):
        # every point far below the success threshold, but the delta mean
        # constraint still satisfied
        model = TransitionModel(0.1, SolveConfig())
        problem = dataclasses.replace(make_problem(targets), z_mean_ref=0.99)
        m = DiscreteMeasure([1 / 3, 1 / 3, 1 / 3], [0.03, 0.05, 0.07])
        m = m.with_mean(targets["d_mean"])
        rv = ProductMeasure([m]).flatten()
        assert objective(problem, rv, model) == problem.minmax * 1.0
        lower = dataclasses.replace(problem, direction="lower")
        assert objective(lower, rv, model) == lower.minmax * 1.0

    def test_matches_enumeration_oracle(self, targets):
        problem = make_problem(targets, variant="mean_delta")
        model = TransitionModel(0.1, SolveConfig())
        m = DiscreteMeasure([0.2, 0.5, 0.3], [0.01, 0.05, 0.09]).with_mean(
            targets["d_mean"]
        )
        rv = ProductMeasure([m]).flatten()
        threshold = problem.threshold
        expected = sum(
            w for w, x in zip(m.weights, m.positions)
            if not (model(x) > threshold)
        )
        got = objective(problem, rv, model)
        assert got == pytest.approx(problem.minmax * expected, abs=1e-12)


@pytest.fixture(scope="module")
def fast_pair(targets):
    out = {}
    for direction in ("lower", "upper"):
        problem = make_problem(targets, variant="mean_delta", direction=direction)
        out[direction] = solve_bound(problem)
    return out


class TestSolveBound:
    def test_upper_at_least_lower(self, fast_pair):
        assert fast_pair["upper"].value >= fast_pair["lower"].value

    def test_values_in_unit_interval(self, fast_pair):
        for r in fast_pair.values():
            assert 0.0 <= r.value <= 1.0

    def test_feasibility_reverified(self, fast_pair):
        for r in fast_pair.values():
            assert r.feasible
            for residual, band in r.residuals.values():
                assert residual <= band

    def test_measure_within_box(self, fast_pair):
        for r in fast_pair.values():
            assert abs(sum(r.measure[0].weights) - 1.0) <= 1e-10
            assert all(0.0 <= x <= 0.1 for x in r.measure[0].positions)

    def test_saturated_lower_bound_stays_in_unit_interval(self, targets):
        # at dx=15 the failure probability saturates at 1 up to an ulp of
        # weight-normalization noise; the reported value must clamp to [0, 1]
        problem = make_problem(targets, variant="mean_delta",
                               direction="lower", dx=15)
        r = solve_bound(problem)
        assert 0.0 <= r.value <= 1.0
        assert r.value <= 1e-6

    def test_lower_mean_z_attains_zero(self, targets):
        problem = make_problem(targets, variant="mean_z", direction="lower")
        r = solve_bound(problem)
        assert r.value <= 1e-6
        assert "ValueTargetReached" in r.termination_reason

    def test_deterministic(self, targets, fast_pair):
        again = solve_bound(make_problem(targets, variant="mean_delta",
                                         direction="lower"))
        assert again.value == fast_pair["lower"].value
        assert again.evals == fast_pair["lower"].evals
        assert again.measure == fast_pair["lower"].measure

    def test_checkpoint_persisted(self, targets, tmp_path):
        problem = make_problem(targets, variant="mean_delta", direction="upper",
                               solver=DeConfig(seed=3, npop=8, maxiter=40))
        path = tmp_path / "solver.json"
        solve_bound(problem, checkpoint_path=path)
        assert path.exists()
        from shockbound.optimize import DeState

        state = DeState.load(path)
        assert state.seed == 3
        assert state.population.shape[1] == 6

    def test_infeasible_when_band_unreachable(self, targets):
        # a z-mean far above any attainable transition location
        cs = ConstraintSet(variant="mean_z", z_mean=0.99, z_range=1e-4)
        problem = OuqProblem(
            v=0.1, eps=0.1, z_mean_ref=targets["z_mean"], constraint_set=cs,
            direction="upper", solver=DeConfig(seed=1, npop=6, maxiter=5),
        )
        with pytest.raises(InfeasibleConstraint):
            solve_bound(problem)


class TestBoundSweep:
    def test_rows_bracket(self, targets):
        problem = make_problem(targets, variant="mean_delta",
                               solver=DeConfig(seed=2, npop=20, maxiter=200))
        rows = bound_sweep(problem, [0, 15])
        assert [r.dx_percent for r in rows] == [0, 15]
        for row in rows:
            assert row.error is None
            assert 0.0 <= row.lower <= row.upper <= 1.0
            assert row.evals_lower > 0 and row.evals_upper > 0
