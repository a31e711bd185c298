import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space

from oracles import one_constraint_projection
from topdown_clo.entropy import (
    MISD,
    ConstraintSpec,
    SolverSettings,
    entropy,
    kl_divergence,
    solve_maxent,
    solve_min_cross_entropy,
)
from topdown_clo.exceptions import (
    InfeasibleTarget,
    NonConvergence,
    PriorSupportConflict,
    ValidationError,
)

TIGHT = SolverSettings(residual_tol=1e-13)

# three-point maxent with mean 1.5 on {0, 1, 2}: x = e^lambda solves x^2 - x - 3 = 0
THREE_POINT = [0.1162040603780009, 0.26759187924399824, 0.6162040603780009]


def index_constraints(pv, quotes):
    return [ConstraintSpec(pv.column(n), p, n) for n, p in quotes.prices.items()]


def feasible_directions(C, n_dirs, seed):
    """Unit vectors keeping every constraint and the total mass unchanged."""
    basis = null_space(np.vstack([C, np.ones(C.shape[1])]))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n_dirs, basis.shape[1])) @ basis.T
    return v / np.linalg.norm(v, axis=1, keepdims=True)


class TestTrivial:
    def test_no_constraints_is_uniform(self):
        misd, diag = solve_maxent([], 7)
        np.testing.assert_allclose(misd.weights, np.full(7, 1 / 7), atol=1e-15)
        assert diag.iterations == 0 or diag.max_abs_residual == 0.0

    def test_mean_of_uniform_is_uniform(self):
        misd, _ = solve_maxent([ConstraintSpec([0.0, 1.0, 2.0], 1.0)], 3, TIGHT)
        np.testing.assert_allclose(misd.weights, np.full(3, 1 / 3), atol=1e-12)

    def test_three_point_mean(self):
        misd, _ = solve_maxent([ConstraintSpec([0.0, 1.0, 2.0], 1.5)], 3, TIGHT)
        np.testing.assert_allclose(misd.weights, THREE_POINT, atol=1e-12)
        x = misd.weights[1] / misd.weights[0]
        assert x * x - x - 3 == pytest.approx(0.0, abs=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.floats(0, 150), min_size=3, max_size=12),
        st.floats(0.05, 0.95),
        st.integers(0, 2**31 - 1),
    )
    def test_single_constraint_matches_bisection(self, coeffs, frac, seed):
        c = np.array(coeffs)
        if np.ptp(c) < 1.0:
            return
        target = c.min() + frac * np.ptp(c)
        prior = np.random.default_rng(seed).dirichlet(np.ones(c.size))
        prior = np.maximum(prior, 1e-6)
        prior /= prior.sum()
        got, _ = solve_min_cross_entropy(MISD(prior), [ConstraintSpec(c, target)], TIGHT)
        want = one_constraint_projection(prior, c, target)
        np.testing.assert_allclose(got.weights, want, atol=1e-9)


class TestOptimality:
    def test_maxent_perturbation(self, index_pv, index_quotes):
        cons = index_constraints(index_pv, index_quotes)
        misd, _ = solve_maxent(cons, 32, TIGHT)
        p = misd.weights
        C = np.array([c.coefficients for c in cons])
        eps = 1e-4 * p.min() / 1e-2 if p.min() < 1e-2 else 1e-4
        h0 = entropy(p)
        for v in feasible_directions(C, 200, seed=1):
            for s in (eps, -eps):
                q = p + s * v
                assert q.min() >= 0
                assert entropy(q) <= h0 + 1e-9

    def test_cross_entropy_perturbation(self, index, bespoke):
        cons = [ConstraintSpec(bespoke.pv.collateral, 82.0), ConstraintSpec(bespoke.pv.column("A"), 89.35)]
        misd, _ = solve_min_cross_entropy(index.misd, cons, TIGHT)
        q0 = index.misd.weights
        p = misd.weights
        C = np.array([c.coefficients for c in cons])
        d0 = kl_divergence(p, q0)
        eps = 1e-4 * min(1.0, p.min() / 1e-2)
        for v in feasible_directions(C, 200, seed=2):
            for s in (eps, -eps):
                q = p + s * v
                assert q.min() >= 0
                assert kl_divergence(q, q0) >= d0 - 1e-9

    def test_uniform_prior_equals_maxent(self, index_pv, index_quotes):
        cons = index_constraints(index_pv, index_quotes)
        a, _ = solve_maxent(cons, 32, TIGHT)
        b, _ = solve_min_cross_entropy(MISD.uniform(32), cons, TIGHT)
        np.testing.assert_allclose(a.weights, b.weights, atol=1e-10, rtol=0)

    def test_self_mapping_fixed_point(self, index, index_pv, index_quotes):
        cons = index_constraints(index_pv, index_quotes)
        misd, diag = solve_min_cross_entropy(index.misd, cons, TIGHT)
        assert misd.divergence(index.misd) < 1e-10
        assert diag.objective < 1e-10

    def test_hessian_positive_semidefinite(self, index):
        assert min(index.diagnostics.hessian_min_eigenvalues) >= -1e-12

    def test_deterministic(self, index_pv, index_quotes):
        cons = index_constraints(index_pv, index_quotes)
        a, da = solve_maxent(cons, 32)
        b, db = solve_maxent(cons, 32)
        assert np.array_equal(a.weights, b.weights)
        assert da.multipliers == db.multipliers


class TestScaleInvariance:
    @pytest.mark.parametrize("factor", [10.0, 1e-6])
    @pytest.mark.parametrize("which", range(6))
    def test_rescaled_constraint(self, index_pv, index_quotes, factor, which):
        cons = index_constraints(index_pv, index_quotes)
        base, _ = solve_maxent(cons, 32, TIGHT)
        cons[which] = cons[which].scaled(factor)
        moved, _ = solve_maxent(cons, 32, TIGHT)
        np.testing.assert_allclose(
            moved.expectation(index_pv.values), base.expectation(index_pv.values), atol=1e-6, rtol=0
        )


class TestFailures:
    def test_target_outside_range(self):
        with pytest.raises(InfeasibleTarget) as info:
            solve_maxent([ConstraintSpec([0.0, 1.0, 2.0], 3.0, "m")], 3)
        assert info.value.residuals[0] == pytest.approx(-1.0)

    def test_jointly_infeasible(self):
        # each target alone is attainable, together they are not
        cons = [ConstraintSpec([0.0, 1.0, 1.0], 0.0), ConstraintSpec([1.0, 1.0, 0.0], 0.0)]
        with pytest.raises(InfeasibleTarget):
            solve_maxent(cons, 3)

    def test_prior_support_conflict(self):
        prior = MISD([0.5, 0.5, 0.0])
        with pytest.raises(PriorSupportConflict):
            solve_min_cross_entropy(prior, [ConstraintSpec([0.0, 1.0, 2.0], 1.5)])

    def test_conflict_is_an_infeasible_target(self):
        assert issubclass(PriorSupportConflict, InfeasibleTarget)

    def test_support_is_preserved(self):
        prior = MISD([0.5, 0.0, 0.5])
        misd, _ = solve_min_cross_entropy(prior, [ConstraintSpec([0.0, 1.0, 2.0], 1.2)], TIGHT)
        assert misd.weights[1] == 0.0
        assert misd.expectation([0.0, 1.0, 2.0]) == pytest.approx(1.2, abs=1e-12)

    def test_iteration_budget(self, index_pv, index_quotes):
        cons = index_constraints(index_pv, index_quotes)
        with pytest.raises(NonConvergence) as info:
            solve_maxent(cons, 32, SolverSettings(max_iterations=1, residual_tol=1e-14))
        assert info.value.residuals is not None

    def test_duplicated_constraint(self, index_pv, index_quotes):
        cons = index_constraints(index_pv, index_quotes)
        misd, diag = solve_maxent(cons + [cons[2]], 32, TIGHT)
        ref, _ = solve_maxent(cons, 32, TIGHT)
        assert diag.rank_deficient
        np.testing.assert_allclose(misd.weights, ref.weights, atol=1e-10)

    def test_wrong_length(self):
        with pytest.raises(ValidationError):
            solve_maxent([ConstraintSpec([1.0, 2.0], 1.5)], 3)

    def test_bad_weights(self):
        with pytest.raises(ValidationError):
            MISD([0.5, 0.6])
        with pytest.raises(ValidationError):
            MISD([1.5, -0.5])


class TestSoft:
    def test_soft_constraint_trades_off(self):
        # the soft target pulls only partway from its unconstrained value
        c = ConstraintSpec([0.0, 1.0, 2.0], 1.5, weight=1.0)
        misd, diag = solve_maxent([c], 3, TIGHT)
        m = misd.expectation([0.0, 1.0, 2.0])
        assert 1.0 < m < 1.5
        assert diag.soft == (True,)
        assert diag.feasible

    def test_large_weight_approaches_hard(self):
        hard, _ = solve_maxent([ConstraintSpec([0.0, 1.0, 2.0], 1.5)], 3, TIGHT)
        soft, _ = solve_maxent([ConstraintSpec([0.0, 1.0, 2.0], 1.5, weight=1e12)], 3, TIGHT)
        np.testing.assert_allclose(soft.weights, hard.weights, atol=1e-6)
