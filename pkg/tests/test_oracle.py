import numpy as np
import pytest

from assortopt.oracle import (
    DenseLp,
    InfeasibleError,
    UnboundedError,
    enumerate_optimal,
    inner_dual_value,
    inner_lp_value,
    simplex_solve,
)

from conftest import random_fractional_assortment, random_model


class TestSimplex:
    def test_single_bound(self):
        lp = DenseLp(
            objective=np.array([1.0]),
            lhs=np.array([[1.0]]),
            senses=("<=",),
            rhs=np.array([3.0]),
            lower=np.zeros(1),
            upper=np.array([np.inf]),
        )
        value, point = simplex_solve(lp)
        assert value == 3.0 and point[0] == 3.0

    def test_infeasible_and_unbounded_are_distinct(self):
        base = dict(lower=np.zeros(1), upper=np.array([np.inf]))
        with pytest.raises(InfeasibleError):
            simplex_solve(
                DenseLp(np.array([1.0]), np.array([[1.0], [1.0]]), (">=", "<="),
                        np.array([2.0, 1.0]), **base)
            )
        with pytest.raises(UnboundedError):
            simplex_solve(
                DenseLp(np.array([1.0]), np.array([[1.0]]), (">=",), np.array([1.0]), **base)
            )

    def test_free_variable_and_equality(self):
        # maximize -g subject to g >= -5, g free
        lp = DenseLp(
            objective=np.array([-1.0]),
            lhs=np.array([[1.0]]),
            senses=(">=",),
            rhs=np.array([-5.0]),
            lower=np.array([-np.inf]),
            upper=np.array([np.inf]),
        )
        value, point = simplex_solve(lp)
        assert value == 5.0 and point[0] == -5.0

    def test_degenerate_equalities(self):
        # redundant equality rows must not break the second phase
        lp = DenseLp(
            objective=np.array([1.0, 1.0]),
            lhs=np.array([[1.0, 1.0], [2.0, 2.0]]),
            senses=("==", "=="),
            rhs=np.array([1.0, 2.0]),
            lower=np.zeros(2),
            upper=np.full(2, np.inf),
        )
        value, _ = simplex_solve(lp)
        assert abs(value - 1.0) < 1e-9


class TestInnerLp:
    def test_strong_duality_on_random_assortments(self):
        rng = np.random.default_rng(51)
        for _ in range(60):
            n = int(rng.integers(2, 9))
            model = random_model(rng, n=n, k=1, l_max=n, integer_revenue=False)
            x = random_fractional_assortment(rng, n)
            primal = inner_lp_value(x, model.rankings[0], model.instance)
            dual = inner_dual_value(x, model.rankings[0], model.instance)
            assert abs(primal - dual) < 1e-7

    def test_zero_prefix_assortment(self, two_product_fixture):
        inst, rk = two_product_fixture
        assert inner_lp_value(np.array([0.0, 0.0, 1.0]), rk, inst) == 0.0


class TestEnumeration:
    def test_fixture_optimum_and_tie_break(self, fixture_model):
        x, value = enumerate_optimal(fixture_model)
        assert value == 100.0
        assert x.tolist() == [1.0, 0.0, 0.0, 1.0]  # {1} beats {2} lexicographically

    def test_budget_modes(self, fixture_model):
        _, value = enumerate_optimal(fixture_model, budget=1)
        assert value == 100.0
        _, value = enumerate_optimal(fixture_model, budget=2, equality=True)
        assert value == 100.0

    def test_cap_error_mentions_the_alternative(self, fixture_model):
        with pytest.raises(ValueError, match="Benders"):
            enumerate_optimal(fixture_model, cap=2)

    def test_invariant_under_ranking_order(self):
        rng = np.random.default_rng(52)
        for _ in range(10):
            model = random_model(rng, n=7, k=12, l_max=5)
            shuffled = type(model)(
                instance=model.instance,
                rankings=tuple(reversed(model.rankings)),
                dropped_mass=model.dropped_mass,
            )
            x1, v1 = enumerate_optimal(model)
            x2, v2 = enumerate_optimal(shuffled)
            assert abs(v1 - v2) < 1e-9
            assert x1.tolist() == x2.tolist()


@pytest.mark.skipif(
    "ASSORTOPT_SOLVER" not in __import__("os").environ,
    reason="no external solver configured",
)
def test_external_solver_cross_check(fixture_model):
    from assortopt.backend import ExternalLpBackend, BuiltinBackend
    from assortopt.formulations import build_base_mip, lp_relaxation

    program = lp_relaxation(build_base_mip(fixture_model))
    ours = BuiltinBackend()
    _, _, v_builtin = ours.solve(ours.load(program))
    ext = ExternalLpBackend()
    _, _, v_ext = ext.solve(ext.load(program))
    assert abs(v_builtin - v_ext) < 1e-6
