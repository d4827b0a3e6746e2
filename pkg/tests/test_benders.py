"""Two-phase Benders driver: fixture values, convergence, cut hygiene."""

import itertools

import numpy as np
import pytest

from assortopt.backend import BuiltinBackend
from assortopt.benders import (
    OuterState,
    initial_cut,
    run_phase1,
    run_phase2,
    solve_two_phase,
)
from assortopt.cuts import cut_coefficients, DualDelta
from assortopt.model import Instance, Ranking, RankingModel, revenue_of
from assortopt.oracle import enumerate_optimal

from conftest import random_model


class TestInitialCut:
    def test_constant_bound_examples(self, two_product_fixture):
        inst, rk = two_product_fixture
        cut = initial_cut(rk, inst)
        assert cut.intercept == 10.0 and cut.coeffs == {}
        single = Ranking((1,), 1.0)
        small = Instance(1, np.array([3.0, 0.0]))
        assert initial_cut(single, small).intercept == 3.0

    def test_matches_the_constant_dual_vector(self, two_product_fixture):
        inst, rk = two_product_fixture
        rbar = rk.top_revenue(inst)
        const = cut_coefficients(DualDelta(np.full(rk.length + 1, rbar), rk, inst))
        init = initial_cut(rk, inst)
        assert const.intercept == init.intercept
        assert all(c == 0.0 for c in const.coeffs.values())
        for bits in itertools.product((0.0, 1.0), repeat=2):
            x = np.array(list(bits) + [1.0])
            assert const.evaluate(x) == init.evaluate(x)


class TestPhase1:
    def test_fixture_bound(self, fixture_model):
        _, bound, state = run_phase1(fixture_model)
        assert bound <= 112.5 + 1e-6
        assert state.phase1_cuts > 0

    def test_single_ranking_two_rounds(self):
        inst = Instance(1, np.array([10.0, 0.0]))
        model = RankingModel(inst, (Ranking((1,), 1.0),))
        _, bound, state = run_phase1(model)
        assert state.phase1_iterations <= 2
        assert bound == pytest.approx(10.0)

    def test_pinned_assortment_needs_one_round_of_cuts(self):
        # equality budget == N pins x to all-ones: cuts can only be added once
        rng = np.random.default_rng(81)
        model = random_model(rng, n=5, k=6, l_max=4, budget=5)
        _, bound, state = run_phase1(model, budget_equality=True)
        assert state.phase1_iterations <= 2
        x = np.ones(6)
        want = sum(rk.probability * revenue_of(x, rk, model.instance) for rk in model.rankings)
        assert bound == pytest.approx(want, abs=1e-6)

    def test_every_cut_was_violated_when_added(self, fixture_model):
        # wrap the backend to capture each round's incumbent and the rows
        # appended right after it
        backend = BuiltinBackend()
        trace = []
        original_solve = backend.solve
        original_add = backend.add_rows
        handles = []

        def recording_solve(handle, lazy_cut_source=None):
            handles.append(handle)
            result = original_solve(handle, lazy_cut_source)
            trace.append({"values": result[1].copy(), "added": []})
            return result

        def recording_add(handle, rows):
            trace[-1]["added"].extend(rows)
            return original_add(handle, rows)

        backend.solve = recording_solve
        backend.add_rows = recording_add
        epsilon = 1e-6
        run_phase1(fixture_model, backend=backend, epsilon=epsilon)
        assert any(round_["added"] for round_ in trace)
        for round_ in trace:
            values = round_["values"]
            for row in round_["added"]:
                lhs = sum(c * values[j] for j, c in row.coeffs.items())
                assert lhs > row.rhs + epsilon  # genuinely violated at addition


class TestPhase2:
    def test_fixture_objective_and_support(self, fixture_model):
        report = solve_two_phase(fixture_model)
        assert report.objective == pytest.approx(100.0)
        assert report.x[0] == 1.0 or report.x[1] == 1.0
        assert report.phase2_cuts == 0  # phase-1 cuts already certify the optimum

    def test_budget_one(self, fixture_model):
        report = solve_two_phase(fixture_model.with_budget(1))
        assert report.objective == pytest.approx(100.0)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(82)
        model = random_model(rng, n=10, k=30, l_max=6)
        report = solve_two_phase(model)
        _, expected = enumerate_optimal(model)
        assert report.objective == pytest.approx(expected, abs=1e-6)

    def test_equality_budget_without_budget_errors_before_solving(self, fixture_model):
        with pytest.raises(ValueError):
            solve_two_phase(fixture_model, budget_equality=True)


class TestReport:
    def test_bound_dominates_objective(self):
        rng = np.random.default_rng(83)
        for _ in range(5):
            model = random_model(rng, n=7, k=12, l_max=5)
            report = solve_two_phase(model)
            assert report.phase1_bound >= report.objective - 1e-6
            report.validate()

    def test_deterministic_apart_from_timings(self, fixture_model):
        a = solve_two_phase(fixture_model)
        b = solve_two_phase(fixture_model)
        assert a.x.tolist() == b.x.tolist()
        assert a.objective == b.objective
        assert a.phase1_bound == b.phase1_bound
        assert (a.phase1_cuts, a.phase2_cuts) == (b.phase1_cuts, b.phase2_cuts)
        assert (a.phase1_iterations, a.phase2_iterations) == (
            b.phase1_iterations,
            b.phase2_iterations,
        )


class TestLazyPath:
    def test_driver_uses_a_native_lazy_backend(self, fixture_model):
        # a backend advertising lazy support gets the cut source passed
        # straight into solve(); results must match the iterated path
        class LazyBackend(BuiltinBackend):
            def __init__(self):
                super().__init__()
                from assortopt.backend import BackendCapabilities

                self.capabilities = BackendCapabilities(True, True, True, "lazy")
                self.sources_seen = []

            def solve(self, handle, lazy_cut_source=None):
                self.sources_seen.append(lazy_cut_source)
                return super().solve(handle, lazy_cut_source)

        backend = LazyBackend()
        report = solve_two_phase(fixture_model, backend=backend)
        assert report.objective == pytest.approx(100.0)
        assert any(src is not None for src in backend.sources_seen)
        assert report.phase2_iterations == 1  # one call, cuts via the callback


class TestParetoBenefit:
    def test_transformed_cut_counts_reported(self, capsys):
        # soft benchmark: cut counts with and without the strengthening
        # transform are printed, never asserted against each other
        rng = np.random.default_rng(86)
        totals = {True: 0, False: 0}
        for seed in range(4):
            model = random_model(rng, n=8, k=20, l_max=5)
            for pareto in (True, False):
                report = solve_two_phase(model, pareto=pareto)
                totals[pareto] += report.phase1_cuts + report.phase2_cuts
        print(
            f"\npareto-benefit benchmark: {totals[True]} cuts with the transform, "
            f"{totals[False]} without (reported, not asserted)"
        )
        assert totals[True] > 0 and totals[False] > 0


class TestCutHygiene:
    def test_pooled_cuts_are_valid_upper_bounds_everywhere(self):
        rng = np.random.default_rng(84)
        for _ in range(5):
            n = int(rng.integers(3, 8))
            model = random_model(rng, n=n, k=8, l_max=n)
            state = OuterState(model=model, epsilon=1e-6)
            run_phase1(model, state=state)
            run_phase2(model, state)
            for bits in itertools.product((0.0, 1.0), repeat=n):
                x = np.array(list(bits) + [1.0])
                for k, rk in enumerate(model.rankings):
                    actual = revenue_of(x, rk, model.instance)
                    for cut in state.pools[k]:
                        assert cut.evaluate(x) >= actual - 1e-9

    def test_final_solution_violates_no_cut(self):
        rng = np.random.default_rng(85)
        model = random_model(rng, n=8, k=15, l_max=5)
        state = OuterState(model=model, epsilon=1e-6)
        run_phase1(model, state=state)
        x, objective, state = run_phase2(model, state)
        for k, rk in enumerate(model.rankings):
            actual = revenue_of(x, rk, model.instance)
            for cut in state.pools[k]:
                assert cut.evaluate(x) >= actual - 1e-9
