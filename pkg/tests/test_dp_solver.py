import math

import numpy as np
import pytest

from voyage.dp_solver import (ABSORBED, NO_INPUT, Problem, StageCostParams,
                              brute_force_solve, build_transitions, planned_trajectory,
                              rollout, solve, stage_cost)
from voyage.dynamics import ControlInput, State, VehicleParams, fuel_rate
from voyage.environment import (Bounds, CurrentField, EnvironmentSpec, Position,
                                TerminalRegion)
from voyage.gridgen import InputLattice, build_mesh

from conftest import scenario_with, toy_problem

V = VehicleParams()
MDOT_MAX = fuel_rate(21.33, 21.33, V)


class TestStageCost:
    def test_pure_time(self):
        p = StageCostParams(1.0, MDOT_MAX, 0.25)
        for u in (ControlInput(0, 0), ControlInput(21.33, -10.67)):
            assert stage_cost(u, False, p, V) == 1.0

    def test_free_drift(self):
        assert stage_cost(ControlInput(0, 0), False, StageCostParams(0.0, MDOT_MAX, 0.25), V) == 0

    def test_max_input_normalizes_to_one(self):
        c = stage_cost(ControlInput(21.33, 21.33), False, StageCostParams(0.5, MDOT_MAX, 0.25), V)
        assert c == pytest.approx(1.0, abs=1e-15)

    def test_terminal_is_free(self):
        assert stage_cost(ControlInput(21.33, 0), True, StageCostParams(0.7, MDOT_MAX, 0.25), V) == 0

    def test_lambda_range(self):
        with pytest.raises(ValueError):
            StageCostParams(1.1, MDOT_MAX, 0.25)


def bellman_residual(sol, tr):
    """Largest |value - (stage cost + successor value)| over finite states."""
    pb = sol.problem
    params = pb.stage_params(sol.lam)
    cands = pb.candidates
    nf = pb.mesh.n_fuel
    worst = 0.0
    for k in range(sol.horizon):
        for m in range(len(pb.mesh)):
            for f in range(nf):
                v = sol.value[k, m, f]
                if not math.isfinite(v):
                    assert sol.policy[k, m, f] == NO_INPUT
                    continue
                a = int(sol.policy[k, m, f])
                if a == ABSORBED:
                    assert v == 0 and tr.terminal[m]
                    continue
                if cands[a].refuel:
                    succ = sol.value[k + 1, m, tr.refuel_fuel[f]]
                else:
                    n2, f2 = divmod(int(tr.flat_next[a, m, f]), nf)
                    succ = sol.value[k + 1, n2, f2]
                worst = max(worst, abs(v - (stage_cost(cands[a], False, params, pb.vehicle) + succ)))
    return worst


class TestSolveToy:
    def test_start_inside_terminal(self):
        pb = toy_problem(terminal=(0, 0), start=(0, 0))
        for lam in (0.0, 0.3, 1.0):
            assert solve(pb, lam, 3).start_value() == 0.0

    def test_zero_horizon_unreachable(self):
        sol = solve(toy_problem(), 1.0, 0)
        assert math.isinf(sol.start_value())
        assert "unreachable" in sol.diagnose()

    @pytest.mark.parametrize("lam", [0.0, 0.4, 1.0])
    def test_matches_enumeration_zero_current(self, lam):
        pb = toy_problem()
        assert np.array_equal(solve(pb, lam, 4).value[0], brute_force_solve(pb, lam, 4))

    @pytest.mark.parametrize("lam", [0.0, 0.7])
    def test_matches_enumeration_with_port_and_current(self, lam):
        pb = toy_problem(port=(2, 1), speed_scale=3.0, terminal=(3, 4), terminal_radius=1.0)
        sol = solve(pb, lam, 4)
        for k in range(4):
            assert np.allclose(sol.value[k], brute_force_solve(pb, lam, 4 - k),
                               rtol=0, atol=1e-9, equal_nan=False)

    def test_time_weight_counts_steps(self):
        # negligible burn: fuel never binds, so steps = Chebyshev distance on the grid
        pb = toy_problem(beta=1e-9)
        sol = solve(pb, 1.0, 6)
        for i, (x, y) in enumerate(pb.mesh.positions):
            want = max(4 - x, 4 - y)
            assert sol.value[0, i, 2] == want

    def test_drift_only_is_free(self):
        # northward drift of ~1 km per step carries (2,0) to (2,3)
        pb = toy_problem(speed_scale=36.0, start=(2, 0), terminal=(2, 3))
        assert solve(pb, 0.0, 5).start_value() == 0.0
        assert solve(pb, 0.0, 2).start_value() > 0.0

    def test_bellman_consistency(self):
        pb = toy_problem(port=(1, 2), speed_scale=2.0)
        tr = build_transitions(pb)
        for lam in (0.0, 0.5, 1.0):
            assert bellman_residual(solve(pb, lam, 5, tr), tr) <= 1e-9

    def test_fuel_monotone_on_uniform_mesh(self):
        pb = toy_problem(port=(1, 2), n_fuel=4)
        for lam in (0.0, 0.5, 1.0):
            v = solve(pb, lam, 6).value
            assert np.all(v[:, :, 1:] <= v[:, :, :-1])

    def test_refuel_only_at_port_nodes(self):
        pb = toy_problem(port=(1, 2))
        sol = solve(pb, 0.5, 6)
        refuel = sol.policy == len(pb.lattice)
        nodes = np.flatnonzero(refuel.any(axis=(0, 2)))
        assert set(nodes.tolist()) <= {pb.mesh.nearest_node((1, 2))}

    def test_tie_break_lowest_index(self):
        # at lambda=1 from (0,0) the first tied optimal input in lattice order is taken
        pb = toy_problem(beta=1e-9)
        sol = solve(pb, 1.0, 6)
        node = pb.mesh.nearest_node((0, 3))
        a = int(sol.policy[0, node, 2])
        # from (0,3) every optimal input must reach x=4 in 4 steps; (4, -4) has the
        # lowest index among inputs keeping the Chebyshev distance decreasing
        assert pb.candidates[a] == ControlInput(4.0, -4.0)


class TestBruteForce:
    def single(self, terminal):
        b = Bounds(0, 1, 0, 1)
        env = EnvironmentSpec(b, CurrentField(speed_scale=0.0), (),
                              TerminalRegion(Position(*terminal), 0.1), Position(0.5, 0.5), 0.2)
        vehicle = VehicleParams.with_beta(1e-3, tank_capacity=0.2, u_max=4.0)
        mesh = build_mesh(np.array([[0.5, 0.5]]), 0.2, 0.1, b)
        return Problem(env, vehicle, mesh, InputLattice.uniform(4.0, 4.0), 0.25, 0.2)

    def test_single_terminal_state(self):
        assert np.all(brute_force_solve(self.single((0.5, 0.5)), 0.5, 2) == 0)

    def test_no_way_to_terminal(self):
        assert np.all(np.isinf(brute_force_solve(self.single((0.0, 0.0)), 0.5, 1)))

    def test_guard(self):
        with pytest.raises(ValueError, match="limit"):
            brute_force_solve(toy_problem(), 0.5, 8)


class TestRollout:
    def test_start_at_terminal(self):
        pb = toy_problem(terminal=(0, 0), start=(0, 0))
        traj = rollout(solve(pb, 0.5, 3))
        assert traj.arrived and traj.steps == [] and traj.trip_time == 0 and traj.total_fuel == 0

    @pytest.mark.parametrize("lam", [0.0, 0.3, 1.0])
    def test_cost_matches_value_on_exact_grid(self, lam):
        pb = toy_problem(beta=1e-4, port=(2, 2))
        sol = solve(pb, lam, 6)
        traj = rollout(sol)
        assert traj.arrived
        assert traj.total_cost == sol.start_value()
        assert not any(s.fallback for s in traj.steps)
        plan = planned_trajectory(sol)
        assert plan.total_cost == sol.start_value()
        assert [s.control for s in plan.steps] == [s.control for s in traj.steps]

    def test_trip_time_and_fuel_totals(self):
        pb = toy_problem(beta=1e-4)
        traj = rollout(solve(pb, 1.0, 6))
        assert traj.trip_time == traj.arrival_step * 0.25
        assert traj.total_fuel == pytest.approx(sum(s.fuel_burned for s in traj.steps))
        assert traj.states[-1].fuel == pytest.approx(traj.states[0].fuel - traj.total_fuel,
                                                     abs=1e-12)

    def test_unreachable_start(self):
        traj = rollout(solve(toy_problem(), 1.0, 2))
        assert not traj.arrived and "unreachable" in traj.diagnostic

    def test_fallback_when_exact_fuel_runs_short(self):
        # snapped fuel rounds 0.06 up to 0.1, so the stored input can be infeasible exactly
        pb = toy_problem(port=(0, 1))
        sol = solve(pb, 0.0, 6)
        traj = rollout(sol, State(Position(0.0, 0.0), 0.06))
        for s in traj.steps:
            assert s.state.fuel >= 0
        assert traj.arrived or traj.diagnostic


@pytest.fixture(scope="module")
def fast_plan():
    sc = scenario_with(mesh_size=2000)
    pb = sc.problem()
    tr = build_transitions(pb)
    return pb, solve(pb, 1.0, sc.disc.horizon, tr), tr


class TestDefaultScenario:
    def test_time_optimal_path_closes_in(self, fast_plan):
        # docked steps hold position; every moving step must get closer
        pb, sol, tr = fast_plan
        plan = planned_trajectory(sol, 8.0, tr)
        assert plan.arrived
        c = np.array(pb.env.terminal.center)
        states = plan.states
        for st, nxt in zip(plan.steps, states[1:]):
            d0 = np.linalg.norm(np.array(st.state.position) - c)
            d1 = np.linalg.norm(np.array(nxt.position) - c)
            if st.refueled:
                assert d1 == d0
            else:
                assert d1 < d0

    def test_value_is_step_count(self, fast_plan):
        _, sol, _ = fast_plan
        finite = sol.value[0][np.isfinite(sol.value[0])]
        assert np.all(finite == np.round(finite))

    def test_exact_rollout_arrives(self, fast_plan):
        pb, sol, _ = fast_plan
        traj = rollout(sol, State(pb.env.start, 8.0))
        assert traj.arrived
        assert all(s.state.fuel >= 0 for s in traj.steps)


def test_value_cache_roundtrip(tmp_path):
    pb = toy_problem(port=(1, 2))
    first = solve(pb, 0.5, 5, cache_dir=tmp_path)
    assert len(list(tmp_path.glob("value-*.npz"))) == 1
    again = solve(pb, 0.5, 5, cache_dir=tmp_path)
    assert np.array_equal(first.value, again.value)
    assert np.array_equal(first.policy, again.policy)
    other = solve(pb, 0.25, 5, cache_dir=tmp_path)
    assert len(list(tmp_path.glob("value-*.npz"))) == 2
    assert not np.array_equal(first.value, other.value)
