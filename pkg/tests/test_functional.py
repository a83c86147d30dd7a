"""Cost functionals, uncertainty adjoint, and the exact regret identities."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

import lowregret as lr
from lowregret.functional import workspace

from conftest import make_problem, random_control


def tiny_cfg(**kw):
    return make_problem(n=8, steps=5, **kw)


class TestConfigValidation:
    @pytest.mark.parametrize(
        "field,value",
        [
            ("s", 0.0),
            ("s", 1.0),
            ("control_weight", 0.0),
            ("control_weight", -1.0),
            ("gamma", 0.0),
            ("gamma", -0.5),
            ("cg_tol", 0.0),
            ("cg_max_iters", 0),
        ],
    )
    def test_rejects_bad_scalars(self, field, value):
        cfg = make_problem()
        with pytest.raises(ValueError):
            dataclasses.replace(cfg, **{field: value})

    def test_rejects_misshapen_fields(self):
        cfg = make_problem()
        with pytest.raises(ValueError):
            dataclasses.replace(cfg, f=cfg.f[:, :-1])
        with pytest.raises(ValueError):
            dataclasses.replace(cfg, z_d=cfg.z_d[:-1])


class TestWorkspaceCache:
    def test_same_instance_reuses_workspace(self, small_cfg):
        assert workspace(small_cfg) is workspace(small_cfg)

    def test_distinct_instances_get_distinct_workspaces(self):
        a, b = make_problem(), make_problem()
        assert workspace(a) is not workspace(b)


class TestCost:
    def test_perfect_tracking_costs_nothing(self):
        cfg = make_problem()
        ws = workspace(cfg)
        tracked = dataclasses.replace(cfg, z_d=ws.q_background)
        v0 = lr.zeros_space_time(cfg.grid, cfg.tgrid)
        assert lr.cost(v0, np.zeros(cfg.grid.n), tracked) == 0.0

    def test_nonnegative(self, small_cfg):
        rng = np.random.default_rng(17)
        for _ in range(3):
            v = random_control(small_cfg, rng)
            g = rng.standard_normal(small_cfg.grid.n)
            assert lr.cost(v, g, small_cfg) >= 0.0

    def test_quadratic_scaling_without_data(self):
        cfg = make_problem(source_amp=0.0, target_amp=0.0)
        rng = np.random.default_rng(19)
        v = random_control(cfg, rng)
        g = rng.standard_normal(cfg.grid.n)
        j1 = lr.cost(v, g, cfg)
        j2 = lr.cost(2.0 * v, 2.0 * g, cfg)
        assert j2 == pytest.approx(4.0 * j1, rel=1e-12)


class TestRelaxedCost:
    def test_zero_datum_reduces_to_cost(self, small_cfg):
        rng = np.random.default_rng(23)
        v = random_control(small_cfg, rng)
        g = np.zeros(small_cfg.grid.n)
        assert lr.relaxed_cost(v, g, small_cfg) == lr.cost(v, g, small_cfg)

    def test_matches_cost_minus_credit(self, small_cfg):
        rng = np.random.default_rng(29)
        v = random_control(small_cfg, rng)
        g = rng.standard_normal(small_cfg.grid.n)
        expected = lr.cost(v, g, small_cfg) - small_cfg.gamma * lr.inner_product_omega(
            g, g, small_cfg.grid
        )
        assert lr.relaxed_cost(v, g, small_cfg) == pytest.approx(expected, rel=1e-14)

    def test_rest_value_is_background_misfit(self, small_cfg):
        ws = workspace(small_cfg)
        v0 = lr.zeros_space_time(small_cfg.grid, small_cfg.tgrid)
        rest = lr.relaxed_cost(v0, np.zeros(small_cfg.grid.n), small_cfg)
        assert rest == pytest.approx(ws.relaxed_cost_00, rel=1e-14)


class TestUncertaintyAdjoint:
    def test_zero_control_zero_adjoint(self, small_cfg):
        adj = lr.solve_uncertainty_adjoint(
            lr.zeros_space_time(small_cfg.grid, small_cfg.tgrid), small_cfg
        )
        assert np.array_equal(adj.trajectory, np.zeros_like(adj.trajectory))
        assert np.array_equal(adj.initial_value, np.zeros(small_cfg.grid.n))

    def test_initial_value_is_time_zero_trace(self, small_cfg):
        rng = np.random.default_rng(31)
        adj = lr.solve_uncertainty_adjoint(random_control(small_cfg, rng), small_cfg)
        assert np.array_equal(adj.initial_value, adj.trajectory[0])
        assert np.array_equal(adj.trajectory[0], adj.trajectory[1])

    def test_linearity_in_the_control(self, small_cfg):
        rng = np.random.default_rng(37)
        v = random_control(small_cfg, rng)
        a = lr.solve_uncertainty_adjoint(v, small_cfg).trajectory
        b = lr.solve_uncertainty_adjoint(2.5 * v, small_cfg).trajectory
        assert np.max(np.abs(b - 2.5 * a)) <= 1e-12 * max(1.0, np.max(np.abs(a)))

    def test_matches_dense_composition_oracle(self):
        # chain the one-step solves as explicit dense matrices on a tiny problem
        cfg = tiny_cfg()
        ws = workspace(cfg)
        n, m_steps, dt = cfg.grid.n, cfg.tgrid.steps, cfg.tgrid.dt
        k = np.linalg.inv(np.eye(n) + dt * ws.operator.matrix)

        rng = np.random.default_rng(41)
        v = random_control(cfg, rng)

        q = np.zeros((m_steps + 1, n))
        for m in range(m_steps):
            q[m + 1] = k @ (q[m] + dt * v[m + 1])
        xi = np.zeros((m_steps + 1, n))
        carry = np.zeros(n)
        for m in range(m_steps, 0, -1):
            carry = k @ (carry + dt * q[m])
            xi[m] = carry
        xi[0] = carry

        adj = lr.solve_uncertainty_adjoint(v, cfg)
        assert np.max(np.abs(adj.trajectory - xi)) <= 1e-10 * max(1.0, np.max(np.abs(xi)))


class TestReducedCost:
    def test_zero_control_is_the_reference_point(self, small_cfg):
        v0 = lr.zeros_space_time(small_cfg.grid, small_cfg.tgrid)
        assert lr.reduced_cost(v0, small_cfg) == 0.0

    def test_bounded_below_by_negative_rest_value(self, small_cfg):
        ws = workspace(small_cfg)
        rng = np.random.default_rng(43)
        for _ in range(5):
            v = random_control(small_cfg, rng)
            val = lr.reduced_cost(v, small_cfg)
            assert val >= -ws.relaxed_cost_00 - 1e-10 * max(1.0, ws.relaxed_cost_00)

    def test_large_gamma_limit_drops_uncertainty_term(self):
        cfg = make_problem(gamma=1e8)
        ws = workspace(cfg)
        rng = np.random.default_rng(47)
        v = random_control(cfg, rng)
        plain = lr.cost(v, np.zeros(cfg.grid.n), cfg) - ws.relaxed_cost_00
        val = lr.reduced_cost(v, cfg)
        assert val == pytest.approx(plain, rel=1e-8, abs=1e-8)

    def test_uncertainty_term_matches_trace_norm(self, small_cfg):
        rng = np.random.default_rng(53)
        v = random_control(small_cfg, rng)
        ws = workspace(small_cfg)
        xi0 = lr.solve_uncertainty_adjoint(v, small_cfg).initial_value
        plain = lr.cost(v, np.zeros(small_cfg.grid.n), small_cfg) - ws.relaxed_cost_00
        expected = plain + lr.inner_product_omega(xi0, xi0, small_cfg.grid) / small_cfg.gamma
        assert lr.reduced_cost(v, small_cfg) == pytest.approx(expected, rel=1e-12)

    def test_midpoint_convexity_with_control_weight_modulus(self, small_cfg):
        # J((u+w)/2) <= (J(u)+J(w))/2 - (weight/4) |u-w|_Q^2, quadratic so exact
        rng = np.random.default_rng(59)
        u, w = random_control(small_cfg, rng), random_control(small_cfg, rng)
        mid = lr.reduced_cost(0.5 * (u + w), small_cfg)
        avg = 0.5 * (lr.reduced_cost(u, small_cfg) + lr.reduced_cost(w, small_cfg))
        gap = small_cfg.control_weight / 4.0 * lr.norm_q(u - w, small_cfg.grid, small_cfg.tgrid) ** 2
        assert mid <= avg - gap + 1e-10 * max(1.0, abs(avg))


class TestExactIdentities:
    def test_decomposition_zero_control_is_exact(self, small_cfg):
        rng = np.random.default_rng(61)
        v0 = lr.zeros_space_time(small_cfg.grid, small_cfg.tgrid)
        g = rng.standard_normal(small_cfg.grid.n)
        assert lr.cost_decomposition_residual(v0, g, small_cfg) == 0.0

    def test_duality_zero_datum_is_exact(self, small_cfg):
        rng = np.random.default_rng(67)
        v = random_control(small_cfg, rng)
        assert lr.duality_residual(v, np.zeros(small_cfg.grid.n), small_cfg) == 0.0

    @given(seed=st.integers(0, 10**6))
    def test_decomposition_holds_at_round_off(self, seed):
        cfg = tiny_cfg()
        rng = np.random.default_rng(seed)
        v = random_control(cfg, rng)
        g = rng.standard_normal(cfg.grid.n)
        scale = max(1.0, abs(lr.relaxed_cost(v, g, cfg)))
        assert lr.cost_decomposition_residual(v, g, cfg) <= 1e-12 * scale

    @given(seed=st.integers(0, 10**6))
    def test_duality_holds_at_round_off(self, seed):
        cfg = tiny_cfg()
        rng = np.random.default_rng(seed)
        v = random_control(cfg, rng)
        g = rng.standard_normal(cfg.grid.n)
        scale = max(1.0, abs(lr.cost(v, g, cfg)))
        assert lr.duality_residual(v, g, cfg) <= 1e-12 * scale

    def test_identities_invariant_under_rescaled_probes(self, small_cfg):
        rng = np.random.default_rng(71)
        v = random_control(small_cfg, rng)
        g = rng.standard_normal(small_cfg.grid.n)
        scale = max(1.0, abs(lr.relaxed_cost(2.0 * v, 3.0 * g, small_cfg)))
        assert lr.cost_decomposition_residual(2.0 * v, 3.0 * g, small_cfg) <= 1e-12 * scale
        assert lr.duality_residual(2.0 * v, 3.0 * g, small_cfg) <= 1e-12 * scale


class TestFenchelGap:
    def test_zero_control_gap_is_probe_penalty(self, small_cfg):
        rng = np.random.default_rng(73)
        g = rng.standard_normal(small_cfg.grid.n)
        v0 = lr.zeros_space_time(small_cfg.grid, small_cfg.tgrid)
        expected = small_cfg.gamma * lr.inner_product_omega(g, g, small_cfg.grid)
        assert lr.fenchel_gap(v0, g, small_cfg) == expected

    def test_vanishes_at_the_maximizer(self, small_cfg):
        rng = np.random.default_rng(79)
        v = random_control(small_cfg, rng)
        xi0 = lr.solve_uncertainty_adjoint(v, small_cfg).initial_value
        g_star = xi0 / small_cfg.gamma
        scale = max(1.0, lr.inner_product_omega(xi0, xi0, small_cfg.grid) / small_cfg.gamma)
        assert abs(lr.fenchel_gap(v, g_star, small_cfg)) <= 1e-12 * scale

    @given(seed=st.integers(0, 10**6))
    def test_nonnegative_for_every_probe(self, seed):
        cfg = tiny_cfg()
        rng = np.random.default_rng(seed)
        v = random_control(cfg, rng)
        g = rng.standard_normal(cfg.grid.n)
        xi0 = lr.solve_uncertainty_adjoint(v, cfg).initial_value
        scale = max(1.0, lr.inner_product_omega(xi0, xi0, cfg.grid) / cfg.gamma)
        assert lr.fenchel_gap(v, g, cfg) >= -1e-12 * scale
