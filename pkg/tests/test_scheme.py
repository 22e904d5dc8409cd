import numpy as np
import pytest

from oracles import g_form_rhs_1d, g_form_rhs_2d, random_compatible_1d
from pnp import (
    BoundaryData1D,
    BoundaryData2D,
    PositivityError,
    SpeciesState,
    build_grid_1d,
    build_grid_2d,
    cfl_2d,
    cfl_lambda0,
    cfl_multi,
    euler_step,
    max_stable_dt,
    semi_discrete_rhs_1d,
    semi_discrete_rhs_2d,
    solve_poisson_1d,
    step_coupled,
)

NO_FLUX = BoundaryData1D(0.0, 0.0)


class TestCflBounds:
    def test_zero_sigma(self):
        assert cfl_lambda0(NO_FLUX, 0.1) == pytest.approx(0.5, abs=1e-15)

    def test_equal_sigmas_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            sigma, h = rng.uniform(-3, 3), rng.uniform(1e-3, 0.5)
            got = cfl_lambda0(BoundaryData1D(sigma, sigma), h)
            assert got == pytest.approx(np.exp(h * sigma / 2) / 2, rel=1e-14)

    def test_reference_value(self):
        got = cfl_lambda0(BoundaryData1D(-1.0, 0.0), 0.1)
        assert got == pytest.approx(1.0 / (1.0 + np.exp(0.05)), rel=1e-14)
        assert got == pytest.approx(0.48750, abs=5e-6)

    def test_single_species_reduces_to_lambda0(self):
        g = build_grid_1d(0, 1, 10)
        bc = BoundaryData1D(-1.0, 0.0)
        bound = cfl_multi([SpeciesState(np.ones(10), 1.0)], bc, g)
        assert bound.c_minus == 0.0
        assert bound.lambda_multi == bound.lambda0

    def test_two_species_charge_split(self):
        g = build_grid_1d(0, 1, 10)  # h = 0.1
        bc = BoundaryData1D(-1.0, 0.0)
        states = [SpeciesState(np.full(10, 2.0), 1.0), SpeciesState(np.ones(10), -1.0)]
        bound = cfl_multi(states, bc, g)
        assert bound.c_plus == pytest.approx(2.0)
        assert bound.c_minus == pytest.approx(-1.0)
        assert bound.lambda_multi == pytest.approx(np.exp(-0.05) * bound.lambda0, rel=1e-14)
        assert bound.max_dt(g.h) == pytest.approx(bound.lambda_multi * 0.01, rel=1e-14)

    def test_all_positive_charges(self):
        g = build_grid_1d(0, 1, 8)
        states = [SpeciesState(np.ones(8), 1.0), SpeciesState(np.ones(8), 2.0)]
        sb = -3 * 1.0  # balances q.m = 3
        bound = cfl_multi(states, BoundaryData1D(0.0, sb), g)
        assert bound.lambda_multi == bound.lambda0

    def test_2d_zero_sigma(self):
        assert cfl_2d(BoundaryData2D.uniform(0.0), 0.1) == pytest.approx(0.25, abs=1e-15)

    def test_2d_reference_value(self):
        got = cfl_2d(BoundaryData2D.uniform(-1.0), 0.05)
        assert got == pytest.approx(1.0 / (4.0 * np.exp(0.025)), rel=1e-14)

    def test_2d_bound_is_more_conservative_than_1d(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            sig = rng.uniform(-2, 2, size=4)
            h = float(rng.uniform(1e-3, 0.3))
            two_d = cfl_2d(BoundaryData2D(*sig), h)
            one_d = cfl_lambda0(BoundaryData1D(sig[0], sig[1]), h)
            assert two_d < one_d


class TestRhs1D:
    def test_equilibrium_is_stationary(self):
        rng = np.random.default_rng(3)
        g = build_grid_1d(0, 1, 16)
        psi = rng.uniform(-2, 2, size=16)
        for q in (1.0, -1.0, 2.0):
            c = 1.7 * np.exp(-q * psi)
            quiet = semi_discrete_rhs_1d(SpeciesState(c, q), psi, NO_FLUX, g)
            assert np.max(np.abs(quiet)) <= 1e-12

    def test_flat_potential_is_heat_stencil(self):
        rng = np.random.default_rng(4)
        g = build_grid_1d(0, 1, 12)
        c = rng.uniform(0, 2, size=12)
        got = semi_discrete_rhs_1d(SpeciesState(c, 1.0), np.zeros(12), NO_FLUX, g)
        padded = np.concatenate([[c[0]], c, [c[-1]]])  # reflecting ends
        expected = (padded[2:] - 2 * padded[1:-1] + padded[:-2]) / g.h ** 2
        assert np.allclose(got, expected, rtol=0, atol=1e-12)

    def test_hand_evaluated_example(self):
        g = build_grid_1d(0, 1.5, 3)  # h = 0.5
        state = SpeciesState(np.array([1.0, 2.0, 3.0]), 1.0)
        got = semi_discrete_rhs_1d(state, np.zeros(3), NO_FLUX, g)
        assert got == pytest.approx([4.0, 0.0, -4.0], abs=1e-14)
        assert g.h * got.sum() == pytest.approx(0.0, abs=1e-14)

    def test_cell_sum_telescopes(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            n = int(rng.integers(2, 40))
            g = build_grid_1d(0, 1, n)
            state = SpeciesState(rng.uniform(0, 5, size=n), float(rng.choice([-1, 1, 2])))
            psi = rng.uniform(-3, 3, size=n)
            q_rate = semi_discrete_rhs_1d(state, psi, NO_FLUX, g)
            assert abs(g.h * q_rate.sum()) <= 1e-11 * max(1.0, np.abs(q_rate).max())

    def test_increment_form_matches_g_form(self):
        rng = np.random.default_rng(6)
        for q in (1.0, -1.0, 3.0):
            n = 24
            g = build_grid_1d(0, 1, n)
            psi = rng.uniform(-30 / abs(q), 30 / abs(q), size=n)
            c = rng.uniform(0.1, 2.0, size=n)
            mine = semi_discrete_rhs_1d(SpeciesState(c, q), psi, NO_FLUX, g)
            ref = g_form_rhs_1d(c, q, psi, g.h)
            scale = np.max(np.abs(ref))
            assert np.max(np.abs(mine - ref)) <= 1e-13 * max(1.0, scale)


class TestRhs2D:
    def test_uniform_state_flat_potential(self):
        g = build_grid_2d(0, 1, 0, 1, 5, 5)
        state = SpeciesState(np.full((5, 5), 2.5), 1.0)
        got = semi_discrete_rhs_2d(state, np.zeros((5, 5)), BoundaryData2D.uniform(0.0), g)
        assert np.max(np.abs(got)) == 0.0

    def test_separable_data_acts_along_x_only(self):
        rng = np.random.default_rng(7)
        g = build_grid_2d(0, 1, 0, 1, 8, 8)
        u = rng.uniform(0.5, 2.0, size=8)
        c = np.tile(u[:, None], (1, 8))
        got = semi_discrete_rhs_2d(SpeciesState(c, 1.0), np.zeros((8, 8)), BoundaryData2D.uniform(0.0), g)
        g1 = build_grid_1d(0, 1, 8)
        one_d = semi_discrete_rhs_1d(SpeciesState(u, 1.0), np.zeros(8), NO_FLUX, g1)
        assert np.allclose(got, np.tile(one_d[:, None], (1, 8)), atol=1e-12)

    def test_matches_g_form_oracle(self):
        rng = np.random.default_rng(8)
        g = build_grid_2d(0, 1, 0, 1, 3, 3)
        for q in (1.0, -1.0):
            c = rng.uniform(0.2, 3.0, size=(3, 3))
            psi = rng.uniform(-2, 2, size=(3, 3))
            mine = semi_discrete_rhs_2d(SpeciesState(c, q), psi, BoundaryData2D.uniform(0.0), g)
            ref = g_form_rhs_2d(c, q, psi, g.h)
            assert np.max(np.abs(mine - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))

    def test_cell_sum_telescopes(self):
        rng = np.random.default_rng(9)
        g = build_grid_2d(0, 2, 0, 1, 10, 5)
        state = SpeciesState(rng.uniform(0, 4, size=(10, 5)), -1.0)
        psi = rng.uniform(-2, 2, size=(10, 5))
        q_rate = semi_discrete_rhs_2d(state, psi, BoundaryData2D.uniform(0.0), g)
        assert abs(g.cell_volume * q_rate.sum()) <= 1e-12 * max(1.0, np.abs(q_rate).max())


class TestEulerStep:
    def test_equilibrium_fixed_point(self):
        rng = np.random.default_rng(10)
        g = build_grid_1d(0, 1, 16)
        psi = rng.uniform(-1, 1, size=16)
        c = 0.8 * np.exp(-psi)
        new, rep = euler_step([SpeciesState(c, 1.0)], psi, NO_FLUX, g,
                              k=0.4 * cfl_lambda0(NO_FLUX, g.h) * g.h ** 2)
        assert np.max(np.abs(new[0].c - c)) <= 1e-14 * np.max(c)
        assert rep.dt_used > 0

    def test_hand_evaluated_update(self):
        g = build_grid_1d(0, 1.5, 3)
        st = SpeciesState(np.array([1.0, 2.0, 3.0]), 1.0)
        new, rep = euler_step([st], np.zeros(3), NO_FLUX, g, k=0.1)
        assert new[0].c == pytest.approx([1.4, 2.0, 2.6], abs=1e-15)
        assert rep.masses[0] == pytest.approx(3.0, abs=1e-14)

    def test_mass_preserved_even_above_bound(self):
        g = build_grid_1d(0, 1, 9)
        st = SpeciesState(np.linspace(0.5, 2.5, 9), 1.0)
        with pytest.warns(RuntimeWarning):
            new, _ = euler_step([st], np.zeros(9), NO_FLUX, g, k=1.0, policy="warn")
        assert new[0].mass(g) == pytest.approx(st.mass(g), rel=1e-13)

    def test_adversarial_step_raises_in_strict_mode(self):
        # all mass in one interior cell makes the stability bound sharp
        g = build_grid_1d(0, 1, 8)
        bc = BoundaryData1D(-1.0, 0.0)
        c = np.zeros(8)
        c[4] = 1.0 / g.h  # unit mass
        states = [SpeciesState(c, 1.0)]
        k = 1.01 * max_stable_dt(states, bc, g)
        with pytest.raises(PositivityError):
            step_coupled(states, bc, g, k, policy="strict")

    def test_just_below_bound_stays_nonnegative(self):
        g = build_grid_1d(0, 1, 8)
        bc = BoundaryData1D(-1.0, 0.0)
        c = np.zeros(8)
        c[4] = 1.0 / g.h
        states = [SpeciesState(c, 1.0)]
        k = 0.99 * max_stable_dt(states, bc, g)
        new, _, rep = step_coupled(states, bc, g, k, policy="strict")
        assert rep.min_c >= 0.0

    def test_rejects_bad_inputs(self):
        g = build_grid_1d(0, 1, 4)
        st = SpeciesState(np.ones(4), 1.0)
        with pytest.raises(ValueError):
            euler_step([st], np.zeros(4), NO_FLUX, g, k=-1.0)
        with pytest.raises(ValueError):
            euler_step([st], np.zeros(4), NO_FLUX, g, k=0.1, policy="bogus")


class TestStepCoupled:
    def test_single_species_mass_constant(self):
        g = build_grid_1d(0, 1, 32)
        bc = BoundaryData1D(-1.0, 0.0)
        states = [SpeciesState(np.ones(32), 1.0)]
        k = 0.9 * max_stable_dt(states, bc, g)
        mass0 = states[0].mass(g)
        for i in range(400):
            states, psi, rep = step_coupled(states, bc, g, k)
        assert rep.masses[0] == pytest.approx(mass0, rel=1e-13)
        assert rep.min_c >= 0.0

    def test_two_species_masses_individually_conserved(self):
        g = build_grid_1d(0, 1, 24)
        bc = BoundaryData1D(-1.0, 0.0)
        states = [SpeciesState(np.full(24, 2.0), 1.0), SpeciesState(np.ones(24), -1.0)]
        k = 0.9 * max_stable_dt(states, bc, g)
        for _ in range(300):
            states, psi, rep = step_coupled(states, bc, g, k)
        assert rep.masses[0] == pytest.approx(2.0, rel=1e-12)
        assert rep.masses[1] == pytest.approx(1.0, rel=1e-12)

    def test_neutral_uniform_pair_is_fixed_point(self):
        g = build_grid_1d(0, 1, 10)
        bc = BoundaryData1D(0.0, 0.0)
        states = [SpeciesState(np.full(10, 1.5), 1.0), SpeciesState(np.full(10, 1.5), -1.0)]
        new, psi, _ = step_coupled(states, bc, g, k=1e-3)
        assert np.array_equal(psi, np.zeros(10))
        for before, after in zip(states, new):
            assert np.array_equal(before.c, after.c)

    def test_positivity_random_initials(self):
        # the proven bound covers unit charges, the setting it is stated for
        rng = np.random.default_rng(12)
        for _ in range(30):
            n = int(rng.integers(4, 33))
            g = build_grid_1d(0, 1, n)
            cs, qs, sa, sb = random_compatible_1d(rng, n, g.h, n_species=int(rng.integers(1, 3)),
                                                  charge_choices=(-1.0, 1.0))
            bc = BoundaryData1D(sa, sb)
            states = [SpeciesState(c, q) for c, q in zip(cs, qs)]
            k = 0.99 * max_stable_dt(states, bc, g)
            for _ in range(15):
                states, _, rep = step_coupled(states, bc, g, k, policy="strict")
                assert rep.min_c >= 0.0

    def test_deterministic_across_repeats(self):
        def trajectory():
            g = build_grid_1d(0, 1, 20)
            bc = BoundaryData1D(-1.0, 0.0)
            states = [SpeciesState(np.linspace(0.2, 1.8, 20), 1.0)]
            k = 0.7 * max_stable_dt(states, bc, g)
            for _ in range(50):
                states, psi, _ = step_coupled(states, bc, g, k)
            return states[0].c.tobytes(), psi.tobytes()

        assert trajectory() == trajectory()

    def test_2d_step_conserves_mass(self):
        g = build_grid_2d(0, 1, 0, 1, 6, 6)
        bc = BoundaryData2D.uniform(-1.0)
        states = [SpeciesState(np.full((6, 6), 4.0), 1.0)]
        k = 0.9 * max_stable_dt(states, bc, g)
        for _ in range(200):
            states, psi, rep = step_coupled(states, bc, g, k)
        assert rep.masses[0] == pytest.approx(4.0, rel=1e-12)
        assert rep.min_c >= 0.0
