import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerrcavity import (ClosedFormEvolution, ConfigError, DegenerateRootsError,
                        DeformationFn, LambdaZeroError, ModelParams,
                        amplitudes_at, branch_coefficients, branch_weights,
                        choose_truncation, cubic_data, field_weights,
                        solve_cubic)
from kerrcavity.errors import ComplexRootsError

from conftest import random_symmetric_params


def companion_roots(k1, k2, k3):
    """Eigenvalues of the companion matrix of m^3 + k1 m^2 + k2 m + k3;
    the standard linear-algebra route, independent of the trigonometric
    formula under test."""
    comp = np.array([[0.0, 0.0, -k3],
                     [1.0, 0.0, -k2],
                     [0.0, 1.0, -k1]])
    return np.sort(np.linalg.eigvals(comp).real)


class TestSolveCubic:
    def test_symmetric_cubic(self):
        roots = solve_cubic(0.0, -3.0, 0.0)
        assert roots == pytest.approx((-math.sqrt(3.0), 0.0, math.sqrt(3.0)), abs=1e-12)

    def test_factored_cubic(self):
        assert solve_cubic(-6.0, 11.0, -6.0) == pytest.approx((1.0, 2.0, 3.0), abs=1e-12)

    def test_random_against_companion_matrix(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            m = np.sort(rng.uniform(-20.0, 20.0, size=3))
            if min(m[1] - m[0], m[2] - m[1]) < 1e-3:
                continue
            k1 = -m.sum()
            k2 = m[0] * m[1] + m[0] * m[2] + m[1] * m[2]
            k3 = -m[0] * m[1] * m[2]
            got = np.array(solve_cubic(k1, k2, k3))
            ref = companion_roots(k1, k2, k3)
            scale = max(1.0, float(np.abs(ref).max()))
            assert np.abs(got - ref).max() / scale < 1e-12

    @given(st.lists(st.floats(min_value=-30.0, max_value=30.0), min_size=3, max_size=3))
    @settings(max_examples=100, deadline=None)
    def test_vieta_identities(self, roots):
        m = np.sort(np.array(roots))
        if min(m[1] - m[0], m[2] - m[1]) < 1e-2:
            return
        k1, k2 = -m.sum(), m[0] * m[1] + m[0] * m[2] + m[1] * m[2]
        k3 = -np.prod(m)
        got = np.array(solve_cubic(k1, k2, k3))
        assert got.sum() == pytest.approx(-k1, abs=1e-9 * max(1.0, abs(k1)))
        assert (got[0] * got[1] + got[0] * got[2] + got[1] * got[2]
                == pytest.approx(k2, abs=1e-9 * max(1.0, abs(k2))))
        assert np.prod(got) == pytest.approx(-k3, abs=1e-9 * max(1.0, abs(k3)))

    def test_degenerate_roots_refused(self):
        # (m - 1)^2 (m - 5)
        with pytest.raises(DegenerateRootsError):
            solve_cubic(-7.0, 11.0, -5.0)

    def test_complex_roots_refused(self):
        # m^3 + m has roots 0, +-i
        with pytest.raises(ComplexRootsError):
            solve_cubic(0.0, 1.0, 0.0)

    def test_near_boundary_clamped(self):
        # roots {1, 1 + 2e-5, 4}: inside tolerance for the arccos clamp but
        # still separated enough to pass the gap check
        m = np.array([1.0, 1.0 + 2e-5, 4.0])
        k1, k2 = -m.sum(), m[0] * m[1] + m[0] * m[2] + m[1] * m[2]
        k3 = -np.prod(m)
        got = np.array(solve_cubic(k1, k2, k3))
        assert np.abs(got - m).max() < 1e-8


class TestCubicData:
    def test_zero_coupling_factors(self):
        # lam = 0 decouples the system: roots are {0, b, a+b} sorted
        p = ModelParams(lam=0.0, epsilon=4.0, delta=1.0, chi1=0.3)
        bc = branch_coefficients(p, 2, 3)
        data = cubic_data(p, bc)
        expect = np.sort([0.0, data.b, data.a + data.b])
        assert np.array(data.roots) == pytest.approx(expect, abs=1e-9)

    def test_matches_companion_on_random_draws(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = random_symmetric_params(rng)
            bc = branch_coefficients(p, int(rng.integers(0, 8)), int(rng.integers(0, 8)))
            try:
                data = cubic_data(p, bc)
            except DegenerateRootsError:
                continue
            ref = companion_roots(data.k1, data.k2, data.k3)
            scale = max(1.0, float(np.abs(ref).max()))
            assert np.abs(np.array(data.roots) - ref).max() / scale < 1e-9


class TestBranchWeights:
    def test_zero_initial_data(self):
        # gamma1 = gamma2 = gamma4 = 0 makes every spectral weight vanish
        p = ModelParams(lam=1.0, epsilon=3.0, delta=1.0,
                        gamma1=0.0j, gamma3=1.0 + 0.0j)
        bc = branch_coefficients(p, 1, 2)
        data = cubic_data(p, bc)
        w = branch_weights(data, p, bc)
        assert all(abs(v) < 1e-15 for v in w.values)

    def test_weight_sum_is_gamma4(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            p = random_symmetric_params(rng)
            bc = branch_coefficients(p, 1, 1)
            try:
                data = cubic_data(p, bc)
            except DegenerateRootsError:
                continue
            w = branch_weights(data, p, bc)
            assert sum(w.values) == pytest.approx(complex(p.gamma4), abs=1e-9)

    def test_initial_condition_reconstruction(self):
        # the closed-form slow amplitudes evaluated at t = 0 must return the
        # declared (gamma1, gamma2, gamma4) for any phi, not just phi = 0
        rng = np.random.default_rng(17)
        for _ in range(25):
            p = random_symmetric_params(rng)
            bc = branch_coefficients(p, 2, 4)
            try:
                data = cubic_data(p, bc)
            except DegenerateRootsError:
                continue
            w = np.array(branch_weights(data, p, bc).values)
            m = np.array(data.roots)
            lam, v1, v2, b = p.lam, bc.v1, bc.v2, data.b
            c4 = w.sum()
            c2 = -(w * m).sum() / (lam * v2) * np.exp(-1j * p.phi)
            c1 = ((w * (2.0 * m ** 2 - 2.0 * b * m - lam ** 2 * v2 ** 2)).sum()
                  / (lam ** 2 * v1 * v2) * np.exp(-2j * p.phi))
            assert c1 == pytest.approx(complex(p.gamma1), abs=1e-9)
            assert c2 == pytest.approx(complex(p.gamma2), abs=1e-9)
            assert c4 == pytest.approx(complex(p.gamma4), abs=1e-9)


class TestClosedForm:
    def test_lambda_zero_rejected(self, small_trunc):
        with pytest.raises(LambdaZeroError):
            amplitudes_at(ModelParams(lam=0.0), small_trunc, 1.0)

    def test_excited_initial_state_recovered(self, excited_params, small_trunc):
        amps = amplitudes_at(excited_params, small_trunc, 0.0)
        assert np.abs(amps.a1 - 1.0).max() < 1e-12
        assert np.abs(amps.a2).max() < 1e-12
        assert np.abs(amps.a4).max() < 1e-12

    def test_golden_phase_convention(self, small_trunc):
        # pinned convention: amplitudes at t = 0 equal the atomic weights
        # exactly, including nonzero modulation phase
        g2 = 0.5
        p = ModelParams(lam=1.3, epsilon=5.0, phi=0.9, delta=2.0, chi1=0.7,
                        gamma1=0.5 + 0.0j, gamma2=g2, gamma3=g2, gamma4=0.5j,
                        beta1=0.1, beta2=0.2)
        amps = amplitudes_at(p, small_trunc, 0.0)
        assert np.abs(amps.a1 - p.gamma1).max() < 1e-10
        assert np.abs(amps.a2 - p.gamma2).max() < 1e-10
        assert np.abs(amps.a4 - p.gamma4).max() < 1e-10

    def test_norm_conserved_along_time(self, kerr_params, small_trunc):
        evo = ClosedFormEvolution(kerr_params, small_trunc)
        w = field_weights(kerr_params, small_trunc)
        for t in (0.0, 0.5, 3.3, 17.0, 50.0):
            assert evo.amplitudes(t).weighted_norm(w) == pytest.approx(1.0, abs=1e-9)

    def test_norm_random_draws(self):
        rng = np.random.default_rng(23)
        count = 0
        while count < 30:
            p = random_symmetric_params(rng)
            trunc = choose_truncation(p.alpha1, p.alpha2, 1e-12)
            t = float(rng.uniform(0.0, 50.0))
            try:
                evo = ClosedFormEvolution(p, trunc)
            except DegenerateRootsError:
                continue
            w = field_weights(p, trunc)
            assert evo.amplitudes(t).weighted_norm(w) == pytest.approx(1.0, abs=1e-9)
            count += 1

    def test_vanishing_coupling_cells_rejected(self, small_trunc):
        # a custom deformation with a zero entry kills v1 v2 somewhere
        table = [1.0] * (small_trunc.n_max + 3)
        table[3] = 0.0
        p = ModelParams(deformation=DeformationFn.custom(table))
        with pytest.raises(ConfigError):
            ClosedFormEvolution(p, small_trunc)

    def test_middle_branch_asymmetry_accepted(self, small_trunc):
        # gamma3 never enters the branch evolution; the represented state
        # carries weighted norm |g1|^2 + 2|g2|^2 + |g4|^2
        s = 1.0 / math.sqrt(2.0)
        p = ModelParams(epsilon=10.0, delta=10.0, gamma1=s, gamma2=s, gamma3=0.0j)
        evo = ClosedFormEvolution(p, small_trunc)
        w = field_weights(p, small_trunc)
        assert evo.amplitudes(2.0).weighted_norm(w) == pytest.approx(1.5, abs=1e-9)

    def test_one_shot_matches_evolution(self, kerr_params, small_trunc):
        evo = ClosedFormEvolution(kerr_params, small_trunc)
        one = amplitudes_at(kerr_params, small_trunc, 1.7)
        batch = evo.amplitudes(1.7)
        assert np.array_equal(one.a1, batch.a1)
        assert np.array_equal(one.a2, batch.a2)
        assert np.array_equal(one.a4, batch.a4)
