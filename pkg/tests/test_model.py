import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerrcavity import (ConfigError, DeformationFn, ModelParams,
                        branch_coefficients, branch_grid, choose_truncation,
                        coherent_weight, coherent_weights)
from kerrcavity.model import poisson_survival, slow_gaps


def poisson_tail_oracle(mu, n):
    """Direct tail summation, independent of the implementation."""
    import mpmath as mp
    mp.mp.dps = 40
    return float(1 - mp.gammainc(n + 1, mu, mp.inf) / mp.gamma(n + 1))


class TestCoherentWeight:
    def test_vacuum(self):
        assert coherent_weight(0.0, 0) == 1.0
        assert coherent_weight(0.0, 3) == 0.0

    def test_alpha_one_single_photon(self):
        assert coherent_weight(1.0, 1) == pytest.approx(math.exp(-0.5), abs=1e-15)

    def test_negative_index_rejected(self):
        with pytest.raises(ValueError):
            coherent_weight(1.0, -1)

    def test_vector_matches_scalar(self):
        alpha = 0.7 + 0.3j
        qs = coherent_weights(alpha, 12)
        for n in range(12):
            assert qs[n] == pytest.approx(coherent_weight(alpha, n), abs=1e-15)

    @given(st.floats(min_value=0.0, max_value=math.sqrt(10.0)),
           st.floats(min_value=0.0, max_value=2.0 * math.pi))
    @settings(max_examples=40, deadline=None)
    def test_normalization(self, mag, phase):
        # sum |q_n|^2 over the truncated grid reaches 1 minus the tail
        alpha = mag * complex(math.cos(phase), math.sin(phase))
        trunc = choose_truncation(alpha, 0.0, 1e-12)
        total = float(np.sum(np.abs(coherent_weights(alpha, trunc.n_max + 1)) ** 2))
        assert 1.0 - 1e-12 <= total <= 1.0 + 1e-12

    def test_large_photon_number_stays_finite(self):
        q = coherent_weight(3.0, 400)
        assert math.isfinite(abs(q))
        assert abs(q) < 1e-200


class TestChooseTruncation:
    def test_vacuum_floor(self):
        assert choose_truncation(0.0, 0.0, 1e-12).n_max == 4

    def test_alpha_one_matches_tail_oracle(self):
        # frozen from the direct tail-summation oracle below
        trunc = choose_truncation(1.0, 1.0, 1e-12)
        assert trunc.n_max == 14
        assert poisson_tail_oracle(1.0, 14) < 1e-12
        assert poisson_tail_oracle(1.0, 13) >= 1e-12

    def test_alpha_two_matches_tail_oracle(self):
        trunc = choose_truncation(2.0, 2.0, 1e-8)
        assert trunc.n_max == 20
        assert poisson_tail_oracle(4.0, 20) < 1e-8
        assert poisson_tail_oracle(4.0, 19) >= 1e-8

    def test_monotone_in_alpha(self):
        assert (choose_truncation(2.0, 2.0, 1e-8).n_max
                > choose_truncation(1.0, 1.0, 1e-8).n_max)

    def test_asymmetric_modes_take_the_larger(self):
        both = choose_truncation(0.0, 2.5, 1e-10)
        assert both.n_max == choose_truncation(2.5, 2.5, 1e-10).n_max

    def test_cap(self):
        with pytest.raises(ConfigError):
            choose_truncation(20.0, 20.0, 1e-300, cap=64)

    def test_survival_matches_oracle(self):
        surv = poisson_survival(1.7, 30)
        for n in (0, 3, 11, 25):
            assert surv[n] == pytest.approx(poisson_tail_oracle(1.7, n), rel=1e-10)


class TestBranchCoefficients:
    def test_kerr_hand_values(self):
        # hand substitution: delta=30, chi1=chi2=1, n1=n2=10, f=1
        p = ModelParams(delta=30.0, chi1=1.0, chi2=1.0)
        bc = branch_coefficients(p, 10, 10)
        assert bc.v1 == pytest.approx(11.0, abs=1e-12)
        assert bc.v2 == pytest.approx(12.0, abs=1e-12)
        assert bc.t1 == pytest.approx(210.0, abs=1e-12)

    def test_zero_parameter_cell(self):
        p = ModelParams(delta=0.0)
        bc = branch_coefficients(p, 0, 0)
        assert (bc.v1, bc.v2) == (1.0, 2.0)
        assert bc.t1 == bc.t2 == bc.t4 == 0.0

    def test_sqrt_deformation_cell(self):
        p = ModelParams(deformation=DeformationFn.sqrt_n())
        bc = branch_coefficients(p, 0, 0)
        assert bc.v1 == pytest.approx(1.0, abs=1e-12)
        assert bc.v2 == pytest.approx(4.0, abs=1e-12)

    def test_negative_cell_rejected(self):
        with pytest.raises(ValueError):
            branch_coefficients(ModelParams(), -1, 0)

    @given(st.integers(min_value=0, max_value=12),
           st.integers(min_value=0, max_value=12),
           st.floats(min_value=-20.0, max_value=20.0),
           st.floats(min_value=0.0, max_value=20.0))
    @settings(max_examples=60, deadline=None)
    def test_conventions_agree_when_chi2_zero_or_diagonal(self, n1, n2, delta, chi1):
        base = dict(delta=delta, chi1=chi1, chi2=0.0, chi12=1.3, beta1=0.4, beta2=0.2)
        a = branch_coefficients(ModelParams(t4_convention="corrected", **base), n1, n2)
        b = branch_coefficients(ModelParams(t4_convention="paper_literal", **base), n1, n2)
        assert a.t4 == pytest.approx(b.t4, abs=1e-12)
        diag = dict(base, chi2=2.5)
        a = branch_coefficients(ModelParams(t4_convention="corrected", **diag), n1, n1)
        b = branch_coefficients(ModelParams(t4_convention="paper_literal", **diag), n1, n1)
        assert a.t4 == pytest.approx(b.t4, abs=1e-12)

    def test_conventions_differ_off_diagonal(self):
        p_corr = ModelParams(chi2=1.0, t4_convention="corrected")
        p_lit = ModelParams(chi2=1.0, t4_convention="paper_literal")
        assert (branch_coefficients(p_corr, 2, 5).t4
                != branch_coefficients(p_lit, 2, 5).t4)

    def test_grid_matches_scalar(self):
        p = ModelParams(delta=3.0, beta1=0.5, beta2=0.7, chi1=1.0, chi2=2.0,
                        chi12=0.3, deformation=DeformationFn.sqrt_n())
        grid = branch_grid(p, 6)
        for n1 in (0, 3, 6):
            for n2 in (0, 2, 6):
                bc = branch_coefficients(p, n1, n2)
                for name in ("v1", "v2", "t1", "t2", "t4"):
                    assert getattr(grid, name)[n1, n2] == pytest.approx(
                        getattr(bc, name), abs=1e-12)

    def test_undeformed_couplings_are_exact_roots(self):
        grid = branch_grid(ModelParams(), 8)
        n1 = np.arange(9.0)[:, None]
        n2 = np.arange(9.0)[None, :]
        assert np.array_equal(grid.v1, np.sqrt((n1 + 1) * (n2 + 1)))
        assert np.array_equal(grid.v2, np.sqrt((n1 + 2) * (n2 + 2)))

    def test_slow_gaps(self):
        # with epsilon = delta and no Kerr or Stark terms both gaps vanish
        p = ModelParams(epsilon=7.0, delta=7.0)
        bc = branch_coefficients(p, 4, 9)
        a, b = slow_gaps(p, bc)
        assert a == pytest.approx(0.0, abs=1e-12)
        assert b == pytest.approx(0.0, abs=1e-12)


class TestModelParams:
    def test_gamma_normalization_enforced(self):
        with pytest.raises(ConfigError):
            ModelParams(gamma1=0.9).validate()

    def test_negative_coupling_rejected(self):
        with pytest.raises(ConfigError):
            ModelParams(lam=-0.5).validate()

    def test_non_finite_rejected(self):
        with pytest.raises(ConfigError):
            ModelParams(delta=math.inf).validate()

    def test_unknown_t4_convention_rejected(self):
        with pytest.raises(ConfigError):
            ModelParams(t4_convention="verbatim").validate()


class TestDeformation:
    def test_linear_is_ones(self):
        assert np.array_equal(DeformationFn.linear().values(5), np.ones(5))

    def test_sqrt(self):
        vals = DeformationFn.sqrt_n().values(4)
        assert vals[0] == 0.0
        assert vals[2] == pytest.approx(math.sqrt(2.0))

    def test_custom_table(self):
        f = DeformationFn.custom([1.0, 0.5, 0.25, 0.125])
        assert np.array_equal(f.values(3), [1.0, 0.5, 0.25])

    def test_custom_table_too_short(self):
        with pytest.raises(ConfigError):
            DeformationFn.custom([1.0]).values(3)

    def test_custom_negative_rejected(self):
        with pytest.raises(ConfigError):
            DeformationFn.custom([1.0, -0.5, 1.0]).values(3)
