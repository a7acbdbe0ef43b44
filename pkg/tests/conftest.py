import math

import numpy as np
import pytest

from kerrcavity import DeformationFn, ModelParams, choose_truncation

ROOT3 = 1.0 / math.sqrt(3.0)


@pytest.fixture
def kerr_params():
    """Normalized equal-weight superposition in the Kerr regime (the fig3
    parameter family with symmetric middle weights, so everything is
    norm-1 and the full invariant battery applies)."""
    return ModelParams(lam=1.0, epsilon=10.0, phi=0.0, delta=10.0,
                       chi1=1.0, chi2=1.0,
                       gamma1=ROOT3, gamma2=ROOT3, gamma3=ROOT3, gamma4=0.0j)


@pytest.fixture
def linear_params():
    """No Kerr, no Stark: resonantly modulated coupling."""
    return ModelParams(lam=1.0, epsilon=10.0, delta=10.0,
                       gamma1=ROOT3, gamma2=ROOT3, gamma3=ROOT3, gamma4=0.0j)


@pytest.fixture
def excited_params():
    """Both atoms excited, coherent field: the t = 0 identity regime."""
    return ModelParams(lam=1.0, epsilon=10.0, delta=10.0, gamma1=1.0 + 0.0j)


@pytest.fixture
def small_trunc():
    return choose_truncation(1.0, 1.0, 1e-12)


def random_symmetric_params(rng, alpha_max=2.0, rate_max=30.0):
    """Random physical draw with gamma2 = gamma3 and unit weighted norm."""
    g = rng.normal(size=3) + 1j * rng.normal(size=3)
    g = g / math.sqrt(abs(g[0]) ** 2 + 2.0 * abs(g[1]) ** 2 + abs(g[2]) ** 2)
    alpha = rng.uniform(0.2, alpha_max, size=2) * np.exp(2j * np.pi * rng.uniform(size=2))
    kind = ("linear", "sqrt")[rng.integers(2)]
    return ModelParams(
        lam=float(rng.uniform(0.2, min(3.0, rate_max))),
        epsilon=float(rng.uniform(0.0, rate_max)),
        phi=float(rng.uniform(0.0, 2.0 * np.pi)),
        delta=float(rng.uniform(-rate_max, rate_max)),
        beta1=float(rng.uniform(0.0, 2.0)),
        beta2=float(rng.uniform(0.0, 2.0)),
        chi1=float(rng.uniform(0.0, 5.0)),
        chi2=float(rng.uniform(0.0, 5.0)),
        chi12=float(rng.uniform(0.0, 5.0)),
        alpha1=complex(alpha[0]), alpha2=complex(alpha[1]),
        gamma1=complex(g[0]), gamma2=complex(g[1]), gamma3=complex(g[1]),
        gamma4=complex(g[2]),
        deformation=DeformationFn(kind=kind),
    )
