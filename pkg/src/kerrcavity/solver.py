"""Closed-form propagation of the three-branch amplitudes.

Each (n1, n2) cell of the truncated grid evolves independently under a 3x3
generator whose characteristic polynomial is a real cubic
m^3 + K1 m^2 + K2 m + K3.  The roots are taken by the trigonometric formula
(the generator is similar to a Hermitian matrix, so all roots are real),
branch weights follow from the initial conditions, and the amplitudes at any
time are three complex exponentials per cell.

Cells are independent, so everything here is vectorized over the grid;
re-evaluating any subset reproduces identical values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ComplexRootsError, ConfigError, DegenerateRootsError, LambdaZeroError
from .model import (BranchCoefficients, FockTruncation, ModelParams,
                    branch_grid, slow_gaps)

ROOT_SEP_TOL = 1e-8       # relative root-gap floor before refusing a cell
ACOS_EXCESS_TOL = 1e-9    # slack allowed outside [-1, 1] before failing
GAMMA_SYMMETRY_TOL = 1e-12


def _cubic_roots(k1, k2, k3):
    """Real roots of m^3 + k1 m^2 + k2 m + k3, ascending along axis 0.

    Vectorized trigonometric formula with the arccos argument clamped inside
    ACOS_EXCESS_TOL, followed by one Newton step per root on the monic cubic.
    """
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    k3 = np.asarray(k3, dtype=float)
    disc = k1 * k1 - 3.0 * k2
    disc_tol = 1e-9 * np.maximum(1.0, np.maximum(k1 * k1, np.abs(k2)))
    if np.any(disc < -disc_tol):
        worst = float(np.min(disc))
        raise ComplexRootsError(
            f"discriminant K1^2 - 3 K2 = {worst:g} is negative beyond tolerance")
    disc = np.maximum(disc, 0.0)
    num = 4.5 * k1 * k2 - k1 ** 3 - 13.5 * k3
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = num / np.power(disc, 1.5)
    arg = np.where(disc > 0.0, arg, 0.0)
    excess = np.max(np.abs(arg)) - 1.0
    if excess > ACOS_EXCESS_TOL:
        raise ComplexRootsError(
            f"arccos argument leaves [-1, 1] by {excess:g} (> {ACOS_EXCESS_TOL:g})")
    arg = np.clip(arg, -1.0, 1.0)
    phase = np.arccos(arg) / 3.0
    shift = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0]).reshape(
        (3,) + (1,) * k1.ndim)
    m = -k1 / 3.0 + (2.0 / 3.0) * np.sqrt(disc) * np.cos(phase + shift)
    m = np.sort(m, axis=0)
    # Newton polish per root (skipped where the derivative vanishes); two
    # steps so even poorly conditioned trigonometric seeds converge to the
    # evaluation-noise floor
    for _ in range(2):
        p = ((m + k1) * m + k2) * m + k3
        dp = (3.0 * m + 2.0 * k1) * m + k2
        safe = np.abs(dp) > 1e-300
        m = np.where(safe, m - p / np.where(safe, dp, 1.0), m)
    return np.sort(m, axis=0)


def _root_scale(m):
    return np.maximum(1.0, np.max(np.abs(m), axis=0))


def _min_gap(m):
    return np.minimum(m[1] - m[0], m[2] - m[1])


def solve_cubic(k1: float, k2: float, k3: float):
    """Three real roots of m^3 + k1 m^2 + k2 m + k3 = 0, ascending.

    Raises ComplexRootsError when the coefficients do not admit three real
    roots (beyond a small clamping tolerance) and DegenerateRootsError when
    the minimum pairwise gap falls below ROOT_SEP_TOL times the root scale.
    """
    m = _cubic_roots(np.float64(k1), np.float64(k2), np.float64(k3))
    scale = float(_root_scale(m))
    gap = float(_min_gap(m))
    if gap < ROOT_SEP_TOL * scale:
        raise DegenerateRootsError(
            f"root separation {gap:g} below {ROOT_SEP_TOL:g} * scale {scale:g}")
    return float(m[0]), float(m[1]), float(m[2])


@dataclass(frozen=True)
class CubicData:
    """Characteristic-cubic data of one cell: gap rates a, b, monic
    coefficients k1..k3, and the sorted real roots."""

    a: float
    b: float
    k1: float
    k2: float
    k3: float
    m1: float
    m2: float
    m3: float

    @property
    def roots(self):
        return (self.m1, self.m2, self.m3)


def cubic_coefficients(params: ModelParams, bc):
    """(a, b, K1, K2, K3) from the cell coefficients; array-friendly."""
    a, b = slow_gaps(params, bc)
    lam2 = params.lam ** 2
    k1 = -(a + 2.0 * b)
    k2 = b * (a + b) - 0.5 * lam2 * (bc.v1 ** 2 + bc.v2 ** 2)
    k3 = 0.5 * lam2 * (a + b) * bc.v2 ** 2
    return a, b, k1, k2, k3


def cubic_data(params: ModelParams, bc: BranchCoefficients) -> CubicData:
    a, b, k1, k2, k3 = cubic_coefficients(params, bc)
    m1, m2, m3 = solve_cubic(k1, k2, k3)
    return CubicData(a=a, b=b, k1=k1, k2=k2, k3=k3, m1=m1, m2=m2, m3=m3)


@dataclass(frozen=True)
class BranchWeights:
    """Spectral weights a_k of one cell (a1 + a2 + a3 equals gamma4)."""

    a1: complex
    a2: complex
    a3: complex

    @property
    def values(self):
        return (self.a1, self.a2, self.a3)


def _weights_from_roots(m, b, lam, v1, v2, phi, g1, g2, g4):
    """Spectral weights from the sorted roots; m has shape (3, ...).

    Solves the Vandermonde system fixed by the initial amplitudes
    (gamma1, gamma2, gamma4); the closed form reproduces them exactly at
    t = 0 for any phi because the e^{2i phi} / e^{i phi} factors here cancel
    the e^{-2i phi} / e^{-i phi} factors of the amplitude expressions.
    """
    e1 = np.exp(1j * phi)
    lead = 0.5 * lam ** 2 * v1 * v2 * e1 ** 2 * g1
    quad = 0.5 * lam ** 2 * v2 ** 2 * g4
    out = np.empty((3,) + np.broadcast(m[0], b).shape, dtype=complex)
    for k in range(3):
        p, q = ((1, 2), (0, 2), (0, 1))[k]
        num = lead + lam * v2 * (-b + m[p] + m[q]) * e1 * g2 + (quad + m[p] * m[q] * g4)
        out[k] = num / ((m[k] - m[p]) * (m[k] - m[q]))
    return out


def branch_weights(cubic: CubicData, params: ModelParams,
                   bc: BranchCoefficients) -> BranchWeights:
    m = np.array(cubic.roots).reshape(3)
    a = _weights_from_roots(m, cubic.b, params.lam, bc.v1, bc.v2, params.phi,
                            complex(params.gamma1), complex(params.gamma2),
                            complex(params.gamma4))
    return BranchWeights(a1=complex(a[0]), a2=complex(a[1]), a3=complex(a[2]))


@dataclass(frozen=True)
class AmplitudeSet:
    """Amplitudes of the three distinct branches on the cell grid at time t.

    a1[i, j] multiplies |e, e, i, j>, a2[i, j] multiplies both
    |e, g, i+1, j+1> and |g, e, i+1, j+1> (the middle branches are identical
    by construction), and a4[i, j] multiplies |g, g, i+2, j+2>.  The state is
    the q-weighted sum over cells, so its squared norm is
    sum |q1_i q2_j|^2 (|a1|^2 + 2 |a2|^2 + |a4|^2), which the evolution
    conserves; it equals 1 exactly when the atomic weights satisfy
    |gamma1|^2 + 2 |gamma2|^2 + |gamma4|^2 = 1 (i.e. gamma3 = gamma2 under
    the usual normalization).
    """

    t: float
    a1: np.ndarray
    a2: np.ndarray
    a4: np.ndarray
    n_max: int

    def weighted_norm(self, weights) -> float:
        w = np.abs(np.outer(weights.q1, weights.q2)) ** 2
        dens = (np.abs(self.a1) ** 2 + 2.0 * np.abs(self.a2) ** 2
                + np.abs(self.a4) ** 2)
        return float(np.sum(w * dens))


def middle_branch_symmetric(params: ModelParams) -> bool:
    """Whether the declared eg and ge weights coincide.

    The three-branch evolution identifies the two middle branches and takes
    its initial data from (gamma1, gamma2, gamma4); gamma3 never enters.
    When gamma3 != gamma2 the represented state is therefore not the declared
    atomic superposition: both middle branches start from gamma2 and the
    weighted norm is |gamma1|^2 + 2 |gamma2|^2 + |gamma4|^2 instead of 1.
    The bundled presets use exactly this convention (gamma3 = gamma4 = 0),
    reproducing the reference scans as computed, so asymmetric weights are
    accepted; the validation report flags them as informational.
    """
    return abs(complex(params.gamma2) - complex(params.gamma3)) <= GAMMA_SYMMETRY_TOL


def branch_initial_norm(params: ModelParams) -> float:
    """Conserved weighted norm of the branch evolution at t = 0."""
    return (abs(complex(params.gamma1)) ** 2 + 2.0 * abs(complex(params.gamma2)) ** 2
            + abs(complex(params.gamma4)) ** 2)


class ClosedFormEvolution:
    """Spectral data of the closed-form propagation over the whole grid.

    Construction factors out everything time independent: cell coefficients,
    cubic roots, and branch weights.  amplitudes(t) then costs three complex
    exponentials per cell, which makes time sweeps cheap.
    """

    def __init__(self, params: ModelParams, trunc: FockTruncation):
        params.validate()
        if params.lam < 1e-300:
            raise LambdaZeroError(
                "closed form divides by the coupling strength; use the "
                "integration path for lam = 0")
        self.params = params
        self.trunc = trunc
        grid = branch_grid(params, trunc.n_max)
        self.grid = grid
        bad = np.argwhere((grid.v1 <= 0.0) | (grid.v2 <= 0.0))
        if bad.size:
            raise ConfigError(
                "deformation gives vanishing ladder coupling at cells "
                f"{[tuple(int(x) for x in c) for c in bad[:6]]}; the closed form "
                "divides by v1 v2",
                "params.deformation",
            )
        a, b, k1, k2, k3 = cubic_coefficients(params, grid)
        self.a, self.b = a, b
        m = _cubic_roots(k1, k2, k3)
        scale = _root_scale(m)
        gaps = _min_gap(m)
        bad = np.argwhere(gaps < ROOT_SEP_TOL * scale)
        if bad.size:
            cells = [tuple(int(x) for x in c) for c in bad]
            raise DegenerateRootsError(
                f"degenerate cubic roots at cells {cells[:6]}"
                + ("..." if len(cells) > 6 else ""),
                cells=cells,
            )
        self.roots = m
        lam = params.lam
        ak = _weights_from_roots(m, b, lam, grid.v1, grid.v2, params.phi,
                                 complex(params.gamma1), complex(params.gamma2),
                                 complex(params.gamma4))
        self.weights = ak
        # static spectral coefficients of the three amplitude expressions
        self._w1 = ak * (2.0 * m ** 2 - 2.0 * b * m - lam ** 2 * grid.v2 ** 2) \
            / (lam ** 2 * grid.v1 * grid.v2)
        self._w2 = -ak * m / (lam * grid.v2)
        self._w4 = ak
        # branch phase rates: exponents are (m_k - rate) * t + const phase
        self._rate1 = 2.0 * params.epsilon + grid.t4
        self._rate2 = params.epsilon + grid.t4
        self._rate4 = grid.t4
        self._ph1 = np.exp(-2j * params.phi)
        self._ph2 = np.exp(-1j * params.phi)

    @property
    def n_max(self):
        return self.trunc.n_max

    def amplitudes(self, t: float) -> AmplitudeSet:
        e = np.exp(1j * self.roots * t)
        a1 = (self._w1 * e).sum(axis=0) * np.exp(-1j * self._rate1 * t) * self._ph1
        a2 = (self._w2 * e).sum(axis=0) * np.exp(-1j * self._rate2 * t) * self._ph2
        a4 = (self._w4 * e).sum(axis=0) * np.exp(-1j * self._rate4 * t)
        return AmplitudeSet(t=float(t), a1=a1, a2=a2, a4=a4, n_max=self.trunc.n_max)

    def max_frequency(self) -> float:
        """Largest oscillation rate appearing in any branch amplitude
        (exponents are m_k - rate_branch); useful for step selection."""
        rates = np.stack([self._rate1, self._rate2, self._rate4])
        freq = np.abs(self.roots[:, None, ...] - rates[None, :, ...])
        return float(np.max(freq))


def amplitudes_at(params: ModelParams, trunc: FockTruncation, t: float) -> AmplitudeSet:
    """Closed-form amplitudes of every cell at time t (one-shot convenience;
    build a ClosedFormEvolution directly when sweeping many times)."""
    return ClosedFormEvolution(params, trunc).amplitudes(t)
