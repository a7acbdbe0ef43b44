"""Field statistics and atomic entanglement measures.

Everything is computed from the branch-resolved field coefficients: the
state splits into four atomic sectors (ee, eg, ge, gg) whose field parts are
mutually incoherent after tracing the atoms out, so any field expectation is
the weight-2-for-the-middle sum of per-sector expectations.  The reduced
atomic density matrix is the complementary trace over the field.

Conventions: the moment-based quantities (field_moment, joint_pnd, mandel_q,
g2_zero, quadrature_squeezing) are linear in |psi><psi| exactly as their
defining sums read, so feeding an unnormalized state scales them by its
squared norm (the bundled presets rely on this, see sweep.figure_preset).
atom_density divides by the squared norm because a density matrix has unit
trace by definition; for normalized states the two conventions coincide.

All functions are pure in the AmplitudeSet and weights, so sweep points can
be evaluated in any order or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ExponentCapError, ZeroMeanPhotonNumberError
from .model import CoherentWeights
from .solver import AmplitudeSet

EXPONENT_CAP = 4


def branch_fields(amps: AmplitudeSet, weights: CoherentWeights):
    """Weighted field coefficient arrays [(w, psi)] of the distinct sectors.

    psi[k1, k2] is the coefficient of Fock state |k1, k2> within one atomic
    sector; the middle sector carries weight 2 because the eg and ge branches
    are identical.  Arrays extend to k = n_max + 2 where the gg branch ends.
    """
    n = amps.n_max + 1
    k_levels = amps.n_max + 3
    qq = np.outer(weights.q1, weights.q2)
    psi1 = np.zeros((k_levels, k_levels), dtype=complex)
    psi2 = np.zeros((k_levels, k_levels), dtype=complex)
    psi4 = np.zeros((k_levels, k_levels), dtype=complex)
    psi1[:n, :n] = qq * amps.a1
    psi2[1:n + 1, 1:n + 1] = qq * amps.a2
    psi4[2:n + 2, 2:n + 2] = qq * amps.a4
    return [(1.0, psi1), (2.0, psi2), (1.0, psi4)]


def state_fields(state):
    """The same representation for a full TruncatedState: four sectors of
    weight 1 each."""
    return [(1.0, state.data[s]) for s in range(4)]


def _ladder_factors(k_levels, p, q):
    """sqrt(k! (k+p-q)!) / (k-q)! for k = 0..k_levels-1, zero below k = q."""
    k = np.arange(k_levels, dtype=float)
    out = np.zeros(k_levels)
    valid = k >= q
    kk = k[valid]
    out[valid] = np.exp(0.5 * (gammaln(kk + 1.0) + gammaln(kk + p - q + 1.0))
                        - gammaln(kk - q + 1.0))
    return out


def _fields_moment(fields, p1, q1, p2, q2):
    k_levels = fields[0][1].shape[0]
    d1, d2 = p1 - q1, p2 - q2
    l1 = _ladder_factors(k_levels, p1, q1)
    l2 = _ladder_factors(k_levels, p2, q2)
    lo1, hi1 = q1, k_levels - max(d1, 0)
    lo2, hi2 = q2, k_levels - max(d2, 0)
    if lo1 >= hi1 or lo2 >= hi2:
        return 0.0j
    lad = np.outer(l1[lo1:hi1], l2[lo2:hi2])
    total = 0.0j
    for w, psi in fields:
        bra = np.conj(psi[lo1 + d1:hi1 + d1, lo2 + d2:hi2 + d2])
        ket = psi[lo1:hi1, lo2:hi2]
        total += w * np.sum(bra * ket * lad)
    return complex(total)


@dataclass(frozen=True)
class FieldMoment:
    """A generalized field moment <a1+^p1 a1^q1 a2+^p2 a2^q2>."""

    p1: int
    q1: int
    p2: int
    q2: int
    value: complex


def field_moment(amps: AmplitudeSet, weights: CoherentWeights,
                 p1: int, q1: int, p2: int, q2: int,
                 cap: int = EXPONENT_CAP) -> complex:
    """Normal-ordered field moment <a1+^p1 a1^q1 a2+^p2 a2^q2>.

    Computed by direct partial-trace summation over the atomic sectors.  The
    per-mode exponents generalize the equal-exponent case (p1 = p2, q1 = q2);
    the extension is the unique linear one consistent with the state and is
    needed for single-mode quadrature moments like <a1> or <a1^2>.
    """
    for e in (p1, q1, p2, q2):
        if e < 0:
            raise ValueError("moment exponents must be >= 0")
        if e > cap:
            raise ExponentCapError(f"moment exponent {e} exceeds cap {cap}")
    return _fields_moment(branch_fields(amps, weights), p1, q1, p2, q2)


@dataclass(frozen=True)
class JointPND:
    """Joint photon number distribution P(n1, n2) at a fixed time."""

    p: np.ndarray
    t: float

    def marginal(self, mode: int) -> np.ndarray:
        return self.p.sum(axis=1 if mode == 1 else 0)

    def total(self) -> float:
        return float(self.p.sum())


def _fields_pnd(fields, t):
    p = np.zeros(fields[0][1].shape)
    for w, psi in fields:
        p += w * np.abs(psi) ** 2
    return JointPND(p=p, t=t)


def joint_pnd(amps: AmplitudeSet, weights: CoherentWeights) -> JointPND:
    """P(n1, n2): the shifted branches contribute
    |q_{n1} q_{n2} A1|^2 + 2 |q_{n1-1} q_{n2-1} A2|^2 + |q_{n1-2} q_{n2-2} A4|^2,
    with out-of-range indices contributing zero."""
    return _fields_pnd(branch_fields(amps, weights), amps.t)


def _moments_from_marginal(marg):
    k = np.arange(marg.size, dtype=float)
    mean = float(np.dot(k, marg))
    second = float(np.dot(k * k, marg))
    return mean, second


def _mandel_from_pnd(pnd: JointPND, mode):
    if mode == "total":
        k_levels = pnd.p.shape[0]
        tot = np.zeros(2 * k_levels - 1)
        flipped = np.fliplr(pnd.p)
        for s in range(tot.size):
            tot[s] = np.trace(flipped, offset=k_levels - 1 - s)
        marg = tot
    elif mode in (1, 2):
        marg = pnd.marginal(mode)
    else:
        raise ValueError(f"mode must be 1, 2 or 'total', got {mode!r}")
    mean, second = _moments_from_marginal(marg)
    if mean <= 0.0:
        raise ZeroMeanPhotonNumberError("Mandel Q undefined for <N> = 0")
    return (second - mean ** 2) / mean - 1.0


def mandel_q(amps: AmplitudeSet, weights: CoherentWeights, mode=1) -> float:
    """Mandel Q of one mode's photon number distribution.

    Zero for Poissonian statistics, negative for sub-Poissonian (nonclassical)
    light.  mode selects the marginal; mode="total" uses the distribution of
    n1 + n2 instead, a combined-mode variant exposed for exploration only and
    not part of the standard single-mode statistics.
    """
    return _mandel_from_pnd(joint_pnd(amps, weights), mode)


def g2_zero(amps: AmplitudeSet, weights: CoherentWeights, mode: int = 1) -> float:
    """Equal-time second-order correlation <a+^2 a^2> / <a+ a>^2 of one mode;
    values below one signal photon antibunching."""
    fields = branch_fields(amps, weights)
    if mode == 1:
        n = _fields_moment(fields, 1, 1, 0, 0).real
        n2 = _fields_moment(fields, 2, 2, 0, 0).real
    elif mode == 2:
        n = _fields_moment(fields, 0, 0, 1, 1).real
        n2 = _fields_moment(fields, 0, 0, 2, 2).real
    else:
        raise ValueError(f"mode must be 1 or 2, got {mode!r}")
    if n <= 0.0:
        raise ZeroMeanPhotonNumberError("g2(0) undefined for <a+ a> = 0")
    return n2 / n ** 2


_SQUEEZE_TARGETS = ("mode1", "mode2", "pair")


def quadrature_squeezing(amps: AmplitudeSet, weights: CoherentWeights,
                         target: str = "mode1"):
    """(s_x, s_p) with s = 4 (Delta quadrature)^2 - 1; negative values flag
    squeezing below the coherent-state noise level.

    target "mode1"/"mode2" uses that mode's ladder operator; "pair" replaces
    a by the two-mode product a1 a2 (and a+ a by a1+ a2+ a1 a2).
    """
    fields = branch_fields(amps, weights)
    if target == "mode1":
        mean_a = _fields_moment(fields, 0, 1, 0, 0)
        mean_aa = _fields_moment(fields, 0, 2, 0, 0)
        mean_n = _fields_moment(fields, 1, 1, 0, 0).real
    elif target == "mode2":
        mean_a = _fields_moment(fields, 0, 0, 0, 1)
        mean_aa = _fields_moment(fields, 0, 0, 0, 2)
        mean_n = _fields_moment(fields, 0, 0, 1, 1).real
    elif target == "pair":
        mean_a = _fields_moment(fields, 0, 1, 0, 1)
        mean_aa = _fields_moment(fields, 0, 2, 0, 2)
        mean_n = _fields_moment(fields, 1, 1, 1, 1).real
    else:
        raise ValueError(f"target must be one of {_SQUEEZE_TARGETS}, got {target!r}")
    coherences = 2.0 * mean_aa.real - 2.0 * (mean_a ** 2).real
    common = 2.0 * mean_n - 2.0 * abs(mean_a) ** 2
    return float(common + coherences), float(common - coherences)


ATOM_BASIS = ("ee", "eg", "ge", "gg")


@dataclass(frozen=True)
class AtomDensity:
    """Reduced two-atom density matrix in the basis |ee>, |eg>, |ge>, |gg>."""

    rho: np.ndarray
    t: float

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))))


def atom_density(amps: AmplitudeSet, weights: CoherentWeights) -> AtomDensity:
    """Partial trace over the field: rho_ij ~ sum_k psi_i(k) psi_j(k)*, where
    psi_i is sector i's field coefficient array (sector field offsets 0, +1,
    +1, +2 are already baked into those arrays), normalized to unit trace.

    The identical middle branches force rho_22 = rho_33 = rho_23,
    rho_12 = rho_13 and rho_24 = rho_34.
    """
    fields = branch_fields(amps, weights)
    psi1, psi2, psi4 = (f[1] for f in fields)
    rho = np.empty((4, 4), dtype=complex)
    r11 = np.vdot(psi1, psi1)
    r22 = np.vdot(psi2, psi2)
    r44 = np.vdot(psi4, psi4)
    r12 = np.sum(psi1 * np.conj(psi2))
    r14 = np.sum(psi1 * np.conj(psi4))
    r24 = np.sum(psi2 * np.conj(psi4))
    rho[0] = (r11, r12, r12, r14)
    rho[1] = (np.conj(r12), r22, r22, r24)
    rho[2] = (np.conj(r12), r22, r22, r24)
    rho[3] = (np.conj(r14), np.conj(r24), np.conj(r24), r44)
    total = np.trace(rho).real
    if total <= 0.0:
        raise ValueError("cannot normalize the density matrix of a zero state")
    return AtomDensity(rho=rho / total, t=amps.t)


def atom_density_from_state(state) -> AtomDensity:
    data = state.data.reshape(4, -1)
    rho = data @ data.conj().T
    total = np.trace(rho).real
    if total <= 0.0:
        raise ValueError("cannot normalize the density matrix of a zero state")
    return AtomDensity(rho=rho / total, t=state.t)


def linear_entropy(rho: AtomDensity) -> float:
    """1 - Tr(rho^2); zero for a pure state, at most 1 - 1/4 = 0.75 for any
    two-atom (dimension-4) state."""
    return float(1.0 - np.sum(np.abs(rho.rho) ** 2))
