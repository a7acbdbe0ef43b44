"""Model parameters and per-cell coefficients.

Two identical two-level atoms couple to a two-mode quantized field inside a
Kerr medium with Stark shifts.  The coupling is modulated in time,
g(t) = lam * cos(epsilon * t + phi), and may be intensity dependent through a
deformation function f applied to the ladder operators (R = a f(N)).

All rate-like quantities (lam, epsilon, delta, beta*, chi*) share one inverse
time unit; coherent amplitudes and atomic superposition weights are
dimensionless.  Everything in this module is pure and reentrant, so grid
evaluation can be mapped over (n1, n2) cells in any order.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError

TRUNCATION_FLOOR = 4     # the gg branch reaches n+2, so keep headroom
TRUNCATION_CAP = 512

GAMMA_NORM_TOL = 1e-12


@dataclass(frozen=True)
class DeformationFn:
    """Intensity-dependence of the atom-field coupling.

    kind "linear" is the undeformed coupling f(n) = 1, kind "sqrt" is
    f(n) = sqrt(n), and kind "custom" tabulates nonnegative values
    f(0), f(1), ... explicitly.  Custom tables must cover the truncated grid
    plus the two extra levels the gg branch reaches.
    """

    kind: str = "linear"
    table: tuple = None

    def values(self, count: int) -> np.ndarray:
        """f(0), ..., f(count-1) as a float array."""
        if self.kind == "linear":
            return np.ones(count)
        if self.kind == "sqrt":
            return np.sqrt(np.arange(count, dtype=float))
        if self.kind == "custom":
            if self.table is None or len(self.table) < count:
                raise ConfigError(
                    f"custom deformation table has {0 if self.table is None else len(self.table)} "
                    f"entries but the grid needs {count}",
                    "params.deformation",
                )
            vals = np.asarray(self.table[:count], dtype=float)
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ConfigError("custom deformation values must be finite and >= 0",
                                  "params.deformation")
            return vals
        raise ConfigError(f"unknown deformation kind {self.kind!r}", "params.deformation")

    def label(self) -> str:
        return self.kind

    @classmethod
    def linear(cls):
        return cls(kind="linear")

    @classmethod
    def sqrt_n(cls):
        return cls(kind="sqrt")

    @classmethod
    def custom(cls, values):
        return cls(kind="custom", table=tuple(float(v) for v in values))


@dataclass(frozen=True)
class ModelParams:
    """Every physical constant of the effective model.

    lam        coupling strength (the amplitude of the modulated coupling)
    epsilon    modulation frequency of the coupling
    phi        relative phase of the modulation (radians)
    delta      detuning: atomic transition frequency minus the sum of the two
               mode frequencies (only this combination enters the dynamics)
    beta1/2    Stark coefficients (mode-1 photons shift the ground level,
               mode-2 photons shift the excited level)
    chi1/2     self-Kerr constants of the two modes
    chi12      cross-Kerr constant
    alpha1/2   complex coherent amplitudes of the initial field
    gamma1..4  complex weights of the initial atomic superposition over
               |ee>, |eg>, |ge>, |gg>
    """

    lam: float = 1.0
    epsilon: float = 0.0
    phi: float = 0.0
    delta: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    chi1: float = 0.0
    chi2: float = 0.0
    chi12: float = 0.0
    alpha1: complex = 1.0 + 0.0j
    alpha2: complex = 1.0 + 0.0j
    gamma1: complex = 1.0 + 0.0j
    gamma2: complex = 0.0j
    gamma3: complex = 0.0j
    gamma4: complex = 0.0j
    deformation: DeformationFn = field(default_factory=DeformationFn.linear)
    t4_convention: str = "corrected"   # or "paper_literal"

    @property
    def gammas(self):
        return (self.gamma1, self.gamma2, self.gamma3, self.gamma4)

    def validate(self):
        rates = dict(lam=self.lam, epsilon=self.epsilon, phi=self.phi, delta=self.delta,
                     beta1=self.beta1, beta2=self.beta2,
                     chi1=self.chi1, chi2=self.chi2, chi12=self.chi12)
        for name, value in rates.items():
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value!r}", f"params.{name}")
        if self.lam < 0:
            raise ConfigError(f"coupling strength must be >= 0, got {self.lam}", "params.lambda")
        for name in ("alpha1", "alpha2", "gamma1", "gamma2", "gamma3", "gamma4"):
            z = complex(getattr(self, name))
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise ConfigError(f"{name} must be finite, got {z!r}", f"params.{name}")
        total = sum(abs(complex(g)) ** 2 for g in self.gammas)
        if abs(total - 1.0) > GAMMA_NORM_TOL:
            raise ConfigError(
                f"atomic weights must satisfy sum |gamma_k|^2 = 1 within {GAMMA_NORM_TOL:g}; "
                f"got {total!r}",
                "params.gamma",
            )
        if self.t4_convention not in ("corrected", "paper_literal"):
            raise ConfigError(f"unknown t4_convention {self.t4_convention!r}",
                              "params.t4_convention")
        return self

    def with_lam(self, lam: float) -> "ModelParams":
        return replace(self, lam=float(lam))


@dataclass(frozen=True)
class FockTruncation:
    """Per-mode Fock cutoff.  Cells run over 0 <= n1, n2 <= n_max; the state
    itself reaches photon numbers up to n_max + 2 through the shifted branches."""

    n_max: int
    tail_eps: float = 1e-12


def coherent_weight(alpha: complex, n: int) -> complex:
    """Coherent-state Fock weight e^{-|alpha|^2/2} alpha^n / sqrt(n!).

    Evaluated in log space so large n and |alpha| up to ~10 stay finite.
    """
    if n < 0:
        raise ValueError(f"Fock index must be >= 0, got {n}")
    alpha = complex(alpha)
    if alpha == 0:
        return 1.0 + 0.0j if n == 0 else 0.0j
    mag = math.exp(-0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * math.lgamma(n + 1))
    return mag * cmath.exp(1j * n * cmath.phase(alpha))


def coherent_weights(alpha: complex, count: int) -> np.ndarray:
    """Vector of coherent weights q_0 .. q_{count-1}."""
    alpha = complex(alpha)
    n = np.arange(count)
    if alpha == 0:
        out = np.zeros(count, dtype=complex)
        out[0] = 1.0
        return out
    logmag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1.0)
    return np.exp(logmag) * np.exp(1j * n * cmath.phase(alpha))


def poisson_survival(mu: float, n_top: int) -> np.ndarray:
    """S[n] = P(N > n) for N ~ Poisson(mu), n = 0..n_top.

    Summed term by term from the large-n side, so there is no catastrophic
    cancellation even for survival probabilities near 1e-16.
    """
    if mu == 0:
        return np.zeros(n_top + 1)
    k_hi = int(max(n_top + 1, math.ceil(mu + 40.0 * math.sqrt(mu) + 80.0)))
    k = np.arange(n_top + 1, k_hi + 1)
    tail_terms = np.exp(-mu + k * math.log(mu) - gammaln(k + 1.0))
    surv = np.empty(n_top + 1)
    surv[n_top] = tail_terms.sum()
    # walk down: S[n-1] = S[n] + p_n
    for n in range(n_top, 0, -1):
        surv[n - 1] = surv[n] + math.exp(-mu + n * math.log(mu) - math.lgamma(n + 1))
    return surv


def choose_truncation(alpha1: complex, alpha2: complex, tail_eps: float,
                      cap: int = TRUNCATION_CAP) -> FockTruncation:
    """Smallest n_max with both modes' coherent tails below tail_eps.

    The cutoff never drops below TRUNCATION_FLOOR so the n+2 shifts of the
    ansatz always fit, and raises if tail_eps would push past the hard cap.
    """
    if not (0.0 < tail_eps < 1.0):
        raise ConfigError(f"tail_eps must lie in (0, 1), got {tail_eps}", "truncation.tail_eps")
    mus = (abs(complex(alpha1)) ** 2, abs(complex(alpha2)) ** 2)
    n_max = TRUNCATION_FLOOR
    for mu in mus:
        surv = poisson_survival(mu, cap)
        idx = np.nonzero(surv < tail_eps)[0]
        if idx.size == 0 or idx[0] > cap:
            raise ConfigError(
                f"tail_eps={tail_eps:g} needs a Fock cutoff beyond the cap {cap}",
                "truncation.tail_eps",
            )
        n_max = max(n_max, int(idx[0]))
    return FockTruncation(n_max=n_max, tail_eps=tail_eps)


def resolve_truncation(params: ModelParams, tail_eps: float = 1e-12,
                       n_max: int = None) -> FockTruncation:
    """Explicit n_max wins; otherwise pick the cutoff from the coherent tails."""
    if n_max is not None:
        if n_max < TRUNCATION_FLOOR:
            raise ConfigError(f"n_max must be >= {TRUNCATION_FLOOR}", "truncation.n_max")
        return FockTruncation(n_max=int(n_max), tail_eps=tail_eps)
    return choose_truncation(params.alpha1, params.alpha2, tail_eps)


@dataclass(frozen=True)
class CoherentWeights:
    """Initial Fock weights of the two field modes on the cell grid."""

    q1: np.ndarray
    q2: np.ndarray


def field_weights(params: ModelParams, trunc: FockTruncation) -> CoherentWeights:
    count = trunc.n_max + 1
    return CoherentWeights(q1=coherent_weights(params.alpha1, count),
                           q2=coherent_weights(params.alpha2, count))


@dataclass(frozen=True)
class BranchCoefficients:
    """Scalar coefficients of one (n1, n2) cell of the three-branch system.

    v1, v2 are the ladder matrix elements coupling ee<->eg/ge and
    eg/ge<->gg; t1, t2, t4 are the diagonal phase rates of the three
    branches (detuning plus Stark plus Kerr contributions).
    """

    n1: int
    n2: int
    v1: float
    v2: float
    t1: float
    t2: float
    t4: float


def branch_coefficients(params: ModelParams, n1: int, n2: int) -> BranchCoefficients:
    """Per-cell couplings and phase rates.

    The mode-2 self-Kerr term of t4 follows params.t4_convention: "corrected"
    uses chi2*(n2+1)*(n2+2), which is what the effective Hamiltonian gives;
    "paper_literal" keeps chi2*(n1+1)*(n2+2) for reproduction of the printed
    coefficient set.  Both agree when chi2 = 0 or n1 = n2.
    """
    if n1 < 0 or n2 < 0:
        raise ValueError(f"cell indices must be >= 0, got ({n1}, {n2})")
    f = params.deformation.values(max(n1, n2) + 3)
    v1 = f[n1 + 1] * f[n2 + 1] * math.sqrt((n1 + 1) * (n2 + 1))
    v2 = f[n1 + 2] * f[n2 + 2] * math.sqrt((n1 + 2) * (n2 + 2))
    t1 = (params.delta + 2.0 * params.beta2 * n2 + params.chi1 * n1 * (n1 - 1)
          + params.chi2 * n2 * (n2 - 1) + params.chi12 * n1 * n2)
    t2 = (params.beta1 * (n1 + 1) + params.beta2 * (n2 + 1)
          + params.chi1 * n1 * (n1 + 1) + params.chi2 * n2 * (n2 + 1)
          + params.chi12 * (n1 + 1) * (n2 + 1))
    if params.t4_convention == "paper_literal":
        kerr2 = params.chi2 * (n1 + 1) * (n2 + 2)
    else:
        kerr2 = params.chi2 * (n2 + 1) * (n2 + 2)
    t4 = (-params.delta + 2.0 * params.beta1 * (n1 + 2)
          + params.chi1 * (n1 + 1) * (n1 + 2) + kerr2
          + params.chi12 * (n1 + 2) * (n2 + 2))
    return BranchCoefficients(n1=n1, n2=n2, v1=v1, v2=v2, t1=t1, t2=t2, t4=t4)


@dataclass(frozen=True)
class BranchGrid:
    """branch_coefficients evaluated on the full cell grid, as (N, N) arrays
    indexed [n1, n2] with N = n_max + 1."""

    n_max: int
    v1: np.ndarray
    v2: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    t4: np.ndarray


def branch_grid(params: ModelParams, n_max: int) -> BranchGrid:
    f = params.deformation.values(n_max + 3)
    n1 = np.arange(n_max + 1, dtype=float)[:, None]
    n2 = np.arange(n_max + 1, dtype=float)[None, :]
    f1 = f[np.arange(1, n_max + 2)][:, None]
    f2 = f[np.arange(1, n_max + 2)][None, :]
    g1 = f[np.arange(2, n_max + 3)][:, None]
    g2 = f[np.arange(2, n_max + 3)][None, :]
    v1 = f1 * f2 * np.sqrt((n1 + 1) * (n2 + 1))
    v2 = g1 * g2 * np.sqrt((n1 + 2) * (n2 + 2))
    t1 = (params.delta + 2.0 * params.beta2 * n2 + params.chi1 * n1 * (n1 - 1)
          + params.chi2 * n2 * (n2 - 1) + params.chi12 * n1 * n2)
    t2 = (params.beta1 * (n1 + 1) + params.beta2 * (n2 + 1)
          + params.chi1 * n1 * (n1 + 1) + params.chi2 * n2 * (n2 + 1)
          + params.chi12 * (n1 + 1) * (n2 + 1))
    if params.t4_convention == "paper_literal":
        kerr2 = params.chi2 * (n1 + 1) * (n2 + 2)
    else:
        kerr2 = params.chi2 * (n2 + 1) * (n2 + 2)
    t4 = (-params.delta + 2.0 * params.beta1 * (n1 + 2)
          + params.chi1 * (n1 + 1) * (n1 + 2) + kerr2
          + params.chi12 * (n1 + 2) * (n2 + 2))
    t1 = np.broadcast_to(t1, v1.shape).copy()
    t2 = np.broadcast_to(t2, v1.shape).copy()
    t4 = np.broadcast_to(t4, v1.shape).copy()
    return BranchGrid(n_max=n_max, v1=v1, v2=v2, t1=t1, t2=t2, t4=t4)


def slow_gaps(params: ModelParams, bc) -> tuple:
    """Modulation-relative phase gaps a = eps - (t1 - t2), b = eps - (t2 - t4).

    These are the slowly rotating frequencies left after the slow-variable
    transformation; works on scalar BranchCoefficients and BranchGrid alike.
    """
    a = params.epsilon - (bc.t1 - bc.t2)
    b = params.epsilon - (bc.t2 - bc.t4)
    return a, b
