"""Independent numerical propagation at three fidelity levels.

These integrators validate the closed form and quantify the rotating-wave
error.  All three use the classical fixed-step fourth-order scheme so that
convergence studies and regression files are deterministic:

* integrate_rwa      -- slow-variable system with only the slowly rotating
                        exponentials kept (the system the closed form solves)
* integrate_pre_rwa  -- same system with the rapidly rotating exponentials
                        retained as well
* integrate_full     -- Schroedinger propagation of the full effective
                        Hamiltonian on the truncated atom x atom x field space

The slow-variable integrators treat every (n1, n2) cell as an independent
three-component ODE and are vectorized across cells; integrate_full is a
single sparse matrix propagation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import StepTooLargeError, TruncationLeakError
from .model import (CoherentWeights, FockTruncation, ModelParams, branch_grid,
                    coherent_weights, slow_gaps)
from .solver import AmplitudeSet

try:
    import numba as _numba
except ImportError:                      # pragma: no cover - numba is optional
    _numba = None

DEFAULT_STEP = 1e-3
NORM_DRIFT_TOL = 1e-6
GUARD_LEAK_TOL = 1e-8


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("time grid must be a non-empty 1-D array")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing and start at t >= 0")
    return times


def _substeps(dt, step):
    return max(1, int(math.ceil(dt / step - 1e-12)))


@dataclass
class CTrajectory:
    """Per-cell time series of the slow amplitudes (C1, C2, C4).

    c has shape (nt, 3, M) over the flattened cell selection; cell_index
    holds the (n1, n2) pair of each flat slot.  amplitude_arrays applies the
    branch phases, turning the slow variables back into (A1, A2, A4).
    """

    times: np.ndarray
    c: np.ndarray
    cell_index: np.ndarray
    n_max: int
    step: float
    scheme: str
    t1: np.ndarray
    t2: np.ndarray
    t4: np.ndarray

    @property
    def full_grid(self) -> bool:
        return self.c.shape[2] == (self.n_max + 1) ** 2

    def amplitude_arrays(self, i: int):
        """(A1, A2, A4) flat arrays at output index i."""
        t = self.times[i]
        a1 = self.c[i, 0] * np.exp(-1j * self.t1 * t)
        a2 = self.c[i, 1] * np.exp(-1j * self.t2 * t)
        a4 = self.c[i, 2] * np.exp(-1j * self.t4 * t)
        return a1, a2, a4

    def amplitude_set(self, i: int) -> AmplitudeSet:
        if not self.full_grid:
            raise ValueError("amplitude_set needs a full-grid trajectory")
        n = self.n_max + 1
        a1, a2, a4 = self.amplitude_arrays(i)
        return AmplitudeSet(t=float(self.times[i]), a1=a1.reshape(n, n),
                            a2=a2.reshape(n, n), a4=a4.reshape(n, n),
                            n_max=self.n_max)

    def weighted_norms(self, i: int):
        c = self.c[i]
        return (np.abs(c[0]) ** 2 + 2.0 * np.abs(c[1]) ** 2 + np.abs(c[2]) ** 2)


def _cell_selection(trunc, cells):
    n = trunc.n_max + 1
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    if cells is None:
        sel = np.ones(n * n, dtype=bool)
    else:
        sel = np.zeros((n, n), dtype=bool)
        for (i, j) in cells:
            sel[i, j] = True
        sel = sel.ravel()
    return np.stack([ii.ravel()[sel], jj.ravel()[sel]]), sel


def _slow_setup(params, trunc, cells):
    grid = branch_grid(params, trunc.n_max)
    a, b = slow_gaps(params, grid)
    idx, sel = _cell_selection(trunc, cells)
    flat = lambda x: np.broadcast_to(x, grid.v1.shape).ravel()[sel].astype(float)
    return idx, dict(
        v1=flat(grid.v1), v2=flat(grid.v2),
        t1=flat(grid.t1), t2=flat(grid.t2), t4=flat(grid.t4),
        a=flat(a), b=flat(b),
    )


def _advance_numpy(c, t0, h, nsub, a, b, abar, bbar, c1c, c2a, c2b, c4c,
                   phi, keep_fast):
    """One output interval of the slow-variable system, vectorized over cells.

    Phases advance multiplicatively inside the interval (two complex
    multiplies per half step); callers restart them exactly at every output
    time, so no drift accumulates.
    """
    if keep_fast:
        def rhs(y, za, zb, zaf, zbf):
            return np.stack([
                c1c * (zaf + np.conj(za)) * y[1],
                c2a * (za + np.conj(zaf)) * y[0] + c2b * (zbf + np.conj(zb)) * y[2],
                c4c * (zb + np.conj(zbf)) * y[1],
            ])
    else:
        def rhs(y, za, zb, zaf, zbf):
            return np.stack([
                c1c * np.conj(za) * y[1],
                c2a * za * y[0] + c2b * np.conj(zb) * y[2],
                c4c * zb * y[1],
            ])
    za = np.exp(1j * (a * t0 + phi))
    zb = np.exp(1j * (b * t0 + phi))
    zaf = np.exp(1j * (abar * t0 + phi)) if keep_fast else None
    zbf = np.exp(1j * (bbar * t0 + phi)) if keep_fast else None
    wa = np.exp(0.5j * a * h)
    wb = np.exp(0.5j * b * h)
    if keep_fast:
        waf = np.exp(0.5j * abar * h)
        wbf = np.exp(0.5j * bbar * h)
    for _ in range(nsub):
        if keep_fast:
            zam, zbm, zafm, zbfm = za * wa, zb * wb, zaf * waf, zbf * wbf
            zae, zbe, zafe, zbfe = zam * wa, zbm * wb, zafm * waf, zbfm * wbf
        else:
            zam, zbm, zafm, zbfm = za * wa, zb * wb, None, None
            zae, zbe, zafe, zbfe = zam * wa, zbm * wb, None, None
        k1 = rhs(c, za, zb, zaf, zbf)
        k2 = rhs(c + (0.5 * h) * k1, zam, zbm, zafm, zbfm)
        k3 = rhs(c + (0.5 * h) * k2, zam, zbm, zafm, zbfm)
        k4 = rhs(c + h * k3, zae, zbe, zafe, zbfe)
        c = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        za, zb, zaf, zbf = zae, zbe, zafe, zbfe
    return c


if _numba is not None:
    @_numba.njit(cache=True, parallel=True)
    def _advance_kernel(c, t0, h, nsub, a, b, abar, bbar, c1c, c2a, c2b, c4c,
                        phi, keep_fast):   # pragma: no cover - numba mirror
        m = c.shape[1]
        out = np.empty_like(c)
        sixth = h / 6.0
        half = 0.5 * h
        for j in _numba.prange(m):
            y1, y2, y3 = c[0, j], c[1, j], c[2, j]
            za = np.exp(1j * (a[j] * t0 + phi))
            zb = np.exp(1j * (b[j] * t0 + phi))
            zaf = np.exp(1j * (abar[j] * t0 + phi))
            zbf = np.exp(1j * (bbar[j] * t0 + phi))
            wa = np.exp(0.5j * a[j] * h)
            wb = np.exp(0.5j * b[j] * h)
            waf = np.exp(0.5j * abar[j] * h)
            wbf = np.exp(0.5j * bbar[j] * h)
            e1, e2a, e2b, e4 = c1c[j], c2a[j], c2b[j], c4c[j]
            for _ in range(nsub):
                zam, zbm = za * wa, zb * wb
                zae, zbe = zam * wa, zbm * wb
                zafm, zbfm = zaf * waf, zbf * wbf
                zafe, zbfe = zafm * waf, zbfm * wbf
                if keep_fast:
                    p1s, p1e = zaf + np.conj(za), za + np.conj(zaf)
                    p2s, p2e = zbf + np.conj(zb), zb + np.conj(zbf)
                    p1sm, p1em = zafm + np.conj(zam), zam + np.conj(zafm)
                    p2sm, p2em = zbfm + np.conj(zbm), zbm + np.conj(zbfm)
                    p1se, p1ee = zafe + np.conj(zae), zae + np.conj(zafe)
                    p2se, p2ee = zbfe + np.conj(zbe), zbe + np.conj(zbfe)
                else:
                    p1s, p1e = np.conj(za), za
                    p2s, p2e = np.conj(zb), zb
                    p1sm, p1em = np.conj(zam), zam
                    p2sm, p2em = np.conj(zbm), zbm
                    p1se, p1ee = np.conj(zae), zae
                    p2se, p2ee = np.conj(zbe), zbe
                k11 = e1 * p1s * y2
                k12 = e2a * p1e * y1 + e2b * p2s * y3
                k13 = e4 * p2e * y2
                u1, u2, u3 = y1 + half * k11, y2 + half * k12, y3 + half * k13
                k21 = e1 * p1sm * u2
                k22 = e2a * p1em * u1 + e2b * p2sm * u3
                k23 = e4 * p2em * u2
                u1, u2, u3 = y1 + half * k21, y2 + half * k22, y3 + half * k23
                k31 = e1 * p1sm * u2
                k32 = e2a * p1em * u1 + e2b * p2sm * u3
                k33 = e4 * p2em * u2
                u1, u2, u3 = y1 + h * k31, y2 + h * k32, y3 + h * k33
                k41 = e1 * p1se * u2
                k42 = e2a * p1ee * u1 + e2b * p2se * u3
                k43 = e4 * p2ee * u2
                y1 = y1 + sixth * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
                y2 = y2 + sixth * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
                y3 = y3 + sixth * (k13 + 2.0 * k23 + 2.0 * k33 + k43)
                za, zb, zaf, zbf = zae, zbe, zafe, zbfe
            out[0, j], out[1, j], out[2, j] = y1, y2, y3
        return out
else:                                     # pragma: no cover - numba missing
    _advance_kernel = None


def _integrate_slow(params, trunc, times, step, cells, keep_fast, scheme):
    params.validate()
    times = _check_times(times)
    idx, arr = _slow_setup(params, trunc, cells)
    m = arr["v1"].size
    lam, phi, eps = params.lam, params.phi, params.epsilon
    c1c = -1j * lam * arr["v1"]
    c2a = -0.5j * lam * arr["v1"]
    c2b = -0.5j * lam * arr["v2"]
    c4c = -1j * lam * arr["v2"]
    a, b = arr["a"], arr["b"]
    abar, bbar = 2.0 * eps - a, 2.0 * eps - b

    c = np.empty((3, m), dtype=complex)
    c[0] = complex(params.gamma1)
    c[1] = complex(params.gamma2)
    c[2] = complex(params.gamma4)
    out = np.empty((times.size, 3, m), dtype=complex)
    norm0 = np.abs(c[0]) ** 2 + 2.0 * np.abs(c[1]) ** 2 + np.abs(c[2]) ** 2

    advance = _advance_kernel if _advance_kernel is not None else _advance_numpy

    t_prev = 0.0
    start = 0
    if times[0] == 0.0:
        out[0] = c
        start = 1
    for i in range(start, times.size):
        dt = times[i] - t_prev
        nsub = _substeps(dt, step)
        c = advance(c, t_prev, dt / nsub, nsub, a, b, abar, bbar,
                    c1c, c2a, c2b, c4c, phi, keep_fast)
        out[i] = c
        t_prev = float(times[i])
        drift = np.abs(np.abs(c[0]) ** 2 + 2.0 * np.abs(c[1]) ** 2
                       + np.abs(c[2]) ** 2 - norm0)
        worst = int(np.argmax(drift))
        if drift[worst] > NORM_DRIFT_TOL:
            raise StepTooLargeError(
                f"norm drift {drift[worst]:.3e} at t={t_prev:g} in cell "
                f"({idx[0, worst]}, {idx[1, worst]}); reduce the step "
                f"(currently {step:g})")
    return CTrajectory(times=times, c=out, cell_index=idx, n_max=trunc.n_max,
                       step=step, scheme=scheme,
                       t1=arr["t1"], t2=arr["t2"], t4=arr["t4"])


def integrate_rwa(params: ModelParams, trunc: FockTruncation, times,
                  step: float = DEFAULT_STEP, cells=None) -> CTrajectory:
    """Propagate the slow-variable system with only the slowly rotating
    exponentials kept.  This is the reference the closed form must match."""
    return _integrate_slow(params, trunc, times, step, cells,
                           keep_fast=False, scheme="rk4-rwa")


def integrate_pre_rwa(params: ModelParams, trunc: FockTruncation, times,
                      step: float = DEFAULT_STEP, cells=None) -> CTrajectory:
    """Propagate the slow-variable system with both the slow and the fast
    exponentials retained; the gap to integrate_rwa measures the
    rotating-wave error."""
    return _integrate_slow(params, trunc, times, step, cells,
                           keep_fast=True, scheme="rk4-pre-rwa")


# ---------------------------------------------------------------------------
# full effective-Hamiltonian propagation
# ---------------------------------------------------------------------------

#: atomic sector order of the truncated basis: index s in {0: ee, 1: eg,
#: 2: ge, 3: gg}; the flat basis index is (s * K + k1) * K + k2 with
#: K = n_max + 3 field levels per mode (two guard levels past n_max).
ATOM_SECTORS = ("ee", "eg", "ge", "gg")


@dataclass
class TruncatedState:
    """State vector on the truncated atom x atom x field basis.

    data has shape (4, K, K) following the ATOM_SECTORS ordering; K counts
    Fock levels 0..n_max+2.
    """

    t: float
    data: np.ndarray
    n_max: int

    @property
    def levels(self):
        return self.n_max + 3

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def guard_population(self) -> float:
        """Probability within two levels of the Fock cap (either mode)."""
        k = self.n_max + 1
        p = np.abs(self.data) ** 2
        return float(p[:, k:, :].sum() + p[:, :k, k:].sum())


@dataclass
class FullTrajectory:
    times: np.ndarray
    states: np.ndarray   # (nt, 4, K, K)
    n_max: int
    step: float
    scheme: str

    def state(self, i: int) -> TruncatedState:
        return TruncatedState(t=float(self.times[i]), data=self.states[i],
                              n_max=self.n_max)


def _sector_excitations(s):
    return (2, 1, 1, 0)[s]


def build_hamiltonian(params: ModelParams, n_max: int):
    """Sparse (H_static, H_coupling) on the truncated basis.

    The full Hamiltonian is H(t) = H_static + g(t) * H_coupling with
    g(t) = lam cos(eps t + phi).  H_static carries the detuning term
    (delta/2) * (sz_A + sz_B), the Stark shifts, and the Kerr terms;
    H_coupling carries sum_i (R1 R2 sp_i + R1+ R2+ sm_i) with deformed
    ladder operators R_j = a_j f(N_j).
    """
    k_levels = n_max + 3
    f = params.deformation.values(k_levels)
    k = np.arange(k_levels, dtype=float)
    dim = 4 * k_levels * k_levels

    k1 = k[:, None]
    k2 = k[None, :]
    kerr = (params.chi1 * k1 * (k1 - 1.0) + params.chi2 * k2 * (k2 - 1.0)
            + params.chi12 * k1 * k2)
    diag = np.empty((4, k_levels, k_levels))
    for s in range(4):
        a_excited = s in (0, 1)
        b_excited = s in (0, 2)
        sz = (1 if a_excited else -1) + (1 if b_excited else -1)
        stark = np.zeros_like(kerr)
        for excited in (a_excited, b_excited):
            stark = stark + (params.beta2 * k2 if excited else params.beta1 * k1)
        diag[s] = 0.5 * params.delta * sz + stark + kerr
    h_static = sp.diags(diag.reshape(-1)).tocsr()

    # raising part: sp_i moves eg->ee, gg->ge (atom B) and ge->ee, gg->eg
    # (atom A), with R1 R2 removing one photon from each mode
    r = (f[1:] * np.sqrt(k[1:]))          # <k-1| a f(N) |k>, k = 1..K-1
    rows, cols, vals = [], [], []

    def flat_index(s, i1, i2):
        return (s * k_levels + i1) * k_levels + i2

    pairs = ((1, 0), (3, 2), (2, 0), (3, 1))   # (source sector, target sector)
    for s_from, s_to in pairs:
        for i1 in range(1, k_levels):
            amp1 = r[i1 - 1]
            if amp1 == 0.0:
                continue
            for i2 in range(1, k_levels):
                amp = amp1 * r[i2 - 1]
                if amp == 0.0:
                    continue
                rows.append(flat_index(s_to, i1 - 1, i2 - 1))
                cols.append(flat_index(s_from, i1, i2))
                vals.append(amp)
    raising = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    h_coupling = (raising + raising.T).tocsr()
    return h_static, h_coupling


def initial_product_state(params: ModelParams, trunc: FockTruncation) -> TruncatedState:
    """Atomic superposition times the truncated two-mode coherent state."""
    k_levels = trunc.n_max + 3
    q1 = coherent_weights(params.alpha1, k_levels)
    q2 = coherent_weights(params.alpha2, k_levels)
    field = np.outer(q1, q2)
    data = np.empty((4, k_levels, k_levels), dtype=complex)
    for s, g in enumerate(params.gammas):
        data[s] = complex(g) * field
    return TruncatedState(t=0.0, data=data, n_max=trunc.n_max)


def state_from_amplitudes(amps: AmplitudeSet, weights: CoherentWeights) -> TruncatedState:
    """Embed a branch AmplitudeSet into the truncated basis (the middle
    branches eg and ge both receive the shared amplitude)."""
    n = amps.n_max + 1
    k_levels = amps.n_max + 3
    data = np.zeros((4, k_levels, k_levels), dtype=complex)
    qq = np.outer(weights.q1, weights.q2)
    data[0, :n, :n] = qq * amps.a1
    data[1, 1:n + 1, 1:n + 1] = qq * amps.a2
    data[2] = data[1]
    data[3, 2:n + 2, 2:n + 2] = qq * amps.a4
    return TruncatedState(t=amps.t, data=data, n_max=amps.n_max)


def integrate_full(params: ModelParams, trunc: FockTruncation, times,
                   step: float = DEFAULT_STEP,
                   initial: TruncatedState = None) -> FullTrajectory:
    """Propagate the time-dependent effective Hamiltonian on the truncated
    space with the classical fourth-order scheme, evaluating the Hamiltonian
    at the substep times.

    The coupling conserves the per-mode excitation numbers N_j + (number of
    excited atoms), so the matrix is block diagonal; that structure is not
    exploited here beyond sparsity, which keeps the propagation exactly the
    generic matrix evolution.
    """
    params.validate()
    times = _check_times(times)
    k_levels = trunc.n_max + 3
    if initial is None:
        initial = initial_product_state(params, trunc)
    if initial.data.shape != (4, k_levels, k_levels):
        raise ValueError("initial state has the wrong truncation size")
    h_static, h_coupling = build_hamiltonian(params, trunc.n_max)
    lam, eps, phi = params.lam, params.epsilon, params.phi

    def deriv(t, psi):
        g = lam * math.cos(eps * t + phi)
        return -1j * (h_static @ psi + g * (h_coupling @ psi))

    psi = initial.flat().astype(complex)
    norm0 = np.linalg.norm(psi)
    out = np.empty((times.size, psi.size), dtype=complex)
    guard = np.zeros((4, k_levels, k_levels), dtype=bool)
    guard[:, trunc.n_max + 1:, :] = True
    guard[:, :, trunc.n_max + 1:] = True
    guard = guard.reshape(-1)

    def checks(i, t):
        leak = float(np.sum(np.abs(out[i][guard]) ** 2))
        if leak > GUARD_LEAK_TOL:
            raise TruncationLeakError(
                f"guard-band population {leak:.3e} at t={t:g}; raise n_max")
        drift = abs(np.linalg.norm(out[i]) - norm0)
        if drift > NORM_DRIFT_TOL:
            raise StepTooLargeError(
                f"norm drift {drift:.3e} at t={t:g}; reduce the step "
                f"(currently {step:g})")

    t_prev = 0.0
    start = 0
    if times[0] == 0.0:
        out[0] = psi
        checks(0, 0.0)
        start = 1
    for i in range(start, times.size):
        dt = times[i] - t_prev
        nsub = _substeps(dt, step)
        h = dt / nsub
        t = t_prev
        for _ in range(nsub):
            k1 = deriv(t, psi)
            k2 = deriv(t + 0.5 * h, psi + (0.5 * h) * k1)
            k3 = deriv(t + 0.5 * h, psi + (0.5 * h) * k2)
            k4 = deriv(t + h, psi + h * k3)
            psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        out[i] = psi
        t_prev = float(times[i])
        checks(i, t_prev)
    return FullTrajectory(times=times, states=out.reshape(times.size, 4, k_levels, k_levels),
                          n_max=trunc.n_max, step=step, scheme="rk4-full")


def excitation_block_labels(n_max: int):
    """(E1, E2) block labels of every basis state; the coupling never mixes
    different blocks, so inter-block population transfer must be exactly zero."""
    k_levels = n_max + 3
    k = np.arange(k_levels)
    labels = np.empty((4, k_levels, k_levels, 2), dtype=int)
    for s in range(4):
        exc = _sector_excitations(s)
        labels[s, :, :, 0] = k[:, None] + exc
        labels[s, :, :, 1] = k[None, :] + exc
    return labels


def suggest_step(params: ModelParams, trunc: FockTruncation, duration: float,
                 lam: float = None, target: float = 2e-7,
                 cells=None) -> float:
    """Fixed step small enough that the fourth-order error of the slow-variable
    integrators stays around `target` over `duration`.

    Uses the spectral bound |a| + |b| + lam (v1 + v2) on the per-cell
    oscillation rates; the global error of the classical scheme then scales
    like duration * omega^5 * h^4 / 120.
    """
    grid = branch_grid(params, trunc.n_max)
    a, b = slow_gaps(params, grid)
    lam = params.lam if lam is None else lam
    omega = np.abs(a) + np.abs(b) + lam * (grid.v1 + grid.v2)
    if cells is not None:
        sel = np.zeros(omega.shape, dtype=bool)
        for (i, j) in cells:
            sel[i, j] = True
        omega = omega[sel]
    w = max(1.0, float(np.max(omega)))
    h = (target * 120.0 / (max(duration, 1e-6) * w ** 5)) ** 0.25
    return float(min(DEFAULT_STEP, max(h, 1e-7)))


def cell_frequency_bound(params: ModelParams, trunc: FockTruncation,
                         lam: float = None) -> np.ndarray:
    """Per-cell bound on the slow-variable oscillation rate (used to group
    cells by the integration step they need)."""
    grid = branch_grid(params, trunc.n_max)
    a, b = slow_gaps(params, grid)
    lam = params.lam if lam is None else lam
    return np.abs(a) + np.abs(b) + lam * (grid.v1 + grid.v2)
