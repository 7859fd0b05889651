"""Wigner transforms on uniform grids and the high-temperature master
equation used to produce spread-out density operators.

The transform pair is implemented as an exact discrete Fourier pair: the
phase-space grid carries both integer and half-integer kernel centers, so the
inverse reconstructs every kernel entry.  The evolver splits free streaming
(a shear, exact in the q-spectral domain) from momentum diffusion (exact in
the p-spectral domain); only the Strang composition error, O(steps^-2),
remains.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityOperator, GaussianSpec
from .errors import DomainOverflow, GridTooCoarse, UncertaintyViolation

__all__ = [
    "WignerGrid",
    "BathParams",
    "wigner_transform",
    "inverse_wigner",
    "evolve_master",
    "anticommutator_correspondence_check",
    "make_broad_gaussian",
    "trace_pairing",
    "gaussian_wigner_grid",
    "random_lowrank_density",
]


@dataclass
class WignerGrid:
    q0: float
    dq: float
    p0: float
    dp: float
    values: np.ndarray  # [iq, ip]; real for density operators
    hbar: float = 1.0

    @property
    def q_axis(self) -> np.ndarray:
        return self.q0 + self.dq * np.arange(self.values.shape[0])

    @property
    def p_axis(self) -> np.ndarray:
        return self.p0 + self.dp * np.arange(self.values.shape[1])

    def integral(self) -> float:
        return float(np.real(np.sum(self.values)) * self.dq * self.dp)

    def purity(self) -> float:
        return float(2 * np.pi * self.hbar
                     * np.sum(np.abs(self.values) ** 2) * self.dq * self.dp)

    def marginal_q(self) -> np.ndarray:
        return np.real(np.sum(self.values, axis=1)) * self.dp

    def marginal_p(self) -> np.ndarray:
        return np.real(np.sum(self.values, axis=0)) * self.dq

    def moments(self) -> dict:
        q = self.q_axis[:, None]
        p = self.p_axis[None, :]
        w = np.real(self.values) * self.dq * self.dp
        norm = np.sum(w)
        mq = float(np.sum(q * w) / norm)
        mp = float(np.sum(p * w) / norm)
        return {
            "mean_q": mq,
            "mean_p": mp,
            "var_q": float(np.sum((q - mq) ** 2 * w) / norm),
            "var_p": float(np.sum((p - mp) ** 2 * w) / norm),
            "cov_qp": float(np.sum((q - mq) * (p - mp) * w) / norm),
            "norm": float(norm),
        }


@dataclass(frozen=True)
class BathParams:
    mass: float
    gamma: float  # 1/time
    kT: float     # energy

    def __post_init__(self):
        if self.mass <= 0 or self.gamma <= 0 or self.kT <= 0:
            raise ValueError("bath parameters must be positive")

    @property
    def D(self) -> float:
        return 2 * self.mass * self.gamma * self.kT


def wigner_transform(rho: DensityOperator, hbar: float = 1.0,
                     p_span: float | None = None) -> WignerGrid:
    """Phase-space representation of a grid-kernel density operator.

    The q-axis is twice as fine as the position grid so both integer and
    half-integer kernel centers are represented; the p-axis is the FFT dual
    of the relative coordinate.
    """
    if rho.grid_kernel is None:
        rho.materialize_default_grid()
    K = rho.grid_kernel
    ax = rho.grid_axis
    n = len(ax)
    h = ax[1] - ax[0]
    p_nyquist = np.pi * hbar / (2 * h)
    if p_span is not None and p_span > p_nyquist:
        raise GridTooCoarse(
            f"requested momentum span {p_span} exceeds Nyquist {p_nyquist}")
    L = 1
    while L < 2 * n:
        L *= 2
    i = np.arange(n)
    j = np.arange(-(n - 1), n)
    p = (np.pi * hbar / (h * L)) * np.arange(-L // 2, L // 2)

    def parity_rows(shift):
        I = i[:, None] + shift + j[None, :]
        J = i[:, None] - j[None, :]
        valid = (I >= 0) & (I < n) & (J >= 0) & (J < n)
        S = np.where(valid, K[np.clip(I, 0, n - 1), np.clip(J, 0, n - 1)], 0.0)
        S_fft = np.zeros((n, L), dtype=complex)
        S_fft[:, np.mod(j, L)] = S
        return np.fft.fftshift(np.fft.fft(S_fft, axis=1), axes=1)

    W_even = parity_rows(0)
    W_odd = parity_rows(1) * np.exp(-1j * p * h / hbar)[None, :]
    W = np.empty((2 * n - 1, L), dtype=complex)
    W[0::2] = W_even
    W[1::2] = W_odd[: n - 1]
    W *= 2 * h / (2 * np.pi * hbar)
    vals = W.real if np.max(np.abs(W.imag)) < 1e-10 * max(np.max(np.abs(W)), 1e-300) else W
    return WignerGrid(q0=ax[0], dq=h / 2, p0=p[0], dp=p[1] - p[0],
                      values=vals, hbar=hbar)


def inverse_wigner(W: WignerGrid, aliasing_tol: float = 0.01) -> DensityOperator:
    """Position kernel from a phase-space grid (exact inverse of the forward
    transform); raises GridTooCoarse when the outermost momentum rows carry
    more than `aliasing_tol` of the total weight (out-of-band input)."""
    vals = np.asarray(W.values, dtype=complex)
    nq, L = vals.shape
    if nq % 2 == 0:
        raise ValueError("expected a dual-parity q-axis (odd number of rows)")
    n = (nq + 1) // 2
    edge_mean = np.mean(np.abs(vals[:, [0, 1, L - 1]]))
    if edge_mean > aliasing_tol * max(np.mean(np.abs(vals)), 1e-300):
        raise GridTooCoarse("significant weight at the momentum band edge (aliasing)")
    h = 2 * W.dq
    m = np.arange(-L // 2, L // 2)
    # the stored odd-parity rows carry the half-step phase that aligns odd
    # relative indices; the inverse DFT at twice the length resolves both
    B = np.zeros((nq, 2 * L), dtype=complex)
    B[:, np.mod(m, 2 * L)] = vals
    T = np.fft.ifft(B, axis=1) * (2 * L)
    T *= (2 * np.pi * W.hbar) / (2 * h * L)
    i = np.arange(n)
    I = i[:, None]
    J = i[None, :]
    K = T[I + J, np.mod(I - J, 2 * L)]
    ax = W.q0 + h * np.arange(n)
    return DensityOperator(grid_axis=ax, grid_kernel=K)


def evolve_master(W: WignerGrid, bath: BathParams, t: float, steps: int,
                  max_shift_fraction: float = 0.45) -> WignerGrid:
    """Free streaming plus momentum diffusion, Strang-split spectral steps.

    Each substep is exact (a shear phase in the q spectrum, a Gaussian factor
    in the p spectrum), so the only error is the splitting error O(steps^-2).
    """
    vals = np.array(W.values, dtype=complex)
    nq, np_ = vals.shape
    q_span = W.dq * nq
    # effective momentum extent: rows that actually carry weight
    row_mass = np.sum(np.abs(vals), axis=0)
    alive = row_mass > 1e-12 * max(row_mass.max(), 1e-300)
    p_eff = float(np.max(np.abs(W.p_axis[alive])))
    if p_eff * t / bath.mass > max_shift_fraction * q_span:
        raise DomainOverflow(
            "advection over the requested time exceeds the grid padding")
    dt = t / steps
    kq = 2 * np.pi * np.fft.fftfreq(nq, W.dq)
    kp = 2 * np.pi * np.fft.fftfreq(np_, W.dp)
    p = W.p_axis
    half_shear = np.exp(-1j * kq[:, None] * (p[None, :] * dt / (2 * bath.mass)))
    diffuse = np.exp(-bath.D * kp ** 2 * dt)[None, :]

    def shear(v):
        return np.fft.ifft(np.fft.fft(v, axis=0) * half_shear, axis=0)

    for _ in range(steps):
        vals = shear(vals)
        vals = np.fft.ifft(np.fft.fft(vals, axis=1) * diffuse, axis=1)
        vals = shear(vals)
    out = vals.real if np.max(np.abs(vals.imag)) < 1e-9 * max(np.max(np.abs(vals)), 1e-300) else vals
    return WignerGrid(W.q0, W.dq, W.p0, W.dp, out, W.hbar)


def _p_times_rho(K: np.ndarray, ax: np.ndarray, hbar: float) -> np.ndarray:
    n = len(ax)
    h = ax[1] - ax[0]
    k = 2 * np.pi * np.fft.fftfreq(n, h)
    return np.fft.ifft(1j * k[:, None] * np.fft.fft(K, axis=0), axis=0) * (-1j * hbar)


def _rho_times_p(K: np.ndarray, ax: np.ndarray, hbar: float) -> np.ndarray:
    n = len(ax)
    h = ax[1] - ax[0]
    k = 2 * np.pi * np.fft.fftfreq(n, h)
    return np.fft.ifft(1j * k[None, :] * np.fft.fft(K, axis=1), axis=1) * (+1j * hbar)


def anticommutator_correspondence_check(rho: DensityOperator,
                                        hbar: float = 1.0) -> dict:
    """Verify that multiplying the phase-space density by q (resp. p)
    matches the symmetrized product with the position (resp. momentum)
    operator, and that those two maps commute."""
    if rho.grid_kernel is None:
        rho.materialize_default_grid()
    K = rho.grid_kernel
    ax = rho.grid_axis

    def sym_x(kernel):
        return 0.5 * (ax[:, None] + ax[None, :]) * kernel

    def sym_p(kernel):
        return 0.5 * (_p_times_rho(kernel, ax, hbar) + _rho_times_p(kernel, ax, hbar))

    W = wigner_transform(rho, hbar)
    Wx = wigner_transform(DensityOperator(grid_axis=ax, grid_kernel=sym_x(K)), hbar)
    Wp = wigner_transform(DensityOperator(grid_axis=ax, grid_kernel=sym_p(K)), hbar)
    q = W.q_axis[:, None]
    p = W.p_axis[None, :]
    scale = float(np.max(np.abs(W.values)))
    err_q = float(np.max(np.abs(Wx.values - q * W.values)) / (scale * np.max(np.abs(q))))
    err_p = float(np.max(np.abs(Wp.values - p * W.values)) / (scale * np.max(np.abs(p))))
    comm = sym_x(sym_p(K)) - sym_p(sym_x(K))
    err_comm = float(np.max(np.abs(comm)) / max(np.max(np.abs(K)), 1e-300))
    return {"q_identity_error": err_q, "p_identity_error": err_p,
            "map_commutator_error": err_comm}


def make_broad_gaussian(center: tuple[float, float],
                        spreads: tuple[float, float],
                        mixedness: float = 0.0,
                        hbar: float = 1.0) -> DensityOperator:
    """Gaussian mixed state with the requested first and second moments.

    `mixedness` is the symmetrized x-p covariance; positivity requires the
    covariance determinant to reach (hbar/2)^2, else UncertaintyViolation.
    """
    dq, dp = spreads
    spec = GaussianSpec(q0=center[0], p0=center[1], var_q=dq ** 2,
                        var_p=dp ** 2, cov_qp=mixedness, hbar=hbar)
    return DensityOperator(gauss=spec)


def thermal_oscillator_spec(mass: float, omega: float, kT: float,
                            hbar: float = 1.0) -> GaussianSpec:
    """Equilibrium Gaussian of an oscillator in the high-temperature regime."""
    return GaussianSpec(q0=0.0, p0=0.0, var_q=kT / (mass * omega ** 2),
                        var_p=mass * kT, cov_qp=0.0, hbar=hbar)


def trace_pairing(Wa: WignerGrid, Wb: WignerGrid) -> float:
    """2*pi*hbar * sum W_A W_B dq dp over a shared grid."""
    if Wa.values.shape != Wb.values.shape:
        raise ValueError("grids must match")
    return float(2 * np.pi * Wa.hbar
                 * np.real(np.sum(Wa.values * Wb.values)) * Wa.dq * Wa.dp)


def gaussian_wigner_grid(spec: GaussianSpec, q_half: float, p_half: float,
                         nq: int, np_: int) -> WignerGrid:
    """Closed-form phase-space density sampled on a requested grid."""
    q = spec.q0 + np.linspace(-q_half, q_half, nq)
    p = spec.p0 + np.linspace(-p_half, p_half, np_)
    vals = spec.wigner(q[:, None], p[None, :])
    return WignerGrid(q0=q[0], dq=q[1] - q[0], p0=p[0], dp=p[1] - p[0],
                      values=vals, hbar=spec.hbar)


def random_lowrank_density(ax: np.ndarray, rank: int, seed: int,
                           corr_len: float | None = None) -> DensityOperator:
    """Random band-limited mixed state on a grid (smooth envelope times
    filtered noise, orthonormalized)."""
    rng = np.random.default_rng(seed)
    n = len(ax)
    h = ax[1] - ax[0]
    span = ax[-1] - ax[0]
    corr = corr_len if corr_len is not None else span / 24
    k = 2 * np.pi * np.fft.fftfreq(n, h)
    filt = np.exp(-0.5 * (k * corr) ** 2)
    # envelope narrow enough that boundary values stay below 1e-9 (spectral
    # steps treat the domain as periodic)
    env = np.exp(-((ax - ax.mean()) / (0.09 * span)) ** 2)
    vecs = []
    for _ in range(rank):
        z = rng.normal(size=n) + 1j * rng.normal(size=n)
        v = np.fft.ifft(np.fft.fft(z) * filt) * env
        for u in vecs:
            v = v - u * np.vdot(u, v) * h
        v = v / (np.linalg.norm(v) * np.sqrt(h))
        vecs.append(v)
    w = rng.uniform(0.2, 1.0, size=rank)
    w = w / w.sum()
    K = sum(wi * np.outer(v, v.conj()) for wi, v in zip(w, vecs))
    return DensityOperator(grid_axis=ax, grid_kernel=K)
