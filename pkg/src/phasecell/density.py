"""Density operators in the two representations the audits need.

A DensityOperator carries an analytic Gaussian phase-space description, a
position-kernel grid, or both.  The Gaussian route supplies exact window-basis
matrix elements through a factorization
    <psi_nm| rho |psi_nm'>  ~  (1/a) * G(m+m') * F_n(m-m'),
valid for zero x-p correlation: the kernel separates into a function of
u = x - y times a function of v = (x+y)/2, and the integration diamond differs
from the factorized rectangle only where the u-Gaussian has already died off
(bound reported by `factorization_error_bound`).  Cross-position-cell
coherences are suppressed by exp(-(a/sigma_u)^2/2) and treated as zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import dawsn, erf

from .errors import GridTooCoarse, UncertaintyViolation
from .lattice_states import LatticeState, PhysConfig

__all__ = ["GaussianSpec", "DensityOperator"]


@dataclass(frozen=True)
class GaussianSpec:
    """First and second moments of a Gaussian (generally mixed) state."""

    q0: float
    p0: float
    var_q: float
    var_p: float
    cov_qp: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.var_q <= 0 or self.var_p <= 0:
            raise UncertaintyViolation("variances must be positive")
        if self.det_cov < self.hbar ** 2 / 4 * (1 - 1e-12):
            raise UncertaintyViolation(
                f"covariance determinant {self.det_cov} below (hbar/2)^2")

    @property
    def det_cov(self) -> float:
        return self.var_q * self.var_p - self.cov_qp ** 2

    @property
    def purity(self) -> float:
        return self.hbar / (2 * np.sqrt(self.det_cov))

    def wigner(self, q, p) -> np.ndarray:
        """Phase-space density (a normalized bivariate normal)."""
        q = np.asarray(q, dtype=float) - self.q0
        p = np.asarray(p, dtype=float) - self.p0
        det = self.det_cov
        quad = (self.var_p * q ** 2 - 2 * self.cov_qp * q * p + self.var_q * p ** 2) / det
        return np.exp(-0.5 * quad) / (2 * np.pi * np.sqrt(det))

    def kernel(self, x, y) -> np.ndarray:
        """Position kernel rho(x, y) (closed form, any correlation)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v = 0.5 * (x + y) - self.q0
        u = x - y
        var_cond = self.var_p - self.cov_qp ** 2 / self.var_q
        kappa = self.cov_qp / self.var_q
        amp = np.exp(-v ** 2 / (2 * self.var_q)) / np.sqrt(2 * np.pi * self.var_q)
        damp = np.exp(-var_cond * u ** 2 / (2 * self.hbar ** 2))
        phase = np.exp(1j * (self.p0 + kappa * v) * u / self.hbar)
        return amp * damp * phase

    def position_mass(self, lo: float, hi: float) -> float:
        s = np.sqrt(2 * self.var_q)
        return 0.5 * float(erf((hi - self.q0) / s) - erf((lo - self.q0) / s))

    def momentum_mass(self, lo: float, hi: float) -> float:
        s = np.sqrt(2 * self.var_p)
        return 0.5 * float(erf((hi - self.p0) / s) - erf((lo - self.p0) / s))

    def position_density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float) - self.q0
        return np.exp(-x ** 2 / (2 * self.var_q)) / np.sqrt(2 * np.pi * self.var_q)

    def momentum_density(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float) - self.p0
        return np.exp(-p ** 2 / (2 * self.var_p)) / np.sqrt(2 * np.pi * self.var_p)


def _cell_p_interval(config: PhysConfig, M: int) -> tuple[float, float]:
    b = config.b
    lo = (M * config.macro - 0.5) * b
    return lo, lo + config.macro * b


def _cell_q_interval(config: PhysConfig, n: int) -> tuple[float, float]:
    return (n - 0.5) * config.a, (n + 0.5) * config.a


class DensityOperator:
    """Normalized state in Gaussian, position-grid, or lattice-mixture form.

    The lattice form is a statistical mixture sum_i w_i |s_i><s_i| of
    LatticeState vectors (weights summing to 1); it makes basis-state density
    operators and coarse-grained mixtures exact.
    """

    def __init__(self, gauss: GaussianSpec | None = None,
                 grid_axis: np.ndarray | None = None,
                 grid_kernel: np.ndarray | None = None,
                 lattice: list[tuple[float, LatticeState]] | None = None):
        if gauss is None and grid_kernel is None and lattice is None:
            raise ValueError("need a Gaussian spec, a grid kernel, or a lattice mixture")
        self.gauss = gauss
        self.lattice = lattice
        self.grid_axis = None if grid_axis is None else np.asarray(grid_axis, float)
        self.grid_kernel = None if grid_kernel is None else np.asarray(grid_kernel, complex)
        if self.grid_kernel is not None:
            if self.grid_axis is None or self.grid_kernel.shape != (
                    len(self.grid_axis), len(self.grid_axis)):
                raise ValueError("grid kernel must be square over grid_axis")
        self._f_cache: dict = {}

    # ------------------------------------------------------------ validation

    def validate(self) -> dict:
        """Hermiticity / trace / positivity diagnostics on the grid kernel."""
        if self.grid_kernel is None:
            self.materialize_default_grid()
        K = self.grid_kernel
        h = self.grid_axis[1] - self.grid_axis[0]
        herm = float(np.max(np.abs(K - K.conj().T)))
        tr = float(np.real(np.trace(K)) * h)
        evals = np.linalg.eigvalsh(0.5 * (K + K.conj().T)) * h
        return {"hermiticity": herm, "trace": tr, "min_eigenvalue": float(evals.min())}

    def materialize_default_grid(self, points: int = 1024, span_sigmas: float = 8.0):
        if self.gauss is None:
            raise ValueError("no Gaussian spec to materialize")
        g = self.gauss
        half = span_sigmas * np.sqrt(g.var_q)
        ax = g.q0 + np.linspace(-half, half, points)
        self.grid_axis = ax
        self.grid_kernel = g.kernel(ax[:, None], ax[None, :])
        return self

    # ------------------------------------------------------ window projections

    def _gauss_G(self, config: PhysConfig, S: np.ndarray) -> np.ndarray:
        """Closed-form u-integral over the relative coordinate, per S = m+m'."""
        g = self.gauss
        if abs(g.cov_qp) > 0:
            raise NotImplementedError(
                "window-basis blocks require zero x-p correlation")
        sigma_u = g.hbar / np.sqrt(g.var_p)
        k = g.p0 / g.hbar - np.pi * S / config.a
        return np.sqrt(2 * np.pi) * sigma_u * np.exp(-0.5 * (sigma_u * k) ** 2)

    def _gauss_H(self, config: PhysConfig, S: np.ndarray) -> np.ndarray:
        """Closed-form ∫ |u| g(u) e^{i k_S u} du; drives the first-order
        correction for the corner strips where the (u, w) rectangle exceeds
        the true integration diamond of one cell."""
        g = self.gauss
        sigma_u = g.hbar / np.sqrt(g.var_p)
        k = g.p0 / g.hbar - np.pi * S / config.a
        z = k * sigma_u / np.sqrt(2.0)
        return 2 * sigma_u ** 2 * (1.0 - np.sqrt(2.0) * k * sigma_u * dawsn(z))

    def _edge_mean(self, config: PhysConfig, n: int) -> float:
        g = self.gauss
        a = config.a
        return 0.5 * float(g.position_density(n * a + a / 2)
                           + g.position_density(n * a - a / 2))

    def _gauss_F(self, config: PhysConfig, n: int, d_max: int) -> np.ndarray:
        """Fourier coefficients over cell n of the smooth v-profile, |D| <= d_max.

        Endpoint-averaged FFT; returns array indexed by D + d_max.
        """
        key = ("F", n, d_max, config.a, config.N)
        if key in self._f_cache:
            return self._f_cache[key]
        g = self.gauss
        a = config.a
        M = 1
        while M < 16 * max(8, d_max):
            M *= 2
        w = -a / 2 + a * np.arange(M) / M
        f = g.position_density(n * a + w)
        f[0] = 0.5 * (g.position_density(n * a - a / 2) + g.position_density(n * a + a / 2))
        coeff = np.fft.fft(f) * (a / M)
        D = np.arange(-d_max, d_max + 1)
        vals = coeff[np.mod(D, M)] * ((-1.0) ** D)
        out = vals.astype(complex)
        self._f_cache[key] = out
        return out

    def factorization_error_bound(self, config: PhysConfig) -> float:
        """Relative bound on the residual diamond-vs-rectangle error after the
        first-order corner correction (second order in the kernel u-width)."""
        g = self.gauss
        sigma_u = g.hbar / np.sqrt(g.var_p)
        return float(2 * np.pi * config.macro * (sigma_u / config.a) ** 2)

    def _lattice_block(self, config: PhysConfig, n: int, m_lo: int, m_hi: int) -> np.ndarray:
        span = m_hi - m_lo + 1
        out = np.zeros((span, span), dtype=complex)
        for w, s in self.lattice:
            if s.cell_n != n:
                continue
            v = np.zeros(span, dtype=complex)
            src = s.m_indices
            inside = (src >= m_lo) & (src <= m_hi)
            v[src[inside] - m_lo] = s.full_coeffs()[inside]
            out += w * np.outer(v, v.conj())
        return out

    def macro_block(self, config: PhysConfig, n: int, M: int) -> np.ndarray:
        """Same-cell window-basis block over macro-cell (n, M)."""
        if self.lattice is not None:
            return self._lattice_block(config, n, M * config.macro,
                                       (M + 1) * config.macro - 1)
        if self.gauss is not None and self.gauss.cov_qp == 0.0:
            lo = M * config.macro
            m = lo + np.arange(config.macro)
            S = (m[:, None] + m[None, :]).astype(float)
            D = m[:, None] - m[None, :]
            G = self._gauss_G(config, S)
            F = self._gauss_F(config, n, config.macro - 1)
            corner = ((-1.0) ** D) * self._edge_mean(config, n) * self._gauss_H(config, S)
            return (G * F[D + (config.macro - 1)] - corner) / config.a
        return self._grid_block(config, n, M * config.macro,
                                (M + 1) * config.macro - 1)

    def cell_band(self, config: PhysConfig, n: int, m_lo: int, m_hi: int,
                  bandwidth: int) -> np.ndarray:
        """Banded same-cell block: entry [i, B + d] = <psi_{n, m_lo+i}|rho|psi_{n, m_lo+i+d}>."""
        if self.gauss is None or self.gauss.cov_qp != 0.0:
            raise NotImplementedError("banded blocks implemented for the Gaussian route")
        span = m_hi - m_lo + 1
        m = m_lo + np.arange(span)
        d = np.arange(-bandwidth, bandwidth + 1)
        S = (m[:, None] + (m[:, None] + d[None, :])).astype(float)
        G = self._gauss_G(config, S)
        F = self._gauss_F(config, n, bandwidth)
        corner = ((-1.0) ** d)[None, :] * self._edge_mean(config, n) \
            * self._gauss_H(config, S)
        return (G * F[d + bandwidth][None, :] - corner) / config.a

    def _grid_window_vectors(self, config: PhysConfig, n: int,
                             m_lo: int, m_hi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ax = self.grid_axis
        h = ax[1] - ax[0]
        # window plane waves need ~several samples per oscillation
        if np.pi / h < 2 * np.pi * max(abs(m_lo), abs(m_hi)) / config.a * 1.5:
            raise GridTooCoarse("grid cannot resolve the requested window indices")
        lo = n * config.a - config.a / 2
        hi = n * config.a + config.a / 2
        inner = (ax > lo) & (ax < hi)
        i0 = int(np.argmax(inner))
        i1 = len(ax) - 1 - int(np.argmax(inner[::-1]))
        if i0 == 0 or i1 == len(ax) - 1:
            raise GridTooCoarse("grid does not bracket the requested cell")
        # trapezoid over interior samples plus linear end corrections for the
        # partial segments between the cell edge and the nearest samples
        mask = np.zeros(len(ax), dtype=bool)
        mask[i0 - 1: i1 + 2] = True
        xs = ax[mask]
        w = np.zeros(len(xs))
        w[1:-1] = h
        w[1] = w[-2] = h / 2 + 0.0  # interior trapezoid ends, corrected below
        lam_l = ax[i0] - lo
        lam_r = hi - ax[i1]
        w[1] += lam_l * (1 - lam_l / (2 * h))
        w[0] = lam_l ** 2 / (2 * h)
        w[-2] += lam_r * (1 - lam_r / (2 * h))
        w[-1] = lam_r ** 2 / (2 * h)
        ms = np.arange(m_lo, m_hi + 1)
        V = np.exp(2j * np.pi * np.multiply.outer(ms, xs / config.a)) / np.sqrt(config.a)
        return V, mask, w

    def _grid_block(self, config: PhysConfig, n: int, m_lo: int, m_hi: int) -> np.ndarray:
        V, mask, w = self._grid_window_vectors(config, n, m_lo, m_hi)
        K = self.grid_kernel[np.ix_(mask, mask)]
        return V.conj() @ (K * w[:, None] * w[None, :]) @ V.T

    def sandwich(self, config: PhysConfig, state: LatticeState) -> float:
        """<s| rho |s> for a lattice state (exact coefficient contraction)."""
        lo = state.m_offset
        hi = lo + len(state.coeffs) - 1
        if self.lattice is not None:
            from .lattice_states import inner_product
            return float(sum(w * abs(inner_product(state, s)) ** 2
                             for w, s in self.lattice))
        if self.gauss is not None and self.gauss.cov_qp == 0.0:
            m = state.m_indices
            S = (m[:, None] + m[None, :]).astype(float)
            D = m[:, None] - m[None, :]
            G = self._gauss_G(config, S)
            F = self._gauss_F(config, state.cell_n, len(m) - 1)
            corner = ((-1.0) ** D) * self._edge_mean(config, state.cell_n) \
                * self._gauss_H(config, S)
            block = (G * F[D + (len(m) - 1)] - corner) / config.a
        else:
            block = self._grid_block(config, state.cell_n, lo, hi)
        c = state.coeffs
        return float(np.real(np.vdot(c, block @ c)))

    # ------------------------------------------------------------- summaries

    def trace_in_truncation(self, config: PhysConfig) -> float:
        """Captured mass sum_{cells, m} <psi_nm| rho |psi_nm>."""
        if self.lattice is not None:
            return float(sum(w for w, _ in self.lattice))
        total = 0.0
        m_lo, m_hi = config.window_m_range
        m = np.arange(m_lo, m_hi + 1)
        for n in range(config.n_range[0], config.n_range[1] + 1):
            if self.gauss is not None and self.gauss.cov_qp == 0.0:
                G = self._gauss_G(config, 2.0 * m)
                H = self._gauss_H(config, 2.0 * m)
                F0 = self._gauss_F(config, n, 0)[0]
                edge = self._edge_mean(config, n)
                total += float(np.real(np.sum(G * F0 - edge * H))) / config.a
            else:
                blk = self._grid_block(config, n, m_lo, m_hi)
                total += float(np.real(np.trace(blk)))
        return total

    def truncation_leak(self, config: PhysConfig) -> float:
        """Mass the truncated window basis fails to capture.

        Decays only like 1/margin in the momentum truncation margin because
        window states have 1/(p-distance)^2 momentum tails; distinct from the
        exponentially small physical tail mass below.
        """
        return max(0.0, 1.0 - self.trace_in_truncation(config))

    def physical_tail_mass(self, config: PhysConfig) -> float:
        """Phase-space mass outside the truncation's covered rectangle."""
        if self.lattice is not None:
            return 0.0
        g = self.gauss
        if g is None:
            raise ValueError("tail mass accounting needs the Gaussian representation")
        q_lo = (config.n_range[0] - 0.5) * config.a
        q_hi = (config.n_range[1] + 0.5) * config.a
        m_lo, m_hi = config.window_m_range
        p_lo = (m_lo - 0.5) * config.b
        p_hi = (m_hi + 0.5) * config.b
        inside = g.position_mass(q_lo, q_hi) * g.momentum_mass(p_lo, p_hi)
        return max(0.0, 1.0 - inside)

    def cell_averaged_wigner(self, config: PhysConfig, n: int, M: int) -> float:
        """Average of the phase-space density over macro-cell (n, M)."""
        g = self.gauss
        if g is None:
            raise ValueError("cell averages need the Gaussian representation")
        q_lo, q_hi = _cell_q_interval(config, n)
        p_lo, p_hi = _cell_p_interval(config, M)
        area = (q_hi - q_lo) * (p_hi - p_lo)
        if g.cov_qp == 0.0:
            return g.position_mass(q_lo, q_hi) * g.momentum_mass(p_lo, p_hi) / area
        qs = np.linspace(q_lo, q_hi, 12)
        ps = np.linspace(p_lo, p_hi, 12)
        return float(np.mean(g.wigner(qs[:, None], ps[None, :])))
