"""The commuting position/momentum pair built on the cell projector family,
its distance to the canonical pair, and the pseudo-classical approximation.

Both operators are functions of the same projector-valued family: X assigns
na to every finite-dispersion state of position cell n, P assigns the
recentered label b*(M*2^N + offset) to every state of macro momentum cell M,
and both annihilate the remainder channel.  Distances are evaluated as traces
restricted to the finite-dispersion subspace (the divergent remainder channel
and the ordering commutator are reported separately, never silently folded
in).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityOperator, GaussianSpec
from .errors import TruncationError
from .lattice_states import LatticeState, PhysConfig, build_remainder_state
from .phase_projectors import (
    build_cell_projector,
    projector_moments,
    recenter,
)

__all__ = [
    "CommutingPair",
    "NormResult",
    "build_pair",
    "distance_norm",
    "closeness_product",
    "pseudoclassical_approximation",
    "regime_estimate",
    "dense_commutator_norm",
    "slow_variation_metric",
]

HBAR_SI = 1.054571817e-34


@dataclass(frozen=True)
class CommutingPair:
    config: PhysConfig
    p_offset: float  # shared within-cell spectral offset, units of b

    def X_value(self, n: int) -> float:
        return n * self.config.a

    def P_value(self, M: int) -> float:
        return self.config.b * (M * self.config.macro + self.p_offset)

    def x_spectrum(self) -> np.ndarray:
        n = np.arange(self.config.n_range[0], self.config.n_range[1] + 1)
        return n * self.config.a

    def p_spectrum(self) -> np.ndarray:
        M = np.arange(self.config.M_range[0], self.config.M_range[1] + 1)
        return self.config.b * (M * self.config.macro + self.p_offset)

    def projector(self, n: int, M: int):
        E = build_cell_projector(self.config, n, M)
        return recenter(E) if self.p_offset != 0.0 else E


def build_pair(config: PhysConfig, recentered: bool = True) -> CommutingPair:
    n_cells = config.n_range[1] - config.n_range[0] + 1
    M_cells = config.M_range[1] - config.M_range[0] + 1
    if n_cells < 3 or M_cells < 3:
        raise TruncationError("the pair needs at least 3 macro-cells per axis")
    offset = 0.0
    if recentered:
        E = recenter(build_cell_projector(config, config.n_range[0], config.M_range[0]))
        offset = E.p_offset
    return CommutingPair(config, offset)


def dense_commutator_norm(pair: CommutingPair, n_cells: int = 2) -> float:
    """Frobenius norm of [X, P] on a dense embedding of a few position cells."""
    cfg = pair.config
    span = (cfg.M_range[1] - cfg.M_range[0] + 1) * cfg.macro
    chi = build_remainder_state(cfg, cfg.n_range[0], 0).coeffs
    block = np.eye(cfg.macro) - np.outer(chi, chi.conj())
    total = 0.0
    for n in range(cfg.n_range[0], cfg.n_range[0] + n_cells):
        X = np.zeros((span, span), dtype=complex)
        P = np.zeros((span, span), dtype=complex)
        for idx, M in enumerate(range(cfg.M_range[0], cfg.M_range[1] + 1)):
            sl = slice(idx * cfg.macro, (idx + 1) * cfg.macro)
            X[sl, sl] = pair.X_value(n) * block
            P[sl, sl] = pair.P_value(M) * block
        total += np.linalg.norm(X @ P - P @ X) ** 2
    return float(np.sqrt(total))


def slow_variation_metric(config: PhysConfig, rho: DensityOperator) -> float:
    """Max adjacent-macro-cell change of the cell-averaged phase-space
    density, normalized by its global maximum."""
    if rho.gauss is None:
        return float("nan")
    n_vals = range(config.n_range[0], config.n_range[1] + 1)
    M_vals = range(config.M_range[0], config.M_range[1] + 1)
    W = np.array([[rho.cell_averaged_wigner(config, n, M) for M in M_vals]
                  for n in n_vals])
    peak = W.max()
    dn = np.max(np.abs(np.diff(W, axis=0))) if W.shape[0] > 1 else 0.0
    dM = np.max(np.abs(np.diff(W, axis=1))) if W.shape[1] > 1 else 0.0
    return float(max(dn, dM) / peak)


@dataclass
class NormResult:
    axis: str
    norm: float                 # sqrt of the positive-ordering restricted trace
    norm2_positive: float
    norm2_literal: float
    ordering_difference: float
    d2_channel: float           # remainder-channel second-moment term
    commutator_term: complex    # Tr(A [a, rho]) restricted
    covered_mass: float
    norm2_normalized: float     # positive reading / covered mass
    slow_variation: float
    bandwidth: int


def _banded_matvec(band: np.ndarray, B: int, X: np.ndarray) -> np.ndarray:
    """y = R @ X for a banded Hermitian R stored as [row, B + d]."""
    span = band.shape[0]
    out = np.zeros_like(X, dtype=complex)
    for d in range(-B, B + 1):
        col = band[:, B + d]
        if d >= 0:
            out[: span - d] += col[: span - d, None] * X[d:]
        else:
            out[-d:] += col[-d:, None] * X[: span + d]
    return out


def _x_image(config: PhysConfig, coeffs: np.ndarray, lo: int, span: int,
             offset: int, B: int) -> np.ndarray:
    """Coefficients of (x - na)|v> on [lo, lo+span), truncated to reach B."""
    out = np.zeros(span, dtype=complex)
    src = np.nonzero(coeffs)[0]
    for j in src:
        m_j = offset + j
        d = np.arange(max(lo, m_j - B), min(lo + span, m_j + B + 1)) - m_j
        d = d[d != 0]
        vals = -1j * ((-1.0) ** d) * config.a / (2 * np.pi * d)
        out[m_j - lo + d] += vals * coeffs[j]
    return out


def distance_norm(pair: CommutingPair, which: str, rho: DensityOperator,
                  bandwidth: int = 384) -> NormResult:
    """Distance of X (or P) to the canonical operator in the state rho.

    The value is the finite-dispersion-restricted trace of
    (A - a) rho (A - a); the literal (A^2 - 2 A a + a^2) ordering, their
    difference, the remainder-channel d^2 term and the Tr(A [a, rho]) term
    are returned alongside.
    """
    if which not in ("X", "P"):
        raise ValueError("which must be 'X' or 'P'")
    cfg = pair.config
    a, b = cfg.a, cfg.b
    macro = cfg.macro
    m_lo_t, m_hi_t = cfg.window_m_range
    B = bandwidth
    lo = m_lo_t - B
    span = (m_hi_t + B) - lo + 1
    m_all = lo + np.arange(span)
    chi_signs = ((-1.0) ** np.arange(macro)) * 2.0 ** (-cfg.N / 2)

    pos = lit = d2 = mass = 0.0
    comm = 0.0 + 0.0j

    M_values = np.arange(cfg.M_range[0], cfg.M_range[1] + 1)
    d_idx = np.arange(1, B + 1)
    m2_vals = ((-1.0) ** d_idx) * a ** 2 / (2 * np.pi ** 2 * d_idx ** 2)

    for n in range(cfg.n_range[0], cfg.n_range[1] + 1):
        band = rho.cell_band(cfg, n, lo, lo + span - 1, B)
        # covered mass and block diagonals
        diag = np.real(band[:, B])
        if which == "X":
            # positive reading: Tr(rho x_c PiL x_c) with PiL = 1 - sum chi chi+
            col_sums = np.array([np.sum(band[: span - d, B + d]) for d in d_idx])
            toeplitz_term = float(a ** 2 / 12 * np.sum(diag)
                                  + np.sum(2 * np.real(col_sums) * m2_vals))
            # remainder-channel images eta = x_c chi, all macro-cells at once
            etas = np.zeros((span, len(M_values)), dtype=complex)
            chi_sand = np.zeros(len(M_values))
            for k, M in enumerate(M_values):
                base = M * macro
                etas[:, k] = _x_image(cfg, chi_signs, lo, span, base, B)
            R_eta = _banded_matvec(band, B, etas)
            eta_terms = np.real(np.einsum("ik,ik->k", etas.conj(), R_eta))
            pos += toeplitz_term - float(np.sum(eta_terms))
            # literal ordering: sum_i <x_c^2 psi_i | rho | psi_i>
            # equals Tr(rho x_c^2 PiL) = Tr(rho x_c^2) - sum <x_c^2 chi|rho|chi>
            lit += toeplitz_term  # same Toeplitz part
            x2chi = np.zeros((span, len(M_values)), dtype=complex)
            chis = np.zeros((span, len(M_values)), dtype=complex)
            for k, M in enumerate(M_values):
                base = M * macro
                sl = slice(base - lo, base - lo + macro)
                chis[sl, k] = chi_signs
                v = np.zeros(span, dtype=complex)
                dd = np.arange(-B, B + 1)
                m2_row = np.where(dd == 0, a ** 2 / 12,
                                  ((-1.0) ** dd) * a ** 2 / (2 * np.pi ** 2
                                                             * np.maximum(np.abs(dd), 1) ** 2))
                for j in range(macro):
                    m_j = base + j
                    seg = np.arange(max(lo, m_j - B), min(lo + span, m_j + B + 1))
                    v[seg - lo] += m2_row[seg - m_j + B] * chi_signs[j]
                x2chi[:, k] = v
            R_chi = _banded_matvec(band, B, chis)
            lit -= float(np.sum(np.real(np.einsum("ik,ik->k", x2chi.conj(), R_chi))))
            # d^2 channel and Tr(X [x, rho])
            d2 += float(np.sum(np.real(np.einsum("ik,ik->k", x2chi.conj(), R_chi))))
            xchi = etas
            im_part = np.imag(np.einsum("ik,ik->k", xchi.conj(), R_chi))
            # Tr(E_block [x, rho]) = Tr_block[x, rho] - <chi|[x, rho]|chi>;
            # the full-slot trace of a commutator with banded rho needs the
            # M1 column sums
            m1_vals = -1j * ((-1.0) ** d_idx) * a / (2 * np.pi * d_idx)
            tr_xrho = 2j * np.imag(np.sum(np.conj(m1_vals) * col_sums))
            per_block_tr = tr_xrho / max(len(M_values), 1)
            comm += pair.X_value(n) * (tr_xrho - np.sum(2j * im_part))
            mass += float(np.sum(diag)) - float(np.sum(np.real(
                np.einsum("ik,ik->k", chis.conj(), R_chi))))
        else:
            for k, M in enumerate(M_values):
                base = M * macro
                sl = slice(base - lo, base - lo + macro)
                blk = np.empty((macro, macro), dtype=complex)
                for i in range(macro):
                    dd = np.arange(macro) - i
                    blk[i] = band[base - lo + i, B + dd]
                label = pair.P_value(M)
                dg = label - b * (base + np.arange(macro))
                chi = chi_signs
                # positive: Tr(rho Dg PiL Dg); literal: Tr(rho Dg^2 PiL)
                pos_blk = np.sum(dg ** 2 * np.real(np.diag(blk)))
                v = dg * chi
                pos_blk -= float(np.real(np.vdot(v, blk @ v)))
                lit_blk = np.sum(dg ** 2 * np.real(np.diag(blk)))
                w = (dg ** 2) * chi
                lit_blk -= float(np.real(np.vdot(w, blk @ chi)))
                pos += pos_blk
                lit += lit_blk
                d2 += float(np.real(np.vdot(w, blk @ chi)))
                pchi = b * (base + np.arange(macro)) * chi
                comm += label * (-2j) * float(np.imag(np.vdot(pchi, blk @ chi)))
                mass += float(np.sum(np.real(np.diag(blk)))
                              - np.real(np.vdot(chi, blk @ chi)))
    if which == "P":
        mass /= 1.0  # already level-restricted per block
    slow = slow_variation_metric(cfg, rho)
    covered = mass if which == "P" else mass / max(len(M_values), 1) * len(M_values)
    return NormResult(
        axis=which,
        norm=float(np.sqrt(max(pos, 0.0))),
        norm2_positive=float(pos),
        norm2_literal=float(lit),
        ordering_difference=float(lit - pos),
        d2_channel=float(d2),
        commutator_term=comm,
        covered_mass=float(covered),
        norm2_normalized=float(pos / covered) if covered > 0 else float("nan"),
        slow_variation=slow,
        bandwidth=B,
    )


def closeness_product(pair: CommutingPair, rho: DensityOperator,
                      bandwidth: int = 384) -> dict:
    """Product of the two distance norms and the closeness constant."""
    nx = distance_norm(pair, "X", rho, bandwidth)
    npr = distance_norm(pair, "P", rho, bandwidth)
    product = nx.norm * npr.norm
    hbar = pair.config.hbar
    N = pair.config.N
    return {
        "norm_X": nx,
        "norm_P": npr,
        "product": product,
        "C_measured": product / hbar,
        "C_predicted": 2.0 ** (N / 2) * np.pi / (3 * np.sqrt(2)),
    }


def pseudoclassical_approximation(pair: CommutingPair, rho: DensityOperator
                                  ) -> tuple[DensityOperator, float]:
    """Best commuting-diagonal approximation and its trace distance to rho.

    rho' carries weight Tr(E'_nM rho)/TrE' on every finite-dispersion state of
    cell (n, M) plus the remainder-channel weights <chi|rho|chi>, so traces
    match.  The trace distance is evaluated per position cell on the full
    window span (cross-cell coherences of broad-in-momentum states are
    exponentially negligible and the neglected mass is reported by the
    truncation accounting, not here).
    """
    cfg = pair.config
    from .lattice_states import level_states_of_cell
    mix: list[tuple[float, LatticeState]] = []
    m_lo, m_hi = cfg.window_m_range
    span = m_hi - m_lo + 1
    td = 0.0
    for n in range(cfg.n_range[0], cfg.n_range[1] + 1):
        full = _full_cell_block(rho, cfg, n, m_lo, m_hi)
        prime = np.zeros_like(full)
        for M in range(cfg.M_range[0], cfg.M_range[1] + 1):
            base = M * cfg.macro - m_lo
            sl = slice(base, base + cfg.macro)
            blk = full[sl, sl]
            chi = build_remainder_state(cfg, n, M)
            c_chi = float(np.real(np.vdot(chi.coeffs, blk @ chi.coeffs)))
            c_lvl = float(np.real(np.trace(blk))) - c_chi
            w_state = c_lvl / (cfg.macro - 1)
            proj = np.eye(cfg.macro) - np.outer(chi.coeffs, chi.coeffs.conj())
            prime[sl, sl] = w_state * proj + c_chi * np.outer(chi.coeffs, chi.coeffs.conj())
            if w_state > 1e-15:
                for s in level_states_of_cell(cfg, n, M):
                    mix.append((w_state, s))
            if c_chi > 1e-15:
                mix.append((c_chi, chi))
        td += 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(full - prime))))
    rho_prime = DensityOperator(lattice=mix)
    return rho_prime, td


def _full_cell_block(rho: DensityOperator, cfg: PhysConfig, n: int,
                     m_lo: int, m_hi: int) -> np.ndarray:
    if rho.lattice is not None:
        return rho._lattice_block(cfg, n, m_lo, m_hi)
    if rho.gauss is not None and rho.gauss.cov_qp == 0.0:
        span = m_hi - m_lo + 1
        m = m_lo + np.arange(span)
        S = (m[:, None] + m[None, :]).astype(float)
        D = m[:, None] - m[None, :]
        G = rho._gauss_G(cfg, S)
        F = rho._gauss_F(cfg, n, span - 1)
        corner = ((-1.0) ** D) * rho._edge_mean(cfg, n) * rho._gauss_H(cfg, S)
        return (G * F[D + (span - 1)] - corner) / cfg.a
    return rho._grid_block(cfg, n, m_lo, m_hi)


def regime_estimate(dx: float, dv: float, mass: float,
                    hbar: float = HBAR_SI) -> float:
    """Number of phase-space cells a (dx, dv) specification leaves open."""
    if dx <= 0 or dv <= 0 or mass <= 0:
        raise ValueError("inputs must be positive")
    return mass * dv * dx / hbar
