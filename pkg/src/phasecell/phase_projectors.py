"""Exact rank-(2^N - 1) projectors onto the finite-dispersion subspace of
each phase-space macro-cell, their translates, moments, and diagnostics.

A cell projector is stored as identity-minus-rank-one: on the 2^N-dimensional
window subspace of macro-cell (n, M) it acts as I - |chi><chi| with chi the
cell's remainder state.  Exclusivity across cells and idempotence then hold
exactly in coefficient arithmetic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .density import DensityOperator
from .lattice_states import (
    LatticeState,
    PhysConfig,
    build_remainder_state,
    level_states_of_cell,
    position_moment,
    shift_state,
    state_from_json,
    state_to_json,
)

__all__ = [
    "CellProjector",
    "RegionProjector",
    "build_cell_projector",
    "projector_matrix",
    "shifted_projector",
    "exhaustivity_deficit",
    "projector_moments",
    "recenter",
    "balian_low_diagnostic",
    "cell_xp_matrices",
]


@dataclass(frozen=True)
class CellProjector:
    config: PhysConfig
    cell: tuple[int, int]  # (n, M)
    complement: LatticeState
    p_offset: float = 0.0  # spectral recentering, units of 2*pi*hbar/a

    @property
    def rank(self) -> int:
        return self.config.macro - 1

    @property
    def trace(self) -> int:
        return self.config.macro - 1

    def level_states(self) -> list[LatticeState]:
        return level_states_of_cell(self.config, *self.cell)

    def window_slots(self) -> np.ndarray:
        lo = self.cell[1] * self.config.macro
        return lo + np.arange(self.config.macro)

    def p_label(self) -> float:
        """Spectral momentum label of this cell, b*(M*2^N + offset)."""
        return self.config.b * (self.cell[1] * self.config.macro + self.p_offset)

    def apply(self, state: LatticeState) -> np.ndarray:
        """Coefficients of E|s> on the cell's window slots (zero off-cell)."""
        slots = self.window_slots()
        v = np.zeros(len(slots), dtype=complex)
        if state.cell_n != self.cell[0]:
            return v
        src = state.m_indices
        inside = (src >= slots[0]) & (src <= slots[-1])
        v[src[inside] - slots[0]] = state.full_coeffs()[inside]
        chi = self.complement.coeffs
        return v - chi * np.vdot(chi, v)


@dataclass(frozen=True)
class RegionProjector:
    """Sum of cell projectors over a finite set of macro-cells."""

    config: PhysConfig
    cells: frozenset[tuple[int, int]]

    def __post_init__(self):
        for n, M in self.cells:
            self.config.check_cell(n, M)

    @property
    def trace(self) -> int:
        return len(self.cells) * (self.config.macro - 1)

    def probability(self, rho: DensityOperator) -> float:
        total = 0.0
        for n, M in sorted(self.cells):
            E = build_cell_projector(self.config, n, M)
            total += cell_trace(E, rho)
        return total


def build_cell_projector(config: PhysConfig, n: int, M: int) -> CellProjector:
    config.check_cell(n, M)
    return CellProjector(config, (n, M), build_remainder_state(config, n, M))


def projector_matrix(E: CellProjector) -> np.ndarray:
    """Dense window-basis matrix on the cell, I - chi chi^dagger."""
    chi = E.complement.coeffs
    return np.eye(len(chi), dtype=complex) - np.outer(chi, chi.conj())


def shifted_projector(E: CellProjector, dn: int, dM: int) -> CellProjector:
    """Unitary displacement by dn position cells and dM macro momentum cells."""
    chi = shift_state(E.config, E.complement, dn, dM)
    n, M = E.cell
    return CellProjector(E.config, (n + dn, M + dM), chi, E.p_offset)


def cell_trace(E: CellProjector, rho: DensityOperator) -> float:
    """Tr(E rho) = Tr(block) - <chi| rho |chi> over the cell's window slots."""
    blk = rho.macro_block(E.config, *E.cell)
    chi = E.complement.coeffs
    return float(np.real(np.trace(blk) - np.vdot(chi, blk @ chi)))


def exhaustivity_deficit(config: PhysConfig, rho: DensityOperator) -> tuple[float, dict]:
    """1 - sum over all truncated cells of Tr(E_nM rho).

    Equals the remainder-channel mass plus what the truncated basis fails to
    capture; the breakdown is returned alongside.
    """
    chi_channel = 0.0
    for n in range(config.n_range[0], config.n_range[1] + 1):
        for M in range(config.M_range[0], config.M_range[1] + 1):
            chi = build_remainder_state(config, n, M)
            chi_channel += rho.sandwich(config, chi)
    capture = rho.trace_in_truncation(config)
    deficit = 1.0 - (capture - chi_channel)
    detail = {
        "chi_channel": chi_channel,
        "basis_capture_deficit": 1.0 - capture,
        "physical_tail_mass": rho.physical_tail_mass(config)
        if rho.gauss is not None else float("nan"),
    }
    return deficit, detail


@dataclass(frozen=True)
class ProjectorMoments:
    mean_x: float
    var_x: float
    mean_p: float
    var_p: float
    mean_p_relative: float  # mean_p minus the cell's spectral label
    var_p_within: float     # dispersion-weighted level average, no mean spread
    var_p_mean_spread: float
    var_p_leading: float    # large-N form of the within part
    var_x_leading: float


def projector_moments(E: CellProjector) -> ProjectorMoments:
    """Moments of E/TrE as a density operator, exact mixture formulas."""
    cfg = E.config
    a, b = cfg.a, cfg.b
    n, M = E.cell
    states = E.level_states()
    cnt = len(states)
    # position: every level state shares <x> = na; mixture variance from the
    # exact second moments
    x2 = np.array([position_moment(cfg, s, 2) for s in states])
    mean_x = n * a
    var_x = float(np.mean(x2)) - mean_x ** 2
    # momentum: exact per-state means and dispersions in closed form
    means, variances = [], []
    for s in states:
        K = int(s.label.split("(")[1].split(",")[0])
        lo = s.m_offset
        means.append(b * (lo + 2 ** (K - 1) - 0.5))
        variances.append(b ** 2 * (4 ** K - 1) / 12.0)
    means = np.array(means)
    variances = np.array(variances)
    mean_p = float(np.mean(means))
    var_within = float(np.mean(variances))
    var_spread = float(np.mean(means ** 2)) - mean_p ** 2
    return ProjectorMoments(
        mean_x=mean_x,
        var_x=var_x,
        mean_p=mean_p,
        var_p=var_within + var_spread,
        mean_p_relative=mean_p - E.p_label(),
        var_p_within=var_within,
        var_p_mean_spread=var_spread,
        var_p_leading=2.0 ** (cfg.N + 1) * np.pi ** 2 * cfg.hbar ** 2 / (3 * a ** 2),
        var_x_leading=a ** 2 / 12.0,
    )


def recenter(E: CellProjector) -> CellProjector:
    """Absorb the cell's mean momentum into the spectral label.

    A momentum translation by <p>_E would leave the integer window lattice, so
    the recentering is realized as a label convention: downstream spectra use
    P_M = b*(M*2^N + offset) and only differences P_M - p enter.
    """
    mom = projector_moments(E)
    offset = mom.mean_p / E.config.b - E.cell[1] * E.config.macro
    return replace(E, p_offset=offset)


def cell_xp_matrices(config: PhysConfig, n: int, M: int,
                     halfwidth: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Window-basis matrices of x and p on slots of macro-cell (n, M),
    optionally widened by `halfwidth` slots on both sides.

    p is diagonal in the principal-value sense; products of these matrices
    reproduce true operator sandwiches exactly whenever bra or ket vanishes at
    the cell endpoints (all finite-dispersion states do).
    """
    lo = M * config.macro - (halfwidth or 0)
    hi = (M + 1) * config.macro - 1 + (halfwidth or 0)
    m = np.arange(lo, hi + 1)
    delta = m[None, :] - m[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        x_off = np.where(delta != 0,
                         -1j * ((-1.0) ** delta) * config.a / (2 * np.pi * delta),
                         0.0)
    x_mat = n * config.a * np.eye(len(m)) + x_off
    p_mat = np.diag(config.b * m).astype(complex)
    return x_mat, p_mat


def balian_low_diagnostic(E: CellProjector) -> dict:
    """Trace of E[x, p]; nonzero because the family is not exhaustive.

    For an exhaustive, translation-covariant projector family this trace would
    have to vanish, forcing Tr E = 0; here it equals i*hbar*TrE exactly, with
    the remainder channel contributing the compensating -i*hbar*TrE so the
    full cell trace vanishes.
    """
    cfg = E.config
    x_mat, p_mat = cell_xp_matrices(cfg, *E.cell)
    comm = x_mat @ p_mat - p_mat @ x_mat
    chi = E.complement.coeffs
    chi_term = complex(np.vdot(chi, comm @ chi))
    total = complex(np.trace(comm))
    value = total - chi_term
    return {
        "commutator_trace": value,
        "expected": 1j * cfg.hbar * E.trace,
        "chi_channel": chi_term,
        "cell_total": total,
        "trace_E": E.trace,
    }


def projector_to_json(E: CellProjector) -> str:
    return json.dumps({
        "N": E.config.N,
        "cell": list(E.cell),
        "complement_state": json.loads(state_to_json(E.complement)),
        "p_offset": E.p_offset,
    }, sort_keys=True)


def projector_from_json(config: PhysConfig, text: str) -> CellProjector:
    d = json.loads(text)
    if d["N"] != config.N:
        raise ValueError("halving depth mismatch")
    chi = state_from_json(json.dumps(d["complement_state"]))
    return CellProjector(config, tuple(d["cell"]), chi, d["p_offset"])
