"""Window-state basis and the halving hierarchy of finite-dispersion states.

The basis consists of plane waves restricted to position cells of length a
(one state per phase-space cell of area 2*pi*hbar).  Alternating-sign
combinations of 2^K consecutive momentum indices within one position cell
("level-K states") have finite momentum dispersion; the single leftover
alternating combination per macro-cell ("remainder state") keeps the 1/p
momentum tail.  All coefficient algebra here is exact; quadrature enters only
through the momentum-moment evaluator and the test oracles.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergentMoment, TruncationError
from .quadrature import gl_nodes, sin2_half_tail

__all__ = [
    "PhysConfig",
    "LatticeIndex",
    "LatticeState",
    "eval_window_position",
    "eval_window_momentum",
    "halving_coefficients",
    "build_window_state",
    "build_level_state",
    "build_remainder_state",
    "inner_product",
    "position_moment",
    "momentum_moment",
    "momentum_tail_exponent",
    "shift_state",
    "position_amplitude",
    "momentum_amplitude",
    "x_matrix_element",
    "x2_matrix_element",
    "state_to_json",
    "state_from_json",
]


@dataclass(frozen=True)
class PhysConfig:
    """Physical and truncation parameters.

    n_range and M_range are inclusive integer intervals of position cells and
    macro momentum cells.  The window-index truncation is derived: macro-cell
    M covers window indices M*2^N .. (M+1)*2^N - 1.
    """

    hbar: float = 1.0
    a: float = 1.0
    N: int = 3
    n_range: tuple[int, int] = (-8, 8)
    M_range: tuple[int, int] = (-8, 8)
    quad_points: int = 10

    def __post_init__(self):
        if self.hbar <= 0 or self.a <= 0:
            raise ValueError("hbar and a must be positive")
        if self.N < 1:
            raise ValueError("halving depth N must be >= 1")
        if self.n_range[0] > self.n_range[1] or self.M_range[0] > self.M_range[1]:
            raise ValueError("n_range and M_range must be nonempty inclusive intervals")
        if self.quad_points < 2:
            raise ValueError("quad_points must be >= 2")

    @property
    def b(self) -> float:
        """Momentum lattice spacing 2*pi*hbar/a (one state per cell)."""
        return 2.0 * np.pi * self.hbar / self.a

    @property
    def macro(self) -> int:
        """Window states per macro-cell, 2^N."""
        return 2 ** self.N

    @property
    def window_m_range(self) -> tuple[int, int]:
        lo = self.M_range[0] * self.macro
        hi = (self.M_range[1] + 1) * self.macro - 1
        return lo, hi

    @property
    def basis_size(self) -> int:
        n_lo, n_hi = self.n_range
        m_lo, m_hi = self.window_m_range
        return (n_hi - n_lo + 1) * (m_hi - m_lo + 1)

    def check_cell(self, n: int, M: int) -> None:
        if not (self.n_range[0] <= n <= self.n_range[1]):
            raise TruncationError(f"position cell n={n} outside {self.n_range}")
        if not (self.M_range[0] <= M <= self.M_range[1]):
            raise TruncationError(f"macro cell M={M} outside {self.M_range}")

    def check_window_span(self, n: int, m_lo: int, m_hi: int) -> None:
        if not (self.n_range[0] <= n <= self.n_range[1]):
            raise TruncationError(f"position cell n={n} outside {self.n_range}")
        w_lo, w_hi = self.window_m_range
        if m_lo < w_lo or m_hi > w_hi:
            raise TruncationError(
                f"window indices [{m_lo}, {m_hi}] outside truncation [{w_lo}, {w_hi}]"
            )


@dataclass(frozen=True)
class LatticeIndex:
    n: int
    m: int


@dataclass(frozen=True)
class LatticeState:
    """Finite coefficient vector over consecutive window indices of one cell."""

    cell_n: int
    m_offset: int
    coeffs: np.ndarray
    label: str
    phase: complex = 1.0 + 0.0j  # global phase accumulated by shifts

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        object.__setattr__(self, "coeffs", c)
        nrm = np.linalg.norm(c)
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"state coefficients not normalized: |c| = {nrm!r}")

    @property
    def m_indices(self) -> np.ndarray:
        return self.m_offset + np.arange(len(self.coeffs))

    def full_coeffs(self) -> np.ndarray:
        return self.phase * self.coeffs


def eval_window_position(config: PhysConfig, idx: LatticeIndex, x) -> np.ndarray:
    """Amplitude of the window state (n, m) at position x.

    The window is the open interval |x - na| < a/2; endpoints get the value
    1/2 (a measure-zero convention fixed for reproducible pointwise output).
    """
    a = config.a
    x = np.asarray(x, dtype=float)
    xi = x - idx.n * a
    h = np.where(np.abs(xi) < a / 2, 1.0, 0.0)
    h = np.where(np.isclose(np.abs(xi), a / 2, rtol=0.0, atol=1e-15 * a), 0.5, h)
    return h * np.exp(2j * np.pi * idx.m * x / a) / np.sqrt(a)


def eval_window_momentum(config: PhysConfig, idx: LatticeIndex, p) -> np.ndarray:
    """Momentum amplitude of the window state (n, m); exactly L2-normalized.

    Equal to sqrt(a/(2 pi hbar)) * sinc((p a/hbar - 2 pi m)/(2 pi)) times the
    translation phase; the sinc form fills the removable singularity at
    p a/hbar = 2 pi m with its limit automatically.
    """
    a, hbar = config.a, config.hbar
    p = np.asarray(p, dtype=float)
    u = p * a / hbar
    core = np.sqrt(a / (2 * np.pi * hbar)) * np.sinc((u - 2 * np.pi * idx.m) / (2 * np.pi))
    return core * np.exp(-1j * idx.n * a * p / hbar)


def halving_coefficients(K: int) -> np.ndarray:
    """Unnormalized signs of the level-K combination over 2^K window slots.

    (-1)^j on the first half, -(-1)^j on the second half; the builder applies
    the 2^{-K/2} normalization.
    """
    if K < 1:
        raise ValueError("level K must be >= 1")
    j = np.arange(2 ** K)
    return np.where(j < 2 ** (K - 1), 1.0, -1.0) * ((-1.0) ** j)


def build_window_state(config: PhysConfig, n: int, m: int) -> LatticeState:
    config.check_window_span(n, m, m)
    return LatticeState(n, m, np.array([1.0 + 0.0j]), f"window({m})")


def build_level_state(config: PhysConfig, K: int, n: int, m: int) -> LatticeState:
    """Level-K state on window indices 2^K m .. 2^K m + 2^K - 1 of cell n."""
    if not (1 <= K <= config.N):
        raise ValueError(f"level K={K} outside 1..{config.N}")
    lo = 2 ** K * m
    config.check_window_span(n, lo, lo + 2 ** K - 1)
    c = halving_coefficients(K).astype(complex) * 2.0 ** (-K / 2)
    return LatticeState(n, lo, c, f"level({K},{m})")


def build_remainder_state(config: PhysConfig, n: int, M: int) -> LatticeState:
    """The single infinite-dispersion combination of macro-cell (n, M)."""
    config.check_cell(n, M)
    lo = M * config.macro
    j = np.arange(config.macro)
    c = ((-1.0) ** j).astype(complex) * 2.0 ** (-config.N / 2)
    return LatticeState(n, lo, c, f"remainder({config.N},{M})")


def level_states_of_cell(config: PhysConfig, n: int, M: int) -> list[LatticeState]:
    """All 2^N - 1 finite-dispersion states living on macro-cell (n, M)."""
    config.check_cell(n, M)
    out = []
    for K in range(1, config.N + 1):
        base = M * 2 ** (config.N - K)
        for msub in range(2 ** (config.N - K)):
            out.append(build_level_state(config, K, n, base + msub))
    return out


def inner_product(s1: LatticeState, s2: LatticeState) -> complex:
    """Exact Hermitian inner product; zero across distinct position cells."""
    if s1.cell_n != s2.cell_n:
        return 0.0 + 0.0j
    lo = min(s1.m_offset, s2.m_offset)
    hi = max(s1.m_offset + len(s1.coeffs), s2.m_offset + len(s2.coeffs))
    v1 = np.zeros(hi - lo, dtype=complex)
    v2 = np.zeros(hi - lo, dtype=complex)
    v1[s1.m_offset - lo: s1.m_offset - lo + len(s1.coeffs)] = s1.full_coeffs()
    v2[s2.m_offset - lo: s2.m_offset - lo + len(s2.coeffs)] = s2.full_coeffs()
    return complex(np.vdot(v1, v2))


def x_matrix_element(config: PhysConfig, delta: int) -> complex:
    """In-cell matrix element of (x - na) between window states m and m+delta."""
    if delta == 0:
        return 0.0 + 0.0j
    return -1j * ((-1.0) ** delta) * config.a / (2 * np.pi * delta)


def x2_matrix_element(config: PhysConfig, delta: int) -> float:
    """In-cell matrix element of (x - na)^2 between window states m and m+delta."""
    if delta == 0:
        return config.a ** 2 / 12.0
    return ((-1.0) ** delta) * config.a ** 2 / (2 * np.pi ** 2 * delta ** 2)


def _cross_correlation(c: np.ndarray) -> np.ndarray:
    """s[d] = sum_j conj(c_j) c_{j+d} for d = 1 .. len(c)-1."""
    L = len(c)
    return np.array([np.vdot(c[: L - d], c[d:]) for d in range(1, L)])


def position_moment(config: PhysConfig, s: LatticeState, order: int) -> float:
    """<x^order> from closed-form in-cell matrix elements (order 1 or 2)."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    a = config.a
    na = s.cell_n * a
    c = s.coeffs  # global phase cancels in expectations
    sd = _cross_correlation(c)
    d = np.arange(1, len(c))
    m1_in = 0.0
    if len(sd):
        m1_vals = -1j * ((-1.0) ** d) * a / (2 * np.pi * d)
        m1_in = float(np.sum(2.0 * np.real(sd * m1_vals)))
    if order == 1:
        return na + m1_in
    m2_in = float(a ** 2 / 12.0)
    if len(sd):
        m2_vals = ((-1.0) ** d) * a ** 2 / (2 * np.pi ** 2 * d ** 2)
        m2_in += float(np.sum(2.0 * np.real(sd) * m2_vals))
    return na ** 2 + 2 * na * m1_in + m2_in


def momentum_amplitude(config: PhysConfig, s: LatticeState, p) -> np.ndarray:
    """Momentum-space amplitude of a lattice state at momenta p."""
    a, hbar = config.a, config.hbar
    p = np.asarray(p, dtype=float)
    u = p * a / hbar
    ms = s.m_indices
    core = np.sinc((u[..., None] - 2 * np.pi * ms) / (2 * np.pi))
    amp = core @ s.full_coeffs()
    return np.sqrt(a / (2 * np.pi * hbar)) * amp * np.exp(-1j * s.cell_n * a * p / hbar)


def position_amplitude(config: PhysConfig, s: LatticeState, x) -> np.ndarray:
    a = config.a
    x = np.asarray(x, dtype=float)
    xi = x - s.cell_n * a
    h = np.where(np.abs(xi) < a / 2, 1.0, 0.0)
    h = np.where(np.isclose(np.abs(xi), a / 2, rtol=0.0, atol=1e-15 * a), 0.5, h)
    ph = np.exp(2j * np.pi * np.multiply.outer(x / a, s.m_indices))
    return h * (ph @ s.full_coeffs()) / np.sqrt(a)


def _u_density_factory(s: LatticeState):
    """Dimensionless momentum density w(u), u = p a / hbar; integrates to 1."""
    ms = s.m_indices.astype(float)
    c = s.coeffs

    def w(u):
        u = np.asarray(u, dtype=float)
        core = np.sinc((u[..., None] - 2 * np.pi * ms) / (2 * np.pi))
        amp = core @ c
        return np.abs(amp) ** 2 / (2 * np.pi)

    return w


def momentum_tail_exponent(config: PhysConfig, s: LatticeState) -> float:
    """Fitted power-law exponent of the momentum density's large-|p| envelope.

    Finite-dispersion states decay like 1/p^4, raw window and remainder
    states like 1/p^2; the fit averages over panels to wash out the sin^2
    oscillation.
    """
    w = _u_density_factory(s)
    beta_max = 2 * np.pi * (np.max(np.abs(s.m_indices)) + 1)
    centers = beta_max * np.array([40.0, 60.0, 90.0, 135.0, 200.0])
    means = []
    for c0 in centers:
        u = np.linspace(c0 * 0.9, c0 * 1.1, 4001)
        means.append(np.trapezoid(w(u) + w(-u), u) / (0.2 * c0))
    slope = np.polyfit(np.log(centers), np.log(means), 1)[0]
    return float(slope)


def _tail_coefficients(s: LatticeState, n_orders: int = 7) -> np.ndarray:
    """Laurent coefficients T_k = sum_j gamma_j beta_j^{k-1} of the pole sum."""
    ms = s.m_indices.astype(float)
    gamma = s.coeffs * ((-1.0) ** s.m_indices)
    beta = 2 * np.pi * ms
    return np.array([np.sum(gamma * beta ** (k - 1)) for k in range(1, n_orders + 1)])


def momentum_moment(config: PhysConfig, s: LatticeState, order: int,
                    pad_cycles: int = 512) -> float:
    """<p^order> by panel quadrature of the momentum density plus exact tails.

    Panels have width (2 pi hbar / a)/16 in p.  Beyond the symmetric cutoff
    the density is replaced by its Laurent expansion, whose sin^2(u/2)/u^k
    integrals are evaluated in closed form, keeping the truncated tail below
    1e-8 of the result.  order=2 raises DivergentMoment when the fitted tail
    exponent reveals a 1/p envelope.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if order == 2:
        expo = momentum_tail_exponent(config, s)
        if expo > -3.0:
            raise DivergentMoment(
                f"momentum density decays like |p|^{expo:.2f}; second moment diverges"
            )
    a, hbar = config.a, config.hbar
    w = _u_density_factory(s)
    beta_abs = 2 * np.pi * (np.max(np.abs(s.m_indices)) + 1)
    cut = beta_abs + 2 * np.pi * pad_cycles
    panel = 2 * np.pi / 16
    n_panels = int(np.ceil(2 * cut / panel))
    edges = np.linspace(-cut, cut, n_panels + 1)
    x0, w0 = gl_nodes(config.quad_points)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    u = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    wt = (half[:, None] * w0[None, :]).ravel()
    main = float(np.sum(u ** order * w(u) * wt))

    # analytic two-sided tail from the Laurent expansion about |u| -> infinity
    T = _tail_coefficients(s)
    tail = 0.0
    for q in range(2, len(T) + 2):
        A_q = sum(T[r - 1] * T[s_ - 1]
                  for r in range(1, len(T) + 1)
                  for s_ in range(1, len(T) + 1) if r + s_ == q)
        j = q - order
        if j < 2:
            continue  # absent for convergent moments (leading T's vanish)
        parity = 1.0 + (-1.0) ** (q + order)
        tail += (2 / np.pi) * float(np.real(A_q)) * parity * sin2_half_tail(cut, j)
    return (hbar / a) ** order * (main + tail)


def shift_state(config: PhysConfig, s: LatticeState, dn: int, dM: int,
                window_units: bool = False) -> LatticeState:
    """Lattice translation by dn position cells and dM macro momentum cells.

    window_units=True interprets dM as raw window-index steps instead.  The
    Weyl-ordering phase (-1)^{dn * dm} is tracked so shifted families stay
    exactly orthonormal and compositions agree up to a global unit phase.
    """
    dm = dM if window_units else dM * config.macro
    new_lo = s.m_offset + dm
    config.check_window_span(s.cell_n + dn, new_lo, new_lo + len(s.coeffs) - 1)
    ph = s.phase * ((-1.0) ** (dn * dm))
    return LatticeState(s.cell_n + dn, new_lo, s.coeffs, s.label, phase=ph)


def state_to_json(s: LatticeState) -> str:
    c = s.full_coeffs()
    return json.dumps({
        "cell_n": s.cell_n,
        "m_offset": s.m_offset,
        "coeffs": [[float(z.real), float(z.imag)] for z in c],
        "label": s.label,
    }, sort_keys=True)


def state_from_json(text: str) -> LatticeState:
    d = json.loads(text)
    c = np.array([complex(re, im) for re, im in d["coeffs"]])
    return LatticeState(d["cell_n"], d["m_offset"], c, d["label"])
