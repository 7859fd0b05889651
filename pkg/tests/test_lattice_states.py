import json
from functools import lru_cache

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss
from scipy.integrate import simpson

from phasecell import (
    PhysConfig,
    LatticeIndex,
    build_level_state,
    build_remainder_state,
    build_window_state,
    eval_window_momentum,
    eval_window_position,
    halving_coefficients,
    inner_product,
    momentum_moment,
    position_moment,
    shift_state,
)
from phasecell.errors import DivergentMoment, TruncationError
from phasecell.lattice_states import (
    LatticeState,
    level_states_of_cell,
    momentum_amplitude,
    momentum_tail_exponent,
    position_amplitude,
    state_from_json,
    state_to_json,
)

CFG = PhysConfig(N=3, n_range=(-4, 4), M_range=(-4, 4))


# ---------------------------------------------------------------- oracles

@lru_cache(maxsize=8)
def _gl(nodes):
    return leggauss(nodes)


def oracle_position_moment(cfg, state, order, nodes=4000):
    """x-space Gauss-Legendre quadrature over the cell, independent of the
    closed-form matrix elements."""
    xs, ws = _gl(nodes)
    xs = state.cell_n * cfg.a + xs * cfg.a / 2
    ws = ws * cfg.a / 2
    dens = np.abs(position_amplitude(cfg, state, xs)) ** 2
    return float(np.sum(xs ** order * dens * ws))


def oracle_momentum_moment(cfg, state, order, u_cut=600 * np.pi, npts=2 ** 18 + 1):
    """Simpson quadrature of the momentum density on a dense uniform grid plus
    an averaged-envelope tail; independent of the library's Gauss-Legendre
    panels and exact oscillatory tail integrals."""
    ms = state.m_indices
    u = np.linspace(-u_cut, u_cut, npts)
    core = np.sinc((u[:, None] - 2 * np.pi * ms) / (2 * np.pi))
    w = np.abs(core @ state.coeffs) ** 2 / (2 * np.pi)
    val = float(simpson(w * u ** order, x=u))
    # averaged tail: sin^2 -> 1/2 applied to the Laurent envelope orders
    gamma = state.coeffs * ((-1.0) ** state.m_indices)
    beta = 2 * np.pi * ms.astype(float)
    T = [np.sum(gamma * beta ** (k - 1)) for k in range(1, 6)]
    for q in range(2, 7):
        A_q = sum(T[r - 1] * T[s_ - 1] for r in range(1, 6) for s_ in range(1, 6)
                  if r + s_ == q)
        j = q - order
        if j < 2:
            continue
        parity = 1.0 + (-1.0) ** (q + order)
        val += (2 / np.pi) * 0.5 * float(np.real(A_q)) * parity \
            / ((j - 1) * u_cut ** (j - 1))
    return (cfg.hbar / cfg.a) ** order * val


def recursion_states(cfg, N):
    """Level states built through the pairing recursion (independent route).

    Returns dict (K, m) -> coefficient vector over window indices starting at
    2^K m, built from chi^{K+1}_m = (chi^K_{2m+1} + chi^K_{2m})/sqrt(2) and
    psi^{K+1}_m = (chi^K_{2m+1} - chi^K_{2m})/sqrt(2).
    """
    span = 2 ** N
    chi = {m: np.eye(span)[m] for m in range(span)}  # chi^(0) = windows
    levels = {}
    for K in range(1, N + 1):
        n_next = span // 2 ** K
        psi_new, chi_new = {}, {}
        for m in range(n_next):
            if K == 1:
                psi_new[m] = (chi[2 * m] + chi[2 * m + 1]) / np.sqrt(2)
                chi_new[m] = (chi[2 * m] - chi[2 * m + 1]) / np.sqrt(2)
            else:
                psi_new[m] = (chi[2 * m + 1] - chi[2 * m]) / np.sqrt(2)
                chi_new[m] = (chi[2 * m + 1] + chi[2 * m]) / np.sqrt(2)
        for m, v in psi_new.items():
            levels[(K, m)] = v
        chi = chi_new
    return levels, chi[0]


# ---------------------------------------------------------------- window states

def test_window_position_values():
    a = CFG.a
    assert eval_window_position(CFG, LatticeIndex(0, 0), 0.0) == pytest.approx(1 / np.sqrt(a))
    assert eval_window_position(CFG, LatticeIndex(0, 0), 0.6 * a) == 0.0
    val = eval_window_position(CFG, LatticeIndex(1, 2), a)
    assert val == pytest.approx(1 / np.sqrt(a))


def test_window_position_boundary_half():
    v = eval_window_position(CFG, LatticeIndex(0, 0), CFG.a / 2)
    assert v == pytest.approx(0.5 / np.sqrt(CFG.a))


def test_window_momentum_peak_and_normalization():
    peak = eval_window_momentum(CFG, LatticeIndex(0, 0), 0.0)
    assert peak == pytest.approx(np.sqrt(CFG.a / (2 * np.pi * CFG.hbar)))
    # L2 normalization by quadrature over p in [-200 b, 200 b]
    b = CFG.b
    p = np.linspace(-200 * b, 200 * b, 2 ** 20 + 1)
    dens = np.abs(eval_window_momentum(CFG, LatticeIndex(0, 0), p)) ** 2
    val = float(simpson(dens, x=p))
    # the exact missing tail mass is 2*(a/pi^2 hbar)*(hbar/a)/u_cut ~ 1.6e-4
    assert val == pytest.approx(1.0, abs=2e-3)
    assert val < 1.0


def test_window_momentum_removable_singularity():
    b = CFG.b
    exact_limit = np.sqrt(CFG.a / (2 * np.pi * CFG.hbar))
    near = eval_window_momentum(CFG, LatticeIndex(0, 3), 3 * b + 1e-12)
    at = eval_window_momentum(CFG, LatticeIndex(0, 3), 3 * b)
    assert at == pytest.approx(exact_limit)
    assert near == pytest.approx(at, rel=1e-9)


def test_window_momentum_one_over_p_decay():
    ps = np.array([50.0, 100.0, 200.0, 400.0]) * CFG.b + 0.11 * CFG.b
    vals = np.abs(eval_window_momentum(CFG, LatticeIndex(0, 0), ps))
    ratio = vals[:-1] / vals[1:]
    assert np.all(np.abs(ratio - 2.0) < 0.1)


def test_window_momentum_translation_phase():
    ps = np.linspace(-3 * CFG.b, 3 * CFG.b, 11) + 0.077
    v0 = eval_window_momentum(CFG, LatticeIndex(0, 2), ps)
    v1 = eval_window_momentum(CFG, LatticeIndex(1, 2), ps)
    assert np.allclose(v1, v0 * np.exp(-1j * CFG.a * ps / CFG.hbar), atol=1e-14)


# ---------------------------------------------------------------- halving hierarchy

def test_halving_coefficients_match_worked_examples():
    assert np.array_equal(halving_coefficients(1), [1, 1])
    assert np.array_equal(halving_coefficients(2), [1, -1, -1, 1])
    assert np.array_equal(halving_coefficients(3), [1, -1, 1, -1, -1, 1, -1, 1])


def test_level_state_examples():
    s = build_level_state(CFG, 1, 0, 0)
    assert s.m_offset == 0
    assert np.allclose(s.coeffs, np.array([1, 1]) / np.sqrt(2))
    s = build_level_state(CFG, 2, 0, 1)
    assert s.m_offset == 4
    assert np.allclose(s.coeffs, np.array([1, -1, -1, 1]) / 2)
    s = build_level_state(CFG, 3, 2, 0)
    assert np.allclose(s.coeffs, np.array([1, -1, 1, -1, -1, 1, -1, 1]) / 2 ** 1.5)


def test_remainder_state_alternating():
    s = build_remainder_state(CFG, 0, 0)
    assert np.allclose(s.coeffs, np.array([1, -1, 1, -1, 1, -1, 1, -1]) / 2 ** 1.5)


def test_level_state_count_per_macro_cell():
    for N in (2, 3, 4, 5):
        cfg = PhysConfig(N=N, n_range=(-1, 1), M_range=(-1, 1))
        states = level_states_of_cell(cfg, 0, 0)
        assert len(states) == 2 ** N - 1
        per_level = {}
        for s in states:
            K = int(s.label.split("(")[1].split(",")[0])
            per_level[K] = per_level.get(K, 0) + 1
        for K in range(1, N + 1):
            assert per_level[K] == 2 ** (N - K)


def test_orthonormality_and_completeness_per_cell():
    for N in (2, 3, 4):
        cfg = PhysConfig(N=N, n_range=(-1, 1), M_range=(-1, 1))
        states = level_states_of_cell(cfg, 0, 0) + [build_remainder_state(cfg, 0, 0)]
        span = 2 ** N
        G = np.zeros((span, span), dtype=complex)
        for i, si in enumerate(states):
            for j, sj in enumerate(states):
                ip = inner_product(si, sj)
                assert abs(ip - (1.0 if i == j else 0.0)) < 1e-12
            v = np.zeros(span, dtype=complex)
            v[si.m_offset - 0: si.m_offset + len(si.coeffs)] = si.coeffs
            G += np.outer(v, v.conj())
        assert np.max(np.abs(G - np.eye(span))) < 1e-12


def test_cross_cell_inner_products_vanish():
    s1 = build_window_state(CFG, 0, 3)
    s2 = build_window_state(CFG, 1, 3)
    assert inner_product(s1, s2) == 0
    l1 = build_level_state(CFG, 2, 0, 0)
    l2 = build_level_state(CFG, 2, 1, 0)
    assert inner_product(l1, l2) == 0


def test_level_vs_remainder_orthogonal_exactly():
    chi = build_remainder_state(CFG, 0, 0)
    for K in range(1, CFG.N + 1):
        for msub in range(2 ** (CFG.N - K)):
            psi = build_level_state(CFG, K, 0, msub)
            assert abs(inner_product(chi, psi)) < 1e-14


def test_recursion_matches_closed_form_up_to_sign():
    for N in (2, 3, 4):
        cfg = PhysConfig(N=N, n_range=(-1, 1), M_range=(-1, 1))
        rec_levels, rec_chi = recursion_states(cfg, N)
        for (K, m), vec in rec_levels.items():
            s = build_level_state(cfg, K, 0, m)
            full = np.zeros(2 ** N, dtype=complex)
            full[s.m_offset: s.m_offset + len(s.coeffs)] = s.coeffs
            same = np.allclose(full, vec, atol=1e-14)
            flipped = np.allclose(full, -vec, atol=1e-14)
            assert same or flipped
        chi = build_remainder_state(cfg, 0, 0)
        assert np.allclose(chi.coeffs, rec_chi, atol=1e-14) or \
            np.allclose(chi.coeffs, -rec_chi, atol=1e-14)


def test_out_of_truncation_raises():
    with pytest.raises(TruncationError):
        build_level_state(CFG, 3, 0, 5)  # window support beyond M_range
    with pytest.raises(TruncationError):
        build_remainder_state(CFG, 7, 0)
    with pytest.raises(ValueError):
        build_level_state(CFG, CFG.N + 1, 0, 0)


# ---------------------------------------------------------------- moments

def test_fiducial_position_mean_is_zero():
    for K in range(1, 4):
        s = build_level_state(CFG, K, 0, 0)
        assert position_moment(CFG, s, 1) == pytest.approx(0.0, abs=1e-14)


def test_window_state_position_mean_is_cell_center():
    s = build_window_state(CFG, 2, 5)
    assert position_moment(CFG, s, 1) == pytest.approx(2 * CFG.a)
    assert position_moment(CFG, s, 2) == pytest.approx((2 * CFG.a) ** 2 + CFG.a ** 2 / 12)


def test_position_moments_match_quadrature_oracle():
    cfg = PhysConfig(N=5, n_range=(-2, 2), M_range=(-2, 2))
    for K in range(1, 6):
        s = build_level_state(cfg, K, 1, 0)
        for order in (1, 2):
            lib = position_moment(cfg, s, order)
            orc = oracle_position_moment(cfg, s, order)
            assert lib == pytest.approx(orc, abs=2e-12)


def test_fiducial_momentum_mean_closed_form():
    cfg = PhysConfig(N=5, n_range=(-2, 2), M_range=(-2, 2))
    for K in range(1, 6):
        s = build_level_state(cfg, K, 0, 0)
        expect = cfg.b * (2 ** (K - 1) - 0.5)
        assert momentum_moment(cfg, s, 1) == pytest.approx(expect, rel=1e-8)


def test_fiducial_momentum_dispersion_closed_form():
    cfg = PhysConfig(N=5, n_range=(-2, 2), M_range=(-2, 2))
    for K in range(1, 6):
        s = build_level_state(cfg, K, 0, 0)
        m1 = momentum_moment(cfg, s, 1)
        m2 = momentum_moment(cfg, s, 2)
        expect = cfg.b ** 2 * (4 ** K - 1) / 12
        assert (m2 - m1 ** 2) == pytest.approx(expect, rel=1e-7)


def test_momentum_moments_match_adaptive_oracle():
    s = build_level_state(CFG, 2, 0, 0)
    for order in (1, 2):
        lib = momentum_moment(CFG, s, order)
        orc = oracle_momentum_moment(CFG, s, order)
        assert lib == pytest.approx(orc, rel=2e-7)


def test_divergent_moment_flagged():
    for s in (build_window_state(CFG, 0, 0), build_remainder_state(CFG, 0, 0)):
        with pytest.raises(DivergentMoment):
            momentum_moment(CFG, s, 2)
        # first moment stays finite (principal value)
        momentum_moment(CFG, s, 1)


def test_tail_exponent_matches_exact_criterion():
    # finite dispersion iff the alternating coefficient sum vanishes
    for s, finite in [
        (build_level_state(CFG, 3, 0, 0), True),
        (build_level_state(CFG, 1, 0, 1), True),
        (build_remainder_state(CFG, 0, 0), False),
        (build_window_state(CFG, 0, 2), False),
    ]:
        gamma_sum = np.sum(s.coeffs * (-1.0) ** s.m_indices)
        expo = momentum_tail_exponent(CFG, s)
        if finite:
            assert abs(gamma_sum) < 1e-14 and expo < -3.5
        else:
            assert abs(gamma_sum) > 0.1 and expo > -2.5


def test_momentum_mean_of_shifted_level_state():
    s = build_level_state(CFG, 2, 0, 1)  # windows 4..7
    expect = CFG.b * (4 + 2 - 0.5)
    assert momentum_moment(CFG, s, 1) == pytest.approx(expect, rel=1e-8)


# ---------------------------------------------------------------- shifts

def test_shift_moves_level_state():
    s = build_level_state(CFG, 2, 0, 0)
    t = shift_state(CFG, s, 3, 0)
    direct = build_level_state(CFG, 2, 3, 0)
    assert abs(abs(inner_product(t, direct)) - 1) < 1e-14
    t2 = shift_state(CFG, s, 0, 1)
    assert t2.m_offset == s.m_offset + CFG.macro


def test_shift_preserves_inner_products():
    rng = np.random.default_rng(7)
    for _ in range(5):
        c1 = rng.normal(size=4) + 1j * rng.normal(size=4)
        c2 = rng.normal(size=4) + 1j * rng.normal(size=4)
        s1 = LatticeState(0, 0, c1 / np.linalg.norm(c1), "window(0)")
        s2 = LatticeState(0, 2, c2 / np.linalg.norm(c2), "window(2)")
        before = inner_product(s1, s2)
        after = inner_product(shift_state(CFG, s1, 1, 1), shift_state(CFG, s2, 1, 1))
        assert after == pytest.approx(before, abs=1e-14)


def test_shift_composition_up_to_global_phase():
    s = build_level_state(CFG, 1, 0, 0)
    one = shift_state(CFG, shift_state(CFG, s, 1, 3, window_units=True),
                      2, 5, window_units=True)
    both = shift_state(CFG, s, 3, 8, window_units=True)
    ov = inner_product(one, both)
    assert abs(abs(ov) - 1) < 1e-14


def test_shift_truncation_overflow():
    s = build_level_state(CFG, 1, 0, 0)
    with pytest.raises(TruncationError):
        shift_state(CFG, s, 10, 0)
    with pytest.raises(TruncationError):
        shift_state(CFG, s, 0, 10)


# ---------------------------------------------------------------- misc

def test_remainder_concentrates_at_cell_edges():
    fractions = []
    for N in (2, 3, 4, 5):
        cfg = PhysConfig(N=N, n_range=(-1, 1), M_range=(-1, 1))
        chi = build_remainder_state(cfg, 0, 0)
        xs, ws = _gl(4000)
        xs = xs * cfg.a / 2
        ws = ws * cfg.a / 2
        dens = np.abs(position_amplitude(cfg, chi, xs)) ** 2
        edge = np.abs(xs) > cfg.a / 2 - cfg.a / 8
        fractions.append(float(np.sum(dens[edge] * ws[edge])))
    assert all(f2 > f1 for f1, f2 in zip(fractions, fractions[1:]))


def test_state_json_round_trip():
    s = build_level_state(CFG, 2, -1, 1)
    text = state_to_json(s)
    d = json.loads(text)
    assert set(d) == {"cell_n", "m_offset", "coeffs", "label"}
    t = state_from_json(text)
    assert t.cell_n == s.cell_n and t.m_offset == s.m_offset
    assert np.allclose(t.coeffs, s.coeffs)
    assert t.label == "level(2,1)"


def test_config_invariants():
    with pytest.raises(ValueError):
        PhysConfig(hbar=-1)
    with pytest.raises(ValueError):
        PhysConfig(N=0)
    with pytest.raises(ValueError):
        PhysConfig(n_range=(3, 1))
    cfg = PhysConfig(N=2, n_range=(0, 1), M_range=(0, 1))
    assert cfg.basis_size == 2 * 8
