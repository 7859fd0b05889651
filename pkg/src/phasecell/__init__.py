"""Phase-space lattice states, exact cell projectors, and a commuting
position/momentum pair, with the audits that quantify how close the pair is
to the canonical operators on decohered states."""

from .lattice_states import (
    PhysConfig,
    LatticeIndex,
    LatticeState,
    eval_window_position,
    eval_window_momentum,
    halving_coefficients,
    build_window_state,
    build_level_state,
    build_remainder_state,
    inner_product,
    position_moment,
    momentum_moment,
    shift_state,
)

__version__ = "0.1.0"
