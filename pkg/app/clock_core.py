"""
Clock Core Module

Per-node clock arithmetic: advancing a drifting clock over one poll interval,
the skewless update of the skew correction and moving average, the relative
frequency error, and the corrections of the reference schemes.

All functions are pure. Aggregating offsets over neighbors is left to the caller,
so nothing here knows about the measurement graph.

Dependencies:
    - numpy for the seeded skew draws
    - Pydantic domain models for clock states and corrections
"""
import math
import numpy as np
from config import SKEW_SPREAD
from app.exceptions import ClockDomainError, DegenerateIntervalError
from models.models import BaselineKind, BaselineScheme, ClockState, CorrectionPair, NodeSetup, ProtocolParams

# -----------------------------------
# Helpers
# -----------------------------------
def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ClockDomainError(f"{name} must be finite, got {value}")


def initial_state(setup: NodeSetup) -> ClockState:
    """Build the step-0 clock state of a node from its configured initial conditions."""
    return ClockState(node_id=setup.node_id, r=setup.r, x=setup.x0, s=setup.s0, y=setup.y0)


def draw_skews(n: int, rng: np.random.Generator, spread: float = SKEW_SPREAD) -> np.ndarray:
    """
    Draw n true skews uniformly from [1 - spread, 1 + spread].

    Args:
        n (int): Number of skews.
        rng (np.random.Generator): Seeded generator.
        spread (float): Half-width of the interval; defaults to 100 ppm.

    Returns:
        np.ndarray: Skews, all strictly positive.
    """
    if not 0 <= spread < 1:
        raise ClockDomainError(f"skew spread must lie in [0, 1), got {spread}")
    return rng.uniform(1.0 - spread, 1.0 + spread, size=n)


# -----------------------------------
# Clock Updates
# -----------------------------------
def advance(state: ClockState, params: ProtocolParams, corr: CorrectionPair) -> ClockState:
    """
    Advance a clock over one poll interval.

    x' = x + tau * r * s + u_x and s' = s + u_s; r and y are carried over.

    Args:
        state (ClockState): Clock at t_k.
        params (ProtocolParams): Supplies tau.
        corr (CorrectionPair): Corrections applied within (t_k, t_k+1).

    Returns:
        ClockState: Clock at t_k+1.

    Raises:
        ClockDomainError: If any input is not finite.
    """
    _require_finite(x=state.x, s=state.s, y=state.y, r=state.r, u_x=corr.u_x, u_s=corr.u_s)
    return state.model_copy(update={
        "x": state.x + params.tau * state.r * state.s + corr.u_x,
        "s": state.s + corr.u_s,
    })


def skewless_update(state: ClockState, weighted_offset: float, params: ProtocolParams) -> ClockState:
    """
    Update the skew correction and the moving average from the aggregated offset.

    s' = s + kappa1 * wo - kappa2 * y and y' = p * wo + (1 - p) * y. The steered time
    is left alone; it only moves through `advance` with a zero offset correction.

    Args:
        state (ClockState): Clock whose s and y are updated.
        weighted_offset (float): Sum over neighbors of alpha_ij * D_ij, in seconds.
        params (ProtocolParams): Gains and moving-average weight.

    Returns:
        ClockState: Clock with the new s and y.

    Raises:
        ClockDomainError: If any input is not finite.
    """
    _require_finite(s=state.s, y=state.y, weighted_offset=weighted_offset)
    return state.model_copy(update={
        "s": state.s + params.kappa1 * weighted_offset - params.kappa2 * state.y,
        "y": params.p * weighted_offset + (1.0 - params.p) * state.y,
    })


def relative_frequency_error(D_now: float, D_prev: float, x_now: float, x_prev: float) -> float:
    """
    Relative frequency error over the last measurement interval.

    Args:
        D_now (float): Offset measured at the current epoch.
        D_prev (float): Offset measured at the previous epoch.
        x_now (float): Own clock reading at the current epoch.
        x_prev (float): Own clock reading at the previous epoch.

    Returns:
        float: (D_now - D_prev) / (x_now - x_prev).

    Raises:
        DegenerateIntervalError: If both readings coincide.
    """
    _require_finite(D_now=D_now, D_prev=D_prev, x_now=x_now, x_prev=x_prev)
    if x_now == x_prev:
        raise DegenerateIntervalError(f"clock reading did not advance between epochs (x = {x_now})")
    return (D_now - D_prev) / (x_now - x_prev)


def baseline_correction(scheme: BaselineScheme, D: float, f_err: float) -> CorrectionPair:
    """
    Corrections of the reference schemes.

    Offset-plus-freq and skew-only read f_err; the others ignore it.
    """
    _require_finite(D=D, f_err=f_err)
    k1, k2 = scheme.kappa1, scheme.kappa2

    if scheme.kind is BaselineKind.OFFSET_ONLY:
        return CorrectionPair(u_x=k1 * D, u_s=0.0)
    if scheme.kind is BaselineKind.OFFSET_PLUS_FREQ:
        return CorrectionPair(u_x=k1 * D + k2 * f_err, u_s=0.0)
    if scheme.kind is BaselineKind.SKEW_ONLY:
        return CorrectionPair(u_x=0.0, u_s=k1 * D + k2 * f_err)
    if scheme.kind is BaselineKind.SKEW_AND_OFFSET:
        return CorrectionPair(u_x=k1 * D, u_s=k2 * D)
    # naive skew: proportional skew correction only, unstable under the one-step delay
    return CorrectionPair(u_x=0.0, u_s=k1 * D)
