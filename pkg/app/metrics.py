"""
Metrics Module

Steady-state figures of merit computed from traces: the mean relative deviation to
the reference node, nearest-rank confidence intervals of the absolute offset, the
fitted synchronized line, convergence detection and oscillation diagnostics.

Windows are half-open epoch ranges (start, end). The default window drops the first
20% of the trace as transient.

Dependencies:
    - numpy for array reductions
    - Pydantic domain models for the summaries
"""
import math
import numpy as np
from config import CONVERGENCE_HOLD, CONVERGENCE_THRESHOLD, TRANSIENT_FRACTION
from app.exceptions import MetricsInputError
from models.models import ConvergenceResult, MetricsSummary, RunStatus, SynchronizedLine, Trace

Window = tuple[int, int]

# -----------------------------------
# Windows and Offsets
# -----------------------------------
def resolve_window(trace: Trace, window: Window | None = None) -> Window:
    """Return an explicit (start, end) window, defaulting to the post-transient part of the trace."""
    if window is None:
        window = (int(math.floor(trace.steps * TRANSIENT_FRACTION)), trace.steps)
    start, end = window
    if not 0 <= start < end <= trace.steps:
        raise MetricsInputError(f"window {window} is empty or outside 0..{trace.steps}")
    return start, end


def client_offsets(trace: Trace, window: Window | None = None) -> np.ndarray:
    """Offsets of every non-reference node over the window, shape (epochs, nodes - 1)."""
    start, end = resolve_window(trace, window)
    if len(trace.node_ids) < 2:
        raise MetricsInputError("offset metrics need at least two nodes")
    offsets = trace.offset_to_leader[start:end]
    return np.delete(offsets, trace.reference_index, axis=1)


# -----------------------------------
# Deviation and Confidence Intervals
# -----------------------------------
def mean_relative_deviation(trace: Trace, window: Window | None = None) -> float:
    """
    Square root of S_n, the mean over non-reference nodes of the windowed mean squared
    offset to the reference node.
    """
    offsets = client_offsets(trace, window)
    return float(np.sqrt(np.mean(offsets ** 2)))


def per_node_deviation(trace: Trace, window: Window | None = None) -> dict[int, float]:
    """Root mean square offset to the reference node, per non-reference node."""
    offsets = client_offsets(trace, window)
    clients = [node for node in trace.node_ids if node != trace.reference_node]
    return {node: float(np.sqrt(np.mean(offsets[:, idx] ** 2))) for idx, node in enumerate(clients)}


def confidence_interval(trace: Trace, window: Window | None = None, q: float = 99.0) -> float:
    """
    Nearest-rank q-th percentile of |x_i - x_ref| pooled over non-reference nodes.

    Args:
        trace (Trace): Run to measure.
        window (Window, optional): Epoch range.
        q (float): Percentile in (0, 100]; 100 gives the maximum.

    Returns:
        float: Offset bound in seconds.

    Raises:
        MetricsInputError: If q is out of range or the pool is empty.
    """
    if not 0 < q <= 100:
        raise MetricsInputError(f"percentile must lie in (0, 100], got {q}")
    pool = np.sort(np.abs(client_offsets(trace, window)).ravel())
    if pool.size == 0:
        raise MetricsInputError("no offset samples in the window")
    rank = max(1, math.ceil(q * pool.size / 100.0))
    return float(pool[rank - 1])


# -----------------------------------
# Synchronized Line and Convergence
# -----------------------------------
def fit_synchronized_line(trace: Trace, tail_window: Window | None = None) -> SynchronizedLine:
    """
    Least-squares line x_i = r * t + x fitted per node over the tail window.

    Times are centered before fitting. Returns the mean slope and intercept across nodes
    and their spreads (max - min), which vanish when the nodes are synchronized.

    Raises:
        MetricsInputError: If the window holds fewer than two epochs.
    """
    start, end = resolve_window(trace, tail_window)
    if end - start < 2:
        raise MetricsInputError("fitting a line needs at least two epochs")

    t = trace.times[start:end]
    x = trace.x[start:end]
    t_mean = t.mean()
    dt = t - t_mean
    slopes = dt @ (x - x.mean(axis=0)) / float(dt @ dt)
    intercepts = x.mean(axis=0) - slopes * t_mean
    return SynchronizedLine(
        r_hat=float(slopes.mean()),
        x_hat=float(intercepts.mean()),
        slope_spread=float(np.ptp(slopes)),
        intercept_spread=float(np.ptp(intercepts)),
    )


def detect_convergence(trace: Trace, threshold: float = CONVERGENCE_THRESHOLD, hold: int = CONVERGENCE_HOLD,
                       until_end: bool = True) -> ConvergenceResult:
    """
    Detect when the largest inter-node offset settles below `threshold`.

    By default the settled stretch must run from the reported epoch to the end of the
    trace and last at least `hold` epochs, which is stricter than a hold window: a run
    that dips below the threshold and leaves again is not converged. With
    `until_end=False` the first run of `hold` consecutive epochs below the threshold is
    enough. Diverged runs never converge.

    Args:
        trace (Trace): Run to inspect.
        threshold (float): Largest inter-node offset in seconds.
        hold (int): Required consecutive epochs below the threshold.
        until_end (bool): Require the offsets to stay below the threshold to the end.

    Returns:
        ConvergenceResult: Flag and the first epoch of the settled stretch.
    """
    if not threshold > 0:
        raise MetricsInputError(f"convergence threshold must be positive, got {threshold}")
    if trace.status is RunStatus.DIVERGED:
        return ConvergenceResult(converged=False)

    hold = max(hold, 1)
    spread = np.ptp(trace.x, axis=1) if trace.x.shape[1] > 1 else np.zeros(trace.steps)
    inside = spread < threshold
    if not until_end:
        run_length = 0
        for k, ok in enumerate(inside):
            run_length = run_length + 1 if ok else 0
            if run_length == hold:
                return ConvergenceResult(converged=True, first_step=k - hold + 1)
        return ConvergenceResult(converged=False)

    outside = np.flatnonzero(~inside)
    first = int(outside[-1]) + 1 if outside.size else 0
    if trace.steps - first < hold:
        return ConvergenceResult(converged=False)
    return ConvergenceResult(converged=True, first_step=first)


# -----------------------------------
# Oscillation Diagnostics
# -----------------------------------
def peak_offset(trace: Trace, window: Window) -> float:
    return float(np.abs(client_offsets(trace, window)).max())


def growth_ratio(trace: Trace, early: Window = (25, 75), late: Window = (150, 200)) -> float:
    """Peak |offset| over the late window divided by the peak over the early window."""
    return peak_offset(trace, late) / peak_offset(trace, early)


def count_sign_changes(trace: Trace, node: int, window: Window | None = None) -> int:
    """Number of sign flips of a node's offset to the reference node; exact zeros are skipped."""
    start, end = resolve_window(trace, window or (0, trace.steps))
    series = trace.offset_to_leader[start:end, trace.node_ids.index(node)]
    signs = np.sign(series[series != 0])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def reentry_step(trace: Trace, node: int, band: float, after: int = 0) -> int | None:
    """
    First epoch at or after `after` from which the node's |offset| stays within `band`
    until the end of the trace, or None if it never settles.
    """
    if not band > 0:
        raise MetricsInputError(f"band must be positive, got {band}")
    if not 0 <= after < trace.steps:
        raise MetricsInputError(f"start epoch {after} is outside 0..{trace.steps - 1}")
    series = np.abs(trace.offset_to_leader[after:, trace.node_ids.index(node)])
    outside = np.flatnonzero(~(series <= band))
    if outside.size == 0:
        return after
    first = after + int(outside[-1]) + 1
    return first if first < trace.steps else None


def summarize(trace: Trace, window: Window | None = None, convergence_threshold: float = CONVERGENCE_THRESHOLD,
              hold: int = CONVERGENCE_HOLD) -> MetricsSummary:
    """Collect the deviation, confidence intervals, convergence and fitted line of a trace."""
    window = resolve_window(trace, window)
    convergence = detect_convergence(trace, convergence_threshold, hold)

    r_hat = x_hat = None
    if trace.status is RunStatus.COMPLETED and window[1] - window[0] >= 2:
        line = fit_synchronized_line(trace, window)
        r_hat, x_hat = line.r_hat, line.x_hat

    return MetricsSummary(
        sqrt_S_n=mean_relative_deviation(trace, window),
        ci99=confidence_interval(trace, window, 99.0),
        ci100=confidence_interval(trace, window, 100.0),
        converged=convergence.converged,
        convergence_step=convergence.first_step,
        empirical_r_star=r_hat,
        empirical_x_star=x_hat,
        window=window,
    )
