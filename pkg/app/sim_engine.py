"""
Simulation Engine Module

Discrete-time simulation of a network of drifting clocks. Every poll interval each
node measures its offsets to the nodes it follows, aggregates them with the edge
weights and applies the skewless update or its reference scheme. Measurements use the
clock readings at the measuring instant; in synchronous mode every node reads the same
pre-update snapshot.

Phase-shifted mode gives node i the epochs k * tau + phase_i. Between its epochs a
clock runs at rate r * s, so a neighbor's reading at any instant follows from its last
state. With all phases zero it reproduces the synchronous run exactly.

Dependencies:
    - numpy for seeded random streams and trace arrays
    - concurrent.futures for process-parallel sweeps
    - Logging for divergence and topology events
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from config import MAX_WORKERS
from app.clock_core import advance, baseline_correction, draw_skews, initial_state, relative_frequency_error, skewless_update
from app.exceptions import DegenerateIntervalError
from app.topology import default_weights, make_wheel
from models.models import (ZERO_CORRECTION, ClockState, JitterKind, JitterModel, NodeSetup, ProtocolParams, RunStatus,
                           Scheduling, SimulationConfig, Topology, Trace)

EdgeKey = tuple[int, int]

# -----------------------------------
# Measurement
# -----------------------------------
@lru_cache(maxsize=64)
def _neighbors(topology: Topology) -> dict[int, tuple[tuple[int, float], ...]]:
    table: dict[int, list[tuple[int, float]]] = {node: [] for node in topology.nodes}
    for edge in sorted(topology.edges, key=lambda e: (e.source, e.target)):
        table[edge.source].append((edge.target, edge.alpha))
    return {node: tuple(pairs) for node, pairs in table.items()}


def draw_noise(topology: Topology, jitter: JitterModel, rng: np.random.Generator,
               jitter_edges: frozenset[EdgeKey] | None = None) -> dict[EdgeKey, float]:
    """
    Midpoint error (eta_fwd - eta_bwd) / 2 for every jittered edge, drawn in sorted edge order.

    Args:
        topology (Topology): Current graph.
        jitter (JitterModel): Noise model.
        rng (np.random.Generator): Stream consumed by the draws.
        jitter_edges (frozenset, optional): Noisy edges; None means every edge.

    Returns:
        dict: (i, j) -> noise in seconds; edges without jitter are absent.
    """
    if jitter.kind is JitterKind.NONE:
        return {}
    noisy = sorted(
        (edge.source, edge.target) for edge in topology.edges
        if jitter_edges is None or (edge.source, edge.target) in jitter_edges
    )
    if not noisy:
        return {}
    delays = rng.integers(0, jitter.levels, size=(len(noisy), 2)) * jitter.granularity
    return {key: float((fwd - bwd) / 2.0) for key, (fwd, bwd) in zip(noisy, delays)}


class Measurement(BaseModel):
    """Offsets of one measurement round and the midpoint noise realized on each jittered edge."""
    model_config = ConfigDict(frozen=True)

    offsets: dict[EdgeKey, float]
    noise: dict[EdgeKey, float]


def measure_offsets(states: Sequence[ClockState], topology: Topology, jitter: JitterModel, rng: np.random.Generator,
                    jitter_edges: frozenset[EdgeKey] | None = None,
                    reading: Callable[[int, int], float] | None = None) -> Measurement:
    """
    Offsets D_ij = x_j - x_i plus the ping-pong midpoint error on jittered edges.

    Args:
        states (Sequence[ClockState]): Snapshot of every node.
        topology (Topology): Edges to measure.
        jitter (JitterModel): Noise model; NONE gives exact offsets.
        rng (np.random.Generator): Stream for the noise.
        jitter_edges (frozenset, optional): Noisy edges; None means every edge.
        reading (Callable, optional): reading(i, j) is the clock of j as read at i's
            measuring instant; the snapshot value x_j when omitted.

    Returns:
        Measurement: (i, j) -> D_ij in seconds, and the noise drawn for this round.
    """
    x = {state.node_id: state.x for state in states}
    read = reading or (lambda source, target: x[target])
    noise = draw_noise(topology, jitter, rng, jitter_edges)
    offsets = {
        (edge.source, edge.target): read(edge.source, edge.target) - x[edge.source]
        + noise.get((edge.source, edge.target), 0.0)
        for edge in topology.edges
    }
    return Measurement(offsets=offsets, noise=noise)


# -----------------------------------
# World and Stepping
# -----------------------------------
class World(BaseModel):
    """
    Mutable-by-copy simulation state at epoch k.

    Attributes:
        config (SimulationConfig): Run definition.
        k (int): Epoch index of `states`.
        topology (Topology): Graph in force.
        states (tuple[ClockState, ...]): Per-node states at epoch k, ordered by id.
        previous_s (tuple[float, ...]): Skew corrections in force before epoch k.
        last_offset (tuple[float | None, ...]): Aggregated offsets measured at epoch k - 1.
        last_x (tuple[float | None, ...]): Own readings at epoch k - 1.
        noise (np.ndarray): Noise realized in the last measurement round, n x n.
        rng (np.random.Generator): Stream for the measurement noise.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: SimulationConfig
    k: int = 0
    topology: Topology
    states: tuple[ClockState, ...]
    previous_s: tuple[float, ...]
    last_offset: tuple[float | None, ...]
    last_x: tuple[float | None, ...]
    noise: np.ndarray
    rng: np.random.Generator


def make_world(config: SimulationConfig) -> World:
    """Initial world: step-0 states and a generator seeded from the config seed."""
    states = tuple(initial_state(setup) for setup in config.nodes)
    n = len(states)
    return World(
        config=config,
        topology=config.topology,
        states=states,
        previous_s=tuple(state.s for state in states),
        last_offset=(None,) * n,
        last_x=(None,) * n,
        noise=np.zeros((n, n)),
        rng=np.random.default_rng(np.random.SeedSequence(config.seed)),
    )


def _phase(config: SimulationConfig, node: int) -> float:
    if config.scheduling is Scheduling.SYNCHRONOUS:
        return 0.0
    return config.phases.get(node, 0.0)


def _reading(world: World, node: int, at_phase: float) -> float:
    """Clock reading of `node` at k * tau + at_phase."""
    state = world.states[node - 1]
    lag = at_phase - _phase(world.config, node)
    if lag == 0:
        return state.x
    rate_s = state.s if lag > 0 else world.previous_s[node - 1]
    return state.x + state.r * rate_s * lag


def _frequency_error(world: World, idx: int, offset: float, x_now: float) -> float:
    prev_offset, prev_x = world.last_offset[idx], world.last_x[idx]
    if prev_offset is None:
        return 0.0
    try:
        return relative_frequency_error(offset, prev_offset, x_now, prev_x)
    except DegenerateIntervalError:
        logging.debug(f"Node {idx + 1}: clock did not advance; frequency error taken as 0")
        return 0.0


def step(world: World) -> World:
    """
    Advance every node from epoch k to k + 1.

    Offsets are measured against epoch-k states at each node's own epoch instant, then
    each node applies the skewless update or its reference scheme. Nodes without
    neighbors see a zero aggregated offset.

    Args:
        world (World): State at epoch k.

    Returns:
        World: State at epoch k + 1, with the realized noise of this round.
    """
    config, params = world.config, world.config.params
    neighbors = _neighbors(world.topology)
    n = len(world.states)
    measurement = measure_offsets(world.states, world.topology, config.jitter, world.rng, config.jitter_edges,
                                  reading=lambda source, target: _reading(world, target, _phase(config, source)))
    noise_matrix = np.zeros((n, n))
    for (i, j), value in measurement.noise.items():
        noise_matrix[i - 1, j - 1] = value

    new_states, offsets, readings = [], [], []
    for idx, (state, setup) in enumerate(zip(world.states, config.nodes)):
        node = state.node_id
        own = state.x
        weighted_offset = 0.0
        for target, alpha in neighbors[node]:
            weighted_offset += alpha * measurement.offsets[(node, target)]

        if setup.scheme is None:
            updated = skewless_update(advance(state, params, ZERO_CORRECTION), weighted_offset, params)
        elif not neighbors[node]:
            updated = advance(state, params, ZERO_CORRECTION)
        else:
            f_err = _frequency_error(world, idx, weighted_offset, own)
            updated = advance(state, params, baseline_correction(setup.scheme, weighted_offset, f_err))

        new_states.append(updated)
        offsets.append(weighted_offset)
        readings.append(own)

    return world.model_copy(update={
        "k": world.k + 1,
        "states": tuple(new_states),
        "previous_s": tuple(state.s for state in world.states),
        "last_offset": tuple(offsets),
        "last_x": tuple(readings),
        "noise": noise_matrix,
    })


def apply_events(world: World) -> World:
    """Apply the scheduled events of the current epoch."""
    events = [event for event in world.config.events if event.step == world.k]
    for event in events:
        if event.action == "set-edges":
            logging.info(f"Step {world.k}: topology replaced ({len(event.topology.edges)} edges)")
            world = world.model_copy(update={"topology": event.topology})
        else:
            logging.info(f"Step {world.k}: node {event.node} offset shifted by {event.amount} s")
            states = list(world.states)
            target = states[event.node - 1]
            states[event.node - 1] = target.model_copy(update={"x": target.x + event.amount})
            world = world.model_copy(update={"states": tuple(states)})
    return world


def record_row(world: World) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Readings, skew corrections and moving averages at epoch k.

    Readings are taken at the common instant k * tau + max phase, which is every node's
    epoch instant in synchronous mode.
    """
    config = world.config
    common = max((_phase(config, node) for node in world.topology.nodes), default=0.0)
    x = np.array([_reading(world, state.node_id, common) for state in world.states])
    s = np.array([state.s for state in world.states])
    y = np.array([state.y for state in world.states])
    return x, s, y


# -----------------------------------
# Runs
# -----------------------------------
def run(config: SimulationConfig) -> Trace:
    """
    Run a configuration for `config.steps` epochs (row 0 is the initial state).

    The run halts as diverged when an offset to the reference node exceeds the
    divergence threshold or stops being finite; the trace then ends at that epoch.

    Args:
        config (SimulationConfig): Validated run definition.

    Returns:
        Trace: Per-epoch readings, states and realized noise.
    """
    world = make_world(config)
    n, steps = config.topology.n, config.steps
    ref = config.reference_node - 1
    x, s, y = np.zeros((steps, n)), np.zeros((steps, n)), np.zeros((steps, n))
    noise = np.zeros((steps, n, n))
    status, diverged_at, last = RunStatus.COMPLETED, None, steps

    x[0], s[0], y[0] = record_row(world)
    for k in range(1, steps):
        world = step(world)
        noise[k - 1] = world.noise
        world = apply_events(world)
        x[k], s[k], y[k] = record_row(world)

        offsets = x[k] - x[k, ref]
        if not (np.all(np.isfinite(x[k])) and np.all(np.isfinite(s[k])) and np.all(np.isfinite(y[k]))) \
                or np.abs(offsets).max() > config.divergence_threshold:
            status, diverged_at, last = RunStatus.DIVERGED, k, k + 1
            logging.warning(f"Run diverged at step {k} (threshold {config.divergence_threshold} s)")
            break

    return Trace(
        node_ids=tuple(config.topology.nodes),
        reference_node=config.reference_node,
        tau=config.params.tau,
        times=np.arange(last) * config.params.tau,
        x=x[:last],
        s=s[:last],
        y=y[:last],
        noise=noise[:last],
        status=status,
        diverged_at=diverged_at,
        seed=config.seed,
    )


def spawn_seeds(seed: int, count: int) -> list[int]:
    """Independent integer seeds for `count` runs, derived from (seed, run index)."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def run_many(configs: Sequence[SimulationConfig], max_workers: int = MAX_WORKERS) -> list[Trace]:
    """Run independent configurations, in a process pool when max_workers > 1."""
    if max_workers <= 1 or len(configs) <= 1:
        return [run(config) for config in configs]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run, configs))


# -----------------------------------
# Wheel Sweep
# -----------------------------------
EXP2_CLIENTS = 9
EXP2_TAU = 0.5
EXP2_STEPS = 1500


def experiment_two_skews(seed: int, count: int = EXP2_CLIENTS) -> np.ndarray:
    """Client skews of the wheel sweep, drawn from a stream spawned from `seed` so they do not depend on K."""
    return draw_skews(count, np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0]))


def experiment_two_config(K: int, jitter_max: float, seed: int, params: ProtocolParams,
                          steps: int = EXP2_STEPS, granularity: float = 1e-3) -> SimulationConfig:
    """
    Wheel of 9 clients around leader 1 with ping-pong jitter on the leader links only.

    Client skews are drawn from +-100 ppm with a stream spawned from `seed`; the same
    seed gives the same skews and the same leader-link noise for every K.
    """
    topology = default_weights(make_wheel(EXP2_CLIENTS, K), params.c)
    skews = experiment_two_skews(seed)

    nodes = (NodeSetup(node_id=1, r=1.0),) + tuple(
        NodeSetup(node_id=i + 2, r=float(skew)) for i, skew in enumerate(skews)
    )
    jitter = JitterModel(kind=JitterKind.UNIFORM_PING_PONG, jitter_max=jitter_max, granularity=granularity)
    return SimulationConfig(
        topology=topology,
        params=params,
        nodes=nodes,
        jitter=jitter,
        jitter_edges=frozenset((node, 1) for node in range(2, EXP2_CLIENTS + 2)),
        steps=steps,
        seed=seed,
    )


def run_experiment_two(K: int, jitter_max: float, seed: int, params: ProtocolParams | None = None,
                       steps: int = EXP2_STEPS) -> Trace:
    """Build and run the wheel configuration for one K."""
    if params is None:
        params = ProtocolParams(kappa1=1.1, kappa2=1.0, p=0.99, tau=EXP2_TAU, c=0.7)
    return run(experiment_two_config(K, jitter_max, seed, params, steps))


def matrix_iterate(A: np.ndarray, z0: np.ndarray, steps: int) -> np.ndarray:
    """Iterate z_k+1 = A z_k and return the steps x 3n history, row 0 being z0."""
    history = np.zeros((steps, z0.shape[0]))
    history[0] = z0
    for k in range(1, steps):
        history[k] = A @ history[k - 1]
    return history


def stack_state(states: Mapping[int, ClockState] | Sequence[ClockState]) -> np.ndarray:
    """z = (x, s, y) for a snapshot, ordered by node id."""
    ordered = sorted(states.values() if isinstance(states, Mapping) else states, key=lambda st: st.node_id)
    return np.concatenate([[st.x for st in ordered], [st.s for st in ordered], [st.y for st in ordered]])
