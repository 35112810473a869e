"""
Domain Models

Value types shared by the clock rules, the graph and stability analysis, the
simulator and the metrics. All of them are pydantic models; the ones that travel
between modules unchanged are frozen.
"""
import math
from enum import Enum
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from config import DIVERGENCE_THRESHOLD


# -----------------------------------
# Clock Types
# -----------------------------------
class ClockState(BaseModel):
    """
    One node's clock and the states the skewless rule keeps for it.

    Attributes:
        node_id (int): Node label, 1-based.
        r (float): True skew, seconds of clock advance per reference second.
        x (float): Steered time estimate in seconds.
        s (float): Skew-correction factor.
        y (float): Exponentially weighted offset average in seconds.
    """
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    node_id: int
    r: float = Field(gt=0)
    x: float = 0.0
    s: float = 1.0
    y: float = 0.0


class ProtocolParams(BaseModel):
    """
    Gains of the skewless update and the poll interval.

    Attributes:
        kappa1 (float): Gain on the current weighted offset.
        kappa2 (float): Gain on the moving average.
        p (float): Moving-average weight.
        tau (float): Poll interval in seconds.
        c (float): Commit factor, the total weight each non-leader puts on its neighbors.
        delta_kappa (float): kappa1 - kappa2, always derived.
    """
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    kappa1: float
    kappa2: float
    p: float
    tau: float = Field(gt=0)
    c: float = Field(default=0.7, gt=0)

    @computed_field
    @property
    def delta_kappa(self) -> float:
        return self.kappa1 - self.kappa2


class CorrectionPair(BaseModel):
    """Offset correction u_x (seconds) and skew correction u_s applied over one poll interval."""
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    u_x: float = 0.0
    u_s: float = 0.0


ZERO_CORRECTION = CorrectionPair()


class BaselineKind(str, Enum):
    OFFSET_ONLY = "offset-only"
    OFFSET_PLUS_FREQ = "offset-plus-freq"
    SKEW_ONLY = "skew-only"
    SKEW_AND_OFFSET = "skew-and-offset"
    NAIVE_SKEW = "naive-skew"


class BaselineScheme(BaseModel):
    """
    A reference correction rule with its gains.

    Attributes:
        kind (BaselineKind): Which rule.
        kappa1 (float): Gain on the offset.
        kappa2 (float): Second gain; unused by offset-only and naive-skew.
    """
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    kind: BaselineKind
    kappa1: float = Field(gt=0)
    kappa2: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _second_gain_required(self):
        if self.kind in (BaselineKind.OFFSET_PLUS_FREQ, BaselineKind.SKEW_ONLY, BaselineKind.SKEW_AND_OFFSET) \
                and self.kappa2 <= 0:
            raise ValueError(f"{self.kind.value} needs kappa2 > 0")
        return self

    @property
    def uses_frequency_error(self) -> bool:
        return self.kind in (BaselineKind.OFFSET_PLUS_FREQ, BaselineKind.SKEW_ONLY)


# -----------------------------------
# Graph Types
# -----------------------------------
class Edge(BaseModel):
    """
    A directed measurement edge.

    Attributes:
        source (int): Node that measures (alias "from").
        target (int): Node whose clock is read (alias "to").
        alpha (float | None): Positive weight, None until weights are assigned.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True, allow_inf_nan=False)

    source: int = Field(alias="from")
    target: int = Field(alias="to")
    alpha: float | None = Field(default=None, gt=0)


class Topology(BaseModel):
    """
    Weighted directed measurement graph over nodes 1..n.

    Attributes:
        n (int): Node count.
        edges (tuple[Edge, ...]): Measurement edges, at most one per ordered pair.
        leader_ids (frozenset[int]): Declared leaders; they have no outgoing edges.
    """
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    edges: tuple[Edge, ...] = ()
    leader_ids: frozenset[int] = frozenset()

    @model_validator(mode="after")
    def _check_graph(self):
        seen = set()
        for edge in self.edges:
            for node in (edge.source, edge.target):
                if not 1 <= node <= self.n:
                    raise ValueError(f"edge {edge.source}->{edge.target} references node {node} outside 1..{self.n}")
            if edge.source == edge.target:
                raise ValueError(f"self-loop on node {edge.source}")
            if (edge.source, edge.target) in seen:
                raise ValueError(f"duplicate edge {edge.source}->{edge.target}")
            seen.add((edge.source, edge.target))
        for leader in self.leader_ids:
            if not 1 <= leader <= self.n:
                raise ValueError(f"leader {leader} outside 1..{self.n}")
            if any(edge.source == leader for edge in self.edges):
                raise ValueError(f"leader {leader} has outgoing edges")
        return self

    @property
    def nodes(self) -> range:
        return range(1, self.n + 1)

    @property
    def is_weighted(self) -> bool:
        return all(edge.alpha is not None for edge in self.edges)

    def out_edges(self, node: int) -> tuple[Edge, ...]:
        return tuple(edge for edge in self.edges if edge.source == node)


# -----------------------------------
# Analysis Types
# -----------------------------------
class Verdict(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    NOT_COVERED = "not-covered"


class ConnectivityReport(BaseModel):
    """
    Both readings of "connected" and which one failed.

    Attributes:
        connected (bool): True when both checks pass.
        rooted_spanning_tree (bool): Exactly one sink strongly connected component.
        simple_zero_eigenvalue (bool): The Laplacian null space is one-dimensional.
        sink_components (int): Number of sink components of the condensation.
        failed (str | None): Name of the failing check, if any.
    """
    connected: bool
    rooted_spanning_tree: bool
    simple_zero_eigenvalue: bool
    sink_components: int
    failed: str | None = None


class Spectrum(BaseModel):
    """
    Eigenvalues of a dense matrix, sorted by real then imaginary part.

    Attributes:
        values (np.ndarray): Complex eigenvalues.
        all_real (bool): Every imaginary part is within `tolerance`.
        tolerance (float): 1e-9 * ||M|| at the time of the solve.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    all_real: bool
    tolerance: float

    @property
    def real(self) -> list[float]:
        return sorted(float(v) for v in self.values.real)

    @property
    def max_real(self) -> float:
        return float(self.values.real.max()) if self.values.size else 0.0


class ParameterConditions(BaseModel):
    """Conditions (i)-(iii) on (kappa1, kappa2, p, tau) for a given largest eigenvalue of LR."""
    cond_i: bool
    cond_ii: bool
    cond_iii: bool
    mu_max: float
    nu_bound: float
    tau_bound: float | None = None

    @property
    def all_hold(self) -> bool:
        return self.cond_i and self.cond_ii and self.cond_iii


class HermiteBiehlerDetails(BaseModel):
    """
    Closed-form Hurwitz test of the Moebius-transformed per-mode cubic.

    Attributes:
        nu (float): Mode eigenvalue of tau*L*R.
        coefficients (list[float]): a3, a2, a1, a0 of P(s).
        leading_condition (float): 2*kappa1/(delta_kappa*p) - 3, must be positive.
        omega_real (float | None): Positive zero of the real part of P(j*omega).
        omega_imag (float | None): Positive zero of the imaginary part of P(j*omega).
        interlaced (bool): 0 < omega_real < omega_imag.
        schur (bool): Final verdict on the cubic.
    """
    nu: float
    coefficients: list[float]
    leading_condition: float | None = None
    omega_real: float | None = None
    omega_imag: float | None = None
    interlaced: bool
    schur: bool


class SystemMatrix(BaseModel):
    """
    The 3n x 3n update matrix acting on z = (x, s, y).

    Attributes:
        matrix (np.ndarray): A itself.
        n (int): Node count.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray
    n: int

    def block(self, row: int, col: int) -> np.ndarray:
        """Block (row, col), 1-based, e.g. block(3, 1) is -p * L."""
        n = self.n
        return self.matrix[(row - 1) * n:row * n, (col - 1) * n:col * n]


class Lemma1Result(BaseModel):
    """
    Outcome of checking eig(A) against the roots of the per-mode cubics.

    Attributes:
        multiplicity_of_one (int): Eigenvalues of A within the radius of 1.
        eigenvalues (np.ndarray): Eigenvalues of A.
        mode_roots (np.ndarray): Union of the per-mode cubic roots.
        factorization_residual (float): Largest backward error sigma_min(A - rho I) / ||A|| of a mode root.
        pair_distance (float): Largest distance in the optimal pairing, informative only.
        matches (bool): Residual within the matching tolerance.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    multiplicity_of_one: int
    eigenvalues: np.ndarray
    mode_roots: np.ndarray
    factorization_residual: float
    pair_distance: float = 0.0
    matches: bool


class FixedPointPrediction(BaseModel):
    """Predicted synchronized line x_i(t_k) = r_star * (t_k - t_0) + x_star."""
    model_config = ConfigDict(frozen=True)

    x_star: float
    r_star: float


class JordanChain(BaseModel):
    """
    Right and left Jordan vectors of the eigenvalues 1 (chain of length two) and 1-p.

    Attributes:
        zeta1, zeta2, zeta3 (np.ndarray): Right vectors, length 3n.
        eta1, eta2, eta3 (np.ndarray): Left vectors, length 3n.
        gamma (float): xi-weighted harmonic mean of the skews.
        xi (np.ndarray): Normalized left null vector of L.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    zeta1: np.ndarray
    zeta2: np.ndarray
    zeta3: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    eta3: np.ndarray
    gamma: float
    xi: np.ndarray

    @property
    def right(self) -> list[np.ndarray]:
        return [self.zeta1, self.zeta2, self.zeta3]

    @property
    def left(self) -> list[np.ndarray]:
        return [self.eta1, self.eta2, self.eta3]


class StabilityReport(BaseModel):
    """
    Combined spectral and analytic verdict for one configuration.

    Attributes:
        connected (bool): Graph connected in the rooted sense.
        connectivity (ConnectivityReport): Details of the connectivity checks.
        multiplicity_of_one (int): Eigenvalues of A within the radius of 1.
        spectral_margin (float): Largest modulus among the remaining eigenvalues of A.
        stability_slack (float): 1 - spectral_margin.
        all_real_spectrum (bool): Whether L has a real spectrum.
        mu_max (float): Largest real part among the eigenvalues of LR.
        tau (float): Poll interval analysed.
        cond_i, cond_ii, cond_iii (bool | None): Parameter conditions, None when not covered.
        tau_bound (float | None): Largest admissible tau for this graph.
        tau_bound_topology_free (float | None): Bound valid for every connected real-spectrum graph.
        spectral_verdict (Verdict): From the eigenvalues of A.
        analytic_verdict (Verdict | None): From the parameter conditions.
        verdict (Verdict): Spectral verdict, or NOT_COVERED for complex Laplacian spectra.
        verdicts_agree (bool | None): Analytic and spectral verdicts coincide.
        hermite_biehler (HermiteBiehlerDetails | None): Test of the largest mode.
        diagnostics (list[str]): Disagreements and skipped checks.
    """
    connected: bool
    connectivity: ConnectivityReport
    multiplicity_of_one: int
    spectral_margin: float
    stability_slack: float
    all_real_spectrum: bool
    mu_max: float
    tau: float
    cond_i: bool | None = None
    cond_ii: bool | None = None
    cond_iii: bool | None = None
    tau_bound: float | None = None
    tau_bound_topology_free: float | None = None
    spectral_verdict: Verdict
    analytic_verdict: Verdict | None = None
    verdict: Verdict
    verdicts_agree: bool | None = None
    hermite_biehler: HermiteBiehlerDetails | None = None
    diagnostics: list[str] = Field(default_factory=list)


# -----------------------------------
# Simulation Types
# -----------------------------------
class JitterKind(str, Enum):
    NONE = "none"
    UNIFORM_PING_PONG = "uniform-ping-pong"


class JitterModel(BaseModel):
    """
    Measurement noise on a link.

    Attributes:
        kind (JitterKind): NONE for exact offsets.
        jitter_max (float): Largest one-way delay in seconds.
        granularity (float): Spacing of the uniform support in seconds.
    """
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    kind: JitterKind = JitterKind.NONE
    jitter_max: float = Field(default=0.0, ge=0)
    granularity: float = Field(default=1e-3, gt=0)

    @model_validator(mode="after")
    def _whole_number_of_steps(self):
        ratio = self.jitter_max / self.granularity
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"jitter max {self.jitter_max} is not a multiple of the granularity {self.granularity}")
        return self

    @property
    def levels(self) -> int:
        """Number of support points {0, g, ..., jitter_max}."""
        return int(round(self.jitter_max / self.granularity)) + 1

    @property
    def per_direction_std(self) -> float:
        if self.kind is JitterKind.NONE:
            return 0.0
        return self.granularity * math.sqrt((self.levels ** 2 - 1) / 12.0)

    @property
    def offset_noise_std(self) -> float:
        """Standard deviation of the midpoint estimate (fwd - bwd) / 2."""
        return self.per_direction_std / math.sqrt(2.0)


class Scheduling(str, Enum):
    SYNCHRONOUS = "synchronous"
    PHASE_SHIFTED = "phase-shifted"


class NodeSetup(BaseModel):
    """
    Initial conditions and rule of one node.

    Attributes:
        node_id (int): Node label.
        r (float): True skew.
        x0, s0, y0 (float): Initial steered time, skew correction and moving average.
        scheme (BaselineScheme | None): None runs the skewless rule.
    """
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    node_id: int
    r: float = Field(default=1.0, gt=0)
    x0: float = 0.0
    s0: float = 1.0
    y0: float = 0.0
    scheme: BaselineScheme | None = None


class ScheduledEvent(BaseModel):
    """
    A change applied before the updates of a given step.

    Attributes:
        step (int): Epoch index at which the event takes effect.
        action (str): "set-edges" swaps the topology, "shift-offset" adds `amount` to one node's x.
        topology (Topology | None): Weighted replacement topology for "set-edges".
        node (int | None): Target of "shift-offset".
        amount (float): Offset step in seconds.
    """
    model_config = ConfigDict(frozen=True)

    step: int = Field(ge=1)
    action: Literal["set-edges", "shift-offset"]
    topology: Topology | None = None
    node: int | None = None
    amount: float = 0.0

    @model_validator(mode="after")
    def _payload_present(self):
        if self.action == "set-edges" and self.topology is None:
            raise ValueError("set-edges event needs a topology")
        if self.action == "shift-offset" and self.node is None:
            raise ValueError("shift-offset event needs a node")
        return self


class SimulationConfig(BaseModel):
    """
    Everything a run needs. The topology and event topologies carry weights already.

    Attributes:
        topology (Topology): Weighted initial graph.
        params (ProtocolParams): Skewless gains and poll interval.
        nodes (tuple[NodeSetup, ...]): One entry per node, ordered by id.
        jitter (JitterModel): Noise model on jittered links.
        jitter_edges (frozenset[tuple[int, int]] | None): Links (i, j) whose measurements are noisy; None means every link.
        steps (int): Recorded epochs, including the initial one.
        seed (int): RNG seed; there is no entropy default.
        scheduling (Scheduling): Synchronous or phase-shifted updates.
        phases (dict[int, float]): Per-node phase in [0, tau) for phase-shifted runs.
        events (tuple[ScheduledEvent, ...]): Topology swaps and offset steps.
        divergence_threshold (float): |offset| above which the run halts as diverged.
        reference_node (int): Node the offsets are measured against.
    """
    model_config = ConfigDict(frozen=True)

    topology: Topology
    params: ProtocolParams
    nodes: tuple[NodeSetup, ...]
    jitter: JitterModel = JitterModel()
    jitter_edges: frozenset[tuple[int, int]] | None = None
    steps: int = Field(ge=1)
    seed: int
    scheduling: Scheduling = Scheduling.SYNCHRONOUS
    phases: dict[int, float] = Field(default_factory=dict)
    events: tuple[ScheduledEvent, ...] = ()
    divergence_threshold: float = Field(default=DIVERGENCE_THRESHOLD, gt=0)
    reference_node: int = 1

    @model_validator(mode="after")
    def _consistent(self):
        ids = [node.node_id for node in self.nodes]
        if ids != list(self.topology.nodes):
            raise ValueError(f"nodes must be listed once each, ordered 1..{self.topology.n}")
        if not self.topology.is_weighted:
            raise ValueError("topology weights are not assigned")
        if self.reference_node not in self.topology.nodes:
            raise ValueError(f"reference node {self.reference_node} is not in the graph")
        for node, phase in self.phases.items():
            if node not in self.topology.nodes:
                raise ValueError(f"phase given for unknown node {node}")
            if not 0.0 <= phase < self.params.tau:
                raise ValueError(f"phase of node {node} must lie in [0, tau)")
        for event in self.events:
            if event.topology is not None:
                if event.topology.n != self.topology.n:
                    raise ValueError(f"event at step {event.step} changes the node count")
                if not event.topology.is_weighted:
                    raise ValueError(f"event at step {event.step} has unweighted edges")
            if event.node is not None and event.node not in self.topology.nodes:
                raise ValueError(f"event at step {event.step} targets unknown node {event.node}")
        return self


class RunStatus(str, Enum):
    COMPLETED = "completed"
    DIVERGED = "diverged"


class Trace(BaseModel):
    """
    Per-epoch record of a run.

    Attributes:
        node_ids (tuple[int, ...]): Column labels.
        reference_node (int): Node offsets are taken against.
        tau (float): Poll interval.
        times (np.ndarray): Epoch times t_k - t_0 = k * tau, shape (steps,).
        x, s, y (np.ndarray): Clock readings and states, shape (steps, nodes).
        noise (np.ndarray): Realized measurement noise per (measuring node, measured node), shape (steps, nodes, nodes).
        status (RunStatus): COMPLETED or DIVERGED.
        diverged_at (int | None): First epoch beyond the threshold.
        seed (int): Seed the run used.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    node_ids: tuple[int, ...]
    reference_node: int
    tau: float
    times: np.ndarray
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    noise: np.ndarray
    status: RunStatus = RunStatus.COMPLETED
    diverged_at: int | None = None
    seed: int = 0

    @field_validator("x", "s", "y")
    @classmethod
    def _two_dimensional(cls, value: np.ndarray) -> np.ndarray:
        if value.ndim != 2:
            raise ValueError("state arrays must be steps x nodes")
        return value

    @property
    def steps(self) -> int:
        return int(self.times.shape[0])

    @property
    def reference_index(self) -> int:
        return self.node_ids.index(self.reference_node)

    @property
    def offset_to_leader(self) -> np.ndarray:
        return self.x - self.x[:, [self.reference_index]]


# -----------------------------------
# Metrics Types
# -----------------------------------
class SynchronizedLine(BaseModel):
    """Least-squares line fitted to the tail of a trace."""
    r_hat: float
    x_hat: float
    slope_spread: float
    intercept_spread: float


class ConvergenceResult(BaseModel):
    converged: bool
    first_step: int | None = None


class MetricsSummary(BaseModel):
    """
    Steady-state metrics of one trace.

    Attributes:
        sqrt_S_n (float): Mean relative deviation to the reference node.
        ci99 (float): 99th percentile of |offset|.
        ci100 (float): Largest |offset|.
        converged (bool): Offsets settled below the convergence threshold.
        convergence_step (int | None): First epoch of the settled stretch.
        empirical_r_star (float | None): Fitted common rate.
        empirical_x_star (float | None): Fitted common intercept.
        window (tuple[int, int]): Half-open epoch range used.
    """
    sqrt_S_n: float = Field(ge=0)
    ci99: float
    ci100: float
    converged: bool
    convergence_step: int | None = None
    empirical_r_star: float | None = None
    empirical_x_star: float | None = None
    window: tuple[int, int]

    @model_validator(mode="after")
    def _ordered(self):
        if self.ci99 > self.ci100:
            raise ValueError("ci99 cannot exceed ci100")
        return self
