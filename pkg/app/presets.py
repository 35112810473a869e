"""
Experiment Presets

Named parameter profiles and the frozen configurations of the reproduction
experiments. Every preset is a plain `ConfigFile`, so it can be exported, analysed and
simulated exactly like a hand-written configuration.
"""
import logging
from enum import Enum

from app.exceptions import ConfigError
from app.sim_engine import EXP2_TAU, experiment_two_config
from app.topology import make_star, make_two_client_loop
from models.models import BaselineKind, BaselineScheme, Edge, JitterKind, ProtocolParams, SimulationConfig
from models.schemas import (ConfigFile, EventEntry, JitterSection, NodeEntry, ParamsSection, PresetRecord, RunSection,
                            WeightsSection)

# -----------------------------------
# Parameter Profiles
# -----------------------------------
PROFILES: dict[str, ProtocolParams] = {
    "eq15": ProtocolParams(kappa1=1.1, kappa2=1.0, p=0.99, tau=1.0, c=0.7),
    # c chosen so that a single-neighbor mode tau * c = 0.8 sits inside the nu bound of about 1.44
    "eq17": ProtocolParams(kappa1=1.388, kappa2=1.374, p=1.98, tau=16.0, c=0.05),
    "exp4": ProtocolParams(kappa1=0.1385, kappa2=0.1363, p=0.62, tau=0.25, c=0.7),
}

DEFAULT_SEED = 1
EXP2_JITTER_MAX = 10e-3
EXP2_GRANULARITY = 1e-3
EXP2_SEEDS = 5
LOOP_SWAP_STEP = 60
STEP_RESPONSE_AT = 200
STEP_RESPONSE_AMOUNT = 25e-3
SWEEP_JITTER_US = tuple(range(0, 161, 20))
SWEEP_GRANULARITY = 1e-6
SWEEP_STEPS = 1000

# Client rules of the comparison star, node ids 2.. in order
COMPARISON_SCHEMES = (
    "skewless",
    BaselineScheme(kind=BaselineKind.OFFSET_PLUS_FREQ, kappa1=0.5, kappa2=0.01),
    BaselineScheme(kind=BaselineKind.SKEW_AND_OFFSET, kappa1=0.5, kappa2=0.1),
    BaselineScheme(kind=BaselineKind.SKEW_ONLY, kappa1=0.28, kappa2=0.7),
)
COMPARISON_SKEWS = (1.0 + 3e-5, 1.0 - 2e-5, 1.0 + 1e-5, 1.0 - 4e-5)
SKEWLESS_NODE = 2
# Offset-correcting schemes the sweep grades the skewless client against
SWEEP_BASELINE_NODES = {3: "offset-plus-freq", 4: "skew-and-offset"}


class ExperimentPreset(str, Enum):
    EXP1_STAR = "exp1-star"
    EXP1_LOOP_UNSTABLE = "exp1-loop-unstable"
    EXP1_LOOP_FIXED = "exp1-loop-fixed"
    EXP2_WHEEL_0 = "exp2-wheel-0"
    EXP2_WHEEL_1 = "exp2-wheel-1"
    EXP2_WHEEL_2 = "exp2-wheel-2"
    EXP2_WHEEL_3 = "exp2-wheel-3"
    EXP2_WHEEL_4 = "exp2-wheel-4"
    NAIVE_INSTABILITY = "naive-instability"
    SCHEME_COMPARISON = "scheme-comparison"
    STEP_RESPONSE = "step-response"
    EXP4_JITTER_0 = "exp4-jitter-0"
    EXP4_JITTER_20 = "exp4-jitter-20"
    EXP4_JITTER_40 = "exp4-jitter-40"
    EXP4_JITTER_60 = "exp4-jitter-60"
    EXP4_JITTER_80 = "exp4-jitter-80"
    EXP4_JITTER_100 = "exp4-jitter-100"
    EXP4_JITTER_120 = "exp4-jitter-120"
    EXP4_JITTER_140 = "exp4-jitter-140"
    EXP4_JITTER_160 = "exp4-jitter-160"

    @property
    def wheel_k(self) -> int | None:
        if self.value.startswith("exp2-wheel-"):
            return int(self.value.rsplit("-", 1)[1])
        return None

    @property
    def jitter_us(self) -> int | None:
        """Jitter max in microseconds of a jitter-sweep preset."""
        if self.value.startswith("exp4-jitter-"):
            return int(self.value.rsplit("-", 1)[1])
        return None


# Suites run several presets and add cross-run checks
SUITES: dict[str, list[ExperimentPreset]] = {
    "exp1": [ExperimentPreset.EXP1_STAR, ExperimentPreset.EXP1_LOOP_UNSTABLE, ExperimentPreset.EXP1_LOOP_FIXED],
    "exp2": [ExperimentPreset(f"exp2-wheel-{K}") for K in range(5)],
    "exp4": [ExperimentPreset(f"exp4-jitter-{jitter}") for jitter in SWEEP_JITTER_US],
}


def preset_names() -> list[str]:
    return sorted(SUITES) + [preset.value for preset in ExperimentPreset]


def resolve_profile(name: str) -> ProtocolParams:
    try:
        return PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown parameter profile '{name}' (known: {', '.join(sorted(PROFILES))})") from None


# -----------------------------------
# Builders
# -----------------------------------
def _edges(topology) -> list[Edge]:
    return [Edge(source=e.source, target=e.target) for e in topology.edges]


def _file(name: str, nodes: list[NodeEntry], edges: list[Edge], profile: str, steps: int, seed: int,
          tau: float | None = None, c: float | None = None, leaders: list[int] | None = None,
          jitter: JitterSection | None = None, events: list[EventEntry] | None = None) -> ConfigFile:
    return ConfigFile(
        version=1,
        nodes=nodes,
        edges=edges,
        leaders=leaders,
        weights=WeightsSection(c=c if c is not None else PROFILES[profile].c),
        params=ParamsSection(profile=profile, tau=tau),
        jitter=jitter or JitterSection(),
        run=RunSection(steps=steps, seed=seed, events=events or []),
        preset=PresetRecord(name=name),
    )


def _exp1(preset: ExperimentPreset, seed: int) -> ConfigFile:
    leader = NodeEntry(id=1, r=1.0)
    serv2 = NodeEntry(id=2, r=1.0 + 2e-5, x0=1e-3)
    if preset is ExperimentPreset.EXP1_STAR:
        return _file(preset.value, [leader, serv2], _edges(make_star(2)), "eq15", 300, seed, tau=1.0)

    # serv3 free-runs as a second leader until it joins the loop
    serv3 = NodeEntry(id=3, r=1.0 - 1.5e-5, x0=2e-3)
    swap = EventEntry(step=LOOP_SWAP_STEP, action="set-edges", edges=_edges(make_two_client_loop()), leaders=[1])
    tau, steps = (1.0, 400) if preset is ExperimentPreset.EXP1_LOOP_UNSTABLE else (0.5, 600)
    return _file(preset.value, [leader, serv2, serv3], [Edge(source=2, target=1)], "eq15", steps, seed,
                 tau=tau, leaders=[1, 3], events=[swap])


def _from_simulation(name: str, config: SimulationConfig, profile: str) -> ConfigFile:
    """File form of a run definition built by the simulation engine."""
    nodes = [NodeEntry(id=node.node_id, r=node.r, x0=node.x0, s0=node.s0, y0=node.y0) for node in config.nodes]
    jitter = JitterSection(
        kind=config.jitter.kind,
        jitter_max=config.jitter.jitter_max,
        granularity=config.jitter.granularity,
        edges=sorted(config.jitter_edges) if config.jitter_edges is not None else None,
    )
    return _file(name, nodes, _edges(config.topology), profile, config.steps, config.seed,
                 tau=config.params.tau, c=config.params.c, jitter=jitter)


def _exp2(preset: ExperimentPreset, seed: int) -> ConfigFile:
    params = PROFILES["eq15"].model_copy(update={"tau": EXP2_TAU})
    config = experiment_two_config(preset.wheel_k, EXP2_JITTER_MAX, seed, params, granularity=EXP2_GRANULARITY)
    return _from_simulation(preset.value, config, "eq15")


def _naive(seed: int) -> ConfigFile:
    client = NodeEntry(id=2, r=1.0 + 1e-5, x0=1e-3,
                       scheme=BaselineScheme(kind=BaselineKind.NAIVE_SKEW, kappa1=0.1))
    return _file(ExperimentPreset.NAIVE_INSTABILITY.value, [NodeEntry(id=1), client], _edges(make_star(2)),
                 "eq15", 600, seed, tau=1.0)


def _comparison_clients(settled: bool) -> list[NodeEntry]:
    """
    One client per rule in COMPARISON_SCHEMES. Settled clients start on the leader's
    time with s0 = 1 / r, so only the measurement noise moves them.
    """
    return [
        NodeEntry(id=i + 2, r=r, x0=0.0 if settled else 5e-4, s0=1.0 / r if settled else 1.0, scheme=scheme)
        for i, (r, scheme) in enumerate(zip(COMPARISON_SKEWS, COMPARISON_SCHEMES))
    ]


def _scheme_comparison(seed: int) -> ConfigFile:
    nodes = [NodeEntry(id=1)] + _comparison_clients(settled=False)
    jitter = JitterSection(kind=JitterKind.UNIFORM_PING_PONG, jitter_max=100e-6, granularity=1e-6)
    return _file(ExperimentPreset.SCHEME_COMPARISON.value, nodes, _edges(make_star(5)), "exp4", 1000, seed,
                 jitter=jitter)


def _jitter_sweep(preset: ExperimentPreset, seed: int) -> ConfigFile:
    nodes = [NodeEntry(id=1)] + _comparison_clients(settled=True)
    jitter = JitterSection(kind=JitterKind.UNIFORM_PING_PONG, jitter_max=preset.jitter_us * SWEEP_GRANULARITY,
                           granularity=SWEEP_GRANULARITY)
    return _file(preset.value, nodes, _edges(make_star(5)), "exp4", SWEEP_STEPS, seed, jitter=jitter)


def _step_response(seed: int) -> ConfigFile:
    shift = EventEntry(step=STEP_RESPONSE_AT, action="shift-offset", node=1, amount=STEP_RESPONSE_AMOUNT)
    nodes = [NodeEntry(id=1), NodeEntry(id=2, r=1.0 + 1e-5)]
    return _file(ExperimentPreset.STEP_RESPONSE.value, nodes, _edges(make_star(2)), "eq17", 1200, seed,
                 events=[shift])


def build_preset(preset: ExperimentPreset, seed: int | None = None, overrides: dict | None = None) -> ConfigFile:
    """
    Configuration of a preset, with optional overrides recorded in the file.

    Args:
        preset (ExperimentPreset): Which experiment.
        seed (int, optional): Replaces the default seed; recorded as an override.
        overrides (dict, optional): Any of profile, tau, steps, recorded verbatim.

    Returns:
        ConfigFile: Ready for `analyze` or `simulate`.
    """
    overrides = dict(overrides or {})
    if seed is not None:
        overrides["seed"] = seed
    seed = DEFAULT_SEED if seed is None else seed

    if preset.wheel_k is not None:
        config = _exp2(preset, seed)
    elif preset.jitter_us is not None:
        config = _jitter_sweep(preset, seed)
    elif preset is ExperimentPreset.NAIVE_INSTABILITY:
        config = _naive(seed)
    elif preset is ExperimentPreset.SCHEME_COMPARISON:
        config = _scheme_comparison(seed)
    elif preset is ExperimentPreset.STEP_RESPONSE:
        config = _step_response(seed)
    else:
        config = _exp1(preset, seed)

    if "profile" in overrides:
        resolve_profile(overrides["profile"])
        config.params.profile = overrides["profile"]
    if "tau" in overrides:
        config.params.tau = float(overrides["tau"])
    if "steps" in overrides:
        config.run.steps = int(overrides["steps"])
    config.preset = PresetRecord(name=preset.value, overrides=overrides)

    if overrides:
        logging.info(f"Preset {preset.value} built with overrides {overrides}")
    return ConfigFile.model_validate(config.model_dump(by_alias=True))

