"""
Config Loader Module

Reads a versioned JSON configuration and turns it into the domain objects the analysis
and the simulator consume. Every failure becomes a `ConfigError` anchored to the line of
the offending value, in the form `path:line: message`.

Dependencies:
    - Pydantic for schema validation
    - json for syntax errors with line numbers and for the canonical form
    - Logging for load events
"""
import json
import logging
from pathlib import Path
from typing import Any, Sequence

from pydantic import BaseModel, ConfigDict, ValidationError

from app.exceptions import ConfigError, TopologyError
from app.presets import resolve_profile
from app.topology import default_weights
from models.models import (Edge, JitterModel, NodeSetup, ProtocolParams, ScheduledEvent, SimulationConfig,
                           Topology)
from models.schemas import ConfigFile, EventEntry

_DECODER = json.JSONDecoder()


class LoadedConfig(BaseModel):
    """
    A validated configuration and the domain objects built from it.

    Attributes:
        source (str): File path, or "preset:<name>" for built-in presets.
        file (ConfigFile): The parsed file.
        simulation (SimulationConfig): Run definition with weighted topologies.
        final_topology (Topology): Graph in force at the end of the run, after the last set-edges event.
    """
    model_config = ConfigDict(frozen=True)

    source: str
    file: ConfigFile
    simulation: SimulationConfig
    final_topology: Topology


# -----------------------------------
# Line Anchoring
# -----------------------------------
def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in " \t\r\n":
        pos += 1
    return pos


def _children(text: str, pos: int):
    """Yield (key or index, value position) for the object or array starting at pos."""
    opening = text[pos]
    closing = "}" if opening == "{" else "]"
    pos = _skip_ws(text, pos + 1)
    index = 0
    while pos < len(text) and text[pos] != closing:
        if opening == "{":
            key, pos = _DECODER.raw_decode(text, pos)
            pos = _skip_ws(text, _skip_ws(text, pos) + 1)
        else:
            key, index = index, index + 1
        yield key, pos
        _, pos = _DECODER.raw_decode(text, pos)
        pos = _skip_ws(text, pos)
        if pos < len(text) and text[pos] == ",":
            pos = _skip_ws(text, pos + 1)


def _locate(text: str, loc: Sequence[Any]) -> int:
    """1-based line of the deepest value along a validation error location."""
    pos = _skip_ws(text, 0)
    for part in loc:
        if pos >= len(text) or text[pos] not in "{[":
            break
        for key, value_pos in _children(text, pos):
            if key == part or str(key) == str(part):
                pos = value_pos
                break
        else:
            # union tags and model-level errors stop at the enclosing value
            continue
    return text.count("\n", 0, pos) + 1


def _format_errors(exc: ValidationError) -> str:
    messages = [f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()]
    return "; ".join(messages)


# -----------------------------------
# Domain Building
# -----------------------------------
class _Anchor:
    """Raises ConfigError at the line of a config section, or line 1 for in-memory configs."""

    def __init__(self, source: str, text: str | None):
        self.source = source
        self.text = text

    def error(self, detail: str, *loc) -> ConfigError:
        if self.text is None:
            return ConfigError(detail, self.source)
        return ConfigError(detail, self.source, _locate(self.text, loc))


def _resolve_params(file: ConfigFile, anchor: _Anchor) -> ProtocolParams:
    section = file.params
    base = None
    if section.profile is not None:
        try:
            base = resolve_profile(section.profile)
        except ConfigError as exc:
            raise anchor.error(exc.detail, "params", "profile") from None

    values = {}
    for name in ("kappa1", "kappa2", "p", "tau"):
        value = getattr(section, name)
        if value is None and base is not None:
            value = getattr(base, name)
        if value is None:
            raise anchor.error(f"params.{name} is required when no profile provides it", "params")
        values[name] = value

    c = file.weights.c
    if c is None:
        c = base.c if base is not None else 0.7
    try:
        return ProtocolParams(c=c, **values)
    except ValidationError as exc:
        raise anchor.error(_format_errors(exc), "params") from None


def _weighted_topology(n: int, edges: Sequence[Edge], leaders: Sequence[int] | None, file: ConfigFile,
                       c: float, anchor: _Anchor, *loc) -> Topology:
    if leaders is None:
        sources = {edge.source for edge in edges}
        leaders = [node for node in range(1, n + 1) if node not in sources]
    try:
        topology = Topology(n=n, edges=tuple(edges), leader_ids=frozenset(leaders))
    except ValidationError as exc:
        raise anchor.error(_format_errors(exc), *loc) from None

    if file.weights.mode == "explicit":
        missing = [f"{e.source}->{e.target}" for e in topology.edges if e.alpha is None]
        if missing:
            raise anchor.error(f"explicit weights mode needs alpha on every edge; missing on {', '.join(missing)}", *loc)
        return topology

    given = [f"{e.source}->{e.target}" for e in topology.edges if e.alpha is not None]
    if given:
        raise anchor.error(f"alpha given on {', '.join(given)} but weights.mode is paper-eq15", *loc)
    try:
        return default_weights(topology, c)
    except TopologyError as exc:
        raise anchor.error(exc.detail, *loc) from None


def _build_event(index: int, event: EventEntry, n: int, file: ConfigFile, c: float, anchor: _Anchor) -> ScheduledEvent:
    loc = ("run", "events", index)
    if event.action == "set-edges":
        if event.edges is None:
            raise anchor.error("set-edges event needs an edges list", *loc)
        topology = _weighted_topology(n, event.edges, event.leaders, file, c, anchor, *loc, "edges")
        return ScheduledEvent(step=event.step, action=event.action, topology=topology)
    if event.node is None:
        raise anchor.error("shift-offset event needs a node", *loc)
    return ScheduledEvent(step=event.step, action=event.action, node=event.node, amount=event.amount)


def build_loaded(file: ConfigFile, source: str, text: str | None = None) -> LoadedConfig:
    """
    Build the domain objects of a parsed configuration.

    Args:
        file (ConfigFile): Parsed configuration.
        source (str): Path or preset label used in error messages and reports.
        text (str, optional): Raw file text, used to anchor errors to lines.

    Returns:
        LoadedConfig: The run definition and the final topology.

    Raises:
        ConfigError: If the configuration is inconsistent.
    """
    anchor = _Anchor(source, text)
    params = _resolve_params(file, anchor)

    ids = [node.id for node in file.nodes]
    if ids != list(range(1, len(ids) + 1)):
        raise anchor.error(f"node ids must be 1..{len(ids)} in order, got {ids}", "nodes")
    n = len(ids)
    nodes = tuple(
        NodeSetup(node_id=node.id, r=node.r, x0=node.x0, s0=node.s0, y0=node.y0,
                  scheme=None if node.scheme == "skewless" else node.scheme)
        for node in file.nodes
    )

    topology = _weighted_topology(n, file.edges, file.leaders, file, params.c, anchor, "edges")
    events = tuple(_build_event(i, event, n, file, params.c, anchor) for i, event in enumerate(file.run.events))

    jitter_edges = None
    if file.jitter.edges is not None:
        jitter_edges = frozenset((int(i), int(j)) for i, j in file.jitter.edges)
        known = {(e.source, e.target) for t in [topology] + [ev.topology for ev in events if ev.topology] for e in t.edges}
        unknown = sorted(jitter_edges - known)
        if unknown:
            raise anchor.error(f"jitter edges {unknown} are not measurement edges", "jitter", "edges")

    try:
        jitter = JitterModel(kind=file.jitter.kind, jitter_max=file.jitter.jitter_max, granularity=file.jitter.granularity)
    except ValidationError as exc:
        raise anchor.error(_format_errors(exc), "jitter") from None

    try:
        simulation = SimulationConfig(
            topology=topology,
            params=params,
            nodes=nodes,
            jitter=jitter,
            jitter_edges=jitter_edges,
            steps=file.run.steps,
            seed=file.run.seed,
            scheduling=file.run.scheduling,
            phases=file.run.phases,
            events=events,
            divergence_threshold=file.run.divergence_threshold,
            reference_node=file.run.reference_node,
        )
    except ValidationError as exc:
        raise anchor.error(_format_errors(exc), "run") from None

    final = topology
    for event in sorted(events, key=lambda e: e.step):
        if event.topology is not None and event.step < file.run.steps:
            final = event.topology

    logging.info(f"Loaded {source}: {n} nodes, {len(topology.edges)} edges, {len(events)} events")
    return LoadedConfig(source=source, file=file, simulation=simulation, final_topology=final)


def load_config(path: str | Path) -> LoadedConfig:
    """
    Read, validate and build a configuration file.

    Raises:
        ConfigError: If the file is unreadable, is not JSON, or fails validation.
    """
    source = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", source) from None

    try:
        json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", source, exc.lineno) from None

    try:
        file = ConfigFile.model_validate_json(text)
    except ValidationError as exc:
        first = exc.errors()[0]["loc"]
        raise ConfigError(_format_errors(exc), source, _locate(text, first)) from None

    return build_loaded(file, source, text)


def canonical_json(model: BaseModel) -> str:
    """Sorted, indented JSON with a trailing newline; equal models give identical bytes."""
    return json.dumps(model.model_dump(mode="json", by_alias=True), sort_keys=True, indent=2) + "\n"
