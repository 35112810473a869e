"""
File Schemas

Pydantic schemas for the versioned configuration file and for the JSON reports the
commands write. Domain value types are reused where the file layout matches them.
"""
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from config import DIVERGENCE_THRESHOLD, REPORT_SCHEMA_VERSION
from models.models import (BaselineScheme, Edge, FixedPointPrediction, JitterKind, MetricsSummary, RunStatus,
                           Scheduling, StabilityReport, Verdict)


# ------------------------------------
# Configuration File
# ------------------------------------
class FileModel(BaseModel):
    """Base for file sections: unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class NodeEntry(FileModel):
    id: int = Field(ge=1)
    r: float = Field(default=1.0, gt=0)
    x0: float = 0.0
    s0: float = 1.0
    y0: float = 0.0
    scheme: Literal["skewless"] | BaselineScheme = "skewless"


class WeightsSection(FileModel):
    """Weight assignment: commit-factor weights c / |N_i|, or the per-edge alpha values."""
    mode: Literal["paper-eq15", "explicit"] = "paper-eq15"
    c: float | None = Field(default=None, gt=0)


class ParamsSection(FileModel):
    """Gains and poll interval, either spelled out or taken from a named profile with overrides."""
    profile: str | None = None
    kappa1: float | None = None
    kappa2: float | None = None
    p: float | None = None
    tau: float | None = Field(default=None, gt=0)


class JitterSection(FileModel):
    kind: JitterKind = JitterKind.NONE
    jitter_max: float = Field(default=0.0, ge=0, alias="max")
    granularity: float = Field(default=1e-3, gt=0)
    edges: list[tuple[int, int]] | None = None


class EventEntry(FileModel):
    step: int = Field(ge=1)
    action: Literal["set-edges", "shift-offset"]
    edges: list[Edge] | None = None
    leaders: list[int] | None = None
    node: int | None = None
    amount: float = 0.0


class RunSection(FileModel):
    steps: int = Field(ge=1)
    seed: int
    scheduling: Scheduling = Scheduling.SYNCHRONOUS
    phases: dict[int, float] = Field(default_factory=dict)
    events: list[EventEntry] = Field(default_factory=list)
    reference_node: int = 1
    divergence_threshold: float = Field(default=DIVERGENCE_THRESHOLD, gt=0)


class PresetRecord(FileModel):
    """Preset a configuration was generated from, and every field overridden on top of it."""
    name: str
    overrides: dict[str, Any] = Field(default_factory=dict)


class ConfigFile(FileModel):
    """
    Versioned simulation and analysis configuration.

    Leaders default to the nodes without outgoing edges. Jitter applies to every edge
    unless `jitter.edges` lists the noisy ones.
    """
    version: Literal[1]
    nodes: list[NodeEntry]
    edges: list[Edge] = Field(default_factory=list)
    leaders: list[int] | None = None
    weights: WeightsSection = Field(default_factory=WeightsSection)
    params: ParamsSection
    jitter: JitterSection = Field(default_factory=JitterSection)
    run: RunSection
    preset: PresetRecord | None = None


# ------------------------------------
# Reports
# ------------------------------------
class AnalysisReport(BaseModel):
    """Output of `analyze`."""
    schema_version: int = REPORT_SCHEMA_VERSION
    config: str | None = None
    preset: PresetRecord | None = None
    topology_source: str
    stability: StabilityReport
    xi: list[float] | None = None
    gamma: float | None = None
    prediction: FixedPointPrediction | None = None
    exit_status: int


class OscillationReport(BaseModel):
    sign_changes: dict[int, int]
    growth_ratio: float | None = None


class SimulationReport(BaseModel):
    """Output of `simulate`, and of each run inside `reproduce`."""
    schema_version: int = REPORT_SCHEMA_VERSION
    name: str | None = None
    config: str | None = None
    preset: PresetRecord | None = None
    seed: int
    status: RunStatus
    diverged_at: int | None = None
    steps_recorded: int
    stability_verdict: Verdict | None = None
    prediction: FixedPointPrediction | None = None
    metrics: MetricsSummary | None = None
    per_node_deviation: dict[int, float] = Field(default_factory=dict)
    oscillation: OscillationReport | None = None
    trace_csv: str | None = None
    exit_status: int


class CheckResult(BaseModel):
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: str = ""


class ReproduceReport(BaseModel):
    """Output of `reproduce`: the runs of a preset or suite and the acceptance checks."""
    schema_version: int = REPORT_SCHEMA_VERSION
    preset: str
    seed: int
    overrides: dict[str, Any] = Field(default_factory=dict)
    runs: list[SimulationReport]
    analyses: list[AnalysisReport] = Field(default_factory=list)
    checks: list[CheckResult]
    verdict: Literal["pass", "fail"]
    exit_status: int


PUBLISHED_SCHEMAS = {
    "config": ConfigFile,
    "analysis-report": AnalysisReport,
    "simulation-report": SimulationReport,
    "reproduce-report": ReproduceReport,
}
