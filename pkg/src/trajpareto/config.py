"""Run configuration: one YAML file drives every stage.

CLI flags (--seed, --out-dir, --workers) override the corresponding
keys. Relative paths in the file resolve against the config file's
directory so a bundled dataset + config pair stays relocatable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from trajpareto.errors import ConfigError
from trajpareto.ingest import FrameTransform, SmoothingConfig
from trajpareto.interaction import (
    AffineSpacingPolicy, SearchConfig, ZoneConfig, ZoneSpec, default_zones,
)


@dataclass
class InputConfig:
    path: str = "trajectories.csv"
    columns: dict = field(default_factory=lambda: {
        "agent_id": "id", "time": "t", "x": "x", "y": "y",
        "agent_type": "type", "lane_id": "lane",
        "length": "length", "width": "width",
    })


@dataclass
class MetricsOptions:
    regressor: str = "mlp"            # mlp | linear
    mlp_epochs: int = 500
    min_spacing_pairs: int = 500
    gpd_percentile: float = 97.0
    min_exceedances: int = 50
    min_delay_records: int = 200
    a_min: float = 0.1
    jerk_threshold: float = 2.5
    decel_threshold: float = 2.0
    model_format: str = "text"        # text | binary


@dataclass
class ObjectivesOptions:
    knn_k: int = 5
    filter_enabled: bool = True
    filter_lower: float = 0.1
    filter_upper: float = 99.9


@dataclass
class FrontierOptions:
    dependent_axis: str = "I"
    lattice_size: int = 50
    headroom_reference: str = "surface"   # surface | set
    length_scale_lo: float = 0.05
    length_scale_hi: float = 5.0


@dataclass
class ReportOptions:
    bins: int = 40
    thresholds: dict = field(default_factory=lambda: {
        "m_max": 1.85, "headway_time": 4.0, "gain": 1.0,
        "jerk_mag": 2.5, "decel_mag": 2.0,
    })


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "out"
    dataset_label: str = "default"
    dt: float = 0.1
    workers: int = 1
    ego_types: tuple = ("av",)
    input: InputConfig = field(default_factory=InputConfig)
    transform: FrameTransform = field(default_factory=FrameTransform)
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    smooth_target: str = "positions"     # positions | speeds | both
    use_source_kinematics: bool = False
    zones: ZoneConfig = field(default_factory=ZoneConfig)
    spacing_policy: AffineSpacingPolicy = field(default_factory=AffineSpacingPolicy)
    search: SearchConfig = field(default_factory=SearchConfig)
    metrics: MetricsOptions = field(default_factory=MetricsOptions)
    objectives: ObjectivesOptions = field(default_factory=ObjectivesOptions)
    frontier: FrontierOptions = field(default_factory=FrontierOptions)
    report: ReportOptions = field(default_factory=ReportOptions)
    base_dir: str = "."                  # set from the config file location

    def validate(self) -> None:
        if self.dt <= 0:
            raise ConfigError("dt must be > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for name, value in [
            ("metrics.a_min", self.metrics.a_min),
            ("metrics.jerk_threshold", self.metrics.jerk_threshold),
            ("metrics.decel_threshold", self.metrics.decel_threshold),
            ("metrics.gpd_percentile", self.metrics.gpd_percentile),
        ]:
            if value <= 0:
                raise ConfigError(f"{name} must be positive")
        for name, value in self.report.thresholds.items():
            if value <= 0:
                raise ConfigError(f"report threshold {name} must be positive")
        if self.metrics.regressor not in ("mlp", "linear"):
            raise ConfigError("metrics.regressor must be 'mlp' or 'linear'")
        if self.metrics.model_format not in ("text", "binary"):
            raise ConfigError("metrics.model_format must be 'text' or 'binary'")
        if self.frontier.dependent_axis not in ("S", "E", "I"):
            raise ConfigError("frontier.dependent_axis must be one of S, E, I")
        if self.frontier.headroom_reference not in ("surface", "set"):
            raise ConfigError("frontier.headroom_reference must be 'surface' or 'set'")
        if self.objectives.knn_k < 1:
            raise ConfigError("objectives.knn_k must be >= 1")
        self.smoothing.validate(self.dt)

    def input_path(self) -> Path:
        p = Path(self.input.path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def output_dir(self) -> Path:
        p = Path(self.out_dir)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d["ego_types"] = list(self.ego_types)
        d["zones"] = [asdict(z) for z in self.zones.zones]
        d["search"] = asdict(self.search)
        d["search"]["lane_adjacency"] = {
            k: sorted(v) for k, v in self.search.lane_adjacency.items()
        }
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def _build(cls, data: dict, **extra):
    known = {f for f in cls.__dataclass_fields__}
    kwargs = {k: v for k, v in (data or {}).items() if k in known}
    kwargs.update(extra)
    return cls(**kwargs)


def config_from_dict(data: dict, base_dir: str = ".") -> RunConfig:
    data = dict(data or {})
    zones = data.pop("zones", None)
    zone_cfg = ZoneConfig([_build(ZoneSpec, z) for z in zones]) if zones else ZoneConfig(default_zones())
    search_data = dict(data.pop("search", {}) or {})
    if "lane_adjacency" in search_data and search_data["lane_adjacency"]:
        search_data["lane_adjacency"] = {
            str(k): set(map(str, v)) for k, v in search_data["lane_adjacency"].items()
        }
    cfg = RunConfig(
        seed=int(data.get("seed", 0)),
        out_dir=str(data.get("out_dir", "out")),
        dataset_label=str(data.get("dataset_label", "default")),
        dt=float(data.get("dt", 0.1)),
        workers=int(data.get("workers", 1)),
        ego_types=tuple(data.get("ego_types", ("av",))),
        input=_build(InputConfig, data.get("input", {})),
        transform=_build(FrameTransform, data.get("transform", {})),
        smoothing=_build(SmoothingConfig, data.get("smoothing", {})),
        smooth_target=str(data.get("smooth_target", "positions")),
        use_source_kinematics=bool(data.get("use_source_kinematics", False)),
        zones=zone_cfg,
        spacing_policy=_build(AffineSpacingPolicy, data.get("spacing_policy", {})),
        search=_build(SearchConfig, search_data),
        metrics=_build(MetricsOptions, data.get("metrics", {})),
        objectives=_build(ObjectivesOptions, data.get("objectives", {})),
        frontier=_build(FrontierOptions, data.get("frontier", {})),
        report=_build(ReportOptions, data.get("report", {})),
        base_dir=base_dir,
    )
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    with path.open("r") as fh:
        data = yaml.safe_load(fh) or {}
    return config_from_dict(data, base_dir=str(path.parent))


def save_config(cfg: RunConfig, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)
