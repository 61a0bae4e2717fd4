"""Experiment configuration: YAML parsing with strict key validation.

Unknown keys are a hard error (no silent typo absorption) and the reported
message names the offending key with its line in the source text when it can
be located.  The raw parsed mapping is kept so that serialization round-trips
the normalized input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .channels import CHANNEL_KINDS, ChannelSpec
from .dynamics import ModelSpec
from .optimize import OptimizerConfig


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "model": {"N", "chi", "omega", "channel", "gamma"},
    "run": {"T", "segments", "substeps", "control"},
    "optimizer": {
        "max_iters",
        "eta",
        "backtrack",
        "tol_grad",
        "restarts",
        "seed",
        "u_max",
    },
    "cost": {"kind", "phi"},
    "scan": {"T_list", "segments_per_T"},
    "output": {"directory", "formats"},
}


def _find_line(text: str, key: str) -> str:
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0]
        if stripped.strip().startswith(f"{key}:"):
            return f" (line {lineno})"
    return ""


@dataclass
class ExperimentConfig:
    """Validated experiment configuration plus its raw mapping."""

    raw: dict
    model: ModelSpec
    T: float | None = None
    segments: int | None = None
    substeps: int | None = None
    control: object = None  # float or list of floats
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    scan_T_list: list | None = None
    scan_segments: object = None
    output_directory: str = "."
    output_formats: tuple = ("csv", "json")

    def serialize(self) -> str:
        """Normalized YAML of the raw mapping (round-trips the input)."""
        return yaml.safe_dump(self.raw, sort_keys=True, default_flow_style=False)


def normalize(text: str) -> str:
    return yaml.safe_dump(yaml.safe_load(text), sort_keys=True, default_flow_style=False)


def parse(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of sections")

    for section, keys in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section {section!r}{_find_line(text, section)}")
        if keys is None:
            continue
        if not isinstance(keys, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key in keys:
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key {key!r} in section {section!r}{_find_line(text, key)}"
                )

    model_raw = raw.get("model") or {}
    if "N" not in model_raw:
        raise ConfigError("model.N is required")
    kind = model_raw.get("channel", "none")
    if kind not in CHANNEL_KINDS:
        raise ConfigError(
            f"model.channel must be one of {CHANNEL_KINDS}, got {kind!r}"
            f"{_find_line(text, 'channel')}"
        )
    try:
        model = ModelSpec(
            N=int(model_raw["N"]),
            chi=float(model_raw.get("chi", 0.0)),
            omega=float(model_raw.get("omega", 0.0)),
            channel=ChannelSpec(kind, float(model_raw.get("gamma", 0.0))),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    run_raw = raw.get("run") or {}
    opt_raw = raw.get("optimizer") or {}
    cost_raw = raw.get("cost") or {}
    scan_raw = raw.get("scan") or {}
    out_raw = raw.get("output") or {}

    segments = run_raw.get("segments")
    if segments is not None:
        segments = int(segments)
        if segments < 1:
            raise ConfigError("run.segments must be >= 1")
    control = run_raw.get("control")
    if isinstance(control, list):
        control = [float(v) for v in control]
        if segments is not None and len(control) != segments:
            raise ConfigError(
                f"run.control has {len(control)} values but run.segments = {segments}"
            )
    elif control is not None:
        control = float(control)

    cost_kind = cost_raw.get("kind", "qfi")
    if cost_kind not in ("qfi", "cfi"):
        raise ConfigError(f"cost.kind must be 'qfi' or 'cfi', got {cost_kind!r}")

    try:
        optimizer = OptimizerConfig(
            max_iters=int(opt_raw.get("max_iters", 400)),
            eta=float(opt_raw.get("eta", 1.0)),
            backtrack=float(opt_raw.get("backtrack", 0.5)),
            tol_grad=(None if opt_raw.get("tol_grad") is None else float(opt_raw["tol_grad"])),
            restarts=int(opt_raw.get("restarts", 5)),
            seed=int(opt_raw.get("seed", 0)),
            cost=cost_kind,
            phi=float(cost_raw.get("phi", 0.0)),
            u_max=float(opt_raw.get("u_max", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    formats = out_raw.get("formats", ["csv", "json"])
    if isinstance(formats, str):
        formats = [formats]

    return ExperimentConfig(
        raw=raw,
        model=model,
        T=(None if run_raw.get("T") is None else float(run_raw["T"])),
        segments=segments,
        substeps=(None if run_raw.get("substeps") is None else int(run_raw["substeps"])),
        control=control,
        optimizer=optimizer,
        scan_T_list=(
            None
            if scan_raw.get("T_list") is None
            else [float(t) for t in scan_raw["T_list"]]
        ),
        scan_segments=scan_raw.get("segments_per_T"),
        output_directory=str(out_raw.get("directory", ".")),
        output_formats=tuple(formats),
    )


def parse_file(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def control_values(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.segments is None:
        raise ConfigError("run.segments is required")
    if cfg.control is None:
        return np.zeros(cfg.segments)
    if isinstance(cfg.control, list):
        return np.asarray(cfg.control, dtype=float)
    return np.full(cfg.segments, float(cfg.control))
