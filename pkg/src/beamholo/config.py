"""JSON experiment configuration with unit-suffixed keys."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

_UNIT_SUFFIXES = ("_mm", "_um", "_nm", "_deg", "_m", "_cm", "_rad")


@dataclass
class OpticsConfig:
    wavelength_nm: float = 532.0
    n0: float = 1.5
    n1: float = 0.04
    thickness_um: float = 30.0
    focal_length_mm: float = 150.0
    tilt_pan_deg: float = 35.0
    hoe_aperture_radius_mm: float = 25.4
    eyeball_distance_mm: float = 30.0
    pupil_diameter_mm: float = 3.0
    pupil_offset_mm: float = 13.0
    eye_lens_focal_mm: float = 17.0
    retina_distance_mm: float = 17.0
    retina_half_width_mm: float = 3.0
    retina_pixels: int = 201
    source_distance_mm: float = 150.0
    source_pan_deg: float = 35.0
    source_pitch_um: float = 16.2
    image_rows: int = 801
    image_cols: int = 801
    grid_points: int = 17
    rays_per_point: int = 100

    _positive = (
        "wavelength_nm", "n0", "n1", "thickness_um", "focal_length_mm", "hoe_aperture_radius_mm",
        "eyeball_distance_mm", "eye_lens_focal_mm", "retina_distance_mm", "retina_half_width_mm",
        "retina_pixels", "source_distance_mm", "source_pitch_um", "image_rows", "image_cols",
        "grid_points", "rays_per_point",
    )
    _non_negative = ("pupil_diameter_mm", "pupil_offset_mm")


@dataclass
class CghConfig:
    image_path: str | None = None
    depth_path: str | None = None
    hologram_path: str | None = None
    field_path: str | None = None
    rows: int = 256
    cols: int = 256
    n_planes: int = 6
    base_distance_mm: float = 20.0
    separation_mm: float = 1.0
    pitch_um: float = 8.0
    wavelength_nm: float = 532.0
    iterations: int = 200
    step_size: float = 0.09
    momentum: float = 0.0
    loss_report_every: int = 20
    a_max: float = 1.0
    linear_grating: bool = False

    _positive = ("rows", "cols", "n_planes", "separation_mm", "pitch_um", "wavelength_nm", "iterations",
                 "step_size", "loss_report_every", "a_max")
    _non_negative = ("momentum",)


@dataclass
class KogelnikConfig:
    wavelength_nm: float = 532.0
    n0: float = 1.5
    n1: float = 0.04
    thickness_um: float = 30.0
    theta_min_deg: float = 0.0
    theta_max_deg: float = 70.0
    step_deg: float = 0.5

    _positive = ("wavelength_nm", "n0", "n1", "thickness_um", "step_deg")
    _non_negative = ()


@dataclass
class SweepSection:
    axis: str = "eyebox_xy"
    eyebox_range_mm: float = 4.0
    eyebox_step_mm: float = 0.25
    orientation_range_deg: float = 10.0
    orientation_step_deg: float = 0.5
    translation_range_mm: float = 4.0
    translation_step_mm: float = 0.25
    z_offset_mm: float = 0.0
    sample_every: int = 10

    _positive = ("eyebox_range_mm", "eyebox_step_mm", "orientation_range_deg", "orientation_step_deg",
                 "translation_range_mm", "translation_step_mm", "sample_every")
    _non_negative = ()


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["hbgf", "csv", "png"])

    _positive = ()
    _non_negative = ()


SECTIONS = {
    "optics": OpticsConfig,
    "cgh": CghConfig,
    "kogelnik": KogelnikConfig,
    "sweep": SweepSection,
    "output": OutputSection,
}

AXIS_ALIASES = {
    "eyebox": "eyebox_xy",
    "eyebox_xy": "eyebox_xy",
    "orientation": "head_pan_tilt",
    "head_orientation": "head_pan_tilt",
    "head_pan_tilt": "head_pan_tilt",
    "translation": "head_translation_xy",
    "head_translation": "head_translation_xy",
    "head_translation_xy": "head_translation_xy",
}


@dataclass
class ExperimentConfig:
    optics: OpticsConfig = field(default_factory=OpticsConfig)
    cgh: CghConfig = field(default_factory=CghConfig)
    kogelnik: KogelnikConfig = field(default_factory=KogelnikConfig)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def content_hash(self) -> str:
        """Hash of the physics content; the output directory is excluded."""
        data = self.to_dict()
        data["output"] = {k: v for k, v in data["output"].items() if k != "directory"}
        canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _stem(key: str) -> str:
    for suffix in _UNIT_SUFFIXES:
        if key.endswith(suffix):
            return key[: -len(suffix)]
    return key


def _build_section(name: str, cls, raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    stems = {_stem(k): k for k in known}
    for key in raw:
        if key not in known:
            if _stem(key) in stems and _stem(key) != key:
                raise ConfigError(f"{name}.{key}: wrong unit suffix, expected '{stems[_stem(key)]}'")
            if key in stems and stems[key] != key:
                raise ConfigError(f"{name}.{key}: missing unit suffix, expected '{stems[key]}'")
            raise ConfigError(f"{name}.{key}: unknown key")
    values = {}
    for key, val in raw.items():
        default = getattr(cls(), key)
        if isinstance(default, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"{name}.{key}: expected a boolean, got {val!r}")
        elif isinstance(default, int) and not isinstance(default, bool):
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{name}.{key}: expected an integer, got {val!r}")
        elif isinstance(default, float):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{name}.{key}: expected a number, got {val!r}")
            val = float(val)
        values[key] = val
    obj = cls(**values)
    for key in cls._positive:
        if not getattr(obj, key) > 0:
            raise ConfigError(f"{name}.{key}: must be positive, got {getattr(obj, key)!r}")
    for key in cls._non_negative:
        if getattr(obj, key) < 0:
            raise ConfigError(f"{name}.{key}: must be non-negative, got {getattr(obj, key)!r}")
    return obj


def from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be an object")
    unknown = set(raw) - set(SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    sections = {name: _build_section(name, cls, raw.get(name, {})) for name, cls in SECTIONS.items()}
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: expected an unsigned integer, got {seed!r}")
    cfg = ExperimentConfig(seed=seed, **sections)
    axis = AXIS_ALIASES.get(cfg.sweep.axis)
    if axis is None:
        raise ConfigError(f"sweep.axis: unknown axis {cfg.sweep.axis!r}")
    cfg.sweep.axis = axis
    if not cfg.optics.n1 < cfg.optics.n0:
        raise ConfigError("optics.n1: must be below optics.n0")
    unknown_formats = set(cfg.output.formats) - {"hbgf", "csv", "png"}
    if unknown_formats:
        raise ConfigError(f"output.formats: unknown format(s) {sorted(unknown_formats)}")
    return cfg


def loads(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return from_dict(raw)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return loads(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply ``section.key=value`` (value parsed as JSON, else kept as a string)."""
    m = re.fullmatch(r"([A-Za-z_]+)(?:\.([A-Za-z_0-9]+))?=(.*)", assignment)
    if not m:
        raise ConfigError(f"override {assignment!r} is not of the form section.key=value")
    section, key, text = m.groups()
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    if key is None:
        raw[section] = value
    else:
        raw.setdefault(section, {})[key] = value
    return raw
