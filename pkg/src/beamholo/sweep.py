"""Misalignment sweeps: eyebox translation, head orientation, head translation.

Every viewpoint reuses the same emitted ray bundle (the source is fixed in
the world for all three experiments), so maps are free of cell-to-cell
sampling noise and independent of execution order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBaselineError, InvalidParameterError
from .kogelnik import angle_grid
from .raytrace import MM, RetinalImage, Scene, emit_scene_rays, rotation_pan_tilt, trace_bundle

log = logging.getLogger(__name__)

AXES = {
    "eyebox_xy": ("eye_x", "eye_y", "mm"),
    "head_pan_tilt": ("pan", "tilt", "deg"),
    "head_translation_xy": ("head_x", "head_y", "mm"),
}

# fixed categorical palette (matplotlib tab10) for hit accumulation
PALETTE = np.array(
    [
        [0.122, 0.467, 0.706],
        [1.000, 0.498, 0.055],
        [0.173, 0.627, 0.173],
        [0.839, 0.153, 0.157],
        [0.580, 0.404, 0.741],
        [0.549, 0.337, 0.294],
        [0.890, 0.467, 0.761],
        [0.498, 0.498, 0.498],
        [0.737, 0.741, 0.133],
        [0.090, 0.745, 0.812],
    ]
)


@dataclass(frozen=True)
class SweepConfig:
    axis: str
    range_lo: float
    range_hi: float
    step: float
    rays_per_point: int = 100
    seed: int = 0
    sample_every: int = 10
    workers: int = 1
    z_offset: float = 0.0

    def __post_init__(self):
        if self.axis not in AXES:
            raise InvalidParameterError(f"unknown sweep axis {self.axis!r}; expected one of {sorted(AXES)}")
        if self.rays_per_point < 1 or self.sample_every < 1 or self.workers < 1:
            raise InvalidParameterError("rays_per_point, sample_every and workers must be >= 1")
        self.values()

    def values(self) -> np.ndarray:
        return angle_grid(self.range_lo, self.range_hi, self.step)

    @classmethod
    def default_for(cls, axis: str, **kw) -> "SweepConfig":
        lo, hi, step = (-10.0, 10.0, 0.5) if axis == "head_pan_tilt" else (-4.0, 4.0, 0.25)
        return cls(axis, lo, hi, step, **kw)


@dataclass
class SweepResult:
    brightness: np.ndarray
    hit_accumulation: np.ndarray
    hit_viewpoint: np.ndarray
    intensity_accumulation: np.ndarray
    values: np.ndarray
    axis: str
    labels: tuple = field(default=("a", "b"))
    unit: str = ""
    totals: np.ndarray = None

    @property
    def center_index(self) -> int:
        return int(np.argmin(np.abs(self.values)))


def perturb(scene: Scene, axis: str, a: float, b: float, z: float = 0.0) -> Scene:
    """Scene at one sweep cell. Head motions move HOE and eye rigidly."""
    if axis == "eyebox_xy":
        return Scene(scene.hoe, scene.eye.moved(translation=np.array([a, b, z]) * MM), scene.source)
    if axis == "head_translation_xy":
        shift = np.array([a, b, z]) * MM
        return Scene(scene.hoe.moved(translation=shift), scene.eye.moved(translation=shift), scene.source)
    if axis == "head_pan_tilt":
        rot = rotation_pan_tilt(np.deg2rad(a), np.deg2rad(b))
        pivot = scene.eye.eyeball_center
        return Scene(scene.hoe.moved(rotation=rot, pivot=pivot), scene.eye.moved(rotation=rot, pivot=pivot), scene.source)
    raise InvalidParameterError(f"unknown sweep axis {axis!r}")


def relative_brightness(image: RetinalImage, baseline: RetinalImage) -> float:
    base = baseline.total if isinstance(baseline, RetinalImage) else float(np.sum(baseline))
    if not base > 0:
        raise DegenerateBaselineError("baseline image has zero total intensity")
    total = image.total if isinstance(image, RetinalImage) else float(np.sum(image))
    return total / base


def run_sweep(scene: Scene, config: SweepConfig) -> SweepResult:
    """Render every cell of the 2D misalignment grid and normalize by the unperturbed cell."""
    values = config.values()
    n = len(values)
    bundle = emit_scene_rays(scene.source, config.rays_per_point, config.seed)
    cells = [(i, j) for i in range(n) for j in range(n)]

    def render(cell):
        i, j = cell
        return trace_bundle(perturb(scene, config.axis, values[i], values[j], config.z_offset), bundle)

    pixels = scene.eye.retina_pixels
    totals = np.zeros((n, n))
    accum = np.zeros((pixels, pixels))
    hit_rgb = np.zeros((pixels, pixels, 3))
    hit_view = np.full((pixels, pixels), -1, dtype=np.int64)
    # results are reduced in row-major cell order regardless of worker count
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        for k, ((i, j), img) in enumerate(zip(cells, pool.map(render, cells))):
            totals[i, j] = img.total
            accum += img.intensity
            if k % config.sample_every == 0:
                hit = img.hit_count > 0
                hit_rgb[hit] = PALETTE[(k // config.sample_every) % len(PALETTE)]
                hit_view[hit] = k
    c = int(np.argmin(np.abs(values)))
    if abs(values[c]) > 1e-12:
        raise InvalidParameterError("sweep range must contain the unperturbed value 0")
    base = totals[c, c]
    if not base > 0:
        raise DegenerateBaselineError("default layout delivers no light to the retina")
    a, b, unit = AXES[config.axis]
    log.info("sweep %s: %dx%d cells, baseline %.6g", config.axis, n, n, base)
    return SweepResult(
        brightness=totals / base,
        hit_accumulation=hit_rgb,
        hit_viewpoint=hit_view,
        intensity_accumulation=accum,
        values=values,
        axis=config.axis,
        labels=(a, b),
        unit=unit,
        totals=totals,
    )


def center_profiles(result: SweepResult) -> dict:
    """Brightness along each parameter with the other held at zero."""
    c = result.center_index
    a, b = result.labels
    return {a: result.brightness[:, c], b: result.brightness[c, :]}


def compare_axis_robustness(result: SweepResult) -> dict:
    """``(max - min) / mean`` of brightness along each line through the center cell."""
    out = {}
    for label, line in center_profiles(result).items():
        mean = float(np.mean(line))
        out[label] = 0.0 if mean == 0 else float((line.max() - line.min()) / mean)
    return out


def count_local_maxima(profile) -> int:
    """Interior samples strictly above the left neighbour and not below the right one."""
    p = np.asarray(profile, dtype=np.float64)
    if p.size < 3:
        return 0
    mid = p[1:-1]
    return int(np.sum((mid > p[:-2]) & (mid >= p[2:])))
