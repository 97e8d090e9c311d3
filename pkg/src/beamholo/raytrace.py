"""Sequential ray tracing of the eyepiece viewing geometry.

Virtual image point -> HOE lens (local volume grating, coupled-wave
efficiency) -> pupil -> thin eye lens -> retina. Lengths are meters, angles
radians. World frame: x right, y up, z pointing away from the viewer; the HOE
sits at the origin and the eye looks along +z from behind it.

Rays are traced in bundles (arrays of origins/directions/weights); the
single-ray helpers wrap the bundle code.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from . import kogelnik
from .errors import InvalidDirectionError, InvalidParameterError

MM = 1e-3
UM = 1e-6
NM = 1e-9

Z_AXIS = np.array([0.0, 0.0, 1.0])


def normalize(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def rotation_pan_tilt(pan: float, tilt: float) -> np.ndarray:
    """Pan about +y, then tilt about the panned x axis."""
    cp, sp = np.cos(pan), np.sin(pan)
    ct, st = np.cos(tilt), np.sin(tilt)
    r_pan = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    r_tilt = np.array([[1.0, 0.0, 0.0], [0.0, ct, -st], [0.0, st, ct]])
    return r_pan @ r_tilt


def orthonormal_basis(axis):
    """Two unit vectors completing ``axis`` to a right-handed frame."""
    axis = normalize(axis)
    helper = np.array([0.0, 1.0, 0.0]) if abs(axis[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = normalize(np.cross(helper, axis))
    v = np.cross(axis, u)
    return u, v


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    weight: float = 1.0
    wavelength: float = 532 * NM

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise InvalidDirectionError("ray direction must be unit length")
        if self.weight < 0:
            raise InvalidParameterError("ray weight must be non-negative")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "direction", d)


@dataclass
class RayBundle:
    origins: np.ndarray
    directions: np.ndarray
    weights: np.ndarray
    wavelength: float
    tags: np.ndarray = None  # source point index per ray

    def __post_init__(self):
        if self.tags is None:
            self.tags = np.zeros(len(self.weights), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self):
        for o, d, w in zip(self.origins, self.directions, self.weights):
            yield Ray(o, d, float(w), self.wavelength)

    def select(self, keep) -> "RayBundle":
        return RayBundle(self.origins[keep], self.directions[keep], self.weights[keep], self.wavelength, self.tags[keep])

    @classmethod
    def from_rays(cls, rays) -> "RayBundle":
        rays = list(rays)
        return cls(
            np.array([r.origin for r in rays]).reshape(-1, 3),
            np.array([r.direction for r in rays]).reshape(-1, 3),
            np.array([r.weight for r in rays], dtype=np.float64),
            rays[0].wavelength if rays else 532 * NM,
        )

    @classmethod
    def concat(cls, bundles) -> "RayBundle":
        return cls(
            np.concatenate([b.origins for b in bundles]),
            np.concatenate([b.directions for b in bundles]),
            np.concatenate([b.weights for b in bundles]),
            bundles[0].wavelength,
            np.concatenate([b.tags for b in bundles]),
        )


@dataclass
class Diagnostics:
    """Culled ray counts and discarded weight per stage."""

    counts: Counter = field(default_factory=Counter)
    weight: Counter = field(default_factory=Counter)

    def record(self, stage: str, weights) -> None:
        weights = np.asarray(weights)
        self.counts[stage] += int(weights.size)
        self.weight[stage] += float(np.sum(weights))

    def merge(self, other: "Diagnostics") -> None:
        self.counts.update(other.counts)
        self.weight.update(other.weight)

    def rows(self):
        return [(stage, self.counts[stage], self.weight[stage]) for stage in sorted(self.counts)]


@dataclass(frozen=True)
class HoeElement:
    """Off-axis HOE lens.

    In its local frame the element lies in the plane z = 0 and its focal point
    is ``focal_length`` away along the direction panned by ``tilt_pan`` from
    +z. The grating at each point is the one written by a plane reference wave
    along +z and a signal wave converging on the focal point, so light
    diverging from the focal point leaves collimated along -z.
    """

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    aperture_radius: float = 25.4 * MM
    focal_length: float = 150 * MM
    tilt_pan: float = np.deg2rad(35.0)
    n0: float = 1.5
    n1: float = 0.04
    d: float = 30 * UM
    wavelength: float = 532 * NM

    def __post_init__(self):
        if not self.focal_length > 0 or not self.aperture_radius > 0:
            raise InvalidParameterError("focal_length and aperture_radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))

    @property
    def normal(self) -> np.ndarray:
        """Unit normal facing the eye."""
        return self.rotation @ -Z_AXIS

    @property
    def focal_point_local(self) -> np.ndarray:
        return self.focal_length * np.array([np.sin(self.tilt_pan), 0.0, np.cos(self.tilt_pan)])

    @property
    def focal_point(self) -> np.ndarray:
        return self.to_world(self.focal_point_local)

    def to_local(self, p):
        return (np.asarray(p) - self.center) @ self.rotation

    def to_world(self, p):
        return np.asarray(p) @ self.rotation.T + self.center

    def dir_to_local(self, d):
        return np.asarray(d) @ self.rotation

    def dir_to_world(self, d):
        return np.asarray(d) @ self.rotation.T

    def moved(self, rotation=None, translation=None, pivot=None) -> "HoeElement":
        """Rigidly rotate about ``pivot`` and then translate."""
        return replace(self, **_rigid(self.center, self.rotation, rotation, translation, pivot))

    def local_grating(self, hit_local) -> kogelnik.GratingVectors:
        """Recorded grating vectors at local hit points (z = 0)."""
        hit_local = np.atleast_2d(hit_local)
        ref_air = np.broadcast_to(Z_AXIS, hit_local.shape)
        sig_air = normalize(self.focal_point_local - hit_local)
        ref_m = refract_planar(ref_air, 1.0, self.n0)
        sig_m = refract_planar(sig_air, 1.0, self.n0)
        return kogelnik.record_grating(ref_m, sig_m, self.wavelength, self.n0, self.n1, self.d, Z_AXIS)


@dataclass(frozen=True)
class EyeModel:
    """Reduced eye: pupil stop on a thin lens, flat retina behind it.

    ``rotation`` maps eye-local to world; the eye looks along local +z.
    """

    eyeball_center: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -30 * MM]))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    pupil_offset: float = 13 * MM
    pupil_diameter: float = 3 * MM
    lens_focal: float = 17 * MM
    retina_distance: float = 17 * MM
    retina_pixels: int = 201
    retina_half_width: float = 3 * MM

    def __post_init__(self):
        if self.pupil_diameter < 0:
            raise InvalidParameterError("pupil_diameter must be non-negative")
        if not self.retina_distance > 0 or not self.lens_focal > 0:
            raise InvalidParameterError("retina_distance and lens_focal must be positive")
        object.__setattr__(self, "eyeball_center", np.asarray(self.eyeball_center, dtype=np.float64))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))

    @property
    def pupil_center(self) -> np.ndarray:
        return self.eyeball_center + self.rotation @ (self.pupil_offset * Z_AXIS)

    @property
    def retina_pitch(self) -> float:
        return 2 * self.retina_half_width / self.retina_pixels

    def moved(self, rotation=None, translation=None, pivot=None) -> "EyeModel":
        moved = _rigid(self.eyeball_center, self.rotation, rotation, translation, pivot)
        return replace(self, eyeball_center=moved["center"], rotation=moved["rotation"])


def _rigid(center, rot, rotation, translation, pivot):
    center = np.asarray(center, dtype=np.float64)
    if rotation is not None:
        pivot = center if pivot is None else np.asarray(pivot, dtype=np.float64)
        center = pivot + rotation @ (center - pivot)
        rot = rotation @ rot
    if translation is not None:
        center = center + np.asarray(translation, dtype=np.float64)
    return {"center": center, "rotation": rot}


@dataclass(frozen=True)
class SourceGrid:
    """Relayed virtual image: a pixel grid facing the HOE with a few lit pixels."""

    center: np.ndarray
    pixel_pitch: float = 16.2 * UM
    image_rows: int = 801
    image_cols: int = 801
    lit_points: tuple = ()
    wavelength: float = 532 * NM
    aim: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "aim", np.asarray(self.aim, dtype=np.float64))
        for r, c in self.lit_points:
            if not (0 <= r < self.image_rows and 0 <= c < self.image_cols):
                raise InvalidParameterError(f"lit point {(r, c)} outside the {self.image_rows}x{self.image_cols} image")
        if 1.22 * self.wavelength / self.pixel_pitch >= 1:
            raise InvalidParameterError("pixel pitch too small for a diffraction cone")

    @property
    def cone_half_angle(self) -> float:
        return float(np.arcsin(1.22 * self.wavelength / self.pixel_pitch))

    def point_positions(self) -> np.ndarray:
        """World positions of lit points; image rows run downwards (-y)."""
        axis = normalize(self.aim - self.center)
        # horizontal image axis stays in the x-z plane
        u = normalize(np.cross(np.array([0.0, 1.0, 0.0]), axis))
        v = np.cross(axis, u)
        rc = np.asarray(self.lit_points, dtype=np.float64).reshape(-1, 2)
        dr = rc[:, 0] - (self.image_rows - 1) / 2
        dc = rc[:, 1] - (self.image_cols - 1) / 2
        return self.center + np.outer(dc * self.pixel_pitch, u) - np.outer(dr * self.pixel_pitch, v)


def grid_points(rows: int, cols: int, n: int) -> tuple:
    """``n x n`` lit pixels uniformly spanning the image, corners included."""
    rr = np.rint(np.linspace(0, rows - 1, n)).astype(int)
    cc = np.rint(np.linspace(0, cols - 1, n)).astype(int)
    return tuple((int(r), int(c)) for r in rr for c in cc)


def default_source(distance=150 * MM, pan=np.deg2rad(35.0), grid=17, **kwargs) -> SourceGrid:
    center = distance * np.array([np.sin(pan), 0.0, np.cos(pan)])
    rows = kwargs.pop("image_rows", 801)
    cols = kwargs.pop("image_cols", 801)
    return SourceGrid(center=center, image_rows=rows, image_cols=cols, lit_points=grid_points(rows, cols, grid), **kwargs)


@dataclass(frozen=True)
class Scene:
    hoe: HoeElement
    eye: EyeModel
    source: SourceGrid


def default_scene(**overrides) -> Scene:
    return Scene(
        hoe=overrides.get("hoe", HoeElement()),
        eye=overrides.get("eye", EyeModel()),
        source=overrides.get("source", default_source()),
    )


@dataclass
class RetinalImage:
    intensity: np.ndarray
    hit_count: np.ndarray
    pixel_pitch: float
    hits_per_point: np.ndarray = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def total(self) -> float:
        return float(np.sum(self.intensity))


def sample_cone(central_dir, cone_half_angle: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vectors uniform in solid angle over a cone, stratified in ``cos(theta)``.

    Ray ``i`` takes its polar coordinate from the ``i``-th of ``count`` equal
    solid-angle shells; azimuths follow a randomly rotated golden-angle
    sequence with jitter.
    """
    central_dir = np.asarray(central_dir, dtype=np.float64)
    norm = np.linalg.norm(central_dir)
    if not np.isfinite(norm) or norm < 1e-12:
        raise InvalidDirectionError("central direction is degenerate")
    if count < 1:
        raise InvalidParameterError("count must be >= 1")
    if not 0 <= cone_half_angle < np.pi / 2:
        raise InvalidParameterError("cone half angle must be in [0, pi/2)")
    axis = central_dir / norm
    u_axis, v_axis = orthonormal_basis(axis)
    i = np.arange(count)
    shell = (i + rng.random(count)) / count
    cos_t = 1.0 - shell * (1.0 - np.cos(cone_half_angle))
    sin_t = np.sqrt(np.clip(1.0 - cos_t * cos_t, 0.0, None))
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    phi = 2 * np.pi * np.mod(i * golden + rng.random() + rng.random(count) / count, 1.0)
    dirs = (
        cos_t[:, None] * axis
        + (sin_t * np.cos(phi))[:, None] * u_axis
        + (sin_t * np.sin(phi))[:, None] * v_axis
    )
    return normalize(dirs)


def emit_rays(point, central_dir, cone_half_angle: float, count: int, seed, wavelength=532 * NM, tag=0) -> RayBundle:
    """``count`` rays leaving ``point`` inside the diffraction cone, weight ``1/count`` each."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dirs = sample_cone(central_dir, cone_half_angle, count, rng)
    return RayBundle(
        origins=np.broadcast_to(np.asarray(point, dtype=np.float64), dirs.shape).copy(),
        directions=dirs,
        weights=np.full(count, 1.0 / count),
        wavelength=wavelength,
        tags=np.full(count, tag, dtype=np.int64),
    )


def refract_planar(d, n_from: float, n_to: float):
    """Refract unit directions through a plane z = const (local frame).

    Returns directions; evanescent results are NaN.
    """
    d = np.asarray(d, dtype=np.float64)
    t = d[..., :2] * (n_from / n_to)
    s2 = np.sum(t * t, axis=-1)
    nz = np.sign(d[..., 2]) * np.sqrt(np.where(s2 < 1.0, 1.0 - s2, np.nan))
    return np.concatenate([t, nz[..., None]], axis=-1)


def intersect_plane(origins, dirs, point, normal):
    """Ray parameter and hit point with a plane; non-forward hits get NaN."""
    denom = dirs @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((point - origins) @ normal) / denom
    t = np.where((np.abs(denom) > 1e-15) & (t > 0), t, np.nan)
    return t, origins + t[:, None] * dirs


def hoe_deflect_bundle(hoe: HoeElement, bundle: RayBundle, diag: Diagnostics | None = None):
    """Diffract a bundle through the HOE; zero order and failures are dropped.

    Returns ``(bundle_out, eta)`` where ``eta`` is the efficiency applied to
    each surviving ray.
    """
    diag = Diagnostics() if diag is None else diag
    o_l = hoe.to_local(bundle.origins)
    d_l = hoe.dir_to_local(bundle.directions)
    t, hit = intersect_plane(o_l, d_l, np.zeros(3), Z_AXIS)
    inside = np.isfinite(t) & (np.hypot(hit[:, 0], hit[:, 1]) <= hoe.aperture_radius)
    diag.record("hoe_aperture", bundle.weights[~inside])
    hit, d_l, idx = hit[inside], d_l[inside], np.flatnonzero(inside)

    d_in = refract_planar(d_l, 1.0, hoe.n0)
    g = hoe.local_grating(hit)
    side = np.where(d_in[:, 2] >= 0.0, 1.0, -1.0)
    g = replace(g, surface_normal=side[:, None] * Z_AXIS)
    res, ok, _ = kogelnik.replay_arrays(g, d_in)
    eta = np.clip(np.where(ok, kogelnik.eta_from_parameters(res.nu, res.xi), 0.0), 0.0, 1.0)
    d_out_m = res.n_out / g.beta
    d_out = refract_planar(d_out_m, hoe.n0, 1.0)
    escaped = np.all(np.isfinite(d_out), axis=-1)
    good = ok & escaped
    w = bundle.weights[idx]
    diag.record("hoe_offshell", w[~ok])
    diag.record("hoe_tir", w[ok & ~escaped])
    diag.record("hoe_zero_order", (w * (1.0 - eta))[good])

    keep = idx[good]
    out = RayBundle(
        origins=hoe.to_world(hit[good]),
        directions=normalize(hoe.dir_to_world(d_out[good])),
        weights=w[good] * eta[good],
        wavelength=bundle.wavelength,
        tags=bundle.tags[keep],
    )
    return out, eta[good]


def hoe_deflect(hoe: HoeElement, ray: Ray) -> Ray | None:
    out, _ = hoe_deflect_bundle(hoe, RayBundle.from_rays([ray]))
    return next(iter(out), None)


def eye_image_bundle(eye: EyeModel, bundle: RayBundle, diag: Diagnostics):
    """Pupil stop, thin lens and retina. Returns surviving ``(rows, cols, weights, tags)``."""
    forward = eye.rotation @ Z_AXIS
    pc = eye.pupil_center
    t, hit = intersect_plane(bundle.origins, bundle.directions, pc, forward)
    r = np.linalg.norm(hit - pc, axis=-1)
    inside = np.isfinite(t) & (r <= eye.pupil_diameter / 2)
    diag.record("pupil", bundle.weights[~inside])
    hit = hit[inside]
    d = bundle.directions[inside] @ eye.rotation
    w, tags = bundle.weights[inside], bundle.tags[inside]
    hit_l = (hit - pc) @ eye.rotation
    # rays through the lens centre keep their direction and meet the focal plane
    back = -d[:, 2]
    forward_ok = back > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        focal_pt = d * (eye.lens_focal / back)[:, None]
        out_dir = focal_pt - hit_l
        s = eye.retina_distance / -out_dir[:, 2]
        retina = hit_l + s[:, None] * out_dir
    x, y = retina[:, 0], retina[:, 1]
    col = np.floor((x + eye.retina_half_width) / eye.retina_pitch)
    row = np.floor((eye.retina_half_width - y) / eye.retina_pitch)
    on = forward_ok & np.isfinite(col) & np.isfinite(row)
    on &= (col >= 0) & (col < eye.retina_pixels) & (row >= 0) & (row < eye.retina_pixels)
    diag.record("retina_bounds", w[~on])
    return row[on].astype(np.int64), col[on].astype(np.int64), w[on], tags[on]


def point_seed(seed: int, point_index: int) -> np.random.Generator:
    """Counter-based sub-stream for one source point."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0, int(point_index)]))


def emit_scene_rays(source: SourceGrid, rays_per_point: int, seed: int) -> RayBundle:
    positions = source.point_positions()
    bundles = [
        emit_rays(p, source.aim - p, source.cone_half_angle, rays_per_point, point_seed(seed, i), source.wavelength, tag=i)
        for i, p in enumerate(positions)
    ]
    return RayBundle.concat(bundles)


def trace_bundle(scene: Scene, bundle: RayBundle) -> RetinalImage:
    eye = scene.eye
    diag = Diagnostics()
    out, _ = hoe_deflect_bundle(scene.hoe, bundle, diag)
    rows, cols, w, tags = eye_image_bundle(eye, out, diag)
    n = eye.retina_pixels
    flat = rows * n + cols
    intensity = np.bincount(flat, weights=w, minlength=n * n).reshape(n, n)
    hits = np.bincount(flat, minlength=n * n).reshape(n, n)
    per_point = np.bincount(tags, minlength=len(scene.source.lit_points))
    return RetinalImage(intensity, hits, eye.retina_pitch, per_point, diag)


def render_retinal_image(scene: Scene, rays_per_point: int = 100, seed: int = 0) -> RetinalImage:
    """Trace every lit source point through the scene onto the retina."""
    if rays_per_point < 1:
        raise InvalidParameterError("rays_per_point must be >= 1")
    return trace_bundle(scene, emit_scene_rays(scene.source, rays_per_point, seed))


def ideal_lens_deflect_bundle(hoe: HoeElement, bundle: RayBundle) -> RayBundle:
    """Thin phase-only lens with the HOE's design: tangential momentum matching only.

    No efficiency weighting and no Bragg selectivity; a point at the design
    focal point leaves as a beam collimated along the local -z axis.
    """
    o_l = hoe.to_local(bundle.origins)
    d_l = hoe.dir_to_local(bundle.directions)
    _, hit = intersect_plane(o_l, d_l, np.zeros(3), Z_AXIS)
    design_in = normalize(hit - hoe.focal_point_local)
    t = d_l[:, :2] - design_in[:, :2]
    nz = -np.sqrt(np.clip(1.0 - np.sum(t * t, axis=-1), 0.0, None))
    out = np.concatenate([t, nz[:, None]], axis=-1)
    return RayBundle(hoe.to_world(hit), normalize(hoe.dir_to_world(out)), bundle.weights.copy(), bundle.wavelength, bundle.tags)
