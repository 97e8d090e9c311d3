"""Command line entry point: ``beamholo <command> [--config cfg.json] ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import cgh, hbgf, kogelnik, raytrace, sweep
from .config import AXIS_ALIASES, ExperimentConfig, apply_override, from_dict, parse_config
from .errors import BeamHoloError, ConfigError
from .outputs import OutputWriter, Table, write_outputs
from .wavefield import ComplexField, build_kernel, propagate

log = logging.getLogger("beamholo")

COMMANDS = ("efficiency-map", "optimize-hologram", "encode", "reconstruct", "render-retina", "sweep")

MM, UM, NM = 1e-3, 1e-6, 1e-9


def scene_from_config(cfg: ExperimentConfig) -> raytrace.Scene:
    o = cfg.optics
    hoe = raytrace.HoeElement(
        aperture_radius=o.hoe_aperture_radius_mm * MM,
        focal_length=o.focal_length_mm * MM,
        tilt_pan=np.deg2rad(o.tilt_pan_deg),
        n0=o.n0,
        n1=o.n1,
        d=o.thickness_um * UM,
        wavelength=o.wavelength_nm * NM,
    )
    eye = raytrace.EyeModel(
        eyeball_center=np.array([0.0, 0.0, -o.eyeball_distance_mm * MM]),
        pupil_offset=o.pupil_offset_mm * MM,
        pupil_diameter=o.pupil_diameter_mm * MM,
        lens_focal=o.eye_lens_focal_mm * MM,
        retina_distance=o.retina_distance_mm * MM,
        retina_pixels=o.retina_pixels,
        retina_half_width=o.retina_half_width_mm * MM,
    )
    source = raytrace.default_source(
        distance=o.source_distance_mm * MM,
        pan=np.deg2rad(o.source_pan_deg),
        grid=o.grid_points,
        pixel_pitch=o.source_pitch_um * UM,
        wavelength=o.wavelength_nm * NM,
        image_rows=o.image_rows,
        image_cols=o.image_cols,
    )
    return raytrace.Scene(hoe, eye, source)


def sweep_config_from(cfg: ExperimentConfig, workers: int = 1) -> sweep.SweepConfig:
    s = cfg.sweep
    span, step = {
        "eyebox_xy": (s.eyebox_range_mm, s.eyebox_step_mm),
        "head_pan_tilt": (s.orientation_range_deg, s.orientation_step_deg),
        "head_translation_xy": (s.translation_range_mm, s.translation_step_mm),
    }[s.axis]
    return sweep.SweepConfig(
        s.axis, -span, span, step, cfg.optics.rays_per_point, cfg.seed, s.sample_every, workers, s.z_offset_mm
    )


def synthetic_scene(rows: int, cols: int, seed: int):
    """Smooth procedural image and depth map for runs without input files."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:rows, 0:cols] / np.array([rows, cols])[:, None, None]
    img = 0.25 + 0.2 * np.sin(6 * np.pi * x) * np.cos(4 * np.pi * y)
    for _ in range(8):
        cy, cx, r, a = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.05, 0.2), rng.uniform(0.2, 0.5)
        img += a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * r * r))
    img = np.clip(img / img.max(), 0, 1)
    depth = 0.7 * y + 0.3 * img
    depth = (depth - depth.min()) / (depth.max() - depth.min())
    return img, depth


def load_grid(path, shape) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".hbgf":
        grid = np.real(hbgf.read(path)).astype(np.float64)
    else:
        from PIL import Image

        with Image.open(path) as im:
            grid = np.asarray(im.convert("L").resize((shape[1], shape[0]), Image.BILINEAR), dtype=np.float64) / 255.0
    if grid.shape != tuple(shape):
        raise ConfigError(f"{path}: grid shape {grid.shape} does not match configured {tuple(shape)}")
    return grid


def _cgh_inputs(cfg: ExperimentConfig):
    c = cfg.cgh
    shape = (c.rows, c.cols)
    img, depth = synthetic_scene(c.rows, c.cols, cfg.seed)
    if c.image_path:
        img = load_grid(c.image_path, shape)
    if c.depth_path:
        depth = load_grid(c.depth_path, shape)
    return img, depth


def _distances(c) -> list:
    return [(c.base_distance_mm + p * c.separation_mm) * MM for p in range(c.n_planes)]


def cmd_efficiency_map(cfg, writer, args):
    k = cfg.kogelnik
    eta = kogelnik.efficiency_map(
        k.theta_min_deg, k.theta_max_deg, k.step_deg, k.wavelength_nm * NM, k.n0, k.n1, k.thickness_um * UM
    )
    theta = kogelnik.angle_grid(k.theta_min_deg, k.theta_max_deg, k.step_deg)
    rows = [(float(tr), float(ts), float(eta[i, j])) for i, tr in enumerate(theta) for j, ts in enumerate(theta)]
    paths = write_outputs({"eta": Table(["theta_r_deg", "theta_s_deg", "eta"], rows), "eta_map": eta}, writer)
    return f"eta(0,0)={eta[0, 0]:.6f} max={eta.max():.6f}", paths


def cmd_optimize(cfg, writer, args):
    c = cfg.cgh
    img, depth = _cgh_inputs(cfg)
    stack = cgh.build_plane_targets(img, depth, c.n_planes, c.base_distance_mm * MM, c.separation_mm * MM)
    opt = cgh.OptimizerConfig(c.iterations, c.step_size, cfg.seed, c.loss_report_every, c.momentum)
    holo, losses = cgh.optimize_multiplane_phase(stack, opt, c.pitch_um * UM, c.wavelength_nm * NM)
    recon = cgh.reconstruct_stack(holo, stack.distances)
    psnr = cgh.masked_psnr(recon, stack)
    displayed = cgh.apply_linear_grating(holo) if c.linear_grating else holo
    results = {
        "loss": Table(["iteration", "loss"], [(i, float(v)) for i, v in enumerate(losses)]),
        "hologram_phase": displayed.phase,
    }
    for p, r in enumerate(recon):
        results[f"recon_plane{p}"] = r
    paths = write_outputs(results, writer)
    return f"loss {losses[0]:.6g} -> {losses[-1]:.6g}, masked PSNR {psnr:.2f} dB", paths


def cmd_encode(cfg, writer, args):
    c = cfg.cgh
    pitch, wl = c.pitch_um * UM, c.wavelength_nm * NM
    if c.field_path:
        data = hbgf.read(c.field_path).astype(np.complex128)
    else:
        img, _ = _cgh_inputs(cfg)
        target = ComplexField(np.sqrt(img).astype(np.complex128), pitch, wl)
        data = propagate(target, build_kernel(c.rows, c.cols, pitch, wl, -c.base_distance_mm * MM)).data
    peak = np.abs(data).max()
    data = data * (c.a_max / peak) if peak > 0 else data
    field = ComplexField(data, pitch, wl)
    chan_a, chan_b = cgh.complex_to_double_phase(field, c.a_max)
    holo = cgh.double_phase_assemble(chan_a, chan_b, pitch, wl)
    if c.linear_grating:
        holo = cgh.apply_linear_grating(holo)
    err = np.abs((np.exp(1j * chan_a) + np.exp(1j * chan_b)) / 2 - field.data / c.a_max).max()
    paths = write_outputs({"hologram_phase": holo.phase, "chan_a": chan_a, "chan_b": chan_b}, writer)
    return f"double-phase identity max error {err:.3g}", paths


def cmd_reconstruct(cfg, writer, args):
    c = cfg.cgh
    if not c.hologram_path:
        raise ConfigError("cgh.hologram_path: required for reconstruct")
    phase = np.real(hbgf.read(c.hologram_path)).astype(np.float64)
    holo = cgh.PhaseHologram(phase, c.pitch_um * UM, c.wavelength_nm * NM)
    recon = cgh.reconstruct_stack(holo, _distances(c))
    paths = write_outputs({f"recon_plane{p}": r for p, r in enumerate(recon)}, writer)
    return f"{len(recon)} planes, mean intensity {np.mean([r.mean() for r in recon]):.6g}", paths


def cmd_render(cfg, writer, args):
    scene = scene_from_config(cfg)
    img = raytrace.render_retinal_image(scene, cfg.optics.rays_per_point, cfg.seed)
    diag = Table(["stage", "count", "discarded_weight"], img.diagnostics.rows())
    paths = write_outputs(
        {"retina_intensity": img.intensity, "retina_hits": img.hit_count.astype(np.float64), "diagnostics": diag},
        writer,
    )
    return f"total intensity {img.total:.6g}, {int(img.hit_count.sum())} hits", paths


def cmd_sweep(cfg, writer, args):
    scene = scene_from_config(cfg)
    scfg = sweep_config_from(cfg, args.threads)
    res = sweep.run_sweep(scene, scfg)
    v = res.values
    rows = [(float(v[i]), float(v[j]), float(res.brightness[i, j])) for i in range(len(v)) for j in range(len(v))]
    paths = write_outputs(
        {
            "brightness": Table(["param_a", "param_b", "relative_brightness"], rows),
            "brightness_map": res.brightness,
            "hit_accumulation": res.hit_accumulation,
            "hit_viewpoint": res.hit_viewpoint.astype(np.float64),
            "intensity_accumulation": res.intensity_accumulation,
        },
        writer,
    )
    spread = sweep.compare_axis_robustness(res)
    text = ", ".join(f"{k} spread {s:.4f}" for k, s in spread.items())
    return f"{res.axis} {len(v)}x{len(v)}: {text}", paths


HANDLERS = {
    "efficiency-map": cmd_efficiency_map,
    "optimize-hologram": cmd_optimize,
    "encode": cmd_encode,
    "reconstruct": cmd_reconstruct,
    "render-retina": cmd_render,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamholo", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--output", help="output directory (overrides output.directory)")
    parser.add_argument("--seed", type=int, help="top-level seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    parser.add_argument("--axis", choices=sorted(AXIS_ALIASES), help="sweep axis (overrides sweep.axis)")
    parser.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config key")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        raw = json.loads(parse_config(args.config).to_json())
    for assignment in args.set:
        apply_override(raw, assignment)
    if args.axis:
        raw.setdefault("sweep", {})["axis"] = args.axis
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.output:
        raw.setdefault("output", {})["directory"] = args.output
    return from_dict(raw)


def run(command: str, cfg: ExperimentConfig, args=None) -> int:
    """Run one command; returns the process exit status."""
    args = args or argparse.Namespace(threads=1)
    writer = OutputWriter(cfg.output.directory, command, cfg.content_hash(), cfg.output.formats)
    try:
        summary, paths = HANDLERS[command](cfg, writer, args)
    except BeamHoloError as exc:
        writer.cleanup()
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except BaseException:
        writer.cleanup()
        raise
    print(f"{command}: {summary} -> {', '.join(str(p) for p in paths)}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        cfg = load_config(args)
    except BeamHoloError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    return run(args.command, cfg, args)


if __name__ == "__main__":
    sys.exit(main())
