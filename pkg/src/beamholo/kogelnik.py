"""Volume grating recording, k-vector closure replay and coupled-wave efficiency.

All wave vectors live inside the recording medium (wavenumber
``beta = 2*pi*n0/wavelength``). Refraction at the air boundary is handled by
the ray tracer. Every function broadcasts over leading axes so that one call
can process a whole bundle of rays; vectors are stored in the trailing axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GrazingDiffractionError,
    InvalidAngleError,
    InvalidDirectionError,
    InvalidParameterError,
    NumericalInconsistencyError,
    OffShellError,
)

UNIT_TOL = 1e-9
SINC_SERIES_BELOW = 1e-6


def _as_vec(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1:] != (3,):
        raise InvalidDirectionError(f"expected 3-vectors, got shape {v.shape}")
    return v


def _check_unit(v: np.ndarray, name: str) -> None:
    norms = np.linalg.norm(v, axis=-1)
    if not np.all(np.abs(norms - 1.0) <= UNIT_TOL):
        raise InvalidDirectionError(f"{name} is not unit length (norms {norms.min():.12g}..{norms.max():.12g})")


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1)


def sinc(x):
    """Unnormalized sinc, ``sin(x)/x``, with a series branch near zero."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < SINC_SERIES_BELOW
    safe = np.where(small, 1.0, x)
    x2 = x * x
    out = np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)
    return out if out.ndim else float(out)


def wavenumber(wavelength: float, n0: float) -> float:
    return 2.0 * np.pi * n0 / wavelength


def air_to_medium_angle(theta_air, n0: float):
    """Snell refraction of an incidence angle (radians) from air into the medium."""
    return np.arcsin(np.sin(theta_air) / n0)


@dataclass(frozen=True)
class GratingVectors:
    """A recorded grating. ``n_s = n_r + k`` holds by construction."""

    n_r: np.ndarray
    n_s: np.ndarray
    k: np.ndarray
    beta: float
    n0: float
    n1: float
    d: float
    wavelength: float
    surface_normal: np.ndarray

    @property
    def degenerate(self) -> np.ndarray | bool:
        """True where the reference and signal beams coincide (``k = 0``)."""
        deg = np.linalg.norm(self.k, axis=-1) == 0.0
        return bool(deg) if deg.ndim == 0 else deg


@dataclass(frozen=True)
class DiffractionResult:
    n_out: np.ndarray
    delta_q: np.ndarray
    nu: np.ndarray | float
    xi: np.ndarray | float
    c_R: np.ndarray | float
    c_S: np.ndarray | float
    eta: np.ndarray | float | None = field(default=None)


def record_grating(dir_r, dir_s, wavelength: float, n0: float, n1: float, d: float, surface_normal) -> GratingVectors:
    """Record the grating written by two beams travelling along ``dir_r`` and ``dir_s``."""
    for name, val in (("wavelength", wavelength), ("n0", n0), ("n1", n1), ("d", d)):
        if not (np.isfinite(val) and val > 0):
            raise InvalidParameterError(f"{name} must be finite and positive, got {val!r}")
    if not n1 < n0:
        raise InvalidParameterError(f"index modulation n1={n1} must be below n0={n0}")
    dir_r, dir_s, normal = _as_vec(dir_r), _as_vec(dir_s), _as_vec(surface_normal)
    _check_unit(dir_r, "dir_r")
    _check_unit(dir_s, "dir_s")
    _check_unit(normal, "surface_normal")
    beta = wavenumber(wavelength, n0)
    n_r = beta * dir_r
    n_s = beta * dir_s
    return GratingVectors(
        n_r=n_r, n_s=n_s, k=n_s - n_r, beta=beta, n0=n0, n1=n1, d=d, wavelength=wavelength, surface_normal=normal
    )


def closure_step(p: np.ndarray, normal: np.ndarray, beta: float):
    """Solve ``|p + s*normal| = beta`` for the smaller-magnitude root ``s``.

    Returns ``(s, ok)`` where ``ok`` is False where no real root exists.
    """
    b = _dot(p, normal)
    c = _dot(p, p) - beta * beta
    disc = b * b - c
    ok = disc >= 0.0
    root = np.sqrt(np.where(ok, disc, 0.0))
    # stable form of -b + sign(b)*sqrt(disc) that is exactly zero when c == 0
    denom = b + np.where(b >= 0.0, root, -root)
    safe = np.where(denom == 0.0, 1.0, denom)
    s = np.where(denom == 0.0, 0.0, -c / safe)
    return s, ok


def replay_arrays(g: GratingVectors, dir_in):
    """Non-raising k-vector closure used by the ray tracer.

    Returns ``(result, ok)``; entries where ``ok`` is False are off-shell or
    diffract at grazing/backward angles and carry meaningless numbers.
    """
    dir_in = _as_vec(dir_in)
    beta = g.beta
    normal = g.surface_normal
    n_in = beta * dir_in
    n_prime = n_in + g.k
    s, on_shell = closure_step(n_prime, normal, beta)
    delta_q = s[..., None] * normal
    n_out = n_prime + delta_q
    q = beta * normal
    c_R = _dot(n_in, q) / beta**2
    c_S = _dot(n_out, q) / beta**2
    ok = on_shell & (c_S > 0.0) & (c_R > 0.0)
    safe_cS = np.where(c_S > 0.0, c_S, 1.0)
    xi = np.linalg.norm(delta_q, axis=-1) * g.d / (2.0 * safe_cS)
    safe_prod = np.where(ok, c_R * c_S, 1.0)
    nu = np.pi * g.n1 * g.d / (g.wavelength * np.sqrt(safe_prod))
    result = DiffractionResult(n_out=n_out, delta_q=delta_q, nu=nu, xi=xi, c_R=c_R, c_S=c_S)
    return result, ok, on_shell


def kvcm_replay(g: GratingVectors, dir_in) -> DiffractionResult:
    """Replay ``g`` with a beam along ``dir_in``; efficiency is left unset."""
    dir_in = _as_vec(dir_in)
    _check_unit(dir_in, "dir_in")
    result, ok, on_shell = replay_arrays(g, dir_in)
    if not np.all(on_shell):
        raise OffShellError("no real closure correction exists for this incidence")
    if not np.all(result.c_S > 0.0):
        raise GrazingDiffractionError(f"diffracted beam is grazing or backward (c_S={np.min(result.c_S):.6g})")
    return result


def eta_from_parameters(nu, xi):
    """``[nu * sinc(sqrt(nu^2 + xi^2))]^2``."""
    nu = np.asarray(nu, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    eta = (nu * sinc(np.sqrt(nu * nu + xi * xi))) ** 2
    return eta if np.ndim(eta) else float(eta)


def diffraction_efficiency(g: GratingVectors, r: DiffractionResult):
    """Coupled-wave diffraction efficiency of a replay produced by :func:`kvcm_replay`."""
    c_R = np.asarray(r.c_R)
    c_S = np.asarray(r.c_S)
    if np.any(c_R <= 0.0) or np.any(c_S <= 0.0):
        raise GrazingDiffractionError("obliquity factors must be positive")
    nu = np.pi * g.n1 * g.d / (g.wavelength * np.sqrt(c_R * c_S))
    eta = np.asarray(eta_from_parameters(nu, r.xi))
    if np.any(~np.isfinite(eta)) or np.any(eta < 0.0) or np.any(eta > 1.0 + 1e-12):
        raise NumericalInconsistencyError(f"efficiency outside [0, 1]: {eta}")
    eta = np.minimum(eta, 1.0)
    return float(eta) if eta.ndim == 0 else eta


def replay(g: GratingVectors, dir_in) -> DiffractionResult:
    """Replay and attach the efficiency in one step."""
    r = kvcm_replay(g, dir_in)
    return DiffractionResult(
        n_out=r.n_out, delta_q=r.delta_q, nu=r.nu, xi=r.xi, c_R=r.c_R, c_S=r.c_S, eta=diffraction_efficiency(g, r)
    )


def efficiency_special_case(theta: float, wavelength: float, n1: float, d: float) -> float:
    """Efficiency of an unslanted, Bragg-matched grating at incidence ``theta`` (radians)."""
    c = np.cos(theta)
    if not c > 0:
        raise InvalidAngleError(f"cos(theta) must be positive, got {c}")
    return float(np.sin(np.pi * d * n1 / (wavelength * c)) ** 2)


def angle_grid(theta_min: float, theta_max: float, step: float) -> np.ndarray:
    """Inclusive, evenly spaced grid; the span must be a whole number of steps."""
    if not theta_min < theta_max:
        raise InvalidParameterError("theta_min must be below theta_max")
    if not step > 0:
        raise InvalidParameterError("step must be positive")
    n = (theta_max - theta_min) / step
    if abs(n - round(n)) > 1e-9:
        raise InvalidParameterError(f"range {theta_min}..{theta_max} is not a whole number of {step} steps")
    return np.linspace(theta_min, theta_max, int(round(n)) + 1)


def transmission_directions(theta_r, theta_s):
    """In-medium unit directions for a symmetric-about-normal transmission recording.

    The reference arrives from +x and the signal from -x, both travelling
    towards +z, so equal angles give an unslanted grating.
    """
    theta_r = np.asarray(theta_r, dtype=np.float64)
    theta_s = np.asarray(theta_s, dtype=np.float64)
    dir_r = np.stack([np.sin(theta_r), np.zeros_like(theta_r), np.cos(theta_r)], axis=-1)
    dir_s = np.stack([-np.sin(theta_s), np.zeros_like(theta_s), np.cos(theta_s)], axis=-1)
    return dir_r, dir_s


def efficiency_map(
    theta_min: float,
    theta_max: float,
    step: float,
    wavelength: float = 532e-9,
    n0: float = 1.5,
    n1: float = 0.04,
    d: float = 30e-6,
) -> np.ndarray:
    """Bragg-matched efficiency over recording angle pairs (degrees, in-medium).

    Entry ``[i, j]`` is the efficiency of the grating recorded with reference
    angle ``theta[i]`` and signal angle ``theta[j]`` when replayed by its own
    reference beam.
    """
    theta = np.deg2rad(angle_grid(theta_min, theta_max, step))
    tr, ts = np.meshgrid(theta, theta, indexing="ij")
    dir_r, dir_s = transmission_directions(tr, ts)
    g = record_grating(dir_r, dir_s, wavelength, n0, n1, d, np.array([0.0, 0.0, 1.0]))
    return diffraction_efficiency(g, kvcm_replay(g, dir_r))


def off_bragg_scan(g: GratingVectors, dir_in_list) -> np.ndarray:
    """Efficiency of a single grating replayed along each of many directions.

    This is the off-Bragg counterpart of :func:`efficiency_map`; geometries
    without a valid closure get efficiency 0.
    """
    r, ok, _ = replay_arrays(g, dir_in_list)
    eta = np.where(ok, eta_from_parameters(r.nu, r.xi), 0.0)
    return np.clip(eta, 0.0, 1.0)
