"""Multiplane phase-only hologram synthesis and deterministic phase encoders.

Phase convention: a hologram with phase ``phi`` displays ``O_h = e^{-j phi}``
in engineering notation (``j = -i``). In numpy's physics notation that is the
array ``exp(1j * phi)``, which is what every routine here propagates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AmplitudeOverflowError, DivergenceError, IncompatibleGridError, InvalidParameterError
from .wavefield import ComplexField, build_kernel, intensity, propagate, propagate_array

log = logging.getLogger(__name__)


def wrap_phase(phase):
    """Wrap radians into ``[-pi, pi)``."""
    out = np.mod(np.asarray(phase, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    # mod can round up to exactly 2*pi for tiny negative inputs
    return np.where(out >= np.pi, -np.pi, out)


@dataclass(frozen=True)
class PhaseHologram:
    phase: np.ndarray
    pitch: float = 8e-6
    wavelength: float = 532e-9

    def __post_init__(self):
        phase = np.asarray(self.phase, dtype=np.float64)
        if phase.ndim != 2:
            raise InvalidParameterError(f"phase must be 2D, got shape {phase.shape}")
        if not np.all(np.isfinite(phase)):
            raise InvalidParameterError("phase contains non-finite values")
        phase = wrap_phase(phase)
        phase.setflags(write=False)
        object.__setattr__(self, "phase", phase)

    @property
    def shape(self) -> tuple[int, int]:
        return self.phase.shape

    def field(self) -> ComplexField:
        """Unit-amplitude field leaving the modulator."""
        return ComplexField(np.exp(1j * self.phase), self.pitch, self.wavelength)


@dataclass
class PlaneTargetStack:
    targets: list
    masks: list
    distances: list
    weights: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.targets)
        if not self.weights:
            self.weights = [1.0] * n
        if n < 1 or not (len(self.masks) == len(self.distances) == len(self.weights) == n):
            raise InvalidParameterError("targets, masks, distances and weights must have equal non-zero length")
        self.targets = [np.asarray(t, dtype=np.float64) for t in self.targets]
        self.masks = [np.asarray(m, dtype=bool) for m in self.masks]
        shape = self.targets[0].shape
        if any(g.shape != shape for g in self.targets + self.masks):
            raise IncompatibleGridError("all target and mask grids must share one shape")
        if any(w < 0 for w in self.weights):
            raise InvalidParameterError("weights must be non-negative")
        if np.any(np.diff(self.distances) <= 0):
            raise InvalidParameterError("plane distances must be strictly increasing")
        if np.any(np.sum(self.masks, axis=0) > 1):
            raise InvalidParameterError("plane masks overlap")

    @property
    def shape(self) -> tuple[int, int]:
        return self.targets[0].shape

    def __len__(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class OptimizerConfig:
    iterations: int = 200
    step_size: float = 0.09
    seed: int = 0
    loss_report_every: int = 20
    momentum: float = 0.0

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidParameterError("iterations must be >= 1")
        if not self.step_size > 0:
            raise InvalidParameterError("step_size must be positive")
        if self.loss_report_every < 1:
            raise InvalidParameterError("loss_report_every must be >= 1")
        if self.seed < 0:
            raise InvalidParameterError("seed must be unsigned")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidParameterError("momentum must be in [0, 1)")


def depth_bins(depth: np.ndarray, n_planes: int) -> np.ndarray:
    """Bin index per pixel; edge values go to the lower bin, NaN depth gives -1."""
    scaled = np.ceil(np.nan_to_num(depth, nan=-1.0) * n_planes) - 1
    idx = np.clip(scaled, 0, n_planes - 1).astype(np.int64)
    return np.where(np.isnan(depth), -1, idx)


def build_plane_targets(image, depth, n_planes: int, base_distance: float, separation: float) -> PlaneTargetStack:
    """Slice an image into per-plane targets by equal-width depth bins over [0, 1]."""
    image = np.asarray(image, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if image.shape != depth.shape:
        raise IncompatibleGridError(f"image {image.shape} and depth {depth.shape} differ in shape")
    if n_planes < 1:
        raise InvalidParameterError("n_planes must be >= 1")
    if not separation > 0:
        raise InvalidParameterError("separation must be positive")
    idx = depth_bins(depth, n_planes)
    masks = [idx == p for p in range(n_planes)]
    return PlaneTargetStack(
        targets=[image * m for m in masks],
        masks=masks,
        distances=[base_distance + p * separation for p in range(n_planes)],
        weights=[1.0] * n_planes,
    )


class _Propagators:
    """Transfer functions for a stack, cached per hologram geometry."""

    def __init__(self, shape, pitch, wavelength, distances):
        self.transfers = [build_kernel(shape[0], shape[1], pitch, wavelength, z).transfer for z in distances]


def _loss_grad(phase, stack: PlaneTargetStack, transfers):
    slm = np.exp(1j * phase)
    spectrum = np.fft.fft2(slm)
    loss = 0.0
    back = np.zeros_like(spectrum)
    for target, mask, weight, transfer in zip(stack.targets, stack.masks, stack.weights, transfers):
        u = np.fft.ifft2(spectrum * transfer)
        resid = mask * (np.abs(u) ** 2 - target)
        loss += weight * float(np.sum(resid * resid))
        back += weight * np.fft.fft2(resid * u) * np.conj(transfer)
    grad = 4.0 * np.imag(np.conj(slm) * np.fft.ifft2(back))
    return loss, grad


def loss_and_gradient(phase: PhaseHologram, stack: PlaneTargetStack):
    """Masked squared intensity error over all planes and its gradient w.r.t. phase.

    The gradient is the adjoint (Wirtinger) expression; the back-propagation
    uses the conjugate transfer function of each plane.
    """
    if phase.shape != stack.shape:
        raise IncompatibleGridError(f"hologram {phase.shape} and targets {stack.shape} differ in shape")
    transfers = _Propagators(phase.shape, phase.pitch, phase.wavelength, stack.distances).transfers
    return _loss_grad(phase.phase, stack, transfers)


def initial_phase(shape, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return wrap_phase(rng.uniform(-np.pi, np.pi, size=shape))


def optimize_multiplane_phase(stack: PlaneTargetStack, config: OptimizerConfig, pitch: float, wavelength: float):
    """Fixed-step gradient descent on :func:`loss_and_gradient`.

    Returns ``(hologram, losses)`` where ``losses[i]`` is the loss before step
    ``i`` and the last entry is the loss of the returned hologram.
    """
    transfers = _Propagators(stack.shape, pitch, wavelength, stack.distances).transfers
    phase = initial_phase(stack.shape, config.seed)
    velocity = np.zeros_like(phase)
    losses = []
    for it in range(config.iterations + 1):
        loss, grad = _loss_grad(phase, stack, transfers)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError(it, loss)
        losses.append(loss)
        if it % config.loss_report_every == 0:
            log.info("iteration %d loss %.6g", it, loss)
        if it == config.iterations:
            break
        velocity = config.momentum * velocity - config.step_size * grad
        phase = phase + velocity
    return PhaseHologram(phase, pitch, wavelength), np.asarray(losses)


def reconstruct_stack(h: PhaseHologram, distances) -> list:
    """Intensity of the hologram's field at each distance."""
    out = []
    for z in distances:
        kernel = build_kernel(h.shape[0], h.shape[1], h.pitch, h.wavelength, z)
        out.append(intensity(propagate(h.field(), kernel)))
    return out


def masked_psnr(reconstructions, stack: PlaneTargetStack, peak: float = 1.0) -> float:
    """PSNR over in-focus pixels of all planes together."""
    err = np.concatenate([(r - t)[m] for r, t, m in zip(reconstructions, stack.targets, stack.masks)])
    mse = float(np.mean(err**2))
    return float("inf") if mse == 0 else 10.0 * np.log10(peak**2 / mse)


def complex_to_double_phase(field: ComplexField, a_max: float = 1.0):
    """Split each complex sample into two unit phasors averaging to it.

    ``(exp(1j*chan_a) + exp(1j*chan_b)) / 2 == (a / a_max) * exp(1j*phi)``.
    """
    if not a_max > 0:
        raise InvalidParameterError("a_max must be positive")
    data = field.data if isinstance(field, ComplexField) else np.asarray(field, dtype=np.complex128)
    amp = np.abs(data)
    # allow rounding from normalizing to a_max
    if np.any(amp > a_max * (1 + 1e-12)):
        raise AmplitudeOverflowError(f"amplitude {amp.max():.6g} exceeds a_max={a_max}")
    phi = np.angle(data)
    offset = np.arccos(np.minimum(amp / a_max, 1.0))
    return wrap_phase(phi + offset), wrap_phase(phi - offset)


def double_phase_assemble(chan_a, chan_b, pitch: float = 8e-6, wavelength: float = 532e-9) -> PhaseHologram:
    """Checkerboard interleave: ``chan_a`` where row+col is even, ``chan_b`` elsewhere."""
    chan_a = np.asarray(chan_a, dtype=np.float64)
    chan_b = np.asarray(chan_b, dtype=np.float64)
    if chan_a.shape != chan_b.shape:
        raise IncompatibleGridError(f"channel shapes differ: {chan_a.shape} vs {chan_b.shape}")
    phi = np.empty_like(chan_a)
    phi[0::2, 0::2] = chan_a[0::2, 0::2]
    phi[1::2, 1::2] = chan_a[1::2, 1::2]
    phi[0::2, 1::2] = chan_b[0::2, 1::2]
    phi[1::2, 0::2] = chan_b[1::2, 0::2]
    return PhaseHologram(phi, pitch, wavelength)


def checkerboard_split(h: PhaseHologram):
    """Inverse of :func:`double_phase_assemble` at the sampled positions.

    Returns ``(a, b, a_mask)``; ``a`` and ``b`` hold the hologram phase where
    the respective channel was sampled and NaN elsewhere.
    """
    rows, cols = np.indices(h.shape)
    a_mask = (rows + cols) % 2 == 0
    a = np.where(a_mask, h.phase, np.nan)
    b = np.where(~a_mask, h.phase, np.nan)
    return a, b, a_mask


def apply_linear_grating(h: PhaseHologram) -> PhaseHologram:
    """Add pi to every odd row, pushing undiffracted light off axis."""
    shift = np.zeros(h.shape)
    shift[1::2, :] = np.pi
    return PhaseHologram(h.phase + shift, h.pitch, h.wavelength)
