"""Sampled complex fields and band-limited angular spectrum propagation.

DFT convention: numpy's forward FFT (negative exponent, unnormalized) and
inverse FFT carrying ``1/(rows*cols)``. Frequencies are kept in standard DFT
order; use :func:`centered` to view them with DC in the middle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleGridError, InvalidParameterError


def _check_physical(**values) -> None:
    for name, val in values.items():
        if not (np.isfinite(val) and val > 0):
            raise InvalidParameterError(f"{name} must be finite and positive, got {val!r}")


@dataclass(frozen=True)
class ComplexField:
    """Complex amplitudes on a uniform grid; pixel (0, 0) is top-left."""

    data: np.ndarray
    pitch: float
    wavelength: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 2:
            raise InvalidParameterError(f"field must be a 2D grid of at least 2x2, got shape {data.shape}")
        _check_physical(pitch=self.pitch, wavelength=self.wavelength)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def with_data(self, data) -> "ComplexField":
        return ComplexField(data, self.pitch, self.wavelength)


@dataclass(frozen=True)
class PropagationKernel:
    transfer: np.ndarray
    distance: float
    band_mask: np.ndarray
    pitch: float
    wavelength: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.transfer.shape

    def conj(self) -> "PropagationKernel":
        """Kernel of the reverse propagation (adjoint of the forward one)."""
        return PropagationKernel(np.conj(self.transfer), -self.distance, self.band_mask, self.pitch, self.wavelength)


def frequencies(rows: int, cols: int, pitch: float) -> tuple[np.ndarray, np.ndarray]:
    """Spatial frequency grids ``(fy, fx)`` in cycles per meter, DFT order."""
    fy = np.fft.fftfreq(rows, d=pitch)
    fx = np.fft.fftfreq(cols, d=pitch)
    return np.meshgrid(fy, fx, indexing="ij")


def centered(grid: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(grid)


def band_limits(rows: int, cols: int, pitch: float, wavelength: float, distance: float) -> tuple[float, float]:
    """Sampling-limited bandwidth ``(fy_limit, fx_limit)`` of the angular spectrum kernel."""
    fy_lim = 1.0 / (wavelength * np.sqrt((2.0 * distance / (rows * pitch)) ** 2 + 1.0))
    fx_lim = 1.0 / (wavelength * np.sqrt((2.0 * distance / (cols * pitch)) ** 2 + 1.0))
    return fy_lim, fx_lim


def build_kernel(rows: int, cols: int, pitch: float, wavelength: float, distance: float, pad: bool = False) -> PropagationKernel:
    """Band-limited angular spectrum transfer function.

    With ``pad=True`` the kernel is built for a grid twice the size in each
    direction; :func:`propagate` then zero-pads the field to match.
    """
    if rows < 2 or cols < 2:
        raise InvalidParameterError(f"grid must be at least 2x2, got {rows}x{cols}")
    _check_physical(pitch=pitch, wavelength=wavelength)
    if not np.isfinite(distance):
        raise InvalidParameterError(f"distance must be finite, got {distance!r}")
    if pad:
        rows, cols = 2 * rows, 2 * cols
    fy, fx = frequencies(rows, cols, pitch)
    arg = 1.0 / wavelength**2 - fx**2 - fy**2
    fy_lim, fx_lim = band_limits(rows, cols, pitch, wavelength, abs(distance))
    mask = (arg > 0) & (np.abs(fx) <= fx_lim) & (np.abs(fy) <= fy_lim)
    kz = np.sqrt(np.where(mask, arg, 0.0))
    transfer = np.where(mask, np.exp(1j * 2.0 * np.pi * distance * kz), 0.0)
    return PropagationKernel(transfer, float(distance), mask, float(pitch), float(wavelength))


def _check_compatible(field: ComplexField, kernel: PropagationKernel) -> bool:
    if field.pitch != kernel.pitch or field.wavelength != kernel.wavelength:
        raise IncompatibleGridError(
            f"field (pitch={field.pitch}, wavelength={field.wavelength}) and kernel "
            f"(pitch={kernel.pitch}, wavelength={kernel.wavelength}) disagree"
        )
    if field.shape == kernel.shape:
        return False
    if kernel.shape == (2 * field.rows, 2 * field.cols):
        return True
    raise IncompatibleGridError(f"field shape {field.shape} does not match kernel shape {kernel.shape}")


def propagate_array(data: np.ndarray, transfer: np.ndarray) -> np.ndarray:
    """Bare-array propagation, no checks. Used in inner optimization loops."""
    return np.fft.ifft2(np.fft.fft2(data) * transfer)


def propagate(field: ComplexField, kernel: PropagationKernel) -> ComplexField:
    """``ifft2(fft2(field) * transfer)``; a padded kernel pads and crops the field."""
    padded = _check_compatible(field, kernel)
    if not padded:
        return field.with_data(propagate_array(field.data, kernel.transfer))
    r, c = field.shape
    big = np.zeros(kernel.shape, dtype=np.complex128)
    r0, c0 = r // 2, c // 2
    big[r0 : r0 + r, c0 : c0 + c] = field.data
    out = propagate_array(big, kernel.transfer)
    return field.with_data(out[r0 : r0 + r, c0 : c0 + c])


def intensity(field: ComplexField) -> np.ndarray:
    return np.abs(field.data) ** 2


def field_energy(field: ComplexField) -> float:
    return float(np.sum(intensity(field)))


def band_limited_random_field(rows, cols, pitch, wavelength, distance, seed=0, fraction=0.5) -> ComplexField:
    """Random field whose spectrum sits inside the kernel band for ``distance``.

    ``fraction`` further shrinks the support so the field is comfortably
    inside the pass band; handy for unitarity checks.
    """
    rng = np.random.default_rng(seed)
    kernel = build_kernel(rows, cols, pitch, wavelength, distance)
    fy, fx = frequencies(rows, cols, pitch)
    fy_lim, fx_lim = band_limits(rows, cols, pitch, wavelength, abs(distance))
    inner = (np.abs(fx) <= fraction * fx_lim) & (np.abs(fy) <= fraction * fy_lim) & kernel.band_mask
    spectrum = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) * inner
    return ComplexField(np.fft.ifft2(spectrum), pitch, wavelength)
