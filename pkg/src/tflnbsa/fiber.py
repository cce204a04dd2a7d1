"""Lensed-fiber to waveguide butt coupling by mode overlap."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import DeviceSpec, GridSpec, rasterize
from .modesolver import ModeSolution, SolverSettings, solve_modes

__all__ = [
    "GaussianBeam",
    "OverlapResult",
    "FieldGrid",
    "OverlapError",
    "gaussian_field",
    "overlap",
    "fundamental_modes",
    "coupling_efficiency",
    "na_sweep",
]

log = logging.getLogger(__name__)


class OverlapError(ValueError):
    """Fields on mismatched grids, or a window too small for the beam."""


@dataclass(frozen=True)
class GaussianBeam:
    """Focused lensed-fiber spot; waist radius (1/e field) is ``lambda0 / (pi NA)``."""

    na: float
    wavelength_um: float

    def __post_init__(self):
        if self.na <= 0:
            raise ValueError("NA must be positive")
        if self.na > 0.6:
            log.warning("NA %.3f exceeds the commercially available 0.6", self.na)

    @property
    def waist_um(self) -> float:
        return self.wavelength_um / (math.pi * self.na)


@dataclass(frozen=True)
class OverlapResult:
    eta_te: float
    eta_tm: float


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Cell-centre coordinates (um) of a uniform grid."""

    x: np.ndarray
    y: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0])

    @classmethod
    def centered(cls, width_um, height_um, dx_um, dy_um, x0=0.0, y0=0.0):
        nx = int(round(width_um / dx_um))
        ny = int(round(height_um / dy_um))
        x = x0 + (np.arange(nx) + 0.5 - nx / 2.0) * dx_um
        y = y0 + (np.arange(ny) + 0.5 - ny / 2.0) * dy_um
        return cls(x, y)


def gaussian_field(beam: GaussianBeam, grid: FieldGrid, polarization: str = "TE", center=(0.0, 0.0)):
    """Unit-normalized circular Gaussian on ``grid`` as an ``(E_x, E_y)`` pair.

    The scalar profile ``exp(-r^2 / w0^2)`` goes into E_x for TE and into E_y
    for TM; the other component is zero.
    """
    w0 = beam.waist_um
    width = grid.x[-1] - grid.x[0] + grid.dx
    height = grid.y[-1] - grid.y[0] + grid.dy
    if min(width, height) < 6 * w0 - 1e-9:
        raise OverlapError(f"window {width:.2f} x {height:.2f} um narrower than 6 w0 = {6 * w0:.2f} um")
    X, Y = np.meshgrid(grid.x - center[0], grid.y - center[1], indexing="ij")
    g = np.exp(-(X**2 + Y**2) / w0**2)
    g /= math.sqrt(np.sum(g**2) * grid.dx * grid.dy)
    zero = np.zeros_like(g)
    if polarization == "TE":
        return g, zero
    if polarization == "TM":
        return zero, g
    raise ValueError("polarization must be 'TE' or 'TM'")


def overlap(field_a, field_b, dA: float = 1.0) -> float:
    """Power coupling ``|<a|b>|^2 / (<a|a><b|b>)`` between two fields.

    Fields are arrays on the same grid; a pair ``(E_x, E_y)`` is treated as a
    vector field.
    """
    a = np.asarray(field_a)
    b = np.asarray(field_b)
    if a.shape != b.shape:
        raise OverlapError(f"grid mismatch: {a.shape} vs {b.shape}")
    num = abs(np.sum(np.conj(a) * b) * dA) ** 2
    den = np.sum(np.abs(a) ** 2) * dA * np.sum(np.abs(b) ** 2) * dA
    if den == 0:
        raise OverlapError("zero field")
    return float(min(num / den, 1.0))


def fundamental_modes(device: DeviceSpec, grid: GridSpec | None = None, settings: SolverSettings | None = None):
    """Fundamental TE and TM modes of a single rib of the device."""
    grid = grid or GridSpec(width_um=4.0)
    imap = rasterize(device.pair.rib, device.stack, grid)
    modes = solve_modes(imap, device.stack.wavelength_um, count=4, settings=settings)
    te = next((m for m in modes if m.polarization == "TE"), None)
    tm = next((m for m in modes if m.polarization == "TM"), None)
    if te is None or tm is None:
        raise OverlapError("single rib lacks a guided TE or TM mode")
    return te, tm, imap


def _embed(mode: ModeSolution, grid: FieldGrid) -> np.ndarray:
    """Dominant component of ``mode`` zero-padded onto a larger grid."""
    f = mode.dominant
    out = np.zeros((grid.x.size, grid.y.size))
    i0 = int(np.argmin(np.abs(grid.x - mode.x[0])))
    j0 = int(np.argmin(np.abs(grid.y - mode.y[0])))
    if (
        i0 + f.shape[0] > out.shape[0]
        or j0 + f.shape[1] > out.shape[1]
        or not np.allclose(grid.x[i0 : i0 + f.shape[0]], mode.x, atol=1e-9)
        or not np.allclose(grid.y[j0 : j0 + f.shape[1]], mode.y, atol=1e-9)
    ):
        raise OverlapError("mode grid does not align with the overlap grid")
    out[i0 : i0 + f.shape[0], j0 : j0 + f.shape[1]] = f
    return out


def coupling_efficiency(mode: ModeSolution, beam: GaussianBeam, center=None) -> float:
    """Overlap between a waveguide mode's dominant component and the beam.

    The beam is centred on the mode's power centroid unless ``center`` is
    given. The overlap window grows to at least 6.5 beam waists, with the
    mode zero-padded outside its solver window.
    """
    dx = float(mode.x[1] - mode.x[0])
    dy = float(mode.y[1] - mode.y[0])
    intensity = mode.E_x**2 + mode.E_y**2
    if center is None:
        X, Y = np.meshgrid(mode.x, mode.y, indexing="ij")
        center = (float(np.sum(X * intensity) / intensity.sum()), float(np.sum(Y * intensity) / intensity.sum()))
    span = 6.5 * beam.waist_um
    # pad symmetrically in whole cells so the mode grid stays aligned
    px = max(0, int(math.ceil((span - mode.x.size * dx) / (2 * dx))))
    py = max(0, int(math.ceil((span - mode.y.size * dy) / (2 * dy))))
    x = np.concatenate([mode.x[0] - dx * np.arange(px, 0, -1), mode.x, mode.x[-1] + dx * np.arange(1, px + 1)])
    y = np.concatenate([mode.y[0] - dy * np.arange(py, 0, -1), mode.y, mode.y[-1] + dy * np.arange(1, py + 1)])
    grid = FieldGrid(x, y)
    ex, ey = gaussian_field(beam, grid, mode.polarization, center)
    g = ex if mode.polarization == "TE" else ey
    return overlap(_embed(mode, grid), g, dx * dy)


def na_sweep(device: DeviceSpec, na_range=(0.1, 0.6), samples: int = 11, grid: GridSpec | None = None, settings=None):
    """Coupling efficiency of both polarizations versus fiber NA.

    Returns a dict with arrays ``NA``, ``eta_TE``, ``eta_TM``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    te, tm, _ = fundamental_modes(device, grid, settings)
    nas = np.linspace(na_range[0], na_range[1], samples) if samples > 1 else np.array([na_range[1]])
    lam = device.stack.wavelength_um
    eta_te = np.array([coupling_efficiency(te, GaussianBeam(na, lam)) for na in nas])
    eta_tm = np.array([coupling_efficiency(tm, GaussianBeam(na, lam)) for na in nas])
    return {"NA": nas, "eta_TE": eta_te, "eta_TM": eta_tm}
