"""Design-space sweeps and 1D minimizations."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from skimage import measure

from .bellstate import fidelity_closed_form
from .coupler import DeltaNTable, delta, device_transfer
from .geometry import CoupledPair, DeviceSpec, GridSpec, MaterialStack, RibWaveguide
from .modesolver import SolverError, SolverSettings, coupling_strength

__all__ = [
    "Axis",
    "SweepSpec",
    "OptimizationReport",
    "XiMap",
    "NonFiniteObjective",
    "golden_section",
    "scan_then_refine",
    "xi_map",
    "xi_vs_gap",
    "xi_unity_contour",
    "minimize_delta_over_gap",
    "minimize_error_over_Lc",
    "error_vs_Lc",
]

log = logging.getLogger(__name__)

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
AXIS_NAMES = ("w", "h_e", "g", "L_c", "NA")


class NonFiniteObjective(ArithmeticError):
    def __init__(self, x: float, value: float):
        super().__init__(f"objective returned {value} at x = {x!r}")
        self.x = x
        self.value = value


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    samples: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown axis {self.name!r}; expected one of {AXIS_NAMES}")
        if self.samples < 2:
            raise ValueError(f"axis {self.name} needs at least 2 samples")
        if not self.max > self.min:
            raise ValueError(f"axis {self.name}: max must exceed min")

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.samples)


@dataclass(frozen=True)
class SweepSpec:
    """One or two parameter axes plus fixed DeviceSpec overrides."""

    axes: tuple
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep has one or two axes")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("duplicate sweep axis")


@dataclass(frozen=True)
class OptimizationReport:
    argmin: float
    min_value: float
    samples_evaluated: int
    bracket: tuple
    at_boundary: bool = False
    history: tuple = ()

    @property
    def bracket_width(self) -> float:
        return self.bracket[1] - self.bracket[0]


def _checked(f: Callable[[float], float]):
    def g(x):
        v = float(f(x))
        if not math.isfinite(v):
            raise NonFiniteObjective(x, v)
        return v

    return g


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = 1e-6, maxiter: int = 500):
    """Golden-section search for a minimum of a unimodal ``f`` on ``[a, b]``.

    Stops once the bracket is narrower than ``tol``. ``history`` records
    every bracket, so its widths shrink by the golden ratio per step.
    """
    if not a < b:
        raise ValueError("need a < b")
    if tol <= 0:
        raise ValueError("tol must be positive")
    f = _checked(f)
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    n = 2
    history = [(a, b)]
    for _ in range(maxiter):
        if b - a < tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
        n += 1
        history.append((a, b))
    x, v = (c, fc) if fc <= fd else (d, fd)
    return OptimizationReport(x, v, n, (a, b), False, tuple(history))


def scan_then_refine(f, a: float, b: float, tol: float, samples: int = 11) -> OptimizationReport:
    """Coarse uniform scan, then golden section around the best scan point.

    A minimum on the first or last scan point is reported as is with
    ``at_boundary`` set.
    """
    f = _checked(f)
    xs = np.linspace(a, b, samples)
    ys = np.array([f(x) for x in xs])
    i = int(np.argmin(ys))
    if i in (0, samples - 1):
        h = xs[1] - xs[0]
        lo, hi = (xs[0], xs[0] + h) if i == 0 else (xs[-1] - h, xs[-1])
        return OptimizationReport(float(xs[i]), float(ys[i]), samples, (float(lo), float(hi)), True)
    rep = golden_section(f, float(xs[i - 1]), float(xs[i + 1]), tol)
    if rep.min_value > ys[i]:
        # refinement never loses to the scan point it started from
        rep = replace(rep, argmin=float(xs[i]), min_value=float(ys[i]))
    return replace(rep, samples_evaluated=rep.samples_evaluated + samples)


# -- coupling-strength maps -------------------------------------------------


@dataclass(frozen=True, eq=False)
class XiMap:
    """xi over a (width, etch depth) grid; failed cells are NaN."""

    w_nm: np.ndarray
    he_nm: np.ndarray
    xi: np.ndarray  # shape (len(w_nm), len(he_nm))
    gap_nm: float


def xi_map(
    w_values_nm: Sequence[float],
    he_values_nm: Sequence[float],
    gap_nm: float = 65.0,
    stack: MaterialStack | None = None,
    grid: GridSpec | None = None,
    settings: SolverSettings | None = None,
    rib_template: RibWaveguide | None = None,
) -> XiMap:
    stack = stack or MaterialStack()
    template = rib_template or RibWaveguide()
    w = np.asarray(w_values_nm, dtype=float)
    he = np.asarray(he_values_nm, dtype=float)
    xi = np.full((w.size, he.size), np.nan)
    for i, wi in enumerate(w):
        for j, hj in enumerate(he):
            try:
                rib = replace(template, width_nm=float(wi), etch_depth_nm=float(hj))
                xi[i, j] = coupling_strength(CoupledPair(rib, gap_nm), stack, grid, settings).xi
            except (SolverError, ValueError) as exc:
                log.warning("xi map cell w=%g h_e=%g failed: %s", wi, hj, exc)
    return XiMap(w, he, xi, float(gap_nm))


def xi_vs_gap(gaps_nm, rib=None, stack=None, grid=None, settings=None):
    """Rows of (gap, dn_TE, dn_TM, xi) as a dict of arrays."""
    rib = rib or RibWaveguide()
    stack = stack or MaterialStack()
    cs = [coupling_strength(CoupledPair(rib, float(g)), stack, grid, settings) for g in gaps_nm]
    return {
        "gap_nm": np.array([c.gap_nm for c in cs]),
        "dn_TE": np.array([c.delta_n_te for c in cs]),
        "dn_TM": np.array([c.delta_n_tm for c in cs]),
        "xi": np.array([c.xi for c in cs]),
    }


def xi_unity_contour(m: XiMap, level: float = 1.0) -> list:
    """Contour polylines of ``xi == level`` in (w, h_e) coordinates.

    Each polyline is an ``(N, 2)`` array; no crossing gives an empty list.
    """
    z = np.asarray(m.xi, dtype=float)
    if z.ndim != 2 or min(z.shape) < 2 or not np.any(np.isfinite(z)):
        return []
    finite = z[np.isfinite(z)]
    if finite.min() > level or finite.max() < level:
        return []
    lines = measure.find_contours(z, level, mask=np.isfinite(z))
    out = []
    for ln in lines:
        wi = np.interp(ln[:, 0], np.arange(m.w_nm.size), m.w_nm)
        hj = np.interp(ln[:, 1], np.arange(m.he_nm.size), m.he_nm)
        out.append(np.column_stack([wi, hj]))
    out.sort(key=len, reverse=True)
    return out


# -- device-level optimizations --------------------------------------------


def minimize_delta_over_gap(
    device: DeviceSpec,
    table: DeltaNTable,
    gap_range_nm=(30.0, 80.0),
    tol_nm: float = 0.5,
    lc_range_um=(1.0, 25.0),
) -> OptimizationReport:
    """Gap that minimizes the RMS TE/TM port-3 mismatch over coupling length."""
    obj = lambda g: delta(device.with_gap(float(g)), table, lc_range_um)  # noqa: E731
    return scan_then_refine(obj, gap_range_nm[0], gap_range_nm[1], tol_nm)


def _error_at(device: DeviceSpec, table: DeltaNTable, lc_um: float) -> float:
    return fidelity_closed_form(device_transfer(device.with_coupling_length(float(lc_um)), table)).error


def error_vs_Lc(device: DeviceSpec, table: DeltaNTable, lc_um) -> np.ndarray:
    return np.array([_error_at(device, table, L) for L in np.asarray(lc_um, dtype=float)])


def minimize_error_over_Lc(
    device: DeviceSpec,
    table: DeltaNTable,
    lc_range_um=(12.5, 15.0),
    tol_um: float = 1e-4,
    objective: Callable[[float], float] | None = None,
) -> OptimizationReport:
    """Coupling length with the smallest entanglement error.

    ``objective`` replaces the device model, which is handy for checking the
    optimizer against known curves.
    """
    obj = objective or (lambda L: _error_at(device, table, L))
    return scan_then_refine(obj, lc_range_um[0], lc_range_um[1], tol_um)
