"""Device geometry, material stack and cross-section rasterization.

Coordinates in a cross-section are in micrometres: ``x`` is lateral with
``x = 0`` on the rib centre (single rib) or on the mirror plane (coupled
pair), ``y`` is vertical with ``y = 0`` at the film/BOX interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import shapely
from shapely.geometry import Polygon, box
from shapely.ops import unary_union

__all__ = [
    "MaterialStack",
    "RibWaveguide",
    "CoupledPair",
    "Slab",
    "SBendProfile",
    "DeviceSpec",
    "GridSpec",
    "IndexMap",
    "GeometryError",
    "rib_polygon",
    "rib_bottom_width",
    "sbend_gap",
    "rasterize",
]


class GeometryError(ValueError):
    """Invalid geometry or rasterization window."""


@dataclass(frozen=True)
class MaterialStack:
    n_core: float = 2.34
    n_clad: float = 1.462
    film_thickness_nm: float = 300.0
    box_thickness_um: float = 2.0
    clad_thickness_um: float = 2.0
    wavelength_nm: float = 493.55

    def __post_init__(self):
        if not (self.n_core > self.n_clad > 1.0):
            raise GeometryError(
                f"guidance requires n_core > n_clad > 1, got {self.n_core}, {self.n_clad}"
            )
        if self.film_thickness_nm <= 0:
            raise GeometryError("film thickness must be positive")
        if self.wavelength_nm <= 0:
            raise GeometryError("wavelength must be positive")

    @property
    def wavelength_um(self) -> float:
        return self.wavelength_nm * 1e-3

    @property
    def film_thickness_um(self) -> float:
        return self.film_thickness_nm * 1e-3


@dataclass(frozen=True)
class RibWaveguide:
    """Partially etched rib with sloped sidewalls.

    ``width_nm`` is measured at the rib base (``width_reference="bottom"``,
    the default) or at the rib top (``"top"``). The same edge is used for
    the gap of a coupled pair.
    """

    width_nm: float = 475.0
    etch_depth_nm: float = 110.0
    sidewall_angle_deg: float = 75.0
    width_reference: str = "bottom"

    def __post_init__(self):
        if self.width_reference not in ("top", "bottom"):
            raise GeometryError("width_reference must be 'top' or 'bottom'")
        if self.width_nm <= 0:
            raise GeometryError("rib width must be positive")
        if self.etch_depth_nm <= 0:
            raise GeometryError("etch depth must be positive")
        if not (0.0 < self.sidewall_angle_deg <= 90.0):
            raise GeometryError("sidewall angle must lie in (0, 90] degrees")
        if self.top_width_nm <= 0:
            raise GeometryError(
                f"base width {self.width_nm} nm too narrow for {self.etch_depth_nm} nm etch "
                f"at {self.sidewall_angle_deg} deg"
            )

    def slab_thickness_nm(self, stack: MaterialStack) -> float:
        if self.etch_depth_nm > stack.film_thickness_nm:
            raise GeometryError(
                f"etch depth {self.etch_depth_nm} nm exceeds film thickness "
                f"{stack.film_thickness_nm} nm"
            )
        return stack.film_thickness_nm - self.etch_depth_nm

    @property
    def sidewall_run_nm(self) -> float:
        """Lateral run of one sidewall over the etch depth."""
        if self.sidewall_angle_deg == 90.0:
            return 0.0
        return self.etch_depth_nm / math.tan(math.radians(self.sidewall_angle_deg))

    @property
    def top_width_nm(self) -> float:
        if self.width_reference == "top":
            return self.width_nm
        return self.width_nm - 2.0 * self.sidewall_run_nm

    @property
    def bottom_width_nm(self) -> float:
        return self.top_width_nm + 2.0 * self.sidewall_run_nm


@dataclass(frozen=True)
class CoupledPair:
    """Two identical ribs mirrored about ``x = 0``; ``gap_nm`` is measured
    between facing rib edges at the rib's width reference."""

    rib: RibWaveguide = field(default_factory=RibWaveguide)
    gap_nm: float = 40.0

    def __post_init__(self):
        if self.gap_nm <= 0:
            raise GeometryError("gap must be positive")

    @property
    def top_gap_nm(self) -> float:
        if self.rib.width_reference == "top":
            return self.gap_nm
        return self.gap_nm + 2.0 * self.rib.sidewall_run_nm

    @property
    def center_offset_nm(self) -> float:
        """Distance from the mirror plane to each rib centre."""
        return self.top_gap_nm / 2.0 + self.rib.top_width_nm / 2.0


@dataclass(frozen=True)
class Slab:
    """Laterally uniform film(s) spanning the whole window.

    ``count`` identical films of ``thickness_nm`` are stacked vertically,
    separated by ``gap_nm`` of cladding. Used as the 1D limit for solver
    validation against closed-form slab dispersion.
    """

    thickness_nm: float = 300.0
    count: int = 1
    gap_nm: float = 0.0

    def __post_init__(self):
        if self.thickness_nm <= 0:
            raise GeometryError("slab thickness must be positive")
        if self.count not in (1, 2):
            raise GeometryError("only one or two slabs are supported")
        if self.count == 2 and self.gap_nm <= 0:
            raise GeometryError("coupled slabs need a positive gap")

    @property
    def total_thickness_nm(self) -> float:
        return self.count * self.thickness_nm + (self.count - 1) * self.gap_nm


@dataclass(frozen=True)
class SBendProfile:
    start_separation_um: float = 2.0
    end_gap_nm: float = 40.0
    bend_length_um: float = 30.0
    samples: int = 401

    def __post_init__(self):
        if self.bend_length_um <= 0:
            raise GeometryError("bend length must be positive")
        if self.start_separation_um * 1e3 < self.end_gap_nm:
            raise GeometryError("S-bend must taper from a larger separation to the gap")
        if self.samples < 3:
            raise GeometryError("S-bend needs at least 3 samples")


@dataclass(frozen=True)
class DeviceSpec:
    stack: MaterialStack = field(default_factory=MaterialStack)
    pair: CoupledPair = field(default_factory=CoupledPair)
    sbend: SBendProfile = field(default_factory=SBendProfile)
    coupling_length_um: float = 13.95
    bend_transmission_te: float = 0.993
    bend_transmission_tm: float = 0.994

    def __post_init__(self):
        if self.coupling_length_um < 0:
            raise GeometryError("coupling length must be non-negative")
        for t in (self.bend_transmission_te, self.bend_transmission_tm):
            if not (0.0 < t <= 1.0):
                raise GeometryError("bend transmissions must lie in (0, 1]")
        if not math.isclose(self.sbend.end_gap_nm, self.pair.gap_nm):
            raise GeometryError(
                f"S-bend end gap {self.sbend.end_gap_nm} nm differs from coupler gap "
                f"{self.pair.gap_nm} nm"
            )

    def with_gap(self, gap_nm: float) -> "DeviceSpec":
        return replace(
            self,
            pair=replace(self.pair, gap_nm=gap_nm),
            sbend=replace(self.sbend, end_gap_nm=gap_nm),
        )

    def with_coupling_length(self, coupling_length_um: float) -> "DeviceSpec":
        return replace(self, coupling_length_um=coupling_length_um)


@dataclass(frozen=True)
class GridSpec:
    """Uniform solver grid. Window is centred laterally on ``x = 0`` and
    vertically on the film."""

    dx_nm: float = 10.0
    dy_nm: float = 10.0
    width_um: float = 6.0
    height_um: float = 3.6
    margin_um: float = 1.5

    @property
    def nx(self) -> int:
        return int(round(self.width_um * 1e3 / self.dx_nm))

    @property
    def ny(self) -> int:
        return int(round(self.height_um * 1e3 / self.dy_nm))


@dataclass(frozen=True, eq=False)
class IndexMap:
    """Rasterized cross-section.

    ``eps`` and ``fill`` are given on the primary cells (centres ``x``, ``y``).
    ``eps_x``, ``eps_y``, ``eps_z`` are the interface-averaged permittivities
    sampled at the staggered positions of the matching E-field components,
    which is what the mode solver consumes.
    """

    x: np.ndarray
    y: np.ndarray
    dx: float
    dy: float
    eps: np.ndarray
    fill: np.ndarray
    eps_x: np.ndarray
    eps_y: np.ndarray
    eps_z: np.ndarray
    n_core: float
    n_clad: float
    core_bounds: tuple = (0.0, 0.0, 0.0, 0.0)
    mirror_symmetric: bool = False

    @property
    def shape(self):
        return self.eps.shape

    @property
    def x_edges(self) -> np.ndarray:
        return np.concatenate([self.x - self.dx / 2, [self.x[-1] + self.dx / 2]])

    @property
    def y_edges(self) -> np.ndarray:
        return np.concatenate([self.y - self.dy / 2, [self.y[-1] + self.dy / 2]])

    def core_area(self) -> float:
        """Core area in um^2 implied by the fill fractions."""
        return float(self.fill.sum() * self.dx * self.dy)

    def core_centroid(self) -> tuple[float, float]:
        w = self.fill
        total = w.sum()
        if total == 0:
            return 0.0, 0.0
        xx, yy = np.meshgrid(self.x, self.y, indexing="ij")
        return float((w * xx).sum() / total), float((w * yy).sum() / total)


def rib_bottom_width(rib: RibWaveguide) -> float:
    return rib.bottom_width_nm


def rib_polygon(rib: RibWaveguide, stack: MaterialStack, x_center_nm: float = 0.0):
    """Closed trapezoid of the rib above the slab, vertices in nm.

    Counter-clockwise starting at the bottom-left corner. The slab under the
    rib is not part of the polygon.
    """
    slab = rib.slab_thickness_nm(stack)
    top = stack.film_thickness_nm
    half_top = rib.top_width_nm / 2.0
    half_bot = half_top + rib.sidewall_run_nm
    c = x_center_nm
    return [
        (c - half_bot, slab),
        (c + half_bot, slab),
        (c + half_top, top),
        (c - half_top, top),
        (c - half_bot, slab),
    ]


def sbend_gap(z_um: float, profile: SBendProfile) -> float:
    """Edge-to-edge gap (nm) at position ``z_um`` along a raised-cosine S-bend."""
    L = profile.bend_length_um
    z = np.asarray(z_um, dtype=float)
    if np.any(z < 0) or np.any(z > L):
        raise GeometryError(f"z must lie within [0, {L}] um")
    y = profile.start_separation_um * 1e3
    g = profile.end_gap_nm
    out = g + (y - g) * 0.5 * (1.0 + np.cos(np.pi * z / L))
    return float(out) if out.ndim == 0 else out


def _core_shape(geometry, stack: MaterialStack, x_limit_um: float):
    """Union of slab and rib(s) as a shapely polygon in um."""
    if isinstance(geometry, Slab):
        t = geometry.thickness_nm * 1e-3
        pitch = t + geometry.gap_nm * 1e-3
        films = [box(-x_limit_um, k * pitch, x_limit_um, k * pitch + t) for k in range(geometry.count)]
        return unary_union(films), None, None
    if isinstance(geometry, CoupledPair):
        rib = geometry.rib
        offset = geometry.center_offset_nm
        centers = [-offset, offset]
    elif isinstance(geometry, RibWaveguide):
        rib = geometry
        centers = [0.0]
    else:
        raise TypeError(f"cannot rasterize {type(geometry).__name__}")
    pieces = []
    for c in centers:
        pts = [(x * 1e-3, y * 1e-3) for x, y in rib_polygon(rib, stack, c)]
        pieces.append(Polygon(pts))
    slab = rib.slab_thickness_nm(stack) * 1e-3
    if slab > 0:
        pieces.append(box(-x_limit_um, 0.0, x_limit_um, slab))
    return unary_union(pieces), rib, centers


def _edges(shape) -> np.ndarray:
    """Boundary segments of a (multi)polygon as an (n, 4) array."""
    segs = []
    geoms = getattr(shape, "geoms", [shape])
    for poly in geoms:
        rings = [poly.exterior, *poly.interiors]
        for ring in rings:
            c = np.asarray(ring.coords)
            segs.append(np.hstack([c[:-1], c[1:]]))
    return np.vstack(segs)


def _clip_length(seg, x0, x1, y0, y1):
    """Length of segment ``seg`` inside each box (Liang-Barsky), vectorized."""
    ax, ay, bx, by = seg
    ddx, ddy = bx - ax, by - ay
    t0 = np.zeros_like(x0)
    t1 = np.ones_like(x0)
    for p, q_lo, q_hi in ((ddx, x0 - ax, x1 - ax), (ddy, y0 - ay, y1 - ay)):
        if p == 0:
            outside = (q_lo > 0) | (q_hi < 0)
            t1 = np.where(outside, -1.0, t1)
        else:
            ta, tb = q_lo / p, q_hi / p
            lo, hi = np.minimum(ta, tb), np.maximum(ta, tb)
            t0 = np.maximum(t0, lo)
            t1 = np.minimum(t1, hi)
    return np.clip(t1 - t0, 0.0, None) * math.hypot(ddx, ddy)


def _sample(shape, edges, xc, yc, dx, dy):
    """Fill fraction and squared x-normal weight for cells centred on (xc, yc)."""
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    fill = np.zeros(X.shape)
    nx2 = np.zeros(X.shape)
    minx, miny, maxx, maxy = shape.bounds
    near = (X + dx / 2 > minx) & (X - dx / 2 < maxx) & (Y + dy / 2 > miny) & (Y - dy / 2 < maxy)
    idx = np.nonzero(near)
    if idx[0].size == 0:
        return fill, nx2
    bx0 = X[idx] - dx / 2
    bx1 = X[idx] + dx / 2
    by0 = Y[idx] - dy / 2
    by1 = Y[idx] + dy / 2
    boxes = shapely.box(bx0, by0, bx1, by1)
    shapely.prepare(shape)
    frac = shapely.area(shapely.intersection(boxes, shape)) / (dx * dy)
    frac = np.where(frac < 1e-9, 0.0, np.where(frac > 1 - 1e-9, 1.0, frac))
    fill[idx] = frac

    partial = (frac > 0) & (frac < 1)
    if np.any(partial):
        px0, px1, py0, py1 = bx0[partial], bx1[partial], by0[partial], by1[partial]
        wsum = np.zeros(px0.shape)
        nsum = np.zeros(px0.shape)
        for seg in edges:
            length = _clip_length(seg, px0, px1, py0, py1)
            sx, sy = seg[2] - seg[0], seg[3] - seg[1]
            # unit normal of the segment is (sy, -sx)/|s|
            nxs = sy * sy / (sx * sx + sy * sy)
            wsum += length
            nsum += length * nxs
        weight = np.where(wsum > 0, nsum / np.where(wsum > 0, wsum, 1.0), 0.5)
        sub = nx2[idx]
        sub[partial] = weight
        nx2[idx] = sub
    return fill, nx2


def _average(fill, normal_weight, eps_core, eps_clad):
    """Arithmetic average along the interface, harmonic across it."""
    arith = fill * eps_core + (1 - fill) * eps_clad
    harm = 1.0 / (fill / eps_core + (1 - fill) / eps_clad)
    return (1 - normal_weight) * arith + normal_weight * harm


def rasterize(geometry, stack: MaterialStack, grid: GridSpec | None = None) -> IndexMap:
    """Rasterize a rib or coupled pair onto a uniform grid.

    The window is ``grid.width_um`` wide centred on ``x = 0`` and
    ``grid.height_um`` tall centred on the film. Cells straddling an
    interface get arithmetic permittivity averaging for field components
    tangential to the interface and harmonic averaging for the normal one.
    """
    grid = grid or GridSpec()
    nx, ny = grid.nx, grid.ny
    if nx < 4 or ny < 4:
        raise GeometryError("grid has too few cells")
    dx, dy = grid.dx_nm * 1e-3, grid.dy_nm * 1e-3
    width, height = nx * dx, ny * dy
    if isinstance(geometry, Slab):
        core_height = geometry.total_thickness_nm * 1e-3
    else:
        core_height = stack.film_thickness_um
    y_bottom = core_height / 2.0 - height / 2.0

    # node coordinates built from integer offsets so x -> -x is exact
    x_nodes = (np.arange(nx + 1) - nx / 2.0) * dx
    y_nodes = y_bottom + np.arange(ny + 1) * dy
    x_half = (np.arange(nx) + 0.5 - nx / 2.0) * dx
    y_half = y_bottom + (np.arange(ny) + 0.5) * dy

    shape, rib, centers = _core_shape(geometry, stack, width)
    lateral = rib is not None
    if lateral:
        half_bot_um = rib.bottom_width_nm / 2.0 * 1e-3
        core_x0 = min(centers) * 1e-3 - half_bot_um
        core_x1 = max(centers) * 1e-3 + half_bot_um
    else:
        core_x0, core_x1 = -width / 2, width / 2
    core_y0, core_y1 = 0.0, core_height
    m = grid.margin_um
    if (
        lateral
        and (core_x0 - m < -width / 2 - 1e-12 or core_x1 + m > width / 2 + 1e-12)
    ) or (
        core_y0 - m < y_bottom - 1e-12
        or core_y1 + m > y_bottom + height + 1e-12
    ):
        raise GeometryError(
            f"window {width:.3f} x {height:.3f} um does not leave a {m} um cladding "
            f"margin around the core spanning x=[{core_x0:.3f}, {core_x1:.3f}] um, "
            f"y=[{core_y0:.3f}, {core_y1:.3f}] um"
        )

    ec, el = stack.n_core**2, stack.n_clad**2
    edges = _edges(shape)

    fill, _ = _sample(shape, edges, x_half, y_half, dx, dy)
    eps = fill * ec + (1 - fill) * el
    # Ex at (x_half, y_nodes), Ey at (x_nodes, y_half), Ez at (x_nodes, y_nodes)
    fx, wx = _sample(shape, edges, x_half, y_nodes, dx, dy)
    eps_x = _average(fx, wx, ec, el)
    fy, wy = _sample(shape, edges, x_nodes, y_half, dx, dy)
    eps_y = _average(fy, 1.0 - wy, ec, el)
    fz, _ = _sample(shape, edges, x_nodes, y_nodes, dx, dy)
    eps_z = fz * ec + (1 - fz) * el

    symmetric = not isinstance(geometry, RibWaveguide) and nx % 2 == 0
    if symmetric:
        fill, eps, eps_x, eps_y, eps_z = (
            0.5 * (a + a[::-1]) for a in (fill, eps, eps_x, eps_y, eps_z)
        )

    clip = lambda a: np.clip(a, el, ec)  # noqa: E731
    return IndexMap(
        x=x_half,
        y=y_half,
        dx=dx,
        dy=dy,
        eps=clip(eps),
        fill=fill,
        eps_x=clip(eps_x),
        eps_y=clip(eps_y),
        eps_z=clip(eps_z),
        n_core=stack.n_core,
        n_clad=stack.n_clad,
        core_bounds=(core_x0, core_x1, core_y0, core_y1),
        mirror_symmetric=symmetric,
    )


def cladding_map(stack: MaterialStack, grid: GridSpec | None = None) -> IndexMap:
    """Index map with no core at all, useful as a null case."""
    grid = grid or GridSpec()
    nx, ny = grid.nx, grid.ny
    dx, dy = grid.dx_nm * 1e-3, grid.dy_nm * 1e-3
    height = ny * dy
    y_bottom = stack.film_thickness_um / 2.0 - height / 2.0
    el = stack.n_clad**2
    return IndexMap(
        x=(np.arange(nx) + 0.5 - nx / 2.0) * dx,
        y=y_bottom + (np.arange(ny) + 0.5) * dy,
        dx=dx,
        dy=dy,
        eps=np.full((nx, ny), el),
        fill=np.zeros((nx, ny)),
        eps_x=np.full((nx, ny + 1), el),
        eps_y=np.full((nx + 1, ny), el),
        eps_z=np.full((nx + 1, ny + 1), el),
        n_core=stack.n_core,
        n_clad=stack.n_clad,
        mirror_symmetric=nx % 2 == 0,
    )
