"""Full-vectorial finite-difference eigenmode solver.

The transverse electric field (E_x, E_y) is discretized on a Yee lattice.
Eliminating E_z and H_z from Maxwell's curl equations gives
``n_eff^2 E_t = P_H P_E E_t`` where ``P_E`` maps E_t to H_t and ``P_H`` maps
H_t back to E_t, both in units where lengths are scaled by ``k0``. The
operator carries the grad-div cross terms that couple E_x and E_y, so TE/TM
hybridization at sloped sidewalls and at the slab corners is retained.
Eigenpairs are found by ARPACK in shift-invert mode around ``n_guess^2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import IndexMap

__all__ = [
    "ModeSolution",
    "SolverSettings",
    "SolverError",
    "CutoffError",
    "solve_modes",
    "classify_mode",
    "mirror_correlation",
    "analytic_slab_neff",
    "analytic_slab_pair_neff",
    "richardson",
    "CouplingStrength",
    "CouplingError",
    "coupling_strength",
    "supermode_pairs",
]

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Eigen-solve failed to converge; ``residual`` holds the last residual."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class CutoffError(ValueError):
    """Requested slab mode is below cutoff."""


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-9
    maxiter: int = 5000
    residual_tol: float = 1e-6
    extra_modes: int = 4
    boundary_x: str = "pec"
    boundary_y: str = "pec"


@dataclass(frozen=True, eq=False)
class ModeSolution:
    """One guided mode. Fields are sampled at the primary cell centres of the
    map and normalized so that sum(|Ex|^2 + |Ey|^2) dx dy = 1."""

    n_eff: float
    E_x: np.ndarray
    E_y: np.ndarray
    polarization_fraction: float
    te_fraction: float
    symmetry: str
    residual: float
    x: np.ndarray
    y: np.ndarray

    @property
    def polarization(self) -> str:
        return "TE" if self.te_fraction > 0.5 else "TM"

    @property
    def dominant(self) -> np.ndarray:
        return self.E_x if self.polarization == "TE" else self.E_y


def _diff(n: int, boundary: str):
    """Forward difference from integer nodes to the n half nodes of an axis.

    With ``pec`` the two wall nodes are held at zero and only the n - 1
    interior integer nodes are unknowns; with ``pmc`` all n + 1 integer nodes
    are unknowns.
    """
    if boundary == "pec":
        d = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 0], shape=(n, n - 1))
        return d.tocsr(), slice(1, n)
    if boundary == "pmc":
        m = n + 1
        d = sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, m))
        return d.tocsr(), slice(0, n + 1)
    raise ValueError(f"unknown boundary {boundary!r}")


def _operator(imap: IndexMap, k0: float, bx: str, by: str):
    nx, ny = imap.shape
    Dfx, ix = _diff(nx, bx)
    Dfy, iy = _diff(ny, by)
    Dfx = Dfx / (k0 * imap.dx)
    Dfy = Dfy / (k0 * imap.dy)
    Dbx, Dby = -Dfx.T, -Dfy.T
    nix, niy = Dfx.shape[1], Dfy.shape[1]
    Ihx, Ihy = sp.identity(nx, format="csr"), sp.identity(ny, format="csr")
    Iix, Iiy = sp.identity(nix, format="csr"), sp.identity(niy, format="csr")

    # Ex: (half x, int y)  Ey: (int x, half y)  Ez: (int x, int y)
    # Hx: (int x, half y)  Hy: (half x, int y)  Hz: (half x, half y)
    ex = imap.eps_x[:, iy].ravel()
    ey = imap.eps_y[ix, :].ravel()
    ez = imap.eps_z[ix, iy].ravel()

    Dxf_Ey = sp.kron(Dfx, Ihy)  # int x -> half x, at half y
    Dyf_Ex = sp.kron(Ihx, Dfy)  # int y -> half y, at half x
    Dxb_Hz = sp.kron(Dbx, Ihy)  # half x -> int x, at half y
    Dyb_Hz = sp.kron(Ihx, Dby)  # half y -> int y, at half x
    Dxb_Hy = sp.kron(Dbx, Iiy)  # half x -> int x, at int y
    Dyb_Hx = sp.kron(Iix, Dby)  # half y -> int y, at int x
    Dxf_Ez = sp.kron(Dfx, Iiy)  # int x -> half x, at int y
    Dyf_Ez = sp.kron(Iix, Dfy)  # int y -> half y, at int x

    PE = sp.bmat(
        [
            [-Dxb_Hz @ Dyf_Ex, sp.diags(ey) + Dxb_Hz @ Dxf_Ey],
            [-sp.diags(ex) - Dyb_Hz @ Dyf_Ex, Dyb_Hz @ Dxf_Ey],
        ]
    )
    iez = sp.diags(1.0 / ez)
    nex, ney = ex.size, ey.size
    PH = sp.bmat(
        [
            [Dxf_Ez @ iez @ Dyb_Hx, -Dxf_Ez @ iez @ Dxb_Hy - sp.identity(nex)],
            [Dyf_Ez @ iez @ Dyb_Hx + sp.identity(ney), -Dyf_Ez @ iez @ Dxb_Hy],
        ]
    )
    A = (PH @ PE).tocsc()
    return A, (nx, niy), (nix, ny), ix, iy


def _to_cells(Ex, Ey, ix, iy, shape):
    """Average staggered Ex, Ey onto the primary cell centres."""
    nx, ny = shape
    full_x = np.zeros((nx, ny + 1), dtype=Ex.dtype)
    full_x[:, iy] = Ex
    full_y = np.zeros((nx + 1, ny), dtype=Ey.dtype)
    full_y[ix, :] = Ey
    return 0.5 * (full_x[:, 1:] + full_x[:, :-1]), 0.5 * (full_y[1:, :] + full_y[:-1, :])


def mirror_correlation(Ex: np.ndarray, Ey: np.ndarray, polarization: str) -> float:
    """Correlation of a mode with its mirror image about ``x = 0``.

    +1 when the dominant component has an even lateral profile, -1 when odd.
    The minor component of a mirror-symmetric mode has the opposite parity.
    """
    num = np.sum(Ex * Ex[::-1]) - np.sum(Ey * Ey[::-1])
    den = np.sum(Ex * Ex) + np.sum(Ey * Ey)
    c = float(num / den) if den > 0 else 0.0
    return c if polarization == "TE" else -c


def classify_mode(mode: ModeSolution, imap: IndexMap | None = None, symmetry: bool = True):
    """Return ``(polarization, symmetry)`` for a solved mode.

    Symmetry is only meaningful on a mirror-symmetric map; pass
    ``symmetry=False`` (or a map without mirror symmetry) to skip it.
    """
    pol = mode.polarization
    if not symmetry or (imap is not None and not imap.mirror_symmetric):
        return pol, "none"
    c = mirror_correlation(mode.E_x, mode.E_y, pol)
    if abs(c) < 0.9:
        log.warning("mode n_eff=%.6f has mirror correlation %.3f; symmetry unresolved", mode.n_eff, c)
        return pol, "none"
    return pol, "symmetric" if c > 0 else "antisymmetric"


def _build_mode(vec, lam, A, nex, ix, iy, shapes, imap, symmetric_map):
    v = np.asarray(vec).ravel()
    resid = float(np.linalg.norm(A @ v - lam * v) / (abs(lam) * np.linalg.norm(v)))
    k = int(np.argmax(np.abs(v)))
    v = v * np.exp(-1j * np.angle(v[k]))
    v = v.real
    Ex = v[:nex].reshape(shapes[0])
    Ey = v[nex:].reshape(shapes[1])
    Exc, Eyc = _to_cells(Ex, Ey, ix, iy, imap.shape)
    norm = math.sqrt(float(np.sum(Exc**2 + Eyc**2)) * imap.dx * imap.dy)
    Exc, Eyc = Exc / norm, Eyc / norm
    px = float(np.sum(Exc**2) / np.sum(Exc**2 + Eyc**2))
    mode = ModeSolution(
        n_eff=float(math.sqrt(lam.real)),
        E_x=Exc,
        E_y=Eyc,
        polarization_fraction=max(px, 1 - px),
        te_fraction=px,
        symmetry="none",
        residual=resid,
        x=imap.x,
        y=imap.y,
    )
    if symmetric_map:
        _, sym = classify_mode(mode, imap)
        mode = ModeSolution(**{**mode.__dict__, "symmetry": sym})
    return mode, v


def solve_modes(
    imap: IndexMap,
    wavelength_um: float,
    count: int = 2,
    n_guess: float | None = None,
    settings: SolverSettings | None = None,
) -> list[ModeSolution]:
    """Solve for up to ``count`` guided modes, sorted by descending n_eff.

    Parameters
    ----------
    imap : IndexMap
        Rasterized cross-section.
    wavelength_um : float
        Free-space wavelength in um.
    count : int
        Number of modes to return at most.
    n_guess : float, optional
        Shift for the shift-invert iteration, defaults to ``n_core - 0.05``.

    Returns an empty list when no eigenvalue lies in (n_clad, n_core).
    """
    settings = settings or SolverSettings()
    if count < 1:
        raise ValueError("count must be >= 1")
    if n_guess is None:
        n_guess = imap.n_core - 0.05
    if not (imap.n_clad < n_guess < imap.n_core):
        raise ValueError(f"n_guess {n_guess} outside ({imap.n_clad}, {imap.n_core})")
    if np.all(imap.eps_x == imap.n_clad**2) and np.all(imap.eps_y == imap.n_clad**2):
        return []

    k0 = 2 * math.pi / wavelength_um
    A, shp_x, shp_y, ix, iy = _operator(imap, k0, settings.boundary_x, settings.boundary_y)
    n = A.shape[0]
    nev = min(count + settings.extra_modes, n - 2)
    sigma = n_guess**2
    # minimum-degree ordering on A + A^T roughly halves LU fill versus COLAMD here
    lu = spla.splu((A - sigma * sp.identity(n, format="csc")).tocsc(), permc_spec="MMD_AT_PLUS_A")
    opinv = spla.LinearOperator(A.shape, matvec=lu.solve, dtype=A.dtype)
    # fixed start vector keeps results bit-reproducible; a constant vector
    # would be blind to the antisymmetric modes of a mirror-symmetric map
    v0 = np.random.default_rng(12345).standard_normal(n)
    try:
        vals, vecs = spla.eigs(
            A,
            k=nev,
            sigma=sigma,
            which="LM",
            OPinv=opinv,
            v0=v0,
            tol=settings.tol,
            maxiter=settings.maxiter,
        )
    except spla.ArpackNoConvergence as exc:
        vals, vecs = exc.eigenvalues, exc.eigenvectors
        if len(vals) == 0:
            raise SolverError("shift-invert iteration did not converge") from exc

    nex = shp_x[0] * shp_x[1]
    lo, hi = imap.n_clad**2, imap.n_core**2
    order = np.argsort(-vals.real)
    modes = []
    worst = 0.0
    for j in order:
        lam = vals[j]
        if not (lo < lam.real < hi) or abs(lam.imag) > 1e-8 * abs(lam.real):
            continue
        mode, _ = _build_mode(vecs[:, j], lam, A, nex, ix, iy, (shp_x, shp_y), imap, imap.mirror_symmetric)
        worst = max(worst, mode.residual)
        if mode.residual > settings.residual_tol:
            raise SolverError(
                f"mode at n_eff={mode.n_eff:.6f} has residual {mode.residual:.3e}",
                residual=mode.residual,
            )
        modes.append(mode)
    if imap.mirror_symmetric:
        modes = _split_degenerate(modes, imap)
    return modes[:count]


def _split_degenerate(modes, imap, thresh=1e-9):
    """Replace near-degenerate pairs of equal polarization by their mirror
    symmetric and antisymmetric combinations."""
    out = list(modes)
    i = 0
    while i < len(out) - 1:
        a, b = out[i], out[i + 1]
        if abs(a.n_eff - b.n_eff) < thresh and a.polarization == b.polarization:
            sign = 1.0 if a.polarization == "TE" else -1.0
            fixed = []
            for s in (1.0, -1.0):
                ex = a.E_x + s * sign * a.E_x[::-1]
                ey = a.E_y - s * sign * a.E_y[::-1]
                if np.sum(ex**2 + ey**2) < 1e-12:
                    ex = b.E_x + s * sign * b.E_x[::-1]
                    ey = b.E_y - s * sign * b.E_y[::-1]
                nrm = math.sqrt(float(np.sum(ex**2 + ey**2)) * imap.dx * imap.dy)
                ex, ey = ex / nrm, ey / nrm
                fixed.append(
                    ModeSolution(
                        **{
                            **a.__dict__,
                            "E_x": ex,
                            "E_y": ey,
                            "symmetry": "symmetric" if s > 0 else "antisymmetric",
                        }
                    )
                )
            out[i], out[i + 1] = fixed
            i += 2
        else:
            i += 1
    return out


def analytic_slab_neff(n_core, n_clad, thickness_nm, wavelength_nm, polarization="TE", mode_order=0):
    """Effective index of a symmetric slab mode from its dispersion relation.

    With ``u = kappa d / 2`` and ``w = gamma d / 2`` the order-m mode solves
    ``u - atan(r w / u) - m pi / 2 = 0`` where ``r = 1`` for TE and
    ``(n_core / n_clad)^2`` for TM. Solved by bisection on n_eff.
    """
    if polarization not in ("TE", "TM"):
        raise ValueError("polarization must be 'TE' or 'TM'")
    k0 = 2 * math.pi / wavelength_nm
    half = thickness_nm / 2.0
    V = k0 * half * math.sqrt(n_core**2 - n_clad**2)
    if V <= mode_order * math.pi / 2:
        raise CutoffError(f"order {mode_order} {polarization} mode is cut off (V={V:.4f})")
    r = (n_core / n_clad) ** 2 if polarization == "TM" else 1.0

    def g(n):
        u = k0 * half * math.sqrt(max(n_core**2 - n * n, 0.0))
        w = k0 * half * math.sqrt(max(n * n - n_clad**2, 0.0))
        if u == 0.0:
            return -math.pi / 2 - mode_order * math.pi / 2
        return u - math.atan(r * w / u) - mode_order * math.pi / 2

    # g decreases monotonically in n; g(n_clad) = V - m pi / 2 > 0
    return _bisect_decreasing(g, n_clad, n_core)


def analytic_slab_pair_neff(
    n_core, n_clad, thickness_nm, gap_nm, wavelength_nm, polarization="TE", parity="even"
):
    """Fundamental even or odd supermode of two identical slabs.

    Five-layer symmetric guide; parity is that of the dominant field
    component across the plane midway between the slabs. Transverse
    resonance with the core field written as ``cos(kappa z - phi)`` from the
    inner face gives ``kappa t - atan(r L / kappa) - atan(r gamma / kappa) = 0``
    with ``L`` the gap-side log-derivative (``gamma tanh`` or ``gamma coth``).
    """
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    k0 = 2 * math.pi / wavelength_nm
    t, s = thickness_nm, gap_nm / 2.0
    r = (n_core / n_clad) ** 2 if polarization == "TM" else 1.0

    def g(n):
        kappa = k0 * math.sqrt(max(n_core**2 - n * n, 0.0))
        gamma = k0 * math.sqrt(max(n * n - n_clad**2, 0.0))
        if kappa == 0.0:
            return -math.pi
        if parity == "even":
            ld = gamma * math.tanh(gamma * s)
        else:
            ld = gamma / math.tanh(gamma * s) if gamma > 0 else 1.0 / s
        return kappa * t - math.atan(r * ld / kappa) - math.atan(r * gamma / kappa)

    if g(n_clad) <= 0:
        raise CutoffError(f"{parity} {polarization} supermode is cut off")
    return _bisect_decreasing(g, n_clad, n_core)


def _bisect_decreasing(g, lo, hi, tol=1e-13, maxiter=200):
    """Root of a function positive at ``lo`` and negative at ``hi``."""
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def richardson(coarse: float, fine: float, ratio: float = 2.0, order: int = 2) -> float:
    """Two-grid Richardson extrapolation."""
    return fine + (fine - coarse) / (ratio**order - 1)


@dataclass(frozen=True)
class CouplingStrength:
    delta_n_te: float
    delta_n_tm: float
    xi: float
    gap_nm: float
    n_te: tuple = ()
    n_tm: tuple = ()


class CouplingError(SolverError):
    """Supermodes could not be paired (too few guided modes)."""


def supermode_pairs(modes):
    """Pick the highest symmetric and antisymmetric mode per polarization."""
    found = {}
    for m in modes:
        key = (m.polarization, m.symmetry)
        if m.symmetry != "none" and key not in found:
            found[key] = m
    return found


def coupling_strength(pair, stack, grid=None, settings: SolverSettings | None = None) -> CouplingStrength:
    """Supermode splitting per polarization of a mirror-symmetric coupled pair.

    Results are memoized on ``(pair, stack, grid, settings)``, all of which
    are frozen dataclasses.
    """
    from .geometry import GridSpec

    return _coupling_strength_cached(pair, stack, grid or GridSpec(), settings or SolverSettings())


@lru_cache(maxsize=512)
def _coupling_strength_cached(pair, stack, grid, settings) -> CouplingStrength:
    from .geometry import rasterize

    imap = rasterize(pair, stack, grid)
    if not imap.mirror_symmetric:
        raise CouplingError("coupled-pair map is not mirror symmetric; use an even cell count")
    wanted = (("TE", "symmetric"), ("TE", "antisymmetric"), ("TM", "symmetric"), ("TM", "antisymmetric"))
    # slab-like modes can crowd out the weaker TM supermode; widen the search if so
    for extra in sorted({settings.extra_modes, 12, 24}):
        if extra < settings.extra_modes:
            continue
        modes = solve_modes(imap, stack.wavelength_um, count=4 + extra, settings=settings)
        found = supermode_pairs(modes)
        missing = [k for k in wanted if k not in found]
        if not missing:
            break
    if len(modes) < 4:
        raise CouplingError(f"only {len(modes)} guided modes at gap {pair.gap_nm} nm")
    if missing:
        raise CouplingError(f"unpaired supermodes at gap {pair.gap_nm} nm: missing {missing}")
    te = (found["TE", "symmetric"].n_eff, found["TE", "antisymmetric"].n_eff)
    tm = (found["TM", "symmetric"].n_eff, found["TM", "antisymmetric"].n_eff)
    dte, dtm = te[0] - te[1], tm[0] - tm[1]
    return CouplingStrength(dte, dtm, dte / dtm, pair.gap_nm, te, tm)
