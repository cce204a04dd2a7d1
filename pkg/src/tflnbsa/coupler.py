"""Coupled-mode model of the directional coupler.

Power exchange between the two identical waveguides is governed by the
accumulated coupling angle ``theta = int pi * dn(z) / lambda0 dz``. In the
straight section ``dn`` is constant; along each S-bend it follows the local
gap. Port 3 is the bar port of input port 1 (``P3 = cos^2 theta``).
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .geometry import CoupledPair, DeviceSpec, GridSpec, MaterialStack, RibWaveguide, SBendProfile, sbend_gap
from .modesolver import SolverSettings, coupling_strength

__all__ = [
    "DeltaNTable",
    "TransferCoefficients",
    "SplitResult",
    "TableError",
    "DEFAULT_TABLE_GAPS",
    "build_delta_n_table",
    "cached_delta_n_table",
    "straight_split",
    "bend_accumulated_angle",
    "device_transfer",
    "split_from_transfer",
    "zeta",
    "delta",
    "lc_sweep",
]

log = logging.getLogger(__name__)

# dense near the coupling gaps of interest, sparse in the evanescent tail
DEFAULT_TABLE_GAPS = (25, 30, 35, 40, 45, 50, 55, 65, 75, 90, 110, 135, 170, 220, 290, 380, 500, 650)

FLOOR_SEPARATION_NM = 3000.0


class TableError(ValueError):
    """Gap outside the coverage of a DeltaNTable."""


@dataclass(frozen=True)
class DeltaNTable:
    """Tabulated supermode splitting versus gap, log-linear in between."""

    gaps_nm: tuple
    dn_te: tuple
    dn_tm: tuple

    def __post_init__(self):
        g = np.asarray(self.gaps_nm, dtype=float)
        if len(g) < 2:
            raise TableError("table needs at least two gaps")
        if not (len(g) == len(self.dn_te) == len(self.dn_tm)):
            raise TableError("column lengths differ")
        if np.any(np.diff(g) <= 0):
            raise TableError("gaps must be strictly increasing")
        if min(self.dn_te) <= 0 or min(self.dn_tm) <= 0:
            raise TableError("all tabulated splittings must be positive")

    @classmethod
    def from_arrays(cls, gaps_nm, dn_te, dn_tm):
        return cls(tuple(map(float, gaps_nm)), tuple(map(float, dn_te)), tuple(map(float, dn_tm)))

    def column(self, polarization: str) -> np.ndarray:
        if polarization == "TE":
            return np.asarray(self.dn_te)
        if polarization == "TM":
            return np.asarray(self.dn_tm)
        raise ValueError(f"polarization must be 'TE' or 'TM', got {polarization!r}")

    def tail_fit(self, polarization: str, points: int = 3):
        """Exponential fit ``log dn = a + b * gap`` over the last ``points`` entries."""
        g = np.asarray(self.gaps_nm)[-points:]
        y = np.log(self.column(polarization)[-points:])
        b, a = np.polyfit(g, y, 1)
        return a, b

    def delta_n(self, gap_nm, polarization: str):
        """Splitting at ``gap_nm``; exact at tabulated gaps.

        Beyond the largest gap the fitted exponential tail is used, and the
        splitting is zero from 3 um separation on.
        """
        gaps = np.asarray(self.gaps_nm)
        col = self.column(polarization)
        g = np.asarray(gap_nm, dtype=float)
        if np.any(g < gaps[0] - 1e-9):
            raise TableError(f"gap {float(np.min(g))} nm below table start {gaps[0]} nm")
        inside = np.exp(np.interp(np.minimum(g, gaps[-1]), gaps, np.log(col)))
        a, b = self.tail_fit(polarization)
        if b < 0:
            tail = np.exp(a + b * g)
        else:
            tail = np.zeros_like(g)
        out = np.where(g <= gaps[-1], inside, tail)
        out = np.where(g >= FLOOR_SEPARATION_NM, 0.0, out)
        # exact at tabulated points
        hit = np.isin(g, gaps)
        if np.any(hit):
            out = np.where(hit, np.interp(g, gaps, col), out)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TransferCoefficients:
    """Amplitude transfer of the whole device for H (TE) and V (TM) light.

    ``t`` is the bar amplitude (port 1 to port 3), ``r`` the cross amplitude.
    Loss factors are kept separate and never change the ``t``/``r`` ratio.
    """

    t_h: float
    r_h: float
    t_v: float
    r_v: float
    transmission_factor_te: float = 1.0
    transmission_factor_tm: float = 1.0
    theta_h: float = float("nan")
    theta_v: float = float("nan")

    def __post_init__(self):
        for name in ("t_h", "r_h", "t_v", "r_v"):
            v = getattr(self, name)
            if not (-1e-12 <= v <= 1 + 1e-12):
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("transmission_factor_te", "transmission_factor_tm"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ValueError(f"{name}={v} outside (0, 1]")

    @classmethod
    def from_angles(cls, theta_h: float, theta_v: float, **loss) -> "TransferCoefficients":
        return cls(
            t_h=abs(math.cos(theta_h)),
            r_h=abs(math.sin(theta_h)),
            t_v=abs(math.cos(theta_v)),
            r_v=abs(math.sin(theta_v)),
            theta_h=theta_h,
            theta_v=theta_v,
            **loss,
        )

    @classmethod
    def from_splits(cls, p3_te, p4_te, p3_tm, p4_tm) -> "TransferCoefficients":
        """Coefficients from port powers, renormalized per polarization."""
        sh, sv = p3_te + p4_te, p3_tm + p4_tm
        return cls(
            t_h=math.sqrt(p3_te / sh),
            r_h=math.sqrt(p4_te / sh),
            t_v=math.sqrt(p3_tm / sv),
            r_v=math.sqrt(p4_tm / sv),
        )

    @property
    def same_quadrant(self) -> bool:
        """True when the signed bar and cross products agree in sign for H
        and V, i.e. the non-negative magnitudes lose no phase information."""
        if math.isnan(self.theta_h) or math.isnan(self.theta_v):
            return True
        ch, cv = math.cos(self.theta_h), math.cos(self.theta_v)
        sh, sv = math.sin(self.theta_h), math.sin(self.theta_v)
        return ch * cv >= 0 and sh * sv >= 0


@dataclass(frozen=True)
class SplitResult:
    P3_TE: float
    P4_TE: float
    P3_TM: float
    P4_TM: float


def build_delta_n_table(
    rib: RibWaveguide,
    stack: MaterialStack,
    gaps_nm=DEFAULT_TABLE_GAPS,
    grid: GridSpec | None = None,
    settings: SolverSettings | None = None,
    executor=None,
) -> DeltaNTable:
    """Solve ``coupling_strength`` over ``gaps_nm`` and tabulate.

    Trailing gaps where either splitting is no longer resolvable (non-positive)
    are dropped; the exponential tail fit covers them.
    """
    gaps = sorted(float(g) for g in gaps_nm)
    pairs = [CoupledPair(rib, g) for g in gaps]
    call = lambda p: coupling_strength(p, stack, grid, settings)  # noqa: E731
    results = list(executor.map(call, pairs)) if executor else [call(p) for p in pairs]
    keep = len(results)
    while keep > 0 and (results[keep - 1].delta_n_te <= 0 or results[keep - 1].delta_n_tm <= 0):
        keep -= 1
    if keep < len(results):
        log.warning("dropping %d unresolved tail gaps from the table", len(results) - keep)
    results = results[:keep]
    return DeltaNTable.from_arrays(
        [r.gap_nm for r in results],
        [r.delta_n_te for r in results],
        [r.delta_n_tm for r in results],
    )


def cached_delta_n_table(
    path,
    rib: RibWaveguide,
    stack: MaterialStack,
    gaps_nm=DEFAULT_TABLE_GAPS,
    grid: GridSpec | None = None,
    settings: SolverSettings | None = None,
) -> DeltaNTable:
    """``build_delta_n_table`` backed by a JSON file.

    The file stores a key describing every input; a stale or unreadable file
    is rebuilt and overwritten.
    """
    grid = grid or GridSpec()
    settings = settings or SolverSettings()
    key = repr((rib, stack, tuple(float(g) for g in gaps_nm), grid, settings))
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        if data.get("key") == key:
            return DeltaNTable.from_arrays(data["gaps_nm"], data["dn_te"], data["dn_tm"])
        log.info("table cache %s is stale; rebuilding", path)
    except (OSError, ValueError, KeyError, TypeError):
        pass
    table = build_delta_n_table(rib, stack, gaps_nm, grid, settings)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"key": key, "gaps_nm": table.gaps_nm, "dn_te": table.dn_te, "dn_tm": table.dn_tm}
    path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    return table


def straight_split(delta_n: float, coupling_length_um, wavelength_um: float):
    """Normalized (P3, P4) after a straight coupling section."""
    if delta_n <= 0:
        raise ValueError("delta_n must be positive")
    L = np.asarray(coupling_length_um, dtype=float)
    if np.any(L < 0):
        raise ValueError("coupling length must be non-negative")
    phase = np.pi * delta_n * L / wavelength_um
    p3, p4 = np.cos(phase) ** 2, np.sin(phase) ** 2
    if p3.ndim == 0:
        return float(p3), float(p4)
    return p3, p4


def bend_accumulated_angle(
    table: DeltaNTable, profile: SBendProfile, wavelength_um: float, polarization: str
) -> float:
    """Coupling angle picked up along one S-bend (composite Simpson)."""
    if profile.end_gap_nm < table.gaps_nm[0] - 1e-9:
        raise TableError(
            f"table starts at {table.gaps_nm[0]} nm but the bend ends at {profile.end_gap_nm} nm"
        )
    n = profile.samples if profile.samples % 2 == 1 else profile.samples + 1
    z = np.linspace(0.0, profile.bend_length_um, n)
    dn = table.delta_n(sbend_gap(z, profile), polarization)
    return float(simpson(np.pi * np.maximum(dn, 0.0) / wavelength_um, x=z))


def _angles(device: DeviceSpec, table: DeltaNTable, coupling_length_um):
    lam = device.stack.wavelength_um
    out = []
    for pol in ("TE", "TM"):
        bend = bend_accumulated_angle(table, device.sbend, lam, pol)
        dn = table.delta_n(device.pair.gap_nm, pol)
        out.append(2.0 * bend + np.pi * dn * np.asarray(coupling_length_um) / lam)
    return out


def device_transfer(device: DeviceSpec, table: DeltaNTable) -> TransferCoefficients:
    """Per-polarization transfer of input bend + straight section + output bend."""
    th, tv = _angles(device, table, device.coupling_length_um)
    # input and output bend each contribute an amplitude factor sqrt(T)
    return TransferCoefficients.from_angles(
        float(th),
        float(tv),
        transmission_factor_te=device.bend_transmission_te,
        transmission_factor_tm=device.bend_transmission_tm,
    )


def split_from_transfer(t: TransferCoefficients) -> SplitResult:
    return SplitResult(t.t_h**2, t.r_h**2, t.t_v**2, t.r_v**2)


def zeta(split: SplitResult) -> float:
    """Signed port-3 power difference between TE and TM."""
    return split.P3_TE - split.P3_TM


def lc_sweep(device: DeviceSpec, table: DeltaNTable, lc_um):
    """Port powers over coupling lengths; returns a dict of arrays."""
    lc = np.asarray(lc_um, dtype=float)
    th, tv = _angles(device, table, lc)
    p3_te, p3_tm = np.cos(th) ** 2, np.cos(tv) ** 2
    return {
        "L_c_um": lc,
        "P3_TE": p3_te,
        "P4_TE": 1.0 - p3_te,
        "P3_TM": p3_tm,
        "P4_TM": 1.0 - p3_tm,
        "zeta": p3_te - p3_tm,
    }


def delta(device: DeviceSpec, table: DeltaNTable, lc_range_um=(1.0, 25.0), samples: int = 241) -> float:
    """RMS of zeta over uniformly sampled coupling lengths."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    lc = np.linspace(lc_range_um[0], lc_range_um[1], samples)
    z = lc_sweep(device, table, lc)["zeta"]
    return float(np.sqrt(np.mean(z**2)))
