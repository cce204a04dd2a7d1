"""Acceptance checks, one summary line per criterion (see the "acceptance"
section at the end of the pytest report).

Criteria the 2D model cannot meet are kept at full tolerance and marked as
strict expected failures, so they show as FAIL lines without hiding a
regression if they ever start passing.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import record
from tflnbsa.bellstate import DetectionModel, error_with_coupling, fidelity_closed_form, oracle_coincidence
from tflnbsa.coupler import TransferCoefficients, device_transfer, lc_sweep, split_from_transfer, straight_split
from tflnbsa.fiber import FieldGrid, GaussianBeam, gaussian_field, na_sweep, overlap
from tflnbsa.geometry import CoupledPair, GridSpec, MaterialStack, RibWaveguide, Slab, rasterize
from tflnbsa.io import HEADERS
from tflnbsa.modesolver import SolverSettings, analytic_slab_neff, analytic_slab_pair_neff, coupling_strength, richardson, solve_modes
from tflnbsa.sweep import minimize_delta_over_gap, minimize_error_over_Lc, xi_vs_gap

STACK = MaterialStack()
LAM = STACK.wavelength_um
NC, NL = STACK.n_core, STACK.n_clad
RESOLVING = DetectionModel.OPPOSITE_POLARIZATION_RESOLVING
BUCKET = DetectionModel.BUCKET_COINCIDENCE
CAPTION = TransferCoefficients.from_splits(49.7, 48.9, 50.7, 48.3)
RED_ZETA = "bends add more TE than TM coupling; no gap balances both over 1-25 um in the 2D model (best ratio about 1.8)"
RED_ETA = "2D single-rib modes are more compact than the 3D reference ones; eta at NA 0.6 is about 0.82/0.83"


def _slab(geom, pol, dx, count=1, height_um=3.6):
    g = GridSpec(dx_nm=dx, dy_nm=dx, width_um=4 * dx * 1e-3, height_um=height_um)
    s = SolverSettings(boundary_x="pec" if pol == "TE" else "pmc")
    return [m for m in solve_modes(rasterize(geom, STACK, g), LAM, count, settings=s) if m.polarization == pol]


def test_c1_slab_oracle():
    t0 = time.perf_counter()
    worst_fd = worst_rx = 0.0
    for pol in ("TE", "TM"):
        ref = analytic_slab_neff(NC, NL, 300, 493.55, pol)
        n10 = _slab(Slab(300), pol, 10)[0].n_eff
        n5 = _slab(Slab(300), pol, 5)[0].n_eff
        worst_fd = max(worst_fd, abs(n10 - ref))
        worst_rx = max(worst_rx, abs(richardson(n10, n5) - ref))
    dt = time.perf_counter() - t0
    ok = worst_fd <= 1e-3 and worst_rx <= 1e-4 and dt <= 30
    record("1", ok, f"|dn| 10 nm = {worst_fd:.2e}, Richardson = {worst_rx:.2e}, {dt:.1f} s")
    assert ok


def test_c2_two_slab_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for pol in ("TE", "TM"):
        fd = _slab(Slab(300, 2, 200), pol, 10, count=2, height_um=4.0)
        ne = analytic_slab_pair_neff(NC, NL, 300, 200, 493.55, pol, "even")
        no = analytic_slab_pair_neff(NC, NL, 300, 200, 493.55, pol, "odd")
        worst = max(worst, abs((fd[0].n_eff - fd[1].n_eff) / (ne - no) - 1))
    dt = time.perf_counter() - t0
    ok = worst <= 0.02 and dt <= 60
    record("2", ok, f"worst relative splitting error {worst:.2%} at 200 nm gap, {dt:.1f} s")
    assert ok


@pytest.mark.slow
def test_c3_xi_band_and_monotone():
    t0 = time.perf_counter()
    xi = coupling_strength(CoupledPair(RibWaveguide(475, 110), 65.0), STACK, GridSpec()).xi
    d = xi_vs_gap([40, 60, 80, 100, 120], RibWaveguide(475, 110), STACK, GridSpec())
    dt = time.perf_counter() - t0
    mono = bool(np.all(np.diff(d["xi"]) > 0))
    ok = 0.9 <= xi <= 1.1 and mono and dt <= 600
    record("3", ok, f"xi(475, 110, 65) = {xi:.4f}, xi(g) = {np.round(d['xi'], 4).tolist()}, {dt:.0f} s")
    assert ok


def test_c4_straight_split_exactness():
    rng = np.random.default_rng(4)
    worst_sum = worst_period = worst_quarter = 0.0
    for dn, L in zip(rng.uniform(1e-4, 5e-2, 10_000), rng.uniform(0, 100, 10_000)):
        p3, p4 = straight_split(dn, L, LAM)
        q3, _ = straight_split(dn, L + LAM / dn, LAM)
        h3, h4 = straight_split(dn, LAM / (4 * dn), LAM)
        worst_sum = max(worst_sum, abs(p3 + p4 - 1))
        worst_period = max(worst_period, abs(q3 - p3))
        worst_quarter = max(worst_quarter, abs(h3 - 0.5), abs(h4 - 0.5))
    ok = max(worst_sum, worst_period, worst_quarter) <= 1e-12
    record("4", ok, f"10^4 draws: sum {worst_sum:.1e}, period {worst_period:.1e}, quarter beat {worst_quarter:.1e}")
    assert ok


def test_c5_caption_error():
    e = fidelity_closed_form(CAPTION).error
    ok = 1.5e-4 <= e <= 3.5e-4
    record("5", ok, f"E = {e:.4e}")
    assert ok


def test_c6_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    bucket_ok = True
    for th, tv in rng.uniform(0.05, math.pi / 2 - 0.05, (1000, 2)):
        t = TransferCoefficients.from_angles(th, tv)
        closed = fidelity_closed_form(t).fidelity
        worst = max(worst, abs(oracle_coincidence(t, detection=RESOLVING).fidelity - closed))
        bucket_ok &= oracle_coincidence(t, detection=BUCKET).fidelity <= closed + 1e-12
    s = 1 / math.sqrt(2)
    bal = TransferCoefficients(s, s, s, s)
    eq = abs(oracle_coincidence(bal, detection=BUCKET).fidelity - fidelity_closed_form(bal).fidelity)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and bucket_ok and eq <= 1e-12 and dt <= 60
    record("6", ok, f"max |F_oracle - F| = {worst:.1e}, bucket <= closed form: {bucket_ok}, balanced gap {eq:.1e}, {dt:.1f} s")
    assert ok


def test_c7_coupling_efficiency_effect():
    e0 = fidelity_closed_form(CAPTION).error
    e = error_with_coupling(CAPTION, 0.6616, 0.6552).error
    common = max(abs(error_with_coupling(CAPTION, eta, eta).error - e0) for eta in (1.0, 0.66, 0.3, 1e-3))
    ok = abs(e - 2.54e-4) <= 1e-4 and common <= 1e-12
    record("7", ok, f"E(0.6616, 0.6552) = {e:.4e}, max |E(eta, eta) - E0| = {common:.1e}")
    assert ok


@pytest.fixture(scope="module")
def tuned(device, dn_table):
    return minimize_delta_over_gap(device, dn_table)


def test_c8a_delta_interior_minimum(tuned):
    ok = not tuned.at_boundary and 25 <= tuned.argmin <= 55
    record("8a", ok, f"argmin delta at g = {tuned.argmin:.2f} nm (delta = {tuned.min_value:.4f})")
    assert ok


@pytest.mark.xfail(strict=True, reason=RED_ZETA)
def test_c8b_zeta_reduction(device, dn_table, tuned):
    lc = np.linspace(1, 25, 241)
    ref = np.max(np.abs(lc_sweep(device.with_gap(65.0), dn_table, lc)["zeta"]))
    best = np.max(np.abs(lc_sweep(device.with_gap(tuned.argmin), dn_table, lc)["zeta"]))
    ratio = ref / best
    record("8b", ratio >= 5, f"max|zeta| {ref:.3f} at 65 nm vs {best:.3f} at tuned gap: ratio {ratio:.2f} (need 5)")
    assert ratio >= 5


def test_c8c_error_minimum(device, dn_table):
    t0 = time.perf_counter()
    rep = minimize_error_over_Lc(device, dn_table)
    sp = split_from_transfer(device_transfer(device.with_coupling_length(rep.argmin), dn_table))
    window = all(0.45 <= p <= 0.55 for p in (sp.P3_TE, sp.P3_TM))
    dt = time.perf_counter() - t0
    ok = not rep.at_boundary and rep.min_value < 1e-3 and window
    record("8c", ok, f"min E = {rep.min_value:.2e} at L_c = {rep.argmin:.3f} um, P3 = {sp.P3_TE:.3f}/{sp.P3_TM:.3f}, {dt:.1f} s")
    assert ok


def test_c9a_gaussian_overlap():
    g = FieldGrid.centered(8.0, 8.0, 0.02, 0.02)
    worst = 0.0
    for na1, na2 in [(0.6, 0.6), (0.6, 0.3), (0.2, 0.5), (0.15, 0.6)]:
        b1, b2 = GaussianBeam(na1, LAM), GaussianBeam(na2, LAM)
        w1, w2 = b1.waist_um, b2.waist_um
        fd = overlap(gaussian_field(b1, g)[0], gaussian_field(b2, g)[0], g.dx * g.dy)
        worst = max(worst, abs(fd - (2 * w1 * w2 / (w1**2 + w2**2)) ** 2))
    record("9a", worst <= 1e-6, f"max two-Gaussian overlap error {worst:.1e}")
    assert worst <= 1e-6


@pytest.fixture(scope="module")
def na_curve(device):
    t0 = time.perf_counter()
    d = na_sweep(device, (0.1, 0.6), 11, GridSpec(width_um=4.0))
    return d, time.perf_counter() - t0


def test_c9b_eta_monotone_and_balanced(na_curve):
    d, dt = na_curve
    mono = bool(np.all(np.diff(d["eta_TE"]) > 0) and np.all(np.diff(d["eta_TM"]) > 0))
    diff = abs(d["eta_TE"][-1] - d["eta_TM"][-1])
    ok = mono and diff <= 0.03 and dt <= 300
    record("9b", ok, f"monotone: {mono}, |eta_TE - eta_TM| at NA 0.6 = {diff:.4f}, {dt:.0f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason=RED_ETA)
def test_c9c_eta_band(na_curve):
    d, _ = na_curve
    te, tm = d["eta_TE"][-1], d["eta_TM"][-1]
    ok = 0.5 <= te <= 0.8 and 0.5 <= tm <= 0.8
    record("9c", ok, f"eta at NA 0.6: TE {te:.4f}, TM {tm:.4f} (band 0.5-0.8)")
    assert ok


COARSE_RUN = """\
grid: {dx_nm: 20, dy_nm: 20}
fiber_grid: {dx_nm: 20, dy_nm: 20}
table:
  gaps_nm: [25, 40, 65, 110, 220, 500]
sweeps:
  fig3a: {w_samples: 2, he_samples: 2, dx_nm: 25, dy_nm: 25}
  fig3b: {gaps_nm: [40, 80]}
  fig4: {lc_samples: 49}
  fig4b: {gap_samples: 11, tol_nm: 2.0}
  fig5a: {lc_samples: 26}
  fig6c: {na_samples: 3}
"""


@pytest.mark.slow
def test_c10_reproduce_is_deterministic(tmp_path):
    cfg = tmp_path / "coarse.yaml"
    cfg.write_text(COARSE_RUN)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        p = subprocess.run(
            [sys.executable, "-m", "tflnbsa", "reproduce", "all", "-c", str(cfg), "-o", str(out)],
            capture_output=True, text=True,
        )
        assert p.returncode == 0, p.stderr
        outs.append(out)
    csvs = sorted(f.name for f in outs[0].glob("*.csv"))
    same = csvs == sorted(f.name for f in outs[1].glob("*.csv")) and all(
        (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in csvs
    )
    schema = all((outs[0] / f"{n}.csv").read_text().split("\n", 1)[0] == ",".join(HEADERS[n])
                 for n in ("fig3a", "fig3b", "fig4a", "fig4b", "fig4c", "fig5a", "fig6c"))
    svgs_same = all((outs[0] / f.name).read_bytes() == f.read_bytes() for f in outs[1].glob("*.svg"))
    ok = len(csvs) == 7 and same and schema and svgs_same
    record("10", ok, f"{len(csvs)} CSVs byte-identical across runs: {same}, SVGs identical: {svgs_same}, headers match: {schema}")
    assert ok
