import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from shapely.geometry import Polygon

from tflnbsa.geometry import (
    CoupledPair,
    DeviceSpec,
    GeometryError,
    GridSpec,
    MaterialStack,
    RibWaveguide,
    SBendProfile,
    Slab,
    cladding_map,
    rasterize,
    rib_polygon,
    sbend_gap,
)

STACK = MaterialStack()
SMALL = GridSpec(dx_nm=20, dy_nm=20, width_um=4.2, height_um=3.4)


def test_stack_defaults():
    s = MaterialStack()
    assert (s.n_core, s.n_clad, s.film_thickness_nm, s.wavelength_nm) == (2.34, 1.462, 300.0, 493.55)
    assert s.box_thickness_um == 2.0 and s.clad_thickness_um == 2.0


@pytest.mark.parametrize("kw", [{"n_core": 1.4}, {"n_clad": 0.9}, {"film_thickness_nm": 0}])
def test_stack_rejects_non_guiding(kw):
    with pytest.raises(GeometryError):
        MaterialStack(**kw)


def test_top_width_trapezoid():
    rib = RibWaveguide(475, 110, 75, width_reference="top")
    poly = rib_polygon(rib, STACK)
    bottom = poly[1][0] - poly[0][0]
    top = poly[2][0] - poly[3][0]
    assert top == pytest.approx(475.0)
    # 475 + 2 * 110 / tan(75 deg), worked by hand: 110 / 3.7320508 = 29.4744
    assert bottom == pytest.approx(533.9488, abs=1e-3)
    assert poly[0] == poly[-1]
    assert poly[0][1] == pytest.approx(190.0) and poly[2][1] == pytest.approx(300.0)


def test_bottom_width_reference_is_default():
    rib = RibWaveguide()
    assert rib.bottom_width_nm == pytest.approx(475.0)
    assert rib.top_width_nm == pytest.approx(475.0 - 2 * 110 / math.tan(math.radians(75)))


def test_vertical_sidewalls_give_rectangle():
    poly = rib_polygon(RibWaveguide(475, 110, 90, "top"), STACK)
    assert poly[1][0] - poly[0][0] == pytest.approx(475.0)
    assert poly[2][0] - poly[3][0] == pytest.approx(475.0)


def test_full_etch_leaves_no_slab():
    rib = RibWaveguide(475, 300, 75, "top")
    assert rib.slab_thickness_nm(STACK) == 0.0
    imap = rasterize(rib, STACK, SMALL)
    # no core material below the rib footprint
    outside = np.abs(imap.x) > 0.4
    assert np.all(imap.fill[outside] == 0.0)


def test_etch_deeper_than_film_rejected():
    with pytest.raises(GeometryError):
        rib_polygon(RibWaveguide(475, 310, 75), STACK)


def test_sbend_endpoints_and_midpoint():
    p = SBendProfile(2.0, 40.0, 30.0)
    assert sbend_gap(0.0, p) == pytest.approx(2000.0)
    assert sbend_gap(30.0, p) == pytest.approx(40.0)
    assert sbend_gap(15.0, p) == pytest.approx(1020.0)


def test_sbend_rejects_outside():
    with pytest.raises(GeometryError):
        sbend_gap(31.0, SBendProfile())
    with pytest.raises(GeometryError):
        sbend_gap(-0.1, SBendProfile())


@given(st.floats(0.5, 5.0), st.floats(10, 400), st.floats(5, 60))
def test_sbend_monotone_and_flat_at_ends(y_um, g_nm, L):
    p = SBendProfile(y_um, g_nm, L)
    z = np.linspace(0, L, 201)
    gz = sbend_gap(z, p)
    assert np.all(np.diff(gz) <= 1e-9)
    h = L * 1e-6
    assert abs(sbend_gap(h, p) - sbend_gap(0, p)) / h < 1e-3 * (y_um * 1e3)
    assert abs(sbend_gap(L, p) - sbend_gap(L - h, p)) / h < 1e-3 * (y_um * 1e3)


def test_device_rejects_mismatched_bend():
    with pytest.raises(GeometryError):
        DeviceSpec(pair=CoupledPair(gap_nm=40), sbend=SBendProfile(end_gap_nm=50))
    d = DeviceSpec().with_gap(55.0)
    assert d.pair.gap_nm == d.sbend.end_gap_nm == 55.0


def test_cladding_map_is_uniform():
    m = cladding_map(STACK, SMALL)
    assert np.all(m.eps == STACK.n_clad**2)
    assert m.core_area() == 0.0


def test_rasterize_values_bounded_and_interior_core():
    imap = rasterize(CoupledPair(RibWaveguide(), 40), STACK, SMALL)
    lo, hi = STACK.n_clad**2, STACK.n_core**2
    for a in (imap.eps, imap.eps_x, imap.eps_y, imap.eps_z):
        assert a.min() >= lo - 1e-12 and a.max() <= hi + 1e-12
    # a cell deep in the slab under a rib is pure core
    i = np.argmin(np.abs(imap.x - 0.3))
    j = np.argmin(np.abs(imap.y - 0.1))
    assert imap.eps[i, j] == pytest.approx(hi)


def test_half_covered_cell_tangential_average():
    # the slab top at y = 0.3 um falls on a grid line, where E_x samples sit
    g = GridSpec(dx_nm=20, dy_nm=20, width_um=0.08, height_um=3.42)
    imap = rasterize(Slab(300.0), STACK, g)
    j = int(np.flatnonzero(np.isclose(imap.y_edges, 0.3, atol=1e-9))[0])
    ec, el = STACK.n_core**2, STACK.n_clad**2
    # E_x is tangential to the horizontal interface: arithmetic mean
    assert np.allclose(imap.eps_x[:, j], (ec + el) / 2)
    # E_z shares the node and is averaged the same way
    assert np.allclose(imap.eps_z[:, j], (ec + el) / 2)


@given(st.sampled_from([20, 30, 40, 60, 90]), st.sampled_from([20.0, 10.0]))
@settings(max_examples=6, deadline=None)
def test_pair_map_exactly_mirror_symmetric(gap, dx):
    imap = rasterize(CoupledPair(RibWaveguide(), gap), STACK, GridSpec(dx_nm=dx, dy_nm=dx, width_um=4.4, height_um=3.4))
    assert imap.mirror_symmetric
    for a in (imap.eps, imap.eps_x, imap.eps_y, imap.eps_z):
        assert np.array_equal(a, a[::-1])


def test_core_area_converges_to_polygon_area():
    rib = RibWaveguide()
    poly = Polygon(rib_polygon(rib, STACK))
    exact_rib = poly.area * 1e-6
    errs = []
    for dx in (40.0, 20.0, 10.0):
        g = GridSpec(dx_nm=dx, dy_nm=dx, width_um=4.0, height_um=3.4)
        m = rasterize(rib, STACK, g)
        exact = exact_rib + (m.x_edges[-1] - m.x_edges[0]) * rib.slab_thickness_nm(STACK) * 1e-3
        errs.append(abs(m.core_area() - exact))
    assert errs[-1] <= errs[0] + 1e-12
    assert errs[-1] < 1e-9


def test_window_margin_enforced():
    with pytest.raises(GeometryError):
        rasterize(CoupledPair(RibWaveguide(), 40), STACK, GridSpec(width_um=3.0))
    with pytest.raises(GeometryError):
        rasterize(RibWaveguide(), STACK, GridSpec(height_um=2.0))


def test_rasterize_deterministic():
    a = rasterize(CoupledPair(), STACK, SMALL)
    b = rasterize(CoupledPair(), STACK, SMALL)
    assert np.array_equal(a.eps_x, b.eps_x) and np.array_equal(a.eps_y, b.eps_y)


def test_half_covered_cell_normal_average():
    # with this height a cell centre sits on the slab top; E_y there is normal
    g = GridSpec(dx_nm=20, dy_nm=20, width_um=0.08, height_um=3.44)
    imap = rasterize(Slab(300.0), STACK, g)
    j = int(np.flatnonzero(np.isclose(imap.y, 0.3, atol=1e-9))[0])
    ec, el = STACK.n_core**2, STACK.n_clad**2
    assert np.allclose(imap.fill[:, j], 0.5)
    assert np.allclose(imap.eps_y[:, j], 2.0 / (1 / ec + 1 / el))
