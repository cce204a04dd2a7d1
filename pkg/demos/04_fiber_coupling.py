"""Butt coupling from a lensed fiber into the rib, versus fiber NA.

    python demos/04_fiber_coupling.py
"""

from tflnbsa import DeviceSpec, GaussianBeam, GridSpec, coupling_efficiency, fundamental_modes

device = DeviceSpec()
te, tm, _ = fundamental_modes(device, GridSpec(dx_nm=20, dy_nm=20, width_um=4.0))
print(f"rib modes: TE n_eff {te.n_eff:.4f}, TM n_eff {tm.n_eff:.4f}")
print("  NA   waist (nm)  eta_TE  eta_TM")
for na in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6):
    beam = GaussianBeam(na, device.stack.wavelength_um)
    print(f"{na:4.1f}  {beam.waist_um * 1e3:9.1f}  {coupling_efficiency(te, beam):.4f}  {coupling_efficiency(tm, beam):.4f}")
