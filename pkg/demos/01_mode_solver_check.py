"""Check the finite-difference mode solver against exact slab results,
then look at the guided modes of the single rib.

    python demos/01_mode_solver_check.py
"""

from tflnbsa import GridSpec, MaterialStack, RibWaveguide, Slab, SolverSettings, analytic_slab_neff, rasterize, richardson, solve_modes

stack = MaterialStack()
lam = stack.wavelength_um

# A laterally uniform film only needs a few cells across. PEC side walls keep
# TE fields uniform; TM needs PMC walls.
print("slab of 300 nm LN in silica")
for pol, wall in (("TE", "pec"), ("TM", "pmc")):
    exact = analytic_slab_neff(stack.n_core, stack.n_clad, 300, stack.wavelength_nm, pol)
    fd = {}
    for dx in (10, 5):
        grid = GridSpec(dx_nm=dx, dy_nm=dx, width_um=4 * dx * 1e-3)
        modes = solve_modes(rasterize(Slab(300), stack, grid), lam, 1, settings=SolverSettings(boundary_x=wall))
        fd[dx] = modes[0].n_eff
    print(f"  {pol}: exact {exact:.6f}  10 nm {fd[10]:.6f}  5 nm {fd[5]:.6f}  extrapolated {richardson(fd[10], fd[5]):.6f}")

# The rib itself: a 20 nm grid is plenty for a first look.
grid = GridSpec(dx_nm=20, dy_nm=20, width_um=4.0)
imap = rasterize(RibWaveguide(), stack, grid)
print("\nsingle rib, w = 475 nm, h_e = 110 nm")
for m in solve_modes(imap, lam, count=4):
    print(f"  n_eff {m.n_eff:.5f}  {m.polarization}  TE fraction {m.te_fraction:.3f}")
