"""Design toolkit for a polarization-independent directional-coupler Bell-state
analyzer in thin-film lithium niobate."""

from .bellstate import DetectionModel, FidelityReport, error_with_coupling, fidelity_closed_form, oracle_coincidence
from .coupler import DeltaNTable, TransferCoefficients, build_delta_n_table, delta, device_transfer, lc_sweep, straight_split
from .fiber import GaussianBeam, coupling_efficiency, fundamental_modes, na_sweep, overlap
from .geometry import CoupledPair, DeviceSpec, GridSpec, MaterialStack, RibWaveguide, SBendProfile, Slab, rasterize
from .modesolver import (
    CouplingStrength,
    ModeSolution,
    SolverSettings,
    analytic_slab_neff,
    coupling_strength,
    richardson,
    solve_modes,
)

__version__ = "0.1.0"
