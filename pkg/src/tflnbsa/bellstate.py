"""Heralded ion-ion entanglement through the on-chip beam splitter.

Each ion emits ``(|up>|V> + |down>|H>) / sqrt(2)``; photon a enters port 1,
photon b port 2. The splitter maps input creation operators to outputs as

    a_p^dag = t_p c_p^dag + r_p d_p^dag
    b_p^dag = r_p c_p^dag - t_p d_p^dag        (p = h, v)

and a coincidence between the output ports heralds the ions. Two routes are
provided: the closed-form fidelity for the polarization-resolving detection
model, and an exhaustive two-photon Fock-space enumeration that also covers
bucket detectors and unequal input weights.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .coupler import TransferCoefficients

__all__ = [
    "UP",
    "DOWN",
    "DetectionModel",
    "FidelityReport",
    "NoCoincidenceError",
    "singlet",
    "emission_state",
    "heralded_state_closed_form",
    "fidelity_closed_form",
    "oracle_coincidence",
    "error_with_coupling",
]

UP, DOWN = 0, 1
H, V = 0, 1
# output modes, ordered (port, polarization)
MODES = (("c", H), ("c", V), ("d", H), ("d", V))


class NoCoincidenceError(ValueError):
    """No coincidence event is possible for the given transfer."""


class DetectionModel:
    OPPOSITE_POLARIZATION_RESOLVING = "opposite_polarization_resolving"
    BUCKET_COINCIDENCE = "bucket_coincidence"
    ALL = (OPPOSITE_POLARIZATION_RESOLVING, BUCKET_COINCIDENCE)


@dataclass(frozen=True, eq=False)
class FidelityReport:
    fidelity: float
    error: float
    coincidence_probability: float
    heralded_state: np.ndarray

    def __post_init__(self):
        if self.error != 1.0 - self.fidelity:
            raise ValueError("error must equal 1 - fidelity")


def _ket(a: int, b: int) -> np.ndarray:
    v = np.zeros(4)
    v[2 * a + b] = 1.0
    return v


def singlet() -> np.ndarray:
    """``(|down>_a|up>_b - |up>_a|down>_b) / sqrt(2)`` in the basis |a b>."""
    return (_ket(DOWN, UP) - _ket(UP, DOWN)) / math.sqrt(2)


def emission_state() -> np.ndarray:
    """Single ion-photon state as a 2x2 array indexed [spin, polarization]."""
    psi = np.zeros((2, 2))
    psi[UP, V] = psi[DOWN, H] = 1 / math.sqrt(2)
    return psi


def _report(rho_unnorm: np.ndarray) -> FidelityReport:
    p = float(np.real(np.trace(rho_unnorm)))
    if p <= 0:
        raise NoCoincidenceError("coincidence probability is zero")
    rho = rho_unnorm / p
    rho = 0.5 * (rho + rho.conj().T)
    s = singlet()
    f = float(np.real(s @ rho @ s))
    f = min(max(f, 0.0), 1.0)
    return FidelityReport(fidelity=f, error=1.0 - f, coincidence_probability=p, heralded_state=rho)


def heralded_state_closed_form(t: TransferCoefficients) -> np.ndarray:
    """Unit-norm two-ion state heralded by a (c_v, d_h) coincidence."""
    a = t.r_h * t.r_v
    b = t.t_h * t.t_v
    norm = math.sqrt(a * a + b * b)
    if norm == 0:
        raise NoCoincidenceError("both r_h r_v and t_h t_v vanish")
    return (a * _ket(DOWN, UP) - b * _ket(UP, DOWN)) / norm


def fidelity_closed_form(t: TransferCoefficients) -> FidelityReport:
    """Singlet fidelity ``(r_h r_v + t_h t_v)^2 / (2 (r_h^2 r_v^2 + t_h^2 t_v^2))``.

    The coincidence probability reported is that of the polarization-resolving
    model with unit input weights.
    """
    a = t.r_h * t.r_v
    b = t.t_h * t.t_v
    den = a * a + b * b
    if den == 0:
        raise NoCoincidenceError("both r_h r_v and t_h t_v vanish")
    f = 0.5 * (a + b) ** 2 / den
    psi = heralded_state_closed_form(t)
    return FidelityReport(
        fidelity=f,
        error=1.0 - f,
        coincidence_probability=0.5 * den,
        heralded_state=np.outer(psi, psi),
    )


def _splitter(t: TransferCoefficients) -> np.ndarray:
    """U[input port, pol, output mode index]."""
    U = np.zeros((2, 2, 4))
    for pol, (tt, rr) in ((H, (t.t_h, t.r_h)), (V, (t.t_v, t.r_v))):
        c, d = MODES.index(("c", pol)), MODES.index(("d", pol))
        U[0, pol, c], U[0, pol, d] = tt, rr
        U[1, pol, c], U[1, pol, d] = rr, -tt
    return U


def _two_photon_amplitudes(alpha: np.ndarray, beta: np.ndarray) -> dict:
    """Fock amplitudes of ``(sum alpha_i e_i^dag)(sum beta_j e_j^dag)|0>``."""
    out = {}
    for i, j in itertools.combinations_with_replacement(range(4), 2):
        if i == j:
            amp = math.sqrt(2) * alpha[i] * beta[i]
        else:
            amp = alpha[i] * beta[j] + alpha[j] * beta[i]
        out[(i, j)] = amp
    return out


def _coincidence_outcomes(detection: str):
    ch, cv, dh, dv = (MODES.index(m) for m in (("c", H), ("c", V), ("d", H), ("d", V)))
    if detection == DetectionModel.OPPOSITE_POLARIZATION_RESOLVING:
        return [(ch, dv), (cv, dh)]
    if detection == DetectionModel.BUCKET_COINCIDENCE:
        return [(ch, dh), (ch, dv), (cv, dh), (cv, dv)]
    raise ValueError(f"unknown detection model {detection!r}")


def oracle_coincidence(
    t: TransferCoefficients,
    input_weights=None,
    detection: str = DetectionModel.OPPOSITE_POLARIZATION_RESOLVING,
) -> FidelityReport:
    """Heralded two-ion state by exhaustive two-photon enumeration.

    ``input_weights[k][p]`` scales the amplitude of ion ``k``'s photon in
    polarization ``p`` (k: 0 = a, 1 = b; p: 0 = H, 1 = V) before the splitter.
    Every coincidence outcome is a separate detector click pattern, so the
    heralded state is the mixture over outcomes.
    """
    w = np.ones((2, 2)) if input_weights is None else np.asarray(input_weights, dtype=float)
    if w.shape != (2, 2) or np.any(w < 0) or np.any(w > 1):
        raise ValueError("input_weights must be a 2x2 array with entries in [0, 1]")
    U = _splitter(t)
    psi = emission_state()
    # amplitude[spin_a, spin_b][fock outcome]
    branches = {}
    for sa, pa, sb, pb in itertools.product(range(2), repeat=4):
        amp = psi[sa, pa] * psi[sb, pb] * w[0, pa] * w[1, pb]
        if amp == 0:
            continue
        fock = _two_photon_amplitudes(U[0, pa], U[1, pb])
        for key, val in fock.items():
            branches.setdefault(key, np.zeros(4))
            branches[key][2 * sa + sb] += amp * val
    rho = np.zeros((4, 4))
    for key in _coincidence_outcomes(detection):
        phi = branches.get(tuple(sorted(key)), np.zeros(4))
        rho += np.outer(phi, phi.conj())
    return _report(rho)


def error_with_coupling(
    t: TransferCoefficients,
    eta_te: float,
    eta_tm: float,
    detection: str = DetectionModel.OPPOSITE_POLARIZATION_RESOLVING,
) -> FidelityReport:
    """Heralded fidelity with fiber-to-chip power efficiencies per polarization.

    H couples as TE and V as TM; both ions see the same coupler.
    """
    for eta in (eta_te, eta_tm):
        if not (0 < eta <= 1):
            raise ValueError("coupling efficiencies must lie in (0, 1]")
    row = [math.sqrt(eta_te), math.sqrt(eta_tm)]
    return oracle_coincidence(t, [row, row], detection)
