"""Heralded ion-ion entanglement from imperfect coupler splits.

    python demos/03_heralded_fidelity.py
"""

from tflnbsa import DetectionModel, TransferCoefficients, error_with_coupling, fidelity_closed_form, oracle_coincidence

# Port powers in percent, (P3, P4) for TE then TM. Loss does not matter:
# each polarization is renormalized.
t = TransferCoefficients.from_splits(49.7, 48.9, 50.7, 48.3)

closed = fidelity_closed_form(t)
print(f"closed form      F = {closed.fidelity:.6f}   E = {closed.error:.3e}")

# Brute-force two-photon enumeration should agree exactly with the formula
# when the detectors resolve polarization.
res = oracle_coincidence(t, detection=DetectionModel.OPPOSITE_POLARIZATION_RESOLVING)
print(f"Fock enumeration F = {res.fidelity:.6f}   coincidence probability {res.coincidence_probability:.4f}")

# Counting every coincidence, whatever the polarization, admits the
# triplet component as well.
bucket = oracle_coincidence(t, detection=DetectionModel.BUCKET_COINCIDENCE)
print(f"bucket detection F = {bucket.fidelity:.6f}   coincidence probability {bucket.coincidence_probability:.4f}")

# Fiber coupling scales each heralding path by eta_TE * eta_TM, so with
# resolving detectors unequal efficiencies drop out of the fidelity.
for eta in ((1.0, 1.0), (0.6616, 0.6552), (0.9, 0.3)):
    r = error_with_coupling(t, *eta)
    print(f"eta = {eta}: E = {r.error:.3e}, heralding rate x {r.coincidence_probability / closed.coincidence_probability:.3f}")
