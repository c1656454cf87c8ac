"""Mixed-state and entanglement diagnostics.

These quantify what the SWAP-test objective cannot see: the estimator
converges to the Hilbert-Schmidt overlap Tr(rho sigma), which for mixed
states disagrees with the Uhlmann fidelity (I/2 vs itself scores 0.5 on
overlap but 1.0 on fidelity).  Reports produced here carry that distinction
explicitly.

Entropies are reported in bits (log base 2) unless the natural-log flag is
set.  Matrix square roots go through Hermitian eigendecomposition with
eigenvalue clamping at zero, which stays stable for near-singular inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import TOL, DensityMatrix, PureState, partial_trace

SWAP_DISCRIMINATION_BOUND = 0.75


@dataclass(frozen=True)
class EntropyReport:
    """Entanglement-entropy comparison for one reconstructed circuit."""

    circuit_id: str
    n_qubits: int
    partition: tuple
    target_entropy: float
    reconstructed_entropy: float
    units: str = "bits"

    CSV_HEADER = "circuit_id,n_qubits,partition,target_entropy,reconstructed_entropy,units"

    def csv_row(self) -> str:
        part = ";".join(str(q) for q in self.partition)
        return (
            f"{self.circuit_id},{self.n_qubits},{part},"
            f"{self.target_entropy!r},{self.reconstructed_entropy!r},{self.units}"
        )


def _clamped_eigvals(rho: DensityMatrix) -> np.ndarray:
    vals = np.linalg.eigvalsh(rho.entries)
    if vals.min() < -TOL.psd_slack:
        raise ValueError(
            f"matrix has eigenvalue {vals.min():.3e} below -{TOL.psd_slack}"
        )
    return np.clip(vals, 0.0, None)


def von_neumann_entropy(rho: DensityMatrix, natural_log: bool = False) -> float:
    """-sum lambda log lambda over the spectrum, with 0 log 0 := 0."""
    vals = _clamped_eigvals(rho)
    nz = vals[vals > 0.0]
    log = np.log(nz) if natural_log else np.log2(nz)
    return max(0.0, float(-np.sum(nz * log)))


def bipartite_entropy(psi: PureState, partition, natural_log: bool = False) -> float:
    """Entanglement entropy of a pure state across the given cut."""
    part = tuple(partition)
    if not part or len(set(part)) != len(part):
        raise ValueError(f"partition must be nonempty and distinct, got {part}")
    if set(part) == set(range(psi.n_qubits)):
        raise ValueError("partition must be a proper subset of the register")
    reduced = partial_trace(psi.density(), part)
    return von_neumann_entropy(reduced, natural_log=natural_log)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def uhlmann_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, clipped into [0, 1]."""
    if rho.n_qubits != sigma.n_qubits:
        raise ValueError(
            f"qubit-count mismatch: {rho.n_qubits} vs {sigma.n_qubits}"
        )
    root = _psd_sqrt(rho.entries)
    inner = root @ sigma.entries @ root
    inner = (inner + inner.conj().T) / 2.0
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    f = float(np.sum(np.sqrt(vals)) ** 2)
    return min(1.0, max(0.0, f))


def hs_overlap(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Tr(rho sigma): the quantity a SWAP test reports for mixed inputs."""
    if rho.n_qubits != sigma.n_qubits:
        raise ValueError(
            f"qubit-count mismatch: {rho.n_qubits} vs {sigma.n_qubits}"
        )
    return float(np.real(np.trace(rho.entries @ sigma.entries)))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) sum |eigenvalues| of rho - sigma."""
    if rho.n_qubits != sigma.n_qubits:
        raise ValueError(
            f"qubit-count mismatch: {rho.n_qubits} vs {sigma.n_qubits}"
        )
    vals = np.linalg.eigvalsh(rho.entries - sigma.entries)
    return float(0.5 * np.sum(np.abs(vals)))


def helstrom_success(rho: DensityMatrix, sigma: DensityMatrix) -> dict:
    """Both conventions for the optimal discrimination success probability.

    "one_minus_distance" is 1 - (1/2) Tr|rho - sigma|; "textbook" is the
    standard equal-prior value 1/2 + (1/4) Tr|rho - sigma|.  They disagree
    except at trace distance 1/2, and the first DECREASES as the states
    become more distinguishable, so reports must always say which one they
    quote.
    """
    d = trace_distance(rho, sigma)
    return {
        "one_minus_distance": 1.0 - d,
        "textbook": 0.5 + 0.5 * d,
    }


def swap_discrimination_bound() -> float:
    """Ceiling on SWAP-test-based state discrimination success (3/4)."""
    return SWAP_DISCRIMINATION_BOUND


def mixed_state_report(rho: DensityMatrix, sigma: DensityMatrix) -> dict:
    """All mixed-state diagnostics for one pair, with annotations.

    The notes call out the overlap-vs-fidelity divergence and flag any
    discrimination success quoted above the SWAP-test ceiling.
    """
    overlap = hs_overlap(rho, sigma)
    fid = uhlmann_fidelity(rho, sigma)
    dist = trace_distance(rho, sigma)
    hel = helstrom_success(rho, sigma)
    notes = []
    if abs(overlap - fid) > 1e-6:
        notes.append(
            "swap-test overlap and Uhlmann fidelity disagree: a SWAP-test "
            "objective optimizes the former, not the latter"
        )
    for label, value in hel.items():
        if value > SWAP_DISCRIMINATION_BOUND + 1e-12:
            notes.append(
                f"helstrom[{label}]={value:.4f} exceeds the SWAP-test "
                f"discrimination ceiling {SWAP_DISCRIMINATION_BOUND}; such success "
                "is unreachable through SWAP-test measurements"
            )
    return {
        "hs_overlap": overlap,
        "uhlmann_fidelity": fid,
        "trace_distance": dist,
        "helstrom_success": hel,
        "swap_discrimination_bound": SWAP_DISCRIMINATION_BOUND,
        "notes": notes,
    }
