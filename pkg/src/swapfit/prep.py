"""Target-state generation, Mottonen synthesis, and parameter decoding.

Three candidate representations are supported, each decoded from a flat real
parameter vector:

* statevector: length 2*2^n, first half real parts, second half imaginary.
* unitary: length 2*4^n, decoded matrix projected to the nearest unitary by
  polar decomposition; the candidate state is U|0...0> (U's first column).
* density: length 2*4^n, decoded matrix L mapped to rho = L L+ / Tr(L L+),
  which is PSD and trace-1 unconditionally.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sim import DensityMatrix, GateOp, PureState, RngStream, lower_ry

MAX_TARGET_QUBITS = 10


class Representation(enum.Enum):
    """How a flat real parameter vector is interpreted as a quantum state."""

    STATEVECTOR = "statevector"
    UNITARY = "unitary"
    DENSITY = "density"

    def param_length(self, n_qubits: int) -> int:
        d = 2**n_qubits
        return 2 * d if self is Representation.STATEVECTOR else 2 * d * d

    def decode(self, w: np.ndarray, n_qubits: int):
        if self is Representation.STATEVECTOR:
            return decode_statevector(w, n_qubits)
        if self is Representation.UNITARY:
            return decode_unitary(w, n_qubits)
        return decode_density(w, n_qubits)


@dataclass(frozen=True)
class TargetSpec:
    """A target state together with the seed that generated it."""

    n_qubits: int
    state: object  # PureState or DensityMatrix
    seed: int | None = None

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_TARGET_QUBITS:
            raise ValueError(
                f"n_qubits must be in [1, {MAX_TARGET_QUBITS}], got {self.n_qubits}"
            )
        if getattr(self.state, "n_qubits", self.n_qubits) != self.n_qubits:
            raise ValueError(
                f"state is on {self.state.n_qubits} qubit(s), spec says {self.n_qubits}"
            )

    def to_json(self) -> str:
        if isinstance(self.state, PureState):
            flat = self.state.amplitudes
            payload = {
                "n_qubits": self.n_qubits,
                "seed": self.seed,
                "re": flat.real.tolist(),
                "im": flat.imag.tolist(),
            }
        else:
            flat = self.state.entries.reshape(-1)
            payload = {
                "n_qubits": self.n_qubits,
                "seed": self.seed,
                "kind": "density",
                "re": flat.real.tolist(),
                "im": flat.imag.tolist(),
            }
        return json.dumps(payload)

    @staticmethod
    def from_json(text: str) -> "TargetSpec":
        raw = json.loads(text)
        n = int(raw["n_qubits"])
        flat = np.asarray(raw["re"], dtype=float) + 1j * np.asarray(raw["im"], dtype=float)
        if raw.get("kind") == "density":
            state = DensityMatrix(n, flat.reshape(2**n, 2**n))
        else:
            state = PureState(n, flat)
        return TargetSpec(n_qubits=n, state=state, seed=raw.get("seed"))


def sample_random_state(n_qubits: int, rng: RngStream) -> PureState:
    """Draw a normalized random state: i.i.d. complex Gaussian amplitudes."""
    if not 1 <= n_qubits <= MAX_TARGET_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_TARGET_QUBITS}], got {n_qubits}")
    d = 2**n_qubits
    amps = rng.gen.normal(size=d) + 1j * rng.gen.normal(size=d)
    norm = np.linalg.norm(amps)
    while norm < 1e-12:  # pragma: no cover - probability ~0
        amps = rng.gen.normal(size=d) + 1j * rng.gen.normal(size=d)
        norm = np.linalg.norm(amps)
    return PureState(n_qubits, amps / norm, check=False)


def sample_random_density(n_qubits: int, rng: RngStream) -> DensityMatrix:
    """Draw a full-rank random mixed state via rho = L L+ / Tr(L L+)."""
    if not 1 <= n_qubits <= MAX_TARGET_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_TARGET_QUBITS}], got {n_qubits}")
    d = 2**n_qubits
    L = rng.gen.normal(size=(d, d)) + 1j * rng.gen.normal(size=(d, d))
    rho = L @ L.conj().T
    return DensityMatrix(n_qubits, rho / rho.trace(), check=False)


# ---------------------------------------------------------------------------
# Mottonen state preparation
# ---------------------------------------------------------------------------
#
# The state is split into magnitudes and phases, a[i] = |a[i]| e^{i w[i]}.
# Magnitudes are fixed by a cascade of uniformly controlled RY rotations
# (stage k rotates qubit n-k, controlled on all earlier qubits), then phases
# by the analogous RZ cascade.  Each uniformly controlled rotation is
# expanded with the Gray-code walk, so the emitted gate list uses only
# {rz, sx, x, cx}.  A single global phase remains, which nothing downstream
# can observe.


def _gray(i: int) -> int:
    return i ^ (i >> 1)


@lru_cache(maxsize=None)
def _angle_mixer(m: int) -> np.ndarray:
    """M with M[i, j] = (-1)^popcount(j & gray(i)) / m; maps multiplexer
    angles to the rotation angles of the Gray-code expansion."""
    M = np.empty((m, m))
    for i in range(m):
        gi = _gray(i)
        for j in range(m):
            M[i, j] = (-1) ** int(bin(j & gi).count("1"))
    return M / m


def _alpha_y(a_abs: np.ndarray, n: int, k: int) -> np.ndarray:
    out = np.zeros(2 ** (n - k))
    half = 2 ** (k - 1)
    for j in range(out.shape[0]):
        num = float(np.sum(a_abs[(2 * j + 1) * half : (2 * j + 2) * half] ** 2))
        den = float(np.sum(a_abs[2 * j * half : (2 * j + 2) * half] ** 2))
        if den > 0.0:
            out[j] = 2.0 * math.asin(min(1.0, math.sqrt(num / den)))
    return out


def _alpha_z(omega: np.ndarray, n: int, k: int) -> np.ndarray:
    out = np.zeros(2 ** (n - k))
    half = 2 ** (k - 1)
    for j in range(out.shape[0]):
        upper = omega[(2 * j + 1) * half : (2 * j + 2) * half]
        lower = omega[2 * j * half : (2 * j + 1) * half]
        out[j] = float(np.sum(upper - lower)) / half
    return out


def _multiplexer_ops(angles: np.ndarray, target: int, axis: str) -> list[GateOp]:
    """Gray-code expansion of a uniformly controlled RY or RZ rotation.

    Controls are qubits 0..target-1; the Gray-code bit p that flips between
    consecutive rotation slots selects control qubit target-1-p.
    """
    thetas = _angle_mixer(len(angles)) @ np.asarray(angles, dtype=float)
    m = len(thetas)

    def rot(theta: float) -> list[GateOp]:
        if axis == "y":
            return lower_ry(theta, target)
        return [GateOp.rz(theta, target)]

    if m == 1:
        return rot(float(thetas[0]))
    ops: list[GateOp] = []
    for i in range(m):
        ops += rot(float(thetas[i]))
        changed = _gray(i) ^ _gray((i + 1) % m)
        control = target - 1 - (changed.bit_length() - 1)
        ops.append(GateOp.cx(control, target))
    return ops


def mottonen_circuit(target: PureState) -> list[GateOp]:
    """Gate list over {rz, sx, x, cx} preparing ``target`` from |0...0>.

    The result matches the target up to global phase; all-zero rotation
    stages are dropped, so |0...0> compiles to an empty list.
    """
    norm = np.linalg.norm(target.amplitudes)
    if norm < 1e-12:
        raise ValueError("cannot synthesize a circuit for a zero-norm state")
    n = target.n_qubits
    a_abs = np.abs(target.amplitudes)
    omega = np.angle(target.amplitudes)
    ops: list[GateOp] = []
    for k in range(n, 0, -1):
        ay = _alpha_y(a_abs, n, k)
        if np.any(ay != 0.0):
            ops += _multiplexer_ops(ay, n - k, "y")
    if np.any(omega != 0.0):
        for k in range(n, 0, -1):
            az = _alpha_z(omega, n, k)
            if np.any(az != 0.0):
                ops += _multiplexer_ops(az, n - k, "z")
    return ops


# ---------------------------------------------------------------------------
# Parameter decoding
# ---------------------------------------------------------------------------


def _split_complex(w: np.ndarray, half: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (2 * half,):
        raise ValueError(f"parameter vector has shape {w.shape}, expected ({2 * half},)")
    return w[:half] + 1j * w[half:]


def decode_statevector(w: np.ndarray, n_qubits: int) -> PureState:
    """First half real parts, second half imaginary parts, normalized."""
    c = _split_complex(w, 2**n_qubits)
    norm = np.linalg.norm(c)
    if norm <= 1e-12:
        raise ValueError("parameter vector has near-zero norm; resample the candidate")
    return PureState(n_qubits, c / norm, check=False)


def decode_unitary(w: np.ndarray, n_qubits: int) -> PureState:
    """Project the decoded matrix to the nearest unitary, return U|0...0>.

    Polar projection U = M (M+M)^{-1/2} via SVD; the prepared state is U's
    first column.
    """
    d = 2**n_qubits
    M = _split_complex(w, d * d).reshape(d, d)
    u, s, vh = np.linalg.svd(M)
    if s[-1] <= 1e-10:
        raise ValueError("decoded matrix is singular; resample the candidate")
    col = (u @ vh)[:, 0]
    return PureState(n_qubits, col, check=False)


def decode_density(w: np.ndarray, n_qubits: int) -> DensityMatrix:
    """rho = L L+ / Tr(L L+) from the decoded factor L."""
    d = 2**n_qubits
    L = _split_complex(w, d * d).reshape(d, d)
    rho = L @ L.conj().T
    tr = rho.trace().real
    if tr <= 1e-12:
        raise ValueError("decoded factor is numerically zero; resample the candidate")
    return DensityMatrix(n_qubits, rho / tr, check=False)


def prepare_on(n_qubits: int, target: PureState, offset: int = 0) -> list[GateOp]:
    """Mottonen ops for ``target`` placed at qubit ``offset`` of a wider register."""
    ops = mottonen_circuit(target)
    if offset == 0:
        return ops
    return [op.shifted(offset) for op in ops]
