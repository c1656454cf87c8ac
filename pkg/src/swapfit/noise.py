"""Kraus channels calibrated to the hardware-style error budget.

The model attaches a composite channel after every noisy basis-gate
application:

* single-qubit gates (id, rz, sx, x): bit flip then depolarizing,
* cx: two-qubit depolarizing then thermal relaxation on both qubits,
* measure: a classical flip of the outcome bit,
* reset: noiseless.

Channels are plain Kraus-operator lists; application embeds them on the
listed qubits with the same bit-masked kernels the simulator uses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .sim import (
    TOL,
    DensityMatrix,
    GateOp,
    PureState,
    RngStream,
    _apply_matrix_axis0,
    apply_gate,
    apply_gate_dm,
    reset_qubits,
)

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULIS_1Q = (_I2, _X, _Y, _Z)


@dataclass(frozen=True)
class KrausChannel:
    """A completely positive trace-preserving map in Kraus form."""

    arity: int
    operators: tuple
    name: str = ""

    def __post_init__(self):
        d = 2**self.arity
        for K in self.operators:
            if K.shape != (d, d):
                raise ValueError(
                    f"operator shape {K.shape} does not match arity {self.arity}"
                )
        res = self.completeness_residual()
        if res > TOL.structural:
            raise ValueError(f"channel {self.name!r} violates completeness ({res:.3e})")

    def completeness_residual(self) -> float:
        """max |sum K+K - I|; zero for an exactly trace-preserving map."""
        d = 2**self.arity
        acc = np.zeros((d, d), dtype=complex)
        for K in self.operators:
            acc += K.conj().T @ K
        return float(np.max(np.abs(acc - np.eye(d))))

    def is_identity(self) -> bool:
        d = 2**self.arity
        return len(self.operators) == 1 and bool(
            np.allclose(self.operators[0], np.eye(d), atol=1e-14)
        )


def _prune(ops: list, name: str, arity: int) -> KrausChannel:
    kept = tuple(K for K in ops if np.max(np.abs(K)) > 1e-16)
    return KrausChannel(arity=arity, operators=kept, name=name)


def identity_channel(arity: int = 1) -> KrausChannel:
    return KrausChannel(arity, (np.eye(2**arity, dtype=complex),), name="identity")


def bitflip_channel(p: float) -> KrausChannel:
    """{sqrt(1-p) I, sqrt(p) X}."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p}")
    return _prune(
        [math.sqrt(1.0 - p) * _I2, math.sqrt(p) * _X], name=f"bitflip({p})", arity=1
    )


def _pauli_basis(arity: int) -> list:
    basis = list(_PAULIS_1Q)
    for _ in range(arity - 1):
        basis = [np.kron(a, b) for a in basis for b in _PAULIS_1Q]
    return basis


def depolarizing_channel(p: float, arity: int = 1) -> KrausChannel:
    """rho -> (1-p) rho + p I/2^arity, as a weighted Pauli-basis Kraus set."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p}")
    if arity not in (1, 2):
        raise ValueError(f"arity must be 1 or 2, got {arity}")
    d = 2**arity
    basis = _pauli_basis(arity)
    w_id = math.sqrt(1.0 - p + p / d**2)
    w_rest = math.sqrt(p) / d
    ops = [w_id * basis[0]] + [w_rest * P for P in basis[1:]]
    return _prune(ops, name=f"depolarizing({p}, {arity}q)", arity=arity)


def thermal_relaxation_channel(t1_us: float, t2_us: float, t_gate_ns: float) -> KrausChannel:
    """Amplitude damping plus dephasing over one gate duration.

    gamma = 1 - exp(-t/T1) sets the damping; the dephasing weight is chosen
    so off-diagonal elements decay by exactly exp(-t/T2).
    """
    if t1_us <= 0.0:
        raise ValueError(f"T1 must be positive, got {t1_us}")
    if not 0.0 < t2_us <= 2.0 * t1_us:
        raise ValueError(f"T2 must satisfy 0 < T2 <= 2*T1, got T2={t2_us}, T1={t1_us}")
    if t_gate_ns < 0.0:
        raise ValueError(f"gate time must be nonnegative, got {t_gate_ns}")
    t = t_gate_ns * 1e-9
    gamma = 1.0 - math.exp(-t / (t1_us * 1e-6))
    a0 = np.array([[1, 0], [0, math.sqrt(1.0 - gamma)]], dtype=complex)
    a1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    # residual dephasing after damping already shrank the coherence
    decay = math.exp(-t / (t2_us * 1e-6)) / math.sqrt(1.0 - gamma)
    q = (1.0 - decay) / 2.0
    ops = [math.sqrt(1.0 - q) * a0, math.sqrt(q) * (_Z @ a0), a1]
    return _prune(ops, name=f"thermal(T1={t1_us}us, T2={t2_us}us, t={t_gate_ns}ns)", arity=1)


def tensor_channels(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    """Independent channels on adjacent registers; ``a`` on the lower indices."""
    ops = [np.kron(Ka, Kb) for Ka in a.operators for Kb in b.operators]
    return KrausChannel(a.arity + b.arity, tuple(ops), name=f"{a.name} (x) {b.name}")


def compose_channels(first: KrausChannel, second: KrausChannel) -> KrausChannel:
    """Channel equal to ``first`` then ``second``: operators {K_j K_i}."""
    if first.arity != second.arity:
        raise ValueError(
            f"arity mismatch: {first.arity} vs {second.arity}"
        )
    ops = [Kj @ Ki for Ki in first.operators for Kj in second.operators]
    return KrausChannel(
        first.arity, tuple(ops), name=f"{second.name} after {first.name}"
    )


def reduce_channel(ch: KrausChannel) -> KrausChannel:
    """Equivalent channel with at most 4^arity operators.

    Eigendecomposition of the Choi matrix; operators come out ordered by
    decreasing weight, which keeps trajectory sampling fast.  Action agrees
    with the original within numerical precision.
    """
    d = 2**ch.arity
    choi = np.zeros((d * d, d * d), dtype=complex)
    for K in ch.operators:
        v = K.reshape(-1)
        choi += np.outer(v, v.conj())
    vals, vecs = np.linalg.eigh(choi)
    ops = []
    for lam, v in sorted(zip(vals, vecs.T), key=lambda t: -t[0]):
        if lam > 1e-14:
            ops.append(math.sqrt(lam) * v.reshape(d, d))
    return KrausChannel(ch.arity, tuple(ops), name=f"{ch.name} (reduced)")


def apply_channel_dm(rho: DensityMatrix, ch: KrausChannel,
                     qubits: Sequence[int]) -> DensityMatrix:
    """rho -> sum_K K rho K+ with the channel embedded on ``qubits``."""
    if len(qubits) != ch.arity:
        raise ValueError(f"channel arity {ch.arity} but {len(qubits)} qubit(s) listed")
    n = rho.n_qubits
    acc = None
    for K in ch.operators:
        term = _apply_matrix_axis0(rho.entries, n, tuple(qubits), K)
        term = _apply_matrix_axis0(term.T, n, tuple(qubits), K.conj()).T
        acc = term if acc is None else acc + term
    return DensityMatrix(n, acc, check=False)


def channel_superop(ch: KrausChannel) -> np.ndarray:
    """Transfer matrix S with vec(E(rho)) = S vec(rho), row-major vec.

    One matrix product replaces the whole Kraus sum, which matters in the
    optimization loops where a channel is applied thousands of times.
    """
    d = 2**ch.arity
    s = np.zeros((d * d, d * d), dtype=complex)
    for K in ch.operators:
        s += np.kron(K, K.conj())
    return s


def apply_superop_dm(entries: np.ndarray, n_qubits: int, qubits: Sequence[int],
                     superop: np.ndarray) -> np.ndarray:
    """Apply a transfer matrix to the row/column axes of the listed qubits.

    The adjoint map (Heisenberg picture, for pulling observables backward
    through a channel) is the same call with ``superop.conj().T``.
    """
    k = len(qubits)
    t = entries.reshape((2,) * (2 * n_qubits))
    src = tuple(qubits) + tuple(n_qubits + q for q in qubits)
    dst = tuple(range(2 * k))
    t = np.moveaxis(t, src, dst)
    rest = t.shape[2 * k:]
    out = (superop @ t.reshape(1 << (2 * k), -1)).reshape((2,) * (2 * k) + rest)
    out = np.moveaxis(out, dst, src)
    dim = 1 << n_qubits
    return np.ascontiguousarray(out.reshape(dim, dim))


def sample_trajectory_op(state: PureState, ch: KrausChannel,
                         qubits: Sequence[int], rng: RngStream) -> PureState:
    """Monte-Carlo unraveling: pick K with probability |K|psi>|^2.

    Shot-averaging |out><out| converges to the density-matrix channel.
    """
    if len(qubits) != ch.arity:
        raise ValueError(f"channel arity {ch.arity} but {len(qubits)} qubit(s) listed")
    n = state.n_qubits
    u = rng.gen.random()
    acc = 0.0
    chosen = None
    last = None
    for K in ch.operators:
        cand = _apply_matrix_axis0(state.amplitudes, n, tuple(qubits), K)
        w = float(np.real(np.vdot(cand, cand)))
        last = (cand, w)
        acc += w
        if u < acc:
            chosen = (cand, w)
            break
    if chosen is None:
        # u landed in the completeness rounding gap; take the final operator
        chosen = last
    cand, w = chosen
    if w < 1e-30:
        raise RuntimeError("trajectory sampling selected a zero-probability branch")
    return PureState(n, cand / math.sqrt(w), check=False)


# ---------------------------------------------------------------------------
# The calibrated model
# ---------------------------------------------------------------------------

NOISY_KINDS = frozenset({"id", "rz", "sx", "x", "cx", "measure"})


@dataclass
class NoiseModelSpec:
    """Scalar error budget plus the composite channels built from it."""

    p_bitflip: float = 0.001
    p_dep1: float = 0.002
    p_dep2: float = 0.02
    t1_us: float = 80.0
    t2_us: float = 100.0
    t_gate_ns: float = 50.0

    def __post_init__(self):
        for name in ("p_bitflip", "p_dep1", "p_dep2"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if not 0.0 < self.t2_us <= 2.0 * self.t1_us:
            raise ValueError(
                f"T2 must satisfy 0 < T2 <= 2*T1, got T2={self.t2_us}, T1={self.t1_us}"
            )

    @property
    def is_noiseless(self) -> bool:
        return (
            self.p_bitflip == 0.0
            and self.p_dep1 == 0.0
            and self.p_dep2 == 0.0
            and self.t_gate_ns == 0.0
        )

    @cached_property
    def single_qubit_channel(self) -> KrausChannel:
        """Composite for id/rz/sx/x: bit flip, then depolarizing."""
        return compose_channels(
            bitflip_channel(self.p_bitflip), depolarizing_channel(self.p_dep1, 1)
        )

    @cached_property
    def cx_channel(self) -> KrausChannel:
        """Composite for cx: two-qubit depolarizing, then thermal on both."""
        thermal = thermal_relaxation_channel(self.t1_us, self.t2_us, self.t_gate_ns)
        return compose_channels(
            depolarizing_channel(self.p_dep2, 2), tensor_channels(thermal, thermal)
        )

    @cached_property
    def _single_qubit_reduced(self) -> KrausChannel:
        return reduce_channel(self.single_qubit_channel)

    @cached_property
    def _cx_reduced(self) -> KrausChannel:
        return reduce_channel(self.cx_channel)

    @cached_property
    def _single_qubit_superop(self) -> np.ndarray:
        return channel_superop(self._single_qubit_reduced)

    @cached_property
    def _cx_superop(self) -> np.ndarray:
        return channel_superop(self._cx_reduced)

    def channel_for(self, kind: str, *, reduced: bool = True) -> KrausChannel | None:
        """Channel attached after a gate of this kind, or None if noiseless."""
        if self.is_noiseless or kind not in NOISY_KINDS:
            return None
        if kind == "cx":
            return self._cx_reduced if reduced else self.cx_channel
        if kind == "measure":
            return None  # classical outcome flip, handled by flip_readout
        return self._single_qubit_reduced if reduced else self.single_qubit_channel

    def superop_for(self, kind: str) -> np.ndarray | None:
        """Transfer matrix of channel_for(kind), or None where that is None."""
        if self.is_noiseless or kind not in NOISY_KINDS or kind == "measure":
            return None
        return self._cx_superop if kind == "cx" else self._single_qubit_superop

    def flip_readout(self, p0: float) -> float:
        """Probability of reading 0 after the classical measurement flip."""
        return p0 * (1.0 - self.p_bitflip) + (1.0 - p0) * self.p_bitflip

    def to_json(self) -> str:
        return json.dumps(
            {
                "p_bitflip": self.p_bitflip,
                "p_dep1": self.p_dep1,
                "p_dep2": self.p_dep2,
                "t1_us": self.t1_us,
                "t2_us": self.t2_us,
                "t_gate_ns": self.t_gate_ns,
            }
        )

    @staticmethod
    def from_json(text: str) -> "NoiseModelSpec":
        raw = json.loads(text)
        return NoiseModelSpec(
            p_bitflip=float(raw["p_bitflip"]),
            p_dep1=float(raw["p_dep1"]),
            p_dep2=float(raw["p_dep2"]),
            t1_us=float(raw["t1_us"]),
            t2_us=float(raw["t2_us"]),
            t_gate_ns=float(raw["t_gate_ns"]),
        )


def default_noise_model() -> NoiseModelSpec:
    """The calibrated error budget used throughout: see the class defaults."""
    return NoiseModelSpec()


def noiseless_model() -> NoiseModelSpec:
    return NoiseModelSpec(p_bitflip=0.0, p_dep1=0.0, p_dep2=0.0, t_gate_ns=0.0)


def delay_channel(duration_ns: float, model: NoiseModelSpec) -> KrausChannel:
    """Idle-qubit decay over an explicit duration (experimental).

    A delay instruction performs no rotation, so its noise is thermal
    relaxation alone, evaluated over the delay duration instead of a gate
    time.
    """
    return thermal_relaxation_channel(model.t1_us, model.t2_us, duration_ns)


# ---------------------------------------------------------------------------
# Noisy executors
# ---------------------------------------------------------------------------


def run_circuit_dm_noisy(rho: DensityMatrix, ops, model: NoiseModelSpec) -> DensityMatrix:
    """Density-matrix evolution with the model's channel after each gate.

    The op list must already be lowered to {rz, sx, x, cx} (plus reset);
    anything else is rejected so noise cannot silently skip a gate.
    """
    out = rho
    for op in ops:
        if op.kind in ("rz", "sx", "x", "cx"):
            out = apply_gate_dm(out, op)
            s = model.superop_for(op.kind)
            if s is not None:
                out = DensityMatrix(
                    out.n_qubits,
                    apply_superop_dm(out.entries, out.n_qubits, op.qubits, s),
                    check=False,
                )
        elif op.kind == "reset":
            out = reset_qubits(out, op.qubits, None)
        else:
            raise ValueError(
                f"op kind {op.kind!r} is not part of the noisy basis; lower the circuit first"
            )
    return out


def run_circuit_trajectory(state: PureState, ops, model: NoiseModelSpec,
                           rng: RngStream) -> PureState:
    """One stochastic pure-state trajectory through a noisy circuit."""
    out = state
    for op in ops:
        if op.kind in ("rz", "sx", "x", "cx"):
            out = apply_gate(out, op)
            ch = model.channel_for(op.kind)
            if ch is not None:
                out = sample_trajectory_op(out, ch, op.qubits, rng)
        elif op.kind == "reset":
            out = reset_qubits(out, op.qubits, rng)
        else:
            raise ValueError(
                f"op kind {op.kind!r} is not part of the noisy basis; lower the circuit first"
            )
    return out
