"""Gradient-based generator: an MLP trained through the fidelity signal.

The network maps a 256-dimensional latent vector to the raw parameter
vector of the chosen representation.  No autodiff framework is involved:
the loss 1 - F is differentiated with respect to the raw OUTPUT by
symmetric finite differences through the SWAP test (2 * dim extra circuit
evaluations per epoch), and that output gradient is backpropagated through
the network analytically.  Adam consumes the result after multiplication
by a constant scaling factor, which compensates for the tiny magnitude of
fidelity differences.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .evolution import TrialRecord
from .metrics import uhlmann_fidelity
from .prep import Representation, TargetSpec
from .sim import PureState, RngStream
from .swap_test import FidelityMode, fidelity_oracle, score_candidate

N_WEIGHT_LAYERS = 6
HIDDEN_WIDTHS = (512, 512, 256, 128, 64)


@dataclass(frozen=True)
class GeneratorConfig:
    """Architecture and training hyperparameters."""

    layer_widths: tuple  # output width of each of the 6 weight layers
    latent_dim: int = 256
    learning_rate: float = 1e-4
    adam_betas: tuple = (0.9, 0.999)
    adam_epsilon: float = 1e-8
    fd_epsilon: float = 1e-3
    scaling_factor: float = 100.0
    max_epochs: int = 500
    latent_mode: str = "resample"  # or "fixed"
    thresholds: tuple = (0.95, 0.99)
    stop_threshold: float = 0.999

    def __post_init__(self):
        if len(self.layer_widths) != N_WEIGHT_LAYERS:
            raise ValueError(
                f"expected {N_WEIGHT_LAYERS} weight layers, got {len(self.layer_widths)}"
            )
        if any(wd <= 0 for wd in self.layer_widths):
            raise ValueError("layer widths must be strictly positive")
        if self.latent_dim <= 0:
            raise ValueError("latent_dim must be positive")
        if self.fd_epsilon <= 0.0:
            raise ValueError("fd_epsilon must be positive")
        if self.scaling_factor <= 0.0:
            raise ValueError("scaling_factor must be positive")
        if self.latent_mode not in ("resample", "fixed"):
            raise ValueError(f"unknown latent_mode {self.latent_mode!r}")

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]


def default_config(n_qubits: int, representation: Representation,
                   **overrides) -> GeneratorConfig:
    """The reference architecture: 256 -> 512 -> 512 -> 256 -> 128 -> 64 -> out."""
    widths = HIDDEN_WIDTHS + (representation.param_length(n_qubits),)
    return GeneratorConfig(layer_widths=widths, **overrides)


@dataclass
class MlpParams:
    """Weights, biases, and Adam state; shapes follow the config chain."""

    weights: list  # W_k with shape (out_k, in_k)
    biases: list
    m_weights: list = field(default_factory=list)
    m_biases: list = field(default_factory=list)
    v_weights: list = field(default_factory=list)
    v_biases: list = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if not self.m_weights:
            self.m_weights = [np.zeros_like(W) for W in self.weights]
            self.m_biases = [np.zeros_like(b) for b in self.biases]
            self.v_weights = [np.zeros_like(W) for W in self.weights]
            self.v_biases = [np.zeros_like(b) for b in self.biases]


def init_mlp(config: GeneratorConfig, rng: RngStream) -> MlpParams:
    """Uniform fan-in initialization: U(-1/sqrt(fan_in), +1/sqrt(fan_in))."""
    sizes = (config.latent_dim,) + tuple(config.layer_widths)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.gen.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.gen.uniform(-bound, bound, size=fan_out))
    return MlpParams(weights=weights, biases=biases)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact Gaussian-CDF GELU: x * Phi(x)."""
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    phi = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return 0.5 * (1.0 + erf(x / math.sqrt(2.0))) + x * phi


@dataclass
class ForwardCache:
    """Activation record from one forward pass, input to backprop."""

    z: np.ndarray
    pre_activations: list
    activations: list  # activations[0] is z itself


def mlp_forward(params: MlpParams, z: np.ndarray, return_cache: bool = False):
    """Affine -> GELU chain; the last layer stays affine."""
    z = np.asarray(z, dtype=float)
    if z.shape != (params.weights[0].shape[1],):
        raise ValueError(
            f"latent shape {z.shape} does not match input width {params.weights[0].shape[1]}"
        )
    h = z
    pres, acts = [], [h]
    last = len(params.weights) - 1
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        a = W @ h + b
        pres.append(a)
        h = gelu(a) if k < last else a
        acts.append(h)
    if return_cache:
        return h, ForwardCache(z=z, pre_activations=pres, activations=acts)
    return h


def fd_gradient(loss_at, raw: np.ndarray, fd_epsilon: float) -> np.ndarray:
    """Symmetric finite differences: exactly 2*dim loss evaluations."""
    if fd_epsilon <= 0.0:
        raise ValueError("fd_epsilon must be positive")
    raw = np.asarray(raw, dtype=float)
    g = np.zeros_like(raw)
    for k in range(raw.shape[0]):
        probe = raw.copy()
        probe[k] = raw[k] + fd_epsilon
        up = loss_at(probe)
        probe[k] = raw[k] - fd_epsilon
        down = loss_at(probe)
        if not (np.isfinite(up) and np.isfinite(down)):
            raise ValueError(f"non-finite loss at coordinate {k}: {up}, {down}")
        g[k] = (up - down) / (2.0 * fd_epsilon)
    return g


def mlp_backward(params: MlpParams, cache: ForwardCache,
                 output_gradient: np.ndarray) -> dict:
    """Reverse-mode chain rule from the raw-output gradient to all parameters."""
    if cache is None:
        raise ValueError("mlp_backward requires the ForwardCache from mlp_forward")
    delta = np.asarray(output_gradient, dtype=float)
    if delta.shape != (params.weights[-1].shape[0],):
        raise ValueError(
            f"output gradient shape {delta.shape} does not match "
            f"output width {params.weights[-1].shape[0]}"
        )
    n_layers = len(params.weights)
    dW = [None] * n_layers
    db = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        if k < n_layers - 1:
            delta = delta * gelu_grad(cache.pre_activations[k])
        dW[k] = np.outer(delta, cache.activations[k])
        db[k] = delta.copy()
        if k > 0:
            delta = params.weights[k].T @ delta
    return {"weights": dW, "biases": db}


def adam_step(params: MlpParams, grads: dict, config: GeneratorConfig) -> MlpParams:
    """In-place Adam update; gradients are scaled by scaling_factor first."""
    b1, b2 = config.adam_betas
    lr, eps, s = config.learning_rate, config.adam_epsilon, config.scaling_factor
    params.step += 1
    t = params.step
    for k in range(len(params.weights)):
        for p, g, m, v in (
            (params.weights[k], grads["weights"][k], params.m_weights[k], params.v_weights[k]),
            (params.biases[k], grads["biases"][k], params.m_biases[k], params.v_biases[k]),
        ):
            gs = s * g
            m *= b1
            m += (1.0 - b1) * gs
            v *= b2
            v += (1.0 - b2) * gs * gs
            m_hat = m / (1.0 - b1**t)
            v_hat = v / (1.0 - b2**t)
            p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def train_generator(target: TargetSpec, config: GeneratorConfig,
                    mode: FidelityMode, rng: RngStream,
                    representation: Representation = Representation.STATEVECTOR,
                    trial_id: int = 0,
                    objective: str = "swap") -> tuple[object, MlpParams, TrialRecord]:
    """Train until the stop threshold or max_epochs; returns the best state.

    Per epoch: draw (or reuse) the latent, forward, decode, score through
    the SWAP signal, finite-difference the loss on the raw output, backprop,
    Adam.  The trace holds the pre-update fidelity of each epoch's decoded
    output, so early-stop bookkeeping matches the evolutionary records.
    """
    if config.output_dim != representation.param_length(target.n_qubits):
        raise ValueError(
            f"config output width {config.output_dim} does not fit "
            f"{representation.value} on {target.n_qubits} qubit(s)"
        )
    start = time.perf_counter()
    params = init_mlp(config, rng)
    fixed_z = rng.gen.random(config.latent_dim)
    n = target.n_qubits
    epochs = {t: None for t in config.thresholds}
    trace: list[float] = []
    best_f = -np.inf
    best_state = None

    def loss_at(raw_vec: np.ndarray) -> float:
        state = representation.decode(raw_vec, n)
        return 1.0 - score_candidate(state, target.state, mode, rng, objective)

    for epoch in range(1, config.max_epochs + 1):
        try:
            z = fixed_z if config.latent_mode == "fixed" else rng.gen.random(config.latent_dim)
            raw, cache = mlp_forward(params, z, return_cache=True)
            state = representation.decode(raw, n)
            f = score_candidate(state, target.state, mode, rng, objective)
            trace.append(f)
            if f > best_f:
                best_f, best_state = f, state
            for t in config.thresholds:
                if epochs[t] is None and f >= t:
                    epochs[t] = epoch
            if f >= config.stop_threshold:
                break
            g_out = fd_gradient(loss_at, raw, config.fd_epsilon)
            grads = mlp_backward(params, cache, g_out)
            params = adam_step(params, grads, config)
        except RuntimeError:
            raise
        except Exception as exc:
            raise RuntimeError(f"training failed at epoch {epoch}") from exc
    solution = best_state
    if isinstance(solution, PureState) and isinstance(target.state, PureState):
        oracle_f = fidelity_oracle(solution, target.state)
    else:
        rho = solution.density() if isinstance(solution, PureState) else solution
        sig = (
            target.state.density()
            if isinstance(target.state, PureState)
            else target.state
        )
        oracle_f = uhlmann_fidelity(rho, sig)
    record = TrialRecord(
        trial_id=trial_id,
        seed=rng.seed,
        representation=representation.value,
        fidelity_mode=mode.label(),
        epochs_to_threshold=epochs,
        final_fidelity=trace[-1],
        oracle_fidelity=oracle_f,
        fidelity_trace=trace,
        wall_time=time.perf_counter() - start,
    )
    return solution, params, record


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def checkpoint_to_json(params: MlpParams) -> str:
    """JSON snapshot: shapes, row-major values, Adam moments, step counter.

    Python's shortest-round-trip float repr makes the load bit-exact.
    """
    payload = {
        "shapes": [list(W.shape) for W in params.weights],
        "weights": [W.reshape(-1).tolist() for W in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "m_weights": [m.reshape(-1).tolist() for m in params.m_weights],
        "m_biases": [m.tolist() for m in params.m_biases],
        "v_weights": [v.reshape(-1).tolist() for v in params.v_weights],
        "v_biases": [v.tolist() for v in params.v_biases],
        "step": params.step,
    }
    return json.dumps(payload)


def checkpoint_from_json(text: str) -> MlpParams:
    raw = json.loads(text)
    shapes = [tuple(s) for s in raw["shapes"]]

    def mats(key):
        return [
            np.asarray(vals, dtype=float).reshape(shape)
            for vals, shape in zip(raw[key], shapes)
        ]

    def vecs(key):
        return [np.asarray(vals, dtype=float) for vals in raw[key]]

    return MlpParams(
        weights=mats("weights"),
        biases=vecs("biases"),
        m_weights=mats("m_weights"),
        m_biases=vecs("m_biases"),
        v_weights=mats("v_weights"),
        v_biases=vecs("v_biases"),
        step=int(raw["step"]),
    )
