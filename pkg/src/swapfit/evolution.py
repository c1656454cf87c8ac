"""Gradient-free evolutionary reconstruction driven by fidelity feedback.

One optimizer iteration: perturb the parameter vector into a population of
N candidates, score each with the SWAP-test signal, standardize the scores
into advantages, and move the mean by

    w <- w + alpha/(N sigma) * sum_i A_i z_i.

The per-epoch fidelity reported in traces is that of the decoded mean
vector w (the quantity the update steers); the best-scoring decoded state
seen so far is kept separately and returned as the solution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .metrics import uhlmann_fidelity
from .prep import Representation, TargetSpec
from .sim import PureState, RngStream
from .swap_test import FidelityMode, fidelity_oracle, score_candidate


@dataclass(frozen=True)
class ESParams:
    """Optimizer hyperparameters; defaults are the reference configuration."""

    population: int = 50
    sigma: float = 0.1
    alpha: float = 0.05
    max_iters: int = 100
    thresholds: tuple = (0.95, 0.99)
    representation: Representation = Representation.STATEVECTOR
    advantage_epsilon: float = 1e-8

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2 (standardization needs variance)")
        if self.sigma <= 0.0 or self.alpha <= 0.0:
            raise ValueError("sigma and alpha must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.thresholds:
            raise ValueError("at least one threshold is required")
        for t in self.thresholds:
            if not 0.0 < t <= 1.0:
                raise ValueError(f"thresholds must lie in (0, 1], got {t}")
        if self.advantage_epsilon <= 0.0:
            raise ValueError("advantage_epsilon must be positive")


@dataclass
class TrialRecord:
    """Everything recorded about one optimization run."""

    trial_id: int
    seed: int
    representation: str
    fidelity_mode: str
    epochs_to_threshold: dict
    final_fidelity: float
    oracle_fidelity: float
    fidelity_trace: list
    wall_time: float


def perturb_population(w: np.ndarray, params: ESParams,
                       rng: RngStream) -> list[tuple[np.ndarray, np.ndarray]]:
    """N pairs (z_i, w + sigma z_i) with z_i i.i.d. standard normal."""
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError("parameter vector contains non-finite entries")
    Z = rng.gen.normal(size=(params.population, w.shape[0]))
    return [(Z[i], w + params.sigma * Z[i]) for i in range(params.population)]


def standardized_advantages(fidelities, epsilon: float = 1e-8) -> np.ndarray:
    """A_i = (F_i - mean F) / (population std F + epsilon).

    All-equal scores give exactly zero advantages, so a converged or
    flat-landscape population leaves w untouched.
    """
    F = np.asarray(fidelities, dtype=float)
    if F.shape[0] < 2:
        raise ValueError("need at least two fidelities to standardize")
    return (F - F.mean()) / (F.std() + epsilon)


def es_update(w: np.ndarray, pairs, advantages, params: ESParams) -> np.ndarray:
    """The quoted update, vectorized: w + alpha/(N sigma) sum A_i z_i."""
    A = np.asarray(advantages, dtype=float)
    if len(pairs) != A.shape[0]:
        raise ValueError(f"{len(pairs)} pairs but {A.shape[0]} advantages")
    Z = np.stack([z for z, _ in pairs])
    step = (params.alpha / (params.population * params.sigma)) * (A @ Z)
    return np.asarray(w, dtype=float) + step


def _decode_resampling(w: np.ndarray, rep: Representation, n: int, rng: RngStream):
    """Decode w; on a degenerate vector (measure-zero event) redraw it."""
    for _ in range(100):
        try:
            return rep.decode(w, n), w
        except ValueError:  # pragma: no cover - requires a degenerate draw
            w = rng.gen.normal(size=w.shape[0])
    raise RuntimeError("could not decode a non-degenerate candidate")  # pragma: no cover


def run_es(target: TargetSpec, params: ESParams, mode: FidelityMode,
           rng: RngStream, trial_id: int = 0,
           objective: str = "swap") -> tuple[object, TrialRecord]:
    """Full optimization run; returns (solution state, TrialRecord).

    Epochs are 1-based.  Each epoch scores the decoded mean w first, so a
    lucky initialization can terminate at epoch 1 with a single-entry
    trace.  Stochastic modes stop on the sampled estimate; oracle_fidelity
    re-scores the returned solution analytically, so the record always
    carries the truthful reconstruction quality alongside the feedback the
    optimizer actually saw.
    """
    start = time.perf_counter()
    n = target.n_qubits
    rep = params.representation
    top = max(params.thresholds)
    w = rng.gen.normal(size=rep.param_length(n))
    epochs = {t: None for t in params.thresholds}
    trace: list[float] = []
    best_f = -np.inf
    best_state = None
    for epoch in range(1, params.max_iters + 1):
        try:
            state_w, w = _decode_resampling(w, rep, n, rng)
            f_w = score_candidate(state_w, target.state, mode, rng, objective)
        except Exception as exc:
            raise RuntimeError(f"fidelity evaluation failed at epoch {epoch}") from exc
        trace.append(f_w)
        if f_w > best_f:
            best_f, best_state = f_w, state_w
        for t in params.thresholds:
            if epochs[t] is None and f_w >= t:
                epochs[t] = epoch
        if f_w >= top:
            break
        pairs = perturb_population(w, params, rng)
        fids = []
        for z_i, w_i in pairs:
            try:
                cand, _ = _decode_resampling(w_i, rep, n, rng)
                fids.append(score_candidate(cand, target.state, mode, rng, objective))
            except RuntimeError:
                raise
            except Exception as exc:
                raise RuntimeError(
                    f"population evaluation failed at epoch {epoch}"
                ) from exc
        A = standardized_advantages(fids, params.advantage_epsilon)
        w = es_update(w, pairs, A, params)
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
        representation=rep.value,
        fidelity_mode=mode.label(),
        epochs_to_threshold=epochs,
        final_fidelity=trace[-1],
        oracle_fidelity=oracle_f,
        fidelity_trace=trace,
        wall_time=time.perf_counter() - start,
    )
    return solution, record
