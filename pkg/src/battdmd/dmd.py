"""Autonomous operator identification: fit A with Xp ~= A X, spectrum, open-loop rollout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingSpec, SnapshotSet
from .lowrank import DEFAULT_RANK_POLICY, RankPolicy, pinv_apply, truncated_svd

DIVERGENCE_LIMIT = 1e6  # abort rollout once any state entry passes this magnitude


class DivergenceError(RuntimeError):
    """Open-loop rollout left the finite/bounded regime.

    Carries the 1-based step index at which the guard tripped and the states
    computed up to (not including) that step.
    """

    def __init__(self, step: int, states: np.ndarray, message: str | None = None):
        super().__init__(message or f"rollout diverged at step {step}")
        self.step = step
        self.states = states


def check_state(x: np.ndarray, step: int, states: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise DivergenceError(step, states[:step], f"non-finite state at step {step}; rollout truncated")
    peak = float(np.max(np.abs(x)))
    if peak > DIVERGENCE_LIMIT:
        raise DivergenceError(
            step, states[:step],
            f"state magnitude {peak:.3g} exceeds {DIVERGENCE_LIMIT:g} at step {step}; rollout truncated",
        )


@dataclass(frozen=True)
class DmdModel:
    """Best-fit one-step operator A (m x m) over Hankel states."""

    A: np.ndarray
    spec: EmbeddingSpec
    fit_residual: float
    rank_used: int

    @property
    def kind(self) -> str:
        return "dmd"

    @property
    def state_dim(self) -> int:
        return int(self.A.shape[0])


@dataclass(frozen=True)
class Spectrum:
    """Poles of the fitted operator, sorted by descending magnitude."""

    eigenvalues: np.ndarray
    modes: np.ndarray | None = None


def fit_dmd(snap: SnapshotSet, policy: RankPolicy = DEFAULT_RANK_POLICY) -> DmdModel:
    """Least-squares operator A = Xp V diag(1/s) U^T from the truncated SVD of X.

    Minimizes ||Xp - A X||_F over the retained subspace; the achieved residual
    and retained rank are recorded on the model.
    """
    if snap.U is not None:
        raise ValueError("snapshot set carries an input block; use fit_dmdc_full/fit_dmdc_reduced")
    if snap.n < 1:
        raise ValueError("snapshot set has no columns")
    try:
        f = truncated_svd(snap.X, policy)
    except ValueError as exc:
        raise ValueError(f"degenerate snapshots: {exc}") from None
    A = pinv_apply(f, snap.Xp)
    residual = float(np.linalg.norm(snap.Xp - A @ snap.X))
    return DmdModel(A=A, spec=snap.spec, fit_residual=residual, rank_used=f.rank)


def _eig_order(w: np.ndarray) -> np.ndarray:
    # descending |w|, then descending real part, then descending imaginary part,
    # so conjugate pairs stay adjacent with the +imag member first
    return np.lexsort((-w.imag, -w.real, -np.abs(w)))


def spectrum(model: DmdModel, modes: int = 0) -> Spectrum:
    """Eigenvalues (and optionally the top-`modes` eigenvectors) of the operator."""
    if modes:
        w, vecs = np.linalg.eig(model.A)
        order = _eig_order(w)
        return Spectrum(eigenvalues=w[order], modes=vecs[:, order][:, :modes])
    w = np.linalg.eigvals(model.A)
    return Spectrum(eigenvalues=w[_eig_order(w)])


def simulate_dmd(model: DmdModel, x0, steps: int) -> np.ndarray:
    """Roll x_{k+1} = A x_k forward; returns (steps+1, m) with x0 as the first row.

    Raises DivergenceError (with the offending step index) if a state goes
    non-finite or exceeds DIVERGENCE_LIMIT in magnitude.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    m = model.state_dim
    if x0.size != m:
        raise ValueError(f"initial state has length {x0.size}, model expects {m}")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    states = np.empty((steps + 1, m))
    states[0] = x0
    x = x0
    for k in range(1, steps + 1):
        x = model.A @ x
        check_state(x, k, states)
        states[k] = x
    return states
