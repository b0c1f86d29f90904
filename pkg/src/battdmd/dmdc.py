"""Controlled operator identification: Xp ~= A X + B U, reduced-order variant,
rollout under known inputs, and fixed-operator transfer to new records."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

from .dmd import DmdModel, check_state, simulate_dmd
from .embedding import EmbeddingSpec, SnapshotSet, build_input_hankel, init_state
from .lowrank import DEFAULT_RANK_POLICY, RankPolicy, pinv_apply, truncated_svd
from .timeseries import TimeSeries

if TYPE_CHECKING:
    from .evalsweep import RssReport

# output projection keeps essentially all variance unless the user tightens it
DEFAULT_OUTPUT_POLICY = RankPolicy.energy(0.9999)
# above this state dimension the auto variant switches to the reduced pipeline
REDUCED_VARIANT_THRESHOLD = 512


@dataclass(frozen=True)
class DmdcModel:
    """Identified (A, B) pair, either full-size or projected.

    variant "full":    A is (m, m), B is (m, ell), basis is None.
    variant "reduced": A is (r_x, r_x), B is (r_x, ell), basis is the (m, r_x)
    orthonormal output projection; states decode as x = basis @ z.
    ranks holds (r_omega, r_x) with r_x None for the full variant.
    """

    variant: str
    A: np.ndarray
    B: np.ndarray
    basis: np.ndarray | None
    spec: EmbeddingSpec
    ranks: tuple[int, int | None]
    fit_residual: float

    @property
    def kind(self) -> str:
        return "dmdc"

    @property
    def state_dim(self) -> int:
        if self.variant == "reduced":
            return int(self.basis.shape[0])
        return int(self.A.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.B.shape[1])


def _require_input(snap: SnapshotSet) -> None:
    if snap.U is None:
        raise ValueError("snapshot set has no input block; use fit_dmd or rebuild with with_input=True")
    if snap.U.shape[1] != snap.X.shape[1]:
        raise ValueError(
            f"input block has {snap.U.shape[1]} columns, snapshots have {snap.X.shape[1]}"
        )


def fit_dmdc_full(snap: SnapshotSet, policy: RankPolicy = DEFAULT_RANK_POLICY) -> DmdcModel:
    """Least-squares [A B] = Xp pinv([X; U]) via truncated SVD of the stacked matrix.

    The stacked data matrix omega = [X; U] is (m+ell) x n; the estimate splits
    by column blocks into A (first m columns) and B (remaining ell).
    """
    _require_input(snap)
    m = snap.X.shape[0]
    omega = np.vstack([snap.X, snap.U])
    try:
        f = truncated_svd(omega, policy)
    except ValueError as exc:
        raise ValueError(f"degenerate snapshots: {exc}") from None
    G = pinv_apply(f, snap.Xp)
    A, B = G[:, :m], G[:, m:]
    residual = float(np.linalg.norm(snap.Xp - A @ snap.X - B @ snap.U))
    return DmdcModel(
        variant="full", A=A, B=B, basis=None, spec=snap.spec,
        ranks=(f.rank, None), fit_residual=residual,
    )


def fit_dmdc_reduced(
    snap: SnapshotSet,
    policy_omega: RankPolicy = DEFAULT_RANK_POLICY,
    policy_out: RankPolicy = DEFAULT_OUTPUT_POLICY,
) -> DmdcModel:
    """Projected (A, B) on an output basis from the truncated SVD of Xp.

    With f = svd([X; U]) partitioned row-wise into the output block Ux and the
    input block Uu, and Uhat the retained left singular vectors of Xp:

        A_red = Uhat^T Xp V diag(1/s) Ux^T Uhat
        B_red = Uhat^T Xp V diag(1/s) Uu^T

    With truncation disabled this is similar to the full fit: Uhat A_red Uhat^T
    equals the full A.
    """
    _require_input(snap)
    m = snap.X.shape[0]
    omega = np.vstack([snap.X, snap.U])
    try:
        f = truncated_svd(omega, policy_omega)
        f_out = truncated_svd(snap.Xp, policy_out)
    except ValueError as exc:
        raise ValueError(f"degenerate snapshots: {exc}") from None
    Ux, Uu = f.U[:m, :], f.U[m:, :]
    Uhat = f_out.U
    core = (snap.Xp @ f.V) / f.s  # Xp V diag(1/s), shape (m, r)
    A_red = Uhat.T @ core @ (Ux.T @ Uhat)
    B_red = Uhat.T @ core @ Uu.T
    residual = float(
        np.linalg.norm(snap.Xp - Uhat @ (A_red @ (Uhat.T @ snap.X) + B_red @ snap.U))
    )
    return DmdcModel(
        variant="reduced", A=A_red, B=B_red, basis=Uhat, spec=snap.spec,
        ranks=(f.rank, f_out.rank), fit_residual=residual,
    )


def fit_dmdc(
    snap: SnapshotSet,
    policy: RankPolicy = DEFAULT_RANK_POLICY,
    policy_out: RankPolicy = DEFAULT_OUTPUT_POLICY,
    variant: str = "auto",
) -> DmdcModel:
    """Variant dispatch: 'full', 'reduced', or 'auto' (full up to m=512, reduced above)."""
    if variant == "auto":
        variant = "full" if snap.spec.m <= REDUCED_VARIANT_THRESHOLD else "reduced"
    if variant == "full":
        return fit_dmdc_full(snap, policy)
    if variant == "reduced":
        return fit_dmdc_reduced(snap, policy, policy_out)
    raise ValueError(f"unknown variant '{variant}' (expected full, reduced or auto)")


def simulate_dmdc(model: DmdcModel, x0, inputs, steps: int) -> np.ndarray:
    """Roll x_{k+1} = A x_k + B u_k under known inputs; returns (steps+1, m) decoded states.

    inputs is an (ell, >= steps) matrix whose column k is the delayed-input
    vector acting at step k (newest sample last, aligned as in
    embedding.build_input_hankel). For the reduced variant the rollout runs in
    the projected coordinates z with z_0 = basis^T x0 and decodes each state.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    m = model.state_dim
    if x0.size != m:
        raise ValueError(f"initial state has length {x0.size}, model expects {m}")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    U = np.asarray(inputs, dtype=float)
    if U.ndim != 2 or U.shape[0] != model.input_dim:
        raise ValueError(f"inputs must be ({model.input_dim}, >= {steps}), got shape {U.shape}")
    if U.shape[1] < steps:
        raise ValueError(f"inputs provide {U.shape[1]} columns, rollout needs {steps}")
    states = np.empty((steps + 1, m))
    states[0] = x0
    if model.variant == "reduced":
        z = model.basis.T @ x0
        for k in range(1, steps + 1):
            z = model.A @ z + model.B @ U[:, k - 1]
            x = model.basis @ z
            check_state(x, k, states)
            states[k] = x
    else:
        x = x0
        for k in range(1, steps + 1):
            x = model.A @ x + model.B @ U[:, k - 1]
            check_state(x, k, states)
            states[k] = x
    return states


AnyModel = Union[DmdModel, DmdcModel]


def open_loop_forecast(model: AnyModel, series: TimeSeries) -> tuple[int, np.ndarray]:
    """Warm-start from measured history and roll the fixed model across the record.

    Seeds the state from the first (m-1)*tau+1 measured voltage samples and,
    for controlled models, drives the rollout with the measured current.
    Returns (k0, vhat) where vhat[j] is the decoded voltage at sample k0+j;
    vhat[0] is the measured seed sample itself.
    """
    spec = model.spec
    k0 = spec.history
    length = len(series)
    if length < k0 + 2:
        raise ValueError(
            f"insufficient history: record has {length} samples, "
            f"m={spec.m}, tau={spec.tau} needs at least {k0 + 2}"
        )
    x0 = init_state(series, spec, k0)
    steps = length - 1 - k0
    if isinstance(model, DmdModel):
        states = simulate_dmd(model, x0, steps)
    else:
        u_roll = build_input_hankel(series.i, spec)
        states = simulate_dmdc(model, x0, u_roll[:, :steps], steps)
    return k0, states[:, -1]


def transfer(model: AnyModel, aged: TimeSeries) -> tuple[TimeSeries, "RssReport"]:
    """Apply a fixed, previously fitted model to a new record.

    Only the initial condition and the input sequence come from the new
    record; the operators stay frozen. Returns the decoded forecast aligned
    to the record's timestamps plus the residual report against its measured
    voltage.
    """
    from .evalsweep import rss

    min_len = model.spec.history + 3
    if len(aged) < min_len:
        raise ValueError(
            f"record too short for transfer: {len(aged)} samples, "
            f"m={model.spec.m}, tau={model.spec.tau} needs at least {min_len}"
        )
    k0, vhat = open_loop_forecast(model, aged)
    meta = dict(aged.meta)
    meta["forecast_of"] = meta.pop("source", "")
    forecast = TimeSeries(aged.t[k0:], aged.i[k0:], vhat, meta=meta, v_window=None)
    report = rss(aged.v[k0:], vhat)
    return forecast, report
