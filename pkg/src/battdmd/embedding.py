"""Block-Hankel time-delay embeddings and the snapshot matrices used for operator fitting.

A scalar signal of length L embeds into an m x n matrix whose entry (i, j) is
signal[j + i*tau]; every anti-diagonal is constant and n = L - (m-1)*tau.
The snapshot pair (X, Xp) embeds the one-step-shifted signal so that each
column of Xp advances the matching column of X by one sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timeseries import TimeSeries


@dataclass(frozen=True)
class EmbeddingSpec:
    """Embedding dimensions: m output delays, ell input delays, stride tau (samples)."""

    m: int
    ell: int = 1
    tau: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"embedding dimension m must be >= 1, got {self.m}")
        if not 1 <= self.ell <= self.m:
            raise ValueError(f"input embedding ell must satisfy 1 <= ell <= m, got ell={self.ell}, m={self.m}")
        if self.tau < 1:
            raise ValueError(f"delay stride tau must be >= 1, got {self.tau}")

    @property
    def history(self) -> int:
        """Samples of history a state vector spans beyond its newest sample."""
        return (self.m - 1) * self.tau


@dataclass(frozen=True)
class SnapshotSet:
    """Embedded snapshot matrices: X, Xp (m x n) and optionally U (ell x n)."""

    X: np.ndarray
    Xp: np.ndarray
    U: np.ndarray | None
    n: int
    spec: EmbeddingSpec
    t0_index: int = 0


def build_hankel(signal, m: int, tau: int = 1) -> np.ndarray:
    """Stack m delayed copies of a scalar signal into an m x n matrix.

    Entry (i, j) = signal[j + i*tau]; n = L - (m-1)*tau. Requires
    (m-1)*tau + 1 <= L.
    """
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    if m < 1 or tau < 1:
        raise ValueError(f"m and tau must be >= 1, got m={m}, tau={tau}")
    length = signal.size
    need = (m - 1) * tau + 1
    if need > length:
        raise ValueError(
            f"embedding m={m}, tau={tau} needs at least {need} samples, signal has {length}"
        )
    n = length - (m - 1) * tau
    idx = np.arange(n)[None, :] + tau * np.arange(m)[:, None]
    return signal[idx]


def build_input_hankel(signal, spec: EmbeddingSpec) -> np.ndarray:
    """Embed the input with ell delays, newest-sample aligned to the output embedding.

    Column j stacks the ell inputs ending at the same sample as the newest
    output entry of column j, i.e. entry (i, j) = signal[j + (m-ell+i)*tau].
    """
    signal = np.asarray(signal, dtype=float)
    offset = (spec.m - spec.ell) * spec.tau
    return build_hankel(signal[offset:], spec.ell, spec.tau)


def build_snapshots(series: TimeSeries, spec: EmbeddingSpec, with_input: bool = False) -> SnapshotSet:
    """Build (X, Xp) from the voltage channel and, optionally, U from current.

    X embeds v[0..L-2] and Xp embeds v[1..L-1], so both are m x n with
    n = (L-1) - (m-1)*tau and each Xp column is X's column one step ahead.
    """
    length = len(series)
    need = spec.history + 2
    if length < need:
        raise ValueError(
            f"series too short: m={spec.m}, tau={spec.tau} needs at least {need} samples, got {length}"
        )
    X = build_hankel(series.v[:-1], spec.m, spec.tau)
    Xp = build_hankel(series.v[1:], spec.m, spec.tau)
    n = X.shape[1]
    U = None
    if with_input:
        U = build_input_hankel(series.i, spec)[:, :n]
    return SnapshotSet(X=X, Xp=Xp, U=U, n=n, spec=spec, t0_index=0)


def init_state(series: TimeSeries, spec: EmbeddingSpec, at_index: int) -> np.ndarray:
    """Hankel state vector ending at sample at_index, built from measured history.

    Entry i is v[at_index - (m-1-i)*tau]; the newest sample sits last, so
    read_voltage(init_state(s, spec, k)) == s.v[k].
    """
    if at_index < spec.history:
        raise ValueError(
            f"insufficient history before index {at_index}: need at least {spec.history} prior samples"
        )
    if at_index >= len(series):
        raise ValueError(f"index {at_index} beyond record of length {len(series)}")
    idx = at_index - (spec.m - 1 - np.arange(spec.m)) * spec.tau
    return series.v[idx].copy()


def read_voltage(state) -> float:
    """Decode a Hankel state vector to its newest (one-step prediction) entry."""
    state = np.asarray(state, dtype=float)
    if state.size < 1:
        raise ValueError("state vector is empty")
    return float(state.reshape(-1)[-1])
