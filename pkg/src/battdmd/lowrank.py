"""Truncated SVD and pseudoinverse application, shared by the operator-fitting routines."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

_MODES = ("fixed", "relative", "energy")


@dataclass(frozen=True)
class RankPolicy:
    """Rule for how many singular triplets to retain.

    fixed(r)     keep min(r, rank) triplets
    relative(e)  keep singular values >= e * largest
    energy(h)    keep the smallest r with cumulative sigma^2 fraction >= h
    """

    mode: str
    value: float

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown rank policy mode '{self.mode}' (expected one of {_MODES})")
        if self.mode == "fixed":
            if int(self.value) != self.value or self.value < 1:
                raise ValueError(f"fixed rank must be a positive integer, got {self.value}")
        elif self.mode == "relative":
            if not 0.0 < self.value < 1.0:
                raise ValueError(f"relative threshold must be in (0, 1), got {self.value}")
        else:
            if not 0.0 < self.value <= 1.0:
                raise ValueError(f"energy fraction must be in (0, 1], got {self.value}")

    @classmethod
    def fixed(cls, r: int) -> "RankPolicy":
        return cls("fixed", float(r))

    @classmethod
    def relative(cls, eps: float) -> "RankPolicy":
        return cls("relative", float(eps))

    @classmethod
    def energy(cls, eta: float) -> "RankPolicy":
        return cls("energy", float(eta))

    @classmethod
    def parse(cls, token: str) -> "RankPolicy":
        """Parse 'fixed:8', 'relative:1e-10' or 'energy:0.9999'."""
        try:
            mode, raw = token.split(":", 1)
        except ValueError:
            raise ValueError(f"rank policy '{token}' must look like mode:value") from None
        mode = mode.strip().lower()
        if mode == "relative_threshold":
            mode = "relative"
        return cls(mode, float(raw))

    def describe(self) -> str:
        if self.mode == "fixed":
            return f"fixed:{int(self.value)}"
        return f"{self.mode}:{self.value:g}"


DEFAULT_RANK_POLICY = RankPolicy.relative(1e-10)  # machine-noise cutoff


@dataclass(frozen=True)
class SvdFactor:
    """Rank-r factorization M ~= U diag(s) V^T with orthonormal U (p x r), V (q x r)."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.s.size)


def _retained_rank(s: np.ndarray, policy: RankPolicy, shape: tuple[int, int]) -> int:
    if policy.mode == "fixed":
        # numerical rank: LAPACK-style cutoff on the computed spectrum
        rank = int(np.count_nonzero(s > max(shape) * np.finfo(float).eps * s[0]))
        r = int(policy.value)
        if r > rank:
            warnings.warn(
                f"requested rank {r} exceeds matrix rank {rank}; clipping", stacklevel=3
            )
        return min(r, rank)
    if policy.mode == "relative":
        return int(np.count_nonzero(s >= policy.value * s[0]))
    energy = np.cumsum(s**2)
    return int(np.searchsorted(energy, policy.value * energy[-1] - 1e-15 * energy[-1]) + 1)


def truncated_svd(M, policy: RankPolicy = DEFAULT_RANK_POLICY) -> SvdFactor:
    """Deterministic truncated SVD of M under the given retention policy.

    The sign of each retained left singular vector is fixed by forcing its
    largest-magnitude entry non-negative, so repeated runs on identical input
    return identical factors.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        raise ValueError("all-zero matrix has no retainable rank")
    r = _retained_rank(s, policy, M.shape)
    if r < 1:
        raise ValueError("rank policy retained no singular triplets")
    U, s, V = U[:, :r], s[:r].copy(), Vh[:r].T
    peak = np.argmax(np.abs(U), axis=0)
    flip = U[peak, np.arange(r)] < 0
    U = U.copy()
    V = V.copy()
    U[:, flip] *= -1.0
    V[:, flip] *= -1.0
    return SvdFactor(U=U, s=s, V=V)


def reconstruct(f: SvdFactor) -> np.ndarray:
    """Rank-r approximation U diag(s) V^T."""
    return (f.U * f.s) @ f.V.T


def pinv_apply(f: SvdFactor, M2) -> np.ndarray:
    """Apply the rank-r pseudoinverse on the right: M2 V diag(1/s) U^T.

    For f = truncated_svd(M) with M of shape (p, q), this is M2 @ pinv(M)
    restricted to the retained subspace; M2 is (k, q) and the result (k, p).
    """
    M2 = np.asarray(M2, dtype=float)
    if M2.ndim != 2:
        raise ValueError("M2 must be a 2-d matrix")
    if M2.shape[1] != f.V.shape[0]:
        raise ValueError(
            f"dimension mismatch: M2 has {M2.shape[1]} columns, factor expects {f.V.shape[0]}"
        )
    return ((M2 @ f.V) / f.s) @ f.U.T
