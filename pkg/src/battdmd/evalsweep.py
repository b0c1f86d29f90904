"""Residual-sum-of-squares metrics and grid sweeps over embedding dimensions."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dmd import DivergenceError, fit_dmd
from .dmdc import AnyModel, fit_dmdc, open_loop_forecast
from .embedding import EmbeddingSpec, build_snapshots
from .lowrank import DEFAULT_RANK_POLICY, RankPolicy
from .timeseries import SplitSpec, TimeSeries, split


@dataclass(frozen=True)
class SegmentRss:
    """Residual over one elapsed-time window of the comparison horizon."""

    start_s: float
    end_s: float
    rss: float
    nrss: float | None
    samples: int


@dataclass(frozen=True)
class RssReport:
    """Residual sum of squares (volts^2) with its mean-normalized companion.

    nrss divides by the measured sequence's centered energy and is None when
    the measured sequence is constant (0/0 guard).
    """

    rss: float
    nrss: float | None
    horizon: int
    per_segment: tuple[SegmentRss, ...] | None = None


def rss(measured, predicted) -> RssReport:
    """Sum of squared differences between measured and predicted sequences."""
    y = np.asarray(measured, dtype=float).reshape(-1)
    yh = np.asarray(predicted, dtype=float).reshape(-1)
    if y.size != yh.size:
        raise ValueError(f"length mismatch: measured {y.size}, predicted {yh.size}")
    if y.size < 1:
        raise ValueError("need at least one sample")
    value = float(np.sum((y - yh) ** 2))
    denom = float(np.sum((y - y.mean()) ** 2))
    nrss = value / denom if denom > 0.0 else None
    return RssReport(rss=value, nrss=nrss, horizon=int(y.size))


def windowed_rss(t, measured, predicted, windows_s, origin: float | None = None) -> tuple[SegmentRss, ...]:
    """Per-window residuals over elapsed time.

    windows_s is an iterable of (start_s, end_s) pairs measured from `origin`
    (default: the first compared timestamp); windows with no samples in range
    are dropped.
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    y = np.asarray(measured, dtype=float).reshape(-1)
    yh = np.asarray(predicted, dtype=float).reshape(-1)
    if not (t.size == y.size == yh.size):
        raise ValueError("t, measured and predicted must have equal lengths")
    elapsed = t - (t[0] if origin is None else origin)
    segments = []
    for start_s, end_s in windows_s:
        mask = (elapsed >= start_s) & (elapsed <= end_s)
        count = int(np.count_nonzero(mask))
        if count == 0:
            continue
        rep = rss(y[mask], yh[mask])
        segments.append(
            SegmentRss(start_s=float(start_s), end_s=float(end_s),
                       rss=rep.rss, nrss=rep.nrss, samples=count)
        )
    return tuple(segments)


@dataclass(frozen=True)
class SweepPoint:
    param: int
    rss: float
    nrss: float | None


@dataclass(frozen=True)
class SweepResult:
    """Grid of (parameter, residual) rows with the deterministic argmin.

    Failed grid points are recorded under `skipped` with a reason, never as
    fabricated residuals. Ties break toward the smaller parameter.
    """

    points: tuple[SweepPoint, ...]
    best: int | None
    model_kind: str
    skipped: tuple[tuple[int, str], ...] = ()


def fit_model(
    snap,
    kind: str,
    policy: RankPolicy = DEFAULT_RANK_POLICY,
    policy_out: RankPolicy | None = None,
    variant: str = "auto",
) -> AnyModel:
    """Fit the requested model kind on a snapshot set."""
    if kind == "dmd":
        return fit_dmd(snap, policy)
    if kind == "dmdc":
        from .dmdc import DEFAULT_OUTPUT_POLICY

        return fit_dmdc(snap, policy, policy_out or DEFAULT_OUTPUT_POLICY, variant)
    raise ValueError(f"unknown model kind '{kind}' (expected dmd or dmdc)")


def evaluate_point(
    series: TimeSeries,
    spec: EmbeddingSpec,
    kind: str,
    split_spec: SplitSpec,
    policy: RankPolicy,
    policy_out: RankPolicy | None = None,
    variant: str = "auto",
) -> tuple[AnyModel, RssReport]:
    """One sweep evaluation: fit on the training part, forecast open-loop over
    the full record, report the residual on the held-out tail."""
    train, _ = split(series, split_spec)
    snap = build_snapshots(train, spec, with_input=(kind == "dmdc"))
    model = fit_model(snap, kind, policy, policy_out, variant)
    k0, vhat = open_loop_forecast(model, series)
    n_train = len(train)
    report = rss(series.v[n_train:], vhat[n_train - k0:])
    return model, report


def sweep_output_embedding(
    series: TimeSeries,
    m_grid,
    ell: int,
    kind: str,
    split_spec: SplitSpec = SplitSpec(),
    policy: RankPolicy = DEFAULT_RANK_POLICY,
    tau: int = 1,
    policy_out: RankPolicy | None = None,
    variant: str = "auto",
) -> SweepResult:
    """Sweep the output embedding dimension m at fixed input embedding ell.

    The input embedding is clamped to min(ell, m) so small-m grid points stay
    valid. Grid points that cannot be evaluated (spec invalid, record too
    short, diverging rollout) are skipped with a warning.
    """
    m_grid = sorted(set(int(m) for m in m_grid))
    if not m_grid:
        raise ValueError("empty m grid")
    points: list[SweepPoint] = []
    skipped: list[tuple[int, str]] = []
    best: int | None = None
    best_rss = np.inf
    for m in m_grid:
        try:
            spec = EmbeddingSpec(m=m, ell=min(ell, m), tau=tau)
            _, report = evaluate_point(series, spec, kind, split_spec, policy, policy_out, variant)
        except (ValueError, DivergenceError) as exc:
            warnings.warn(f"sweep point m={m} skipped: {exc}", stacklevel=2)
            skipped.append((m, str(exc)))
            continue
        points.append(SweepPoint(param=m, rss=report.rss, nrss=report.nrss))
        if report.rss < best_rss:
            best, best_rss = m, report.rss
    return SweepResult(points=tuple(points), best=best, model_kind=kind, skipped=tuple(skipped))


def sweep_input_embedding(
    series: TimeSeries,
    m: int,
    ell_grid,
    split_spec: SplitSpec = SplitSpec(),
    policy: RankPolicy = DEFAULT_RANK_POLICY,
    tau: int = 1,
    policy_out: RankPolicy | None = None,
    variant: str = "auto",
) -> SweepResult:
    """Sweep the input embedding dimension ell at fixed m (controlled model only)."""
    ell_grid = sorted(set(int(e) for e in ell_grid))
    if not ell_grid:
        raise ValueError("empty ell grid")
    points: list[SweepPoint] = []
    skipped: list[tuple[int, str]] = []
    best: int | None = None
    best_rss = np.inf
    for ell in ell_grid:
        if ell > m:
            warnings.warn(f"sweep point ell={ell} skipped: exceeds m={m}", stacklevel=2)
            skipped.append((ell, f"ell={ell} exceeds m={m}"))
            continue
        spec = EmbeddingSpec(m=m, ell=ell, tau=tau)
        try:
            _, report = evaluate_point(series, spec, "dmdc", split_spec, policy, policy_out, variant)
        except (ValueError, DivergenceError) as exc:
            warnings.warn(f"sweep point ell={ell} skipped: {exc}", stacklevel=2)
            skipped.append((ell, str(exc)))
            continue
        points.append(SweepPoint(param=ell, rss=report.rss, nrss=report.nrss))
        if report.rss < best_rss:
            best, best_rss = ell, report.rss
    return SweepResult(points=tuple(points), best=best, model_kind="dmdc", skipped=tuple(skipped))
