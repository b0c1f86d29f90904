"""Command-line pipeline: synthesize HPPC data, fit operators, forecast, sweep, transfer.

Every command is deterministic for a fixed (inputs, config, seed): data and
report files are byte-identical across re-runs. Wall-clock timing goes to
stderr only. Exit codes: 0 success, 1 runtime/data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import re
import sys
import time

import numpy as np

from .dmd import DivergenceError
from .dmdc import transfer
from .embedding import EmbeddingSpec, build_snapshots
from .evalsweep import fit_model, rss, sweep_input_embedding, sweep_output_embedding, windowed_rss
from .hppc import AgingSpec, CellSpec, hppc_protocol, simulate_cell
from .lowrank import RankPolicy
from .modelfile import atomic_write_text, file_digest, load_model, model_payload, save_model
from .timeseries import DataFormatError, SplitSpec, csv_text, load_csv, split

REPORT_VERSION = 1
DEFAULT_SEGMENTS_H = ((1.0, 2.5), (5.0, 6.5), (10.0, 12.5))


class UsageError(Exception):
    """Bad command line / config combination (exit code 2)."""


# ---------------------------------------------------------------------------
# config resolution

def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return cfg


def _pick(args, config: dict, key: str, default=None):
    """Flag value if given, else config value, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    return config.get(key, default)


def _parse_grid(raw) -> list[int]:
    """Accept [1,2,3], '1,2,3' or 'start:stop[:step]' (stop inclusive)."""
    if raw is None:
        return []
    if isinstance(raw, (list, tuple)):
        return [int(x) for x in raw]
    raw = str(raw).strip()
    if ":" in raw:
        parts = [int(p) for p in raw.split(":")]
        if len(parts) == 2:
            start, stop, step = parts[0], parts[1], 1
        elif len(parts) == 3:
            start, stop, step = parts
        else:
            raise UsageError(f"bad grid spec '{raw}'")
        if step < 1 or stop < start:
            raise UsageError(f"bad grid spec '{raw}'")
        return list(range(start, stop + 1, step))
    return [int(p) for p in raw.split(",") if p.strip()]


def _parse_int_list(raw) -> list[int]:
    if raw is None:
        return []
    if isinstance(raw, (list, tuple)):
        return [int(x) for x in raw]
    return [int(p) for p in str(raw).split(",") if p.strip()]


def _parse_segments(raw) -> tuple[tuple[float, float], ...]:
    """Accept [[1,2.5],...] or '1:2.5,5:6.5' (hours)."""
    if raw is None:
        return DEFAULT_SEGMENTS_H
    if isinstance(raw, (list, tuple)):
        return tuple((float(a), float(b)) for a, b in raw)
    out = []
    for token in str(raw).split(","):
        token = token.strip()
        if not token:
            continue
        a, b = token.split(":")
        out.append((float(a), float(b)))
    return tuple(out)


def _config_digest(resolved: dict) -> str:
    return hashlib.sha256(
        json.dumps(resolved, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


def _write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=1) + "\n")


def _out_dir(args, config) -> str:
    out = _pick(args, config, "out", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _policy(args, config, key: str, default: str) -> RankPolicy:
    token = _pick(args, config, key, default)
    try:
        return RankPolicy.parse(str(token))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _figures_enabled(args, config) -> bool:
    if getattr(args, "no_figures", False):
        return False
    return bool(config.get("figures", True))


# ---------------------------------------------------------------------------
# synth

def _cell_from_config(config: dict) -> CellSpec:
    fields = config.get("cell", {})
    try:
        return CellSpec(**fields)
    except TypeError as exc:
        raise UsageError(f"bad cell config: {exc}") from None


def _child_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def cmd_synth(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    seed = int(_pick(args, config, "seed", 0))
    repetitions = int(_pick(args, config, "repetitions", 10))
    dt = float(_pick(args, config, "dt", 1.0))
    soc0 = float(config.get("soc0", 1.0))
    noise_sigma = float(_pick(args, config, "noise_sigma", 0.0))
    cycles = _parse_int_list(_pick(args, config, "cycles", []))
    cell = _cell_from_config(config)
    aging_cfg = config.get("aging", {})
    fade = float(aging_cfg.get("capacity_fade_per_cycle", 2e-4))
    growth = float(aging_cfg.get("resistance_growth_per_cycle", 3e-4))
    figures = _figures_enabled(args, config)

    resolved = {
        "command": "synth", "seed": seed, "repetitions": repetitions, "dt": dt,
        "soc0": soc0, "noise_sigma": noise_sigma, "cycles": cycles,
        "cell": {k: getattr(cell, k) for k in
                 ("capacity_ah", "r0", "r1", "c1", "r2", "c2", "v_min", "v_max")},
        "aging": {"capacity_fade_per_cycle": fade, "resistance_growth_per_cycle": growth},
    }
    script = hppc_protocol(cell, repetitions)

    records = []
    t0 = time.perf_counter()
    for index, n_cycles in enumerate([0] + cycles):
        name = "hppc_healthy" if n_cycles == 0 else f"hppc_cycle_{n_cycles:04d}"
        aging = AgingSpec(cycles=n_cycles, capacity_fade_per_cycle=fade,
                          resistance_growth_per_cycle=growth)
        series = simulate_cell(cell, aging, script, dt=dt, soc0=soc0,
                               noise_sigma=noise_sigma, seed=_child_seed(seed, index))
        records.append((name, n_cycles, series))
    print(f"synthesized {len(records)} record(s) in {time.perf_counter() - t0:.2f} s",
          file=sys.stderr)

    manifest = {
        "format_version": REPORT_VERSION,
        "config": resolved,
        "config_digest": _config_digest(resolved),
        "protocol": script.to_obj(),
        "files": [],
    }
    for name, n_cycles, series in records:
        path = os.path.join(out, name + ".csv")
        atomic_write_text(path, csv_text(series))
        manifest["files"].append({
            "file": name + ".csv",
            "cycles": n_cycles,
            "samples": len(series),
            "soc_final": series.meta["soc_final"],
            "capacity_ah_effective": series.meta["capacity_ah_effective"],
            "r0_effective": series.meta["r0_effective"],
            "sha256": file_digest(path),
        })
    _write_json(os.path.join(out, "synth_manifest.json"), manifest)
    if figures:
        from . import plots
        for name, n_cycles, series in records:
            plots.plot_record(series, os.path.join(out, f"fig_{name}.png"),
                              title=f"{name} ({len(series)} samples)")
    print(json.dumps(manifest["files"], indent=1))
    return 0


# ---------------------------------------------------------------------------
# fit

def _require(value, flag: str):
    if value is None:
        raise UsageError(f"missing required option {flag}")
    return value


def cmd_fit(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    input_path = _require(_pick(args, config, "input"), "--input")
    kind = _require(_pick(args, config, "kind"), "--kind")
    if kind not in ("dmd", "dmdc"):
        raise UsageError(f"--kind must be dmd or dmdc, got '{kind}'")
    m = int(_require(_pick(args, config, "m"), "--m"))
    tau = int(_pick(args, config, "tau", 1))
    ell = _pick(args, config, "ell")
    if kind == "dmdc" and ell is None:
        raise UsageError("--ell is required with --kind dmdc")
    ell = int(ell) if ell is not None else 1
    fraction = float(_pick(args, config, "train_fraction", 0.6))
    policy = _policy(args, config, "rank_policy", "relative:1e-10")
    policy_out = _policy(args, config, "output_rank_policy", "energy:0.9999")
    variant = str(_pick(args, config, "variant", "auto"))
    figures = _figures_enabled(args, config)

    resolved = {
        "command": "fit", "input": str(input_path), "kind": kind, "m": m, "ell": ell,
        "tau": tau, "train_fraction": fraction, "rank_policy": policy.describe(),
        "output_rank_policy": policy_out.describe(), "variant": variant,
    }

    series = load_csv(input_path)
    spec = EmbeddingSpec(m=m, ell=ell, tau=tau)
    train, _ = split(series, SplitSpec(fraction))
    t0 = time.perf_counter()
    snap = build_snapshots(train, spec, with_input=(kind == "dmdc"))
    model = fit_model(snap, kind, policy, policy_out, variant)
    fit_seconds = time.perf_counter() - t0

    # open-loop residuals over the whole record and over the held-out tail
    t1 = time.perf_counter()
    forecast, full_report = transfer(model, series)
    n_train = len(train)
    k0 = spec.history
    eval_report = rss(series.v[n_train:], forecast.v[n_train - k0:])
    print(f"fit {fit_seconds:.2f} s, open-loop rollout {time.perf_counter() - t1:.2f} s",
          file=sys.stderr)

    provenance = {
        "input": str(input_path),
        "input_sha256": file_digest(input_path),
        "config_digest": _config_digest(resolved),
    }
    model_path = os.path.join(out, "model.json")
    save_model(model, model_path, provenance)
    payload = model_payload(model)
    report = {
        "format_version": REPORT_VERSION,
        "config": resolved,
        "kind": model.kind,
        "variant": payload["variant"],
        "m": m, "ell": ell, "tau": tau,
        "ranks": payload["ranks"],
        "train_samples": n_train,
        "snapshot_columns": snap.n,
        "fit_residual": model.fit_residual,
        "open_loop": {"rss": full_report.rss, "nrss": full_report.nrss,
                      "horizon": full_report.horizon, "start_index": k0},
        "held_out": {"rss": eval_report.rss, "nrss": eval_report.nrss,
                     "horizon": eval_report.horizon, "start_index": n_train},
        "provenance": provenance,
    }
    _write_json(os.path.join(out, "fit_report.json"), report)
    if figures:
        from . import plots
        poles = np.linalg.eigvals(model.A)
        plots.plot_poles(poles, os.path.join(out, "fig_poles.png"),
                         title=f"{kind} poles (m={m})")
    print(json.dumps({"model": model_path, "fit_residual": model.fit_residual,
                      "open_loop_rss": full_report.rss, "held_out_rss": eval_report.rss},
                     indent=1))
    return 0


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    model_paths = _pick(args, config, "model")
    if isinstance(model_paths, (list, tuple)):
        model_paths = model_paths[0] if model_paths else None
    model_path = _require(model_paths, "--model")
    input_path = _require(_pick(args, config, "input"), "--input")
    segments_h = _parse_segments(_pick(args, config, "segments"))
    figures = _figures_enabled(args, config)

    model = load_model(model_path)
    series = load_csv(input_path)
    forecast, report = transfer(model, series)
    k0 = model.spec.history
    windows_s = tuple((a * 3600.0, b * 3600.0) for a, b in segments_h)
    segments = windowed_rss(forecast.t, series.v[k0:], forecast.v, windows_s,
                            origin=float(series.t[0]))
    report = dataclasses.replace(report, per_segment=segments)

    resolved = {
        "command": "simulate", "model": str(model_path), "input": str(input_path),
        "segments_hours": [list(w) for w in segments_h],
    }
    rss_report = {
        "format_version": REPORT_VERSION,
        "config": resolved,
        "kind": model.kind,
        "m": model.spec.m, "ell": model.spec.ell, "tau": model.spec.tau,
        "start_index": k0,
        "rss": report.rss, "nrss": report.nrss, "horizon": report.horizon,
        "per_segment": [
            {"start_s": s.start_s, "end_s": s.end_s, "rss": s.rss,
             "nrss": s.nrss, "samples": s.samples} for s in segments
        ],
        "provenance": {"model_sha256": file_digest(model_path),
                       "input_sha256": file_digest(input_path)},
    }
    atomic_write_text(os.path.join(out, "forecast.csv"), csv_text(forecast))
    _write_json(os.path.join(out, "rss_report.json"), rss_report)
    if figures:
        from . import plots
        plots.plot_forecast(forecast.t, series.v[k0:], forecast.v,
                            os.path.join(out, "fig_forecast.png"),
                            windows_s=windows_s,
                            title=f"{model.kind} open-loop forecast (RSS {report.rss:.4g})")
    print(json.dumps({"rss": report.rss, "nrss": report.nrss, "horizon": report.horizon},
                     indent=1))
    return 0


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    input_path = _require(_pick(args, config, "input"), "--input")
    sweep_kind = str(_pick(args, config, "sweep", "m"))
    kind = str(_pick(args, config, "kind", "dmdc"))
    tau = int(_pick(args, config, "tau", 1))
    fraction = float(_pick(args, config, "train_fraction", 0.6))
    policy = _policy(args, config, "rank_policy", "relative:1e-10")
    policy_out = _policy(args, config, "output_rank_policy", "energy:0.9999")
    variant = str(_pick(args, config, "variant", "auto"))
    figures = _figures_enabled(args, config)
    series = load_csv(input_path)
    split_spec = SplitSpec(fraction)

    t0 = time.perf_counter()
    if sweep_kind == "m":
        grid = _parse_grid(_pick(args, config, "m_grid"))
        if not grid:
            raise UsageError("m sweep needs --m-grid")
        ell = int(_pick(args, config, "ell", 1))
        result = sweep_output_embedding(series, grid, ell, kind, split_spec, policy,
                                        tau=tau, policy_out=policy_out, variant=variant)
        xlabel = "m"
        resolved_grid = grid
    elif sweep_kind == "ell":
        m = _pick(args, config, "m")
        if m is None:
            raise UsageError("ell sweep needs --m")
        grid = _parse_grid(_pick(args, config, "ell_grid"))
        if not grid:
            grid = list(range(1, 13))
        result = sweep_input_embedding(series, int(m), grid, split_spec, policy,
                                       tau=tau, policy_out=policy_out, variant=variant)
        xlabel = "ell"
        resolved_grid = grid
    else:
        raise UsageError(f"--sweep must be m or ell, got '{sweep_kind}'")
    print(f"sweep of {len(resolved_grid)} point(s) in {time.perf_counter() - t0:.2f} s",
          file=sys.stderr)

    if not result.points:
        for param, reason in result.skipped:
            print(f"error: {xlabel}={param} skipped: {reason}", file=sys.stderr)
        print("error: every grid point was skipped", file=sys.stderr)
        return 1

    resolved = {
        "command": "sweep", "input": str(input_path), "sweep": sweep_kind, "kind": kind,
        "grid": resolved_grid, "tau": tau, "train_fraction": fraction,
        "rank_policy": policy.describe(), "output_rank_policy": policy_out.describe(),
        "variant": variant,
    }
    lines = ["param,rss,nrss"]
    for p in result.points:
        nrss = "" if p.nrss is None else repr(p.nrss)
        lines.append(f"{p.param},{p.rss!r},{nrss}")
    atomic_write_text(os.path.join(out, "sweep.csv"), "\n".join(lines) + "\n")
    sweep_json = {
        "format_version": REPORT_VERSION,
        "config": resolved,
        "config_digest": _config_digest(resolved),
        "model_kind": result.model_kind,
        "parameter": xlabel,
        "points": [{"param": p.param, "rss": p.rss, "nrss": p.nrss} for p in result.points],
        "best": result.best,
        "skipped": [{"param": param, "reason": reason} for param, reason in result.skipped],
    }
    _write_json(os.path.join(out, "sweep.json"), sweep_json)
    if figures:
        from . import plots
        plots.plot_sweep(result.points, result.best, os.path.join(out, "fig_sweep.png"),
                         xlabel=xlabel, title=f"{result.model_kind} RSS vs {xlabel}")
    print(json.dumps({"best": result.best,
                      "points": len(result.points), "skipped": len(result.skipped)}, indent=1))
    return 0


# ---------------------------------------------------------------------------
# transfer

_CYCLE_RE = re.compile(r"cycle[_-]?(\d+)", re.IGNORECASE)


def _cycle_of(path, position: int) -> int:
    name = os.path.basename(os.fspath(path))
    match = _CYCLE_RE.search(name)
    if match:
        return int(match.group(1))
    if "healthy" in name.lower():
        return 0
    return position


def cmd_transfer(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    model_paths = _pick(args, config, "model") or []
    if isinstance(model_paths, str):
        model_paths = [model_paths]
    if not model_paths:
        raise UsageError("transfer needs at least one --model")
    aged_paths = list(getattr(args, "inputs", []) or config.get("inputs", []))
    if not aged_paths:
        raise UsageError("transfer needs at least one aged record (positional argument)")
    figures = _figures_enabled(args, config)

    rows = []
    for model_path in model_paths:
        model = load_model(model_path)
        for position, aged_path in enumerate(aged_paths):
            aged = load_csv(aged_path)
            _, report = transfer(model, aged)
            rows.append({
                "cycle": _cycle_of(aged_path, position),
                "kind": model.kind,
                "rss": report.rss,
                "nrss": report.nrss,
                "horizon": report.horizon,
                "file": os.path.basename(os.fspath(aged_path)),
            })
    rows.sort(key=lambda r: (r["cycle"], r["kind"]))

    lines = ["cycle,kind,rss,nrss"]
    for r in rows:
        nrss = "" if r["nrss"] is None else repr(r["nrss"])
        lines.append(f"{r['cycle']},{r['kind']},{r['rss']!r},{nrss}")
    atomic_write_text(os.path.join(out, "transfer.csv"), "\n".join(lines) + "\n")
    transfer_json = {
        "format_version": REPORT_VERSION,
        "config": {"command": "transfer", "models": [str(p) for p in model_paths],
                   "inputs": [str(p) for p in aged_paths]},
        "rows": rows,
    }
    _write_json(os.path.join(out, "transfer.json"), transfer_json)
    if figures:
        from . import plots
        plots.plot_transfer([(r["cycle"], r["kind"], r["rss"]) for r in rows],
                            os.path.join(out, "fig_transfer.png"),
                            title="fixed-operator transfer")
    print(json.dumps(rows, indent=1))
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON config file; flags override its values")
    shared.add_argument("--out", help="output directory (default .)")
    shared.add_argument("--seed", type=int, help="RNG seed (default 0)")
    shared.add_argument("--kind", choices=("dmd", "dmdc"), help="model kind")
    shared.add_argument("--m", type=int, help="output embedding dimension")
    shared.add_argument("--ell", type=int, help="input embedding dimension")
    shared.add_argument("--tau", type=int, help="delay stride in samples (default 1)")
    shared.add_argument("--train-fraction", dest="train_fraction", type=float,
                        help="leading fraction used for training (default 0.6)")
    shared.add_argument("--rank-policy", dest="rank_policy",
                        help="fixed:R | relative:EPS | energy:ETA (default relative:1e-10)")
    shared.add_argument("--output-rank-policy", dest="output_rank_policy",
                        help="rank policy for the reduced output basis (default energy:0.9999)")
    shared.add_argument("--no-figures", dest="no_figures", action="store_true",
                        help="skip figure rendering")

    parser = argparse.ArgumentParser(
        prog="battdmd",
        description="Hankel time-delay DMD/DMDc identification and forecasting "
                    "of battery charge-discharge voltage",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[shared], help="generate synthetic HPPC records")
    p.add_argument("--repetitions", type=int, help="SoC levels per record (default 10)")
    p.add_argument("--dt", type=float, help="sample step in seconds (default 1.0)")
    p.add_argument("--cycles", help="comma list of aged cycle counts, e.g. 20,80,340")
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float,
                   help="measurement noise std dev in volts (default 0)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", parents=[shared], help="fit a model on a record's training split")
    p.add_argument("--input", help="input record CSV")
    p.add_argument("--variant", choices=("auto", "full", "reduced"),
                   help="dmdc pipeline variant (default auto)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", parents=[shared],
                       help="open-loop forecast of a record with a saved model")
    p.add_argument("--model", help="model JSON file")
    p.add_argument("--input", help="record CSV to forecast")
    p.add_argument("--segments", help="zoom windows in hours, e.g. 1:2.5,5:6.5")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[shared], help="grid sweep over m or ell")
    p.add_argument("--input", help="input record CSV")
    p.add_argument("--sweep", choices=("m", "ell"), help="parameter to sweep (default m)")
    p.add_argument("--m-grid", dest="m_grid", help="grid, e.g. 10:100:10 or 8,16,32")
    p.add_argument("--ell-grid", dest="ell_grid", help="grid for ell sweep (default 1:12)")
    p.add_argument("--variant", choices=("auto", "full", "reduced"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("transfer", parents=[shared],
                       help="apply fixed fitted models to aged records")
    p.add_argument("--model", action="append", help="model JSON file (repeatable)")
    p.add_argument("inputs", nargs="*", help="aged record CSVs")
    p.set_defaults(func=cmd_transfer)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, DivergenceError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
