"""Versioned JSON persistence for fitted models, with payload integrity digests."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .dmd import DmdModel
from .dmdc import DmdcModel
from .embedding import EmbeddingSpec

FORMAT_VERSION = 1


def _matrix_obj(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}


def _matrix_from_obj(obj) -> np.ndarray:
    return np.asarray(obj["data"], dtype=float).reshape(obj["shape"])


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _digest(payload: dict) -> str:
    return hashlib.sha256(_canonical(payload)).hexdigest()


def file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def atomic_write_text(path, text: str) -> None:
    """Write to a temp file in the target directory, then rename into place."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def model_payload(model, provenance: dict | None = None) -> dict:
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "m": model.spec.m,
        "ell": model.spec.ell,
        "tau": model.spec.tau,
        "fit_residual": model.fit_residual,
        "provenance": provenance or {},
    }
    if isinstance(model, DmdModel):
        payload["variant"] = "dmd"
        payload["ranks"] = [model.rank_used]
        payload["matrices"] = {"A": _matrix_obj(model.A)}
    elif isinstance(model, DmdcModel):
        payload["variant"] = model.variant
        payload["ranks"] = [r for r in model.ranks if r is not None]
        payload["matrices"] = {"A": _matrix_obj(model.A), "B": _matrix_obj(model.B)}
        if model.basis is not None:
            payload["matrices"]["basis"] = _matrix_obj(model.basis)
    else:
        raise TypeError(f"cannot persist object of type {type(model).__name__}")
    return payload


def save_model(model, path, provenance: dict | None = None) -> None:
    """Serialize a fitted model to JSON with a self-integrity digest."""
    payload = model_payload(model, provenance)
    payload["payload_digest"] = _digest(payload)
    atomic_write_text(path, json.dumps(payload, indent=1) + "\n")


def load_model(path):
    """Reconstruct a model from JSON; raises on version or digest mismatch."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format_version {version}")
    stored = payload.pop("payload_digest", None)
    if stored is None or _digest(payload) != stored:
        raise ValueError(f"{path}: model file digest mismatch (corrupt or edited)")
    spec = EmbeddingSpec(m=int(payload["m"]), ell=int(payload["ell"]), tau=int(payload["tau"]))
    matrices = payload["matrices"]
    if payload["kind"] == "dmd":
        return DmdModel(
            A=_matrix_from_obj(matrices["A"]),
            spec=spec,
            fit_residual=float(payload["fit_residual"]),
            rank_used=int(payload["ranks"][0]),
        )
    if payload["kind"] == "dmdc":
        variant = payload["variant"]
        ranks = payload["ranks"]
        basis = _matrix_from_obj(matrices["basis"]) if "basis" in matrices else None
        return DmdcModel(
            variant=variant,
            A=_matrix_from_obj(matrices["A"]),
            B=_matrix_from_obj(matrices["B"]),
            basis=basis,
            spec=spec,
            ranks=(int(ranks[0]), int(ranks[1]) if len(ranks) > 1 else None),
            fit_residual=float(payload["fit_residual"]),
        )
    raise ValueError(f"{path}: unknown model kind '{payload['kind']}'")
