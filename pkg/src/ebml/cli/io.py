"""Metrics CSV, result summaries and bit-exact checkpoints."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..autodiff import ParamStore

CHECKPOINT_VERSION = 1
METRICS_HEADER = ("step", "metric", "value")


class CheckpointError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def save_metrics(path, rows) -> None:
    """Write ``(step, metric, value)`` rows; floats keep 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for step, name, value in rows:
            w.writerow([int(step), str(name), _fmt(value)])


def load_metrics(path) -> list[tuple[int, str, float]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None:
            return []
        if tuple(header) != METRICS_HEADER:
            raise ValueError(f"{path}:1: unexpected metrics header {header}")
        out = []
        for lineno, rec in enumerate(r, start=2):
            if len(rec) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(rec)}")
            try:
                out.append((int(rec[0]), rec[1], float(rec[2])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed row {rec!r}") from None
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def save_result(path, result: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(result), indent=2, sort_keys=True) + "\n")


def checkpoint_save(directory, store: ParamStore, extra: dict | None = None) -> Path:
    """Write ``checkpoint.json`` (names, shapes, offsets, version) and
    ``checkpoint.bin`` (values as little-endian float64, concatenated)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries, offset, chunks = [], 0, []
    for name in store.names():
        v = np.asarray(store.value(name), dtype="<f8", order="C")
        entries.append({"name": name, "shape": list(v.shape), "offset": offset})
        offset += v.size
        chunks.append(v.ravel())
    blob = np.concatenate(chunks).astype("<f8") if chunks else np.zeros(0, "<f8")
    (d / "checkpoint.bin").write_bytes(blob.tobytes())
    manifest = {"version": CHECKPOINT_VERSION, "dtype": "<f8", "count": int(offset),
                "params": entries, "extra": _jsonable(extra or {})}
    (d / "checkpoint.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return d


def checkpoint_load(directory) -> ParamStore:
    d = Path(directory)
    try:
        manifest = json.loads((d / "checkpoint.json").read_text())
        raw = (d / "checkpoint.bin").read_bytes()
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint in {d}: {exc}") from None
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {manifest.get('version')!r} does not match "
                              f"supported version {CHECKPOINT_VERSION}")
    blob = np.frombuffer(raw, dtype="<f8")
    if blob.size != manifest["count"]:
        raise CheckpointError(f"checkpoint data holds {blob.size} values, manifest expects "
                              f"{manifest['count']}")
    store = ParamStore()
    for e in manifest["params"]:
        size = int(np.prod(e["shape"])) if e["shape"] else 1
        arr = blob[e["offset"]:e["offset"] + size].astype(np.float64).reshape(e["shape"])
        store.add(e["name"], arr)
    return store


def checkpoint_extra(directory) -> dict:
    return json.loads((Path(directory) / "checkpoint.json").read_text()).get("extra", {})
