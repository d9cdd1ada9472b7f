"""CSV/JSON emission with lossless floats and a checksummed manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from datetime import datetime, timezone
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.17g}"
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Header and rows (as strings) of a CSV written by :func:`write_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, files, config, version, command) -> Path:
    """Append a run record to ``out_dir/manifest.json``.

    Earlier runs in the same directory stay listed, so every file present there
    keeps its checksum entry.
    """
    out_dir = Path(out_dir)
    path = out_dir / "manifest.json"
    runs = []
    if path.exists():
        try:
            previous = json.loads(path.read_text(encoding="utf-8"))
            runs = list(previous.get("runs", []))
        except (ValueError, AttributeError):
            runs = []
    names = {Path(f).name for f in files}
    for run in runs:
        run["files"] = [f for f in run.get("files", []) if f.get("name") not in names]
    runs.append({
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config,
        "files": [{"name": Path(f).name, "sha256": sha256(f)} for f in files],
    })
    manifest = {"tool": "qfelo", "version": version, "python": platform.python_version(), "runs": runs}
    return write_json(path, manifest)
