"""
Run-directory I/O: JSON documents, sample CSVs, scatter SVGs and the evaluation table.

Every writer is deterministic given its inputs; nothing time-dependent is emitted.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from src.exceptions import DimensionMismatchError
from src.logging_config import get_logger
from src.schemas.evaluation import EvalRow

logger = get_logger(__name__)

EVAL_COLUMNS = ["run_id", "metric", "value", "config_hash"]
SVG_SIZE = 400
SVG_MARGIN = 20


class RunDirectory:
    """Local filesystem layout of one run."""

    RESOLVED_CONFIG = "resolved_config.json"
    TRAIN_LOG = "train_log.csv"
    FINAL_CHECKPOINT = "checkpoint_final.json"
    FINAL_SAMPLES = "final_samples.csv"
    SCATTER = "samples.svg"
    METRICS = "metrics.prom"

    def __init__(self, base_path: str | Path):
        self.base_path = Path(base_path)
        self.base_path.mkdir(parents=True, exist_ok=True)
        logger.info("Run directory ready", base_path=str(self.base_path))

    def path(self, name: str) -> Path:
        return self.base_path / name

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        target.write_text(text, encoding="utf-8")
        logger.debug("Artifact written", path=str(target))
        return target

    def write_json(self, name: str, payload: Any) -> Path:
        return write_json(self.path(name), payload)

    def exists(self, name: str) -> bool:
        return self.path(name).exists()


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def samples_csv_text(X: np.ndarray, dim: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{i}" for i in range(dim)])
    for row in np.asarray(X, dtype=float).reshape(-1, dim):
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_samples_csv(path: str | Path, X: Any, dim: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(samples_csv_text(np.asarray(X, dtype=float), dim), encoding="utf-8")
    return path


def read_samples_csv(path: str | Path) -> np.ndarray:
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or not all(h.startswith("x") for h in header):
            raise DimensionMismatchError(f"{path}: expected a header of x0, x1, ... columns")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        return np.empty((0, len(header)))
    X = np.asarray(rows, dtype=float)
    if X.shape[1] != len(header):
        raise DimensionMismatchError(f"{path}: rows do not match the {len(header)}-column header")
    return X


def scatter_svg(X: Any, dim: int | None = None) -> str:
    """
    SVG scatter of the first two coordinates; one-dimensional samples are drawn
    on a horizontal line. Output depends only on the sample values.
    """
    P = np.asarray(X, dtype=float)
    d = dim if dim is not None else (P.shape[1] if P.ndim == 2 else 1)
    P = P.reshape(-1, d)
    inner = SVG_SIZE - 2 * SVG_MARGIN
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" '
        f'viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        f'<rect x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white"/>',
    ]
    if P.shape[0]:
        xs = P[:, 0]
        ys = P[:, 1] if d > 1 else np.zeros_like(xs)
        lo_x, hi_x = float(xs.min()), float(xs.max())
        lo_y, hi_y = float(ys.min()), float(ys.max())
        span_x = hi_x - lo_x or 1.0
        span_y = hi_y - lo_y or 1.0
        for x, y in zip(xs, ys):
            cx = SVG_MARGIN + (x - lo_x) / span_x * inner
            cy = SVG_SIZE - SVG_MARGIN - (y - lo_y) / span_y * inner if d > 1 else SVG_SIZE / 2
            lines.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="1.5" fill="steelblue"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_scatter_svg(path: str | Path, X: Any, dim: int | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(scatter_svg(X, dim), encoding="utf-8")
    return path


def append_eval_rows(path: str | Path, rows: Iterable[EvalRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new_file = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        if new_file:
            writer.writerow(EVAL_COLUMNS)
        for row in rows:
            writer.writerow([row.run_id, row.metric, repr(row.value), row.config_hash])
    logger.info("Evaluation rows appended", path=str(path))
    return path
