"""Ranking metrics (ROC AUC, average precision) and the benchmark-suite runner."""

from __future__ import annotations

import hashlib
import json
import logging
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import rankdata

logger = logging.getLogger(__name__)


class TiedScoresWarning(UserWarning):
    """Average precision saw ties spanning positives and negatives."""


@dataclass(frozen=True)
class EvalResult:
    auc: float
    ap: float
    n_pos: int
    n_neg: int


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise ValueError(f"scores and labels differ in length: {s.size} vs {y.size}")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if y.all() or not y.any():
        raise ValueError("labels must contain both anomalies and normals")
    return s, y


def auc_roc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie)."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    ranks = rankdata(s)  # average ranks give ties half credit
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Sum of precision@k over the ranks k holding a positive, divided by n_pos.

    Instances are ranked by descending score; equal scores keep input order.
    """
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="stable")
    ys, ss = y[order], s[order]
    _, first, counts = np.unique(ss, return_index=True, return_counts=True)
    for start, c in zip(first, counts):
        if c > 1 and 0 < ys[start:start + c].sum() < c:
            warnings.warn("tied scores straddle anomalies and normals; AP depends on input order",
                          TiedScoresWarning, stacklevel=2)
            break
    hits = np.cumsum(ys)
    precision = hits / np.arange(1, ys.size + 1)
    return float(precision[ys].sum() / ys.sum())


def evaluate(scores, labels) -> EvalResult:
    s, y = _check(scores, labels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TiedScoresWarning)
        ap = average_precision(s, y)
    return EvalResult(auc_roc(s, y), ap, int(y.sum()), int((~y).sum()))


def params_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def run_experiment(suite_dir: str | Path, fit_score: Callable[[Path], tuple[np.ndarray, np.ndarray]],
                   params: dict, out_path: str | Path | None = None, pattern: str = "*.csv") -> dict:
    """Score every CSV in ``suite_dir`` and collect AUC/AP per dataset.

    ``fit_score(path)`` returns ``(scores, labels)``. A failing dataset gets
    an ``error`` entry and the suite carries on.
    """
    files = sorted(Path(suite_dir).glob(pattern))
    if not files:
        raise FileNotFoundError(f"no files matching {pattern!r} in {suite_dir}")
    h = params_hash(params)
    rows = []
    for f in files:
        t0 = time.perf_counter()
        row: dict = {"dataset": f.name, "params_hash": h}
        try:
            scores, labels = fit_score(f)
            r = evaluate(scores, labels)
            row.update(auc=r.auc, ap=r.ap)
        except Exception as exc:  # noqa: BLE001 - reported per dataset
            logger.warning("%s failed: %s", f.name, exc)
            row.update(auc=None, ap=None, error=f"{type(exc).__name__}: {exc}")
        row["wall_time_ms"] = round(1000.0 * (time.perf_counter() - t0), 1)
        rows.append(row)
    ok = [r for r in rows if r.get("error") is None]
    aggregate = {
        "dataset": "__aggregate__",
        "params_hash": h,
        "auc": float(np.mean([r["auc"] for r in ok])) if ok else None,
        "ap": float(np.mean([r["ap"] for r in ok])) if ok else None,
        "wall_time_ms": round(sum(r["wall_time_ms"] for r in rows), 1),
        "n_datasets": len(rows),
        "n_failed": len(rows) - len(ok),
    }
    report = {"suite": str(suite_dir), "params": params, "datasets": rows, "aggregate": aggregate}
    if out_path is not None:
        Path(out_path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return report

