"""Zero-shot stance-detection evaluation over loaded records."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..core import canonical_hash, derive_seed
from ..errors import CsnpolError, EmptyEval
from .datasets import DatasetFormat, EvalRecord
from .metrics import ConfusionCounts, Stance, f_avg, macro_f1, map_score_to_stance

log = logging.getLogger(__name__)


def select_records(records: Sequence[EvalRecord], limit: int | None, seed: int = 0) -> list[EvalRecord]:
    """All records, or a seeded uniform sample of ``limit`` of them in their original order."""
    if limit is None or limit >= len(records):
        return list(records)
    if limit <= 0:
        raise EmptyEval("limit must be positive")
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "eval-sample")))
    picked = sorted(rng.choice(len(records), size=limit, replace=False).tolist())
    return [records[i] for i in picked]


def _read_checkpoint(path: Path) -> dict[int, dict]:
    done = {}
    if not path.exists():
        return done
    for raw in path.read_text(encoding="utf-8").splitlines():
        try:
            row = json.loads(raw)
        except ValueError:
            # a line cut short by a kill
            continue
        if isinstance(row, dict) and isinstance(row.get("i"), int):
            done[row["i"]] = row
    return done


def run_zero_shot_eval(
    records: Sequence[EvalRecord],
    config,
    tau: float = 0.1,
    *,
    limit: int | None = None,
    checkpoint: str | Path | None = None,
    score_fn: Callable[[str, str], float] | None = None,
    seed: int = 0,
) -> dict:
    """Score every record, then aggregate per-target confusion counts.

    SEM16 and P-Stance report F_avg, VAST reports Macro-F1. P-Stance has no
    neutral class, so its scores are mapped by sign alone. Records whose
    analysis fails are counted and left out; the report is then PARTIAL.
    """
    if limit is not None and limit <= 0:
        raise EmptyEval("limit must be positive")
    records = select_records(records, limit, seed)
    if not records:
        raise EmptyEval("no records to evaluate")
    if score_fn is None:
        from ..agents.pipeline import stance_score

        def score_fn(text, target):
            return stance_score(text, target, config)

    datasets = {r.dataset for r in records}
    if len(datasets) != 1:
        raise ValueError("records from several datasets cannot share one report")
    dataset = datasets.pop()
    binary = dataset is DatasetFormat.PSTANCE
    effective_tau = 0.0 if binary else tau

    ckpt = Path(checkpoint) if checkpoint else None
    done = _read_checkpoint(ckpt) if ckpt else {}
    fh = open(ckpt, "a", encoding="utf-8") if ckpt else None
    try:
        for i, r in enumerate(records):
            if i in done:
                continue
            try:
                score = score_fn(r.text, r.target)
                row = {"i": i, "score": score,
                       "pred": map_score_to_stance(score, effective_tau, binary).value}
            except (CsnpolError, ValueError) as exc:
                log.warning("record %d failed: %s", i, exc)
                row = {"i": i, "failure": str(exc)}
            done[i] = row
            if fh:
                fh.write(json.dumps(row) + "\n")
                fh.flush()
    finally:
        if fh:
            fh.close()

    per_target: dict[str, ConfusionCounts] = defaultdict(ConfusionCounts)
    failures = 0
    for i, r in enumerate(records):
        row = done[i]
        if "failure" in row:
            failures += 1
            continue
        per_target[r.target].add(r.gold, Stance(row["pred"]))

    metric_name, metric = ("macro_f1", macro_f1) if dataset is DatasetFormat.VAST else ("f_avg", f_avg)
    pooled = ConfusionCounts()
    targets = {}
    for t in sorted(per_target):
        cc = per_target[t]
        pooled = pooled.merge(cc)
        targets[t] = {"n": cc.total, "confusion": cc.to_dict(), metric_name: metric(cc)}
    agents = getattr(config, "agents", {}) or {}
    return {
        "dataset": dataset.value,
        "metric": metric_name,
        "overall": metric(pooled) if pooled.total else 0.0,
        "per_target": targets,
        "records": len(records),
        "scored": pooled.total,
        "failures": failures,
        "status": "PARTIAL" if failures else "COMPLETE",
        "tau": effective_tau,
        "config_hash": config.hash() if hasattr(config, "hash") else canonical_hash(repr(config)),
        "models": {getattr(r, "value", str(r)): a.model_name for r, a in sorted(agents.items(), key=lambda kv: str(kv[0]))},
    }


def format_report(report: dict) -> str:
    name = report["metric"]
    lines = [f"{report['dataset']}  ({name}, tau={report['tau']}, status={report['status']}, "
             f"failures={report['failures']})", f"{'target':<40} {'n':>6} {name:>9}"]
    for t, row in report["per_target"].items():
        lines.append(f"{t[:40]:<40} {row['n']:>6} {row[name] * 100:>8.1f}%")
    lines.append(f"{'overall':<40} {report['scored']:>6} {report['overall'] * 100:>8.1f}%")
    return "\n".join(lines)
