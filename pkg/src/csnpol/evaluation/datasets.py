"""Loaders for the SEM16, P-Stance and VAST stance-detection files.

The files themselves are licensed separately and supplied by the user. Expected
layouts (column names are matched case-insensitively):

* SEM16: tab-separated ``ID  Target  Tweet  Stance``; stance FAVOR/AGAINST/NONE.
  The official files are Windows-1252 encoded; UTF-8 is tried first.
* P-Stance: comma-separated ``Tweet,Target,Stance``; stance FAVOR/AGAINST only.
* VAST: comma-separated with ``post``, ``topic_str`` (or ``new_topic``/``topic``)
  and ``label`` where 0 = con, 1 = pro, 2 = neutral.

A directory path loads every ``.csv``/``.tsv``/``.txt`` file in it; the split is
read from the file name (train, dev/val/trial, otherwise test).
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

from ..errors import FormatError
from .metrics import Stance

log = logging.getLogger(__name__)


class DatasetFormat(str, enum.Enum):
    SEM16 = "SEM16"
    PSTANCE = "PStance"
    VAST = "VAST"

    @classmethod
    def parse(cls, name: str) -> "DatasetFormat":
        key = name.replace("-", "").replace("_", "").lower()
        for f in cls:
            if f.value.lower() == key:
                return f
        raise ValueError(f"unknown dataset format {name!r}")


@dataclass(frozen=True)
class EvalRecord:
    text: str
    target: str
    gold: Stance
    dataset: DatasetFormat
    split: str = "test"

    def __post_init__(self):
        if self.dataset is DatasetFormat.PSTANCE and self.gold is Stance.NONE:
            raise ValueError("P-Stance records are Favor or Against only")


COLUMNS = {
    DatasetFormat.SEM16: {"text": ("tweet", "text"), "target": ("target",), "label": ("stance", "label")},
    DatasetFormat.PSTANCE: {"text": ("tweet", "text"), "target": ("target",), "label": ("stance", "label")},
    DatasetFormat.VAST: {"text": ("post", "text"), "target": ("topic_str", "new_topic", "topic"),
                         "label": ("label",)},
}

VAST_LABELS = {"0": Stance.AGAINST, "1": Stance.FAVOR, "2": Stance.NONE}


def _split_of(path: Path) -> str:
    # whole name parts only: "SemEval" must not read as "val"
    parts = [x for x in re.split(r"[^a-z]+", path.stem.lower()) if x]
    if any(x.startswith("train") for x in parts):
        return "train"
    if any(x in {"dev", "val", "valid", "validation"} or x.startswith("trial") for x in parts):
        return "dev"
    return "test"


def _read_text(path: Path) -> str:
    raw = path.read_bytes()
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError:
        return raw.decode("cp1252", errors="replace")


def _load_file(path: Path, fmt: DatasetFormat) -> list[EvalRecord]:
    text = _read_text(path)
    if not text.strip():
        raise FormatError(f"{path}: file is empty")
    first = text.splitlines()[0]
    delimiter = "\t" if "\t" in first else ","
    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    header = {h.strip().lower(): h for h in (reader.fieldnames or []) if h}
    cols = {}
    for role, names in COLUMNS[fmt].items():
        hit = next((header[n] for n in names if n in header), None)
        if hit is None:
            raise FormatError(f"{path}: missing column {names[0]!r} for {fmt.value} "
                              f"(found {', '.join(reader.fieldnames or []) or 'no header'})")
        cols[role] = hit
    split = _split_of(path)
    out = []
    for lineno, row in enumerate(reader, start=2):
        raw_label = (row.get(cols["label"]) or "").strip()
        try:
            gold = VAST_LABELS[raw_label] if fmt is DatasetFormat.VAST else Stance.parse(raw_label)
            out.append(EvalRecord((row.get(cols["text"]) or "").strip(), (row.get(cols["target"]) or "").strip(),
                                  gold, fmt, split))
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: bad label {raw_label!r} ({exc})") from None
    return out


def load_dataset(path: str | Path, fmt: DatasetFormat | str) -> list[EvalRecord]:
    fmt = fmt if isinstance(fmt, DatasetFormat) else DatasetFormat.parse(fmt)
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in {".csv", ".tsv", ".txt"})
        if not files:
            raise FormatError(f"{path}: no dataset files found")
    else:
        files = [path]
    records = []
    for f in files:
        records.extend(_load_file(f, fmt))
    for target, counts in count_by_target(records).items():
        log.info("%s %s: %s", fmt.value, target, ", ".join(f"{k}={v}" for k, v in counts.items()))
    return records


def count_by_target(records) -> dict[str, dict[str, int]]:
    counts: dict[str, Counter] = defaultdict(Counter)
    for r in records:
        counts[r.target][r.gold.value] += 1
    return {t: {s.value: c[s.value] for s in Stance} for t, c in sorted(counts.items())}


# Published per-target class counts (Pro / Con / Neutral), all splits pooled.
PUBLISHED_COUNTS = {
    DatasetFormat.SEM16: {
        "Donald Trump": (148, 299, 260),
        "Hillary Clinton": (163, 565, 256),
        "Feminist Movement": (268, 511, 170),
        "Legalization of Abortion": (167, 544, 222),
        "Atheism": (124, 464, 145),
        "Climate Change is a Real Concern": (335, 26, 203),
    },
    DatasetFormat.PSTANCE: {
        "Joe Biden": (3217, 4079, None),
        "Bernie Sanders": (3551, 2774, None),
        "Donald Trump": (3663, 4290, None),
    },
    DatasetFormat.VAST: {
        None: (6952, 7297, 4296),
    },
}


def published_count_mismatches(records, fmt: DatasetFormat | str) -> list[str]:
    """Cells of the published class-count table that the loaded records do not reproduce."""
    fmt = fmt if isinstance(fmt, DatasetFormat) else DatasetFormat.parse(fmt)
    counts = count_by_target(records)
    problems = []
    for target, expected in PUBLISHED_COUNTS[fmt].items():
        if target is None:
            got = Counter()
            for c in counts.values():
                got.update(c)
        else:
            key = next((t for t in counts if t.lower() == target.lower()), None)
            if key is None:
                problems.append(f"{target}: target absent")
                continue
            got = counts[key]
        for stance, want in zip((Stance.FAVOR, Stance.AGAINST, Stance.NONE), expected):
            if want is not None and got[stance.value] != want:
                problems.append(f"{target or 'all'} {stance.value}: expected {want}, got {got[stance.value]}")
    return problems
