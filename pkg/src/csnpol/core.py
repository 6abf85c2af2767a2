"""Domain types, score normalization and time slicing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CommentFormatError, EmptyCorpus, InvalidScore, InvalidWindow

DEFAULT_MAX_SUBGROUPS = 10


def derive_seed(seed: int, stage: str) -> int:
    """Per-stage seed: first 8 bytes of sha256("<seed>/<stage>"), as a 63-bit integer."""
    digest = hashlib.sha256(f"{int(seed)}/{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def canonical_hash(obj) -> str:
    """Short stable hash of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_timestamp(value: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime."""
    if not isinstance(value, str):
        raise ValueError(f"timestamp must be a string, got {type(value).__name__}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp {value!r} has no UTC offset")
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class Comment:
    id: str
    text: str
    author: str
    likes: int
    timestamp: datetime
    topic: str = ""

    def __post_init__(self):
        if not isinstance(self.likes, int) or isinstance(self.likes, bool) or self.likes < 0:
            raise ValueError(f"comment {self.id}: likes must be a non-negative integer")
        if not self.text or not self.text.strip():
            raise ValueError(f"comment {self.id}: text is empty")
        if self.timestamp.tzinfo is None:
            raise ValueError(f"comment {self.id}: timestamp must be timezone-aware")

    @classmethod
    def from_dict(cls, d: dict) -> "Comment":
        missing = [k for k in ("id", "text", "author", "likes", "timestamp") if k not in d]
        if missing:
            raise ValueError(f"missing field(s): {', '.join(missing)}")
        return cls(
            id=str(d["id"]),
            text=d["text"],
            author=str(d["author"]),
            likes=d["likes"],
            timestamp=parse_timestamp(d["timestamp"]),
            topic=str(d.get("topic", "")),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "author": self.author,
            "likes": self.likes,
            "timestamp": format_timestamp(self.timestamp),
            "topic": self.topic,
        }


@dataclass(frozen=True)
class Subgroup:
    """One opinion subgroup; ``index`` is its row/column in every CSN matrix."""

    index: int
    label: str
    description: str = ""

    def to_dict(self) -> dict:
        return {"index": self.index, "label": self.label, "description": self.description}

    @classmethod
    def from_dict(cls, d: dict) -> "Subgroup":
        return cls(int(d["index"]), str(d["label"]), str(d.get("description", "")))


def validate_roster(subgroups: Sequence[Subgroup], max_subgroups: int = DEFAULT_MAX_SUBGROUPS) -> None:
    indices = [g.index for g in subgroups]
    if len(set(indices)) != len(indices):
        raise ValueError("subgroup indices must be unique")
    if sorted(indices) != list(range(len(indices))):
        raise ValueError("subgroup indices must be 0..n-1")
    if len(indices) > max_subgroups:
        raise ValueError(f"{len(indices)} subgroups exceed the maximum of {max_subgroups}")


def clamp_score(raw: float) -> float:
    """Clamp a raw sentiment value into [-1, 1]."""
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise InvalidScore(f"score {raw!r} is not a number") from None
    if not math.isfinite(value):
        raise InvalidScore(f"score {raw!r} is not finite")
    return min(1.0, max(-1.0, value))


@dataclass(frozen=True)
class Triplet:
    """Per-comment analysis result: (stance, score, target) plus the comment's likes.

    ``stance`` and ``target`` are subgroup indices; a ``None`` stance marks an
    incomplete triplet that the CSN builder imputes.
    """

    stance: int | None
    score: float
    target: int
    likes: int = 0
    comment_id: str = ""

    def __post_init__(self):
        if self.target is None:
            raise ValueError("a triplet must have a target subgroup")
        if self.likes < 0:
            raise ValueError("likes must be non-negative")
        if not -1.0 <= self.score <= 1.0:
            raise InvalidScore(f"score {self.score} outside [-1, 1]")

    @property
    def complete(self) -> bool:
        return self.stance is not None

    def to_dict(self) -> dict:
        return {
            "comment_id": self.comment_id,
            "stance": self.stance,
            "score": self.score,
            "target": self.target,
            "likes": self.likes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Triplet":
        stance = d.get("stance")
        return cls(
            stance=None if stance is None else int(stance),
            score=float(d["score"]),
            target=int(d["target"]),
            likes=int(d.get("likes", 0)),
            comment_id=str(d.get("comment_id", "")),
        )


@dataclass(frozen=True)
class TimeSlice:
    start: datetime
    end: datetime
    comments: tuple[Comment, ...] = ()

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError("slice start must precede its end")
        for c in self.comments:
            if not self.start <= c.timestamp < self.end:
                raise ValueError(f"comment {c.id} lies outside [{self.start}, {self.end})")

    def __len__(self):
        return len(self.comments)


def slice_by_time(comments: Sequence[Comment], window: timedelta) -> list[TimeSlice]:
    """Partition comments into consecutive half-open windows starting at the earliest one.

    Windows without comments are still emitted so the series stays evenly spaced.
    """
    if not isinstance(window, timedelta) or window <= timedelta(0):
        raise InvalidWindow(f"window must be a positive duration, got {window!r}")
    if not comments:
        raise EmptyCorpus("no comments to slice")
    t0 = min(c.timestamp for c in comments)
    t1 = max(c.timestamp for c in comments)
    n = (t1 - t0) // window + 1
    buckets: list[list[Comment]] = [[] for _ in range(n)]
    for c in sorted(comments, key=lambda c: c.timestamp):
        buckets[(c.timestamp - t0) // window].append(c)
    return [
        TimeSlice(t0 + k * window, t0 + (k + 1) * window, tuple(b))
        for k, b in enumerate(buckets)
    ]


def parse_duration(text: str) -> timedelta:
    """Parse durations like ``90s``, ``15m``, ``6h``, ``1d``, ``2w`` or plain seconds."""
    units = {"s": 1, "m": 60, "h": 3600, "d": 86400, "w": 604800}
    s = str(text).strip().lower()
    try:
        if s and s[-1] in units:
            seconds = float(s[:-1]) * units[s[-1]]
        else:
            seconds = float(s)
    except ValueError:
        raise InvalidWindow(f"cannot parse duration {text!r}") from None
    if not seconds > 0:
        raise InvalidWindow(f"window must be positive, got {text!r}")
    return timedelta(seconds=seconds)


def read_comments(path: str | Path, strict: bool = False) -> tuple[list[Comment], list[tuple[int, str]]]:
    """Read a comments JSONL file.

    Returns the parsed comments and a list of ``(line_number, problem)`` for
    every skipped line. With ``strict`` the first bad line raises instead.
    """
    comments: list[Comment] = []
    problems: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                comments.append(Comment.from_dict(obj))
            except (ValueError, TypeError) as exc:
                if strict:
                    raise CommentFormatError(str(exc), line=lineno) from None
                problems.append((lineno, str(exc)))
    return comments, problems


def write_comments(comments: Iterable[Comment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(json.dumps(c.to_dict(), ensure_ascii=False) + "\n")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CSN:
    """Community Sentiment Network.

    ``adjacency[i, j]`` is the likes-weighted mean sentiment of subgroup ``i``
    towards ``j`` and is NaN when no comment was observed for the pair.
    Diagonal entries are self-loops.
    """

    subgroups: tuple[Subgroup, ...]
    adjacency: np.ndarray
    comment_count: np.ndarray
    total_comments: int
    weight_sum: np.ndarray | None = None
    count: np.ndarray | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.subgroups)
        object.__setattr__(self, "subgroups", tuple(self.subgroups))
        object.__setattr__(self, "adjacency", _frozen(np.asarray(self.adjacency, dtype=float).reshape(n, n)))
        object.__setattr__(self, "comment_count", _frozen(np.asarray(self.comment_count, dtype=np.int64).reshape(n)))
        if self.weight_sum is None:
            object.__setattr__(self, "weight_sum", np.where(np.isnan(self.adjacency), 0.0, 1.0))
        if self.count is None:
            object.__setattr__(self, "count", np.where(np.isnan(self.adjacency), 0, 1))
        object.__setattr__(self, "weight_sum", _frozen(np.asarray(self.weight_sum, dtype=float).reshape(n, n)))
        object.__setattr__(self, "count", _frozen(np.asarray(self.count, dtype=np.int64).reshape(n, n)))
        self.validate()

    @property
    def size(self) -> int:
        return len(self.subgroups)

    def has_edge(self, i: int, j: int) -> bool:
        return not math.isnan(self.adjacency[i, j])

    def edge(self, i: int, j: int) -> float | None:
        v = self.adjacency[i, j]
        return None if math.isnan(v) else float(v)

    def edges(self):
        """Yield ``(src, tgt, score)`` for present edges in row-major index order."""
        for i in range(self.size):
            for j in range(self.size):
                if self.has_edge(i, j):
                    yield i, j, float(self.adjacency[i, j])

    def validate(self) -> None:
        n = self.size
        validate_roster(self.subgroups, max_subgroups=max(n, 1))
        if self.adjacency.shape != (n, n):
            raise ValueError("adjacency must be square with side == number of subgroups")
        present = self.adjacency[~np.isnan(self.adjacency)]
        if present.size and (present.min() < -1.0 or present.max() > 1.0):
            raise ValueError("edge scores must lie in [-1, 1]")
        if (self.comment_count < 0).any() or self.total_comments < 0:
            raise ValueError("comment counts must be non-negative")
        if int(self.comment_count.sum()) != self.total_comments:
            raise ValueError("comment counts must sum to total_comments")
        if (np.isnan(self.adjacency) != (self.weight_sum == 0)).any():
            raise ValueError("an edge is present exactly when its weight sum is positive")

    def to_dict(self) -> dict:
        d = {
            "subgroups": [g.to_dict() for g in self.subgroups],
            "edges": [
                {
                    "src": i,
                    "tgt": j,
                    "score": s,
                    "weight_sum": float(self.weight_sum[i, j]),
                    "count": int(self.count[i, j]),
                }
                for i, j, s in self.edges()
            ],
            "comment_count": [int(x) for x in self.comment_count],
            "total_comments": int(self.total_comments),
            "seed": self.seed,
        }
        d.update(self.meta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CSN":
        subgroups = tuple(Subgroup.from_dict(g) for g in d["subgroups"])
        n = len(subgroups)
        adj = np.full((n, n), np.nan)
        ws = np.zeros((n, n))
        cnt = np.zeros((n, n), dtype=np.int64)
        for e in d["edges"]:
            i, j = int(e["src"]), int(e["tgt"])
            adj[i, j] = float(e["score"])
            ws[i, j] = float(e.get("weight_sum", 1.0))
            cnt[i, j] = int(e.get("count", 1))
        meta = {k: v for k, v in d.items()
                if k not in {"subgroups", "edges", "comment_count", "total_comments", "seed"}}
        return cls(subgroups, adj, d["comment_count"], int(d["total_comments"]), ws, cnt, d.get("seed"), meta)

    def with_adjacency(self, adjacency: np.ndarray) -> "CSN":
        """Copy with a replaced adjacency; weight/count become presence indicators if the pattern changes."""
        adjacency = np.asarray(adjacency, dtype=float)
        same = (np.isnan(adjacency) == np.isnan(self.adjacency)).all()
        return CSN(self.subgroups, adjacency, self.comment_count, self.total_comments,
                   self.weight_sum if same else None, self.count if same else None,
                   self.seed, dict(self.meta))
