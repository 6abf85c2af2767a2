"""Human-expert fallback for comments the subgroup explorer could not place."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from ..core import Subgroup, Triplet
from ..errors import ReviewFormatError, SubgroupOverflow


class ReviewMode(str, enum.Enum):
    INTERACTIVE = "interactive"
    FILE = "file"


@dataclass(frozen=True)
class ReviewItem:
    comment_id: str
    text: str
    candidate_subgroups: tuple[Subgroup, ...]
    resolution: Subgroup | None = None

    def to_dict(self) -> dict:
        return {
            "comment_id": self.comment_id,
            "text": self.text,
            "candidate_subgroups": [g.to_dict() for g in self.candidate_subgroups],
            "resolution": None if self.resolution is None else self.resolution.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewItem":
        res = d.get("resolution")
        return cls(
            comment_id=str(d["comment_id"]),
            text=str(d.get("text", "")),
            candidate_subgroups=tuple(Subgroup.from_dict(g) for g in d.get("candidate_subgroups", [])),
            resolution=None if res is None else Subgroup.from_dict(res),
        )


def write_review_file(items: Sequence[ReviewItem], path: str | Path, append: bool = True) -> None:
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item.to_dict(), ensure_ascii=False) + "\n")


def _new_subgroup(roster: list[Subgroup], label: str, max_subgroups: int) -> Subgroup:
    for g in roster:
        if g.label.lower() == label.lower():
            return g
    if len(roster) >= max_subgroups:
        raise SubgroupOverflow([g.label for g in roster] + [label], max_subgroups)
    g = Subgroup(len(roster), label, "added during human review")
    roster.append(g)
    return g


def human_review(
    queue: Sequence[ReviewItem],
    mode: ReviewMode | str,
    *,
    roster: list[Subgroup] | None = None,
    path: str | Path | None = None,
    max_subgroups: int = 10,
    input_fn: Callable[[str], str] = input,
    output_fn: Callable[[str], None] = print,
) -> list[ReviewItem]:
    """Resolve uncertain comments.

    Interactive mode asks on the terminal, offering each subgroup by its index
    plus ``n`` (new subgroup) and ``s`` (skip); a new subgroup is appended to
    ``roster``. File mode appends the queue to ``path`` unresolved, for a
    later ``review --apply``.
    """
    if not queue:
        raise ValueError("review queue is empty")
    mode = ReviewMode(mode)
    if mode is ReviewMode.FILE:
        if path is None:
            raise ValueError("file-mode review needs a path")
        write_review_file(queue, path)
        return list(queue)

    roster = roster if roster is not None else list(queue[0].candidate_subgroups)
    out = []
    for item in queue:
        output_fn(f"\nComment {item.comment_id}: {item.text}")
        for g in roster:
            output_fn(f"  [{g.index}] {g.label}")
        output_fn("  [n] new subgroup   [s] skip")
        choice = None
        while True:
            answer = input_fn("subgroup> ").strip().lower()
            if answer in ("s", "skip", ""):
                break
            if answer in ("n", "new"):
                label = input_fn("new subgroup label> ").strip()
                if label:
                    choice = _new_subgroup(roster, label, max_subgroups)
                    break
                continue
            if answer.isdigit() and int(answer) < len(roster):
                choice = roster[int(answer)]
                break
            output_fn(f"  unknown choice {answer!r}")
        out.append(replace(item, candidate_subgroups=tuple(roster), resolution=choice))
    return out


def read_review_file(path: str | Path, roster: list[Subgroup], max_subgroups: int = 10) -> dict[str, Subgroup | None]:
    """Map comment id to its resolution.

    A resolution may be a subgroup index, a label (a new label extends
    ``roster``), a subgroup object, or null for still unresolved.
    """
    problems: list[tuple[int, str]] = []
    resolved: dict[str, Subgroup | None] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for n, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            d = json.loads(raw)
        except ValueError as exc:
            problems.append((n, f"invalid JSON ({exc.msg})"))
            continue
        if not isinstance(d, dict) or "comment_id" not in d:
            problems.append((n, "expected an object with comment_id"))
            continue
        res = d.get("resolution")
        try:
            if res is None:
                g = None
            elif isinstance(res, bool):
                raise ValueError("resolution must not be a boolean")
            elif isinstance(res, int):
                if not 0 <= res < len(roster):
                    raise ValueError(f"subgroup index {res} not in roster of {len(roster)}")
                g = roster[res]
            elif isinstance(res, str):
                g = _new_subgroup(roster, res.strip(), max_subgroups) if res.strip() else None
            elif isinstance(res, dict) and "label" in res:
                g = _new_subgroup(roster, str(res["label"]), max_subgroups)
            else:
                raise ValueError(f"unsupported resolution {res!r}")
        except (ValueError, SubgroupOverflow) as exc:
            problems.append((n, str(exc)))
            continue
        resolved[str(d["comment_id"])] = g
    if problems:
        raise ReviewFormatError(problems)
    return resolved


def apply_resolutions(triplets: Sequence[Triplet], resolutions: dict[str, Subgroup | None]) -> tuple[list[Triplet], int]:
    """Give null-stance triplets the stance a reviewer chose; returns (triplets, upgraded count)."""
    out = []
    upgraded = 0
    for t in triplets:
        g = resolutions.get(t.comment_id)
        if t.stance is None and g is not None:
            t = replace(t, stance=g.index)
            upgraded += 1
        out.append(t)
    return out, upgraded
