"""Community Opposition Index over a CSN and over a time series of slices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .core import CSN, TimeSlice, format_timestamp
from .csn import internal_cohesion
from .errors import CsnpolError, EmptyNetwork


@dataclass(frozen=True)
class SubgroupTerm:
    subgroup: str
    share: float
    cohesion: float
    hostility_sum: float
    contribution: float


@dataclass(frozen=True)
class CoiReport:
    total: float
    per_subgroup: tuple[SubgroupTerm, ...]
    slice_bounds: tuple[str, str] | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "total": self.total,
            "per_subgroup": [t.__dict__.copy() for t in self.per_subgroup],
            "slice_bounds": list(self.slice_bounds) if self.slice_bounds else None,
        }
        d.update(self.meta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CoiReport":
        bounds = d.get("slice_bounds")
        meta = {k: v for k, v in d.items() if k not in {"total", "per_subgroup", "slice_bounds"}}
        return cls(float(d["total"]), tuple(SubgroupTerm(**t) for t in d["per_subgroup"]),
                   tuple(bounds) if bounds else None, meta)

    def table(self) -> str:
        head = f"{'subgroup':<24} {'share':>8} {'t_i':>8} {'hostility':>10} {'contribution':>13}"
        lines = [head, "-" * len(head)]
        for t in self.per_subgroup:
            lines.append(f"{t.subgroup[:24]:<24} {t.share:>8.4f} {t.cohesion:>8.4f} "
                         f"{t.hostility_sum:>10.4f} {t.contribution:>13.6f}")
        lines.append("-" * len(head))
        lines.append(f"{'total':<24} {'':>8} {'':>8} {'':>10} {self.total:>13.6f}")
        return "\n".join(lines)


def hostility_term(e_ij: float) -> float:
    """Negative sentiment counts as hostility; friendly or neutral edges contribute nothing."""
    return -e_ij if e_ij < 0 else 0.0


def hostility_sum(csn: CSN, i: int) -> float:
    # the self-loop only enters through cohesion
    return math.fsum(hostility_term(float(csn.adjacency[i, j]))
                     for j in range(csn.size) if j != i and csn.has_edge(i, j))


def subgroup_polarization(csn: CSN, i: int, cohesion: float | None = None,
                          default_cohesion: float = 1.0) -> float:
    if not 0 <= i < csn.size:
        raise IndexError(f"subgroup {i} outside a {csn.size}-subgroup network")
    t = internal_cohesion(csn, i, default_cohesion) if cohesion is None else cohesion
    return t * hostility_sum(csn, i)


def coi(csn: CSN, cohesion: Sequence[float] | None = None, default_cohesion: float = 1.0) -> CoiReport:
    """Size-weighted sum of per-subgroup polarization.

    ``cohesion`` overrides the self-loop derived ``t_i`` values.
    """
    n_total = csn.total_comments
    if n_total <= 0:
        raise EmptyNetwork("the network has no comments (N == 0)")
    terms = []
    for g in csn.subgroups:
        i = g.index
        t = internal_cohesion(csn, i, default_cohesion) if cohesion is None else float(cohesion[i])
        h = hostility_sum(csn, i)
        share = int(csn.comment_count[i]) / n_total
        terms.append(SubgroupTerm(g.label, share, t, h, share * t * h))
    total = math.fsum(t.contribution for t in terms)
    return CoiReport(total, tuple(terms))


def coi_series(slices: Sequence[TimeSlice], build: Callable[[TimeSlice], CSN],
               default_cohesion: float = 1.0) -> list[tuple[tuple[str, str], CoiReport | None | dict]]:
    """One report per slice; empty slices give ``None``.

    ``build`` turns a slice into a fresh CSN. A failure in one slice is recorded
    as its error payload and does not stop the others.
    """
    out = []
    for s in slices:
        bounds = (format_timestamp(s.start), format_timestamp(s.end))
        if not s.comments:
            out.append((bounds, None))
            continue
        try:
            report = coi(build(s), default_cohesion=default_cohesion)
        except CsnpolError as exc:
            out.append((bounds, exc.to_dict()))
            continue
        out.append((bounds, CoiReport(report.total, report.per_subgroup, bounds, report.meta)))
    return out
