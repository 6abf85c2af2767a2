"""Stance labels, score-to-label mapping and F1-family metrics.

Metrics are computed in exact rational arithmetic and converted to float at
the end, so two routes to the same fraction give bit-identical floats.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable


class Stance(str, enum.Enum):
    FAVOR = "Favor"
    AGAINST = "Against"
    NONE = "None"

    @classmethod
    def parse(cls, label) -> "Stance":
        key = str(label).strip().lower()
        try:
            return _ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown stance label {label!r}") from None


_ALIASES = {
    "favor": Stance.FAVOR, "favour": Stance.FAVOR, "pro": Stance.FAVOR, "support": Stance.FAVOR,
    "against": Stance.AGAINST, "con": Stance.AGAINST, "oppose": Stance.AGAINST,
    "none": Stance.NONE, "neutral": Stance.NONE, "neither": Stance.NONE,
}

CLASSES = (Stance.FAVOR, Stance.AGAINST, Stance.NONE)


def map_score_to_stance(score: float, tau: float = 0.1, binary: bool = False) -> Stance:
    """Favor above ``tau``, Against below ``-tau``, None in between.

    ``binary`` drops the dead zone for two-class data: non-positive scores map
    to Against.
    """
    if not 0 <= tau < 1:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    if binary:
        return Stance.FAVOR if score > 0 else Stance.AGAINST
    if score > tau:
        return Stance.FAVOR
    if score < -tau:
        return Stance.AGAINST
    return Stance.NONE


def f1_exact(tp: int, fp: int, fn: int) -> Fraction:
    if min(tp, fp, fn) < 0:
        raise ValueError("confusion counts must be non-negative")
    if tp + fp == 0 or tp + fn == 0:
        return Fraction(0)
    p = Fraction(tp, tp + fp)
    r = Fraction(tp, tp + fn)
    if p + r == 0:
        return Fraction(0)
    return 2 * p * r / (p + r)


def f1(tp: int, fp: int, fn: int) -> float:
    """F1 with every zero denominator defined as 0."""
    return float(f1_exact(tp, fp, fn))


@dataclass
class ConfusionCounts:
    tp: dict = field(default_factory=lambda: {c: 0 for c in CLASSES})
    fp: dict = field(default_factory=lambda: {c: 0 for c in CLASSES})
    fn: dict = field(default_factory=lambda: {c: 0 for c in CLASSES})
    total: int = 0

    def add(self, gold: Stance, pred: Stance) -> None:
        self.total += 1
        if gold == pred:
            self.tp[gold] += 1
        else:
            self.fp[pred] += 1
            self.fn[gold] += 1

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Stance, Stance]]) -> "ConfusionCounts":
        cc = cls()
        for g, p in pairs:
            cc.add(Stance(g), Stance(p))
        return cc

    def merge(self, other: "ConfusionCounts") -> "ConfusionCounts":
        out = ConfusionCounts()
        for c in CLASSES:
            out.tp[c] = self.tp[c] + other.tp[c]
            out.fp[c] = self.fp[c] + other.fp[c]
            out.fn[c] = self.fn[c] + other.fn[c]
        out.total = self.total + other.total
        return out

    def gold_count(self, c: Stance) -> int:
        return self.tp[c] + self.fn[c]

    def f1_exact(self, c: Stance) -> Fraction:
        return f1_exact(self.tp[c], self.fp[c], self.fn[c])

    def to_dict(self) -> dict:
        return {c.value: {"tp": self.tp[c], "fp": self.fp[c], "fn": self.fn[c]} for c in CLASSES} | {
            "total": self.total}


def f_avg_exact(cc: ConfusionCounts) -> Fraction:
    return (cc.f1_exact(Stance.FAVOR) + cc.f1_exact(Stance.AGAINST)) / 2


def f_avg(cc: ConfusionCounts) -> float:
    """Mean F1 of Favor and Against; None predictions still count as their misses."""
    return float(f_avg_exact(cc))


def macro_f1_exact(cc: ConfusionCounts) -> Fraction:
    return sum((cc.f1_exact(c) for c in CLASSES), Fraction(0)) / len(CLASSES)


def macro_f1(cc: ConfusionCounts) -> float:
    return float(macro_f1_exact(cc))
