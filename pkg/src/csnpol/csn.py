"""Community Sentiment Network construction from triplets.

The build runs in three phases over one ``BuilderState``:

1. complete triplets are accumulated into likes-weighted score sums;
2. incomplete triplets get a stance drawn from the observed stance frequencies
   towards their target, then are accumulated the same way (the counts they add
   feed later draws, so input order matters);
3. sums are divided by weight sums to give mean edge scores.

Imputation draws use ``numpy.random.Generator(PCG64(seed))``. Each incomplete
triplet consumes exactly one ``random()`` draw ``u`` and takes the smallest
subgroup index ``i`` with ``u * total < cumulative_count[i]``; when no stance
towards the target has been observed yet it takes ``floor(u * n)``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import CSN, Subgroup, Triplet, validate_roster

COHESION_DEFAULTS = (1.0, 0.5, 0.0)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def sample_stance(counts: Sequence[int], u: float) -> int:
    """Inverse-CDF pick over integer ``counts`` in index order for a uniform ``u`` in [0, 1).

    Comparisons are exact (``u`` is a dyadic rational), so the choice does not
    depend on floating-point rounding at bucket boundaries.
    """
    n = len(counts)
    total = int(sum(counts))
    q = Fraction(u)
    if total == 0:
        return min(int(q * n), n - 1)
    threshold = q * total
    cum = 0
    for i, c in enumerate(counts):
        cum += int(c)
        if threshold < cum:
            return i
    raise ValueError(f"u={u} is outside [0, 1)")


@dataclass
class BuilderState:
    adj: np.ndarray
    weight_sum: np.ndarray
    count: np.ndarray
    comment_count: np.ndarray
    incomplete: list[Triplet] = field(default_factory=list)
    rng_seed: int = 0
    phase: str = "accumulating"
    imputed: list[Triplet] = field(default_factory=list)

    @classmethod
    def empty(cls, n: int, seed: int = 0) -> "BuilderState":
        return cls(
            adj=np.zeros((n, n)),
            weight_sum=np.zeros((n, n)),
            count=np.zeros((n, n), dtype=np.int64),
            comment_count=np.zeros(n, dtype=np.int64),
            rng_seed=seed,
        )

    @property
    def size(self) -> int:
        return self.adj.shape[0]


def _add(state: BuilderState, src: int, tgt: int, score: float, likes: int) -> None:
    n = state.size
    if not (0 <= src < n and 0 <= tgt < n):
        raise IndexError(f"triplet ({src} -> {tgt}) outside a {n}-subgroup roster")
    w = max(likes, 1)
    state.adj[src, tgt] += score * w
    state.weight_sum[src, tgt] += w
    state.count[src, tgt] += 1
    state.comment_count[src] += 1


def accumulate_complete(state: BuilderState, triplet: Triplet) -> BuilderState:
    """Add one triplet; incomplete ones are set aside for imputation."""
    if state.phase != "accumulating":
        raise RuntimeError("complete triplets must all be accumulated before imputation")
    if triplet.stance is None:
        if not 0 <= triplet.target < state.size:
            raise IndexError(f"target {triplet.target} outside a {state.size}-subgroup roster")
        state.incomplete.append(triplet)
    else:
        _add(state, triplet.stance, triplet.target, triplet.score, triplet.likes)
    return state


def impute_incomplete(state: BuilderState) -> BuilderState:
    if state.phase != "accumulating":
        raise RuntimeError("imputation already ran for this state")
    state.phase = "imputed"
    rng = make_rng(state.rng_seed)
    for t in state.incomplete:
        u = float(rng.random())
        src = sample_stance(state.count[:, t.target], u)
        _add(state, src, t.target, t.score, t.likes)
        state.imputed.append(Triplet(src, t.score, t.target, t.likes, t.comment_id))
    return state


def finalize_averages(state: BuilderState, subgroups: Sequence[Subgroup]) -> CSN:
    if state.phase != "imputed":
        raise RuntimeError("finalize requires imputation to have run")
    state.phase = "final"
    present = state.weight_sum > 0
    adj = np.full_like(state.adj, np.nan)
    adj[present] = state.adj[present] / state.weight_sum[present]
    # weighted means of in-range scores can overshoot by one ulp
    adj[present] = np.clip(adj[present], -1.0, 1.0)
    return CSN(
        subgroups=tuple(subgroups),
        adjacency=adj,
        comment_count=state.comment_count.copy(),
        total_comments=int(state.comment_count.sum()),
        weight_sum=state.weight_sum.copy(),
        count=state.count.copy(),
        seed=state.rng_seed,
    )


def build_csn(triplets: Iterable[Triplet], subgroups: Sequence[Subgroup], seed: int = 0,
              max_subgroups: int | None = None) -> CSN:
    subgroups = tuple(sorted(subgroups, key=lambda g: g.index))
    validate_roster(subgroups, max_subgroups if max_subgroups is not None else max(len(subgroups), 1))
    state = BuilderState.empty(len(subgroups), seed)
    for t in triplets:
        accumulate_complete(state, t)
    if state.incomplete and not subgroups:
        raise IndexError("incomplete triplets cannot be imputed without subgroups")
    impute_incomplete(state)
    return finalize_averages(state, subgroups)


def internal_cohesion(csn: CSN, i: int, default: float = 1.0) -> float:
    """Cohesion of subgroup ``i`` from its self-loop: ``max(0, e_ii)``, or ``default`` when unobserved."""
    if not 0 <= i < csn.size:
        raise IndexError(f"subgroup {i} outside a {csn.size}-subgroup network")
    e = csn.adjacency[i, i]
    if math.isnan(e):
        return float(default)
    return max(0.0, float(e))
