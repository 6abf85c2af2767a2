"""Group polarization measurement from social-media comments.

Comments go through a staged multi-agent analysis that yields
(stance, sentiment, target) triplets; the triplets build a Community Sentiment
Network (CSN) over opinion subgroups, and the Community Opposition Index (COI)
summarises that network as one polarization score.
"""

from .coi import CoiReport, coi, coi_series, hostility_term, subgroup_polarization
from .core import CSN, Comment, Subgroup, TimeSlice, Triplet, clamp_score, read_comments, slice_by_time
from .csn import build_csn, internal_cohesion

__version__ = "0.1.0"

__all__ = [
    "CSN", "Comment", "Subgroup", "TimeSlice", "Triplet", "clamp_score", "read_comments", "slice_by_time",
    "build_csn", "internal_cohesion", "CoiReport", "coi", "coi_series", "hostility_term",
    "subgroup_polarization",
]
