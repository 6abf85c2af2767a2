"""COI over consecutive time windows of a comment file (mock backend by default).

    python3 scripts/coi_series_demo.py [comments.jsonl] --window 12h
"""

import argparse
from pathlib import Path

from csnpol.cli import analyze_corpus, csn_from_result
from csnpol.coi import coi_series
from csnpol.config import RunConfig
from csnpol.core import parse_duration, read_comments, slice_by_time

FIXTURE = Path(__file__).resolve().parents[1] / "src" / "csnpol" / "data" / "russia_ukraine_30.jsonl"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("comments", nargs="?", type=Path, default=FIXTURE)
    ap.add_argument("--window", default="12h")
    ap.add_argument("--backend", default="mock")
    args = ap.parse_args()

    cfg = RunConfig()
    comments, _ = read_comments(args.comments)
    slices = slice_by_time(comments, parse_duration(args.window))

    def build(s):
        return csn_from_result(analyze_corpus(s.comments, cfg, args.backend, resume=False), cfg)

    for (start, end), rep in coi_series(slices, build, default_cohesion=cfg.cohesion_default):
        if rep is None:
            value = "empty"
        elif isinstance(rep, dict):
            value = f"error {rep['error']}"
        else:
            value = f"{rep.total:.4f}  " + "  ".join(f"{t.subgroup}={t.contribution:.3f}" for t in rep.per_subgroup)
        print(f"{start} .. {end}  {value}")


if __name__ == "__main__":
    main()
