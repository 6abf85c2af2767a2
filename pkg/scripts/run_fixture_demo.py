"""Run the bundled Russia-Ukraine fixture end to end in-process and print the COI table.

    python3 scripts/run_fixture_demo.py [--seed 0] [--dot out.dot]
"""

import argparse
from pathlib import Path

from csnpol.cli import analyze_corpus, csn_from_result
from csnpol.coi import coi
from csnpol.config import RunConfig
from csnpol.core import read_comments
from csnpol.dot import export_dot

FIXTURE = Path(__file__).resolve().parents[1] / "src" / "csnpol" / "data" / "russia_ukraine_30.jsonl"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dot", type=Path, help="also write the network as DOT")
    args = ap.parse_args()

    cfg = RunConfig(seed=args.seed)
    comments, _ = read_comments(FIXTURE)
    result = analyze_corpus(comments, cfg, "mock")
    print(f"{len(comments)} comments -> {len(result.triplets)} triplets, {len(result.skipped)} skipped")
    print("subgroups:", ", ".join(g.label for g in result.background.subgroups))
    csn = csn_from_result(result, cfg)
    for i, j, s in csn.edges():
        print(f"  {csn.subgroups[i].label} -> {csn.subgroups[j].label}: {s:+.3f}")
    print(coi(csn, default_cohesion=cfg.cohesion_default).table())
    if args.dot:
        args.dot.write_text(export_dot(csn), encoding="utf-8")
        print("wrote", args.dot)


if __name__ == "__main__":
    main()
