"""Command-line entry point: ``csnpol <command> ...``.

Commands compose as analyze -> build-csn -> coi / export-dot. Every artifact
records the hash of the run configuration; a step fed an artifact made under a
different configuration refuses to run. Failures print one JSON object to
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .agents.pipeline import PipelineResult, SkippedReport, run_triplet_pipeline
from .agents.review import ReviewMode, apply_resolutions, human_review, read_review_file, ReviewItem
from .coi import CoiReport, coi, coi_series
from .config import RunConfig
from .core import CSN, Subgroup, Triplet, derive_seed, parse_duration, read_comments, slice_by_time
from .csn import build_csn
from .dot import export_dot
from .errors import ConfigMismatch, CsnpolError, EmptyCorpus
from .evaluation.datasets import DatasetFormat, load_dataset
from .evaluation.runner import format_report, run_zero_shot_eval

log = logging.getLogger("csnpol")

TRIPLETS_KIND = "csnpol.triplets"


def _dump(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _load_json(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_triplets(path: str | Path, triplets, subgroups, config_hash: str) -> None:
    header = {"_meta": {"kind": TRIPLETS_KIND, "config_hash": config_hash,
                        "subgroups": [g.to_dict() for g in subgroups]}}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for t in triplets:
            fh.write(json.dumps(t.to_dict(), ensure_ascii=False) + "\n")


def read_triplets(path: str | Path) -> tuple[list[Triplet], list[Subgroup], str | None]:
    triplets, subgroups, config_hash = [], [], None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            obj = json.loads(raw)
            if "_meta" in obj:
                subgroups = [Subgroup.from_dict(g) for g in obj["_meta"].get("subgroups", [])]
                config_hash = obj["_meta"].get("config_hash")
                continue
            try:
                triplets.append(Triplet.from_dict(obj))
            except (KeyError, ValueError) as exc:
                raise CsnpolError(f"{path}:{lineno}: bad triplet ({exc})") from None
    return triplets, subgroups, config_hash


def _check_hash(found: str | None, expected: str, what: str) -> None:
    if found is not None and found != expected:
        raise ConfigMismatch(f"{what} was produced under config {found}, this run uses {expected}")


def _run_config(args) -> RunConfig:
    return RunConfig.load(
        args.config,
        seed=args.seed,
        max_subgroups=args.max_subgroups,
        uncertain_threshold=args.uncertain_threshold,
        sample_size=args.sample_size,
        tau=args.tau,
        cohesion_default=args.cohesion_default,
        workers=args.workers,
        prompts_dir=args.prompts_dir,
    )


def analyze_corpus(comments, cfg: RunConfig, backend, review_path=None, checkpoint=None, resume=True) -> PipelineResult:
    pcfg = cfg.pipeline_config(backend, review_path=review_path, checkpoint_path=checkpoint)
    return run_triplet_pipeline(comments, pcfg, resume=resume)


def csn_from_result(result: PipelineResult, cfg: RunConfig) -> CSN:
    return build_csn(result.triplets, result.background.subgroups, derive_seed(cfg.seed, "csn-imputation"),
                     max_subgroups=cfg.max_subgroups)


# -- commands -------------------------------------------------------------


def cmd_analyze(args, cfg: RunConfig) -> int:
    comments, problems = read_comments(args.comments, strict=args.strict)
    for line, msg in problems:
        log.warning("%s line %d skipped: %s", args.comments, line, msg)
    if not comments:
        raise EmptyCorpus(f"{args.comments} holds no usable comments")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.review_mode = args.review_mode
    review_path = out / "review.jsonl"
    checkpoint = args.checkpoint or str(out / "checkpoint.json")
    if not args.resume or not Path(checkpoint).exists():
        review_path.unlink(missing_ok=True)
    result = analyze_corpus(comments, cfg, args.backend, str(review_path), checkpoint, args.resume)
    h = cfg.hash(args.backend)
    write_triplets(out / "triplets.jsonl", result.triplets, result.background.subgroups, h)
    _dump(result.background.to_dict() | {"config_hash": h}, out / "background.json")
    _dump(result.skipped.to_dict() | {"config_hash": h}, out / "skipped.json")
    print(f"{len(result.triplets)} triplets, {len(result.skipped)} skipped, "
          f"{len(result.background.subgroups)} subgroups, {len(result.review)} queued for review -> {out}")
    return 0


def cmd_build_csn(args, cfg: RunConfig) -> int:
    triplets, subgroups, found = read_triplets(args.triplets)
    h = cfg.hash(args.backend)
    _check_hash(found, h, args.triplets)
    csn = build_csn(triplets, subgroups, derive_seed(cfg.seed, "csn-imputation"), max_subgroups=cfg.max_subgroups)
    _dump(csn.to_dict() | {"config_hash": h}, args.output)
    print(f"CSN with {csn.size} subgroups, {sum(1 for _ in csn.edges())} edges, N={csn.total_comments} -> {args.output}")
    return 0


def cmd_coi(args, cfg: RunConfig) -> int:
    d = _load_json(args.csn)
    h = cfg.hash(args.backend)
    _check_hash(d.get("config_hash"), h, args.csn)
    report = coi(CSN.from_dict(d), default_cohesion=cfg.cohesion_default)
    if args.output:
        _dump(report.to_dict() | {"config_hash": h}, args.output)
    print(report.table())
    return 0


def cmd_export_dot(args, cfg: RunConfig) -> int:
    text = export_dot(CSN.from_dict(_load_json(args.csn)))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_series(args, cfg: RunConfig) -> int:
    comments, problems = read_comments(args.comments, strict=args.strict)
    for line, msg in problems:
        log.warning("%s line %d skipped: %s", args.comments, line, msg)
    window = parse_duration(args.window or cfg.window)
    slices = slice_by_time(comments, window)

    def build(s):
        return csn_from_result(analyze_corpus(s.comments, cfg, args.backend, resume=False), cfg)

    series = coi_series(slices, build, default_cohesion=cfg.cohesion_default)
    rows = []
    for bounds, rep in series:
        entry = {"start": bounds[0], "end": bounds[1]}
        if rep is None:
            entry["report"] = None
        elif isinstance(rep, CoiReport):
            entry["report"] = rep.to_dict()
        else:
            entry["error"] = rep
        rows.append(entry)
        total = "-" if rep is None else f"{rep.total:.6f}" if isinstance(rep, CoiReport) else f"error: {rep['error']}"
        print(f"{bounds[0]}  {bounds[1]}  {total}")
    doc = {"window": args.window or cfg.window, "config_hash": cfg.hash(args.backend), "slices": rows}
    if args.output:
        _dump(doc, args.output)
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    records = load_dataset(args.dataset, DatasetFormat.parse(args.format))
    if args.target:
        records = [r for r in records if r.target.lower() == args.target.lower()]
    if args.split:
        records = [r for r in records if r.split == args.split]
    pcfg = cfg.pipeline_config(args.backend)
    report = run_zero_shot_eval(records, pcfg, cfg.tau, limit=args.limit, checkpoint=args.checkpoint, seed=cfg.seed)
    report["config_hash"] = cfg.hash(args.backend)
    if args.output:
        _dump(report, args.output)
    print(format_report(report))
    return 0


def cmd_review(args, cfg: RunConfig) -> int:
    triplets, subgroups, found = read_triplets(args.triplets)
    roster = list(subgroups)
    if args.interactive:
        items = [ReviewItem.from_dict(json.loads(l)) for l in Path(args.review).read_text(encoding="utf-8").splitlines()
                 if l.strip()]
        pending = [i for i in items if i.resolution is None]
        if pending:
            done = {i.comment_id: i for i in human_review(pending, ReviewMode.INTERACTIVE, roster=roster,
                                                          max_subgroups=cfg.max_subgroups)}
            items = [done.get(i.comment_id, i) for i in items]
            with open(args.review, "w", encoding="utf-8") as fh:
                for i in items:
                    fh.write(json.dumps(i.to_dict(), ensure_ascii=False) + "\n")
    resolutions = read_review_file(args.review, roster, cfg.max_subgroups)
    updated, n = apply_resolutions(triplets, resolutions)
    out = args.output or args.triplets
    write_triplets(out, updated, roster, found or cfg.hash(args.backend))
    still = sum(1 for t in updated if t.stance is None)
    print(f"{n} triplets upgraded, {still} still without stance -> {out}")
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--backend", choices=["mock", "remote"], default=None,
                        help="override the backend of every agent")
    common.add_argument("--seed", type=int)
    common.add_argument("--max-subgroups", type=int)
    common.add_argument("--uncertain-threshold", type=int)
    common.add_argument("--sample-size", type=int)
    common.add_argument("--tau", type=float)
    common.add_argument("--cohesion-default", type=float, choices=[0.0, 0.5, 1.0])
    common.add_argument("--workers", type=int)
    common.add_argument("--prompts-dir")
    common.add_argument("--strict", action="store_true", help="abort on the first malformed input line")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="csnpol", description="Group polarization measurement from comments.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="comments.jsonl -> triplets.jsonl + background.json")
    a.add_argument("comments")
    a.add_argument("--out-dir", "-o", required=True)
    a.add_argument("--review-mode", choices=[m.value for m in ReviewMode], default="file")
    a.add_argument("--checkpoint")
    a.add_argument("--no-resume", dest="resume", action="store_false")
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("build-csn", parents=[common], help="triplets.jsonl -> csn.json")
    b.add_argument("triplets")
    b.add_argument("--output", "-o", default="csn.json")
    b.set_defaults(func=cmd_build_csn)

    c = sub.add_parser("coi", parents=[common], help="csn.json -> COI report")
    c.add_argument("csn")
    c.add_argument("--output", "-o")
    c.set_defaults(func=cmd_coi)

    s = sub.add_parser("series", parents=[common], help="comments.jsonl -> COI per time slice")
    s.add_argument("comments")
    s.add_argument("--window", help="slice length, e.g. 30m, 6h, 1d")
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_series)

    e = sub.add_parser("eval", parents=[common], help="zero-shot stance detection on a dataset")
    e.add_argument("dataset", help="dataset file or directory")
    e.add_argument("--format", required=True, choices=[f.value for f in DatasetFormat])
    e.add_argument("--target")
    e.add_argument("--split", choices=["train", "dev", "test"])
    e.add_argument("--limit", type=int)
    e.add_argument("--checkpoint")
    e.add_argument("--output", "-o")
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("export-dot", parents=[common], help="csn.json -> Graphviz DOT")
    d.add_argument("csn")
    d.add_argument("--output", "-o")
    d.set_defaults(func=cmd_export_dot)

    r = sub.add_parser("review", parents=[common], help="resolve queued comments and merge them into triplets")
    r.add_argument("review", help="review.jsonl written by analyze")
    r.add_argument("--triplets", required=True)
    r.add_argument("--apply", action="store_true", help="merge resolutions already present in the file (default)")
    r.add_argument("--interactive", action="store_true", help="ask on the terminal for unresolved items first")
    r.add_argument("--output", "-o")
    r.set_defaults(func=cmd_review)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _run_config(args)
        return args.func(args, cfg)
    except CsnpolError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), ensure_ascii=False) + "\n")
        return 1
    except (OSError, ValueError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}, ensure_ascii=False) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
