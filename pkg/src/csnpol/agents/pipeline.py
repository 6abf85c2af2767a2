"""Three-stage multi-agent analysis turning comments into sentiment triplets.

Background mining (domain specialist, subgroup explorer with human fallback)
runs once per corpus; semantic analysis and polarization assessment then run
per comment. Every agent talks through ``llm_complete``: the system message is
the role's prompt template, the user message a JSON object with the inputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ..core import (DEFAULT_MAX_SUBGROUPS, Comment, Subgroup, Triplet, canonical_hash, clamp_score,
                    derive_seed, format_timestamp)
from ..errors import EmptyCorpus, InvalidScore, LLMTimeoutError, StageFailure, SubgroupOverflow, TransportError
from ..evaluation.metrics import Stance, map_score_to_stance
from .llm import AgentConfig, Backend, Role, llm_complete, parse_json_reply
from .mock import NO_PLATFORM, UNCERTAIN
from .review import ReviewItem, ReviewMode, human_review

log = logging.getLogger(__name__)

BACKGROUND_MINING = "BackgroundMining"
SEMANTIC_ANALYSIS = "SemanticAnalysis"
POLARIZATION_ASSESSMENT = "PolarizationAssessment"

REPAIR_INSTRUCTION = (
    "Your previous reply could not be parsed. Reply again with only the JSON object "
    "described in your instructions, with no other text."
)


@dataclass(frozen=True)
class Background:
    event_summary: str
    timeline: str
    stakeholders: tuple[str, ...] = ()
    subgroups: tuple[Subgroup, ...] = ()

    def render(self) -> str:
        lines = [self.event_summary, f"Timeline: {self.timeline}"]
        if self.stakeholders:
            lines.append("Stakeholders: " + ", ".join(self.stakeholders))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "event_summary": self.event_summary,
            "timeline": self.timeline,
            "stakeholders": list(self.stakeholders),
            "subgroups": [g.to_dict() for g in self.subgroups],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Background":
        return cls(d["event_summary"], d.get("timeline", ""), tuple(d.get("stakeholders", ())),
                   tuple(Subgroup.from_dict(g) for g in d.get("subgroups", ())))


@dataclass(frozen=True)
class SemanticAnnotations:
    platform_notes: str
    linguistic_notes: str
    sentiment: float
    sentiment_target: Subgroup | None

    def __post_init__(self):
        if not -1.0 <= self.sentiment <= 1.0:
            raise InvalidScore(f"sentiment {self.sentiment} outside [-1, 1]")

    def to_payload(self) -> dict:
        return {
            "platform_notes": self.platform_notes,
            "linguistic_notes": self.linguistic_notes,
            "sentiment": self.sentiment,
            "sentiment_target": None if self.sentiment_target is None else self.sentiment_target.label,
        }


@dataclass
class SkippedReport:
    entries: list[tuple[str, str]] = field(default_factory=list)

    def add(self, comment_id: str, reason: str) -> None:
        self.entries.append((comment_id, reason))

    def __len__(self):
        return len(self.entries)

    def to_dict(self) -> dict:
        return {"count": len(self.entries),
                "skipped": [{"comment_id": c, "reason": r} for c, r in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "SkippedReport":
        return cls([(e["comment_id"], e["reason"]) for e in d.get("skipped", [])])


@dataclass(frozen=True)
class PipelineConfig:
    agents: dict
    seed: int = 0
    sample_size: int = 200
    uncertain_threshold: int = 20
    max_subgroups: int = DEFAULT_MAX_SUBGROUPS
    review_mode: ReviewMode = ReviewMode.FILE
    review_path: str | None = None
    checkpoint_path: str | None = None
    checkpoint_every: int = 25
    workers: int = 1
    deterministic: bool = True

    @classmethod
    def mock(cls, lexicon: str | None = None, **kw) -> "PipelineConfig":
        return cls(agents={r: AgentConfig(r, Backend.MOCK, mock_lexicon=lexicon) for r in Role}, **kw)

    def validate(self) -> None:
        missing = [r.value for r in Role if r not in self.agents]
        if missing:
            raise ValueError(f"agent roles not configured: {', '.join(missing)}")
        if self.uncertain_threshold < 1:
            raise ValueError("uncertain_threshold must be at least 1")
        if self.sample_size < 1:
            raise ValueError("sample_size must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.deterministic:
            hot = [r.value for r, a in self.agents.items() if a.temperature != 0.0]
            if hot:
                raise ValueError(f"determinism mode needs temperature 0 for: {', '.join(hot)}")

    def agent(self, role: Role) -> AgentConfig:
        return self.agents[Role(role)]

    def fingerprint(self) -> dict:
        return {
            "agents": {Role(r).value: a.public_dict() for r, a in sorted(self.agents.items(), key=lambda kv: Role(kv[0]).value)},
            "seed": self.seed,
            "sample_size": self.sample_size,
            "uncertain_threshold": self.uncertain_threshold,
            "max_subgroups": self.max_subgroups,
        }

    def hash(self) -> str:
        return canonical_hash(self.fingerprint())


class Exploration(NamedTuple):
    subgroups: list[Subgroup]
    review: list[ReviewItem]
    assignments: dict[str, Subgroup | None]


class PipelineResult(NamedTuple):
    background: Background
    triplets: list[Triplet]
    skipped: SkippedReport
    review: list[ReviewItem]


# -- transport helpers ------------------------------------------------------


def _render(template: str, background: Background | None, subgroups: Sequence[Subgroup], comment: str = "") -> str:
    roster = "\n".join(f"- {g.label}: {g.description}" if g.description else f"- {g.label}" for g in subgroups)
    return (template
            .replace("{background}", background.render() if background else "(not yet known)")
            .replace("{subgroups}", roster or "(none yet)")
            .replace("{comment}", comment))


def _messages(agent: AgentConfig, payload: dict, background, subgroups, comment: str = "") -> list[dict]:
    return [
        {"role": "system", "content": _render(agent.prompt_template, background, subgroups, comment)},
        {"role": "user", "content": json.dumps(payload, ensure_ascii=False)},
    ]


def _complete(agent: AgentConfig, messages: list[dict], stage: str) -> str:
    try:
        return llm_complete(messages, agent)
    except (TransportError, LLMTimeoutError) as exc:
        raise StageFailure(stage, f"{agent.role.value}: {exc}") from exc


def _ask_text(agent, payload, background, subgroups, stage, comment="") -> str:
    return _complete(agent, _messages(agent, payload, background, subgroups, comment), stage).strip()


def _ask_json(agent, payload, background, subgroups, stage, check: Callable[[dict], None], comment="") -> dict:
    """JSON reply with one repair round for unparseable or ill-formed answers."""
    messages = _messages(agent, payload, background, subgroups, comment)
    reply = _complete(agent, messages, stage)
    for attempt in range(2):
        try:
            obj = parse_json_reply(reply)
            check(obj)
            return obj
        except (ValueError, KeyError, TypeError) as exc:
            if attempt == 1:
                raise StageFailure(stage, f"{agent.role.value} reply unusable after repair: {exc}") from None
            messages = messages + [{"role": "assistant", "content": reply},
                                   {"role": "user", "content": REPAIR_INSTRUCTION}]
            reply = _complete(agent, messages, stage)
    raise AssertionError("unreachable")


def _lookup(label, roster: Sequence[Subgroup]) -> Subgroup | None:
    if label is None:
        return None
    key = str(label).strip().lower()
    for g in roster:
        if g.label.lower() == key:
            return g
    return None


# -- background mining --------------------------------------------------------


def sample_comments(comments: Sequence[Comment], sample_size: int, seed: int) -> list[Comment]:
    """Uniform sample without replacement, kept in corpus order."""
    if len(comments) <= sample_size:
        return list(comments)
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "background-sample")))
    picked = sorted(rng.choice(len(comments), size=sample_size, replace=False).tolist())
    return [comments[i] for i in picked]


def mine_background(comments: Sequence[Comment], sample_size: int, agent: AgentConfig, seed: int = 0) -> Background:
    if not comments:
        raise EmptyCorpus("no comments to mine")
    if sample_size < 1:
        raise ValueError("sample_size must be at least 1")
    sample = sample_comments(comments, sample_size, seed)
    payload = {"comments": [{"text": c.text, "timestamp": format_timestamp(c.timestamp)} for c in sample]}

    def check(obj):
        if not str(obj.get("event_summary", "")).strip():
            raise ValueError("event_summary missing")
        if not isinstance(obj.get("stakeholders", []), list):
            raise ValueError("stakeholders must be a list")

    obj = _ask_json(agent, payload, None, (), BACKGROUND_MINING, check)
    return Background(
        event_summary=str(obj["event_summary"]).strip(),
        timeline=str(obj.get("timeline", "")).strip(),
        stakeholders=tuple(str(s) for s in obj.get("stakeholders", [])),
    )


def _add_subgroup(roster: list[Subgroup], label: str, description: str, max_subgroups: int) -> Subgroup:
    g = _lookup(label, roster)
    if g is not None:
        return g
    if len(roster) >= max_subgroups:
        raise SubgroupOverflow([x.label for x in roster] + [label], max_subgroups)
    g = Subgroup(len(roster), label.strip(), description)
    roster.append(g)
    return g


def explore_subgroups(
    comments: Sequence[Comment],
    background: Background,
    agent: AgentConfig,
    uncertain_threshold: int = 20,
    *,
    max_subgroups: int = DEFAULT_MAX_SUBGROUPS,
    review_mode: ReviewMode | str = ReviewMode.FILE,
    review_path: str | None = None,
    sample: Sequence[Comment] | None = None,
    input_fn: Callable[[str], str] = input,
) -> Exploration:
    """Discover subgroups, then place every comment's author in one.

    Comments the explorer answers ``uncertain`` for are queued; each time the
    queue reaches ``uncertain_threshold`` it goes to ``human_review`` and is
    emptied. Resolved items take the reviewer's subgroup; the rest keep no
    assignment.
    """
    if uncertain_threshold < 1:
        raise ValueError("uncertain_threshold must be at least 1")
    review_mode = ReviewMode(review_mode)
    roster: list[Subgroup] = []
    sample = list(sample if sample is not None else comments)

    def check_discover(obj):
        if not isinstance(obj.get("subgroups"), list):
            raise ValueError("subgroups must be a list")
        for g in obj["subgroups"]:
            if not str(g.get("label", "")).strip():
                raise ValueError("subgroup without label")

    found = _ask_json(agent, {"task": "discover", "background": background.to_dict(),
                              "comments": [c.text for c in sample]},
                      background, roster, BACKGROUND_MINING, check_discover)
    for g in found["subgroups"]:
        _add_subgroup(roster, str(g["label"]), str(g.get("description", "")), max_subgroups)

    def check_classify(obj):
        if not isinstance(obj.get("subgroup"), (str, type(None))):
            raise ValueError("subgroup must be a string")

    assignments: dict[str, Subgroup | None] = {}
    queue: list[ReviewItem] = []
    reviewed: list[ReviewItem] = []
    for c in comments:
        obj = _ask_json(agent, {"task": "classify", "comment": c.text, "subgroups": [g.label for g in roster]},
                        background, roster, BACKGROUND_MINING, check_classify, comment=c.text)
        label = (obj.get("subgroup") or "").strip()
        if not label or label.lower() == UNCERTAIN:
            assignments[c.id] = None
            queue.append(ReviewItem(c.id, c.text, tuple(roster)))
            if len(queue) >= uncertain_threshold:
                reviewed.extend(_flush(queue, review_mode, review_path, roster, max_subgroups, input_fn, assignments))
                queue = []
        else:
            assignments[c.id] = _add_subgroup(roster, label, "", max_subgroups)
    return Exploration(roster, reviewed + queue, assignments)


def _flush(queue, mode, path, roster, max_subgroups, input_fn, assignments) -> list[ReviewItem]:
    if mode is ReviewMode.FILE and path is None:
        log.info("%d uncertain comments kept unresolved (no review file configured)", len(queue))
        return list(queue)
    done = human_review(queue, mode, roster=roster, path=path, max_subgroups=max_subgroups, input_fn=input_fn)
    for item in done:
        if item.resolution is not None:
            assignments[item.comment_id] = item.resolution
    return done


# -- semantic analysis ------------------------------------------------------


def analyze_platform(comment: Comment, background: Background, agent: AgentConfig) -> str:
    notes = _ask_text(agent, {"comment": comment.text}, background, background.subgroups, SEMANTIC_ANALYSIS,
                      comment.text)
    return notes or NO_PLATFORM


def analyze_linguistics(comment: Comment, background: Background, agent: AgentConfig) -> str:
    notes = _ask_text(agent, {"comment": comment.text}, background, background.subgroups, SEMANTIC_ANALYSIS,
                      comment.text)
    return notes or "no linguistic findings"


def analyze_sentiment(comment: Comment, platform_notes: str, linguistic_notes: str,
                      subgroups: Sequence[Subgroup], agent: AgentConfig) -> SemanticAnnotations:
    def check(obj):
        clamp_score(obj["score"])
        if not isinstance(obj.get("target"), (str, type(None))):
            raise ValueError("target must be a label or null")

    payload = {
        "comment": comment.text,
        "platform_notes": platform_notes,
        "linguistic_notes": linguistic_notes,
        "subgroups": [g.label for g in subgroups],
    }
    try:
        obj = _ask_json(agent, payload, None, subgroups, SEMANTIC_ANALYSIS, check, comment.text)
    except InvalidScore as exc:
        raise StageFailure(SEMANTIC_ANALYSIS, str(exc)) from None
    return SemanticAnnotations(platform_notes, linguistic_notes, clamp_score(obj["score"]),
                               _lookup(obj.get("target"), subgroups))


# -- polarization assessment -----------------------------------------------


def _check_assessment(obj):
    clamp_score(obj["score"])
    for k in ("stance", "target"):
        if not isinstance(obj.get(k), (str, type(None))):
            raise ValueError(f"{k} must be a label or null")


def assess_polarization(comment: Comment, annotations: SemanticAnnotations, background: Background,
                        agent: AgentConfig, explorer_subgroup: Subgroup | None = None) -> Triplet | None:
    """Triplet for one comment, or None when no target subgroup is discernible.

    An unresolved author gives a triplet with a null stance.
    """
    roster = background.subgroups
    payload = {
        "mode": "csn",
        "comment": comment.text,
        "annotations": annotations.to_payload(),
        "explorer_subgroup": None if explorer_subgroup is None else explorer_subgroup.label,
        "subgroups": [g.label for g in roster],
    }
    try:
        obj = _ask_json(agent, payload, background, roster, POLARIZATION_ASSESSMENT, _check_assessment, comment.text)
    except InvalidScore as exc:
        raise StageFailure(POLARIZATION_ASSESSMENT, str(exc)) from None
    target = _lookup(obj.get("target"), roster)
    if target is None:
        target = annotations.sentiment_target
    if target is None:
        return None
    stance = _lookup(obj.get("stance"), roster)
    return Triplet(None if stance is None else stance.index, clamp_score(obj["score"]), target.index,
                   comment.likes, comment.id)


# -- whole pipeline ------------------------------------------------------------


def _corpus_key(comments: Sequence[Comment]) -> str:
    h = hashlib.sha256()
    for c in comments:
        h.update(c.id.encode())
        h.update(b"\0")
    return h.hexdigest()[:16]


def _save_checkpoint(path: str, state: dict) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(state, fh, ensure_ascii=False)
    os.replace(tmp, path)


def _load_checkpoint(path: str | None, corpus_key: str, config_hash: str) -> dict | None:
    if not path or not Path(path).exists():
        return None
    with open(path, encoding="utf-8") as fh:
        state = json.load(fh)
    if state.get("corpus") != corpus_key or state.get("config_hash") != config_hash:
        log.warning("ignoring checkpoint %s: it belongs to a different corpus or config", path)
        return None
    return state


def _analyze_one(comment: Comment, background: Background, config: PipelineConfig,
                 explorer_subgroup: Subgroup | None) -> tuple[Triplet | None, str | None]:
    platform = analyze_platform(comment, background, config.agent(Role.SOCIAL_MEDIA_VETERAN))
    linguistic = analyze_linguistics(comment, background, config.agent(Role.LINGUISTIC_EXPERT))
    ann = analyze_sentiment(comment, platform, linguistic, background.subgroups, config.agent(Role.SENTIMENT_EXPERT))
    t = assess_polarization(comment, ann, background, config.agent(Role.POLARIZATION_ASSESSOR), explorer_subgroup)
    return (t, None) if t is not None else (None, "no_target")


def run_triplet_pipeline(comments: Sequence[Comment], config: PipelineConfig, *, resume: bool = True,
                         input_fn: Callable[[str], str] = input) -> PipelineResult:
    """Background mining, subgroup exploration, then the per-comment loop.

    Every comment ends up either as a triplet or in the skipped report. On a
    stage failure the progress so far goes to ``config.checkpoint_path`` and a
    rerun with the same corpus and config picks up from there.
    """
    if not comments:
        raise EmptyCorpus("no comments to analyze")
    config.validate()
    comments = list(comments)
    ckpt = config.checkpoint_path
    corpus_key = _corpus_key(comments)
    config_hash = config.hash()
    state = _load_checkpoint(ckpt, corpus_key, config_hash) if resume else None

    def persist(st: dict) -> None:
        if ckpt:
            _save_checkpoint(ckpt, st)

    def fail(exc: StageFailure, st: dict):
        persist(st)
        raise StageFailure(exc.stage, str(exc).split(": ", 1)[-1], checkpoint=ckpt) from exc

    if state is None:
        state = {"version": 1, "corpus": corpus_key, "config_hash": config_hash, "stage": "start",
                 "cursor": 0, "results": []}
    if state["stage"] == "start":
        try:
            sample = sample_comments(comments, config.sample_size, config.seed)
            bg = mine_background(comments, config.sample_size, config.agent(Role.DOMAIN_SPECIALIST), config.seed)
            expl = explore_subgroups(comments, bg, config.agent(Role.SUBGROUP_EXPLORER), config.uncertain_threshold,
                                     max_subgroups=config.max_subgroups, review_mode=config.review_mode,
                                     review_path=config.review_path, sample=sample, input_fn=input_fn)
        except StageFailure as exc:
            fail(exc, state)
        bg = Background(bg.event_summary, bg.timeline, bg.stakeholders, tuple(expl.subgroups))
        state.update(stage="semantic", background=bg.to_dict(),
                     assignments={k: None if g is None else g.index for k, g in expl.assignments.items()},
                     review=[r.to_dict() for r in expl.review])
        persist(state)

    background = Background.from_dict(state["background"])
    roster = background.subgroups
    assignments = {k: None if v is None else roster[v] for k, v in state["assignments"].items()}
    review = [ReviewItem.from_dict(r) for r in state["review"]]
    results: list = state["results"]

    step = max(1, config.checkpoint_every)
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        while state["cursor"] < len(comments):
            chunk = comments[state["cursor"]:state["cursor"] + step]
            outs = pool.map(lambda c: _analyze_one(c, background, config, assignments.get(c.id)), chunk)
            try:
                for c, (t, reason) in zip(chunk, outs):
                    results.append({"comment_id": c.id, "triplet": None if t is None else t.to_dict(),
                                    "reason": reason})
                    state["cursor"] += 1
            except StageFailure as exc:
                fail(exc, state)
            persist(state)

    triplets, skipped = [], SkippedReport()
    for r in results:
        if r["triplet"] is None:
            skipped.add(r["comment_id"], r["reason"])
        else:
            triplets.append(Triplet.from_dict(r["triplet"]))
    if ckpt and Path(ckpt).exists():
        os.remove(ckpt)
    return PipelineResult(background, triplets, skipped, review)


# -- zero-shot stance mode --------------------------------------------------


def stance_score(text: str, target_name: str, config: PipelineConfig) -> float:
    """Assessor score towards a predefined target, with the subgroup explorer left out."""
    if not text or not text.strip():
        raise ValueError("text is empty")
    comment = Comment("eval", text, "", 0, datetime(1970, 1, 1, tzinfo=timezone.utc))
    target = Subgroup(0, target_name)
    bg = mine_background([comment], 1, config.agent(Role.DOMAIN_SPECIALIST), config.seed)
    bg = Background(bg.event_summary, bg.timeline, bg.stakeholders, (target,))
    platform = analyze_platform(comment, bg, config.agent(Role.SOCIAL_MEDIA_VETERAN))
    linguistic = analyze_linguistics(comment, bg, config.agent(Role.LINGUISTIC_EXPERT))
    ann = analyze_sentiment(comment, platform, linguistic, bg.subgroups, config.agent(Role.SENTIMENT_EXPERT))
    assessor = config.agent(Role.POLARIZATION_ASSESSOR)
    payload = {"mode": "stance", "target": target_name, "comment": text, "annotations": ann.to_payload(),
               "subgroups": [target_name]}
    try:
        obj = _ask_json(assessor, payload, bg, bg.subgroups, POLARIZATION_ASSESSMENT, _check_assessment, text)
    except InvalidScore as exc:
        raise StageFailure(POLARIZATION_ASSESSMENT, str(exc)) from None
    return clamp_score(obj["score"])


def detect_stance(text: str, target_name: str, config: PipelineConfig, tau: float = 0.1,
                  binary: bool = False) -> Stance:
    return map_score_to_stance(stance_score(text, target_name, config), tau, binary)
