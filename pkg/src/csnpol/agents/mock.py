"""Deterministic rule-based stand-in for every agent role.

The mock reads the JSON payload in the last user message, applies the lookup
tables of a ``Lexicon`` and answers in the same wire format the remote prompts
ask for. Rules per role:

* domain specialist: stakeholders are the most frequent capitalised tokens
  (stopwords removed), ties broken by first appearance;
* subgroup explorer: ``discover`` lists lexicon subgroups whose keywords or
  aliases occur in the comments, in order of first occurrence; ``classify``
  returns the single subgroup whose membership keywords occur in the comment,
  otherwise ``uncertain``;
* social media veteran: hashtag, emoji and slang table lookups;
* linguistic expert: sarcasm phrase cues, all-caps emphasis, mood, grammatical
  person and tense;
* sentiment expert: sum of token scores, sign flipped when the linguistic
  notes carry a sarcasm cue, rounded to 4 places and clamped; the target is
  the subgroup named nearest before the strongest sentiment token (after it
  when nothing precedes, the earliest alias when there is no sentiment);
* polarization assessor: stance from the explorer's assignment, score and
  target from the sentiment annotations.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..core import clamp_score
from .llm import Role

NO_PLATFORM = "no platform-specific constructs"
UNCERTAIN = "uncertain"

_TOKEN = re.compile(r"[#@]?\w+")
_PROPER = re.compile(r"(?<![#@\w])(?:[A-Z][a-z]+|[A-Z]{2,5})(?!\w)")
_CAPS = re.compile(r"(?<![#@\w])[A-Z]{3,}(?!\w)")
_FIRST = {"i", "me", "my", "mine", "we", "us", "our", "ours"}
_SECOND = {"you", "your", "yours"}
_FUTURE = {"will", "shall", "gonna", "tomorrow"}
_PAST = {"was", "were", "did", "had", "been", "ago", "yesterday"}
_NOT_PAST = {"need", "indeed", "speed", "feed", "seed", "breed", "bleed", "proceed", "succeed", "exceed"}


@dataclass(frozen=True)
class LexSubgroup:
    label: str
    description: str
    keywords: tuple[str, ...]
    aliases: tuple[str, ...]


@dataclass(frozen=True)
class Lexicon:
    subgroups: tuple[LexSubgroup, ...]
    sentiment: dict
    hashtags: dict
    slang: dict
    emoji: dict
    sarcasm_cues: tuple[str, ...]
    acronyms: frozenset
    stopwords: frozenset
    stakeholder_count: int = 5

    @classmethod
    def from_dict(cls, d: dict) -> "Lexicon":
        return cls(
            subgroups=tuple(
                LexSubgroup(g["label"], g.get("description", ""),
                            tuple(k.lower() for k in g.get("keywords", ())),
                            tuple(a.lower() for a in g.get("aliases", ())))
                for g in d.get("subgroups", ())
            ),
            sentiment={k.lower(): float(v) for k, v in d.get("sentiment", {}).items()},
            hashtags={k.lower(): v for k, v in d.get("hashtags", {}).items()},
            slang={k.lower(): v for k, v in d.get("slang", {}).items()},
            emoji=dict(d.get("emoji", {})),
            sarcasm_cues=tuple(c.lower() for c in d.get("sarcasm_cues", ())),
            acronyms=frozenset(d.get("acronyms", ())),
            stopwords=frozenset(d.get("stopwords", ())),
            stakeholder_count=int(d.get("stakeholder_count", 5)),
        )

    def subgroup(self, label: str) -> LexSubgroup | None:
        for g in self.subgroups:
            if g.label.lower() == label.lower():
                return g
        return None


@lru_cache(maxsize=16)
def load_lexicon(path: str | None = None) -> Lexicon:
    if path is None:
        text = resources.files("csnpol").joinpath("data", "mock_lexicon.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return Lexicon.from_dict(json.loads(text))


def tokens(text: str) -> list[str]:
    return _TOKEN.findall(text)


def _has_word_chars(phrase: str) -> bool:
    return bool(re.search(r"\w", phrase))


def find_phrase(toks: list[str], phrase: str, case_sensitive: bool = False) -> int | None:
    """Token index where ``phrase`` first starts, or None."""
    want = tokens(phrase)
    if not want:
        return None
    if not case_sensitive:
        toks = [t.lower() for t in toks]
        want = [w.lower() for w in want]
    k = len(want)
    for i in range(len(toks) - k + 1):
        if toks[i:i + k] == want:
            return i
    return None


def contains(text: str, phrase: str) -> bool:
    if not _has_word_chars(phrase):
        return phrase in text
    return find_phrase(tokens(text), phrase) is not None


# -- role rules ------------------------------------------------------------


def mine(comments: list[dict], lex: Lexicon) -> dict:
    counts: Counter = Counter()
    first_seen: dict[str, int] = {}
    for c in comments:
        for m in _PROPER.finditer(c.get("text", "")):
            word = m.group(0)
            if word in lex.stopwords:
                continue
            counts[word] += 1
            first_seen.setdefault(word, len(first_seen))
    ranked = sorted(counts, key=lambda w: (-counts[w], first_seen[w]))
    stakeholders = ranked[:lex.stakeholder_count]
    n = len(comments)
    if stakeholders:
        summary = f"{n} comment{'s' if n != 1 else ''} discussing {', '.join(stakeholders)}."
    else:
        evidence = comments[0].get("text", "")[:200] if comments else ""
        summary = f"{n} comment{'s' if n != 1 else ''}; evidence: \"{evidence}\""
    stamps = sorted(c["timestamp"] for c in comments if c.get("timestamp"))
    timeline = f"from {stamps[0]} to {stamps[-1]}" if stamps else "undated"
    return {"event_summary": summary, "timeline": timeline, "stakeholders": stakeholders}


def discover(texts: list[str], lex: Lexicon) -> dict:
    first: dict[str, int] = {}
    for ci, text in enumerate(texts):
        for g in lex.subgroups:
            if g.label in first:
                continue
            if any(contains(text, p) for p in g.keywords + g.aliases):
                first[g.label] = ci
    order = {g.label: k for k, g in enumerate(lex.subgroups)}
    found = sorted(first, key=lambda lab: (first[lab], order[lab]))
    return {"subgroups": [{"label": lab, "description": lex.subgroup(lab).description} for lab in found]}


def classify(text: str, lex: Lexicon) -> dict:
    hits = [g.label for g in lex.subgroups if any(contains(text, k) for k in g.keywords)]
    return {"subgroup": hits[0] if len(hits) == 1 else UNCERTAIN}


def platform_notes(text: str, lex: Lexicon) -> str:
    notes = []
    seen = set()
    for tok in tokens(text):
        low = tok.lower()
        if low in seen:
            continue
        if low.startswith("#"):
            seen.add(low)
            meaning = lex.hashtags.get(low)
            notes.append(f"hashtag {tok}: {meaning}" if meaning else f"hashtag {tok}: unrecognised hashtag")
        elif low in lex.slang:
            seen.add(low)
            notes.append(f"slang '{tok}': {lex.slang[low]}")
    for sym, meaning in lex.emoji.items():
        if sym in text:
            notes.append(f"emoji {sym}: {meaning}")
    return "; ".join(notes) if notes else NO_PLATFORM


def linguistic_notes(text: str, lex: Lexicon) -> str:
    low = text.lower()
    parts = []
    hits = [re.search(r"\b" + re.escape(c) + r"\b", low) for c in lex.sarcasm_cues]
    hits = [m for m in hits if m]
    if hits:
        shown = [f"'{text[m.start():m.end()]}'" for m in hits]
        parts.append("SARCASM cues: " + ", ".join(shown))
    caps = [w for w in _CAPS.findall(text) if w not in lex.acronyms]
    if caps:
        parts.append("emphasis by capitalization: " + ", ".join(caps))
    stripped = text.rstrip()
    mood = "interrogative" if stripped.endswith("?") else "exclamatory" if stripped.endswith("!") else "declarative"
    toks = [t.lower() for t in tokens(text)]
    tokset = set(toks)
    person = "first" if tokset & _FIRST else "second" if tokset & _SECOND else "third"
    if tokset & _FUTURE:
        tense = "future"
    elif tokset & _PAST or any(t.endswith("ed") and len(t) >= 5 and t not in _NOT_PAST for t in toks):
        tense = "past"
    else:
        tense = "present"
    parts.append(f"{mood}, {person} person, {tense} tense")
    return "; ".join(parts)


def _aliases(label: str, lex: Lexicon) -> list[str]:
    out = [label]
    g = lex.subgroup(label)
    if g is not None:
        out.extend(g.aliases)
    words = tokens(label)
    if len(words) > 1:
        out.extend(w for w in words if len(w) >= 4 and w.capitalize() not in lex.stopwords)
    return out


def find_all(toks: list[str], phrase: str, case_sensitive: bool = False) -> list[tuple[int, int]]:
    """(start, end) token spans of every occurrence of ``phrase``."""
    want = tokens(phrase)
    if not want:
        return []
    if not case_sensitive:
        toks = [t.lower() for t in toks]
        want = [w.lower() for w in want]
    k = len(want)
    return [(i, i + k) for i in range(len(toks) - k + 1) if toks[i:i + k] == want]


def sentiment_anchor(toks: list[str], lex: Lexicon) -> int | None:
    """Position of the strongest sentiment token, earliest on ties."""
    best = None
    for i, t in enumerate(toks):
        v = abs(lex.sentiment.get(t.lower(), 0.0))
        if v > 0 and (best is None or v > best[0]):
            best = (v, i)
    return None if best is None else best[1]


def resolve_target(text: str, labels: list[str], lex: Lexicon) -> str | None:
    """Subgroup named nearest before the strongest sentiment token.

    Subjects usually precede the evaluative word, so an alias after it only
    wins when none comes before. Without sentiment tokens the earliest alias
    wins. Remaining ties go to the earlier occurrence, the longer alias, then
    roster order.
    """
    toks = tokens(text)
    anchor = sentiment_anchor(toks, lex)
    best = None
    for rank, label in enumerate(labels):
        for alias in _aliases(label, lex):
            # short labels like "A" would otherwise match the article
            for start, end in find_all(toks, alias, case_sensitive=len(alias) <= 2):
                if anchor is None or start <= anchor:
                    side, dist = 0, max(0, anchor - end + 1) if anchor is not None else 0
                else:
                    side, dist = 1, start - anchor
                key = (side, dist, start, -(end - start), rank)
                if best is None or key < best[0]:
                    best = (key, label)
    return None if best is None else best[1]


def sentiment(text: str, linguistic: str, labels: list[str], lex: Lexicon) -> dict:
    raw = sum(lex.sentiment.get(t.lower(), 0.0) for t in tokens(text))
    if "SARCASM" in linguistic:
        raw = -raw
    score = clamp_score(round(raw, 4)) + 0.0
    return {"score": score, "target": resolve_target(text, labels, lex)}


def assess(payload: dict) -> dict:
    ann = payload.get("annotations") or {}
    score = float(ann.get("sentiment", 0.0))
    if payload.get("mode") == "stance":
        return {"stance": None, "score": score, "target": payload.get("target")}
    return {"stance": payload.get("explorer_subgroup"), "score": score, "target": ann.get("sentiment_target")}


def _payload(messages: list[dict]) -> dict:
    for m in reversed(messages):
        if m.get("role") == "user":
            try:
                obj = json.loads(m["content"])
            except (ValueError, TypeError):
                return {"comment": str(m.get("content", ""))}
            return obj if isinstance(obj, dict) else {"comment": str(obj)}
    return {"comment": ""}


def mock_reply(role: Role, messages: list[dict], lexicon_path: str | None = None) -> str:
    lex = load_lexicon(lexicon_path)
    p = _payload(messages)
    role = Role(role)
    comment = p.get("comment", "")
    if role is Role.DOMAIN_SPECIALIST:
        comments = p.get("comments")
        if comments is None:
            comments = [{"text": comment}]
        return json.dumps(mine(comments, lex), ensure_ascii=False)
    if role is Role.SUBGROUP_EXPLORER:
        if p.get("task") == "discover":
            texts = [c if isinstance(c, str) else c.get("text", "") for c in p.get("comments", [])]
            return json.dumps(discover(texts, lex), ensure_ascii=False)
        return json.dumps(classify(comment, lex), ensure_ascii=False)
    if role is Role.SOCIAL_MEDIA_VETERAN:
        return platform_notes(comment, lex)
    if role is Role.LINGUISTIC_EXPERT:
        return linguistic_notes(comment, lex)
    if role is Role.SENTIMENT_EXPERT:
        return json.dumps(sentiment(comment, p.get("linguistic_notes", ""), list(p.get("subgroups", [])), lex),
                          ensure_ascii=False)
    return json.dumps(assess(p), ensure_ascii=False)
