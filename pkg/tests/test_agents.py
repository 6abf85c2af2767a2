import json
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from csnpol.agents import pipeline as pl
from csnpol.agents.llm import AgentConfig, Backend, Role, llm_complete
from csnpol.agents.pipeline import (Background, PipelineConfig, SemanticAnnotations, analyze_linguistics,
                                    analyze_platform, analyze_sentiment, assess_polarization, detect_stance,
                                    explore_subgroups, mine_background, run_triplet_pipeline, sample_comments,
                                    stance_score)
from csnpol.agents.review import (ReviewItem, ReviewMode, apply_resolutions, human_review, read_review_file,
                                  write_review_file)
from csnpol.core import Subgroup, Triplet, clamp_score, read_comments
from csnpol.errors import EmptyCorpus, ReviewFormatError, StageFailure, SubgroupOverflow, TransportError
from csnpol.evaluation.metrics import Stance

from conftest import make_comment, roster

MOCK = PipelineConfig.mock()
BG = Background("e", "", (), tuple(roster("A", "B")))


def agent(role):
    return MOCK.agent(role)


@pytest.fixture
def ab_lexicon(tmp_path):
    lex = json.loads(json.dumps({
        "subgroups": [
            {"label": "A", "description": "team A", "keywords": ["#teama", "go team a"], "aliases": []},
            {"label": "B", "description": "team B", "keywords": ["#teamb", "go team b"], "aliases": []},
        ],
        "sentiment": {"heroes": 0.6, "traitors": -0.8, "great": 0.5},
        "stopwords": ["Go"],
    }))
    p = tmp_path / "lex.json"
    p.write_text(json.dumps(lex), encoding="utf-8")
    return str(p)


@pytest.fixture
def corpus(fixture_path):
    return read_comments(fixture_path, strict=True)[0]


# -- stage examples ------------------------------------------------------------

def test_platform_notes_examples():
    notes = analyze_platform(make_comment(0, "#SlavaUkraini 🇺🇦"), BG, agent(Role.SOCIAL_MEDIA_VETERAN))
    assert "#SlavaUkraini" in notes and "pro-Ukraine slogan" in notes
    plain = analyze_platform(make_comment(1, "The council met on Tuesday."), BG, agent(Role.SOCIAL_MEDIA_VETERAN))
    assert plain == "no platform-specific constructs"
    slang = analyze_platform(make_comment(2, "ratio + L"), BG, agent(Role.SOCIAL_MEDIA_VETERAN))
    assert "'ratio'" in slang and "'L'" in slang and "slang" in slang


def test_linguistic_notes_examples():
    notes = analyze_linguistics(make_comment(0, "Oh sure, ANOTHER brilliant move."), BG, agent(Role.LINGUISTIC_EXPERT))
    assert "SARCASM" in notes and "'Oh sure'" in notes and "ANOTHER" in notes
    assert analyze_linguistics(make_comment(1, "I support X."), BG,
                               agent(Role.LINGUISTIC_EXPERT)) == "declarative, first person, present tense"


def test_acronyms_are_not_emphasis():
    notes = analyze_linguistics(make_comment(0, "NATO met today."), BG, agent(Role.LINGUISTIC_EXPERT))
    assert "capitalization" not in notes


@pytest.mark.parametrize("text, score, target", [
    ("Group A are heroes", 0.6, "A"),
    ("Group A are traitors", -0.8, "A"),
    ("I had lunch", 0.0, None),
])
def test_sentiment_examples(text, score, target):
    c = make_comment(0, text)
    ling = analyze_linguistics(c, BG, agent(Role.LINGUISTIC_EXPERT))
    ann = analyze_sentiment(c, "no platform-specific constructs", ling, BG.subgroups, agent(Role.SENTIMENT_EXPERT))
    assert ann.sentiment == score
    assert (ann.sentiment_target.label if ann.sentiment_target else None) == target


def test_sarcasm_flips_sign():
    c = make_comment(0, "Oh sure, ANOTHER brilliant move by the Kremlin.")
    ling = analyze_linguistics(c, BG, agent(Role.LINGUISTIC_EXPERT))
    groups = (Subgroup(0, "Pro-Russia"),)
    assert analyze_sentiment(c, "", ling, groups, agent(Role.SENTIMENT_EXPERT)).sentiment == -0.6


def test_target_prefers_the_subject():
    groups = (Subgroup(0, "Pro-Ukraine"), Subgroup(1, "Pro-Russia"))
    c = make_comment(0, "Stand with Ukraine! The Russian army are murderers.")
    ann = analyze_sentiment(c, "", "declarative", groups, agent(Role.SENTIMENT_EXPERT))
    assert ann.sentiment_target.label == "Pro-Russia"


def test_assessor_examples():
    a, b = BG.subgroups
    c = make_comment(0, "Group A are traitors", likes=4)
    t = assess_polarization(c, SemanticAnnotations("", "", -0.8, a), BG, agent(Role.POLARIZATION_ASSESSOR), b)
    assert t == Triplet(b.index, -0.8, a.index, 4, c.id)
    assert assess_polarization(c, SemanticAnnotations("", "", 0.2, None), BG,
                               agent(Role.POLARIZATION_ASSESSOR), b) is None
    t = assess_polarization(c, SemanticAnnotations("", "", 0.5, a), BG, agent(Role.POLARIZATION_ASSESSOR))
    assert t == Triplet(None, 0.5, a.index, 4, c.id)


def test_detect_stance_examples():
    assert detect_stance("Hillary will save this country", "Hillary Clinton", MOCK) is Stance.FAVOR
    assert detect_stance("The sky is blue", "Atheism", MOCK) is Stance.NONE
    assert stance_score("Hillary will save this country", "Hillary Clinton", MOCK) == 0.7
    with pytest.raises(ValueError):
        detect_stance("   ", "Atheism", MOCK)


def test_mock_never_touches_the_network():
    cfg = AgentConfig(Role.SOCIAL_MEDIA_VETERAN, Backend.MOCK, base_url="http://127.0.0.1:9")
    assert llm_complete([{"role": "user", "content": "ratio"}], cfg).startswith("slang")


# -- background mining -----------------------------------------------------------

def test_background_on_fixture(corpus):
    bg = mine_background(corpus, 200, agent(Role.DOMAIN_SPECIALIST))
    assert {"Russia", "Ukraine"} <= set(bg.stakeholders)
    assert bg.event_summary and bg.subgroups == ()


def test_background_single_comment():
    bg = mine_background([make_comment(0, "hello")], 5, agent(Role.DOMAIN_SPECIALIST))
    assert "hello" in bg.event_summary and bg.stakeholders == ()


def test_background_errors():
    with pytest.raises(EmptyCorpus):
        mine_background([], 5, agent(Role.DOMAIN_SPECIALIST))


def test_background_sample_is_seeded(corpus):
    runs = [[c.id for c in sample_comments(corpus, 5, seed=3)] for _ in range(3)]
    assert runs[0] == runs[1] == runs[2] and len(runs[0]) == 5
    assert runs[0] != [c.id for c in sample_comments(corpus, 5, seed=4)]


# -- subgroup exploration ------------------------------------------------------------

def test_explore_two_keyword_groups(ab_lexicon):
    cfg = PipelineConfig.mock(ab_lexicon)
    texts = ["#TeamA all the way", "go team b!", "#teamb forever", "Go team A, you are great"]
    cs = [make_comment(i, t) for i, t in enumerate(texts)]
    expl = explore_subgroups(cs, Background("e", "", ()), cfg.agent(Role.SUBGROUP_EXPLORER))
    assert [g.label for g in expl.subgroups] == ["A", "B"]
    assert expl.review == []
    # oracle: keyword grep over the texts
    grep = {c.id: "A" if ("teama" in c.text.lower() or "team a" in c.text.lower()) else "B" for c in cs}
    assert {k: g.label for k, g in expl.assignments.items()} == grep


def test_explore_identical_neutral_comments_all_queued():
    cs = [make_comment(i, "the weather is nice") for i in range(7)]
    expl = explore_subgroups(cs, Background("e", "", ()), agent(Role.SUBGROUP_EXPLORER))
    assert all(g is None for g in expl.assignments.values())
    assert [r.comment_id for r in expl.review] == [c.id for c in cs]


def test_threshold_flushes_to_review_file(tmp_path):
    cfg = replace(MOCK, uncertain_threshold=3, review_path=str(tmp_path / "review.jsonl"))
    cs = [make_comment(0, "Stand with Ukraine, Russia lies."), make_comment(1, "the weather is nice"),
          make_comment(2, "I had lunch and Russia lies"), make_comment(3, "Russia lies, nobody knows why")]
    result = run_triplet_pipeline(cs, cfg)
    lines = (tmp_path / "review.jsonl").read_text(encoding="utf-8").splitlines()
    items = [json.loads(l) for l in lines]
    assert len(items) == 3 and all(i["resolution"] is None for i in items)
    assert [i["comment_id"] for i in items] == ["c001", "c002", "c003"]
    by_id = {t.comment_id: t for t in result.triplets}
    assert by_id["c000"].stance == 0
    assert by_id["c002"].stance is None and by_id["c003"].stance is None


def test_subgroup_overflow(ab_lexicon):
    cfg = PipelineConfig.mock(ab_lexicon)
    with pytest.raises(SubgroupOverflow) as err:
        explore_subgroups([make_comment(0, "#teama #teamb")], Background("e", "", ()),
                          cfg.agent(Role.SUBGROUP_EXPLORER), max_subgroups=1)
    assert err.value.to_dict()["error"] == "subgroup_overflow"


# -- human review ------------------------------------------------------------------

def _items(n=3):
    return [ReviewItem(f"c{i}", f"text {i}", tuple(roster("A", "B", "C"))) for i in range(n)]


def test_file_mode_writes_unresolved(tmp_path):
    path = tmp_path / "r.jsonl"
    out = human_review(_items(), ReviewMode.FILE, path=path)
    rows = [json.loads(l) for l in path.read_text(encoding="utf-8").splitlines()]
    assert len(rows) == 3 and all(r["resolution"] is None for r in rows)
    assert all(i.resolution is None for i in out)


def test_interactive_pick_new_and_skip():
    groups = roster("A", "B", "C")
    answers = iter(["2", "x", "n", "D", "s"])
    out = human_review(_items(), ReviewMode.INTERACTIVE, roster=groups, input_fn=lambda _: next(answers),
                       output_fn=lambda _: None)
    assert out[0].resolution == groups[2]
    assert out[1].resolution.label == "D" and out[1].resolution.index == 3
    assert out[2].resolution is None


def test_apply_resolves_two_of_three(tmp_path):
    groups = roster("A", "B", "C")
    path = tmp_path / "r.jsonl"
    rows = [{"comment_id": "c0", "resolution": 1}, {"comment_id": "c1", "resolution": "C"},
            {"comment_id": "c2", "resolution": None}]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    triplets = [Triplet(None, -0.2, 0, 1, f"c{i}") for i in range(3)]
    updated, n = apply_resolutions(triplets, read_review_file(path, groups))
    assert n == 2 and [t.stance for t in updated] == [1, 2, None]


def test_malformed_review_file(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text('{"comment_id": "c0", "resolution": 0}\nnot json\n{"resolution": 1}\n'
                    '{"comment_id": "c3", "resolution": 9}\n', encoding="utf-8")
    with pytest.raises(ReviewFormatError) as err:
        read_review_file(path, roster("A", "B"))
    assert [line for line, _ in err.value.problems] == [2, 3, 4]


def test_review_file_appends(tmp_path):
    path = tmp_path / "r.jsonl"
    write_review_file(_items(2), path)
    write_review_file(_items(1), path)
    assert len(path.read_text(encoding="utf-8").splitlines()) == 3


# -- whole pipeline --------------------------------------------------------------------

def test_pipeline_conservation_and_determinism(corpus):
    a = run_triplet_pipeline(corpus, MOCK)
    b = run_triplet_pipeline(corpus, MOCK)
    assert len(a.triplets) + len(a.skipped) == len(corpus)
    assert [t.to_dict() for t in a.triplets] == [t.to_dict() for t in b.triplets]
    assert all(clamp_score(t.score) == t.score for t in a.triplets)


def test_pipeline_matches_golden_triplets(corpus, golden_dir):
    result = run_triplet_pipeline(corpus, MOCK)
    rows = [json.loads(l) for l in (golden_dir / "triplets.jsonl").read_text(encoding="utf-8").splitlines()]
    assert [t.to_dict() for t in result.triplets] == rows[1:]
    assert [g.label for g in result.background.subgroups] == [g["label"] for g in rows[0]["_meta"]["subgroups"]]


def test_workers_do_not_change_output(corpus):
    serial = run_triplet_pipeline(corpus, MOCK)
    parallel = run_triplet_pipeline(corpus, replace(MOCK, workers=4, checkpoint_every=7))
    assert serial.triplets == parallel.triplets and serial.skipped == parallel.skipped


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        run_triplet_pipeline([], MOCK)


def test_hot_temperature_rejected_in_deterministic_mode():
    agents = dict(MOCK.agents)
    agents[Role.SENTIMENT_EXPERT] = replace(agents[Role.SENTIMENT_EXPERT], temperature=0.7)
    with pytest.raises(ValueError):
        run_triplet_pipeline([make_comment(0, "x")], replace(MOCK, agents=agents))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([
    "Ukrainians are heroes", "Russia lies", "#StopTheWar now", "I had lunch", "Putin is evil",
    "Slava Ukraini! Kyiv is brave", "the weather is nice", "NATO provoked this, Biden is weak",
]), min_size=1, max_size=12))
def test_conservation_property(texts):
    cs = [make_comment(i, t, likes=i % 3) for i, t in enumerate(texts)]
    r = run_triplet_pipeline(cs, MOCK)
    assert len(r.triplets) + len(r.skipped) == len(cs)
    assert {t.comment_id for t in r.triplets}.isdisjoint(c for c, _ in r.skipped.entries)


@settings(max_examples=30, deadline=None)
@given(st.text(min_size=1, max_size=60).filter(lambda s: s.strip()))
def test_stage_isolation(text):
    # the same comment analysed with and without a discovered roster gets the same notes
    c = make_comment(0, text)
    with_roster = Background("e", "", (), tuple(roster("Pro-Ukraine", "Pro-Russia")))
    bare = Background("e", "", ())
    for role, fn in ((Role.SOCIAL_MEDIA_VETERAN, analyze_platform), (Role.LINGUISTIC_EXPERT, analyze_linguistics)):
        assert fn(c, with_roster, agent(role)) == fn(c, bare, agent(role))


def test_checkpoint_resume_after_failure(corpus, tmp_path, monkeypatch):
    ckpt = tmp_path / "ckpt.json"
    cfg = replace(MOCK, checkpoint_path=str(ckpt), checkpoint_every=5)
    reference = run_triplet_pipeline(corpus, replace(MOCK))
    real = pl.llm_complete
    calls = {"n": 0}

    def flaky(messages, config, **kw):
        if config.role is Role.POLARIZATION_ASSESSOR:
            calls["n"] += 1
            if calls["n"] == 13:
                raise TransportError("simulated outage", attempts=4, status=503)
        return real(messages, config, **kw)

    monkeypatch.setattr(pl, "llm_complete", flaky)
    with pytest.raises(StageFailure) as err:
        run_triplet_pipeline(corpus, cfg)
    assert err.value.stage == "PolarizationAssessment" and err.value.checkpoint == str(ckpt)
    saved = json.loads(ckpt.read_text(encoding="utf-8"))
    assert saved["stage"] == "semantic" and saved["cursor"] == 12

    monkeypatch.setattr(pl, "llm_complete", real)
    seen = []

    def counting(messages, config, **kw):
        if config.role is Role.POLARIZATION_ASSESSOR:
            seen.append(1)
        return real(messages, config, **kw)

    monkeypatch.setattr(pl, "llm_complete", counting)
    resumed = run_triplet_pipeline(corpus, cfg)
    assert len(seen) == len(corpus) - 12
    assert resumed.triplets == reference.triplets and resumed.skipped == reference.skipped
    assert not ckpt.exists()


def test_checkpoint_for_other_config_is_ignored(corpus, tmp_path):
    ckpt = tmp_path / "ckpt.json"
    ckpt.write_text(json.dumps({"corpus": "x", "config_hash": "y", "stage": "semantic"}), encoding="utf-8")
    r = run_triplet_pipeline(corpus, replace(MOCK, checkpoint_path=str(ckpt)))
    assert len(r.triplets) + len(r.skipped) == len(corpus)
