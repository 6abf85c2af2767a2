import json
import os
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from csnpol.agents.pipeline import PipelineConfig
from csnpol.errors import EmptyEval, FormatError, StageFailure
from csnpol.evaluation.datasets import DatasetFormat, EvalRecord, count_by_target, load_dataset, published_count_mismatches
from csnpol.evaluation.metrics import (CLASSES, ConfusionCounts, Stance, f1, f1_exact, f_avg, f_avg_exact,
                                       macro_f1, macro_f1_exact, map_score_to_stance)
from csnpol.evaluation.runner import format_report, run_zero_shot_eval, select_records

FAV, AG, NO = Stance.FAVOR, Stance.AGAINST, Stance.NONE


def cc_from(table):
    """Confusion counts from {(gold, pred): n}."""
    return ConfusionCounts.from_pairs([pair for pair, n in table.items() for _ in range(n)])


# hand-computed fixtures: (tp, fp, fn) -> exact F1
F1_FIXTURES = [
    ((10, 0, 0), F(1)),
    ((2, 1, 1), F(2, 3)),
    ((0, 5, 0), F(0)),
    ((0, 0, 7), F(0)),
    ((0, 0, 0), F(0)),
    ((0, 3, 4), F(0)),
    ((3, 1, 0), F(6, 7)),
    ((1, 0, 3), F(2, 5)),
    ((5, 5, 5), F(1, 2)),
    ((4, 2, 6), F(1, 2)),
    ((7, 3, 1), F(7, 9)),
    ((1, 2, 3), F(2, 7)),
]


@pytest.mark.parametrize("counts, expected", F1_FIXTURES)
def test_f1_fixtures(counts, expected):
    assert f1_exact(*counts) == expected
    assert f1(*counts) == float(expected)


CONFUSION_FIXTURES = [
    # perfect three-class predictions
    ({(FAV, FAV): 3, (AG, AG): 2, (NO, NO): 4}, F(1), F(1)),
    # everything predicted None: both polar F1s are 0
    ({(FAV, NO): 3, (AG, NO): 5, (NO, NO): 2}, F(0), F(1, 9)),
    # F1 per class 4/5, 3/5, 2/5
    ({(FAV, FAV): 2, (FAV, AG): 1, (AG, AG): 3, (AG, NO): 1, (NO, AG): 2, (NO, NO): 1}, F(7, 10), F(3, 5)),
    # gold Neutral absent and never predicted: its F1 is 0 and still in the macro mean
    ({(FAV, FAV): 2, (AG, AG): 2}, F(1), F(2, 3)),
    # one class absent in gold but predicted
    ({(FAV, FAV): 1, (AG, FAV): 1}, F(1, 3), F(2, 9)),
]


def test_f_avg_and_macro_fixtures():
    for table, want_avg, want_macro in CONFUSION_FIXTURES:
        cc = cc_from(table)
        assert f_avg_exact(cc) == want_avg and f_avg(cc) == float(want_avg)
        assert macro_f1_exact(cc) == want_macro and macro_f1(cc) == float(want_macro)


def test_f_avg_point_seven():
    # Favor: tp 2 fp 0 fn 1 -> 4/5; Against: tp 3 fp 3 fn 1 -> 3/5
    cc = cc_from({(FAV, FAV): 2, (FAV, AG): 1, (AG, AG): 3, (AG, NO): 1, (NO, AG): 2, (NO, NO): 1})
    assert cc.f1_exact(FAV) == F(4, 5) and cc.f1_exact(AG) == F(3, 5)
    assert f_avg_exact(cc) == F(7, 10)


def test_macro_point_six():
    # per-class 9/10, 3/5, 3/10 built from explicit counts
    cc = ConfusionCounts()
    cc.tp.update({FAV: 9, AG: 3, NO: 3})
    cc.fp.update({FAV: 1, AG: 2, NO: 7})
    cc.fn.update({FAV: 1, AG: 2, NO: 7})
    assert [cc.f1_exact(c) for c in CLASSES] == [F(9, 10), F(3, 5), F(3, 10)]
    assert macro_f1_exact(cc) == F(3, 5)


@given(st.lists(st.tuples(st.sampled_from(CLASSES), st.sampled_from(CLASSES)), max_size=60), st.randoms())
def test_metric_sanity(pairs, rnd):
    cc = ConfusionCounts.from_pairs(pairs)
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    cc2 = ConfusionCounts.from_pairs(shuffled)
    assert 0 <= f_avg(cc) <= 1 and 0 <= macro_f1(cc) <= 1
    assert f_avg(cc) == f_avg(cc2) and macro_f1(cc) == macro_f1(cc2)
    for c in CLASSES:
        assert cc.gold_count(c) == sum(1 for g, _ in pairs if g == c)


@pytest.mark.parametrize("score, tau, expected", [
    (0.8, 0.1, FAV), (-0.05, 0.1, NO), (-0.10, 0.1, NO), (-0.1000001, 0.1, AG), (0.1, 0.1, NO),
    (0.1000001, 0.1, FAV), (0.0, 0.0, NO)])
def test_map_score(score, tau, expected):
    assert map_score_to_stance(score, tau) is expected


def test_binary_mapping():
    assert map_score_to_stance(0.0, binary=True) is AG
    assert map_score_to_stance(1e-9, binary=True) is FAV
    with pytest.raises(ValueError):
        map_score_to_stance(0.5, tau=1.0)


# -- loaders -------------------------------------------------------------------------

def test_sem16_loader(tmp_path):
    p = tmp_path / "SemEval2016-Task6-test.txt"
    p.write_bytes("ID\tTarget\tTweet\tStance\n1\tAtheism\tGod is great “quoted”\tAGAINST\n"
                  "2\tAtheism\tno gods\tFAVOR\n3\tHillary Clinton\tmeh\tNONE\n".encode("cp1252"))
    recs = load_dataset(p, "SEM16")
    assert [r.gold for r in recs] == [AG, FAV, NO]
    assert recs[0].text == "God is great “quoted”" and recs[0].split == "test"
    assert count_by_target(recs) == {"Atheism": {"Favor": 1, "Against": 1, "None": 0},
                                     "Hillary Clinton": {"Favor": 0, "Against": 0, "None": 1}}


def test_pstance_loader_rejects_neutral(tmp_path):
    p = tmp_path / "raw_train_biden.csv"
    p.write_text("Tweet,Target,Stance\nhi,Joe Biden,FAVOR\nyo,Joe Biden,AGAINST\n", encoding="utf-8")
    recs = load_dataset(tmp_path, DatasetFormat.PSTANCE)
    assert [r.gold for r in recs] == [FAV, AG] and recs[0].split == "train"
    p.write_text("Tweet,Target,Stance\nhi,Joe Biden,NONE\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_dataset(p, DatasetFormat.PSTANCE)


def test_vast_label_mapping(tmp_path):
    p = tmp_path / "vast_dev.csv"
    p.write_text('post,topic_str,label\n"a, b",guns,0\nc,guns,1\nd,tax,2\n', encoding="utf-8")
    recs = load_dataset(p, "VAST")
    assert [(r.text, r.gold) for r in recs] == [("a, b", AG), ("c", FAV), ("d", NO)]
    assert recs[0].split == "dev"


def test_missing_column_named(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("post,label\nx,1\n", encoding="utf-8")
    with pytest.raises(FormatError, match="topic_str"):
        load_dataset(p, "VAST")


def test_empty_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("", encoding="utf-8")
    with pytest.raises(FormatError):
        load_dataset(p, "SEM16")


def test_published_count_check_on_synthetic_counts():
    recs = ([EvalRecord("t", "Joe Biden", FAV, DatasetFormat.PSTANCE)] * 3217
            + [EvalRecord("t", "Joe Biden", AG, DatasetFormat.PSTANCE)] * 4079)
    problems = published_count_mismatches(recs, "PStance")
    assert not any(p.startswith("Joe Biden") for p in problems)
    assert "Bernie Sanders: target absent" in problems


PUBLISHED_ENV = {"SEM16": "CSNPOL_SEM16", "PStance": "CSNPOL_PSTANCE", "VAST": "CSNPOL_VAST"}


@pytest.mark.parametrize("fmt", list(PUBLISHED_ENV))
def test_published_counts_on_official_files(fmt):
    path = os.environ.get(PUBLISHED_ENV[fmt])
    if not path:
        pytest.skip(f"set {PUBLISHED_ENV[fmt]} to the official {fmt} files")
    assert published_count_mismatches(load_dataset(path, fmt), fmt) == []


# -- runner ----------------------------------------------------------------------------

TWELVE = [
    ("Hillary will save this country", "Hillary Clinton", FAV),       # +0.7 Favor
    ("Hillary and her team are liars", "Hillary Clinton", AG),        # -0.7 Against
    ("The sky is blue", "Atheism", NO),                               #  0.0 None
    ("Religion is evil", "Atheism", FAV),                             # -0.8 Against
    ("I love my church", "Atheism", AG),                              # +0.6 Favor
    ("Climate action is good", "Climate Change is a Real Concern", FAV),       # +0.4 Favor
    ("Climate science is propaganda", "Climate Change is a Real Concern", AG),  # -0.5 Against
    ("I had lunch", "Donald Trump", AG),                              #  0.0 None
    ("Trump is great", "Donald Trump", FAV),                          # +0.5 Favor
    ("Trump is a traitor", "Donald Trump", AG),                       # -0.8 Against
    ("Feminists are brave", "Feminist Movement", NO),                 # +0.5 Favor
    ("Oh sure, feminism is great", "Feminist Movement", AG),          # sarcasm: -0.5 Against
]
RECORDS = [EvalRecord(t, tg, g, DatasetFormat.SEM16) for t, tg, g in TWELVE]
MOCK = PipelineConfig.mock()


def test_twelve_record_hand_trace():
    report = run_zero_shot_eval(RECORDS, MOCK)
    assert report["status"] == "COMPLETE" and report["records"] == 12 and report["scored"] == 12
    # pooled Favor tp3 fp2 fn1 -> 2/3; Against tp4 fp1 fn2 -> 8/11
    assert report["overall"] == float(F(23, 33))
    per = report["per_target"]
    assert per["Hillary Clinton"]["f_avg"] == 1.0
    assert per["Atheism"]["f_avg"] == 0.0
    assert per["Climate Change is a Real Concern"]["f_avg"] == 1.0
    assert per["Donald Trump"]["f_avg"] == float(F(5, 6))
    assert per["Feminist Movement"]["f_avg"] == 0.5
    assert per["Donald Trump"]["confusion"]["Against"] == {"tp": 1, "fp": 0, "fn": 1}
    assert report["models"]["polarization_assessor"] == "mock" and report["tau"] == 0.1
    assert "overall" in format_report(report)


def test_vast_reports_macro_f1():
    recs = [EvalRecord("Trump is great", "trump", FAV, DatasetFormat.VAST),
            EvalRecord("The sky is blue", "sky", NO, DatasetFormat.VAST)]
    report = run_zero_shot_eval(recs, MOCK)
    assert report["metric"] == "macro_f1"
    assert report["overall"] == float(F(2, 3))


def test_pstance_forces_sign_mapping():
    recs = [EvalRecord("The sky is blue", "Joe Biden", AG, DatasetFormat.PSTANCE)]
    report = run_zero_shot_eval(recs, MOCK)
    assert report["tau"] == 0.0 and report["per_target"]["Joe Biden"]["confusion"]["Against"]["tp"] == 1


def test_limit_zero():
    with pytest.raises(EmptyEval):
        run_zero_shot_eval(RECORDS, MOCK, limit=0)
    with pytest.raises(EmptyEval):
        run_zero_shot_eval([], MOCK)


def test_limit_sample_is_seeded():
    a = select_records(RECORDS, 5, seed=1)
    assert a == select_records(RECORDS, 5, seed=1) and len(a) == 5
    assert [RECORDS.index(r) for r in a] == sorted(RECORDS.index(r) for r in a)


def test_failures_make_a_partial_report():
    def score(text, target):
        if "lunch" in text:
            raise StageFailure("PolarizationAssessment", "boom")
        from csnpol.agents.pipeline import stance_score
        return stance_score(text, target, MOCK)

    report = run_zero_shot_eval(RECORDS, MOCK, score_fn=score)
    assert report["status"] == "PARTIAL" and report["failures"] == 1 and report["scored"] == 11


class Killed(BaseException):
    pass


def test_kill_and_resume_gives_identical_report(tmp_path):
    full = run_zero_shot_eval(RECORDS, MOCK)
    ckpt = tmp_path / "eval.jsonl"
    from csnpol.agents.pipeline import stance_score
    seen = []

    def dying(text, target):
        if len(seen) == 6:
            raise Killed()
        seen.append(text)
        return stance_score(text, target, MOCK)

    with pytest.raises(Killed):
        run_zero_shot_eval(RECORDS, MOCK, checkpoint=ckpt, score_fn=dying)
    assert len(ckpt.read_text(encoding="utf-8").splitlines()) == 6
    with open(ckpt, "a", encoding="utf-8") as fh:
        fh.write('{"i": 6, "sco')  # torn write at the moment of the kill
    resumed_calls = []

    def counting(text, target):
        resumed_calls.append(text)
        return stance_score(text, target, MOCK)

    resumed = run_zero_shot_eval(RECORDS, MOCK, checkpoint=ckpt, score_fn=counting)
    assert len(resumed_calls) == 6
    assert json.dumps(resumed, sort_keys=True) == json.dumps(full, sort_keys=True)


@pytest.mark.parametrize("name, split", [
    ("SemEval2016-Task6-test.txt", "test"), ("semeval2016-task6-trainingdata.txt", "train"),
    ("semeval2016-task6-trialdata.txt", "dev"), ("raw_val_sanders.csv", "dev"), ("vast_dev.csv", "dev"),
    ("vast_test.csv", "test"), ("raw_train_trump.csv", "train")])
def test_split_from_file_name(tmp_path, name, split):
    p = tmp_path / name
    p.write_text("Tweet,Target,Stance\nx,T,FAVOR\n", encoding="utf-8")
    assert load_dataset(p, "SEM16")[0].split == split
