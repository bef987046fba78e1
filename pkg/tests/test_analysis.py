import datetime as dt
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actantial import analysis
from actantial.corpus import Article, Corpus, weekly_counts
from actantial.embedder import HashEmbedder
from actantial.extraction import ROLES, ActantialModel, ActantRole
from actantial.projection import UmapParams

R = ActantRole
M = ActantialModel.from_primaries


def _names(n, prefix):
    return [f"{prefix}{i}" for i in range(n)]


def test_label_israel_su_se():
    n = 100
    subjects = ["Israel"] * 66 + _names(34, "s")
    senders = ["Israel"] * 37 + _names(63, "x")
    models = {f"a{i}": M(subject=subjects[i], sender=senders[i]) for i in range(n)}
    (spec,) = analysis.label_clusters(models, dict.fromkeys(models, 0))
    assert spec.label == "Israel (SuSe)"
    assert spec.entries[0].shares == pytest.approx((0.66, 0.37))


def test_label_empty_when_below_threshold():
    models = {f"a{i}": M(subject=f"s{i}", object=f"o{i}") for i in range(10)}
    (spec,) = analysis.label_clusters(models, dict.fromkeys(models, 3))
    assert spec.entries == [] and spec.label == "" and spec.cluster_id == 3


def test_label_ten_article_hand_derivation():
    # Subject: Israel x4, Hamas x3, others; Object: Gaza x2 (20% boundary), Receiver: Gaza x5
    subj = ["Israel"] * 4 + ["Hamas"] * 3 + ["A", "B", "C"]
    obj = ["Gaza", "gaza "] + _names(8, "o")
    rec = ["Gaza"] * 5 + [None] * 5
    helper = ["Egypt"] + [None] * 9  # 10%: excluded
    opp = ["Israel"] * 2 + _names(8, "p")  # exactly 20%: included
    models = {
        f"a{i}": M(subject=subj[i], object=obj[i], receiver=rec[i], helper=helper[i], opponent=opp[i])
        for i in range(10)
    }
    (spec,) = analysis.label_clusters(models, dict.fromkeys(models, 0))
    assert spec.label == "Israel (SuOp), Gaza (ObRe)"


def test_label_case_invariant_surface_display():
    a = {f"a{i}": M(subject="israel" if i == 0 else "Israel") for i in range(4)}
    b = {k: M(subject=m.primary(R.SUBJECT).upper()) for k, m in a.items()}
    la = analysis.label_clusters(a, dict.fromkeys(a, 0))[0]
    lb = analysis.label_clusters(b, dict.fromkeys(b, 0))[0]
    assert la.label == "Israel (Su)" and lb.label == "ISRAEL (Su)"
    assert la.entries[0].shares == lb.entries[0].shares == (1.0,)


def test_dropped_articles_excluded():
    models = {"a": M(subject="X"), "b": M(subject="Y"), "c": M(subject="Y")}
    specs = analysis.label_clusters(models, {"a": 0, "b": -1, "c": -1})
    assert [s.cluster_id for s in specs] == [0] and specs[0].size == 1
    rows = analysis.actor_table(models, {"a": 0, "b": -1, "c": -1})
    assert [(r.actor, r.count) for r in rows] == [("X", 1)]


def test_actor_table_examples():
    models = {f"a{i}": M(subject="Israel") for i in range(4)}
    rows = analysis.actor_table(models, dict.fromkeys(models, 0))
    assert [(r.role, r.actor, r.share, r.count) for r in rows] == [(R.SUBJECT, "Israel", 1.0, 4)]


def test_actor_table_threshold_boundary():
    # 1000 articles; actor Rare at 4.9% is excluded, Edge at exactly 5% is kept
    subj = ["Rare"] * 49 + ["Edge"] * 50 + _names(901, "z")
    models = {f"a{i}": M(subject=s) for i, s in enumerate(subj)}
    rows = analysis.actor_table(models, dict.fromkeys(models, 0))
    assert [r.actor for r in rows] == ["Edge"]


def test_actor_table_brute_force():
    rng = np.random.default_rng(0)
    pool = ["A", "B", "C", "D", "E"]
    models = {f"a{i}": M(**{r.value.lower(): pool[rng.integers(5)] for r in ROLES}) for i in range(40)}
    assignment = {k: int(rng.integers(3)) for k in models}
    rows = analysis.actor_table(models, assignment, min_share=0.0, top=5)
    for cluster in range(3):
        ids = [k for k, c in assignment.items() if c == cluster]
        for role in ROLES:
            counts = Counter(models[k].primary(role) for k in ids)
            got = {r.actor: r.count for r in rows if r.cluster == cluster and r.role == role}
            assert got == dict(counts)


def test_syncretism_hand_count():
    models = [M(subject="A", sender="A"), M(subject="B", sender="b"), M(subject="C", sender="C"),
              M(subject="D", sender="E"), M(subject="F"), M(sender="G")]
    rows = {r.name: r for r in analysis.syncretism_report(models)}
    assert rows["Subject-Sender"].share == 0.5 and rows["Subject-Sender"].count == 3
    assert len(rows) == 15
    assert sum(r.count for r in rows.values()) == 3


def test_syncretism_none_and_ordering():
    models = [M(subject="a", object="b"), M(subject="c", object="d")]
    rows = analysis.syncretism_report(models)
    assert all(r.share == 0 for r in rows)
    assert rows[0].name == "Subject-Object"  # canonical order on ties
    assert analysis.syncretism_report([]) and analysis.syncretism_report([])[0].share == 0.0


def test_syncretism_top_actors():
    models = [M(subject="Israel", sender="Israel")] * 3 + [M(subject="Hamas", sender="hamas")]
    row = analysis.syncretism_report(models)[0]
    assert row.top_actors == [("Israel", 0.75), ("Hamas", 0.25)]


actor = st.sampled_from(["Israel", "israel", "Hamas", "HAMAS", "Gaza"])
model_st = st.fixed_dictionaries({r.value.lower(): st.one_of(st.none(), actor) for r in ROLES}).map(
    lambda d: M(**d)
)


@settings(max_examples=100, deadline=None)
@given(st.lists(model_st, min_size=1, max_size=12))
def test_case_sensitive_counts_never_exceed(models):
    loose = {r.pair: r.share for r in analysis.syncretism_report(models)}
    strict = {r.pair: r.share for r in analysis.syncretism_report(models, case_sensitive=True)}
    assert all(strict[p] <= loose[p] for p in loose)
    assert all(0.0 <= v <= 1.0 for v in loose.values())


def test_missing_actant_stats():
    models = {f"a{i}": M(subject="x", helper=None if i == 0 else "h") for i in range(4)}
    stats = analysis.missing_actant_stats(models, {"a0": 0, "a1": 0, "a2": 1, "a3": 1})
    assert stats.overall[R.HELPER] == 0.25
    assert stats.overall[R.SUBJECT] == 0.0
    assert stats.per_cluster[0][R.HELPER] == 0.5 and stats.per_cluster[1][R.HELPER] == 0.0
    complete = {"a": M(**{r.value.lower(): "x" for r in ROLES})}
    assert set(analysis.missing_actant_stats(complete).overall.values()) == {0.0}


def _dated_corpus(n=30, seed=0):
    rng = np.random.default_rng(seed)
    start = dt.date(2023, 10, 2)
    return Corpus([
        Article(f"a{i}", ["aj", "wp", "bbc"][int(rng.integers(3))], "x",
                published_at=start + dt.timedelta(days=int(rng.integers(60))))
        for i in range(n)
    ])


def test_source_shares_counting_oracle():
    corpus = _dated_corpus()
    rng = np.random.default_rng(1)
    assignment = {a.id: int(rng.integers(3)) for a in corpus}
    table = analysis.source_shares(assignment, corpus)
    for cluster, shares in table.items():
        ids = [k for k, c in assignment.items() if c == cluster]
        counts = Counter(corpus[k].source for k in ids)
        for src, v in shares.items():
            assert v == counts[src] / len(ids)
        assert sum(shares.values()) == pytest.approx(1.0)


def test_source_shares_single_source():
    corpus = Corpus([Article("a", "aj", "x"), Article("b", "aj", "x"), Article("c", "wp", "x")])
    table = analysis.source_shares({"a": 0, "b": 0, "c": 1}, corpus)
    assert table[0] == {"aj": 1.0, "wp": 0.0}


def test_timeline_full_partition_equals_weekly_counts():
    corpus = _dated_corpus(50)
    rng = np.random.default_rng(2)
    assignment = {a.id: int(rng.integers(4)) for a in corpus}
    for by_source in (True, False):
        series = analysis.component_timeline(assignment, corpus, {"all": [0, 1, 2, 3]}, by_source)
        expected = weekly_counts(corpus, by_source)
        assert {k: v for k, v in series["all"].items() if v} == expected
        split = analysis.component_timeline(assignment, corpus, {"x": [0, 1], "y": [2, 3]}, by_source)
        assert sum(split["x"].values()) + sum(split["y"].values()) == len(corpus)


def test_timeline_empty_component_and_overlap():
    corpus = _dated_corpus(10)
    assignment = {a.id: 0 for a in corpus}
    series = analysis.component_timeline(assignment, corpus, {"none": [5], "all": [0]})
    assert series["none"] and set(series["none"].values()) == {0}
    assert series["none"].keys() == series["all"].keys()
    with pytest.raises(ValueError):
        analysis.component_timeline(assignment, corpus, {"a": [0, 1], "b": [1]})


def test_compare_partitions_restricted():
    narrative = np.array([0, 0, 1, 1, 2, 2])
    baseline = np.array([5, 5, 6, 6, 5, 6])
    cmp = analysis.compare_partitions(narrative, baseline, [0, 1])
    assert cmp.n_articles == 4 and cmp.ari == 1.0


def test_baseline_identical_documents_degenerate():
    corpus = Corpus([Article(f"a{i}", "s", "the same body") for i in range(12)])
    res = analysis.baseline_whole_text(corpus, HashEmbedder(16), UmapParams(n_neighbors=5), 2, 6)
    assert res.k == 2
    assert not res.coords.any()
