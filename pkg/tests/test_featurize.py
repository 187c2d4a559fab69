import math
import random

import numpy as np
import pytest

from maldyn.behavior_log import Action, BehaviorLog, Manifest, ManifestEntry, to_xml
from maldyn.errors import EmptyCorpus, VocabularyMismatch
from maldyn.featurize import (
    DEFAULT_GROUPS,
    FeatureMatrix,
    FeaturizeConfig,
    GROUPS,
    Vocabulary,
    build_vocabulary,
    extract_features,
    featurize_corpus,
)

ALL = FeaturizeConfig(groups=frozenset(GROUPS))
RATIO_FAMILIES = ("api_ratio", "pid_ratio", "call_ratio", "api_time_ratio")


def mklog(apis, pids=None, times=None, sid="s", ex=None, callers=None):
    pids = pids or [1] * len(apis)
    times = times or list(range(0, 10 * len(apis), 10))
    ex = ex or [()] * len(apis)
    callers = callers or [f"p{p}.exe" for p in pids]
    return BehaviorLog(sid, tuple(Action(a, c, p, t, ex_info=e) for a, p, t, e, c in zip(apis, pids, times, ex, callers)))


def naive_count(seq, gram):
    n = len(gram)
    return sum(1 for i in range(len(seq) - n + 1) if tuple(seq[i : i + n]) == tuple(gram))


def naive_idf(docs, gram):
    df = sum(1 for d in docs if naive_count(d, gram) > 0)
    return math.log((1 + len(docs)) / (1 + df)) + 1


def test_vocab_unigrams():
    v = build_vocabulary([mklog(["A", "B"])], 1)
    assert set(v.token_to_index) == {("A",), ("B",)}
    assert v.doc_freq == {("A",): 1, ("B",): 1}


def test_vocab_bigrams():
    v = build_vocabulary([mklog(["A", "B", "A"])], 2)
    assert set(v.token_to_index) == {("A", "B"), ("B", "A")}


@pytest.mark.parametrize("n", [0, 6, 1.5])
def test_vocab_bad_order(n):
    with pytest.raises(ValueError):
        build_vocabulary([mklog(["A"])], n)


def test_vocab_empty():
    with pytest.raises(EmptyCorpus):
        build_vocabulary([], 1)


def test_vocab_invariants_and_json():
    docs = [mklog(list("ABCA")), mklog(list("BCD")), mklog(list("AAD"))]
    v = build_vocabulary(docs, 1)
    assert sorted(v.token_to_index.values()) == list(range(len(v)))
    assert all(df <= v.corpus_size for df in v.doc_freq.values())
    assert Vocabulary.from_json(v.to_json()) == v


def test_idf_minimum_for_ubiquitous_token():
    docs = [mklog(list("AB")), mklog(list("AC")), mklog(list("AD"))]
    v = build_vocabulary(docs, 1)
    idfs = {g: v.idf(g) for g in v.token_to_index}
    assert min(idfs, key=idfs.get) == ("A",)
    assert all(x > 0 for x in idfs.values())


def test_single_api_ratio():
    fv = extract_features(mklog(["A"] * 4), build_vocabulary([mklog(["A"])], 1))
    assert fv.entries["api_ratio:A"] == 1.0
    assert fv.entries["api_count"] == 4


def test_ratio_two_thirds():
    fv = extract_features(mklog(["A", "A", "B"]), build_vocabulary([mklog(["A"])], 1))
    assert fv.entries["api_ratio:A"] == pytest.approx(2 / 3, abs=1e-15)
    assert fv.entries["api_ratio:B"] == pytest.approx(1 / 3, abs=1e-15)


def test_reboot_exinfo():
    log = mklog(["A", "B"], ex=[(), ("reboot",)])
    v = build_vocabulary([log], 1)
    assert extract_features(log, v).entries["has_reboot"] == 1.0
    assert "has_reboot" not in extract_features(mklog(["A"]), v).entries


def test_default_groups():
    assert FeaturizeConfig().groups == DEFAULT_GROUPS == {"API", "RET", "EXINFO", "REBOOT"}
    fv = extract_features(mklog(["A", "B"], pids=[1, 2]), build_vocabulary([mklog(["A"])], 1))
    assert set(fv.group_tags.values()) <= DEFAULT_GROUPS
    assert not any(k.startswith(("pid_", "api_time_ratio")) for k in fv.entries)


def test_no_zero_entries():
    fv = extract_features(mklog(["A", "B"], times=[0, 0]), build_vocabulary([mklog(["C"])], 1), ALL)
    assert all(v != 0 for v in fv.entries.values())


def test_config_order_mismatch():
    with pytest.raises(VocabularyMismatch):
        extract_features(mklog(["A"]), build_vocabulary([mklog(["A"])], 1), FeaturizeConfig(ngram=2))


def test_time_ratio_charges_gap_to_earlier_call():
    fv = extract_features(mklog(["A", "B", "A"], times=[0, 30, 40]), build_vocabulary([mklog(["A"])], 1), ALL)
    assert fv.family("api_time_ratio") == {"api_time_ratio:A": 0.75, "api_time_ratio:B": 0.25}


def test_category_map():
    cfg = FeaturizeConfig(category_map={"A": "file", "B": "file", "C": "net"})
    fv = extract_features(mklog(list("AABC")), build_vocabulary([mklog(["A"])], 1), cfg)
    assert fv.entries["api_category:file"] == 3
    assert fv.entries["api_category:net"] == 1


def random_logs(n_logs, seed):
    rng = random.Random(seed)
    apis = ["A", "B", "C", "D", "E"]
    out = []
    for i in range(n_logs):
        m = rng.randint(1, 40)
        seq = [rng.choice(apis) for _ in range(m)]
        pids = [rng.choice([10, 20, 30]) for _ in range(m)]
        times = sorted(rng.randint(0, 1000) for _ in range(m))
        ex = [(rng.choice(["x.dll", "reboot", "y"]),) if rng.random() < 0.2 else () for _ in range(m)]
        out.append(mklog(seq, pids, times, f"r{i}", ex))
    return out


@pytest.mark.parametrize("n", [1, 2, 3])
def test_bow_tfidf_match_sliding_window(n):
    logs = random_logs(50, seed=n)
    docs = [log.api_names for log in logs]
    vocab = build_vocabulary(logs, n)
    for log, seq in zip(logs, docs):
        fv = extract_features(log, vocab, FeaturizeConfig(ngram=n))
        for gram in vocab.token_to_index:
            c = naive_count(seq, gram)
            name = " ".join(gram)
            assert fv.entries.get(f"bow:{name}", 0) == c
            assert fv.entries.get(f"tfidf:{name}", 0) == c * naive_idf(docs, gram)


def test_ratio_families_sum_to_one():
    for log in random_logs(50, seed=9):
        fv = extract_features(log, build_vocabulary([log], 1), ALL)
        for fam in RATIO_FAMILIES:
            vals = list(fv.family(fam).values())
            if fam == "api_time_ratio" and not vals:
                assert log.actions[-1].call_time == log.actions[0].call_time
                continue
            assert abs(sum(vals) - 1) <= 1e-9
            assert all(0 <= v <= 1 for v in vals)


def test_permutation_invariance_of_counts():
    log = random_logs(1, seed=3)[0]
    vocab = build_vocabulary([log], 1)
    acts = list(log.actions)
    random.Random(1).shuffle(acts)
    shuffled = BehaviorLog(log.sample_id, tuple(acts))
    cfg = FeaturizeConfig(groups=frozenset(set(GROUPS) - {"TIME"}))
    assert extract_features(log, vocab, cfg).entries == pytest.approx(extract_features(shuffled, vocab, cfg).entries)


def _write_manifest(tmp_path, logs, broken=()):
    entries = []
    for log in logs:
        (tmp_path / f"{log.sample_id}.xml").write_bytes(to_xml(log))
        entries.append(ManifestEntry(log.sample_id, f"{log.sample_id}.xml", "malware", None, 2012))
    for sid in broken:
        (tmp_path / f"{sid}.xml").write_bytes(b"<report sample_id='bad'></report>")
        entries.append(ManifestEntry(sid, f"{sid}.xml", "malware", None, 2012))
    return Manifest(tuple(entries), str(tmp_path))


def test_corpus_three_samples(tmp_path):
    logs = random_logs(3, seed=5)
    fm, vocab = featurize_corpus(_write_manifest(tmp_path, logs))
    assert fm.sample_ids == [l.sample_id for l in logs]
    assert vocab.corpus_size == 3
    assert fm.values.shape == (3, len(fm.names))


def test_corpus_error_rows(tmp_path):
    logs = random_logs(2, seed=6)
    fm, _ = featurize_corpus(_write_manifest(tmp_path, logs, broken=["empty1"]))
    assert fm.sample_ids == [l.sample_id for l in logs]
    assert "empty1" in fm.errors


def test_matrix_save_load_align(tmp_path):
    logs = random_logs(4, seed=7)
    fm, _ = featurize_corpus(_write_manifest(tmp_path, logs))
    fm.save(tmp_path / "out")
    back = FeatureMatrix.load(tmp_path / "out")
    assert back.names == fm.names and back.sample_ids == fm.sample_ids
    np.testing.assert_array_equal(back.values, fm.values)
    aligned = fm.align(["zzz"] + fm.names[:2])
    assert aligned.values[:, 0].sum() == 0
    np.testing.assert_array_equal(aligned.values[:, 1:], fm.values[:, :2])


def test_corpus_featurize_synthetic(corpus):
    fm, vocab = featurize_corpus(corpus)
    assert len(fm.sample_ids) == 200 and not fm.errors
    assert fm.values.shape[1] == len(fm.names) > 0
