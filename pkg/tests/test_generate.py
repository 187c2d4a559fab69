import math

import pytest

from maldyn.errors import CorpusTooShort, EmptyCorpus, ModelFormatError
from maldyn.generate import GeneratorModel, export_generated, fit_generator, generate, load_texts
from maldyn.transform import TokenText


def tt(s, sid=""):
    return TokenText(sid, tuple(s.split()))


CORPUS = [tt("A B C A B D A C"), tt("B C A B C D D A"), tt("C A B A B C")]


def grams(texts, n):
    out = set()
    for t in texts:
        for sent in t.sentences():
            out.update(tuple(sent[i : i + n]) for i in range(len(sent) - n + 1))
    return out


def test_order_one_counts():
    m = fit_generator([tt("A B A B A")], order=1)
    assert m.transitions == {("A",): {"B": 2}, ("B",): {"A": 2}}


def test_too_short_and_empty():
    with pytest.raises(CorpusTooShort):
        fit_generator([tt("A B")], order=3)
    with pytest.raises(EmptyCorpus):
        fit_generator([], order=1)


def test_alternation():
    m = fit_generator([tt("A B A B")], order=1, mutation_rate=0.0)
    for t in generate(m, 50, length_range=(4, 4)):
        assert len(t) == 4
        assert all(a != b for a, b in zip(t.tokens, t.tokens[1:]))


@pytest.mark.parametrize("order", [1, 2, 3])
def test_no_mutation_ngrams_subset(order):
    m = fit_generator(CORPUS, order=order, mutation_rate=0.0, seed=3)
    train = {tuple(t.tokens[i : i + order + 1]) for t in CORPUS for i in range(len(t) - order)}
    out = generate(m, 300, length_range=(3, 20))
    assert grams(out, order + 1) <= train


def test_determinism_and_lengths():
    m = fit_generator(CORPUS, order=2, seed=5)
    a, b = generate(m, 100, (5, 9)), generate(m, 100, (5, 9))
    assert a == b
    assert all(5 <= len(t) <= 9 for t in a)
    assert generate(fit_generator(CORPUS, order=2, seed=6), 100, (5, 9)) != a


def test_default_length_range():
    m = fit_generator(CORPUS, order=2)
    assert m.median_length == 8
    assert m.default_length_range() == (4, 12)
    assert all(4 <= len(t) <= 12 for t in generate(m, 50))


def test_sample_ids_and_prefix():
    out = generate(fit_generator(CORPUS), 12, prefix="g")
    assert out[0].sample_id == "g00" and out[-1].sample_id == "g11"


def test_mutation_fraction_grows():
    rates = [0.0, 0.1, 0.3, 0.6, 0.9]
    k = 2
    train = {tuple(t.tokens[i : i + k + 1]) for t in CORPUS for i in range(len(t) - k)}
    fracs, ns = [], []
    for r in rates:
        m = fit_generator(CORPUS, order=k, mutation_rate=r, seed=1)
        all_grams = []
        for t in generate(m, 1000, (10, 10)):
            for sent in t.sentences():
                all_grams += [tuple(sent[i : i + k + 1]) for i in range(len(sent) - k)]
        fracs.append(sum(g not in train for g in all_grams) / len(all_grams))
        ns.append(len(all_grams))
    assert fracs[0] == 0.0
    for (f1, n1), (f2, n2) in zip(zip(fracs, ns), zip(fracs[1:], ns[1:])):
        sigma = math.sqrt(f1 * (1 - f1) / n1 + f2 * (1 - f2) / n2)
        assert f2 - f1 > 3 * sigma


def test_round_trip_json(tmp_path):
    m = fit_generator(CORPUS, order=2, mutation_rate=0.1, seed=9)
    back = GeneratorModel.loads(m.dumps())
    assert generate(back, 20) == generate(m, 20)
    with pytest.raises(ModelFormatError):
        GeneratorModel.loads('{"format": "x"}')


def test_export_and_load(tmp_path):
    out = generate(fit_generator(CORPUS, seed=2), 5)
    export_generated(out, tmp_path / "g", year=2016)
    back = load_texts(tmp_path / "g")
    assert [t.tokens for t in back] == [t.tokens for t in out]
    assert [t.sentence_breaks for t in back] == [t.sentence_breaks for t in out]
    assert "generated" in (tmp_path / "g" / "manifest.csv").read_text().splitlines()[0]


def test_invalid_params():
    with pytest.raises(ValueError):
        fit_generator(CORPUS, mutation_rate=1.0)
    m = fit_generator(CORPUS)
    with pytest.raises(ValueError):
        generate(m, 0)
    with pytest.raises(ValueError):
        generate(m, 3, (5, 2))


def test_protocol_sample():
    m = fit_generator(CORPUS)
    assert m.sample(3, (4, 4)) == generate(m, 3, (4, 4))
