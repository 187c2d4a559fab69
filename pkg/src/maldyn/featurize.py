"""Behavior-log features: API, PID, RET, EXINFO, reboot and timing groups.

Feature vectors are keyed by feature *name* (``"api_ratio:NtOpenFile"``);
column indices are assigned once per corpus by :func:`featurize_corpus` so
every row shares the same column space.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .behavior_log import BehaviorLog, Manifest, load_log
from .errors import DataError, EmptyCorpus, VocabularyMismatch

GROUPS = ("API", "PID", "RET", "EXINFO", "REBOOT", "TIME")
DEFAULT_GROUPS = frozenset({"API", "RET", "EXINFO", "REBOOT"})
DEFAULT_REBOOT_MARKERS = frozenset({"ExitWindowsEx", "InitiateSystemShutdown", "reboot"})
NGRAM_SEP = " "


def api_sequence(doc) -> list[str]:
    """Token stream of a BehaviorLog, TokenText or plain token sequence."""
    if isinstance(doc, BehaviorLog):
        return doc.api_names
    tokens = getattr(doc, "tokens", doc)
    return list(tokens)


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def ngram_name(gram: tuple[str, ...]) -> str:
    return NGRAM_SEP.join(gram)


@dataclass(frozen=True)
class Vocabulary:
    token_to_index: dict[tuple[str, ...], int]
    n: int
    doc_freq: dict[tuple[str, ...], int]
    corpus_size: int

    def __len__(self):
        return len(self.token_to_index)

    @property
    def tokens(self) -> list[tuple[str, ...]]:
        return sorted(self.token_to_index, key=self.token_to_index.__getitem__)

    def idf(self, gram) -> float:
        """Smoothed IDF ``ln((1+N)/(1+df)) + 1``; unseen grams use df=0."""
        df = self.doc_freq.get(tuple(gram), 0)
        return math.log((1 + self.corpus_size) / (1 + df)) + 1.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "MALDYN-VOCAB-v1",
                "n": self.n,
                "corpus_size": self.corpus_size,
                "tokens": [[list(t), self.doc_freq[t]] for t in self.tokens],
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        obj = json.loads(text)
        if obj.get("format") != "MALDYN-VOCAB-v1":
            raise DataError("not a MALDYN-VOCAB-v1 document")
        grams = [tuple(t) for t, _ in obj["tokens"]]
        return cls(
            {g: i for i, g in enumerate(grams)},
            obj["n"],
            {tuple(t): df for t, df in obj["tokens"]},
            obj["corpus_size"],
        )


def build_vocabulary(docs: Iterable, n: int = 1) -> Vocabulary:
    """Collect every order-``n`` API n-gram with its document frequency."""
    if not isinstance(n, int) or not 1 <= n <= 5:
        raise ValueError(f"n-gram order must be in 1..5, got {n!r}")
    doc_freq: Counter = Counter()
    size = 0
    for doc in docs:
        size += 1
        doc_freq.update(set(ngrams(api_sequence(doc), n)))
    if size == 0:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    grams = sorted(doc_freq)
    return Vocabulary({g: i for i, g in enumerate(grams)}, n, dict(doc_freq), size)


@dataclass(frozen=True)
class FeaturizeConfig:
    groups: frozenset = DEFAULT_GROUPS
    reboot_markers: frozenset = DEFAULT_REBOOT_MARKERS
    category_map: dict = field(default_factory=dict)
    ngram: int = 1

    def __post_init__(self):
        unknown = set(self.groups) - set(GROUPS)
        if unknown:
            raise ValueError(f"unknown feature group(s): {sorted(unknown)}")

    def category(self, token: str) -> str:
        return self.category_map.get(token, token)


def load_category_map(path) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["token"]: row["category"] for row in csv.DictReader(fh)}


@dataclass
class FeatureVector:
    sample_id: str
    entries: dict[str, float] = field(default_factory=dict)
    group_tags: dict[str, str] = field(default_factory=dict)

    def put(self, group: str, name: str, value: float) -> None:
        if value != 0:
            self.entries[name] = float(value)
            self.group_tags[name] = group

    def family(self, prefix: str) -> dict[str, float]:
        return {k: v for k, v in self.entries.items() if k.startswith(prefix + ":")}


def _counts_and_ratios(fv, group, prefix, counter: Counter, total: int, *, ratio=True):
    for key, c in counter.items():
        fv.put(group, f"{prefix}_count:{key}", c)
        if ratio and total:
            fv.put(group, f"{prefix}_ratio:{key}", c / total)


def _categories(fv, group, prefix, counter: Counter, cfg: FeaturizeConfig):
    cats: Counter = Counter()
    for key, c in counter.items():
        cats[cfg.category(str(key))] += c
    for cat, c in cats.items():
        fv.put(group, f"{prefix}_category:{cat}", c)


def api_time_shares(log: BehaviorLog) -> dict[str, float]:
    """Per-API share of elapsed time.

    The gap between consecutive calls is charged to the earlier call; the
    final call gets nothing. Negative gaps (clock skew) count as zero.
    """
    spent: dict[str, float] = {}
    acts = log.actions
    for cur, nxt in zip(acts, acts[1:]):
        gap = max(0, nxt.call_time - cur.call_time)
        spent[cur.api_name] = spent.get(cur.api_name, 0) + gap
    total = sum(spent.values())
    if total <= 0:
        return {}
    return {k: v / total for k, v in spent.items() if v > 0}


def extract_features(log: BehaviorLog, vocab: Vocabulary, config: FeaturizeConfig | None = None) -> FeatureVector:
    cfg = config or FeaturizeConfig(ngram=vocab.n)
    if cfg.ngram != vocab.n:
        raise VocabularyMismatch(
            f"config n-gram order {cfg.ngram} differs from vocabulary order {vocab.n}", log.sample_id
        )
    fv = FeatureVector(log.sample_id)
    acts = log.actions
    total = len(acts)
    groups = cfg.groups

    if "API" in groups:
        apis = Counter(a.api_name for a in acts)
        fv.put("API", "api_count", total)
        _counts_and_ratios(fv, "API", "api", apis, total)
        _categories(fv, "API", "api", apis, cfg)
        grams = Counter(ngrams(log.api_names, vocab.n))
        for g, c in grams.items():
            if g in vocab.token_to_index:
                name = ngram_name(g)
                fv.put("API", f"bow:{name}", c)
                fv.put("API", f"tfidf:{name}", c * vocab.idf(g))

    if "PID" in groups:
        pids = Counter(a.call_pid for a in acts)
        fv.put("PID", "pid_count", len(pids))
        for pid, c in pids.items():
            fv.put("PID", f"pid_value:{pid}", c)
            fv.put("PID", f"pid_ratio:{pid}", c / total)
        _categories(fv, "PID", "pid", pids, cfg)

    if "RET" in groups:
        rets = Counter(a.ret_value for a in acts)
        fv.put("RET", "ret_count", len(rets))
        for rv, c in rets.items():
            fv.put("RET", f"ret_value:{rv}", c)
        _categories(fv, "RET", "ret", rets, cfg)
        callers = Counter(a.call_name for a in acts)
        fv.put("RET", "call_count", len(callers))
        _counts_and_ratios(fv, "RET", "call", callers, total)
        _categories(fv, "RET", "call", callers, cfg)

    if "EXINFO" in groups:
        ex = Counter(v for a in acts for v in a.ex_info)
        fv.put("EXINFO", "exinfo_count", sum(ex.values()))
        for name, c in ex.items():
            fv.put("EXINFO", f"exinfo_name:{name}", c)
        _categories(fv, "EXINFO", "exinfo", ex, cfg)

    if "REBOOT" in groups:
        markers = cfg.reboot_markers
        hit = any(a.api_name in markers or any(v in markers for v in a.ex_info) for a in acts)
        fv.put("REBOOT", "has_reboot", 1.0 if hit else 0.0)

    if "TIME" in groups:
        for api, share in api_time_shares(log).items():
            fv.put("TIME", f"api_time_ratio:{api}", share)

    return fv


@dataclass
class FeatureMatrix:
    """Dense rows over a shared, sorted feature-name table."""

    sample_ids: list[str]
    names: list[str]
    groups: list[str]
    values: np.ndarray
    errors: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_vectors(cls, vectors: list[FeatureVector], names: list[str] | None = None, errors=None):
        tags: dict[str, str] = {}
        for fv in vectors:
            tags.update(fv.group_tags)
        if names is None:
            names = sorted(tags)
        index = {n: i for i, n in enumerate(names)}
        values = np.zeros((len(vectors), len(names)))
        for r, fv in enumerate(vectors):
            for name, v in fv.entries.items():
                j = index.get(name)
                if j is not None:
                    values[r, j] = v
        groups = [tags.get(n, n.split(":", 1)[0]) for n in names]
        return cls([fv.sample_id for fv in vectors], list(names), groups, values, dict(errors or {}))

    def align(self, names: list[str]) -> "FeatureMatrix":
        """Re-index onto another column table; absent columns become 0."""
        src = {n: i for i, n in enumerate(self.names)}
        out = np.zeros((len(self.sample_ids), len(names)))
        group_of = dict(zip(self.names, self.groups))
        for j, n in enumerate(names):
            i = src.get(n)
            if i is not None:
                out[:, j] = self.values[:, i]
        groups = [group_of.get(n, n.split(":", 1)[0]) for n in names]
        return FeatureMatrix(list(self.sample_ids), list(names), groups, out, dict(self.errors))

    def rows(self, sample_ids: Sequence[str]) -> np.ndarray:
        pos = {s: i for i, s in enumerate(self.sample_ids)}
        return self.values[[pos[s] for s in sample_ids]]

    def save(self, directory) -> None:
        """Write ``features.csv`` triplets and ``feature_names.csv``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "features.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "feature_index", "value"])
            for r, sid in enumerate(self.sample_ids):
                for j in np.flatnonzero(self.values[r]):
                    w.writerow([sid, int(j), repr(float(self.values[r, j]))])
        with open(d / "feature_names.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature_index", "group", "name"])
            for j, (g, n) in enumerate(zip(self.groups, self.names)):
                w.writerow([j, g, n])
        with open(d / "samples.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "status"])
            for sid in self.sample_ids:
                w.writerow([sid, "ok"])
            for sid, msg in self.errors.items():
                w.writerow([sid, f"error: {msg}"])

    @classmethod
    def load(cls, directory) -> "FeatureMatrix":
        d = Path(directory)
        names, groups = [], []
        with open(d / "feature_names.csv", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                groups.append(row["group"])
                names.append(row["name"])
        sample_ids, errors = [], {}
        with open(d / "samples.csv", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                if row["status"] == "ok":
                    sample_ids.append(row["sample_id"])
                else:
                    errors[row["sample_id"]] = row["status"].removeprefix("error: ")
        pos = {s: i for i, s in enumerate(sample_ids)}
        values = np.zeros((len(sample_ids), len(names)))
        with open(d / "features.csv", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                values[pos[row["sample_id"]], int(row["feature_index"])] = float(row["value"])
        return cls(sample_ids, names, groups, values, errors)


def featurize_logs(logs: Sequence[BehaviorLog], vocab: Vocabulary, config=None, names=None) -> FeatureMatrix:
    return FeatureMatrix.from_vectors([extract_features(log, vocab, config) for log in logs], names)


def featurize_corpus(manifest: Manifest, vocab: Vocabulary | None = None, config: FeaturizeConfig | None = None,
                     names: list[str] | None = None) -> tuple[FeatureMatrix, Vocabulary]:
    """Parse and featurize every manifest entry.

    Per-sample failures land in ``matrix.errors`` keyed by sample_id; the
    remaining rows are still produced. When ``vocab`` is None it is built
    from the successfully parsed logs.
    """
    cfg = config or FeaturizeConfig()
    logs, errors = [], {}
    for entry in manifest:
        try:
            logs.append(load_log(manifest.resolve(entry), sample_id=entry.sample_id))
        except DataError as exc:
            errors[entry.sample_id] = str(exc)
    if not logs:
        raise EmptyCorpus("no sample in the manifest could be parsed")
    if vocab is None:
        vocab = build_vocabulary(logs, cfg.ngram)
    vectors = []
    for log in logs:
        try:
            vectors.append(extract_features(log, vocab, cfg))
        except DataError as exc:
            errors[log.sample_id] = str(exc)
    return FeatureMatrix.from_vectors(vectors, names, errors), vocab
