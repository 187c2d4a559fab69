"""Synthetic token-sequence generators feeding the coverage framework.

Any object with ``sample(n_samples, length_range=None)`` returning
``TokenText`` values can act as a generator. The bundled one is an order-k
Markov chain with a per-step mutation rate that injects unseen tokens.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .behavior_log import ManifestEntry, write_manifest
from .errors import CorpusTooShort, EmptyCorpus, ModelFormatError
from .featurize import api_sequence
from .transform import TokenText

GEN_MAGIC = "MALDYN-GEN-v1"


class SampleGenerator(Protocol):
    def sample(self, n_samples: int, length_range: tuple[int, int] | None = None) -> list[TokenText]: ...


Context = tuple[str, ...]


@dataclass
class GeneratorModel:
    order: int
    transitions: dict[Context, dict[str, int]]
    start_contexts: dict[Context, int]
    mutation_rate: float
    vocab: tuple[str, ...]
    seed: int = 0
    median_length: int = 0
    _tables: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not 0 <= self.mutation_rate < 1:
            raise ValueError("mutation_rate must lie in [0, 1)")

    def cumulative(self, ctx) -> tuple[list, np.ndarray]:
        """Sorted outcomes and cumulative probabilities for a context (None = starts)."""
        cached = self._tables.get(ctx)
        if cached is None:
            table = self.start_contexts if ctx is None else self.transitions[ctx]
            keys = sorted(table)
            w = np.cumsum([table[k] for k in keys], dtype=float)
            cached = self._tables[ctx] = (keys, w / w[-1])
        return cached

    def default_length_range(self) -> tuple[int, int]:
        m = self.median_length
        return max(1, int(round(0.5 * m))), max(1, int(round(1.5 * m)))

    def sample(self, n_samples: int, length_range=None) -> list[TokenText]:
        return generate(self, n_samples, length_range)

    def to_dict(self) -> dict:
        return {
            "format": GEN_MAGIC,
            "order": self.order,
            "mutation_rate": self.mutation_rate,
            "seed": self.seed,
            "median_length": self.median_length,
            "vocab": list(self.vocab),
            "start_contexts": [[list(c), n] for c, n in sorted(self.start_contexts.items())],
            "transitions": [[list(c), sorted(nxt.items())] for c, nxt in sorted(self.transitions.items())],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "GeneratorModel":
        d = json.loads(text)
        if d.get("format") != GEN_MAGIC:
            raise ModelFormatError(f"expected {GEN_MAGIC}")
        return cls(
            d["order"],
            {tuple(c): {t: n for t, n in nxt} for c, nxt in d["transitions"]},
            {tuple(c): n for c, n in d["start_contexts"]},
            d["mutation_rate"],
            tuple(d["vocab"]),
            d["seed"],
            d["median_length"],
        )


def fit_generator(texts: Sequence, order: int = 2, mutation_rate: float = 0.05, seed: int = 0) -> GeneratorModel:
    """Count every order-``order`` context and the token following it."""
    if not texts:
        raise EmptyCorpus("cannot fit a generator on an empty corpus")
    transitions: dict[Context, dict[str, int]] = {}
    starts: dict[Context, int] = {}
    vocab: set[str] = set()
    lengths = []
    for text in texts:
        toks = api_sequence(text)
        if len(toks) < order:
            sid = getattr(text, "sample_id", None)
            raise CorpusTooShort(f"text of length {len(toks)} is shorter than order {order}", sid)
        lengths.append(len(toks))
        vocab.update(toks)
        start = tuple(toks[:order])
        starts[start] = starts.get(start, 0) + 1
        for i in range(len(toks) - order):
            ctx = tuple(toks[i : i + order])
            nxt = transitions.setdefault(ctx, {})
            nxt[toks[i + order]] = nxt.get(toks[i + order], 0) + 1
    median = int(round(statistics.median(lengths)))
    return GeneratorModel(order, transitions, starts, mutation_rate, tuple(sorted(vocab)), seed, median)


def _draw(model: GeneratorModel, rng: np.random.Generator, ctx) -> object:
    keys, cum = model.cumulative(ctx)
    i = int(np.searchsorted(cum, rng.random(), side="right"))
    return keys[min(i, len(keys) - 1)]


def generate_one(model: GeneratorModel, length: int, rng: np.random.Generator, sample_id: str = "") -> TokenText:
    """One walk of exactly ``length`` tokens.

    A context with no observed successor restarts the walk from a fresh
    start context; the restart point is recorded as a sentence break so that
    no n-gram spans the seam.
    """
    tokens: list[str] = list(_draw(model, rng, None))[:length]
    breaks: list[int] = []
    seg_start = 0
    k = model.order
    while len(tokens) < length:
        ctx = tuple(tokens[-k:])
        if len(tokens) - seg_start >= k and rng.random() < model.mutation_rate:
            tokens.append(model.vocab[int(rng.integers(len(model.vocab)))])
            continue
        if len(tokens) - seg_start >= k and ctx in model.transitions:
            tokens.append(_draw(model, rng, ctx))
        else:
            seg_start = len(tokens)
            breaks.append(seg_start)
            tokens.extend(list(_draw(model, rng, None))[: length - len(tokens)])
    return TokenText(sample_id, tuple(tokens), tuple(breaks))


def generate(model: GeneratorModel, n_samples: int = 5000, length_range: tuple[int, int] | None = None,
             prefix: str = "gen") -> list[TokenText]:
    """Draw ``n_samples`` sequences; sample ``i`` uses the RNG stream ``(seed, i)``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    lo, hi = length_range if length_range is not None else model.default_length_range()
    if not 1 <= lo <= hi:
        raise ValueError(f"invalid length range {(lo, hi)}")
    width = len(str(n_samples - 1))
    out = []
    for i in range(n_samples):
        rng = np.random.default_rng([model.seed, i])
        length = int(rng.integers(lo, hi + 1))
        out.append(generate_one(model, length, rng, f"{prefix}{i:0{width}d}"))
    return out


def export_generated(texts: Sequence[TokenText], directory, year: int | None = None) -> Path:
    """Write one ``.txt`` per sample plus ``manifest.csv`` flagged generated."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for t in texts:
        name = f"{t.sample_id}.txt"
        (d / name).write_text(t.serialize() + "\n", encoding="utf-8")
        entries.append(ManifestEntry(t.sample_id, name, "malware", None, year, generated=True))
    write_manifest(entries, d / "manifest.csv")
    return d / "manifest.csv"


def load_texts(directory) -> list[TokenText]:
    from .behavior_log import load_manifest

    m = load_manifest(Path(directory) / "manifest.csv")
    return [TokenText.parse(m.resolve(e).read_text(encoding="utf-8"), e.sample_id) for e in m]
