"""Similarity and distance primitives and the text / image / hybrid scores.

Text score: weighted TF-IDF cosine plus BLEU. Image score: weighted
Wasserstein, KL and JS distances between pixel histograms, each mapped to a
similarity. Hybrid: weighted text and image scores. Every composite lies in
[0, 1] and is exactly 1.0 for identical inputs.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .behavior_log import BehaviorLog
from .errors import DimensionMismatch, EmptyCandidate, UnnormalizedHistogram, ZeroVector
from .featurize import api_sequence
from .transform import ImageConfig, MalImage, TokenText, text_to_image, to_token_text

SMOOTH_EPS = 1e-9
# idf of a token present in exactly one of the two documents of a pair
_IDF_SINGLE = math.log(3 / 2) + 1.0


@dataclass(frozen=True)
class SimilarityConfig:
    a1: float = 0.5
    a2: float = 0.5
    b1: float = 1 / 3
    b2: float = 1 / 3
    b3: float = 1 / 3
    w1: float = 0.5
    w2: float = 0.5
    bleu_order: int = 4
    distance_to_similarity: str = "exp_neg"
    histogram_bins: int = 256
    image: ImageConfig = field(default_factory=ImageConfig)

    def __post_init__(self):
        for group in ((self.a1, self.a2), (self.b1, self.b2, self.b3), (self.w1, self.w2)):
            if any(w < 0 for w in group):
                raise ValueError("similarity weights must be non-negative")
            if abs(sum(group) - 1) > 1e-9:
                raise ValueError(f"weights {group} must sum to 1")
        if self.distance_to_similarity not in ("exp_neg", "inverse_one_plus"):
            raise ValueError(f"unknown distance_to_similarity {self.distance_to_similarity!r}")
        if self.bleu_order < 1:
            raise ValueError("bleu_order must be >= 1")
        if self.histogram_bins != 256:
            raise ValueError("only 256-bin byte histograms are supported")


def cosine_sim(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"shapes {u.shape} and {v.shape} differ")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    if np.array_equal(u, v):
        return 1.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def ngram_counts(tokens: Sequence[str], max_order: int) -> list[Counter]:
    """``out[n-1]`` counts the n-grams of ``tokens`` for n = 1..max_order."""
    return [Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)) for n in range(1, max_order + 1)]


def _clipped_matches(a: Counter, b: Counter) -> int:
    if len(a) > len(b):
        a, b = b, a
    return sum(min(c, b[g]) for g, c in a.items() if g in b)


def _bleu_from_matches(matches: Sequence[int], cand_len: int, ref_len: int, order: int) -> float:
    if cand_len == 0:
        raise EmptyCandidate("BLEU candidate is empty")
    n_max = min(order, cand_len)
    log_sum = 0.0
    zeros = 0
    for n in range(1, n_max + 1):
        total = cand_len - n + 1
        m = matches[n - 1]
        if m > 0:
            log_sum += math.log(m / total)
        else:
            # geometric floor for missing orders: 1 / (2^k * total)
            zeros += 1
            log_sum += -zeros * math.log(2) - math.log(total)
    bp = 1.0 if cand_len >= ref_len else math.exp(1 - ref_len / cand_len)
    if log_sum == 0.0:
        return bp
    return bp * math.exp(log_sum / n_max)


def bleu(candidate, reference, order: int = 4) -> float:
    """Sentence BLEU of ``candidate`` against one ``reference``.

    Geometric mean of clipped n-gram precisions (n = 1..order, capped at the
    candidate length) times the brevity penalty. An order with no match is
    floored at ``1 / (2^k * total)`` for the k-th such order.
    """
    c = api_sequence(candidate)
    r = api_sequence(reference)
    if not c:
        raise EmptyCandidate("BLEU candidate is empty")
    n_max = min(order, len(c))
    cc = ngram_counts(c, n_max)
    rc = ngram_counts(r, n_max)
    return _bleu_from_matches([_clipped_matches(x, y) for x, y in zip(cc, rc)], len(c), len(r), order)


def _check_hist(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DimensionMismatch("histogram must be a 1-D array with >= 2 bins")
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-6:
        raise UnnormalizedHistogram(f"histogram sums to {p.sum()!r}, expected 1")
    return p


def _check_pair(p, q):
    p, q = _check_hist(p), _check_hist(q)
    if p.shape != q.shape:
        raise DimensionMismatch(f"histograms have {p.size} and {q.size} bins")
    return p, q


def wasserstein_1d(p, q) -> float:
    """Earth mover's distance between histograms on a support scaled to [0, 1]."""
    p, q = _check_pair(p, q)
    delta = 1.0 / (p.size - 1)
    return float(np.abs(np.cumsum(p) - np.cumsum(q))[:-1].sum() * delta)


def _smooth(p: np.ndarray) -> np.ndarray:
    s = p + SMOOTH_EPS
    return s / s.sum()


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_div(p, q) -> float:
    """KL(p || q) in nats after additive smoothing of both histograms."""
    p, q = _check_pair(p, q)
    return max(0.0, _kl(_smooth(p), _smooth(q)))


def js_div(p, q) -> float:
    """Jensen-Shannon divergence in nats; bounded by ln 2, no smoothing needed."""
    p, q = _check_pair(p, q)
    m = (p + q) / 2
    return float(min(max(0.0, 0.5 * _kl(p, m) + 0.5 * _kl(q, m)), math.log(2)))


def to_similarity(d, how: str = "exp_neg"):
    if how == "exp_neg":
        return np.exp(-np.asarray(d))
    return 1.0 / (1.0 + np.asarray(d))


def _convex(weights: Sequence[float], values: Sequence[float]) -> float:
    # equal components: return the shared value so identity stays exactly 1.0
    if all(v == values[0] for v in values):
        return float(values[0])
    return float(min(1.0, max(0.0, sum(w * v for w, v in zip(weights, values)))))


@dataclass
class Profile:
    """Precomputed per-sample statistics reused across many pairings."""

    sample_id: str
    tokens: tuple[str, ...]
    grams: list[Counter]
    sq_norm: float
    histogram: np.ndarray | None = None


def _as_text(sample) -> TokenText:
    if isinstance(sample, TokenText):
        return sample
    if isinstance(sample, BehaviorLog):
        return to_token_text(sample)
    return TokenText("", tuple(sample))


def profile(sample, cfg: SimilarityConfig | None = None, with_image: bool = True) -> Profile:
    cfg = cfg or SimilarityConfig()
    text = _as_text(sample)
    if not text.tokens:
        raise EmptyCandidate("sample has no tokens", text.sample_id)
    grams = ngram_counts(text.tokens, cfg.bleu_order)
    sq = float(sum(c * c for c in grams[0].values()))
    hist = text_to_image(text, cfg.image).histogram() if with_image else None
    return Profile(text.sample_id, text.tokens, grams, sq, hist)


def _pair_cosine(p: Profile, q: Profile) -> float:
    # TF-IDF over the pair: shared tokens have idf 1, unshared ln(3/2) + 1
    a, b = p.grams[0], q.grams[0]
    if len(a) > len(b):
        a, b = b, a
    dot = 0.0
    shared_a = shared_b = 0.0
    for t, c in a.items():
        d = b.get(t)
        if d:
            dot += c * d
            shared_a += c * c
            shared_b += d * d
    if dot == 0:
        return 0.0
    if a is not p.grams[0]:
        shared_a, shared_b = shared_b, shared_a
    k2 = _IDF_SINGLE * _IDF_SINGLE
    na = shared_a + k2 * (p.sq_norm - shared_a)
    nb = shared_b + k2 * (q.sq_norm - shared_b)
    return float(min(1.0, dot / math.sqrt(na * nb)))


def text_similarity_profiles(p: Profile, q: Profile, cfg: SimilarityConfig) -> float:
    if p.tokens == q.tokens:
        return 1.0
    cos = max(0.0, _pair_cosine(p, q))
    n_max = min(cfg.bleu_order, max(len(p.tokens), len(q.tokens)))
    matches = [_clipped_matches(x, y) for x, y in zip(p.grams[:n_max], q.grams[:n_max])]
    lp, lq = len(p.tokens), len(q.tokens)
    b = 0.5 * (_bleu_from_matches(matches, lp, lq, cfg.bleu_order)
               + _bleu_from_matches(matches, lq, lp, cfg.bleu_order))
    return _convex((cfg.a1, cfg.a2), (cos, b))


def histogram_similarities(h: np.ndarray, H: np.ndarray, cfg: SimilarityConfig) -> np.ndarray:
    """Image score of histogram ``h`` against every row of ``H``."""
    H = np.atleast_2d(H)
    delta = 1.0 / (h.size - 1)
    w = np.abs(np.cumsum(h) - np.cumsum(H, axis=1))[:, :-1].sum(axis=1) * delta
    hs, Hs = _smooth(h), H + SMOOTH_EPS
    Hs = Hs / Hs.sum(axis=1, keepdims=True)
    kl_pq = (hs * np.log(hs / Hs)).sum(axis=1)
    kl_qp = (Hs * np.log(Hs / hs)).sum(axis=1)
    kl = np.maximum(0.0, 0.5 * (kl_pq + kl_qp))
    M = (h + H) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(h > 0, h * np.log(h / M), 0.0).sum(axis=1)
        t2 = np.where(H > 0, H * np.log(H / M), 0.0).sum(axis=1)
    js = np.clip(0.5 * (t1 + t2), 0.0, math.log(2))
    sims = np.stack([to_similarity(x, cfg.distance_to_similarity) for x in (w, kl, js)], axis=1)
    out = np.clip(sims @ np.array([cfg.b1, cfg.b2, cfg.b3]), 0.0, 1.0)
    out[(H == h).all(axis=1)] = 1.0
    return out


def image_components(h1, h2) -> dict[str, float]:
    """Wasserstein, symmetrized KL and JS between two histograms."""
    return {
        "wasserstein": wasserstein_1d(h1, h2),
        "kl": 0.5 * (kl_div(h1, h2) + kl_div(h2, h1)),
        "js": js_div(h1, h2),
    }


def image_similarity(i1: MalImage, i2: MalImage, cfg: SimilarityConfig | None = None) -> float:
    cfg = cfg or SimilarityConfig()
    h1, h2 = i1.histogram(), i2.histogram()
    if np.array_equal(h1, h2):
        return 1.0
    comp = image_components(h1, h2)
    sims = [float(to_similarity(comp[k], cfg.distance_to_similarity)) for k in ("wasserstein", "kl", "js")]
    return _convex((cfg.b1, cfg.b2, cfg.b3), sims)


def text_similarity(t1, t2, cfg: SimilarityConfig | None = None) -> float:
    """Symmetrized text score: ``a1 * max(0, cos) + a2 * mean directed BLEU``."""
    cfg = cfg or SimilarityConfig()
    return text_similarity_profiles(profile(t1, cfg, False), profile(t2, cfg, False), cfg)


def hybrid_similarity(s1, s2, cfg: SimilarityConfig | None = None) -> float:
    cfg = cfg or SimilarityConfig()
    p, q = profile(s1, cfg), profile(s2, cfg)
    return hybrid_similarity_profiles(p, q, cfg)


def image_similarity_profiles(p: Profile, q: Profile, cfg: SimilarityConfig) -> float:
    return float(histogram_similarities(p.histogram, q.histogram[None, :], cfg)[0])


def hybrid_similarity_profiles(p: Profile, q: Profile, cfg: SimilarityConfig) -> float:
    st = text_similarity_profiles(p, q, cfg)
    si = image_similarity_profiles(p, q, cfg)
    return _convex((cfg.w1, cfg.w2), (st, si))


MODES = ("text", "image", "hybrid")


def pair_similarity(p: Profile, q: Profile, mode: str, cfg: SimilarityConfig) -> float:
    if mode == "text":
        return text_similarity_profiles(p, q, cfg)
    if mode == "image":
        return image_similarity_profiles(p, q, cfg)
    if mode == "hybrid":
        return hybrid_similarity_profiles(p, q, cfg)
    raise ValueError(f"unknown similarity mode {mode!r}")
