"""Vectorization and dimensionality reduction ahead of clustering."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, EmptyCorpus, KTooLarge, ModelFormatError, NaNLoss, NonMirroredLayers
from .featurize import Vocabulary, api_sequence, ngrams

log = logging.getLogger(__name__)

SVD_MAGIC = "MALDYN-SVD-v1"
AE_MAGIC = "MALDYN-AE-v1"


def tfidf_matrix(texts: Sequence, vocab: Vocabulary) -> np.ndarray:
    """One L2-normalized TF-IDF row per text over the vocabulary columns."""
    if len(texts) == 0:
        raise EmptyCorpus("no texts to vectorize")
    out = np.zeros((len(texts), len(vocab)))
    idf = {g: vocab.idf(g) for g in vocab.token_to_index}
    for r, text in enumerate(texts):
        for g, c in Counter(ngrams(api_sequence(text), vocab.n)).items():
            j = vocab.token_to_index.get(g)
            if j is not None:
                out[r, j] = c * idf[g]
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    np.divide(out, norms, out=out, where=norms > 0)
    return out


def normalize(matrix: np.ndarray) -> np.ndarray:
    """Standardize each column to mean 0 / variance 1; constant columns -> 0."""
    X = np.asarray(matrix, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    centered = X - mean
    out = np.zeros_like(X)
    np.divide(centered, std, out=out, where=std > 0)
    return out


@dataclass
class SvdReducer:
    components: np.ndarray  # k x d, orthonormal rows
    singular_values: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def transform(self, matrix) -> np.ndarray:
        return np.asarray(matrix, dtype=float) @ self.components.T

    def dumps(self) -> str:
        k, d = self.components.shape
        lines = [SVD_MAGIC, f"{k} {d}", " ".join(repr(float(s)) for s in self.singular_values)]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.components]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SvdReducer":
        lines = text.splitlines()
        if not lines or lines[0] != SVD_MAGIC:
            raise ModelFormatError(f"expected {SVD_MAGIC} header")
        k, d = map(int, lines[1].split())
        sv = np.array([float(v) for v in lines[2].split()])
        comps = np.array([[float(v) for v in line.split()] for line in lines[3 : 3 + k]]).reshape(k, d)
        return cls(comps, sv)


def fit_svd(matrix, k: int, n_iter: int = 10, seed: int = 0, oversample: int = 5) -> SvdReducer:
    """Top-``k`` right singular vectors by block power iteration.

    A random ``d x (k + oversample)`` block is pushed through ``A^T A``
    ``n_iter`` times with QR re-orthonormalization, then a Rayleigh-Ritz step
    on the small projected Gram matrix extracts the leading directions.
    """
    A = np.asarray(matrix, dtype=float)
    n, d = A.shape
    if not 1 <= k <= min(n, d):
        raise KTooLarge(f"k={k} must lie in 1..{min(n, d)}")
    width = min(d, k + oversample)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, width)))
    for _ in range(n_iter):
        Q, _ = np.linalg.qr(A.T @ (A @ Q))
    B = A @ Q
    evals, evecs = np.linalg.eigh(B.T @ B)
    order = np.argsort(evals)[::-1][:k]
    V = (Q @ evecs[:, order]).T
    # largest-magnitude entry of each component is made positive
    signs = np.sign(V[np.arange(k), np.argmax(np.abs(V), axis=1)])
    V = V * signs[:, None]
    sv = np.sqrt(np.clip(evals[order], 0, None))
    return SvdReducer(V, sv)


def transform(reducer: SvdReducer, matrix) -> np.ndarray:
    return reducer.transform(matrix)


@dataclass
class Autoencoder:
    """Mirrored fully-connected autoencoder, tanh hidden units, linear output."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int = 0
    loss_history: list[float] = field(default_factory=list)

    @property
    def bottleneck_index(self) -> int:
        return len(self.layer_sizes) // 2

    def forward(self, X) -> list[np.ndarray]:
        acts = [np.asarray(X, dtype=float)]
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ W + b
            acts.append(z if i == last else np.tanh(z))
        return acts

    def reconstruct(self, X) -> np.ndarray:
        return self.forward(X)[-1]

    def encode(self, X) -> np.ndarray:
        return self.forward(X)[self.bottleneck_index]

    def loss(self, X) -> float:
        X = np.asarray(X, dtype=float)
        return float(np.mean((self.reconstruct(X) - X) ** 2))

    def gradients(self, X):
        """Mean-squared reconstruction loss and its parameter gradients."""
        X = np.asarray(X, dtype=float)
        acts = self.forward(X)
        diff = acts[-1] - X
        loss = float(np.mean(diff**2))
        delta = 2.0 * diff / diff.size
        gW = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            gW[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (1.0 - acts[i] ** 2)
        return loss, gW, gb

    def dumps(self) -> str:
        lines = [AE_MAGIC, "layers " + " ".join(map(str, self.layer_sizes)), f"seed {self.seed}"]
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            lines.append(f"W{i} {W.shape[0]} {W.shape[1]}")
            lines.append(" ".join(repr(float(v)) for v in W.ravel()))
            lines.append(f"b{i} {b.shape[0]}")
            lines.append(" ".join(repr(float(v)) for v in b))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Autoencoder":
        lines = text.splitlines()
        if not lines or lines[0] != AE_MAGIC:
            raise ModelFormatError(f"expected {AE_MAGIC} header")
        sizes = [int(v) for v in lines[1].split()[1:]]
        seed = int(lines[2].split()[1])
        weights, biases = [], []
        pos = 3
        for _ in range(len(sizes) - 1):
            _, r, c = lines[pos].split()
            weights.append(np.array([float(v) for v in lines[pos + 1].split()]).reshape(int(r), int(c)))
            biases.append(np.array([float(v) for v in lines[pos + 3].split()]))
            pos += 4
        return cls(sizes, weights, biases, seed)


def check_layer_sizes(layer_sizes: Sequence[int]) -> None:
    sizes = list(layer_sizes)
    if len(sizes) < 3 or len(sizes) % 2 == 0:
        raise NonMirroredLayers(f"need an odd number (>= 3) of layer sizes, got {sizes}")
    if sizes != sizes[::-1]:
        raise NonMirroredLayers(f"encoder and decoder sizes must mirror, got {sizes}")
    if any(s < 1 for s in sizes):
        raise NonMirroredLayers("layer sizes must be positive")
    if sizes[len(sizes) // 2] > sizes[0]:
        raise NonMirroredLayers("bottleneck must not be wider than the input")


def init_autoencoder(layer_sizes: Sequence[int], seed: int = 0) -> Autoencoder:
    check_layer_sizes(layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Autoencoder(list(layer_sizes), weights, biases, seed)


def train_autoencoder(matrix, layer_sizes: Sequence[int] | None = None, epochs: int = 200, lr: float = 0.01,
                      seed: int = 0, batch_size: int = 32) -> Autoencoder:
    """Mini-batch gradient descent on the reconstruction MSE.

    After each epoch the full-data loss is compared with the previous one;
    on an increase the epoch is rolled back and the learning rate halved, so
    ``loss_history`` (initial loss first) never increases.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("autoencoder input must be a non-empty 2-D matrix")
    d = X.shape[1]
    sizes = list(layer_sizes) if layer_sizes is not None else default_layers(d)
    if sizes[0] != d:
        raise NonMirroredLayers(f"input layer size {sizes[0]} does not match data width {d}")
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    ae = init_autoencoder(sizes, seed)
    rng = np.random.default_rng(seed + 1)
    prev = ae.loss(X)
    if not np.isfinite(prev):
        raise NaNLoss(0)
    ae.loss_history.append(prev)
    n = X.shape[0]
    for epoch in range(1, epochs + 1):
        saved_w = [w.copy() for w in ae.weights]
        saved_b = [b.copy() for b in ae.biases]
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = X[perm[start : start + batch_size]]
            _, gW, gb = ae.gradients(batch)
            for i in range(len(ae.weights)):
                ae.weights[i] -= lr * gW[i]
                ae.biases[i] -= lr * gb[i]
        cur = ae.loss(X)
        if not np.isfinite(cur):
            raise NaNLoss(epoch)
        if cur > prev:
            ae.weights, ae.biases = saved_w, saved_b
            lr /= 2
            log.debug("epoch %d: loss rose to %.6g, halving lr to %.3g", epoch, cur, lr)
            cur = prev
        ae.loss_history.append(cur)
        prev = cur
    return ae


def default_layers(d: int) -> list[int]:
    h = min(128, d)
    b = min(32, h)
    return [d, h, b, h, d]


def encode(ae: Autoencoder, matrix) -> np.ndarray:
    return ae.encode(matrix)


def save_embedding(path, sample_ids: Sequence[str], emb: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id"] + [f"dim{i}" for i in range(emb.shape[1])])
        for sid, row in zip(sample_ids, emb):
            w.writerow([sid] + [repr(float(v)) for v in row])


def load_embedding(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    ids = [r[0] for r in rows[1:]]
    return ids, np.array([[float(v) for v in r[1:]] for r in rows[1:]])
