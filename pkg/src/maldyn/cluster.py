"""K-means and DBSCAN over reduced embeddings, plus cluster-quality metrics."""

from __future__ import annotations

import csv
from collections import Counter, deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataError, KTooLarge, NonPositiveEps

NOISE = -1


@dataclass
class ClusterModel:
    algorithm: str
    labels: np.ndarray
    centroids: np.ndarray
    params: dict = field(default_factory=dict)
    inertia: float = 0.0
    inertia_history: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def save_assignments(self, path, sample_ids: Sequence[str]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "cluster"])
            for sid, c in zip(sample_ids, self.labels):
                w.writerow([sid, int(c)])


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # explicit differences rather than the |x|^2 - 2xc + |c|^2 expansion:
    # keeps assignments exact under translation of the data
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].copy()


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300) -> ClusterModel:
    """k-means++ seeding followed by Lloyd iterations to a fixpoint.

    An empty cluster is re-seeded at the point farthest from its current
    centroid. Inertia after every assignment step is recorded and must not
    increase.
    """
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise KTooLarge(f"k={k} must lie in 1..{n}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, k, rng)
    labels = None
    history: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, C)
        new = np.argmin(D, axis=1)
        inertia = float(D[np.arange(n), new].sum())
        if history and inertia > history[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError(f"k-means inertia increased at iteration {it}")
        history.append(inertia)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        dmin = D[np.arange(n), labels].copy()
        for c in range(k):
            members = labels == c
            if members.any():
                C[c] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(dmin))
                C[c] = X[far]
                labels[far] = c
                dmin[far] = 0.0
    D = _sq_dists(X, C)
    labels = np.argmin(D, axis=1)
    inertia = float(D[np.arange(n), labels].sum())
    return ClusterModel("kmeans", labels, C, {"k": k, "seed": seed, "max_iter": max_iter},
                        inertia, history, it)


def _neighbors(X: np.ndarray, eps: float) -> list[np.ndarray]:
    D = _sq_dists(X, X)
    return [np.flatnonzero(row <= eps * eps) for row in D]


def dbscan(points, eps: float, min_pts: int = 5) -> ClusterModel:
    """Density clustering; neighbourhoods include the point itself.

    Clusters are numbered in order of their lowest-index core point; a border
    point reachable from several clusters joins the first one expanded.
    """
    if eps <= 0:
        raise NonPositiveEps(f"eps must be positive, got {eps}")
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    nbrs = _neighbors(X, eps)
    core = np.array([len(nb) >= min_pts for nb in nbrs], dtype=bool)
    labels = np.full(n, NOISE)
    cid = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cid
        queue = deque([i])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in nbrs[p]:
                if labels[q] == NOISE:
                    labels[q] = cid
                    queue.append(q)
        cid += 1
    centroids = np.array([X[labels == c].mean(axis=0) for c in range(cid)]).reshape(cid, X.shape[1])
    return ClusterModel("dbscan", labels, centroids, {"eps": eps, "min_pts": min_pts})


def score_clusters(labels, truth) -> float:
    """Purity over labelled samples: each cluster counts its majority family.

    ``truth`` entries of None are unlabelled and ignored. DBSCAN noise is
    treated as one cluster.
    """
    pairs = [(int(c), t) for c, t in zip(labels, truth) if t is not None]
    if not pairs:
        raise DataError("no labelled samples to score against")
    by_cluster: dict[int, Counter] = {}
    for c, t in pairs:
        by_cluster.setdefault(c, Counter())[t] += 1
    return sum(max(cnt.values()) for cnt in by_cluster.values()) / len(pairs)


def matched_score(labels, truth) -> float:
    """One-to-one variant of purity: each family may claim a single cluster.

    Splitting a family across clusters is penalized, so the score peaks when
    the cluster count equals the family count.
    """
    pairs = [(int(c), t) for c, t in zip(labels, truth) if t is not None]
    if not pairs:
        raise DataError("no labelled samples to score against")
    clusters = sorted({c for c, _ in pairs})
    fams = sorted({t for _, t in pairs})
    ci = {c: i for i, c in enumerate(clusters)}
    fi = {f: i for i, f in enumerate(fams)}
    M = np.zeros((len(clusters), len(fams)))
    for c, t in pairs:
        M[ci[c], fi[t]] += 1
    r, c = linear_sum_assignment(M, maximize=True)
    return float(M[r, c].sum() / len(pairs))


def mahalanobis(u, v, cov) -> float:
    diff = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    return float(np.sqrt(diff @ np.linalg.solve(np.asarray(cov, dtype=float), diff)))


def pooled_covariance(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Within-cluster scatter over clustered points, shrunk toward the identity.

    ``S + 1e-6 * trace(S) / d * I``; a zero-scatter input falls back to I.
    """
    mask = labels >= 0
    X = points[mask]
    d = points.shape[1]
    resid = X - centroids[labels[mask]]
    S = resid.T @ resid / max(len(X), 1)
    tr = float(np.trace(S))
    if tr <= 0:
        return np.eye(d)
    return S + 1e-6 * tr / d * np.eye(d)


def adjusted_cosine(u, v, mean) -> float:
    """Cosine after subtracting the global per-dimension mean.

    Two vectors that both vanish after centering are identical and score 1.
    """
    a = np.asarray(u, dtype=float) - mean
    b = np.asarray(v, dtype=float) - mean
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 1.0 if np.array_equal(a, b) else 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cluster_metrics(model: ClusterModel, points) -> dict[str, float]:
    """Mean pairwise adjusted cosine and Mahalanobis distance between centroids."""
    X = np.asarray(points, dtype=float)
    C = model.centroids
    if len(C) < 2:
        return {"adjusted_cosine": 1.0, "mahalanobis": 0.0}
    mean = X.mean(axis=0)
    cov = pooled_covariance(X, np.asarray(model.labels), C)
    pairs = list(combinations(range(len(C)), 2))
    cos = float(np.mean([adjusted_cosine(C[i], C[j], mean) for i, j in pairs]))
    mah = float(np.mean([mahalanobis(C[i], C[j], cov) for i, j in pairs]))
    return {"adjusted_cosine": cos, "mahalanobis": mah}


@dataclass(frozen=True)
class ClusterReport:
    k_or_eps: float
    score: float
    matched_score: float
    adjusted_cosine: float
    mahalanobis: float
    n_clusters: int


def report_for(model: ClusterModel, points, truth, param) -> ClusterReport:
    m = cluster_metrics(model, points)
    return ClusterReport(param, score_clusters(model.labels, truth), matched_score(model.labels, truth),
                         m["adjusted_cosine"], m["mahalanobis"], model.n_clusters)


def k_scan(points, k_list: Sequence[int], truth, seed: int = 0, max_iter: int = 300) -> list[ClusterReport]:
    """Run k-means for each distinct k (ascending) and score against ``truth``."""
    return [report_for(kmeans(points, k, seed, max_iter), points, truth, k) for k in sorted(set(k_list))]


def best_k(reports: Sequence[ClusterReport], key: str = "matched_score") -> ClusterReport:
    """Highest-scoring report; ties go to the smallest k."""
    return max(reports, key=lambda r: (getattr(r, key), -r.k_or_eps))


def save_reports(path, reports: Sequence[ClusterReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "score", "adjusted_cosine", "mahalanobis", "matched_score", "n_clusters"])
        for r in reports:
            k = int(r.k_or_eps) if float(r.k_or_eps).is_integer() else r.k_or_eps
            w.writerow([k, repr(r.score), repr(r.adjusted_cosine), repr(r.mahalanobis),
                        repr(r.matched_score), r.n_clusters])
