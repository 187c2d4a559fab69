import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.datasets import make_moons
from sklearn.metrics import adjusted_rand_score

from maldyn.cluster import (
    NOISE,
    adjusted_cosine,
    best_k,
    cluster_metrics,
    dbscan,
    k_scan,
    kmeans,
    mahalanobis,
    matched_score,
    pooled_covariance,
    save_reports,
    score_clusters,
)
from maldyn.errors import KTooLarge, NonPositiveEps


def blobs(seed=0, n=30, sigma=0.05):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    X = np.concatenate([c + rng.normal(scale=sigma, size=(n, 2)) for c in centers])
    return X, np.repeat(np.arange(3), n)


def brute_dbscan(X, eps, min_pts):
    """Reference: naive O(n^2) neighbourhoods, recursive-free frontier expansion."""
    n = len(X)
    nbrs = [[j for j in range(n) if sum((X[i] - X[j]) ** 2) <= eps * eps] for i in range(n)]
    core = [len(nb) >= min_pts for nb in nbrs]
    labels = [NOISE] * n
    c = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = c
        frontier = [i]
        while frontier:
            nxt = []
            for p in frontier:
                for q in nbrs[p]:
                    if labels[q] == NOISE:
                        labels[q] = c
                        if core[q]:
                            nxt.append(q)
            frontier = nxt
        c += 1
    return np.array(labels)


def test_kmeans_blobs_ari():
    X, y = blobs()
    m = kmeans(X, 3, seed=0)
    assert adjusted_rand_score(y, m.labels) == 1.0


def test_kmeans_nearest_centroid_and_history():
    X = np.random.default_rng(1).normal(size=(120, 3))
    m = kmeans(X, 5, seed=3)
    d = ((X[:, None, :] - m.centroids[None]) ** 2).sum(axis=2)
    np.testing.assert_array_equal(m.labels, d.argmin(axis=1))
    assert np.all(np.diff(m.inertia_history) <= 1e-9)


def test_kmeans_k_equals_rows():
    X = np.random.default_rng(0).normal(size=(6, 2))
    m = kmeans(X, 6)
    assert len(set(m.labels)) == 6 and m.inertia == 0


def test_kmeans_duplicate_dataset():
    X, _ = blobs(seed=2)
    a = kmeans(X, 3, seed=0)
    b = kmeans(np.concatenate([X, X]), 3, seed=0)
    key = lambda C: C[np.lexsort(C.T[::-1])]  # noqa: E731
    np.testing.assert_allclose(key(a.centroids), key(b.centroids), atol=1e-9)


def test_kmeans_translation_invariance():
    X = np.random.default_rng(4).normal(size=(80, 2))
    a = kmeans(X, 4, seed=1)
    b = kmeans(X + np.array([100.0, -50.0]), 4, seed=1)
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_allclose(b.centroids, a.centroids + np.array([100.0, -50.0]), atol=1e-9)


def test_kmeans_errors():
    with pytest.raises(KTooLarge):
        kmeans(np.zeros((3, 2)), 4)
    with pytest.raises(KTooLarge):
        kmeans(np.zeros((3, 2)), 0)


def test_kmeans_duplicate_points_more_clusters_than_distinct():
    X = np.array([[0.0, 0.0]] * 4 + [[1.0, 1.0]] * 4)
    m = kmeans(X, 3, seed=0)
    assert m.inertia == 0


def test_dbscan_half_moons():
    X, y = make_moons(n_samples=200, noise=0.05, random_state=0)
    m = dbscan(X, eps=0.2, min_pts=5)
    assert m.n_clusters == 2
    assert adjusted_rand_score(y, m.labels) == 1.0
    np.testing.assert_array_equal(m.labels, brute_dbscan(X, 0.2, 5))


@pytest.mark.parametrize("seed", range(4))
def test_dbscan_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(c, 0.3, size=(50, 2)) for c in ([0, 0], [2, 2], [0, 3])] + [rng.uniform(-2, 5, (50, 2))])
    for eps, mp in [(0.25, 4), (0.4, 5), (0.6, 8)]:
        np.testing.assert_array_equal(dbscan(X, eps, mp).labels, brute_dbscan(X, eps, mp))


def test_dbscan_core_points_agree_with_sklearn():
    from sklearn.cluster import DBSCAN

    X, _ = make_moons(n_samples=200, noise=0.12, random_state=3)
    ours = dbscan(X, 0.15, 6)
    ref = DBSCAN(eps=0.15, min_samples=6).fit(X)
    core = ref.core_sample_indices_
    assert adjusted_rand_score(ref.labels_[core], ours.labels[core]) == 1.0
    np.testing.assert_array_equal(ours.labels == NOISE, ref.labels_ == -1)


def test_dbscan_edges():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert (dbscan(X, 0.5, 2).labels == NOISE).all()
    blob = np.random.default_rng(0).normal(scale=0.01, size=(30, 2))
    assert dbscan(blob, 0.5, 3).n_clusters == 1
    with pytest.raises(NonPositiveEps):
        dbscan(X, 0.0)


def test_score_clusters_examples():
    assert score_clusters([0, 0, 1, 1], ["a", "a", "b", "b"]) == 1.0
    assert score_clusters([0, 0, 0, 0], ["a", "a", "b", "b"]) == 0.5
    assert score_clusters([0, 0, 0, 1], ["a", "a", "b", "b"]) == 0.75
    assert score_clusters([0, 1, 2, 3], ["a", "a", "b", "b"]) == 1.0
    assert score_clusters([0, 1, 5], ["a", None, "b"]) == 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.sampled_from("abc")), min_size=1, max_size=30))
def test_score_bounds_and_refinement(pairs):
    labels, truth = zip(*pairs)
    s = score_clusters(labels, truth)
    assert 0 <= s <= 1
    refines = all(len({t for c2, t in pairs if c2 == c}) == 1 for c in set(labels))
    assert (s == 1.0) == refines
    assert 0 <= matched_score(labels, truth) <= s + 1e-12


def test_matched_score_penalizes_splits():
    truth = ["a"] * 4 + ["b"] * 4
    assert matched_score([0, 0, 0, 0, 1, 1, 1, 1], truth) == 1.0
    assert matched_score([0, 0, 2, 2, 1, 1, 1, 1], truth) == 0.75


def test_metric_examples():
    assert mahalanobis([0, 0], [3, 4], np.eye(2)) == pytest.approx(5.0)
    mean = np.zeros(1)
    assert adjusted_cosine([2.0], [-2.0], mean) == -1.0
    assert adjusted_cosine([1.0, 1.0], [1.0, 1.0], np.array([1.0, 1.0])) == 1.0


def test_metrics_all_centroids_equal():
    from maldyn.cluster import ClusterModel

    X = np.ones((4, 2))
    m = ClusterModel("kmeans", np.array([0, 0, 1, 1]), np.ones((2, 2)))
    assert cluster_metrics(m, X) == {"adjusted_cosine": 1.0, "mahalanobis": 0.0}


def test_pooled_covariance_positive_definite():
    X, y = blobs()
    m = kmeans(X, 3)
    S = pooled_covariance(X, m.labels, m.centroids)
    assert np.all(np.linalg.eigvalsh(S) > 0)
    np.testing.assert_array_equal(pooled_covariance(np.zeros((3, 2)), np.zeros(3, int), np.zeros((1, 2))), np.eye(2))


def test_k_scan_examples(tmp_path):
    X, y = blobs()
    reps = k_scan(X, [3], y)
    assert len(reps) == 1 and reps[0].score == 1.0
    reps = k_scan(X, [4, 2, 3, 3], y)
    assert [r.k_or_eps for r in reps] == [2, 3, 4]
    assert best_k(reps).k_or_eps == 3
    save_reports(tmp_path / "k.csv", reps)
    assert (tmp_path / "k.csv").read_text().splitlines()[0] == "k,score,adjusted_cosine,mahalanobis,matched_score,n_clusters"


def test_assignments_file(tmp_path):
    X, _ = blobs()
    m = kmeans(X, 3)
    m.save_assignments(tmp_path / "a.csv", [f"s{i}" for i in range(len(X))])
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "sample_id,cluster" and len(lines) == len(X) + 1
