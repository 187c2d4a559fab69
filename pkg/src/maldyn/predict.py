"""Time-partitioned coverage of real samples by a generated sample set.

A target sample counts as *covered* at threshold s when its best similarity
to any generated sample reaches s; the coverage rate is covered / total.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from html import escape
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .behavior_log import Manifest
from .errors import EmptyGeneratedSet, UndatedSample, UnknownScheme
from .similarity import (
    MODES,
    Profile,
    SimilarityConfig,
    histogram_similarities,
    profile,
    text_similarity_profiles,
)

DEFAULT_THRESHOLDS = (0.15, 0.2, 0.25, 0.5, 0.75, 0.8, 0.9, 0.95)
YEAR_RANGE = (2009, 2018)
SCHEMES = {
    "7:1:1:1": ((2009, 2015), (2016, 2016), (2017, 2017), (2018, 2018)),
    "4:2:2:2": ((2009, 2012), (2013, 2014), (2015, 2016), (2017, 2018)),
}
PARTITION_NAMES = ("T0", "T1", "T2", "T3")


@dataclass(frozen=True)
class TimePartition:
    t0: tuple[str, ...]
    t1: tuple[str, ...]
    t2: tuple[str, ...]
    t3: tuple[str, ...]
    scheme: str
    year_boundaries: tuple[tuple[int, int], ...]

    def parts(self) -> dict[str, tuple[str, ...]]:
        return dict(zip(PARTITION_NAMES, (self.t0, self.t1, self.t2, self.t3)))

    def counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.parts().items()}


def partition_by_year(manifest: Manifest, scheme: str = "7:1:1:1") -> TimePartition:
    """Split dated samples into T0..T3 by year blocks of the chosen scheme."""
    if scheme not in SCHEMES:
        raise UnknownScheme(f"unknown partition scheme {scheme!r}; expected one of {sorted(SCHEMES)}")
    bounds = SCHEMES[scheme]
    bad = [e for e in manifest if e.year is None or not YEAR_RANGE[0] <= e.year <= YEAR_RANGE[1]]
    if bad:
        listing = ", ".join(f"{e.sample_id}({e.year})" for e in bad[:10])
        more = f" and {len(bad) - 10} more" if len(bad) > 10 else ""
        raise UndatedSample(
            f"{len(bad)} sample(s) lack a year in {YEAR_RANGE[0]}-{YEAR_RANGE[1]}: {listing}{more}",
            bad[0].sample_id,
        )
    parts: list[list[str]] = [[] for _ in bounds]
    for e in manifest:
        for i, (lo, hi) in enumerate(bounds):
            if lo <= e.year <= hi:
                parts[i].append(e.sample_id)
                break
    return TimePartition(*(tuple(p) for p in parts), scheme=scheme, year_boundaries=bounds)


SimilarityFn = Callable[[object, object], float]


def _profiles(samples, cfg, mode) -> list[Profile]:
    if samples and isinstance(samples[0], Profile):
        return list(samples)
    return [profile(s, cfg, with_image=mode != "text") for s in samples]


def _row_scores(ti: Profile, g: list[Profile], mode: str, cfg: SimilarityConfig, H=None) -> np.ndarray:
    if mode == "text":
        return np.array([text_similarity_profiles(ti, gj, cfg) for gj in g])
    if H is None:
        H = np.stack([gj.histogram for gj in g])
    img = histogram_similarities(ti.histogram, H, cfg)
    if mode == "image":
        return img
    st = np.array([text_similarity_profiles(ti, gj, cfg) for gj in g])
    out = np.clip(cfg.w1 * st + cfg.w2 * img, 0.0, 1.0)
    out[(st == img)] = st[(st == img)]
    return out


def max_similarity(ti, g: Sequence, mode="text", cfg: SimilarityConfig | None = None) -> tuple[int, float]:
    """Index and value of the most similar generated sample (lowest index on ties).

    ``mode`` is ``"text"``, ``"image"``, ``"hybrid"`` or a callable
    ``f(ti, gj) -> float``.
    """
    if len(g) == 0:
        raise EmptyGeneratedSet("generated set is empty")
    cfg = cfg or SimilarityConfig()
    if callable(mode):
        scores = np.array([mode(ti, gj) for gj in g], dtype=float)
    else:
        if mode not in MODES:
            raise ValueError(f"unknown similarity mode {mode!r}")
        p = ti if isinstance(ti, Profile) else profile(ti, cfg, with_image=mode != "text")
        scores = _row_scores(p, _profiles(list(g), cfg, mode), mode, cfg)
    j = int(np.argmax(scores))
    return j, float(scores[j])


def _max_chunk(args):
    chunk, g, mode, cfg = args
    H = np.stack([gj.histogram for gj in g]) if mode != "text" else None
    out = []
    for ti in chunk:
        s = _row_scores(ti, g, mode, cfg, H)
        j = int(np.argmax(s))
        out.append((j, float(s[j])))
    return out


def best_matches(t: Sequence, g: Sequence, mode: str, cfg: SimilarityConfig, jobs: int = 1) -> list[tuple[int, float]]:
    """``max_similarity`` for every target sample, optionally across processes."""
    if len(g) == 0:
        raise EmptyGeneratedSet("generated set is empty")
    tp = _profiles(list(t), cfg, mode)
    gp = _profiles(list(g), cfg, mode)
    if jobs <= 1 or len(tp) < 2:
        return _max_chunk((tp, gp, mode, cfg))
    n_chunks = min(jobs, len(tp))
    chunks = [tp[i::n_chunks] for i in range(n_chunks)]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        parts = list(ex.map(_max_chunk, [(c, gp, mode, cfg) for c in chunks]))
    out: list = [None] * len(tp)
    for i, part in enumerate(parts):
        out[i::n_chunks] = part
    return out


@dataclass(frozen=True)
class CoverageRow:
    partition: str
    threshold: float
    covered: int
    total: int

    @property
    def rate(self) -> float:
        return self.covered / self.total if self.total else 0.0


@dataclass
class CoverageReport:
    mode: str
    thresholds: tuple[float, ...]
    rows: list[CoverageRow] = field(default_factory=list)
    # partition -> sample_id -> (generated sample id, similarity)
    max_similarity: dict[str, dict[str, tuple[str, float]]] = field(default_factory=dict)

    def rates(self, partition: str) -> list[float]:
        return [r.rate for r in self.rows if r.partition == partition]

    @property
    def partitions(self) -> list[str]:
        return list(dict.fromkeys(r.partition for r in self.rows))

    def check_monotone(self) -> None:
        for part in self.partitions:
            rates = self.rates(part)
            for a, b in zip(rates, rates[1:]):
                if b > a:
                    raise AssertionError(f"coverage of {part} rises with the threshold: {rates}")

    def merge(self, other: "CoverageReport") -> "CoverageReport":
        if other.thresholds != self.thresholds or other.mode != self.mode:
            raise ValueError("cannot merge reports with different modes or thresholds")
        return CoverageReport(self.mode, self.thresholds, self.rows + other.rows,
                              {**self.max_similarity, **other.max_similarity})


def _sample_id(s, i) -> str:
    return getattr(s, "sample_id", "") or str(i)


def coverage_from_maxima(maxima: Sequence[float], thresholds: Sequence[float], partition: str = "T") -> list[CoverageRow]:
    vals = np.asarray(maxima, dtype=float)
    return [CoverageRow(partition, float(s), int(np.sum(vals >= s)), len(vals)) for s in thresholds]


def coverage(t: Sequence, g: Sequence, thresholds: Sequence[float] = DEFAULT_THRESHOLDS, mode: str = "text",
             cfg: SimilarityConfig | None = None, partition: str = "T", jobs: int = 1) -> CoverageReport:
    """Coverage rate of target set ``t`` by generated set ``g`` per threshold."""
    cfg = cfg or SimilarityConfig()
    thresholds = tuple(float(s) for s in thresholds)
    if not thresholds or list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be a non-empty ascending list")
    if len(t) == 0:
        raise ValueError("target set is empty")
    matches = best_matches(t, g, mode, cfg, jobs)
    gids = [_sample_id(gj, j) for j, gj in enumerate(g)]
    report = CoverageReport(mode, thresholds)
    report.rows = coverage_from_maxima([v for _, v in matches], thresholds, partition)
    report.max_similarity[partition] = {
        _sample_id(ti, i): (gids[j], v) for i, (ti, (j, v)) in enumerate(zip(t, matches))
    }
    report.check_monotone()
    return report


def partition_coverage(samples: dict[str, object], partition: TimePartition, g: Sequence, mode: str,
                       cfg: SimilarityConfig | None = None, thresholds=DEFAULT_THRESHOLDS,
                       targets=("T1", "T2", "T3"), jobs: int = 1) -> CoverageReport:
    """Coverage of each later partition; ``samples`` maps sample_id to a sample."""
    cfg = cfg or SimilarityConfig()
    gp = _profiles(list(g), cfg, mode)
    gids = [_sample_id(gj, j) for j, gj in enumerate(g)]
    report = CoverageReport(mode, tuple(float(s) for s in thresholds))
    parts = partition.parts()
    for name in targets:
        ids = parts[name]
        if not ids:
            continue
        matches = best_matches([samples[s] for s in ids], gp, mode, cfg, jobs)
        report.rows += coverage_from_maxima([v for _, v in matches], report.thresholds, name)
        report.max_similarity[name] = {sid: (gids[j], v) for sid, (j, v) in zip(ids, matches)}
    report.check_monotone()
    return report


def write_long_csv(path, reports: Sequence[CoverageReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "threshold", "partition", "covered", "total", "rate"])
        for rep in reports:
            for r in rep.rows:
                w.writerow([rep.mode, r.threshold, r.partition, r.covered, r.total, repr(r.rate)])


def write_curve_csv(path, report: CoverageReport) -> None:
    parts = report.partitions
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold"] + [f"P({p})" for p in parts])
        cols = [report.rates(p) for p in parts]
        for i, s in enumerate(report.thresholds):
            w.writerow([s] + [repr(c[i]) for c in cols])


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def render_svg(report: CoverageReport, width: int = 480, height: int = 320) -> str:
    """Line plot of coverage rate against threshold, one polyline per partition."""
    m = 40
    pw, ph = width - 2 * m, height - 2 * m

    def xy(s, p):
        return m + s * pw, m + (1 - p) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{m}" y="{m}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2:.1f}" y="{m - 12}" text-anchor="middle" font-size="13">'
        f"{escape(report.mode)} coverage</text>",
        f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="11">similarity threshold</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        x, _ = xy(tick, 0)
        _, y = xy(0, tick)
        out.append(f'<text x="{x:.1f}" y="{m + ph + 14}" text-anchor="middle" font-size="10">{tick:g}</text>')
        out.append(f'<text x="{m - 6}" y="{y + 3:.1f}" text-anchor="end" font-size="10">{tick:g}</text>')
    for i, part in enumerate(report.partitions):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join("{:.2f},{:.2f}".format(*xy(s, p)) for s, p in zip(report.thresholds, report.rates(part)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{m + pw - 4}" y="{m + 14 + 13 * i}" text-anchor="end" font-size="11" '
                   f'fill="{color}">{escape(part)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def coverage_curve_report(samples: dict[str, object], partition: TimePartition, g: Sequence, out_dir,
                          cfg: SimilarityConfig | None = None, modes: Sequence[str] = MODES,
                          thresholds=DEFAULT_THRESHOLDS, jobs: int = 1) -> dict[str, CoverageReport]:
    """Write ``coverage_<mode>.csv`` / ``.svg`` per mode and ``coverage.csv`` (long form)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for mode in modes:
        rep = partition_coverage(samples, partition, g, mode, cfg, thresholds, jobs=jobs)
        write_curve_csv(out / f"coverage_{mode}.csv", rep)
        (out / f"coverage_{mode}.svg").write_text(render_svg(rep), encoding="utf-8")
        reports[mode] = rep
    write_long_csv(out / "coverage.csv", list(reports.values()))
    return reports
