"""Flat ``key=value`` pipeline configuration.

One setting per line, ``#`` starts a comment, keys carry a section prefix::

    gbdt.a.max_depth = 6
    similarity.w1 = 0.5
    coverage.thresholds = 0.15,0.2,0.25,0.5,0.75,0.8,0.9,0.95

Every key must be known; the whole file is parsed and validated before any
stage runs. Stage seeds are offsets added to ``global.seed``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .featurize import GROUPS, FeaturizeConfig, load_category_map
from .gbdt import PROFILE_A, PROFILE_B, GbdtParams
from .predict import DEFAULT_THRESHOLDS, SCHEMES
from .similarity import MODES, SimilarityConfig
from .transform import ImageConfig, TextConfig


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _strs(s: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in s.split(",") if p.strip())


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(p) for p in _strs(s))


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in _strs(s))


def _size(s: str):
    if s.lower() == "none":
        return None
    w, h = s.lower().split("x")
    return int(w), int(h)


def _gbdt_keys(tag: str, p: GbdtParams) -> dict:
    return {
        f"gbdt.{tag}.n_trees": (int, p.n_trees),
        f"gbdt.{tag}.max_depth": (int, p.max_depth),
        f"gbdt.{tag}.learning_rate": (float, p.learning_rate),
        f"gbdt.{tag}.min_leaf": (int, p.min_leaf),
        f"gbdt.{tag}.subsample": (float, p.subsample),
        f"gbdt.{tag}.colsample": (float, p.colsample),
        f"gbdt.{tag}.seed": (int, p.seed),
        f"gbdt.{tag}.reg_lambda": (float, p.reg_lambda),
    }


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    "paths.data_dir": (str, "."),
    "paths.out_dir": (str, "out"),
    "featurize.groups": (_strs, tuple(g for g in GROUPS if g in FeaturizeConfig().groups)),
    "featurize.ngram": (int, 1),
    "featurize.category_map": (str, ""),
    **_gbdt_keys("a", PROFILE_A),
    **_gbdt_keys("b", PROFILE_B),
    "gbdt.blend": (float, 0.5),
    "gbdt.test_fraction": (float, 0.3),
    "reduce.method": (str, "svd"),
    "reduce.k": (int, 10),
    "reduce.n_iter": (int, 10),
    "reduce.epochs": (int, 200),
    "reduce.lr": (float, 0.01),
    "reduce.batch_size": (int, 32),
    "reduce.seed": (int, 0),
    "cluster.algorithm": (str, "kmeans"),
    "cluster.k": (int, 4),
    "cluster.k_list": (_ints, (2, 3, 4, 5, 6, 8)),
    "cluster.eps": (float, 0.5),
    "cluster.min_pts": (int, 5),
    "cluster.max_iter": (int, 300),
    "cluster.seed": (int, 0),
    "generate.order": (int, 2),
    "generate.mutation_rate": (float, 0.05),
    "generate.n_samples": (int, 5000),
    "generate.seed": (int, 0),
    "similarity.a1": (float, 0.5),
    "similarity.a2": (float, 0.5),
    "similarity.b1": (float, 1 / 3),
    "similarity.b2": (float, 1 / 3),
    "similarity.b3": (float, 1 / 3),
    "similarity.w1": (float, 0.5),
    "similarity.w2": (float, 0.5),
    "similarity.bleu_order": (int, 4),
    "similarity.distance_to_similarity": (str, "exp_neg"),
    "transform.width": (int, 256),
    "transform.target": (_size, (64, 64)),
    "transform.include_ret": (_bool, False),
    "transform.include_exinfo": (_bool, False),
    "coverage.thresholds": (_floats, DEFAULT_THRESHOLDS),
    "coverage.scheme": (str, "7:1:1:1"),
    "coverage.modes": (_strs, MODES),
    "global.seed": (int, 0),
    "global.jobs": (int, 1),
}


@dataclass
class PipelineConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["global.seed"]

    def stage_seed(self, key: str) -> int:
        return self.seed + self.values[key]

    def gbdt_params(self, tag: str) -> GbdtParams:
        pre = f"gbdt.{tag}."
        kw = {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}
        kw["seed"] = self.seed + kw["seed"]
        return GbdtParams(**kw)

    def featurize_config(self) -> FeaturizeConfig:
        path = self.values["featurize.category_map"]
        cmap = load_category_map(path) if path else {}
        return FeaturizeConfig(frozenset(self.values["featurize.groups"]), category_map=cmap,
                               ngram=self.values["featurize.ngram"])

    def image_config(self) -> ImageConfig:
        return ImageConfig(self.values["transform.width"], self.values["transform.target"])

    def text_config(self) -> TextConfig:
        return TextConfig(self.values["transform.include_ret"], self.values["transform.include_exinfo"])

    def similarity_config(self) -> SimilarityConfig:
        v = self.values
        return SimilarityConfig(v["similarity.a1"], v["similarity.a2"], v["similarity.b1"], v["similarity.b2"],
                                v["similarity.b3"], v["similarity.w1"], v["similarity.w2"],
                                v["similarity.bleu_order"], v["similarity.distance_to_similarity"],
                                image=self.image_config())

    def dumps(self) -> str:
        out = []
        for k in SCHEMA:
            v = self.values[k]
            if isinstance(v, tuple):
                v = "none" if k == "transform.target" and v is None else (
                    f"{v[0]}x{v[1]}" if k == "transform.target" else ",".join(str(x) for x in v))
            elif v is None:
                v = "none"
            out.append(f"{k}={v}")
        return "\n".join(out) + "\n"

    def validate(self) -> None:
        """Build every derived config once so bad values fail up front."""
        try:
            self.gbdt_params("a")
            self.gbdt_params("b")
            self.similarity_config()
            self.featurize_config()
        except (ValueError, OSError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
        v = self.values
        checks = [
            (0 <= v["gbdt.blend"] <= 1, "gbdt.blend must lie in [0, 1]"),
            (0 < v["gbdt.test_fraction"] < 1, "gbdt.test_fraction must lie in (0, 1)"),
            (v["reduce.method"] in ("svd", "autoencoder"), "reduce.method must be svd or autoencoder"),
            (v["cluster.algorithm"] in ("kmeans", "dbscan"), "cluster.algorithm must be kmeans or dbscan"),
            (v["coverage.scheme"] in SCHEMES, f"coverage.scheme must be one of {sorted(SCHEMES)}"),
            (set(v["coverage.modes"]) <= set(MODES), f"coverage.modes must be drawn from {MODES}"),
            (list(v["coverage.thresholds"]) == sorted(v["coverage.thresholds"]) and v["coverage.thresholds"],
             "coverage.thresholds must be a non-empty ascending list"),
            (v["global.jobs"] >= 1, "global.jobs must be >= 1"),
            (v["generate.n_samples"] >= 1, "generate.n_samples must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


def parse_config(text: str, source: str = "<config>") -> PipelineConfig:
    cfg = PipelineConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            cfg.values[key] = SCHEMA[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    cfg.validate()
    return cfg


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))
