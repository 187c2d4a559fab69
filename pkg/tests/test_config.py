import pytest

from maldyn.config import SCHEMA, PipelineConfig, load_config, parse_config
from maldyn.errors import ConfigError


def test_defaults_validate():
    cfg = PipelineConfig()
    cfg.validate()
    assert cfg["global.seed"] == 0 and cfg["coverage.scheme"] == "7:1:1:1"


def test_parse_values_and_comments():
    cfg = parse_config("""
        # comment line
        gbdt.a.max_depth = 3   # trailing comment
        similarity.w1=0.7
        similarity.w2=0.3
        coverage.thresholds = 0.1, 0.5 ,0.9
        transform.target = none
        transform.include_ret = yes
        cluster.k_list = 2,4
    """)
    assert cfg["gbdt.a.max_depth"] == 3
    assert cfg["coverage.thresholds"] == (0.1, 0.5, 0.9)
    assert cfg["transform.target"] is None
    assert cfg["transform.include_ret"] is True
    assert cfg["cluster.k_list"] == (2, 4)
    assert cfg.similarity_config().w1 == 0.7


@pytest.mark.parametrize("text", [
    "gbdt.c.max_depth = 3",
    "nonsense",
    "gbdt.a.max_depth = three",
    "transform.include_ret = maybe",
    "gbdt.blend = 1.5",
    "coverage.scheme = 5:5",
    "coverage.thresholds = 0.9,0.1",
    "coverage.modes = text,audio",
    "reduce.method = pca",
    "similarity.w1 = 0.9",  # weights no longer sum to one
    "global.jobs = 0",
])
def test_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_error_names_line():
    with pytest.raises(ConfigError, match=r"cfg:2: unknown key"):
        parse_config("global.seed=1\nbogus.key=2\n", "cfg")


def test_dumps_round_trip(tmp_path):
    cfg = parse_config("global.seed=9\ntransform.target=32x16\nfeaturize.groups=API,TIME\n")
    p = tmp_path / "c.cfg"
    p.write_text(cfg.dumps())
    again = load_config(p)
    assert again.values == cfg.values
    assert set(again.values) == set(SCHEMA)
    none = parse_config("transform.target=none")
    assert parse_config(none.dumps()).values == none.values


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/x.cfg")


def test_stage_seeds_follow_global():
    a = parse_config("global.seed=5\ngbdt.a.seed=2")
    assert a.gbdt_params("a").seed == 7
    assert a.stage_seed("cluster.seed") == 5
