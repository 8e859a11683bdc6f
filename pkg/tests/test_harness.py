import json

import numpy as np
import pytest

from lacuna.harness import (
    PROVENANCE_COLUMNS,
    REPORT_COLUMNS,
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    NumericalError,
    default_config_path,
    ensure_finite,
    fit_growth_models,
    ordered_map,
    spawn_rngs,
)

EXPERIMENTS = ["verify-covering", "verify-ie", "sweep-norms", "kernel-decay", "pointwise", "cww",
               "almost-ortho", "maximal-avg", "a2", "dissect", "gen-directions", "apply"]


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_shipped_configs_validate(name):
    cfg = ExperimentConfig.default(name)
    assert cfg.experiment == name
    assert default_config_path(name).exists()


@pytest.mark.parametrize("bad, where", [
    ({"seed": 0}, "experiment"),
    ({"experiment": "a2"}, "seed"),
    ({"experiment": "nope", "seed": 0}, "experiment"),
    ({"experiment": "a2", "seed": -1}, "seed"),
    ({"experiment": "a2", "seed": 0, "grid": {"n": 5, "M": 8}}, "grid"),
    ({"experiment": "verify-ie", "seed": 0, "params": {"unknown": 1}}, "params"),
    ({"experiment": "kernel-decay", "seed": 0, "grid": {"n": 2, "M": 64}}, "directions"),
])
def test_invalid_configs(bad, where):
    with pytest.raises(ConfigError, match=where):
        ExperimentConfig.from_dict(bad)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.json")
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        ExperimentConfig.from_file(p)


def test_config_hash_is_canonical():
    a = ExperimentConfig.from_dict({"experiment": "dissect", "seed": 1, "grid": {"n": 2, "M": 64},
                                    "directions": {"kind": "equispaced", "count": 4}})
    b = ExperimentConfig.from_json('{"directions": {"count": 4, "kind": "equispaced"}, '
                                   '"grid": {"M": 64, "n": 2}, "seed": 1, "experiment": "dissect"}')
    assert a.hash() == b.hash() and len(a.hash()) == 16
    assert a.with_seed(2).hash() != a.hash()
    assert a.with_updates(profile="smooth_odd").profile == "smooth_odd"
    assert a.tolerance("missing", 0.5) == 0.5


def test_report_rows_and_checks():
    cfg = ExperimentConfig.default("verify-covering")
    rep = ExperimentReport("verify-covering", cfg)
    cols = REPORT_COLUMNS["verify-covering"]["columns"]
    rep.add_row(**{c: 1 for c in cols})
    with pytest.raises(KeyError):
        rep.add_row(bogus=1)
    assert rep.check("a", 0.5, "<=", 1.0)
    assert not rep.check("b", 2.0, "<=", 1.0, flag_only=True)
    assert rep.passed
    assert not rep.check("c", float("nan"), "<=", 1.0)
    assert not rep.passed and [c.name for c in rep.failed_checks()] == ["c"]
    assert rep.summary_line().startswith("verify-covering: FAIL")


def test_report_serialization(tmp_path):
    cfg = ExperimentConfig.default("verify-covering")
    rep = ExperimentReport("verify-covering", cfg)
    cols = REPORT_COLUMNS["verify-covering"]["columns"]
    rep.add_row(**{c: 0.1 * i for i, c in enumerate(cols)})
    rep.summary = {"x": np.float64(1.5), "arr": np.arange(3), "inf": float("inf")}
    csv_text = rep.to_csv()
    header = csv_text.splitlines()[0].split(",")
    assert header == cols + list(PROVENANCE_COLUMNS)
    assert repr(0.1 * 2) in csv_text and cfg.hash() in csv_text
    doc = json.loads(rep.to_json())
    assert doc["summary"] == {"x": 1.5, "arr": [0, 1, 2], "inf": "inf"}
    assert doc["provenance"]["config_hash"] == cfg.hash()
    csv_path, json_path = rep.write(tmp_path)
    assert csv_path.read_text() == csv_text
    assert not list(tmp_path.glob("*.tmp"))


def test_every_experiment_declares_columns():
    for name in EXPERIMENTS:
        if name in ("gen-directions", "apply"):
            continue
        assert REPORT_COLUMNS[name]["columns"], name


def test_ordered_map_keeps_order():
    items = list(range(20))
    assert ordered_map(lambda x: x * x, items, threads=4) == [x * x for x in items]
    assert ordered_map(lambda x: x, [], threads=4) == []


def test_spawned_rngs_are_independent_of_count():
    a = spawn_rngs(7, 3)
    b = spawn_rngs(7, 5)
    for x, y in zip(a, b):
        assert x.random() == y.random()


def test_ensure_finite():
    assert ensure_finite([1.0, 2.0], "ok").shape == (2,)
    with pytest.raises(NumericalError):
        ensure_finite([1.0, np.inf], "bad")


def test_growth_models_recover_sqrt_log():
    Ns = 2 ** np.arange(1, 9)
    r = 0.3 + 0.7 * np.sqrt(np.log(Ns))
    fits = fit_growth_models(Ns, r)
    assert fits["sqrt_log"]["coef"] == pytest.approx([0.3, 0.7])
    assert fits["sqrt_log"]["rss"] < 1e-20
    assert fits["sqrt_log"]["rss"] < fits["log"]["rss"] < fits["constant"]["rss"]
