import json
import math

import pytest

import prizegrowth as pg

SPEC = {
    "n_disciplines": 1,
    "topics_per_discipline": 40,
    "treated_fraction": 0.1,
    "first_year": 1980,
    "n_years": 31,
    "prize_year_min": 1995,
    "prize_year_max": 1995,
    "delta": {"publications": 0.5},
    "ramp": "constant",
    # low dispersion keeps the matched counterfactual tight on a 40-topic panel
    "level_sd": 0.15,
    "trend_sd": 0.003,
    "noise_sd": 0.04,
    "seed": 7,
}


@pytest.fixture(scope="module")
def panel(tmp_path_factory):
    art = pg.generate(json.dumps(SPEC))
    d = tmp_path_factory.mktemp("panel")
    (d / "trajectories.csv").write_text(art["trajectories_csv"])
    (d / "events.csv").write_text(art["events_csv"])
    return pg.load_panel(d / "trajectories.csv", d / "events.csv")


@pytest.fixture(scope="module")
def match_json(panel):
    return pg.match(panel)


def test_version():
    assert pg.__version__


def test_transforms():
    assert math.isclose(pg.pct_growth(0.3232), 0.3815, abs_tol=1e-3)
    assert pg.pct_growth(0.0) == 0.0
    assert pg.growth_transform(0.0) == 0.0
    assert math.isclose(pg.growth_transform(99.0), math.log(100.0))


def test_stats_kernels():
    assert pg.shannon_entropy([0.25] * 4) == 2.0
    assert pg.binomial_two_sided_p(10, 5) == 1.0
    d, p = pg.ks_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert d == 0.0 and p == 1.0
    assert pg.jaccard(["a", "b", "c"], ["b", "c", "d"]) == 0.5


def test_generate_is_deterministic():
    a = pg.generate(json.dumps(SPEC))
    b = pg.generate(json.dumps(SPEC))
    assert a["trajectories_csv"] == b["trajectories_csv"]
    assert a["events_csv"] == b["events_csv"]


def test_panel_shape(panel):
    assert panel.n_topics == 40
    assert panel.n_events == 4
    assert "publications" in panel.measures
    assert panel.disciplines == ["disc00"]


def test_match_assigns_five_peers(panel, match_json):
    parsed = json.loads(match_json)
    assert len(parsed["assignments"]) == 4
    for treated, peers in parsed["assignments"].items():
        assert panel.is_treated(treated)
        assert len(peers) == 5
        assert treated not in peers


def test_effect_detected(panel, match_json):
    series = json.loads(pg.delta_series(panel, match_json, "publications"))
    by_t = {p["t"]: p for p in series["points"]}
    assert by_t[10]["delta"] > 0.3
    assert by_t[-5]["ci_low"] < 0.0 < by_t[-5]["ci_high"]


def test_did_agrees(panel, match_json):
    beta3, se, p = pg.did_beta3(panel, match_json, "publications")
    assert abs(beta3 - 0.5) < 0.2
    assert p < 0.05


def test_input_errors_are_value_errors():
    with pytest.raises(ValueError):
        pg.load_panel("no_such_file.csv", "also_missing.csv")
    with pytest.raises(ValueError):
        pg.shannon_entropy([0.5, 0.1])
