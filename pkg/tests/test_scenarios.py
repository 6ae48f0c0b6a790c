from pathlib import Path

import numpy as np
import pytest

from noetherlab.dynamics import HamiltonianSystem, SpaceSplit, string
from noetherlab.ga import Algebra
from noetherlab.report import ConservationReport
from noetherlab.scenarios import (
    DEFAULTS,
    SCENARIOS,
    ConfigError,
    ScenarioConfig,
    build_scenario,
    dwell_conditions_check,
    load_config,
    parse_config,
    parse_map_spec,
    run_scenario,
    satisfied,
    thread_count,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_parse_config_grammar():
    text = "# comment\n\nm = 2.0   # trailing\nv_x = 1.0*e1 + 0.5*e2\n"
    assert parse_config(text) == [("m", "2.0", 3), ("v_x", "1.0*e1 + 0.5*e2", 4)]


@pytest.mark.parametrize("text, line, fragment", [
    ("m = 1\nnodes\n", 2, "expected 'key = value'"),
    ("m = 1\n\nbogus = 3\n", 3, "unknown key"),
    ("m = \n", 1, "empty key or value"),
    ("nodes = 3.5\n", 1, "bad int"),
    ("m = abc\n", 1, "bad float"),
    ("m = inf\n", 1, "bad float"),
    ("v_x = 2e9\n", None, None),
    ("B_y = 1.0*e5\n", 1, "bad multivector"),
    ("m = -1\n", 1, "must be positive"),
    ("nodes = 5\n", 1, "at least 9"),
    ("lower = 2.0\n", None, "upper must exceed lower"),
    ("B_y = 1.0*e12\n", 1, "field space"),
    ("x0 = 1.0*e3\n", 1, "spacetime"),
    ("B_x = 1.0*e1\n", 1, "grade-2"),
    ("D = 3\n", None, "needs D=2"),
    ("name = string-3d\n", 1, "not 'scalar-field-2d'"),
    ("rigid = 2\n", 1, "not used"),
])
def test_config_errors_carry_line_numbers(text, line, fragment):
    if fragment is None:
        with pytest.raises(ConfigError):
            ScenarioConfig.create("scalar-field-2d", text, source="f.cfg")
        return
    with pytest.raises(ConfigError, match=fragment) as exc:
        ScenarioConfig.create("scalar-field-2d", text, source="f.cfg")
    if line is not None:
        assert exc.value.line == line
        assert str(exc.value).startswith(f"f.cfg:{line}: ")


def test_unknown_scenario():
    with pytest.raises(ConfigError, match="unknown scenario"):
        ScenarioConfig.create("nope")


def test_overrides_last_wins():
    cfg = ScenarioConfig.create("nr-oscillator", "k = 2.0\n", ["k=3.0", "k = 4.0"])
    assert cfg["k"] == 4.0
    with pytest.raises(ConfigError):
        ScenarioConfig.create("nr-oscillator", "", ["k"])
    with pytest.raises(ConfigError):
        ScenarioConfig.create("nr-oscillator", "", ["name=string-3d"])


def test_nr_config_rejects_time_components():
    with pytest.raises(ConfigError, match="spatial"):
        ScenarioConfig.create("nr-oscillator", "", ["p0=1.0*e3"])


@pytest.mark.parametrize("name", SCENARIOS)
def test_shipped_configs_match_defaults(name):
    cfg = load_config(name, str(CONFIGS / f"{name}.cfg"))
    assert cfg.echo() == ScenarioConfig.create(name).echo()
    assert cfg.seed == 1


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("string-3d", str(tmp_path / "missing.cfg"))


def test_echo_is_json_ready():
    echo = ScenarioConfig.create("scalar-field-2d").echo()
    assert list(echo) == sorted(DEFAULTS["scalar-field-2d"])
    assert echo["B_y"] == "1*e34" and echo["x0"] == "0.5*e1 + 0.5*e2"
    assert isinstance(echo["nodes"], int)


def test_config_is_immutable():
    cfg = ScenarioConfig.create("string-3d")
    with pytest.raises(TypeError):
        cfg.params["Lambda"] = 2.0


def test_expected_verdicts_are_declared():
    sc = build_scenario(ScenarioConfig.create("nr-oscillator"))
    verdicts = {g.name: g.expected for g in sc.generators}
    assert verdicts == {"time-translation": True, "translation-v_x": True, "translation-e2": False, "galilei": True}
    sf = build_scenario(ScenarioConfig.create("scalar-field-2d"))
    assert {g.name: g.expected for g in sf.generators} == {
        "translation-x": True, "rotation-x": True, "rotation-y": True, "scaling": False}
    st = build_scenario(ScenarioConfig.create("string-3d"))
    assert sum(g.expected for g in st.generators) == 5 and len(st.generators) == 10


def test_satisfied_rule():
    ok = ConservationReport.from_residuals("a", [1e-11], 1e-10)
    marginal = ConservationReport.from_residuals("a", [5e-10], 1e-10)
    clear = ConservationReport.from_residuals("a", [1e-8], 1e-10)
    assert satisfied(ok, True) and not satisfied(ok, False)
    assert not satisfied(marginal, True) and not satisfied(marginal, False)
    assert satisfied(clear, False)


def test_dwell_conditions_examples():
    alg = Algebra(3)
    split = SpaceSplit(alg, [0, 1], [2])
    assert dwell_conditions_check(string(split), count=32).fails_clearly()
    flat = HamiltonianSystem(split, lambda q, P: float(q @ q))
    # a P-independent H_DW satisfies both conditions trivially
    assert dwell_conditions_check(flat, count=8, form="dw").max_residual == 0.0
    # read as a full Hamiltonian it lacks the P . I_x term
    assert dwell_conditions_check(flat, count=8).fails_clearly()
    with pytest.raises(ValueError):
        dwell_conditions_check(flat, count=1, form="other")


def test_map_specs():
    alg = Algebra(3)
    rng = np.random.default_rng(0)
    assert [n for n, _ in parse_map_spec("random:3", alg, rng)] == ["random-1", "random-2", "random-3"]
    assert len(parse_map_spec("random", alg, rng)) == 5
    (name, f), = parse_map_spec("rotation:0.5*e12", alg, rng)
    assert name == "rotation" and np.allclose(np.linalg.det(f.jacobian(np.zeros(3))), 1.0)
    assert np.allclose(parse_map_spec("translation:e1", alg, rng)[0][1]([0, 0, 0]), [1, 0, 0])
    assert np.allclose(parse_map_spec("scaling:2", alg, rng)[0][1]([1, 1, 1]), [2, 2, 2])
    for bad in ("random:0", "rotation:e1", "scaling:-1", "warp:1", "translation:e9"):
        with pytest.raises(ConfigError):
            parse_map_spec(bad, alg, rng)


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("NOETHERLAB_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("NOETHERLAB_THREADS", "0")
    assert thread_count() >= 1
    monkeypatch.setenv("NOETHERLAB_THREADS", "x")
    with pytest.raises(ConfigError):
        thread_count()
    monkeypatch.setenv("NOETHERLAB_THREADS", "-1")
    with pytest.raises(ConfigError):
        thread_count()


@pytest.mark.parametrize("name", SCENARIOS)
def test_default_scenarios_are_satisfied(name, scenario_results):
    res = scenario_results[name]
    bad = [r.line() for r in res.reports if not res.verdicts[r.name]]
    assert res.overall_pass, bad
    names = [r.name for r in res.reports]
    assert names == [c.name for c in res.scenario.checks]


def test_parallel_run_matches_serial(scenario_results):
    serial = scenario_results["string-3d"]
    par = run_scenario(ScenarioConfig.create("string-3d"), threads=4)
    assert [r.to_json() for r in par.reports] == [r.to_json() for r in serial.reports]


def test_unit_kinetic_coefficient_fails():
    res = run_scenario(ScenarioConfig.create("nr-oscillator", "", ["kinetic_coeff=1.0", "steps=1000"]), threads=1)
    assert not res.overall_pass
    failed = {n for n, ok in res.verdicts.items() if not ok}
    assert {"gen-symmetry:galilei", "drift:galilei"} <= failed
