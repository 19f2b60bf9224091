"""Configuration, reports and the command-line harness."""

from __future__ import annotations

import json
import textwrap

import pytest

from killsub.errors import ConfigError
from killsub.harness.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from killsub.harness.config import builtin_config_path, load_config
from killsub.harness.report import Table, format_cell, table_csv
from killsub.harness.statements import STATEMENTS, statement_for
from killsub.harness.suite import run_scenario, run_suite, scenario_rng

MODELS = """
models:
  E_05: {kind: e, tau0: 0.5}
  E_05_bad: {kind: e, tau0: 0.5, mutated: true}
  H2xR: {kind: product}
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def config_with(tmp_path, scenarios, extra=""):
    return write(tmp_path, "suite.yaml", MODELS + extra + "scenarios:\n" + textwrap.dedent(scenarios))


def test_builtin_config_loads():
    cfg = load_config(builtin_config_path())
    names = [sc["name"] for sc in cfg.scenarios]
    assert len(names) == len(set(names)) >= 20
    assert all("regression" in sc["tags"] for sc in cfg.scenarios)
    assert len(cfg.digest()) == 64


def test_unknown_key_names_file_and_path(tmp_path):
    path = config_with(tmp_path, """\
        - name: v
          command: verify
          model: E_05
          inputs: {n_point: 3}
        """)
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    msg = str(exc.value)
    assert str(path.resolve()) in msg and "inputs.n_point" in msg and "unknown key" in msg


def test_wrong_type_and_bad_choice(tmp_path):
    path = config_with(tmp_path, "- {name: v, command: verify, model: E_05, inputs: {n_points: many}}\n")
    with pytest.raises(ConfigError, match="n_points: expected"):
        load_config(path)
    path = config_with(tmp_path, "- {name: v, command: dance, model: E_05}\n")
    with pytest.raises(ConfigError, match="command"):
        load_config(path)


def test_unknown_model_and_duplicate_names(tmp_path):
    path = config_with(tmp_path, "- {name: v, command: verify, model: Nil}\n")
    with pytest.raises(ConfigError, match="unknown model 'Nil'"):
        load_config(path)
    path = config_with(tmp_path, "- {name: v, command: verify, model: E_05}\n"
                                 "- {name: v, command: verify, model: H2xR}\n")
    with pytest.raises(ConfigError, match="duplicate scenario name"):
        load_config(path)


def test_includes(tmp_path):
    write(tmp_path, "models.yaml", MODELS)
    main_cfg = write(tmp_path, "main.yaml", """\
        include: [models.yaml]
        scenarios:
        - {name: v, command: verify, model: E_05}
        """)
    assert load_config(main_cfg).models["E_05"]["tau0"] == 0.5
    write(tmp_path, "a.yaml", "include: [b.yaml]\n")
    write(tmp_path, "b.yaml", "include: [a.yaml]\n")
    with pytest.raises(ConfigError, match="circular include"):
        load_config(tmp_path / "a.yaml")
    write(tmp_path, "twice.yaml", "include: [models.yaml]\n" + MODELS)
    with pytest.raises(ConfigError, match="defined twice"):
        load_config(tmp_path / "twice.yaml")
    with pytest.raises(ConfigError, match="file not found"):
        load_config(tmp_path / "missing.yaml")


def test_invalid_yaml(tmp_path):
    path = write(tmp_path, "bad.yaml", "models: [unclosed\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(path)


def test_cli_exit_codes(tmp_path, capsys):
    good = config_with(tmp_path, "- {name: v, command: verify, model: E_05, inputs: {n_points: 5}}\n")
    assert main(["verify", "--config", str(good), "--out", str(tmp_path / "o")]) == EXIT_OK
    bad = write(tmp_path, "bad.yaml", "seed: [1]\n")
    assert main(["suite", "--config", str(bad)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["curvature", "--config", str(good), "--scenario", "v"]) == EXIT_CONFIG
    assert main(["verify", "--config", str(good), "--tol-scale", "0"]) == EXIT_CONFIG


def test_mutation_without_expectation_fails(tmp_path):
    path = config_with(tmp_path, """\
        - name: m
          command: verify
          model: E_05_bad
          tags: [regression]
          inputs: {n_points: 5, checks: [frame_agreement]}
        """)
    assert main(["suite", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_FAIL


def test_expected_failure_inverts_check(tmp_path):
    path = config_with(tmp_path, """\
        - name: m
          command: verify
          model: E_05_bad
          inputs: {n_points: 5, checks: [frame_agreement]}
          expect_fail: [frame_agreement]
        - name: ok
          command: verify
          model: E_05
          inputs: {n_points: 5, checks: [frame_agreement]}
          expect_fail: [frame_agreement]
        """)
    cfg = load_config(path)
    bad = run_scenario(cfg, "m")
    assert bad.passed and bad.checks[0].expected_failure
    # a control that unexpectedly passes makes the scenario fail
    assert not run_scenario(cfg, "ok").passed


def test_tau_value_needs_a_reference(tmp_path):
    bumpy = """  bumpy: {kind: expression, lambda: "2/(1 - x**2 - y**2)", omega: ["0.1*y", "0"]}\n"""
    path = config_with(tmp_path, """\
        - {name: default, command: verify, model: bumpy, inputs: {n_points: 3}}
        - {name: asked, command: verify, model: bumpy, inputs: {n_points: 3, checks: [tau_value]}}
        """, bumpy)
    cfg = load_config(path)
    default = run_scenario(cfg, "default")
    assert default.passed and "tau_value" not in [c.name for c in default.checks]
    asked = run_scenario(cfg, "asked")
    assert not asked.passed and asked.checks[0].detail["reason"].startswith("no expected tau")


def test_empty_suite(tmp_path):
    path = config_with(tmp_path, "- {name: v, command: verify, model: E_05}\n")
    suite = run_suite(load_config(path), out=tmp_path / "o")
    assert suite.passed and suite.reports == []
    assert "No scenarios" in (tmp_path / "o" / "suite_summary.md").read_text()


def test_report_files_and_tolerance_scale(tmp_path):
    path = config_with(tmp_path, "- {name: v, command: verify, model: E_05, tags: [regression],"
                                 " inputs: {n_points: 5, expected_tau: 0.5}}\n")
    cfg = load_config(path)
    suite = run_suite(cfg, out=tmp_path / "o")
    report = json.loads((tmp_path / "o" / "v.json").read_text())
    assert report["passed"] and report["config_hash"] == cfg.digest()
    assert (tmp_path / "o" / "suite_summary.csv").read_bytes().count(b"\r\n") == suite.n_checks + 1
    # a tiny tolerance scale makes the same run fail
    assert not run_scenario(cfg, "v", tol_scale=1e-12).passed


def test_scenario_rng_is_order_independent():
    a = scenario_rng(7, "alpha").uniform(size=3)
    b = scenario_rng(7, "beta").uniform(size=3)
    assert (a == scenario_rng(7, "alpha").uniform(size=3)).all()
    assert not (a == b).all()


def test_csv_formatting():
    tab = Table("t", ["a", "b", "c", "d"])
    tab.add(1, 0.1 + 0.2, True, None)
    assert table_csv(tab) == "a,b,c,d\r\n1,0.3,true,\r\n"
    assert format_cell(float("nan")) == "nan" and format_cell(float("-inf")) == "-inf"
    with pytest.raises(ValueError):
        tab.add(1, 2)


def test_every_check_has_a_statement():
    assert statement_for("classification[direction=0.0000]") == STATEMENTS["classification"]
    assert all(STATEMENTS.values())
