import json
import math

import numpy as np
import pytest

from smallnoise import (
    EXPERIMENT_NAMES,
    ExperimentConfig,
    ExperimentReport,
    MetricRow,
    metrics_csv_text,
    run_experiment,
    write_report,
)
from smallnoise.experiment import _monotone_beyond_se


def tiny_config(experiment, **overrides):
    base = dict(
        experiment=experiment,
        model="wright_fisher",
        a=1.0,
        epsilon_ladder=(1e-1, 3e-2),
        n_paths=300,
        t_horizon=1.0,
        t_grid=(0.0, 0.5, 1.0),
        seed=90210,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# ------------------------------------------------------------ configuration

def test_config_rejects_bad_split_exponent():
    with pytest.raises(ValueError, match=r"must lie in \(1/2,1\)"):
        tiny_config("theorem2_pathwise", c_split=1.2)
    with pytest.raises(ValueError, match=r"must lie in \(1/2,1\)"):
        tiny_config("theorem2_pathwise", c_split=0.5)


def test_config_rejects_unknown_experiment_and_model():
    with pytest.raises(ValueError):
        tiny_config("theorem3")
    with pytest.raises(ValueError):
        tiny_config("lemma_l1", model="moran")


def test_config_requires_strictly_decreasing_ladder():
    with pytest.raises(ValueError):
        tiny_config("lemma_l1", epsilon_ladder=(1e-2, 1e-2))
    with pytest.raises(ValueError):
        tiny_config("lemma_l1", epsilon_ladder=())
    with pytest.raises(ValueError):
        tiny_config("lemma_l1", epsilon_ladder=(1e-3, 1e-2))


def test_config_pins_unit_diffusion_slope():
    with pytest.raises(ValueError, match="unit diffusion slope"):
        tiny_config("lemma_l1", b=2.0)


def test_config_rejects_boolean_counts():
    with pytest.raises(ValueError):
        tiny_config("lemma_l1", n_paths=True)


def test_from_dict_names_unknown_and_missing_keys():
    with pytest.raises(ValueError, match="unknown config keys: flavor"):
        ExperimentConfig.from_dict(
            {"experiment": "lemma_l1", "model": "wright_fisher", "a": 1.0,
             "flavor": "salt"}
        )
    with pytest.raises(ValueError, match="missing required config keys: a"):
        ExperimentConfig.from_dict(
            {"experiment": "lemma_l1", "model": "wright_fisher"}
        )


def test_from_dict_round_trip():
    cfg = tiny_config("theorem1_fluid", x0=0.3, threads=2)
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg


def test_step_size_rule_and_override():
    cfg = tiny_config("lemma_l1")
    assert cfg.step_size(1e-2) == pytest.approx(min(1e-3, 1e-1 * 1e-2))
    assert cfg.step_size(1e-6) == pytest.approx(1e-5)
    fixed = tiny_config("lemma_l1", dt=7e-4)
    assert fixed.step_size(1e-2) == 7e-4


def test_config_hash_ignores_workers_only():
    cfg = tiny_config("lemma_l1", threads=1)
    other = tiny_config("lemma_l1", threads=4)
    assert cfg.config_hash() == other.config_hash()
    changed = tiny_config("lemma_l1", seed=90211)
    assert changed.config_hash() != cfg.config_hash()


# ------------------------------------------------------------ gate helpers

def test_monotone_beyond_se_gate():
    assert _monotone_beyond_se([3.0, 2.0, 1.0], [0.1, 0.1, 0.1])
    assert not _monotone_beyond_se([3.0, 2.0, 1.9], [0.1, 0.1, 0.1])
    assert not _monotone_beyond_se([3.0], [0.1])
    assert not _monotone_beyond_se([2.0, 3.0], [0.1, 0.1])


# ----------------------------------------------------------------- runners

@pytest.mark.parametrize("experiment", EXPERIMENT_NAMES)
def test_each_experiment_produces_a_complete_report(experiment):
    cfg = tiny_config(experiment)
    report = run_experiment(cfg)
    assert report.experiment == experiment
    assert isinstance(report.passed, bool)
    assert report.metrics and all(isinstance(r, MetricRow) for r in report.metrics)
    assert report.verdicts and all(
        isinstance(v, bool) for v in report.verdicts.values()
    )
    assert not report.failures
    assert report.wall_clock_seconds > 0.0
    assert report.config_hash == cfg.config_hash()
    for row in report.metrics:
        if row.stderr is not None:
            assert row.stderr >= 0.0
        assert math.isfinite(row.value)


def test_reports_are_deterministic_and_thread_independent():
    cfg = tiny_config("theorem2_distributional", n_paths=240)
    first = metrics_csv_text(run_experiment(cfg))
    again = metrics_csv_text(run_experiment(cfg))
    assert first == again
    threaded = tiny_config("theorem2_distributional", n_paths=240, threads=3)
    assert metrics_csv_text(run_experiment(threaded)) == first


def test_per_rung_failures_are_isolated():
    # dt larger than the horizon breaks every rung's stepping config; the
    # run must report the failures instead of raising.
    cfg = tiny_config("theorem1_fluid", dt=5.0)
    report = run_experiment(cfg)
    assert not report.passed
    assert len(report.failures) == 2
    assert all("epsilon=" in msg for msg in report.failures)
    assert not any(v for v in report.verdicts.values())


def test_lemma_gate_holds_at_test_scale():
    report = run_experiment(tiny_config("lemma_l1", n_paths=500))
    assert report.verdicts["l1_monotone_beyond_se"]
    assert report.verdicts["martingale_within_3_sigma"]
    assert report.passed


def test_distributional_documents_reference_size():
    report = run_experiment(tiny_config("theorem2_distributional"))
    assert report.diagnostics["reference_n"] == 20 * 300
    assert "w1_pairwise_beyond_se" in report.diagnostics


# ------------------------------------------------------------------ outputs

def test_metrics_csv_layout():
    row = MetricRow("lemma_l1", 1e-3, "l1_error_t1", 0.125, None, 7)
    report = ExperimentReport(
        experiment="lemma_l1",
        config={},
        config_hash="deadbeef",
        passed=True,
        verdicts={"ok": True},
        metrics=(row,),
    )
    text = metrics_csv_text(report)
    assert text.splitlines()[0] == "experiment,epsilon,metric,value,stderr,n"
    assert text.splitlines()[1] == "lemma_l1,0.001,l1_error_t1,0.125,,7"


def test_write_report_emits_stable_files(tmp_path):
    cfg = tiny_config("lemma_l1", n_paths=60)
    report = run_experiment(cfg)
    write_report(report, tmp_path)
    csv_text = (tmp_path / "metrics.csv").read_text()
    assert csv_text == metrics_csv_text(report)
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["experiment"] == "lemma_l1"
    assert payload["passed"] == report.passed
    assert payload["config"]["seed"] == 90210
    assert len(payload["metrics"]) == len(report.metrics)


def test_write_report_refuses_nonfinite_values(tmp_path):
    row = MetricRow("lemma_l1", None, "broken", math.nan, None, 1)
    report = ExperimentReport(
        experiment="lemma_l1",
        config={},
        config_hash="deadbeef",
        passed=False,
        verdicts={},
        metrics=(row,),
    )
    with pytest.raises(ValueError):
        write_report(report, tmp_path)
