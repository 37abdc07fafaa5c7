import math

import numpy as np
import pytest

from smallnoise import BUILTIN_MODEL_NAMES, ModelSpec, builtin_model, validate_model


def test_builtin_names_are_stable():
    assert BUILTIN_MODEL_NAMES == (
        "wright_fisher", "balancing_selection", "linear_feller",
    )


def test_unknown_model_rejected():
    with pytest.raises(ValueError, match="wright_fisher"):
        builtin_model("nosuch", 1.0)


@pytest.mark.parametrize("a", [-1.0, 0.0])
def test_nonpositive_growth_rejected(a):
    with pytest.raises(ValueError, match="positive"):
        builtin_model("wright_fisher", a)


@pytest.mark.parametrize("name", BUILTIN_MODEL_NAMES)
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_builtins_pass_validation(name, a):
    report = validate_model(builtin_model(name, a))
    assert report.ok, str(report)


@pytest.mark.parametrize("name", BUILTIN_MODEL_NAMES)
def test_origin_is_a_double_zero(name):
    model = builtin_model(name, 1.3)
    assert float(model.drift_at(0.0)) == 0.0
    assert float(model.diffusion_at(0.0)) == 0.0


@pytest.mark.parametrize("name,a", [(n, a) for n in BUILTIN_MODEL_NAMES
                                    for a in (0.5, 1.0, 2.0)])
def test_origin_slopes_match_declared_rates(name, a):
    # The declared a and b must be the actual derivatives at 0. The probe
    # step is tiny relative to the state scale so curvature cannot leak in.
    model = builtin_model(name, a)
    scale = model.drift_root if math.isfinite(model.drift_root) else 1.0
    h = 1e-8 * scale
    assert abs(float(model.drift_at(h)) / h - model.a) <= 1e-6 * model.a
    assert abs(float(model.diffusion_at(h)) / h - model.b) <= 1e-6 * model.b


def test_drift_vanishes_at_interior_root():
    for name in ("wright_fisher", "balancing_selection"):
        model = builtin_model(name, 1.0)
        assert float(model.drift_at(model.drift_root)) == pytest.approx(0.0, abs=1e-15)


def test_clamping_into_state_space(wf):
    assert wf.clamp(-0.5) == 0.0
    assert wf.clamp(2.0) == wf.state_upper
    xs = np.array([-1.0, 0.25, 3.0])
    assert np.all(wf.clamp(xs) == np.array([0.0, 0.25, 1.0]))


def test_superlinear_drift_fails_slope_condition():
    # f(x) = x(1+x) exceeds slope 1 at the origin immediately; the report
    # must name a concrete violating pair.
    spec = ModelSpec(
        name="superlinear",
        drift=lambda x: x * (1.0 + x),
        diffusion=lambda x: np.asarray(x, dtype=float) * 0.0 + np.abs(x),
        a=1.0,
        b=1.0,
        drift_root=math.inf,
        state_upper=math.inf,
    )
    report = validate_model(spec)
    assert not report.ok
    assert any("drift slope condition" in v for v in report.violations)
    assert any("(x,y)=" in v for v in report.violations)


def test_negative_diffusion_detected():
    spec = ModelSpec(
        name="bad_sigma",
        drift=lambda x: np.asarray(x, dtype=float),
        diffusion=lambda x: -np.asarray(x, dtype=float),
        a=1.0,
        b=1.0,
        drift_root=math.inf,
        state_upper=math.inf,
    )
    report = validate_model(spec)
    assert not report.ok
    assert any("diffusion" in v for v in report.violations)


def test_drift_not_vanishing_at_zero_detected():
    spec = ModelSpec(
        name="shifted",
        drift=lambda x: np.asarray(x, dtype=float) + 0.1,
        diffusion=lambda x: np.asarray(x, dtype=float),
        a=1.0,
        b=1.0,
        drift_root=math.inf,
        state_upper=math.inf,
    )
    report = validate_model(spec)
    assert not report.ok


def test_validation_report_prints_violations():
    report = validate_model(builtin_model("wright_fisher", 1.0))
    assert "wright_fisher" in str(report)
    bad = validate_model(ModelSpec(
        name="bad",
        drift=lambda x: np.asarray(x, dtype=float) * 2.0,
        diffusion=lambda x: np.asarray(x, dtype=float),
        a=1.0,  # slope understated: f(x) = 2x violates f(x) <= a*x
        b=1.0,
        drift_root=math.inf,
        state_upper=math.inf,
    ))
    assert not bad.ok
    assert bad.violations and bad.violations[0] in str(bad)


def test_grid_size_validation(wf):
    with pytest.raises(ValueError, match="grid_size"):
        validate_model(wf, grid_size=1)


def test_spec_field_validation():
    with pytest.raises(ValueError):
        ModelSpec(
            name="", drift=lambda x: x, diffusion=lambda x: x,
            a=1.0, b=1.0, drift_root=1.0, state_upper=1.0,
        )
    with pytest.raises(ValueError):
        ModelSpec(
            name="x", drift=lambda x: x, diffusion=lambda x: x,
            a=1.0, b=-1.0, drift_root=1.0, state_upper=1.0,
        )


def test_closed_form_flow_matches_known_values(wf):
    # One hand-checked point: starting at 1/2 the logistic flow reaches
    # e^t/(1+e^t) at time t.
    t = 1.3
    want = math.exp(t) / (1.0 + math.exp(t))
    got = float(wf.closed_form_flow(t, np.array(0.5)))
    assert got == pytest.approx(want, rel=1e-14)
