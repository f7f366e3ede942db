import json
import math
from dataclasses import replace

import pytest

from ensemble_ghz.analyzer import PatternClass, enumerate_outcomes, ghz_ket, one_per_party
from ensemble_ghz.fock import ZeroNormError, basis_ket, dh, r
from ensemble_ghz.optics import DetectorModel, OutcomeBranch, ClickPattern
from ensemble_ghz.protocol import (
    ProtocolConfig,
    fidelity,
    run,
    run_exact,
    run_montecarlo,
    sweep,
)
from ensemble_ghz.source import SourceParams, system_state


def cfg(n=3, p=0.01, j_max=2, **kw):
    return ProtocolConfig(n=n, source=SourceParams(p, j_max), **kw)


def closed_form(n, p):
    return p**n / 2 ** (n - 1)


def test_signal_probability_n3():
    report = run_exact(cfg())
    assert report.p_signal == pytest.approx(2.5e-7, rel=1e-12)
    assert report.rate == pytest.approx(2.5, rel=1e-12)
    assert report.rate == report.config.f_p * report.p_signal
    assert report.order_of_magnitude == {"p_signal": 1e-6, "rate": 10.0}


def test_small_p_limit():
    report = run_exact(cfg(n=2, p=1e-4))
    assert report.p_signal / closed_form(2, 1e-4) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("p", [0.01, 0.1])
def test_closed_form_law(n, p):
    j_max = 1 if n == 5 else 2
    report = run_exact(cfg(n=n, p=p, j_max=j_max))
    assert report.p_signal == pytest.approx(closed_form(n, p), rel=1e-12)


def test_truncation_stability_and_growing_contamination():
    reports = [run_exact(cfg(n=2, p=0.2, j_max=j)) for j in (1, 2, 3)]
    signals = [rep.p_signal for rep in reports]
    assert signals == pytest.approx([signals[0]] * 3, rel=1e-12)
    contamination = [rep.p_coincidence - rep.p_signal for rep in reports]
    assert contamination[0] == pytest.approx(0.0, abs=1e-15)
    assert contamination[0] < contamination[1] < contamination[2]


def test_direction_symmetry():
    for n in (2, 3):
        a = run_exact(cfg(n=n, p=0.1, direction="ensemble-ghz"))
        b = run_exact(cfg(n=n, p=0.1, direction="photon-ghz"))
        assert a.p_signal == pytest.approx(b.p_signal, rel=1e-12)
        assert a.fidelity_postselected == pytest.approx(b.fidelity_postselected, abs=1e-12)
        assert a.fidelity_raw == pytest.approx(b.fidelity_raw, abs=1e-12)


def test_raw_fidelity_drops_with_contamination():
    report = run_exact(cfg(n=3, p=0.01, j_max=2))
    for cls in ("MPlus", "MMinus"):
        assert report.fidelity_raw[cls] < 1.0
        assert report.fidelity_postselected[cls] == pytest.approx(1.0, abs=1e-12)
    ideal = run_exact(cfg(n=3, p=0.01, j_max=1))
    assert ideal.fidelity_raw["MPlus"] == pytest.approx(1.0, abs=1e-12)


def test_fidelity_examples():
    target = basis_ket({r(1): 1})
    same = OutcomeBranch(1.0, ClickPattern(), target)
    assert fidelity(same, target) == (pytest.approx(1.0), None)
    other = OutcomeBranch(1.0, ClickPattern(), basis_ket({r(2): 1}))
    assert fidelity(other, target)[0] == 0.0
    with pytest.raises(ZeroNormError):
        fidelity(OutcomeBranch(0.0, ClickPattern(), basis_ket({}) * 0), target)


def test_fidelity_postselected_on_single_branch():
    n = 3
    state = system_state(n, SourceParams(0.01, 2))
    branches = enumerate_outcomes(state, n)
    pred = one_per_party(range(1, n + 1))
    target = ghz_ket(n, +1, "ensemble")
    b = next(b for b in branches if b.pattern == ClickPattern.of(dh(1), dh(2), dh(3)) and sum(b.detected) == 3)
    raw, post = fidelity(b, target, pred)
    assert raw < 1.0
    assert post == pytest.approx(1.0, abs=1e-12)


def test_efficiency_scales_signal_quadratically():
    base = run_exact(cfg(n=2, p=0.05)).p_signal
    for eta in (0.9, 0.5, 0.2):
        rep = run_exact(cfg(n=2, p=0.05, detector=DetectorModel(efficiency=eta)))
        assert rep.p_signal == pytest.approx(eta**2 * base, rel=1e-12)


def test_dark_counts_do_not_add_signal():
    rep = run_exact(cfg(n=2, p=0.05, detector=DetectorModel(dark_rate=0.01)))
    assert rep.p_signal == pytest.approx(closed_form(2, 0.05) * 0.99**2, rel=1e-12)
    assert rep.p_coincidence > rep.p_signal


def test_run_exact_rejects_montecarlo_config():
    with pytest.raises(ValueError):
        run_exact(cfg(engine="montecarlo"))
    with pytest.raises(ValueError):
        run_montecarlo(cfg())


@pytest.mark.parametrize(
    "kwargs",
    [dict(n=1), dict(f_p=0.0), dict(direction="sideways"), dict(engine="quantum"), dict(trials=0), dict(seed=-1)],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ProtocolConfig(**kwargs)


def test_config_dict_round_trip():
    c = cfg(n=4, p=0.2, detector=DetectorModel(True, 0.8, 0.01), engine="montecarlo", trials=7, seed=9)
    assert ProtocolConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c
    with pytest.raises(ValueError):
        ProtocolConfig.from_dict({"nn": 3})
    with pytest.raises(ValueError):
        ProtocolConfig.from_dict({"source": {"p": 0.1, "q": 1}})


def test_montecarlo_matches_exact_small():
    c = cfg(n=2, p=0.3, j_max=1, engine="montecarlo", trials=200_000, seed=7)
    mc = run_montecarlo(c)
    exact = run_exact(replace(c, engine="exact"))
    for k, prob in exact.class_probabilities.items():
        assert abs(mc.class_probabilities[k] - prob) <= 5 * mc.standard_errors[k]
    # vacuum-referenced coincidence weight at first order is exactly p^2/2
    assert exact.p_coincidence == pytest.approx(0.045, rel=1e-12)
    assert abs(mc.p_coincidence - 0.045) <= 5 * mc.standard_errors["coincidence"] * mc.norm_sq


def test_montecarlo_single_trial():
    mc = run_montecarlo(cfg(n=2, p=0.3, engine="montecarlo", trials=1, seed=3))
    assert len(mc.patterns) == 1
    assert mc.patterns[0].probability == 1.0


def test_montecarlo_deterministic_and_worker_independent():
    c = cfg(n=2, p=0.3, engine="montecarlo", trials=150_000, seed=123,
            detector=DetectorModel(efficiency=0.8, dark_rate=0.001))
    a = json.dumps(run_montecarlo(c).to_dict(), sort_keys=True)
    b = json.dumps(run_montecarlo(c).to_dict(), sort_keys=True)
    w = json.dumps(run_montecarlo(c, workers=3).to_dict(), sort_keys=True)
    assert a == b == w
    other = json.dumps(run_montecarlo(replace(c, seed=124)).to_dict(), sort_keys=True)
    assert other != a


def test_montecarlo_with_imperfect_detectors_matches_exact():
    det = DetectorModel(efficiency=0.7, dark_rate=0.02)
    c = cfg(n=2, p=0.3, engine="montecarlo", trials=300_000, seed=11, detector=det)
    mc = run_montecarlo(c)
    exact = run_exact(replace(c, engine="exact"))
    for k, prob in exact.class_probabilities.items():
        assert abs(mc.class_probabilities[k] - prob) <= 5 * mc.standard_errors[k]


def test_sweep_over_n():
    rows = sweep(cfg(p=0.01), "n", [2, 3, 4])
    got = [row.report.p_signal for row in rows]
    assert got == pytest.approx([5e-5, 2.5e-7, 1.25e-9], rel=1e-12)


def test_sweep_single_value_equals_run_exact():
    c = cfg(n=2, p=0.1)
    row = sweep(c, "p", [0.1])[0]
    assert json.dumps(row.report.to_dict()) == json.dumps(run_exact(c).to_dict())


def test_sweep_eta():
    rows = sweep(cfg(n=2, p=0.05), "eta", [1.0, 0.5])
    assert rows[1].report.p_signal == pytest.approx(0.25 * rows[0].report.p_signal, rel=1e-12)


def test_sweep_bad_value_is_recorded():
    rows = sweep(cfg(n=2), "p", [0.1, 2.0, 0.2])
    assert rows[0].report is not None and rows[2].report is not None
    assert rows[1].report is None and "p" in rows[1].error
    with pytest.raises(ValueError):
        sweep(cfg(), "q", [1])
    with pytest.raises(ValueError):
        sweep(cfg(), "p", [])


def test_run_dispatch():
    assert run(cfg(n=2)).p_signal is not None
    assert run(cfg(n=2, engine="montecarlo", trials=10)).p_signal is None


def test_report_pattern_rows_are_consistent():
    rep = run_exact(cfg(n=2, p=0.1))
    assert sum(row.probability for row in rep.patterns) == pytest.approx(1.0, abs=1e-12)
    for row in rep.patterns:
        assert row.weight == pytest.approx(row.probability * rep.norm_sq, rel=1e-15)
        if row.pattern_class is PatternClass.OTHER:
            assert row.fidelity_raw is None
    assert math.isfinite(rep.rate)
