import json
import math
import os
from pathlib import Path

import pytest

import hgcavity as hc

PRESETS = Path(os.environ.get("HGCAV_PRESET_DIR", Path(__file__).resolve().parents[2] / "presets"))


def cavity():
    p = hc.CavityParams()
    p.length = 123e-6
    p.r1 = p.r2 = 0.2
    p.wavelength = 780.2e-9
    p.kappa = hc.mhz_to_rad_s(1.4)
    p.gamma = hc.mhz_to_rad_s(3.0)
    p.g0 = hc.mhz_to_rad_s(16.0)
    return p


def test_derived_waist():
    p = cavity()
    w = math.sqrt(780.2e-9 / (2 * math.pi) * math.sqrt(123e-6 * (2 * 0.2 - 123e-6)))
    assert hc.derive(p).waist == pytest.approx(w, rel=1e-9)


def test_mode_and_coupling():
    p = cavity()
    w0 = hc.derive(p).waist
    hg10 = hc.ModeSpec(1, 0, w0)
    gmax = hc.max_coupling(p, hg10)
    assert gmax == pytest.approx(p.g0 * math.sqrt(2) * math.exp(-0.5), rel=1e-6)
    assert hc.coupling(p, hg10, 0.0, 0.3 * w0) == pytest.approx(0.0, abs=1e-9)


def test_transmission_limits():
    p = cavity()
    det = hc.Detuning(0.0, 0.0)
    assert hc.transmission_ratio(0.0, det, p) == pytest.approx(1.0)
    assert hc.axial_average(0.0, det, p) == pytest.approx(1.0)
    assert hc.mode_selectivity(hc.mhz_to_rad_s(25.0), p) > 300


def test_simulate_and_fit():
    p = cavity()
    w0 = hc.derive(p).waist
    modes = {"hg01": hc.ModeSpec(0, 1, w0)}
    sch = hc.make_single_schedule("hg01", hc.Detuning(), -150e-6, 150e-6, 10e-6)
    rec = hc.simulate_transit(hc.Trajectory(w0, 0.0, 1.07), sch, modes, p, 1e6, 101)
    again = hc.TransitRecord.from_dict(rec.to_dict())
    assert again.counts() == rec.counts()
    fit = hc.fit_transit(rec, modes, p)
    assert isinstance(fit, dict)
    assert json.dumps(fit)


def test_errors_map_to_exceptions():
    p = cavity()
    w0 = hc.derive(p).waist
    with pytest.raises(hc.ZeroCouplingError):
        hc.equivalent_offsets(hc.ModeSpec(1, 0, w0), 0.0)
    with pytest.raises(hc.Error):
        hc.g2_of_stream([0] * 100, 1e-6, 10e-6)


def test_preset_validates_and_runs(tmp_path):
    text = (PRESETS / "spectrum.json").read_text()
    res = hc.validate_config(text, str(PRESETS))
    assert res["ok"], res["errors"]
    run = hc.run_config(text, tmp_path, str(PRESETS))
    assert run["exit_code"] == 0
    assert all(Path(f).exists() for f in run["files"])
