import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corner_nucleation import scaling
from corner_nucleation.corner_geometry import DegenerateCornerError
from corner_nucleation.scaling import (
    SweepConfig,
    breakdown_rows,
    fit_exponent,
    fit_power_law,
    load_config,
    read_sweep_csv,
    sweep,
    sweep_csv_text,
)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-5, 5))
def test_fit_recovers_exact_power_law(p, logc):
    V = np.logspace(-3, 6, 12)
    fr = fit_power_law(V, np.exp(logc) * V ** p)
    assert abs(fr.slope - p) < 1e-12
    assert fr.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_power_law([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        fit_power_law([1, 2, 3, 4], [1, 2, 0, 4])


def test_fit_window_is_inclusive():
    V = np.logspace(0, 3, 4)
    assert fit_power_law(V, V ** 0.5, window=(1.0, 1000.0)).points == 4


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(volumes=(2.0, 1.0))
    with pytest.raises(ValueError):
        SweepConfig(volumes=(0.0, 1.0))
    with pytest.raises(ValueError):
        SweepConfig(method="fem")
    cfg = SweepConfig()
    assert len(cfg.volumes) == 29 + 33
    assert cfg.volumes[0] == pytest.approx(1e-6) and cfg.volumes[-1] == pytest.approx(1e9)


def test_load_config(tmp_path):
    p = tmp_path / "sweep.cfg"
    p.write_text("# comment\nvolumes = logspace:1:3:3; 0.5\nmethod = analytic\nseed = 4\n")
    cfg = load_config(p, seed=9)
    assert cfg.volumes == (0.5, 10.0, 100.0, 1000.0)
    assert cfg.seed == 9
    p.write_text("bogus = 1\n")
    with pytest.raises(ValueError):
        load_config(p)


def test_sweep_rows_and_components():
    cfg = SweepConfig(volumes=(0.01, 0.1, 1.0, 10.0, 1e3))
    bds = sweep(cfg)
    assert [b.V for b in bds] == list(cfg.volumes)
    totals = [b.total for b in bds]
    assert all(a < b for a, b in zip(totals, totals[1:]))
    rows = breakdown_rows(bds[-1])
    assert [r["component"] for r in rows] == ["total", "interior", "layer", "austenite_face"]
    assert math.fsum(r["total"] for r in rows[1:]) == pytest.approx(rows[0]["total"], rel=1e-12)
    assert [r["component"] for r in breakdown_rows(bds[0])] == ["total", "small_volume"]


def test_sweep_refuses_degenerate_corner():
    cfg = SweepConfig(volumes=(10.0,), corner=((1, 0, 0), (0, 1, 0), (0, 0, 1)))
    with pytest.raises(DegenerateCornerError):
        sweep(cfg)


def test_csv_round_trip_and_determinism(tmp_path):
    cfg = SweepConfig(volumes=tuple(np.logspace(1, 4, 7)))
    text = sweep_csv_text(sweep(cfg))
    assert text == sweep_csv_text(sweep(cfg))
    assert text.splitlines()[0] == "V,R,method,component,interfacial,elastic,total"
    p = tmp_path / "s.csv"
    p.write_text(text)
    rows = read_sweep_csv(p)
    fr = fit_exponent(rows, "interior", (10, 1e4))
    assert 0.6 < fr.slope < 0.9


def test_corrupted_csv(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("V,R,method,component,interfacial,elastic,total\n1,2,analytic,total,x,1,1\n")
    with pytest.raises(ValueError):
        read_sweep_csv(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_sweep_csv(p)


def test_sweep_with_grid_populates_deviation(tmp_path):
    cfg = SweepConfig(volumes=(5.0, 10.0), method="both", grid=96)
    p = tmp_path / "s.csv"
    p.write_text(sweep_csv_text(sweep(cfg)))
    devs = scaling.quadrature_deviations(read_sweep_csv(p))
    assert len(devs) == 2 and all(d["deviation"] < 0.5 for d in devs)


def test_per_cell_constants_uniform():
    pc = scaling.per_cell_constants()
    assert pc["w52_spread_ok"]
    lo, hi = pc["elastic_over_w4_h"]
    assert hi / lo < 1 + 1e-12
