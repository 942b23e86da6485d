"""Ratio and square-function sweeps, config parsing and CSV output."""
import math

import numpy as np
import pytest

from rieszlab.experiments import (REPORT_COLUMNS, SweepConfig, d_profile, fit_slopes,
                                  load_config, p_star, parse_config, reports_to_csv,
                                  reports_to_json, resolve_threads, rows_to_csv,
                                  run_ratio_sweep, run_square_sweep)
from rieszlab.factorization import closed_form_1d
from rieszlab.harmonics import monomial

SMALL = dict(grids=((1, 64, 16.0), (2, 32, 8.0), (3, 16, 8.0)), t_max=2.0)


def test_p_star():
    assert p_star(2.0) == 2.0 and p_star(3.0) == 3.0 and p_star(1.5) == pytest.approx(3.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(family="bogus")
    with pytest.raises(ValueError):
        SweepConfig(exponents=(1.0,))
    with pytest.raises(ValueError):
        SweepConfig(exponents=(math.inf,))
    with pytest.raises(ValueError):
        SweepConfig(pairs=((1, 2),))
    assert (1, 2) not in SweepConfig().cells_dk()
    assert SweepConfig().cells_dk() == [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (4, 1), (4, 2)]


def test_parse_config(tmp_path):
    text = """
# a comment
dims = 1, 2
orders = 1
exponents = 1.5 2 3
family = random_bandlimited
seeds = 3,4
grids = 1:64:16, 2:32:8
pairs = 2:1
harmonic = 1 1 0
"""
    cfg = parse_config(text)
    assert cfg.dims == (1, 2) and cfg.exponents == (1.5, 2.0, 3.0) and cfg.seeds == (3, 4)
    assert cfg.grid(2).N == 32 and cfg.grid(2).L == 8.0
    assert cfg.cells_dk() == [(2, 1)]
    with pytest.raises(ValueError):
        parse_config("nonsense = 1")
    with pytest.raises(ValueError):
        parse_config("dims 1")
    with pytest.raises(ValueError):
        parse_config("exponents = 0.5")
    path = tmp_path / "s.cfg"
    path.write_text("dims = 3\norders = 2\n")
    assert load_config(path).cells_dk() == [(3, 2)]


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("RLAB_THREADS", raising=False)
    assert resolve_threads(None) == 1
    assert resolve_threads(3) == 3
    monkeypatch.setenv("RLAB_THREADS", "5")
    assert resolve_threads(None) == 5
    monkeypatch.setenv("RLAB_THREADS", "x")
    with pytest.raises(ValueError):
        resolve_threads(None)


def test_single_mode_ratio_d1():
    cfg = SweepConfig(dims=(1,), orders=(1,), family="single_mode")
    reps = run_ratio_sweep(cfg)
    spec = cfg.grid(1)
    t_min = cfg.truncation(spec).values[0]
    for r in reps:
        assert r.ratio <= 1.0
        # sup over t of the sine-integral profile is reached at t_min
        assert r.ratio == pytest.approx(closed_form_1d(t_min / spec.L), abs=2e-3)


def test_error_row_for_empty_truncation_grid():
    cfg = SweepConfig(dims=(1,), orders=(1,), t_max=0.01, **{k: v for k, v in SMALL.items()
                                                               if k != "t_max"})
    reps = run_ratio_sweep(cfg)
    assert len(reps) == 3
    for r in reps:
        assert "error" in r.diagnostics and math.isnan(r.ratio)
    assert "ValueError" in reports_to_csv(reps)


def test_gaussian_ratios_in_band_small():
    cfg = SweepConfig(dims=(1, 2, 3), orders=(1, 2), **SMALL)
    for r in run_ratio_sweep(cfg):
        assert 0.2 <= r.ratio <= 10, r.row()
        assert r.norm_Rf > 0 and r.diagnostics["n_t"] > 1


def test_square_sweep_singleton_and_duplicate():
    cfg = SweepConfig(dims=(2,), orders=(1,), **SMALL)
    P = monomial((1,), 2)
    base = [r.ratio for r in run_ratio_sweep(cfg)]
    single = [r.ratio for r in run_square_sweep(cfg, [P])]
    double = [r.ratio for r in run_square_sweep(cfg, [P, P])]
    assert np.allclose(single, base, rtol=1e-12)
    assert np.allclose(double, base, rtol=1e-12)
    full = run_square_sweep(cfg)
    assert all(math.isfinite(r.ratio) and r.ratio > 0 for r in full)
    assert full[0].diagnostics["P"].count(";") == 1


def test_square_sweep_mismatched_harmonic_is_error_row():
    cfg = SweepConfig(dims=(2,), orders=(1,), **SMALL)
    reps = run_square_sweep(cfg, [monomial((1,), 3)])
    assert all("error" in r.diagnostics for r in reps)


def test_determinism_across_threads():
    cfg = SweepConfig(dims=(1, 2), orders=(1, 2), family="random_bandlimited", seeds=(0, 1),
                      **SMALL)
    a = reports_to_csv(run_ratio_sweep(cfg, threads=1))
    b = reports_to_csv(run_ratio_sweep(cfg, threads=4))
    assert a == b
    assert a == reports_to_csv(run_ratio_sweep(cfg, threads=2))


def test_refining_t_grid_never_decreases_ratio():
    base = dict(dims=(1, 2), orders=(1,), family="random_bandlimited", **SMALL)
    coarse = run_ratio_sweep(SweepConfig(t_ratio=2.0, **base))
    fine = run_ratio_sweep(SweepConfig(t_ratio=2 ** 0.5, **base))
    for c, f in zip(coarse, fine):
        assert f.ratio >= c.ratio * (1 - 1e-12)


def test_csv_json_and_tables():
    cfg = SweepConfig(dims=(1, 2), orders=(1,), **SMALL)
    reps = run_ratio_sweep(cfg)
    lines = reports_to_csv(reps).splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert len(lines) == 1 + len(reps) == 7
    assert '"ratio"' in reports_to_json(reps)
    prof = d_profile(reps)
    assert len(prof) == 3 and set(prof[0]) >= {"ratio_d1", "ratio_d2"}
    slopes = fit_slopes(reps)
    assert len(slopes) == 2 and all(s["points"] == 3 for s in slopes)
    assert rows_to_csv(prof).splitlines()[0].startswith("k,p,family,seed")
    assert rows_to_csv([]) == ""
