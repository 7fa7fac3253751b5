import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from entroscope.eigensolver import SolverOptions
from entroscope.hamiltonian import ModelSpec
from entroscope.lattice import Family, make_partition, make_preset_lattice
from entroscope.sweep import (
    CSV_HEADER,
    EntropyCurve,
    PointCache,
    SweepError,
    Thresholds,
    curve_to_csv,
    derivative,
    detect_transitions,
    hubbard_phase_scan,
    make_grid,
    parse_grid,
    run_sweep,
    solve_point,
)


def synthetic(grid, values, num_sites=1):
    n = len(grid)
    return EntropyCurve("x", np.asarray(grid, float), np.asarray(values, float), np.zeros(n), np.ones(n),
                        np.zeros(n, bool), num_sites, "synthetic")


def ising(n=10):
    return ModelSpec(Family.ISING_CHAIN, make_preset_lattice(Family.ISING_CHAIN, n))


def test_grid_helpers():
    g = make_grid(0.0, 2.0, 0.02)
    assert len(g) == 101 and g[-1] == 2.0 and g[50] == 1.0
    assert np.array_equal(parse_grid("0.025:1:0.025"), make_grid(0.025, 1.0, 0.025))
    with pytest.raises(ValueError):
        parse_grid("0:1")
    with pytest.raises(ValueError):
        make_grid(1.0, 0.0, 0.1)


def test_derivative_of_square_is_exact():
    grid = make_grid(0.0, 2.0, 0.1)
    d = derivative(grid**2, grid)
    assert d[10] == pytest.approx(2.0, abs=1e-12)
    # second-order one-sided stencils are exact for quadratics too
    assert np.allclose(d, 2 * grid, atol=1e-12)


def test_derivative_constant_and_errors():
    grid = make_grid(0.0, 1.0, 0.25)
    assert np.all(derivative(np.full(5, 3.0), grid) == 0.0)
    with pytest.raises(SweepError, match="5"):
        derivative(np.zeros(4), grid[:4])
    with pytest.raises(SweepError, match="uniform"):
        derivative(np.zeros(5), np.array([0.0, 0.1, 0.2, 0.4, 0.5]))


def test_single_bump():
    curve = synthetic([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    report = detect_transitions(curve, np.zeros(3))
    assert [(c.location, c.order, c.extremum_kind, c.source) for c in report.candidates] == [(1.0, 1, "max", "CURVE")]


def test_endpoints_never_reported():
    grid = make_grid(0.0, 1.0, 0.1)
    report = detect_transitions(synthetic(grid, -grid))
    assert report.candidates == []
    report = detect_transitions(synthetic(grid, (grid - 0.05) ** 2))
    assert all(0.0 < c.location < 1.0 for c in report.candidates)


def test_thresholds_filter_ripple():
    grid = make_grid(0.0, 1.0, 0.01)
    ripple = 1e-7 * np.sin(300 * grid)
    assert detect_transitions(synthetic(grid, 1.0 - grid + ripple)).candidates == []


def test_derivative_extremum_next_to_curve_extremum_suppressed():
    grid = make_grid(-1.0, 1.0, 0.05)
    curve = synthetic(grid, np.exp(-(grid**2) / 0.02))
    report = detect_transitions(curve)
    ones = report.of_order(1)
    assert len(ones) == 1 and ones[0].location == 0.0
    h = 0.05
    assert all(abs(c.location) > h for c in report.of_order(2))


def test_inflection_reported_as_second_order():
    grid = make_grid(0.0, 2.0, 0.02)
    curve = synthetic(grid, 1.0 - np.tanh(4 * (grid - 1.0)))
    report = detect_transitions(curve)
    assert [(c.order, c.extremum_kind, c.location) for c in report.candidates] == [(2, "min", 1.0)]


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 2**31 - 1))
def test_scale_invariance_relative_thresholds(factor, seed):
    rng = np.random.default_rng(seed)
    grid = make_grid(0.0, 1.0, 0.02)
    a = rng.uniform(0.5, 2, 3)
    values = a[0] * np.sin(6 * grid + a[1]) + a[2] * grid**2 + 3
    th = Thresholds(curve=1e-3, derivative=1e-3, relative=True)
    base = detect_transitions(synthetic(grid, values), thresholds=th)
    scaled = detect_transitions(synthetic(grid, values).scaled(factor), thresholds=th)
    key = lambda r: [(c.location, c.order, c.extremum_kind) for c in r.candidates]  # noqa: E731
    assert key(base) == key(scaled)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 8.0), st.floats(-2, 2), st.sampled_from([0.1, 0.05, 0.02]))
def test_trapezoid_reconstructs_curve(freq, quad, h):
    grid = make_grid(0.0, 2.0, h)
    f = np.sin(freq * grid) + quad * grid**2
    d = derivative(f, grid)
    fine = np.linspace(0, 2, 20001)
    f2 = -freq**2 * np.sin(freq * fine) + 2 * quad
    bound = 2 * h * np.max(np.abs(f2))
    assert abs(trapezoid(d, grid) - (f[-1] - f[0])) <= bound


def test_curve_validation():
    with pytest.raises(ValueError):
        synthetic([0.0, 0.2, 0.1], [0, 0, 0])
    with pytest.raises(ValueError):
        EntropyCurve("x", np.arange(3.0), np.zeros(2), np.zeros(3), np.zeros(3), np.zeros(3), 1, "")


def test_run_sweep_ising_curve():
    curve = run_sweep(ising(), "lambda", make_grid(0.0, 2.0, 0.1))
    assert curve.s_over_n[0] == pytest.approx(0.1, abs=1e-12)  # cat state: one bit over 10 sites
    assert np.all(curve.s_over_n >= 0)
    assert curve.energy[0] == pytest.approx(-10.0, abs=1e-10)
    assert not curve.degenerate.any()


def test_jordan_wigner_curve_has_single_dip():
    # fermion-mode entropy of the ED ground states (same quantity as the Gaussian path)
    curve = run_sweep(ising(), "lambda", make_grid(0.0, 2.0, 0.02), jordan_wigner=True)
    assert np.all(np.diff(curve.s_over_n) < 0)
    report = detect_transitions(curve)
    assert [(c.order, c.extremum_kind) for c in report.candidates] == [(2, "min")]
    assert abs(report.candidates[0].location - 1.0) <= 0.04


def test_gaussian_path_used_for_long_chains():
    spec = ising(40)
    rec = solve_point(spec.with_coupling("lambda", 1.0), make_partition(spec.lattice, range(0, 40, 2)))
    eps = 2 * np.sqrt(2 - 2 * np.cos((2 * np.arange(1, 21) - 1) * np.pi / 40))
    assert rec["energy"] == pytest.approx(-eps.sum(), abs=1e-10)
    with pytest.raises(SweepError):
        solve_point(ModelSpec(Family.HUBBARD_CHAIN, make_preset_lattice(Family.HUBBARD_CHAIN, 6)),
                    make_partition(make_preset_lattice(Family.HUBBARD_CHAIN, 6), [0, 2, 4]), method="gaussian")


def test_run_sweep_errors():
    with pytest.raises(SweepError, match="at least 5"):
        run_sweep(ising(), "lambda", [0.0, 0.5, 1.0])
    with pytest.raises(SweepError, match="no coupling"):
        run_sweep(ising(), "J2", make_grid(0, 1, 0.25))
    with pytest.raises(SweepError, match=r"lambda=0\.5"):
        run_sweep(ising(), "lambda", make_grid(0.5, 1.5, 0.25), opts=SolverOptions(max_iter=3, krylov_dim=3, tol=1e-14))


def test_determinism_and_csv(tmp_path):
    grid = make_grid(0.0, 2.0, 0.25)
    a = curve_to_csv(run_sweep(ising(8), "lambda", grid))
    b = curve_to_csv(run_sweep(ising(8), "lambda", grid, workers=3))
    assert a == b
    lines = a.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == len(grid) + 1
    assert lines[1].endswith(",") and lines[-1].endswith(",")
    assert not lines[2].endswith(",")
    assert all(float(row.split(",")[0]) == x for row, x in zip(lines[1:], grid))


def test_cache_coherence(tmp_path):
    cache = PointCache(tmp_path)
    spec = ModelSpec(Family.HUBBARD_CHAIN, make_preset_lattice(Family.HUBBARD_CHAIN, 6), {"U": 4.0})
    grid = make_grid(0.0, 1.0, 0.25)
    fresh = run_sweep(spec, "V", grid, cache=cache)
    files = sorted(tmp_path.rglob("*.json"))
    assert len(files) == len(grid)
    assert set(json.loads(files[0].read_text())) == {"param", "energy", "gap", "entropy_bits"}
    cached = run_sweep(spec, "V", grid, cache=cache)
    assert np.array_equal(fresh.entropy_bits, cached.entropy_bits)
    assert np.array_equal(fresh.energy, cached.energy) and np.array_equal(fresh.gap, cached.gap)
    assert fresh.fingerprint == cached.fingerprint
    # a different fixed coupling gets a different fingerprint
    other = run_sweep(spec.with_coupling("U", 5.0), "V", grid, cache=cache)
    assert other.fingerprint != fresh.fingerprint
    # the swept coupling's base value does not matter
    assert run_sweep(spec.with_coupling("V", 3.0), "V", grid, cache=cache).fingerprint == fresh.fingerprint


def test_cache_ignores_corrupt_entry(tmp_path):
    cache = PointCache(tmp_path)
    grid = make_grid(0.0, 1.0, 0.25)
    ref = run_sweep(ising(6), "lambda", grid, cache=cache)
    victim = next(tmp_path.rglob("*.json"))
    victim.write_text("{not json")
    again = run_sweep(ising(6), "lambda", grid, cache=cache)
    assert np.array_equal(ref.entropy_bits, again.entropy_bits)


def test_hubbard_scan_u4_and_u0_edge():
    rows = hubbard_phase_scan([4.0], make_grid(1.0, 3.0, 0.05), 6)
    assert abs(rows[0].first_order - 2.0) <= 0.05 + 1e-12
    assert rows[0].lower < rows[0].first_order < rows[0].upper
    # at U=0 nothing is reported at the V=0 edge
    rows = hubbard_phase_scan([0.0], make_grid(0.0, 1.0, 0.1), 6)
    assert all(c.location > 0.0 for c in rows[0].report.candidates)
    with pytest.raises(SweepError):
        hubbard_phase_scan([4.0], make_grid(0, 1, 0.25), 12)


def test_no_degeneracy_flag_near_v2():
    # measured: at N=6, U=4 the (3, 3) gap stays near 1.5 around V=2
    spec = ModelSpec(Family.HUBBARD_CHAIN, make_preset_lattice(Family.HUBBARD_CHAIN, 6), {"U": 4.0})
    curve = run_sweep(spec, "V", make_grid(1.8, 2.2, 0.05))
    assert not curve.degenerate.any()
    assert np.all(curve.gap > 1.0)


def test_report_dict():
    grid = make_grid(0.0, 2.0, 0.02)
    report = detect_transitions(synthetic(grid, 1.0 - np.tanh(4 * (grid - 1.0))))
    d = report.to_dict()
    assert d["schema_version"] == 1 and d["fingerprint"] == "synthetic"
    assert d["candidates"][0]["source"] == "DERIVATIVE"
