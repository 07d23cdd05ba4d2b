import numpy as np
import pytest

from steercert.certify import SteeringFunctional, dual_functional
from steercert.scenario import (
    Scenario,
    assemblage_from,
    pauli_xz,
    schmidt_state,
    werner_state,
)
from steercert.seesaw import (
    SeesawError,
    StopReason,
    optimize_measurements,
    random_povms,
    seesaw,
)

THETA = np.pi / 7
RHO_PI7 = schmidt_state([np.cos(THETA) ** 2, np.sin(THETA) ** 2])


def test_random_povms_reproducible_and_complete():
    a = random_povms(2, 2, 2, seed=7)
    b = random_povms(2, 2, 2, seed=7)
    for pa, pb in zip(a, b):
        for ea, eb in zip(pa.elements, pb.elements):
            assert np.array_equal(ea, eb)
    for povm in a:
        total = sum(povm.elements)
        assert np.max(np.abs(total - np.eye(2))) <= 1e-12


def test_random_povms_distinct_seeds_differ():
    a = random_povms(2, 2, 2, seed=1)
    b = random_povms(2, 2, 2, seed=2)
    distance = max(np.max(np.abs(ea - eb)) for pa, pb in zip(a, b) for ea, eb in zip(pa, pb))
    assert distance > 1e-3


def test_random_povms_fewer_outcomes_than_dimension():
    povms = random_povms(3, 2, 2, seed=0)
    for povm in povms:
        assert povm.n_outcomes == 2
        assert np.max(np.abs(sum(povm.elements) - np.eye(3))) <= 1e-12
    with pytest.raises(ValueError):
        random_povms(2, 1, 3, seed=0)


def test_optimize_measurements_constant_functional():
    # F = c*I makes the objective measurement independent: value c * n_inputs
    c = 0.7
    shape = Scenario(2, 2, 2)
    f = SteeringFunctional(
        F=np.broadcast_to(c * np.eye(2, dtype=complex), (2, 2, 2, 2)).copy(), x_star=0
    )
    povms = optimize_measurements(werner_state(0.9), f, shape)
    assert len(povms) == 2 and all(p.n_outcomes == 2 for p in povms)
    value = f.value_on(assemblage_from(werner_state(0.9), povms))
    assert value == pytest.approx(c * 2, abs=1e-8)


def test_optimize_measurements_cannot_beat_feasible_start():
    rho = werner_state(1.0)
    f = dual_functional(assemblage_from(rho, pauli_xz()), 0)
    povms = optimize_measurements(rho, f, Scenario(2, 2, 2))
    value = f.value_on(assemblage_from(rho, povms))
    assert value <= 0.5 + 1e-6  # pauli_xz already achieves 0.5


def test_optimize_measurements_rank_deficient_state():
    rng = np.random.default_rng(3)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1.0  # |00><00|
    f_grid = np.zeros((2, 2, 2, 2), dtype=complex)
    for a, x in np.ndindex(2, 2):
        h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        f_grid[a, x] = (h + h.conj().T) / 2
    f = SteeringFunctional(F=f_grid, x_star=0)
    povms = optimize_measurements(rho, f, Scenario(2, 2, 2))
    value = f.value_on(assemblage_from(rho, povms))
    expected = sum(min(f_grid[a, x, 0, 0].real for a in range(2)) for x in range(2))
    assert value == pytest.approx(expected, abs=1e-7)


def test_seesaw_product_state_stays_flat():
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1.0
    trace = seesaw(rho, random_povms(2, 2, 2, seed=5), 0, max_iters=4, tol=1e-6)
    assert np.all(trace.h_min_series() <= 1e-6)


def test_seesaw_from_optimal_start_does_not_degrade():
    trace = seesaw(werner_state(1.0), pauli_xz(), 0, max_iters=10, ceiling=1.0)
    assert trace.iterations[0].h_min == pytest.approx(1.0, abs=1e-7)
    assert trace.converged
    assert trace.stop_reason is StopReason.TOLERANCE
    assert np.all(trace.h_min_series() >= 1.0 - 1e-7)


def test_seesaw_reaches_one_bit_from_random_start():
    trace = seesaw(RHO_PI7, random_povms(2, 2, 2, seed=0), 0, max_iters=50, tol=1e-6, ceiling=1.0)
    hs = trace.h_min_series()
    assert hs[-1] >= 0.999
    assert np.all(np.diff(hs) >= -1e-9)


def test_seesaw_deterministic():
    t1 = seesaw(RHO_PI7, random_povms(2, 2, 2, seed=2), 0, max_iters=8)
    t2 = seesaw(RHO_PI7, random_povms(2, 2, 2, seed=2), 0, max_iters=8)
    assert np.array_equal(t1.h_min_series(), t2.h_min_series())


def test_seesaw_fixed_point():
    first = seesaw(RHO_PI7, random_povms(2, 2, 2, seed=3), 0, max_iters=40, ceiling=1.0)
    resumed = seesaw(RHO_PI7, list(first.final.povms), 0, max_iters=5, ceiling=1.0)
    assert abs(resumed.final.h_min - first.final.h_min) < 1e-6


def test_seesaw_with_loss_records_monotone_trace():
    trace = seesaw(RHO_PI7, random_povms(2, 2, 2, seed=1), 0, eta=0.9, max_iters=6)
    hs = trace.h_min_series()
    assert np.all(np.diff(hs) >= -1e-9)
    assert trace.iterations[0].functional.F.shape[0] == 3  # no-click row present


def test_trace_csv_export(tmp_path):
    trace = seesaw(werner_state(1.0), pauli_xz(), 0, max_iters=3, ceiling=1.0)
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iteration,p_guess,h_min"
    assert len(lines) == len(trace.iterations) + 1
    first = lines[1].split(",")
    assert int(first[0]) == 0
    assert float(first[2]) == pytest.approx(1.0, abs=1e-6)


def test_seesaw_validates_arguments():
    with pytest.raises(ValueError):
        seesaw(werner_state(1.0), pauli_xz(), 0, max_iters=0)
    with pytest.raises(ValueError):
        seesaw(werner_state(1.0), [], 0)


def test_seesaw_failure_retains_partial_trace(monkeypatch):
    import sys

    mod = sys.modules["steercert.seesaw"]

    calls = {"n": 0}
    original = mod.optimize_measurements

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] >= 2:
            raise RuntimeError("measurement optimization failed with status numerical_trouble")
        return original(*args, **kwargs)

    monkeypatch.setattr(mod, "optimize_measurements", flaky)
    with pytest.raises(SeesawError) as err:
        seesaw(RHO_PI7, random_povms(2, 2, 2, seed=4), 0, max_iters=10)
    assert len(err.value.trace.iterations) >= 1
