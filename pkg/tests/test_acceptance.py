"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete. Criterion 7 (strong duality) audits every
certification performed by criteria 1-6, so the tests in this module are
order-dependent and rely on pytest's in-file execution order.
"""

import numpy as np

from steercert.analytic import eve_lower_bound, pure_qudit_pg
from steercert.certify import certify_global, certify_local, certify_pm
from steercert.cli import _certify_point, presets
from steercert.qlin import basis_povm, dagger, kron, random_unitary
from steercert.scenario import (
    apply_loss,
    assemblage_from,
    fourier_and_computational,
    isotropic_state,
    mub_povms,
    pauli_xz,
    schmidt_state,
    werner_state,
)
from steercert.seesaw import random_povms, seesaw

LOG2_3 = float(np.log2(3.0))

# (label, p_guess, dual evaluation) pairs accumulated by criteria 1-6 and
# audited by criterion 7
_DUALITY_LEDGER: list[tuple[str, float, float]] = []


def _record(label, result, asm=None):
    value = result.functional.value_on(asm) if asm is not None else result.dual_value
    _DUALITY_LEDGER.append((label, result.p_guess, value))
    return result


def _report(criterion: str, checks: list[tuple[str, bool]]):
    failed = [name for name, ok in checks if not ok]
    if failed:
        print(f"[FAIL] {criterion}: {', '.join(failed)}")
        raise AssertionError(f"{criterion} failed: {failed}")
    print(f"[PASS] {criterion}")


def test_criterion_1_maximal_qubit_randomness():
    asm = assemblage_from(werner_state(1.0), pauli_xz())
    res = _record("werner v=1 xz", certify_local(asm, 0), asm)
    _report(
        "criterion 1 (H_min = 1 for the maximally entangled qubit pair)",
        [
            ("H_min = 1.000000 +- 1e-6", abs(res.h_min - 1.0) <= 1e-6),
            ("solver optimal", res.status.value == "optimal"),
        ],
    )


def test_criterion_2_steering_threshold():
    fig2 = presets()["fig2"]
    below = _certify_point(fig2.at_parameter(0.705))
    above = _certify_point(fig2.at_parameter(0.715))
    for v, res in ((0.705, below), (0.715, above)):
        asm = assemblage_from(werner_state(v), pauli_xz())
        _record(f"werner v={v} xz", res, asm)
    _report(
        "criterion 2 (steering threshold at v = 1/sqrt(2))",
        [
            ("H_min(0.705) <= 1e-6", below.h_min <= 1e-6),
            ("H_min(0.715) >= 1e-3", above.h_min >= 1e-3),
        ],
    )


def test_criterion_3_detection_efficiency_threshold():
    results = {}
    for eta in (0.49, 0.51, 1.0):
        povms = [apply_loss(p, eta) for p in pauli_xz()]
        asm = assemblage_from(werner_state(1.0), povms)
        results[eta] = _record(f"werner v=1 eta={eta}", certify_local(asm, 0), asm)
    _report(
        "criterion 3 (50% detection-efficiency threshold, qubits)",
        [
            ("H_min(eta=0.51) >= 1e-3", results[0.51].h_min >= 1e-3),
            ("H_min(eta=0.49) <= 1e-6", results[0.49].h_min <= 1e-6),
            ("H_min(eta=1) = 1 +- 1e-6", abs(results[1.0].h_min - 1.0) <= 1e-6),
        ],
    )


def test_criterion_4_qutrit_endpoint():
    base = mub_povms(3, 4)
    results = {}
    for eta in (0.49, 0.51, 1.0):
        povms = base if eta == 1.0 else [apply_loss(p, eta) for p in base]
        asm = assemblage_from(isotropic_state(3, 1.0), povms)
        results[eta] = _record(f"qutrit 4mub eta={eta}", certify_local(asm, 0), asm)
    _report(
        "criterion 4 (qutrit endpoint log2(3) and 50% threshold)",
        [
            ("H_min(eta=1) = log2(3) +- 1e-5", abs(results[1.0].h_min - LOG2_3) <= 1e-5),
            ("H_min(eta=0.51) >= 1e-3", results[0.51].h_min >= 1e-3),
            ("H_min(eta=0.49) <= 1e-6", results[0.49].h_min <= 1e-6),
        ],
    )


def test_criterion_5_prepare_and_measure():
    checks = []
    for v in (0.1, 0.5, 1.0):
        obs = assemblage_from(werner_state(v), pauli_xz())
        res = _record(f"pm werner v={v}", certify_pm(werner_state(v), pauli_xz(), 0), obs)
        checks.append((f"qubit H_min(v={v}) = 1 +- 1e-5", abs(res.h_min - 1.0) <= 1e-5))
    for v in (0.05, 0.3, 0.7, 1.0):
        obs = assemblage_from(isotropic_state(3, v), mub_povms(3, 2))
        res = _record(
            f"pm isotropic v={v}", certify_pm(isotropic_state(3, v), mub_povms(3, 2), 0), obs
        )
        checks.append(
            (f"qutrit p(v={v}) in [1/3, 0.339]", 1 / 3 - 1e-9 <= res.p_guess <= 0.339)
        )
    _report("criterion 5 (prepare-and-measure visibility independence)", checks)


def test_criterion_6_schmidt_oracle_equivalence():
    rng = np.random.default_rng(2026)
    checks = []
    for d in (2, 3, 4):
        povms = fourier_and_computational(d)
        worst = 0.0
        for _ in range(20):
            lam = rng.random(d) + 0.05
            lam /= lam.sum()
            asm = assemblage_from(schmidt_state(lam), povms)
            res = _record(f"schmidt d={d}", certify_local(asm, 0), asm)
            worst = max(worst, abs(res.p_guess - pure_qudit_pg(lam)))
        checks.append((f"d={d}: |p - 1/{d}| <= 1e-6 (worst {worst:.2e})", worst <= 1e-6))
    _report("criterion 6 (1/d oracle equivalence, 20 random Schmidt vectors per d)", checks)


def test_criterion_7_strong_duality_everywhere():
    assert _DUALITY_LEDGER, "criteria 1-6 must run before the duality audit"
    worst_label, worst = max(
        ((label, abs(p - v)) for label, p, v in _DUALITY_LEDGER), key=lambda t: t[1]
    )
    _report(
        f"criterion 7 (strong duality on {len(_DUALITY_LEDGER)} instances; "
        f"worst {worst:.2e} at {worst_label})",
        [("|primal - dual evaluation| <= 2e-8", worst <= 2e-8)],
    )


def test_criterion_8_dual_certificate_uniform_bound():
    # globally feasible optimal functional from the fig2 preset grid (the
    # v = 0.9 point; the v = 1 endpoint's exact certificate lives on a face
    # and is not a global witness - see the decisions notes)
    fig2 = presets()["fig2"]
    res = _certify_point(fig2.at_parameter(0.9))
    functional = res.functional
    assert functional.supports is None
    assert functional.feasibility_margin() >= -1e-8
    rng = np.random.default_rng(88)
    failures = 0
    for _ in range(100):
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho = g @ dagger(g)
        rho /= np.trace(rho).real
        povms = [basis_povm(random_unitary(2, rng)) for _ in range(2)]
        asm = assemblage_from(rho, povms)
        if functional.value_on(asm) < np.max(asm.outcome_probs(0)) - 1e-9:
            failures += 1
    _report(
        "criterion 8 (steering inequality bounds 100 random no-signalling assemblages)",
        [("value_on(asm) >= max_e P(e|x*)", failures == 0)],
    )


def test_criterion_9_seesaw_reproduction():
    theta = np.pi / 7
    rho = schmidt_state([np.cos(theta) ** 2, np.sin(theta) ** 2])
    reached = 0
    monotone = True
    for seed in range(5):
        trace = seesaw(
            rho, random_povms(2, 2, 2, seed), 0, max_iters=50, tol=1e-6, ceiling=1.0
        )
        series = trace.h_min_series()
        assert len(series) <= 50
        monotone &= bool(np.all(np.diff(series) >= -1e-9))
        reached += series[-1] >= 0.999
    _report(
        f"criterion 9 (see-saw from 5 random seeds at theta = pi/7; {reached}/5 reached 0.999)",
        [
            ("at least 4 of 5 reach H_min >= 0.999 within 50 iterations", reached >= 4),
            ("traces monotone up to 1e-9", monotone),
        ],
    )


def test_criterion_10_relaxation_ordering():
    bob_x = pauli_xz()[0]
    worst_global = -np.inf
    worst_pm = -np.inf
    worst_one = -np.inf
    for v in (0.2, 0.4, 0.6, 0.8, 1.0):
        for eta in (0.5, 0.65, 0.8, 0.9, 1.0):
            rho = werner_state(v)
            povms = pauli_xz() if eta == 1.0 else [apply_loss(p, eta) for p in pauli_xz()]
            asm = assemblage_from(rho, povms)
            p_local = certify_local(asm, 0).p_guess
            p_global = certify_global(asm, 0, bob_x).p_guess
            p_pm = certify_pm(rho, povms, 0).p_guess
            worst_global = max(worst_global, p_global - p_local)
            worst_pm = max(worst_pm, p_pm - p_local)
            worst_one = max(worst_one, p_local - 1.0)
    _report(
        "criterion 10 (global <= local <= 1 and PM <= local on the 5x5 grid)",
        [
            (f"global <= local (worst excess {worst_global:.2e})", worst_global <= 1e-8),
            (f"pm <= local (worst excess {worst_pm:.2e})", worst_pm <= 1e-8),
            (f"local <= 1 (worst excess {worst_one:.2e})", worst_one <= 1e-8),
        ],
    )


def test_criterion_11_sandwich_oracle():
    rng = np.random.default_rng(7)
    worst_gap = -np.inf
    worst_violation = -np.inf
    for k in range(20):
        lam = 0.05 + 0.4 * rng.random()
        u = kron(random_unitary(2, rng), random_unitary(2, rng))
        rho = u @ schmidt_state([1 - lam, lam]) @ dagger(u)
        povms = [basis_povm(random_unitary(2, rng)) for _ in range(2)]
        lower = eve_lower_bound(rho, povms, 0, samples=500, seed=k)
        p = certify_local(assemblage_from(rho, povms), 0).p_guess
        worst_violation = max(worst_violation, lower - p)
        worst_gap = max(worst_gap, p - lower)
    _report(
        "criterion 11 (explicit-strategy sandwich on 20 random instances)",
        [
            (f"lower bound never exceeds the SDP (worst {worst_violation:.2e})", worst_violation <= 1e-8),
            (f"SDP within 0.02 of the bound (worst gap {worst_gap:.2e})", worst_gap <= 0.02),
        ],
    )
