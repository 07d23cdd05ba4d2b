"""Measurement optimization and the alternating certification see-saw.

For a fixed shared state, certified randomness depends on the untrusted
measurements. Two solvable subproblems alternate:

* with measurements fixed, the certification SDP yields the inequality
  coefficients that witness the current bound (`certify_local`);
* with the inequality fixed, a second SDP picks the measurements that
  minimize the eavesdropper's witnessed bound (`optimize_measurements`).

Each step can only improve (or hold) the certified min-entropy, so the
recorded trace is monotone up to solver noise. With inefficient
detectors the loss channel is applied after each measurement update: the
loss is a device property, not something the optimization can redesign.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from . import sdp
from .certify import CertificationResult, SteeringFunctional, certify_local
from .qlin import Povm, dagger, hermitian_basis, hermitian_inner, partial_trace, random_unitary
from .scenario import Assemblage, Scenario, apply_loss, assemblage_from

# tighter-than-default solver targets: the monotonicity contract leaves only
# 1e-9 slack per step, which default-precision solves could consume
_SEESAW_SOLVER_OPTS = {"gap_tol": 1e-11, "feas_tol": 1e-10}


class StopReason(enum.Enum):
    TOLERANCE = "tolerance"
    MAX_ITERATIONS = "max_iterations"
    STALL = "stall"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


class SeesawError(RuntimeError):
    """Solver failure mid-loop; `trace` retains the iterations so far."""

    def __init__(self, message: str, trace: "SeesawTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SeesawIteration:
    h_min: float
    p_guess: float
    functional: SteeringFunctional
    povms: tuple[Povm, ...]


@dataclass(frozen=True)
class SeesawTrace:
    iterations: tuple[SeesawIteration, ...]
    converged: bool
    stop_reason: StopReason

    @property
    def final(self) -> SeesawIteration:
        return self.iterations[-1]

    def h_min_series(self) -> np.ndarray:
        return np.array([it.h_min for it in self.iterations])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "p_guess", "h_min"])
            for k, it in enumerate(self.iterations):
                writer.writerow([k, f"{it.p_guess:.12g}", f"{it.h_min:.12g}"])


def random_povms(d: int, m: int, n: int, seed: int) -> list[Povm]:
    """m Haar-random projective measurements with n outcomes in dimension d.

    Outcomes are rank-1 projectors onto random unitary columns; when n < d
    the last outcome absorbs the remaining d - n + 1 columns. Deterministic
    for a fixed seed.
    """
    if n > d:
        raise ValueError(f"projective generation needs n <= d, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    povms = []
    for _ in range(m):
        u = random_unitary(d, rng)
        elements = [np.outer(u[:, a], u[:, a].conj()) for a in range(n - 1)]
        rest = u[:, n - 1:]
        elements.append(rest @ rest.conj().T)
        povms.append(Povm(elements))
    return povms


def _restore_povm(elements: list[np.ndarray]) -> Povm:
    """Hermitize solver output and renormalize to exact completeness."""
    elements = [0.5 * (e + dagger(e)) for e in elements]
    total = sum(elements)
    vals, vecs = np.linalg.eigh(total)
    vals = np.maximum(vals, 1e-300)
    inv_sqrt = (vecs * (vals**-0.5)) @ vecs.conj().T
    return Povm([inv_sqrt @ e @ inv_sqrt for e in elements])


def optimize_measurements(
    rho: np.ndarray,
    functional: SteeringFunctional,
    shape: Scenario,
    *,
    solver_opts: dict | None = None,
) -> list[Povm]:
    """Measurements minimizing the witnessed bound sum Tr[(M_ax (x) F_ax) rho].

    Optimizes over complete sets of PSD elements, one block per (outcome,
    input); returns the minimizing measurements.
    """
    rho = np.asarray(rho, dtype=complex)
    d_b = shape.bob_dim
    if rho.shape[0] % d_b != 0:
        raise ValueError("state dimension incompatible with the trusted dimension")
    d_a = rho.shape[0] // d_b
    n_a, m = shape.n_outcomes, shape.n_inputs
    if functional.F.shape[:2] != (n_a, m):
        raise ValueError(
            f"functional grid {functional.F.shape[:2]} does not match shape ({n_a}, {m})"
        )
    basis_a = hermitian_basis(d_a)
    eye_a = np.eye(d_a, dtype=complex)

    def block(a: int, x: int) -> int:
        return a * m + x

    # Alice-side weights: Tr[(M (x) F) rho] = <weight(a, x), M>
    objective: list[np.ndarray | None] = []
    for a in range(n_a):
        for x in range(m):
            w = partial_trace(np.kron(eye_a, functional.F[a, x]) @ rho, (d_a, d_b), keep="A")
            objective.append(-0.5 * (w + dagger(w)))

    constraints = []
    for x in range(m):
        for e_mat in basis_a:
            coeffs = {block(a, x): e_mat for a in range(n_a)}
            constraints.append(sdp.LinearConstraint(coeffs, hermitian_inner(e_mat, eye_a)))

    problem = sdp.SdpProblem((d_a,) * (n_a * m), objective, constraints)
    sol = sdp.solve(problem, **(solver_opts or _SEESAW_SOLVER_OPTS))
    if sol.status is not sdp.SolverStatus.OPTIMAL:
        raise RuntimeError(f"measurement optimization failed with status {sol.status}")
    return [
        _restore_povm([sol.primal[block(a, x)] for a in range(n_a)]) for x in range(m)
    ]


def _strip_loss(functional: SteeringFunctional, n_ideal: int) -> SteeringFunctional:
    """Functional restricted to the conclusive outcomes; the no-click row
    contributes a measurement-independent constant under fixed loss."""
    return SteeringFunctional(F=functional.F[:n_ideal], x_star=functional.x_star)


def _smoothed(asm: Assemblage, delta: float) -> Assemblage:
    """Assemblage mixed with a weight-delta uniform-noise assemblage."""
    sc = asm.scenario
    noise = np.broadcast_to(
        np.eye(sc.bob_dim, dtype=complex) / (sc.bob_dim * sc.n_outcomes), asm.sigma.shape
    )
    return Assemblage(sc, (1.0 - delta) * asm.sigma + delta * noise)


def _stepping_functional(
    asm: Assemblage, res: CertificationResult, x_star: int, delta: float, opts: dict
) -> SteeringFunctional:
    """Globally valid inequality used to drive the measurement update.

    Unreduced certifications already carry one. Facially reduced ones only
    certify the observed faces, which cannot steer measurements whose
    assemblages leave those faces (and the full dual optimum is not
    attained there); instead, the optimal inequality of the noise-smoothed
    assemblage is used - globally feasible, directionally sharp, and
    suboptimal only at the O(delta) scale. The caller refines delta when
    progress stalls.
    """
    if res.functional.supports is None:
        return res.functional
    smoothed = certify_local(_smoothed(asm, delta), x_star, solver_opts=opts)
    return smoothed.functional


def seesaw(
    rho: np.ndarray,
    initial: list[Povm],
    x_star: int = 0,
    *,
    eta: float = 1.0,
    max_iters: int = 100,
    tol: float = 1e-6,
    ceiling: float | None = None,
    stall_window: int = 3,
    smoothing: float = 3e-2,
    min_smoothing: float = 1e-6,
    solver_opts: dict | None = None,
) -> SeesawTrace:
    """Alternate certification and measurement optimization from a starting
    measurement set, recording the certified min-entropy per round.

    Every measurement update is accepted only if re-certification does not
    worsen the guessing probability, so the recorded sequence is monotone
    by construction. Rejected or stagnating updates refine the smoothing
    weight of the stepping inequality (continuation toward the exact
    problem) before the loop gives up. Stops when the improvement drops
    below `tol` (Tolerance; requires the known analytic `ceiling` to have
    been reached when one is supplied), when refinement is exhausted short
    of the ceiling (Stall), or at `max_iters`.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if not initial:
        raise ValueError("need at least one starting measurement")
    opts = solver_opts or _SEESAW_SOLVER_OPTS
    povms = list(initial)
    n_ideal = povms[0].n_outcomes
    ideal_shape = Scenario(len(povms), n_ideal, rho.shape[0] // povms[0].dim)

    def certified(candidate: list[Povm]):
        measured = candidate if eta >= 1.0 else [apply_loss(p, eta) for p in candidate]
        asm = assemblage_from(rho, measured)
        return asm, certify_local(asm, x_star, solver_opts=opts)

    asm, res = certified(povms)
    iterations = [
        SeesawIteration(res.h_min, res.p_guess, res.functional, tuple(povms))
    ]
    converged = False
    stop_reason = StopReason.MAX_ITERATIONS
    small_steps = 0
    delta = smoothing
    for _ in range(max_iters - 1):
        accepted = None
        while accepted is None:
            try:
                functional = _stepping_functional(asm, res, x_star, delta, opts)
                candidate = optimize_measurements(
                    rho, _strip_loss(functional, n_ideal), ideal_shape, solver_opts=opts
                )
                cand_asm, cand_res = certified(candidate)
            except (RuntimeError, ValueError) as exc:
                partial = SeesawTrace(tuple(iterations), False, StopReason.MAX_ITERATIONS)
                raise SeesawError(f"solver failed mid-loop: {exc}", partial) from exc
            if cand_res.p_guess <= res.p_guess + 1e-10:
                accepted = (candidate, cand_asm, cand_res)
            elif delta > min_smoothing:
                delta /= 10.0
            else:
                break
        if accepted is None:
            at_ceiling = ceiling is None or res.h_min >= ceiling - tol
            converged = at_ceiling
            stop_reason = StopReason.TOLERANCE if at_ceiling else StopReason.STALL
            break
        povms, asm, res = accepted
        iterations.append(
            SeesawIteration(res.h_min, res.p_guess, res.functional, tuple(povms))
        )
        gain = iterations[-1].h_min - iterations[-2].h_min
        if abs(gain) < tol:
            small_steps += 1
            at_ceiling = ceiling is None or iterations[-1].h_min >= ceiling - tol
            if at_ceiling:
                converged = True
                stop_reason = StopReason.TOLERANCE
                break
            if delta > min_smoothing:
                delta /= 10.0  # refine before concluding a stall
                small_steps = 0
            elif small_steps >= stall_window:
                stop_reason = StopReason.STALL
                break
        else:
            small_steps = 0
            if gain < 1e-3 and delta > min_smoothing:
                delta /= 10.0  # slowing climb: tighten the stepping inequality
    return SeesawTrace(iterations=tuple(iterations), converged=converged, stop_reason=stop_reason)
