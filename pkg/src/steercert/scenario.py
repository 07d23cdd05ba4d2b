"""States, measurements and observed assemblages for steering experiments.

An assemblage is the grid of unnormalized conditional states prepared on
the trusted (Bob) side by the untrusted party's measurement choice x and
outcome a: sigma_{a|x} = Tr_A[(M_{a|x} (x) 1_B) rho]. The grid is stored
with shape (n_outcomes, n_inputs, d_B, d_B).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import sdp
from .qlin import (
    Povm,
    freeze,
    basis_povm,
    hermitian_basis,
    hermitian_inner,
    is_psd,
    kron,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
)

ASSEMBLAGE_TOL = 1e-9
LHS_TOL = 1e-8
MAX_DETERMINISTIC_STRATEGIES = 100_000


@dataclass(frozen=True)
class Scenario:
    """Shape of a steering experiment: inputs/outcomes for the untrusted
    side (including any loss outcome) and the trusted Hilbert dimension."""

    n_inputs: int
    n_outcomes: int
    bob_dim: int

    def __post_init__(self):
        for name in ("n_inputs", "n_outcomes", "bob_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class Assemblage:
    """Validated grid sigma[a, x] of unnormalized conditional states."""

    scenario: Scenario
    sigma: np.ndarray

    def __init__(self, scenario: Scenario, sigma, *, tol: float = ASSEMBLAGE_TOL):
        sigma = freeze(np.asarray(sigma, dtype=complex))
        expected = (scenario.n_outcomes, scenario.n_inputs, scenario.bob_dim, scenario.bob_dim)
        if sigma.shape != expected:
            raise ValueError(f"sigma has shape {sigma.shape}, expected {expected}")
        for a, x in np.ndindex(sigma.shape[:2]):
            if not is_psd(sigma[a, x], tol=tol):
                raise ValueError(f"sigma[{a}|{x}] is not PSD within {tol:g}")
        reduced = sigma.sum(axis=0)
        for x in range(1, scenario.n_inputs):
            if np.max(np.abs(reduced[x] - reduced[0])) > tol:
                raise ValueError("assemblage signals: sum_a sigma[a|x] depends on x")
        if abs(np.trace(reduced[0]).real - 1.0) > tol:
            raise ValueError(f"assemblage is not normalized: Tr = {np.trace(reduced[0]).real}")
        object.__setattr__(self, "scenario", scenario)
        object.__setattr__(self, "sigma", sigma)

    def reduced_state(self) -> np.ndarray:
        """Bob's marginal, independent of the input by no-signalling."""
        return self.sigma.sum(axis=0)[0]

    def outcome_probs(self, x: int) -> np.ndarray:
        return np.real(np.trace(self.sigma[:, x], axis1=1, axis2=2))

    def to_json(self) -> dict:
        return {
            "m_A": self.scenario.n_inputs,
            "n_A": self.scenario.n_outcomes,
            "d_B": self.scenario.bob_dim,
            "sigma": [[matrix_to_json(self.sigma[a, x]) for x in range(self.scenario.n_inputs)]
                      for a in range(self.scenario.n_outcomes)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Assemblage":
        scenario = Scenario(int(data["m_A"]), int(data["n_A"]), int(data["d_B"]))
        sigma = np.array(
            [[matrix_from_json(cell) for cell in row] for row in data["sigma"]], dtype=complex
        )
        return cls(scenario, sigma)


@dataclass(frozen=True)
class LhsResult:
    """Outcome of the local-hidden-state membership test."""

    is_lhs: bool
    robustness: float
    members: np.ndarray | None  # (n_strategies, d, d) when is_lhs


def bell_state(d: int = 2) -> np.ndarray:
    """Density matrix of the maximally entangled state sum_k |kk> / sqrt(d)."""
    vec = np.zeros(d * d, dtype=complex)
    vec[:: d + 1] = 1.0 / np.sqrt(d)
    return np.outer(vec, vec.conj())


def werner_state(v: float) -> np.ndarray:
    """Two-qubit mixture v |Phi+><Phi+| + (1 - v) I/4."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility v must lie in [0, 1], got {v}")
    return v * bell_state(2) + (1.0 - v) * np.eye(4) / 4.0


def isotropic_state(d: int, v: float) -> np.ndarray:
    """Mixture v |Phi+(d)><Phi+(d)| + (1 - v) I/d^2 of two qudits."""
    if d < 2:
        raise ValueError("isotropic states need d >= 2")
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility v must lie in [0, 1], got {v}")
    return v * bell_state(d) + (1.0 - v) * np.eye(d * d) / d**2


def schmidt_state(lambdas) -> np.ndarray:
    """Pure state sum_k sqrt(lambda_k) |kk> as a density matrix."""
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > 1e-9:
        raise ValueError("Schmidt coefficients must be a probability vector")
    d = lam.size
    vec = np.zeros(d * d, dtype=complex)
    vec[:: d + 1] = np.sqrt(np.clip(lam, 0.0, None))
    return np.outer(vec, vec.conj())


def pauli_xz() -> list[Povm]:
    """The two mutually unbiased qubit spin measurements, X first."""
    return mub_povms(2, 2)


def fourier_and_computational(d: int) -> list[Povm]:
    """Fourier-transform basis (outcome a has amplitudes w^{ak}/sqrt(d)) then
    the computational basis; mutually unbiased in every dimension."""
    if d < 2:
        raise ValueError("need d >= 2")
    omega = np.exp(2j * np.pi / d)
    ks = np.arange(d)
    fourier = omega ** np.outer(ks, ks) / np.sqrt(d)  # column a = |a~>
    return [basis_povm(fourier), basis_povm(np.eye(d, dtype=complex))]


def mub_povms(d: int, count: int) -> list[Povm]:
    """`count` pairwise mutually unbiased bases as projective POVMs.

    d = 2 supplies X, Z, Y (in that order); d = 3 supplies the Fourier basis,
    the computational basis and the two quadratically twisted Fourier bases.
    """
    if d == 2:
        s = 1.0 / np.sqrt(2.0)
        bases = [
            np.array([[s, s], [s, -s]], dtype=complex),  # X eigenbasis
            np.eye(2, dtype=complex),  # Z eigenbasis
            np.array([[s, s], [1j * s, -1j * s]], dtype=complex),  # Y eigenbasis
        ]
    elif d == 3:
        omega = np.exp(2j * np.pi / 3)
        ls = np.arange(3)
        bases = [omega ** np.outer(ls, ls) / np.sqrt(3.0), np.eye(3, dtype=complex)]
        for j in (1, 2):
            cols = np.empty((3, 3), dtype=complex)
            for k in range(3):
                cols[:, k] = omega ** ((j * ls * ls + k * ls) % 3) / np.sqrt(3.0)
            bases.append(cols)
    else:
        raise ValueError(f"no MUB construction supplied for d = {d}")
    if not 1 <= count <= len(bases):
        raise ValueError(f"requested {count} bases, have {len(bases)} for d = {d}")
    return [basis_povm(b) for b in bases[:count]]


def standard_povms(kind: str, *, d: int | None = None, count: int | None = None) -> list[Povm]:
    """Dispatcher over the named measurement families (used by the CLI)."""
    if kind == "pauli_xz":
        return pauli_xz()
    if kind == "mub":
        if d is None or count is None:
            raise ValueError("mub needs d and count")
        return mub_povms(d, count)
    if kind == "fourier_and_computational":
        if d is None:
            raise ValueError("fourier_and_computational needs d")
        return fourier_and_computational(d)
    raise ValueError(f"unknown measurement family {kind!r}")


def apply_loss(povm: Povm, eta: float) -> Povm:
    """Detector with efficiency eta: elements scaled by eta plus a no-click
    outcome (1 - eta) * I appended as the last outcome."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"detection efficiency must lie in [0, 1], got {eta}")
    d = povm.dim
    elements = [eta * e for e in povm.elements]
    elements.append((1.0 - eta) * np.eye(d, dtype=complex))
    return Povm(elements)


def assemblage_from(rho: np.ndarray, povms: list[Povm]) -> Assemblage:
    """Observed assemblage sigma_{a|x} = Tr_A[(M_{a|x} (x) 1_B) rho]."""
    rho = np.asarray(rho, dtype=complex)
    if not povms:
        raise ValueError("need at least one measurement")
    d_a = povms[0].dim
    n_outcomes = povms[0].n_outcomes
    if any(p.dim != d_a or p.n_outcomes != n_outcomes for p in povms):
        raise ValueError("all measurements must share dimension and outcome count")
    total = rho.shape[0]
    if total % d_a != 0:
        raise ValueError(f"state dimension {total} incompatible with Alice dimension {d_a}")
    d_b = total // d_a
    eye_b = np.eye(d_b, dtype=complex)
    sigma = np.empty((n_outcomes, len(povms), d_b, d_b), dtype=complex)
    for x, povm in enumerate(povms):
        for a, m in enumerate(povm.elements):
            sigma[a, x] = partial_trace(kron(m, eye_b) @ rho, (d_a, d_b), keep="B")
    return Assemblage(Scenario(len(povms), n_outcomes, d_b), sigma)


def deterministic_strategies(n_inputs: int, n_outcomes: int) -> np.ndarray:
    """All response functions lambda: x -> a, shape (n_outcomes^n_inputs, n_inputs)."""
    return np.array(list(itertools.product(range(n_outcomes), repeat=n_inputs)), dtype=int)


def lhs_test(asm: Assemblage, *, tol: float = LHS_TOL) -> LhsResult:
    """Decide membership in the local-hidden-state set.

    Solves the feasibility problem over hidden states indexed by the
    deterministic response functions, reporting the minimal uniform-noise
    weight t for which (asm + t * noise) / (1 + t) admits a decomposition.
    t <= tol means the assemblage itself is unsteerable.
    """
    sc = asm.scenario
    n_strat = sc.n_outcomes**sc.n_inputs
    if n_strat > MAX_DETERMINISTIC_STRATEGIES:
        raise ValueError(
            f"{sc.n_outcomes}^{sc.n_inputs} = {n_strat} deterministic strategies "
            f"exceeds the supported limit {MAX_DETERMINISTIC_STRATEGIES}"
        )
    strategies = deterministic_strategies(sc.n_inputs, sc.n_outcomes)
    d = sc.bob_dim
    basis = hermitian_basis(d)
    noise = np.eye(d) / (sc.n_outcomes * d)

    block_dims = (d,) * n_strat + (1,)
    t_block = n_strat
    objective: list[np.ndarray | None] = [None] * n_strat + [-np.eye(1, dtype=complex)]
    constraints = []
    for a in range(sc.n_outcomes):
        for x in range(sc.n_inputs):
            for e in basis:
                coeffs = {
                    lam: e for lam in range(n_strat) if strategies[lam, x] == a
                }
                coeffs[t_block] = -hermitian_inner(e, noise) * np.eye(1, dtype=complex)
                constraints.append(
                    sdp.LinearConstraint(coeffs, hermitian_inner(e, asm.sigma[a, x]))
                )
    solution = sdp.solve(sdp.SdpProblem(block_dims, objective, constraints))
    if solution.status is not sdp.SolverStatus.OPTIMAL:
        raise RuntimeError(f"LHS membership solve failed with status {solution.status}")
    robustness = max(0.0, -solution.primal_value)
    is_lhs = robustness <= tol
    members = None
    if is_lhs:
        members = np.stack([solution.primal[lam] for lam in range(n_strat)])
    return LhsResult(is_lhs=is_lhs, robustness=robustness, members=members)
