"""Randomness certification SDPs and their dual witnesses.

Four optimization problems are assembled here, all over an eavesdropper's
decompositions of the observed data:

* local steering: how well can Eve guess the untrusted outcome at the
  target input, over all no-signalling decompositions sigma^e_{a|x} of
  the observed assemblage;
* global steering: Eve guesses the pair (untrusted outcome, trusted
  outcome of a fixed known measurement) via sigma^{ee'}_{a|x};
* prepare-and-measure: the shared state is trusted too, so Eve's freedom
  shrinks to joint measurement operators M^e_{a|x} on the untrusted side;
* the dual of the steering problems, whose coefficients F_{a|x} form a
  steering inequality that upper-bounds every outcome probability at the
  target input uniformly over no-signalling assemblages.

Degeneracy handling: whenever an observed block sigma_{a|x} is rank
deficient (pure conditional states, lossless no-click rows), every PSD
summand is supported inside its range, so the corresponding variables are
compressed onto that support before solving. This exact facial reduction
restores strict feasibility, which the interior-point engine needs to
reach certification-grade accuracy; dropped rank-0 blocks reappear as
explicit zero matrices in the reported strategy. The dual witness is read
off the primal solve's consistency multipliers either way; on reduced
instances it certifies the bound on the observed faces (where the reduced
pair attains strong duality), and `dual_functional_direct` supplies
globally valid inequalities when a full-space witness is wanted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sdp
from .qlin import Povm, freeze, hermitian_basis, hermitian_inner, matrix_to_json, partial_trace
from .scenario import Assemblage, Scenario, assemblage_from

CONSISTENCY_TOL = 1e-8
SUPPORT_CUTOFF = 1e-11  # relative eigenvalue threshold for facial reduction


class CertificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class JointAssemblage:
    """Eve-resolved grid sigma_e[e, a, x]; the primal variable of the
    steering certification problems."""

    scenario: Scenario
    eve_alphabet: int
    sigma_e: np.ndarray

    def __init__(self, scenario: Scenario, eve_alphabet: int, sigma_e):
        sigma_e = freeze(np.asarray(sigma_e, dtype=complex))
        d = scenario.bob_dim
        expected = (eve_alphabet, scenario.n_outcomes, scenario.n_inputs, d, d)
        if sigma_e.shape != expected:
            raise ValueError(f"sigma_e has shape {sigma_e.shape}, expected {expected}")
        object.__setattr__(self, "scenario", scenario)
        object.__setattr__(self, "eve_alphabet", eve_alphabet)
        object.__setattr__(self, "sigma_e", sigma_e)

    def min_block_eig(self) -> float:
        return min(
            float(np.linalg.eigvalsh(0.5 * (blk + blk.conj().T))[0])
            for blk in self.sigma_e.reshape(-1, *self.sigma_e.shape[-2:])
        )

    def consistency_defect(self, asm: Assemblage) -> float:
        return float(np.max(np.abs(self.sigma_e.sum(axis=0) - asm.sigma)))

    def signalling_defect(self) -> float:
        marg = self.sigma_e.sum(axis=1)  # (n_E, m, d, d)
        return float(np.max(np.abs(marg - marg[:, :1])))

    def validate(self, asm: Assemblage, tol: float = CONSISTENCY_TOL) -> None:
        if self.min_block_eig() < -tol:
            raise ValueError(f"joint assemblage block eigenvalue below -{tol:g}")
        defect = self.consistency_defect(asm)
        if defect > tol:
            raise ValueError(f"joint assemblage inconsistent with observations by {defect:.3e}")
        sig = self.signalling_defect()
        if sig > tol:
            raise ValueError(f"joint assemblage signals by {sig:.3e}")

    def guess_probability(self, x_star: int, guess_outcome=None) -> float:
        """sum_e Tr[sigma^e_{a = guess(e) | x_star}] for this strategy."""
        outs = np.arange(self.eve_alphabet) if guess_outcome is None else guess_outcome
        return float(
            sum(
                np.trace(self.sigma_e[e, outs[e], x_star]).real
                for e in range(self.eve_alphabet)
            )
        )


@dataclass(frozen=True)
class SteeringFunctional:
    """Coefficients F[a, x] of a steering inequality witnessing the bound.

    For steering scenarios the stored multipliers G[e, x] certify dual
    feasibility: for every guess e, outcome a and input x the operator

        F[a, x] - delta_{a, guess_outcome[e]} delta_{x, x*} guess_target[e]
                - G[e, x] + delta_{x, x*} sum_x' G[e, x']

    is PSD (up to solver tolerance), which makes the functional's value a
    uniform upper bound on every outcome probability at x*.

    When the certification was facially reduced (rank-deficient observed
    blocks), the dual optimum of the full problem is not attained and the
    stored multipliers certify feasibility on the reduced faces only; the
    face isometries are kept in `supports` and `feasibility_margin`
    compresses onto them. `dual_functional_direct` produces globally
    feasible (slightly suboptimal) inequalities when those are needed.

    In the prepare-and-measure scenario the dual carries an extra constant
    from the completeness multipliers, stored in `offset`, and no G grid.
    """

    F: np.ndarray
    x_star: int
    G: np.ndarray | None = None
    guess_outcome: np.ndarray | None = None
    guess_target: np.ndarray | None = None
    offset: float = 0.0
    supports: tuple[tuple[np.ndarray, ...], ...] | None = None

    def value_on(self, asm) -> float:
        sigma = asm.sigma if isinstance(asm, Assemblage) else np.asarray(asm)
        if sigma.shape != self.F.shape:
            raise ValueError(f"assemblage grid {sigma.shape} does not match F {self.F.shape}")
        return float(np.real(np.sum(np.conj(self.F) * sigma))) + self.offset

    def feasibility_margin(self) -> float:
        """Most negative eigenvalue over the dual-feasibility operators
        (compressed onto the certificate's faces when facially reduced)."""
        if self.G is None or self.guess_outcome is None or self.guess_target is None:
            raise ValueError("no dual multipliers stored for this functional")
        n_a, m = self.F.shape[:2]
        g_sum = self.G.sum(axis=1)  # (n_guess, d, d)
        worst = np.inf
        for e in range(self.G.shape[0]):
            for a in range(n_a):
                for x in range(m):
                    h = self.F[a, x] - self.G[e, x]
                    if x == self.x_star:
                        h = h + g_sum[e]
                        if a == self.guess_outcome[e]:
                            h = h - self.guess_target[e]
                    if self.supports is not None:
                        v = self.supports[a][x]
                        if v.shape[1] == 0:
                            continue
                        h = v.conj().T @ h @ v
                    h = 0.5 * (h + h.conj().T)
                    worst = min(worst, float(np.linalg.eigvalsh(h)[0]))
        return worst

    def to_json(self) -> dict:
        data = {
            "x_star": int(self.x_star),
            "offset": float(self.offset),
            "F": [[matrix_to_json(self.F[a, x]) for x in range(self.F.shape[1])]
                  for a in range(self.F.shape[0])],
        }
        if self.G is not None:
            data["G"] = [[matrix_to_json(self.G[e, x]) for x in range(self.G.shape[1])]
                         for e in range(self.G.shape[0])]
        return data


@dataclass(frozen=True)
class CertificationResult:
    """Guessing probability, min-entropy and the dual witness of one solve."""

    p_guess: float
    h_min: float
    gap: float
    status: sdp.SolverStatus
    functional: SteeringFunctional
    x_star: int
    dual_value: float
    joint: JointAssemblage | None = None
    pm_measurements: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "p_guess": float(self.p_guess),
            "h_min": float(self.h_min),
            "gap": float(self.gap),
            "status": str(self.status),
            "x_star": int(self.x_star),
            "dual_value": float(self.dual_value),
            "functional": self.functional.to_json(),
        }


def min_entropy(p_guess: float) -> float:
    """Extractable uniform bits per run, -log2 of the guessing probability."""
    if p_guess <= 0.0:
        raise ValueError(f"guessing probability must be positive, got {p_guess}")
    return float(-np.log2(p_guess))


def _check_x_star(n_inputs: int, x_star: int) -> None:
    if not 0 <= x_star < n_inputs:
        raise ValueError(f"x_star = {x_star} outside the {n_inputs} available inputs")


def _support_isometry(mat: np.ndarray, cutoff: float) -> np.ndarray:
    """Columns spanning the range of a PSD matrix (eigenvalues above cutoff).

    Full-rank matrices return the identity so unreduced problems keep the
    plain, unrotated variables."""
    mat = 0.5 * (mat + mat.conj().T)
    vals, vecs = np.linalg.eigh(mat)
    keep = vals > cutoff
    if np.all(keep):
        return np.eye(mat.shape[0], dtype=complex)
    return vecs[:, keep]


def _identity_targets(n_guess: int, d: int) -> np.ndarray:
    return np.broadcast_to(np.eye(d, dtype=complex), (n_guess, d, d)).copy()


def _solve_steering(
    asm: Assemblage,
    x_star: int,
    guess_outcome: np.ndarray,
    guess_target: np.ndarray,
    solver_opts: dict | None,
) -> CertificationResult:
    """Shared engine for the local and global steering certifications."""
    sc = asm.scenario
    _check_x_star(sc.n_inputs, x_star)
    n_a, m, d = sc.n_outcomes, sc.n_inputs, sc.bob_dim
    n_guess = len(guess_outcome)
    basis = hermitian_basis(d)

    scale = max(float(np.linalg.eigvalsh(asm.sigma[a, x])[-1]) for a, x in np.ndindex(n_a, m))
    supports = [
        [_support_isometry(asm.sigma[a, x], SUPPORT_CUTOFF * scale) for x in range(m)]
        for a in range(n_a)
    ]
    ranks = [[supports[a][x].shape[1] for x in range(m)] for a in range(n_a)]
    reduced = any(ranks[a][x] < d for a, x in np.ndindex(n_a, m))

    block_ids: dict[tuple[int, int, int], int] = {}
    block_dims: list[int] = []
    for e in range(n_guess):
        for a in range(n_a):
            for x in range(m):
                if ranks[a][x] > 0:
                    block_ids[(e, a, x)] = len(block_dims)
                    block_dims.append(ranks[a][x])

    objective: list[np.ndarray | None] = [None] * len(block_dims)
    for e in range(n_guess):
        a = int(guess_outcome[e])
        key = (e, a, x_star)
        if key in block_ids:
            v = supports[a][x_star]
            objective[block_ids[key]] = v.conj().T @ guess_target[e] @ v

    constraints = []
    tags = []  # ("cons", a, x, r) / ("ns", e, x, r), aligned with constraints
    for a in range(n_a):
        for x in range(m):
            v = supports[a][x]
            for r, e_mat in enumerate(basis):
                comp = v.conj().T @ e_mat @ v
                coeffs = {
                    block_ids[(e, a, x)]: comp
                    for e in range(n_guess)
                    if (e, a, x) in block_ids
                }
                rhs = hermitian_inner(e_mat, asm.sigma[a, x])
                if not coeffs:
                    if abs(rhs) > CONSISTENCY_TOL:
                        raise CertificationError("assemblage support detection failed")
                    continue
                constraints.append(sdp.LinearConstraint(coeffs, rhs))
                tags.append(("cons", a, x, r))
    for e in range(n_guess):
        for x in range(m):
            if x == x_star:
                continue
            for r, e_mat in enumerate(basis):
                coeffs = {}
                for a in range(n_a):
                    if (e, a, x) in block_ids:
                        v = supports[a][x]
                        coeffs[block_ids[(e, a, x)]] = v.conj().T @ e_mat @ v
                    if (e, a, x_star) in block_ids:
                        v = supports[a][x_star]
                        prev = coeffs.get(block_ids[(e, a, x_star)], 0.0)
                        coeffs[block_ids[(e, a, x_star)]] = prev - v.conj().T @ e_mat @ v
                if coeffs:
                    constraints.append(sdp.LinearConstraint(coeffs, 0.0))
                    tags.append(("ns", e, x, r))

    problem = sdp.SdpProblem(tuple(block_dims), objective, constraints)
    sol = sdp.solve(problem, **(solver_opts or {}))
    if sol.status is sdp.SolverStatus.INFEASIBLE:
        raise CertificationError("certification problem infeasible: assemblage malformed")

    sigma_e = np.zeros((n_guess, n_a, m, d, d), dtype=complex)
    for (e, a, x), k in block_ids.items():
        v = supports[a][x]
        sigma_e[e, a, x] = v @ sol.primal[k] @ v.conj().T
    joint = JointAssemblage(sc, n_guess, sigma_e)

    f_grid = np.zeros((n_a, m, d, d), dtype=complex)
    g_grid = np.zeros((n_guess, m, d, d), dtype=complex)
    for y, tag in zip(sol.dual, tags):
        kind, i, x, r = tag
        if kind == "cons":
            f_grid[i, x] += y * basis[r]
        else:
            g_grid[i, x] -= y * basis[r]
    functional = SteeringFunctional(
        F=freeze(f_grid),
        x_star=x_star,
        G=freeze(g_grid),
        guess_outcome=np.asarray(guess_outcome, dtype=int),
        guess_target=freeze(np.asarray(guess_target)),
        supports=tuple(tuple(supports[a]) for a in range(n_a)) if reduced else None,
    )

    p_guess = sol.primal_value
    return CertificationResult(
        p_guess=p_guess,
        h_min=min_entropy(p_guess),
        gap=abs(p_guess - sol.dual_value),
        status=sol.status,
        functional=functional,
        x_star=x_star,
        dual_value=sol.dual_value,
        joint=joint,
    )


def certify_local(
    asm: Assemblage, x_star: int = 0, *, solver_opts: dict | None = None
) -> CertificationResult:
    """Optimal local guessing probability for the target input.

    Maximizes sum_e Tr[sigma^e_{a=e|x*}] over Eve-resolved assemblages that
    are PSD, reproduce the observed assemblage, and are no-signalling for
    each e. Eve's guess alphabet is the full outcome alphabet (including a
    loss outcome when present).
    """
    n_a = asm.scenario.n_outcomes
    d = asm.scenario.bob_dim
    return _solve_steering(
        asm, x_star, np.arange(n_a), _identity_targets(n_a, d), solver_opts
    )


def certify_global(
    asm: Assemblage,
    x_star: int,
    bob_povm: Povm,
    *,
    solver_opts: dict | None = None,
) -> CertificationResult:
    """Optimal probability of guessing the (untrusted, trusted) outcome pair.

    Eve holds one guess pair (e, e') per round; the primal variable is the
    pair-resolved assemblage sigma^{ee'}_{a|x} and the objective collects
    Tr[M_{b=e'} sigma^{ee'}_{a=e|x*}] for the fixed trusted measurement.
    """
    sc = asm.scenario
    if bob_povm.dim != sc.bob_dim:
        raise ValueError("trusted measurement dimension does not match the assemblage")
    n_b = bob_povm.n_outcomes
    n_guess = sc.n_outcomes * n_b
    guess_outcome = np.arange(n_guess) // n_b
    guess_target = np.stack([np.asarray(bob_povm[g % n_b]) for g in range(n_guess)])
    return _solve_steering(asm, x_star, guess_outcome, guess_target, solver_opts)


def certify_pm(
    rho: np.ndarray,
    povms: list[Povm],
    x_star: int = 0,
    *,
    solver_opts: dict | None = None,
) -> CertificationResult:
    """Guessing probability when the shared state itself is trusted.

    The channel to the untrusted side may be intercepted, so Eve controls
    joint operators M^e_{a|x} (outcome e kept by Eve, a forwarded) that must
    reproduce the observed assemblage on the trusted state, be no-signalling
    in e, complete, and PSD.
    """
    rho = np.asarray(rho, dtype=complex)
    if abs(np.trace(rho) - 1.0) > 1e-9:
        raise ValueError("trusted state must have unit trace")
    obs = assemblage_from(rho, povms)
    sc = obs.scenario
    _check_x_star(sc.n_inputs, x_star)
    d_a, d_b = povms[0].dim, sc.bob_dim
    n_e = n_a = sc.n_outcomes
    m = sc.n_inputs
    basis_b = hermitian_basis(d_b)
    basis_a = hermitian_basis(d_a)
    eye_a = np.eye(d_a, dtype=complex)
    rho_a = partial_trace(rho, (d_a, d_b), keep="A")
    # Alice-side coefficients with <coef_r, M> = Re Tr[(M (x) E_r) rho]
    coef_b = [partial_trace(np.kron(eye_a, e_mat) @ rho, (d_a, d_b), keep="A") for e_mat in basis_b]
    coef_b = [0.5 * (c + c.conj().T) for c in coef_b]

    # The aggregates sum_e M^e_{a|x} are pinned to the given POVM elements
    # exactly when the consistency map N -> Tr_A[(N (x) 1) rho] is injective;
    # only then is per-block support compression sound.
    lmap = np.array(
        [[hermitian_inner(e_b, partial_trace(np.kron(e_a, np.eye(d_b)) @ rho, (d_a, d_b), "B"))
          for e_a in basis_a] for e_b in basis_b]
    )
    svals = np.linalg.svd(lmap, compute_uv=False)
    injective = svals.size >= d_a * d_a and svals[d_a * d_a - 1] > 1e-10 * max(svals[0], 1.0)

    if injective:
        scale = max(
            float(np.linalg.eigvalsh(np.asarray(povms[x][a]))[-1]) for a, x in np.ndindex(n_a, m)
        )
        supports = [
            [_support_isometry(np.asarray(povms[x][a]), SUPPORT_CUTOFF * scale) for x in range(m)]
            for a in range(n_a)
        ]
    else:
        supports = [[np.eye(d_a, dtype=complex) for _ in range(m)] for _ in range(n_a)]

    block_ids: dict[tuple[int, int, int], int] = {}
    block_dims: list[int] = []
    for e in range(n_e):
        for a in range(n_a):
            for x in range(m):
                if supports[a][x].shape[1] > 0:
                    block_ids[(e, a, x)] = len(block_dims)
                    block_dims.append(supports[a][x].shape[1])

    objective: list[np.ndarray | None] = [None] * len(block_dims)
    for e in range(n_e):
        key = (e, e, x_star)
        if key in block_ids:
            v = supports[e][x_star]
            objective[block_ids[key]] = v.conj().T @ rho_a @ v

    constraints = []
    cons_tags = []  # (a, x, r) aligned with the consistency rows appended
    for a in range(n_a):
        for x in range(m):
            v = supports[a][x]
            for r, e_mat in enumerate(basis_b):
                comp = v.conj().T @ coef_b[r] @ v
                comp = 0.5 * (comp + comp.conj().T)
                coeffs = {
                    block_ids[(e, a, x)]: comp for e in range(n_e) if (e, a, x) in block_ids
                }
                rhs = hermitian_inner(e_mat, obs.sigma[a, x])
                if not coeffs:
                    if abs(rhs) > CONSISTENCY_TOL:
                        raise CertificationError("support detection failed for the trusted state")
                    continue
                constraints.append(sdp.LinearConstraint(coeffs, rhs))
                cons_tags.append((a, x, r))
    for e in range(n_e):
        for x in range(m):
            if x == x_star:
                continue
            for e_mat in basis_a:
                coeffs = {}
                for a in range(n_a):
                    if (e, a, x) in block_ids:
                        v = supports[a][x]
                        coeffs[block_ids[(e, a, x)]] = v.conj().T @ e_mat @ v
                    if (e, a, x_star) in block_ids:
                        v = supports[a][x_star]
                        prev = coeffs.get(block_ids[(e, a, x_star)], 0.0)
                        coeffs[block_ids[(e, a, x_star)]] = prev - v.conj().T @ e_mat @ v
                coeffs = {k: c for k, c in coeffs.items() if np.max(np.abs(c)) > 0.0}
                if coeffs:
                    constraints.append(sdp.LinearConstraint(coeffs, 0.0))
    completeness_values = []
    for x in range(m):
        for e_mat in basis_a:
            coeffs: dict[int, np.ndarray] = {}
            for e in range(n_e):
                for a in range(n_a):
                    if (e, a, x) in block_ids:
                        v = supports[a][x]
                        comp = v.conj().T @ e_mat @ v
                        k = block_ids[(e, a, x)]
                        coeffs[k] = coeffs.get(k, 0.0) + comp
            coeffs = {k: c for k, c in coeffs.items() if np.max(np.abs(c)) > 0.0}
            rhs = hermitian_inner(e_mat, eye_a)
            if not coeffs:
                if abs(rhs) > CONSISTENCY_TOL:
                    raise CertificationError("completeness unreachable on detected supports")
                continue
            completeness_values.append((len(constraints), rhs))
            constraints.append(sdp.LinearConstraint(coeffs, rhs))

    problem = sdp.SdpProblem(tuple(block_dims), objective, constraints)
    sol = sdp.solve(problem, **(solver_opts or {}))
    if sol.status is sdp.SolverStatus.INFEASIBLE:
        raise CertificationError("prepare-and-measure problem infeasible: inputs malformed")

    f_grid = np.zeros((n_a, m, d_b, d_b), dtype=complex)
    for y, (a, x, r) in zip(sol.dual, cons_tags):
        f_grid[a, x] += y * basis_b[r]
    offset = float(sum(sol.dual[i] * rhs for i, rhs in completeness_values))
    functional = SteeringFunctional(F=freeze(f_grid), x_star=x_star, offset=offset)

    pm_ops = np.zeros((n_e, n_a, m, d_a, d_a), dtype=complex)
    for (e, a, x), k in block_ids.items():
        v = supports[a][x]
        pm_ops[e, a, x] = v @ sol.primal[k] @ v.conj().T
    p_guess = sol.primal_value
    return CertificationResult(
        p_guess=p_guess,
        h_min=min_entropy(p_guess),
        gap=abs(sol.primal_value - sol.dual_value),
        status=sol.status,
        functional=functional,
        x_star=x_star,
        dual_value=sol.dual_value,
        pm_measurements=freeze(pm_ops),
    )


def dual_functional(
    asm: Assemblage, x_star: int = 0, *, solver_opts: dict | None = None
) -> SteeringFunctional:
    """Steering inequality certifying the local bound from above."""
    return certify_local(asm, x_star, solver_opts=solver_opts).functional


def dual_functional_direct(
    asm: Assemblage,
    x_star: int = 0,
    *,
    trace_budget: float | None = None,
    solver_opts: dict | None = None,
) -> tuple[SteeringFunctional, float]:
    """Solve the dual problem itself; returns (functional, optimal value).

    Kept as an independently assembled cross-check of the multiplier
    extraction (and as the certificate source on facially reduced
    instances, where multipliers only certify the face).
    """
    n_a = asm.scenario.n_outcomes
    d = asm.scenario.bob_dim
    functional, value, status = _direct_dual(
        asm, x_star, np.arange(n_a), _identity_targets(n_a, d),
        trace_budget=trace_budget, solver_opts=solver_opts,
    )
    if status is not sdp.SolverStatus.OPTIMAL:
        raise CertificationError(f"direct dual solve failed with status {status}")
    return functional, value


def _direct_dual(
    asm: Assemblage,
    x_star: int,
    guess_outcome: np.ndarray,
    guess_target: np.ndarray,
    *,
    trace_budget: float | None = None,
    solver_opts: dict | None = None,
) -> tuple[SteeringFunctional, float, sdp.SolverStatus]:
    """Dual problem in standard form via PSD splitting of the free variables.

    Minimizes sum <F, sigma_obs> subject to the PSD feasibility operators.
    F and G are split into differences of PSD blocks; the split leaves
    objective-flat directions (both parts growing together), so each pair
    is boxed by a per-pair trace cap with its own slack, which bounds the
    optimal face without touching the optimum. Caps escalate (and the
    problem is re-solved) if any of them binds.
    """
    sc = asm.scenario
    _check_x_star(sc.n_inputs, x_star)
    n_a, m, d = sc.n_outcomes, sc.n_inputs, sc.bob_dim
    n_guess = len(guess_outcome)
    basis = hermitian_basis(d)
    eye = np.eye(d, dtype=complex)
    others = [x for x in range(m) if x != x_star]

    n_h = n_guess * n_a * m
    n_f = n_a * m
    n_g = n_guess * len(others)

    def h_block(e, a, x):
        return (e * n_a + a) * m + x

    def fp_block(a, x):
        return n_h + a * m + x

    def fm_block(a, x):
        return n_h + n_f + a * m + x

    def gp_block(e, xi):
        return n_h + 2 * n_f + e * len(others) + xi

    def gm_block(e, xi):
        return n_h + 2 * n_f + n_g + e * len(others) + xi

    def cap_block(j):  # one scalar slack per split pair
        return n_h + 2 * n_f + 2 * n_g + j

    n_blocks = n_h + 2 * n_f + 2 * n_g + n_f + n_g
    cap = trace_budget if trace_budget is not None else 16.0 * d + 16.0

    # With rank-deficient observations the dual infimum is approached, not
    # attained, so the cap binds at every scale; each escalation trades a
    # ~1/cap improvement in value for conditioning. Keep the best solve.
    sol = None
    best_sol = None
    for _ in range(3):
        objective: list[np.ndarray | None] = [None] * n_blocks
        for a in range(n_a):
            for x in range(m):
                objective[fp_block(a, x)] = -np.asarray(asm.sigma[a, x])
                objective[fm_block(a, x)] = np.asarray(asm.sigma[a, x])

        constraints = []
        for e in range(n_guess):
            for a in range(n_a):
                for x in range(m):
                    for e_mat in basis:
                        coeffs = {
                            h_block(e, a, x): e_mat,
                            fp_block(a, x): -e_mat,
                            fm_block(a, x): e_mat,
                        }
                        if x != x_star:
                            xi = others.index(x)
                            coeffs[gp_block(e, xi)] = e_mat
                            coeffs[gm_block(e, xi)] = -e_mat
                        else:
                            for xi in range(len(others)):
                                coeffs[gp_block(e, xi)] = -e_mat
                                coeffs[gm_block(e, xi)] = e_mat
                        rhs = 0.0
                        if a == guess_outcome[e] and x == x_star:
                            rhs = -hermitian_inner(e_mat, guess_target[e])
                        constraints.append(sdp.LinearConstraint(coeffs, rhs))
        pair = 0
        for a in range(n_a):
            for x in range(m):
                constraints.append(sdp.LinearConstraint(
                    {fp_block(a, x): eye, fm_block(a, x): eye,
                     cap_block(pair): np.eye(1, dtype=complex)}, cap))
                pair += 1
        for e in range(n_guess):
            for xi in range(len(others)):
                constraints.append(sdp.LinearConstraint(
                    {gp_block(e, xi): eye, gm_block(e, xi): eye,
                     cap_block(pair): np.eye(1, dtype=complex)}, cap))
                pair += 1

        dims = tuple([d] * (n_h + 2 * n_f + 2 * n_g) + [1] * (n_f + n_g))
        sol = sdp.solve(sdp.SdpProblem(dims, objective, constraints), **(solver_opts or {}))
        if sol.status is sdp.SolverStatus.OPTIMAL and (
            best_sol is None or sol.primal_value > best_sol.primal_value
        ):
            best_sol = sol
        if sol.status is not sdp.SolverStatus.OPTIMAL:
            break
        min_slack = min(
            float(sol.primal[cap_block(j)][0, 0].real) for j in range(n_f + n_g)
        )
        if min_slack > 1e-3 * cap:
            break
        cap *= 10.0
    if best_sol is not None:
        sol = best_sol

    f_grid = np.empty((n_a, m, d, d), dtype=complex)
    for a in range(n_a):
        for x in range(m):
            f_grid[a, x] = sol.primal[fp_block(a, x)] - sol.primal[fm_block(a, x)]
    g_grid = np.zeros((n_guess, m, d, d), dtype=complex)
    for e in range(n_guess):
        for xi, x in enumerate(others):
            g_grid[e, x] = sol.primal[gp_block(e, xi)] - sol.primal[gm_block(e, xi)]
    functional = SteeringFunctional(
        F=freeze(f_grid),
        x_star=x_star,
        G=freeze(g_grid),
        guess_outcome=np.asarray(guess_outcome, dtype=int),
        guess_target=freeze(guess_target),
    )
    return functional, -sol.primal_value, sol.status
