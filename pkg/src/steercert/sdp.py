"""Dense primal-dual interior-point engine for block Hermitian SDPs.

Standard form handled here:

    maximize    sum_k <C_k, X_k>         (<A, B> = Re Tr[A^dag B])
    subject to  sum_k <A_ik, X_k> = b_i  for each constraint i
                X_k >= 0                 (PSD, one block per k)

Complex Hermitian blocks are mapped to real symmetric ones through
``realify``: A -> [[Re A, -Im A], [Im A, Re A]]. The map preserves
positive semidefiniteness but doubles traces, so all inner products pick
up a factor 2. That factor is absorbed exactly once, at the assembly
boundary of this module (right-hand sides are doubled going in, values
and residuals are halved coming out); callers never see it.

The algorithm is infeasible-start path following with Nesterov-Todd
scaling and a Mehrotra-style predictor-corrector, solving the dense
Schur complement by Cholesky. A presolve pass removes linearly dependent
constraint rows (rank-revealing QR, pivot threshold 1e-10) and checks
that the removed rows are consistent; dual multipliers for removed rows
are reported as zero, which keeps the returned ``dual`` vector a valid
certificate in the original row order.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .qlin import hermiticity_defect, is_hermitian, matrix_to_json


class SolverStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_TROUBLE = "numerical_trouble"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class LinearConstraint:
    """One scalar equality sum_k <coeffs[k], X_k> = rhs (coeffs Hermitian)."""

    coeffs: dict[int, np.ndarray]
    rhs: float


@dataclass
class SdpProblem:
    """Block-diagonal Hermitian SDP in the standard (maximization) form."""

    block_dims: tuple[int, ...]
    objective: list[np.ndarray | None]
    constraints: list[LinearConstraint]

    def validate(self) -> None:
        if len(self.objective) != len(self.block_dims):
            raise ValueError("objective must provide one entry per block (None for zero)")
        for k, c in enumerate(self.objective):
            if c is None:
                continue
            d = self.block_dims[k]
            if c.shape != (d, d):
                raise ValueError(f"objective block {k} has shape {c.shape}, expected ({d}, {d})")
            if not is_hermitian(c, tol=1e-10):
                raise ValueError(f"objective block {k} is not Hermitian")
        for i, con in enumerate(self.constraints):
            for k, a in con.coeffs.items():
                d = self.block_dims[k]
                if a.shape != (d, d):
                    raise ValueError(f"constraint {i} block {k} has shape {a.shape}, expected ({d}, {d})")
                if not is_hermitian(a, tol=1e-10):
                    raise ValueError(f"constraint {i} block {k} is not Hermitian (defect {hermiticity_defect(a):.2e})")

    def to_debug_json(self) -> dict:
        """Problem dump (blocks, constraints, rhs) for offline inspection."""
        return {
            "block_dims": list(self.block_dims),
            "objective": [None if c is None else matrix_to_json(c) for c in self.objective],
            "constraints": [
                {
                    "coeffs": {str(k): matrix_to_json(a) for k, a in con.coeffs.items()},
                    "rhs": float(con.rhs),
                }
                for con in self.constraints
            ],
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_debug_json(), fh)


@dataclass
class SdpSolution:
    primal: list[np.ndarray]
    dual: np.ndarray
    dual_slacks: list[np.ndarray]
    primal_value: float
    dual_value: float
    gap: float
    status: SolverStatus
    iterations: int
    primal_residual: float = np.inf
    dual_residual: float = np.inf
    dropped_rows: tuple[int, ...] = field(default_factory=tuple)


def realify(a: np.ndarray) -> np.ndarray:
    """Real symmetric image [[Re A, -Im A], [Im A, Re A]] of a Hermitian A.

    A is PSD iff the image is PSD; Tr[image] = 2 Tr[A].
    """
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a, tol=1e-9):
        raise ValueError("realify requires a Hermitian matrix")
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def derealify(m: np.ndarray) -> np.ndarray:
    """Recover the Hermitian matrix whose realification best matches ``m``."""
    d = m.shape[0] // 2
    re = 0.5 * (m[:d, :d] + m[d:, d:])
    im = 0.5 * (m[d:, :d] - m[:d, d:])
    h = re + 1j * im
    return 0.5 * (h + h.conj().T)


def _svec_indices(dim: int):
    ii, jj = [], []
    for j in range(dim):
        for i in range(j, dim):
            ii.append(i)
            jj.append(j)
    ii = np.array(ii)
    jj = np.array(jj)
    scale = np.where(ii == jj, 1.0, np.sqrt(2.0))
    return ii, jj, scale


def _svec(mats: np.ndarray, idx) -> np.ndarray:
    ii, jj, scale = idx
    return mats[..., ii, jj] * scale


def _unsvec(vec: np.ndarray, dim: int, idx) -> np.ndarray:
    ii, jj, scale = idx
    out = np.zeros((dim, dim))
    vals = vec / scale
    out[ii, jj] = vals
    out[jj, ii] = vals
    return out


def _independent_rows(mat: np.ndarray, b: np.ndarray, pivot_tol: float, consistency_tol: float):
    """Select a full-rank subset of rows; report dropped rows and consistency."""
    m = mat.shape[0]
    if m == 0:
        return np.array([], dtype=int), np.array([], dtype=int), True, 0.0
    _, r, piv = sla.qr(mat.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag[0] if diag.size else 0.0
    if scale == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > pivot_tol * scale))
    keep = np.sort(piv[:rank])
    drop = np.sort(piv[rank:])
    violation = 0.0
    if drop.size:
        if rank == 0:
            violation = float(np.max(np.abs(b[drop])))
        else:
            coef, *_ = np.linalg.lstsq(mat[keep].T, mat[drop].T, rcond=None)
            violation = float(np.max(np.abs(b[drop] - coef.T @ b[keep])))
    return keep, drop, violation <= consistency_tol, violation


def _step_to_boundary(chol_inv: np.ndarray, delta: np.ndarray) -> float:
    """sup {alpha : M + alpha*Delta >= 0} given the inverse factor L^-1 of M."""
    w = chol_inv @ delta @ chol_inv.T
    w = 0.5 * (w + w.T)
    lam_min = float(np.linalg.eigvalsh(w)[0])
    if lam_min >= 0.0:
        return np.inf
    return -1.0 / lam_min


def solve(
    problem: SdpProblem,
    *,
    max_iters: int = 200,
    gap_tol: float = 1e-9,
    gap_accept: float = 1e-8,
    feas_tol: float = 1e-9,
    feas_accept: float = 1e-8,
    step_frac: float = 0.98,
    verbose: bool = False,
) -> SdpSolution:
    """Solve the SDP; the returned status honestly reflects termination.

    ``gap_tol``/``feas_tol`` are the targets the iteration aims for;
    ``gap_accept``/``feas_accept`` are the thresholds a solution must meet
    to be declared Optimal.
    """
    problem.validate()
    n_blocks = len(problem.block_dims)
    dims = [2 * d for d in problem.block_dims]
    idx = {d: _svec_indices(d) for d in set(dims)}

    cmats = []
    for k in range(n_blocks):
        c = problem.objective[k]
        cmats.append(np.zeros((dims[k], dims[k])) if c is None else realify(c))

    m = len(problem.constraints)
    if m == 0:
        raise ValueError("a well-formed problem needs at least one constraint")
    asv = [np.zeros((m, dims[k] * (dims[k] + 1) // 2)) for k in range(n_blocks)]
    b = np.zeros(m)
    for i, con in enumerate(problem.constraints):
        b[i] = 2.0 * con.rhs
        for k, coeff in con.coeffs.items():
            asv[k][i] = _svec(realify(coeff), idx[dims[k]])

    b_scale = max(1.0, float(np.max(np.abs(b)))) if m else 1.0
    keep, drop, consistent, violation = _independent_rows(
        np.hstack(asv), b, pivot_tol=1e-10, consistency_tol=feas_accept * b_scale
    )

    def _package(xs, y_red, zs, status, iters, pres, dres):
        y = np.zeros(m)
        if y_red is not None:
            y[keep] = y_red
        primal = [derealify(x) for x in xs]
        slacks = [derealify(z) for z in zs]
        pval = 0.5 * sum(float(np.sum(c * x)) for c, x in zip(cmats, xs))
        dval = 0.5 * float(b @ y)
        gap = abs(pval - dval) / (1.0 + abs(pval))
        return SdpSolution(
            primal=primal,
            dual=y,
            dual_slacks=slacks,
            primal_value=pval,
            dual_value=dval,
            gap=gap,
            status=status,
            iterations=iters,
            primal_residual=pres,
            dual_residual=dres,
            dropped_rows=tuple(int(i) for i in drop),
        )

    zero_xs = [np.zeros((d, d)) for d in dims]
    if not consistent:
        return _package(zero_xs, None, zero_xs, SolverStatus.INFEASIBLE, 0, violation, np.inf)

    asv_red = [a[keep] for a in asv]
    b_red = b[keep]
    mr = len(keep)

    def op_a(xs):
        out = np.zeros(mr)
        for k in range(n_blocks):
            out += asv_red[k] @ _svec(xs[k], idx[dims[k]])
        return out

    def op_at(y):
        return [_unsvec(y @ asv_red[k], dims[k], idx[dims[k]]) for k in range(n_blocks)]

    # infeasible start: scaled identities sized from the data
    row_norms = np.linalg.norm(np.hstack(asv_red), axis=1)
    xi_p = max(1.0, float(np.max(np.abs(b_red) / (1.0 + row_norms))) if mr else 1.0)
    xi_d = max(1.0, max(float(np.linalg.norm(c)) for c in cmats))
    sqrt_dim = np.sqrt(max(dims))
    xi_p *= sqrt_dim
    xi_d *= sqrt_dim
    xs = [xi_p * np.eye(d) for d in dims]
    zs = [xi_d * np.eye(d) for d in dims]
    y = np.zeros(mr)
    n_total = float(sum(dims))

    best = None
    best_merit = np.inf
    status = SolverStatus.MAX_ITERATIONS
    iters_done = 0

    for it in range(max_iters):
        iters_done = it
        pobj = 0.5 * sum(float(np.sum(c * x)) for c, x in zip(cmats, xs))
        dobj = 0.5 * float(b_red @ y)
        rp = b_red - op_a(xs)
        aty = op_at(y)
        rd = [aty[k] - cmats[k] - zs[k] for k in range(n_blocks)]

        pres = 0.5 * float(np.max(np.abs(rp))) if mr else 0.0
        dres = 0.5 * max(float(np.max(np.abs(r))) for r in rd)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj))
        merit = max(relgap, pres, dres)
        if verbose:
            print(f"iter {it:3d}  gap {relgap:9.2e}  pres {pres:9.2e}  dres {dres:9.2e}")
        if merit < best_merit:
            best_merit = merit
            best = ([x.copy() for x in xs], y.copy(), [z.copy() for z in zs], pres, dres)
        if relgap <= gap_tol and pres <= feas_tol and dres <= feas_tol:
            status = SolverStatus.OPTIMAL
            break

        # divergence guard: a growing dual iterate whose direction improves the
        # dual objective while staying dual-feasible certifies infeasibility
        y_norm = float(np.linalg.norm(y, np.inf))
        if y_norm > 1e8 * b_scale:
            ray = y / y_norm
            ray_slack = op_at(ray)
            ray_psd = all(np.linalg.eigvalsh(0.5 * (s + s.T))[0] >= -1e-6 for s in ray_slack)
            if ray_psd and float(b_red @ ray) < -1e-6:
                status = SolverStatus.INFEASIBLE
                break
            status = SolverStatus.NUMERICAL_TROUBLE
            break

        try:
            lx = [np.linalg.cholesky(x) for x in xs]
            lz = [np.linalg.cholesky(z) for z in zs]
        except np.linalg.LinAlgError:
            status = SolverStatus.NUMERICAL_TROUBLE
            break

        # Nesterov-Todd scaling per block: G^-1 X G^-T = G^T Z G = diag(lam)
        gmats, ginvs, lams, tmats, lxinvs, lzinvs = [], [], [], [], [], []
        svd_failed = False
        for k in range(n_blocks):
            try:
                _, s, wt = np.linalg.svd(lz[k].T @ lx[k])
                lxinv = sla.solve_triangular(lx[k], np.eye(dims[k]), lower=True)
                lzinv = sla.solve_triangular(lz[k], np.eye(dims[k]), lower=True)
            except np.linalg.LinAlgError:
                svd_failed = True
                break
            s = np.maximum(s, 1e-300)
            g = lx[k] @ wt.T * (s ** -0.5)
            ginv = (s[:, None] ** 0.5) * (wt @ lxinv)
            gmats.append(g)
            ginvs.append(ginv)
            lams.append(s)
            tmats.append(g @ g.T)
            lxinvs.append(lxinv)
            lzinvs.append(lzinv)
        if svd_failed:
            status = SolverStatus.NUMERICAL_TROUBLE
            break

        mu = sum(float(lam @ lam) for lam in lams) / n_total

        # Schur complement S_ij = sum_k <A_ik, T_k A_jk T_k>
        schur = np.zeros((mr, mr))
        tat_sv = []
        for k in range(n_blocks):
            d = dims[k]
            amats = np.empty((mr, d, d))
            ii, jj, scale = idx[d]
            vals = asv_red[k] / scale
            amats[:, ii, jj] = vals
            amats[:, jj, ii] = vals
            tat = np.einsum("ab,ibc,cd->iad", tmats[k], amats, tmats[k], optimize=True)
            tat_sv.append(_svec(tat, idx[d]))
            schur += tat_sv[k] @ asv_red[k].T
        schur = 0.5 * (schur + schur.T)

        diag_mean = max(float(np.mean(np.diag(schur))), 1e-300)
        schur_chol = None
        for reg in (0.0, 1e-13, 1e-11, 1e-9, 1e-7):
            try:
                schur_chol = sla.cho_factor(schur + reg * diag_mean * np.eye(mr), lower=True)
                break
            except np.linalg.LinAlgError:
                continue
        if schur_chol is None:
            status = SolverStatus.NUMERICAL_TROUBLE
            break

        def newton_step(dmats):
            """Solve for (dx, dy, dz) given the scaled complementarity target."""
            gdg = [gmats[k] @ dmats[k] @ gmats[k].T for k in range(n_blocks)]
            trdt = [tmats[k] @ rd[k] @ tmats[k] for k in range(n_blocks)]
            rhs = op_a(gdg) - op_a(trdt) - rp
            dy = sla.cho_solve(schur_chol, rhs)
            atdy = op_at(dy)
            dz = [atdy[k] + rd[k] for k in range(n_blocks)]
            dx = [gdg[k] - tmats[k] @ dz[k] @ tmats[k] for k in range(n_blocks)]
            dx = [0.5 * (v + v.T) for v in dx]
            dz = [0.5 * (v + v.T) for v in dz]
            return dx, dy, dz

        # predictor: aim at the complementarity target 0
        d_aff = [-np.diag(lam) for lam in lams]
        dx_aff, dy_aff, dz_aff = newton_step(d_aff)
        ap = min(1.0, min(_step_to_boundary(lxinvs[k], dx_aff[k]) for k in range(n_blocks)))
        ad = min(1.0, min(_step_to_boundary(lzinvs[k], dz_aff[k]) for k in range(n_blocks)))
        mu_aff = sum(
            float(np.sum((xs[k] + ap * dx_aff[k]) * (zs[k] + ad * dz_aff[k]))) for k in range(n_blocks)
        ) / n_total
        sigma = min(1.0, max(0.0, (max(mu_aff, 0.0) / mu) ** 3))

        # corrector with Mehrotra second-order term, in the scaled space
        dmats = []
        for k in range(n_blocks):
            dxt = ginvs[k] @ dx_aff[k] @ ginvs[k].T
            dzt = gmats[k].T @ dz_aff[k] @ gmats[k]
            cross = 0.5 * (dxt @ dzt + dzt @ dxt)
            lam = lams[k]
            dmat = sigma * mu * np.eye(dims[k]) - np.diag(lam**2) - cross
            dmats.append(2.0 * dmat / (lam[:, None] + lam[None, :]))
        dx, dy, dz = newton_step(dmats)

        ap = min(1.0, step_frac * min(_step_to_boundary(lxinvs[k], dx[k]) for k in range(n_blocks)))
        ad = min(1.0, step_frac * min(_step_to_boundary(lzinvs[k], dz[k]) for k in range(n_blocks)))
        if ap < 1e-10 and ad < 1e-10:
            status = SolverStatus.NUMERICAL_TROUBLE
            break
        for k in range(n_blocks):
            xs[k] = 0.5 * ((xs[k] + ap * dx[k]) + (xs[k] + ap * dx[k]).T)
            zs[k] = 0.5 * ((zs[k] + ad * dz[k]) + (zs[k] + ad * dz[k]).T)
        y = y + ad * dy
    else:
        iters_done = max_iters

    if status is SolverStatus.INFEASIBLE:
        return _package(zero_xs, None, zero_xs, status, iters_done, np.inf, np.inf)

    xs_f, y_f, zs_f, pres_f, dres_f = best if best is not None else (xs, y, zs, np.inf, np.inf)
    pobj = 0.5 * sum(float(np.sum(c * x)) for c, x in zip(cmats, xs_f))
    dobj = 0.5 * float(b_red @ y_f)
    relgap = abs(pobj - dobj) / (1.0 + abs(pobj))
    if status is not SolverStatus.OPTIMAL:
        if relgap <= gap_accept and pres_f <= feas_accept and dres_f <= feas_accept:
            status = SolverStatus.OPTIMAL
    return _package(xs_f, y_f, zs_f, status, iters_done, pres_f, dres_f)
