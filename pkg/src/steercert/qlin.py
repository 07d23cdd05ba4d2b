"""Complex linear algebra and quantum-object primitives.

Matrices are dense ``numpy`` arrays with ``complex128`` entries. One global
convention is used everywhere: tensor factors are ordered Alice-major, i.e.
``kron(A, B)`` puts ``A`` on the slow (leftmost) index and composite
dimensions are written ``(d_A, d_B, ...)``.

Tolerances: 1e-12 for algebraic identities, 1e-10 for PSD / POVM validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALG_TOL = 1e-12
PSD_TOL = 1e-10

_SUBSYSTEM_NAMES = {"A": 0, "B": 1, "E": 2}


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a.T)


def hermiticity_defect(a: np.ndarray) -> float:
    """Largest entrywise deviation between ``a`` and its adjoint."""
    a = np.asarray(a)
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = ALG_TOL) -> bool:
    return hermiticity_defect(a) <= tol


def min_eig(a: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix.

    Uses the symmetric (Hermitian) LAPACK path, which is deterministic and
    accurate enough for PSD decisions at the 1e-10 scale.
    """
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a, tol=1e-9):
        raise ValueError(f"min_eig requires a Hermitian matrix (defect {hermiticity_defect(a):.3e})")
    return float(np.linalg.eigvalsh(a)[0])


def is_psd(a: np.ndarray, tol: float = PSD_TOL) -> bool:
    """Whether ``a`` is Hermitian (within ``tol``) with spectrum >= -tol."""
    if not is_hermitian(a, tol=max(tol, ALG_TOL)):
        return False
    h = 0.5 * (a + dagger(a))
    return float(np.linalg.eigvalsh(h)[0]) >= -tol


def kron(*ops: np.ndarray) -> np.ndarray:
    """Tensor product with the first factor on the slow index (Alice-major)."""
    if not ops:
        raise ValueError("kron needs at least one operator")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def partial_trace(m: np.ndarray, dims: tuple[int, ...], keep) -> np.ndarray:
    """Reduced operator on the kept subsystem(s); preserves the trace.

    ``dims`` lists the subsystem dimensions Alice-major; ``keep`` is a
    subsystem index, a sequence of indices, or one of the tags 'A'/'B'/'E'.
    """
    m = np.asarray(m, dtype=complex)
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise ValueError(f"operator dimension {m.shape} does not match subsystem dims {dims}")
    if isinstance(keep, str):
        keep = (_SUBSYSTEM_NAMES[keep.upper()],)
    elif isinstance(keep, (int, np.integer)):
        keep = (int(keep),)
    keep = tuple(sorted(int(k) for k in keep))
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep={keep} out of range for {n} subsystems")

    t = m.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    for count, i in enumerate(sorted(traced, reverse=True)):
        t = np.trace(t, axis1=i, axis2=i + n - count)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal basis of d x d Hermitian matrices, shape (d*d, d, d).

    Ordering: the d diagonal units, then (E_ij + E_ji)/sqrt(2) for i < j,
    then i(E_ij - E_ji)/sqrt(2) for i < j. Orthonormal under Tr[A B], so
    expansion coefficients of a Hermitian matrix are real.
    """
    basis = np.zeros((d * d, d, d), dtype=complex)
    idx = 0
    for i in range(d):
        basis[idx, i, i] = 1.0
        idx += 1
    s = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            basis[idx, i, j] = s
            basis[idx, j, i] = s
            idx += 1
    for i in range(d):
        for j in range(i + 1, d):
            basis[idx, i, j] = -1j * s
            basis[idx, j, i] = 1j * s
            idx += 1
    return basis


def hermitian_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real inner product Re Tr[A^dag B] (the Hilbert-Schmidt product)."""
    return float(np.real(np.sum(np.conj(a) * b)))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix with phase fix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph


def freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Povm:
    """Measurement as an ordered tuple of PSD elements summing to identity."""

    elements: tuple[np.ndarray, ...]

    def __init__(self, elements, *, tol: float = PSD_TOL):
        els = tuple(freeze(e) for e in elements)
        if not els:
            raise ValueError("a POVM needs at least one element")
        d = els[0].shape[0]
        for k, e in enumerate(els):
            if e.shape != (d, d):
                raise ValueError(f"element {k} has shape {e.shape}, expected ({d}, {d})")
            if not is_psd(e, tol=tol):
                raise ValueError(f"element {k} is not PSD within {tol:g}")
        total = sum(els)
        if np.max(np.abs(total - np.eye(d))) > tol:
            raise ValueError(f"elements sum to identity only within {np.max(np.abs(total - np.eye(d))):.3e}")
        object.__setattr__(self, "elements", els)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, a: int) -> np.ndarray:
        return self.elements[a]


def basis_povm(vectors: np.ndarray) -> Povm:
    """Projective POVM from the columns of a unitary (one outcome per column)."""
    vectors = np.asarray(vectors, dtype=complex)
    d = vectors.shape[0]
    return Povm([np.outer(vectors[:, a], vectors[:, a].conj()) for a in range(d)])


def matrix_to_json(a: np.ndarray) -> list:
    """Complex matrix as nested row-major lists of [re, im] pairs."""
    a = np.asarray(a, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in a]


def matrix_from_json(rows: list) -> np.ndarray:
    out = np.array([[complex(v[0], v[1]) for v in row] for row in rows], dtype=complex)
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise ValueError("expected a square matrix encoding")
    return out
