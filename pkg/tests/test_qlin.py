import numpy as np
import pytest

from steercert.qlin import (
    Povm,
    basis_povm,
    dagger,
    hermitian_basis,
    hermitian_inner,
    is_hermitian,
    is_psd,
    kron,
    matrix_from_json,
    matrix_to_json,
    min_eig,
    partial_trace,
    random_unitary,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PHI_PLUS = 0.5 * np.array(
    [[1, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 1]], dtype=complex
)


def random_herm(d, rng):
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (h + dagger(h)) / 2


def random_density(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def kron_by_loop(a, b):
    # independent element-by-element expansion of the definition
    da, db = a.shape[0], b.shape[0]
    out = np.zeros((da * db, da * db), dtype=complex)
    for i1 in range(da):
        for i2 in range(da):
            for j1 in range(db):
                for j2 in range(db):
                    out[i1 * db + j1, i2 * db + j2] = a[i1, i2] * b[j1, j2]
    return out


def test_kron_identity():
    assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))


def test_kron_basis_ordering():
    got = kron(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    assert np.array_equal(got, np.diag([0.0, 1.0, 0.0, 0.0]))


def test_kron_pauli_xz():
    expected = np.zeros((4, 4), dtype=complex)
    expected[0, 2] = 1
    expected[1, 3] = -1
    expected[2, 0] = 1
    expected[3, 1] = -1
    assert np.max(np.abs(kron(X, Z) - expected)) == 0.0
    assert np.max(np.abs(kron(X, Z) - kron_by_loop(X, Z))) == 0.0


def test_kron_associative_bilinear():
    rng = np.random.default_rng(7)
    for _ in range(10):
        a, b, c = (random_herm(2, rng) for _ in range(3))
        assert np.max(np.abs(kron(kron(a, b), c) - kron(a, kron(b, c)))) <= 1e-12
        s, t = rng.standard_normal(2)
        lhs = kron(s * a + t * b, c)
        rhs = s * kron(a, c) + t * kron(b, c)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_partial_trace_product_state():
    rng = np.random.default_rng(3)
    rho_a = random_density(2, rng)
    rho_b = random_density(3, rng)
    got = partial_trace(kron(rho_a, rho_b), (2, 3), keep="B")
    assert np.max(np.abs(got - rho_b)) <= 1e-12
    got_a = partial_trace(kron(rho_a, 0.7 * rho_b), (2, 3), keep="A")
    assert np.max(np.abs(got_a - 0.7 * rho_a)) <= 1e-12


def test_partial_trace_maximally_entangled():
    got = partial_trace(PHI_PLUS, (2, 2), keep="B")
    assert np.max(np.abs(got - np.eye(2) / 2)) <= 1e-12


def test_partial_trace_preserves_trace():
    rng = np.random.default_rng(11)
    g = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    m = g @ dagger(g)
    reduced = partial_trace(m, (2, 3), keep="A")
    assert abs(np.trace(reduced) - np.trace(m)) <= 1e-10


def test_partial_trace_three_subsystems():
    rng = np.random.default_rng(13)
    a, b, e = (random_density(2, rng) for _ in range(3))
    m = kron(a, b, e)
    got = partial_trace(m, (2, 2, 2), keep=(1,))
    assert np.max(np.abs(got - b)) <= 1e-12
    got_ab = partial_trace(m, (2, 2, 2), keep=(0, 1))
    assert np.max(np.abs(got_ab - kron(a, b))) <= 1e-12


def test_partial_trace_dimension_mismatch():
    with pytest.raises(ValueError):
        partial_trace(np.eye(5), (2, 2), keep="A")


def test_min_eig_examples():
    assert min_eig(np.eye(2)) == pytest.approx(1.0, abs=1e-10)
    assert min_eig(np.diag([3.0, -2.0])) == pytest.approx(-2.0, abs=1e-10)
    assert min_eig(PHI_PLUS - 0.3 * np.eye(4)) == pytest.approx(-0.3, abs=1e-10)


def test_min_eig_rejects_nonhermitian():
    with pytest.raises(ValueError):
        min_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_min_eig_shift_invariance():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a = random_herm(4, rng)
        c = float(rng.standard_normal())
        assert min_eig(a + c * np.eye(4)) == pytest.approx(min_eig(a) + c, abs=1e-10)


def test_hermitian_psd_predicates():
    assert is_hermitian(X) and is_hermitian(Y)
    assert not is_hermitian(X + 1e-6 * 1j * np.eye(2))
    assert is_psd(PHI_PLUS)
    assert not is_psd(Z)


def test_hermitian_basis_orthonormal():
    for d in (2, 3):
        basis = hermitian_basis(d)
        assert basis.shape == (d * d, d, d)
        for r, e in enumerate(basis):
            assert is_hermitian(e)
            for s, f in enumerate(basis):
                assert hermitian_inner(e, f) == pytest.approx(1.0 if r == s else 0.0, abs=1e-12)


def test_povm_validation():
    p = Povm([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    assert p.dim == 2 and p.n_outcomes == 2
    with pytest.raises(ValueError):
        Povm([np.diag([1.0, 0.0]), np.diag([0.0, 0.9])])
    with pytest.raises(ValueError):
        Povm([np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])])


def test_basis_povm_from_unitary():
    rng = np.random.default_rng(17)
    u = random_unitary(3, rng)
    p = basis_povm(u)
    assert p.n_outcomes == 3
    total = sum(p.elements)
    assert np.max(np.abs(total - np.eye(3))) <= 1e-12


def test_random_unitary_is_unitary_and_seeded():
    u1 = random_unitary(4, np.random.default_rng(42))
    u2 = random_unitary(4, np.random.default_rng(42))
    assert np.array_equal(u1, u2)
    assert np.max(np.abs(u1 @ dagger(u1) - np.eye(4))) <= 1e-12


def test_matrix_json_round_trip():
    rng = np.random.default_rng(23)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    encoded = matrix_to_json(a)
    assert encoded[0][1] == [pytest.approx(a[0, 1].real), pytest.approx(a[0, 1].imag)]
    back = matrix_from_json(encoded)
    assert np.array_equal(back, a)
