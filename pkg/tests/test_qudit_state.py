import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcarrier.qudit_state import (DENSE_CAP, QuditState, RegisterLayout, apply_cnot, apply_fourier,
                                  apply_inverse_cnot, apply_pauli, basis_state, density_from_state,
                                  dump_state, entanglement_entropy, fidelity, load_state,
                                  measure_computational, measure_label, omega_powers,
                                  partial_trace, purity_deficit, split_product, tensor,
                                  trace_distance, von_neumann_entropy)

SETTINGS = settings(max_examples=40, deadline=None)


def labels(n):
    return tuple(f"message_{i}" for i in range(1, n + 1))


def random_state(d, n, seed, backend="sparse", sparsity=0.0):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=d**n) + 1j * rng.normal(size=d**n)
    if sparsity:
        v[rng.random(d**n) < sparsity] = 0
        v[0] = 1.0
    v /= np.linalg.norm(v)
    return QuditState(RegisterLayout(d, labels(n)), vector=v).with_backend(backend)


def flat(state):
    return state.vector().ravel()


# independent dense oracles ------------------------------------------------------

def omega(d):
    return np.exp(2j * np.pi / d)


def x_mat(d):
    return np.roll(np.eye(d), 1, axis=0)


def z_mat(d):
    return np.diag([omega(d) ** j for j in range(d)])


def f_mat(d, conj=False):
    s = -1 if conj else 1
    return np.array([[omega(d) ** (s * j * k) for j in range(d)] for k in range(d)]) / math.sqrt(d)


def on_wire(op, wire, n, d):
    out = np.eye(1)
    for w in range(n):
        out = np.kron(out, op if w == wire else np.eye(d))
    return out


def cnot_mat(c, t, v, n, d):
    dim = d**n
    out = np.zeros((dim, dim))
    for idx in range(dim):
        digits = list(np.unravel_index(idx, (d,) * n))
        digits[t] = (digits[t] + v * digits[c]) % d
        out[np.ravel_multi_index(digits, (d,) * n), idx] = 1
    return out


dims = st.sampled_from([2, 3, 5])


@SETTINGS
@given(d=dims, n=st.integers(1, 3), data=st.data(), seed=st.integers(0, 10**6))
def test_pauli_matches_matrix_oracle(d, n, data, seed):
    w = data.draw(st.integers(0, n - 1))
    xp, zp = data.draw(st.integers(0, d - 1)), data.draw(st.integers(0, d - 1))
    psi = random_state(d, n, seed)
    got = flat(apply_pauli(psi, w, x_power=xp, z_power=zp))
    op = np.linalg.matrix_power(z_mat(d), zp) @ np.linalg.matrix_power(x_mat(d), xp)
    assert np.allclose(got, on_wire(op, w, n, d) @ flat(psi), atol=1e-12)


@SETTINGS
@given(d=dims, n=st.integers(1, 3), data=st.data(), seed=st.integers(0, 10**6),
       conj=st.booleans())
def test_fourier_matches_matrix_oracle(d, n, data, seed, conj):
    w = data.draw(st.integers(0, n - 1))
    psi = random_state(d, n, seed)
    got = flat(apply_fourier(psi, w, conjugated=conj))
    assert np.allclose(got, on_wire(f_mat(d, conj), w, n, d) @ flat(psi), atol=1e-12)


@SETTINGS
@given(d=dims, n=st.integers(2, 3), data=st.data(), seed=st.integers(0, 10**6))
def test_cnot_matches_matrix_oracle_and_inverts(d, n, data, seed):
    c, t = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    v = data.draw(st.integers(0, d - 1))
    psi = random_state(d, n, seed)
    out = apply_cnot(psi, c, t, v)
    assert np.allclose(flat(out), cnot_mat(c, t, v, n, d) @ flat(psi), atol=1e-12)
    back = apply_inverse_cnot(out, c, t, v)
    assert fidelity(back, psi) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 5, 7])
def test_weyl_relation_and_fourier_order(d):
    assert np.allclose(z_mat(d) @ x_mat(d), omega(d) * x_mat(d) @ z_mat(d))
    psi = random_state(d, 1, 7)
    out = psi
    for _ in range(4):
        out = apply_fourier(out, 0)
    assert np.allclose(flat(out), flat(psi), atol=1e-12)
    assert np.allclose(flat(apply_fourier(apply_fourier(psi, 0), 0, conjugated=True)), flat(psi))


def test_roots_are_snapped():
    assert omega_powers(4)[1] == 1j
    assert omega_powers(2)[1] == -1


@pytest.mark.parametrize("q", [0, 1])
def test_cnot_on_plus_minus_target(q):
    # control in |q>, target |+> is untouched, target |-> picks up (-1)^q
    layout = RegisterLayout(2, ("alice", "message_1"))
    plus = apply_fourier(basis_state(layout, (q, 0)), 1)
    minus = apply_fourier(basis_state(layout, (q, 1)), 1)
    assert fidelity(apply_cnot(plus, 0, 1), plus) == pytest.approx(1.0)
    out = apply_cnot(minus, 0, 1)
    ov = sum(a.conjugate() * out.amplitude(k) for k, a in minus.items())
    assert ov == pytest.approx((-1) ** q)


def test_sparse_dense_agree_on_eight_qutrits():
    rng = np.random.default_rng(11)
    sparse = random_state(3, 8, 5, "sparse", sparsity=0.9)
    dense = sparse.to_dense()
    for _ in range(25):
        g = rng.integers(3)
        a, b = (int(x) for x in rng.choice(8, 2, replace=False))
        if g == 0:
            sparse, dense = apply_cnot(sparse, a, b, 2), apply_cnot(dense, a, b, 2)
        elif g == 1:
            sparse, dense = apply_fourier(sparse, a), apply_fourier(dense, a)
        else:
            sparse, dense = apply_pauli(sparse, a, 1, 2), apply_pauli(dense, a, 1, 2)
    assert dense.backend == "dense" and sparse.backend == "sparse"
    assert np.allclose(flat(sparse), flat(dense), atol=1e-12)
    assert dump_state(sparse) == dump_state(dense)


def test_partial_trace_matches_einsum():
    psi = random_state(3, 3, 42)
    t = psi.vector().reshape(3, 3, 3)
    oracle = np.einsum("abc,dbc->ad", t, t.conj())
    rho = partial_trace(psi, [0])
    assert np.allclose(rho.to_dense(), oracle, atol=1e-12)
    rho02 = partial_trace(psi, [0, 2])
    full = np.einsum("abc,dbf->acdf", t, t.conj()).reshape(9, 9)
    assert np.allclose(rho02.to_dense(), full, atol=1e-12)


@SETTINGS
@given(seed=st.integers(0, 10**6), d=dims)
def test_density_matrices_are_valid(seed, d):
    psi = random_state(d, 3, seed, sparsity=0.5)
    for keep in ([0], [1, 2], [0, 1, 2]):
        rho = partial_trace(psi, keep)
        rho.check()
        assert 0 <= rho.purity() <= 1 + 1e-12


@SETTINGS
@given(a=st.integers(0, 10**6), b=st.integers(0, 10**6))
def test_trace_distance_against_numpy(a, b):
    r1 = partial_trace(random_state(2, 3, a, sparsity=0.4), [0, 1])
    r2 = partial_trace(random_state(2, 3, b, sparsity=0.4), [0, 1])
    diff = r1.to_dense() - r2.to_dense()
    oracle = 0.5 * np.abs(np.linalg.eigvalsh(diff)).sum()
    assert trace_distance(r1, r2) == pytest.approx(oracle, abs=1e-10)
    assert trace_distance(r1, r1) < 1e-12


def test_entropies_of_maximally_entangled_pair():
    for d in (2, 3, 5):
        layout = RegisterLayout(d, ("alice", "player_1"))
        psi = QuditState(layout, {(q, q): 1 / math.sqrt(d) for q in range(d)})
        assert entanglement_entropy(psi, ["alice"], base=d) == pytest.approx(1.0)
        assert von_neumann_entropy(partial_trace(psi, [1]), base=d) == pytest.approx(1.0)
        assert purity_deficit(psi, ["alice"]) == pytest.approx(1 - 1 / d)
        assert von_neumann_entropy(density_from_state(psi)) == pytest.approx(0.0, abs=1e-12)


def test_split_product_recovers_factors():
    a = random_state(3, 2, 1)
    b = random_state(3, 1, 2).relabel(["eve_1"])
    prod = tensor(a, b)
    fa, fb = split_product(prod, a.layout.labels)
    assert fidelity(fa, a) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(fb, b) == pytest.approx(1.0, abs=1e-12)
    layout = RegisterLayout(2, ("alice", "player_1"))
    bell = QuditState(layout, {(0, 0): 1, (1, 1): 1}).normalized()
    with pytest.raises(ValueError):
        split_product(bell, ["alice"])


def test_measurement_is_seeded_and_born_weighted():
    psi = random_state(3, 2, 9)
    r1 = measure_computational(psi, [0, 1], 123)
    r2 = measure_computational(psi, [0, 1], 123)
    assert r1[0] == r2[0] and r1[2] == r2[2]
    assert r1[2] == pytest.approx(abs(psi.amplitude(r1[0])) ** 2)
    basis = basis_state(psi.layout, (2, 1))
    assert measure_computational(basis, [0], 0)[0] == (2,)
    lab, post, p = measure_label(psi, [0, 1], lambda ds: sum(ds) % 3, 5)
    assert post.norm() == pytest.approx(1.0)
    assert all(sum(k) % 3 == lab for k, _ in post.items())


def test_dump_roundtrip_and_validation():
    psi = random_state(5, 2, 3)
    text = dump_state(psi)
    back = load_state(text)
    assert fidelity(back, psi) == pytest.approx(1.0, abs=1e-10)
    assert dump_state(back) == text
    with pytest.raises(ValueError):
        RegisterLayout(2, ("bob",))
    with pytest.raises(ValueError):
        RegisterLayout(2, ("alice", "alice"))
    with pytest.raises(ValueError):
        QuditState(RegisterLayout(2, ("alice",)), {(2,): 1})
    big = RegisterLayout(2, labels(25))
    assert big.total_dimension > DENSE_CAP
    with pytest.raises(ValueError):
        basis_state(big, (0,) * 25).to_dense()
