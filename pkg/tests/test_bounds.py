import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import analyzed, zH
from krylov_qfi.bounds import (
    MomentVector,
    build_L_n,
    hankel_system,
    kappa,
    krylov_bound,
    krylov_bounds,
    krylov_chain,
    moments_operator,
    moments_spectral,
    relative_gap,
    swap_operator,
    taylor_bound,
    taylor_bound_tensor_oracle,
    taylor_bounds,
    convergence_envelope,
)
from krylov_qfi.ensembles import maximally_mixed, random_fullrank, random_rank_r
from krylov_qfi.errors import DimensionOverflow, OrderExceedsNStar, ZeroQFI
from krylov_qfi.exact import n_star, qfi_exact
from krylov_qfi.qcore import weighted_inner


def test_qubit_example_moments_and_bounds(qubit_example):
    _, spec, table = analyzed(*qubit_example)
    T = moments_spectral(table, 3)
    np.testing.assert_allclose(T.values, [0.125, 0.0625, 0.03125, 0.015625], rtol=1e-14)
    assert krylov_bound(T, 1).value == pytest.approx(0.25, rel=1e-14)
    assert taylor_bound(table, 1).value == pytest.approx(0.25, rel=1e-14)


def test_qutrit_example(qutrit_example):
    _, spec, table = analyzed(*qutrit_example)
    T = moments_spectral(table, 5)
    np.testing.assert_allclose(T.values, 0.08 * 0.4 ** np.arange(6), rtol=1e-13)
    assert krylov_bound(T, 1).value == pytest.approx(0.2, rel=1e-13)
    assert taylor_bound(table, 1).value == pytest.approx(0.192, rel=1e-13)
    with pytest.raises(OrderExceedsNStar):
        krylov_bound(T, 2)


def test_hankel_layout():
    A, b = hankel_system(MomentVector(np.arange(1.0, 6.0)), 2)
    np.testing.assert_array_equal(A, [[2, 3], [3, 4]])
    np.testing.assert_array_equal(b, [1, 2])
    with pytest.raises(ValueError):
        hankel_system(np.arange(4.0), 3)


def test_moment_paths_agree():
    for d in (2, 4, 8, 16):
        rho = random_fullrank(d, d)
        _, _, table = analyzed(rho, zH(d))
        a = moments_spectral(table, 7).values
        b = moments_operator(rho, zH(d), 7).values
        np.testing.assert_allclose(a, b, rtol=1e-11)


def test_first_moment_is_weighted_norm():
    rho = random_fullrank(8, 2)
    H = zH(8).data
    _, _, table = analyzed(rho, H)
    C = 1j * (rho.data @ H - H @ rho.data)
    T = moments_spectral(table, 1).values
    assert T[0] == pytest.approx(np.trace(C @ C).real, rel=1e-12)
    assert T[1] == pytest.approx(weighted_inner(C, C, rho), rel=1e-12)


def test_hankel_and_spectral_routes_agree_at_low_order():
    rho = random_fullrank(16, 9)
    _, _, table = analyzed(rho, zH(16))
    T = moments_spectral(table, 9)
    B = krylov_bounds(table, 5)
    for n in range(1, 6):
        assert krylov_bound(T, n).value == pytest.approx(B[n - 1], rel=1e-7)


@pytest.mark.parametrize("kind", ["full", "rank2"])
def test_chain_strictly_increases_to_qfi(kind):
    for seed in range(5):
        rho = random_fullrank(16, seed) if kind == "full" else random_rank_r(16, 2, seed)
        _, spec, table = analyzed(rho, zH(16))
        fq = qfi_exact(table)
        chain = krylov_chain(table, spec, fq=fq)
        vals = np.array([b.value for b in chain])
        assert len(chain) == n_star(table, spec).n_star
        # increments shrink geometrically, far below float resolution on
        # long full-rank chains; monotone within 1e-12
        assert np.all(np.diff(vals) > -1e-12)
        assert np.all(np.diff(vals[:4]) > 1e-12)
        assert abs(vals[-1] - fq) <= 1e-9 * fq
        assert chain[-1].gap < 1e-9
        assert np.all(vals <= fq * (1 + 1e-12))


def test_krylov_bounds_padding_and_empty_measure():
    _, spec, table = analyzed(random_rank_r(8, 1, 0), zH(8))
    B = krylov_bounds(table, 4)
    assert np.all(B == B[0])
    _, _, table0 = analyzed(maximally_mixed(4), zH(4))
    np.testing.assert_array_equal(krylov_bounds(table0, 3), np.zeros(3))
    assert krylov_bound(moments_spectral(table0, 1), 1).value == 0.0


def test_best_approximation_operator():
    rho = random_rank_r(8, 3, 2)
    H = zH(8)
    _, spec, table = analyzed(rho, H)
    ns = n_star(table, spec).n_star
    fq = qfi_exact(table)
    B = krylov_bounds(table, ns)
    r = rho.data
    C = 1j * (r @ H.data - H.data @ r)
    for n in range(1, ns + 1):
        L = build_L_n(table, spec, n)
        # tr(rho L_n^2) = B_n and <L_n, C>-consistency
        assert np.trace(r @ L @ L).real == pytest.approx(B[n - 1], rel=1e-9)
        assert np.trace(L @ C).real == pytest.approx(B[n - 1], rel=1e-9)
    L = build_L_n(table, spec, ns)
    assert np.trace(r @ L @ L).real == pytest.approx(fq, rel=1e-9)
    with pytest.raises(OrderExceedsNStar):
        build_L_n(table, spec, ns + 1)


def test_taylor_parity_flags_and_monotonicity():
    rho = random_fullrank(8, 4)
    _, _, table = analyzed(rho, zH(8))
    fq = qfi_exact(table)
    tb = taylor_bounds(table, 9, fq)
    for b in tb:
        assert ("not_guaranteed_lower_bound" in b.flags) == (b.order % 2 == 0)
    odd = [b.value for b in tb if b.order % 2 == 1]
    assert np.all(np.diff(odd) >= -1e-15)
    assert all(v <= fq for v in odd)


def test_taylor_converges_to_qfi():
    rho = random_fullrank(4, 0)
    _, _, table = analyzed(rho, zH(4))
    assert taylor_bound(table, 400).value == pytest.approx(qfi_exact(table), rel=1e-8)


def test_swap_operator():
    d = 3
    S = swap_operator(d)
    a = np.arange(d, dtype=float)
    b = np.arange(d, dtype=float) ** 2 + 1
    np.testing.assert_array_equal(S @ np.kron(a, b), np.kron(b, a))


@pytest.mark.parametrize("d", [2, 4])
@pytest.mark.parametrize("n", [0, 1, 2, 5, 7])
def test_taylor_tensor_oracle(d, n):
    rho = random_fullrank(d, 10 * d + n)
    H = zH(d)
    _, _, table = analyzed(rho, H)
    assert taylor_bound(table, n).value == pytest.approx(taylor_bound_tensor_oracle(rho, H, n), rel=1e-10)


def test_tensor_oracle_dimension_cap():
    with pytest.raises(DimensionOverflow):
        taylor_bound_tensor_oracle(random_fullrank(32, 0), zH(32), 1)


def test_kappa_and_envelope():
    rho = np.diag([0.5, 0.3, 0.2])
    spec = analyzed(rho, np.eye(3))[1]
    rep = kappa(spec)
    assert rep.kappa == pytest.approx(2.5) and rep.full_rank
    spec2 = analyzed(np.diag([0.6, 0.4, 0.0]), np.eye(3))[1]
    assert kappa(spec2).kappa == pytest.approx(3.0)
    assert convergence_envelope(11.2, 3) == pytest.approx(0.0990, abs=5e-4)
    assert convergence_envelope(1.0, 1) == 0.0
    with pytest.raises(ValueError):
        convergence_envelope(0.5, 1)


def test_relative_gap():
    assert relative_gap(0.9, 1.0) == pytest.approx(0.1)
    with pytest.raises(ZeroQFI):
        relative_gap(0.0, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 16), st.integers(0, 2**31 - 1))
def test_hierarchy_properties(n_qubits, r, seed):
    d = 2**n_qubits
    r = min(r, d)
    rho = random_rank_r(d, r, seed)
    _, spec, table = analyzed(rho, zH(d))
    fq = qfi_exact(table)
    if fq < 1e-10:
        return
    kap = kappa(spec).kappa
    B = krylov_bounds(table, 8)
    tay = taylor_bounds(table, 15)
    ns = n_star(table, spec).n_star
    for n in range(1, min(ns, 8) + 1):
        gap = relative_gap(B[n - 1], fq)
        assert gap <= convergence_envelope(kap, n) + 1e-12
        assert gap <= relative_gap(tay[2 * n - 1].value, fq) + 1e-12
