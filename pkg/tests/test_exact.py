import numpy as np
import pytest

from helpers import analyzed, random_states, zH
from krylov_qfi.bounds import krylov_bounds
from krylov_qfi.ensembles import maximally_mixed, random_pure
from krylov_qfi.exact import group_values, n_star, n_star_upper_bound, qfi_exact, sld
from krylov_qfi.qcore import collective_z


def test_qfi_qubit_example(qubit_example):
    _, _, table = analyzed(*qubit_example)
    assert qfi_exact(table) == pytest.approx(0.25, rel=1e-14)


def test_qutrit_example(qutrit_example):
    _, spec, table = analyzed(*qutrit_example)
    assert qfi_exact(table) == pytest.approx(0.2, rel=1e-14)
    rep = n_star(table, spec)
    np.testing.assert_allclose(sorted(rep.distinct_sums), [0.5, 0.7, 0.8])
    assert rep.card_S == 3 and rep.card_J == 2 and rep.n_star == 1


def test_pure_state_qfi_is_four_times_variance():
    psi_rho = random_pure(8, 4)
    H = collective_z(3).data
    _, _, table = analyzed(psi_rho, H)
    r = psi_rho.data
    var = np.trace(r @ H @ H).real - np.trace(r @ H).real ** 2
    assert qfi_exact(table) == pytest.approx(4 * var, rel=1e-12)


def test_maximally_mixed_has_zero_qfi_and_trivial_chain():
    _, spec, table = analyzed(maximally_mixed(8), collective_z(3))
    assert qfi_exact(table) == 0.0
    assert n_star(table, spec).n_star == 0


def test_sld_solves_its_defining_equation():
    for rho in random_states("rank", 16, 3, base_seed=7, rank=3):
        H = zH(16)
        _, spec, table = analyzed(rho, H)
        L = sld(table, spec)
        r = rho.data
        C = 1j * (r @ H.data - H.data @ r)
        np.testing.assert_allclose(0.5 * (r @ L + L @ r), C, atol=1e-12)
        assert np.trace(r @ L @ L).real == pytest.approx(qfi_exact(table), rel=1e-10)


def test_sld_full_rank():
    rho = next(random_states("fullrank", 8, 1, base_seed=3))
    _, spec, table = analyzed(rho, zH(8))
    L = sld(table, spec)
    np.testing.assert_allclose(L, L.conj().T, atol=1e-14)
    assert np.trace(rho.data @ L @ L).real == pytest.approx(qfi_exact(table), rel=1e-10)


def test_group_values_single_linkage_to_first_member():
    labels, reps = group_values([0.3, 0.1, 0.1 + 4e-10, 0.1 + 8e-10, 0.1 + 1.2e-9], 1e-9)
    np.testing.assert_allclose(reps, [0.1, 0.1 + 1.2e-9, 0.3])
    assert list(labels) == [2, 0, 0, 0, 1]


@pytest.mark.parametrize("r", [1, 2, 3])
def test_n_star_matches_termination_of_chain(r):
    for rho in random_states("rank", 16, 10, base_seed=11, rank=r):
        _, spec, table = analyzed(rho, zH(16))
        rep = n_star(table, spec)
        fq = qfi_exact(table)
        assert rep.n_star <= rep.rank_bound == r * (r + 1) // 2
        assert rep.n_star <= n_star_upper_bound(spec)
        B = krylov_bounds(table, rep.n_star)
        assert abs(B[-1] - fq) <= 1e-9 * fq
        # the step before termination can be very small but is never zero
        if rep.n_star > 1:
            assert fq - B[-2] > 1e-13 * fq


def test_pure_state_terminates_at_first_order():
    _, spec, table = analyzed(random_pure(16, 0), zH(16))
    assert n_star(table, spec).n_star == 1


def test_report_serializes():
    _, spec, table = analyzed(random_pure(4, 1), zH(4))
    d = n_star(table, spec).to_dict()
    assert set(d) == {"n_star", "card_S", "card_J", "distinct_sums", "rank_bound", "group_tol"}
