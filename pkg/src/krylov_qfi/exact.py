"""Exact QFI, symmetric logarithmic derivative and Krylov termination order."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "NStarReport",
    "qfi_exact",
    "sld",
    "n_star",
    "n_star_upper_bound",
    "group_values",
    "GROUP_TOL",
]

GROUP_TOL = 1e-9


def _xsum(terms):
    """Extended-precision accumulation of a float array."""
    return float(np.sum(np.asarray(terms, dtype=np.longdouble)))


def qfi_exact(table):
    """``F_Q = 2 sum (p_k - p_l)^2 / (p_k + p_l) |<k|H|l>|^2`` over retained pairs."""
    return 2.0 * _xsum(table.mass / table.psum)


def sld(table, spec):
    """Symmetric logarithmic derivative in the computational basis.

    ``L_kl = 2i (p_k - p_l) / (p_k + p_l) <k|H|l>`` on retained pairs, zero on
    the kernel-kernel block.
    """
    d = table.dim
    L = np.zeros((d, d), dtype=complex)
    L[table.k, table.l] = 2j * table.delta / table.psum * table.h
    u = spec.eigenvectors
    L = u @ L @ u.conj().T
    return 0.5 * (L + L.conj().T)


def group_values(values, tol):
    """Sorted single-linkage grouping against the group's first member.

    Returns ``(labels, representatives)`` where ``labels[i]`` indexes into
    ``representatives``.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0, dtype=int), np.zeros(0)
    order = np.argsort(values, kind="stable")
    labels = np.empty(values.size, dtype=int)
    reps = []
    current = None
    for idx in order:
        v = values[idx]
        if current is None or v - current > tol:
            current = v
            reps.append(v)
        labels[idx] = len(reps) - 1
    return labels, np.array(reps)


@dataclass
class NStarReport:
    n_star: int
    card_S: int
    card_J: int
    distinct_sums: list = field(default_factory=list)
    rank_bound: int = 0
    group_tol: float = GROUP_TOL

    def to_dict(self):
        return asdict(self)


def _distinct_pair_sums(p, group_tol):
    i, j = np.triu_indices(p.size, k=1)
    distinct = np.abs(p[i] - p[j]) > group_tol
    return p[i][distinct] + p[j][distinct]


def n_star_upper_bound(spec, group_tol=GROUP_TOL):
    """Number of distinct values ``p_i + p_j`` over pairs with ``p_i != p_j``."""
    sums = _distinct_pair_sums(spec.eigenvalues, group_tol)
    return len(group_values(sums, group_tol)[1])


def n_star(table, spec, group_tol=GROUP_TOL, weight_tol=None):
    """Termination order of the Krylov chain, ``card(S) - card(J)``.

    A pair sum belongs to ``J`` when every eigen-pair producing it has
    ``|<i|H|j>|^2 <= weight_tol``. The default ``weight_tol`` is
    ``1e-12 * max|H_ij|^2`` with ``H_ij`` in the computational basis.
    """
    if weight_tol is None:
        weight_tol = 1e-12 * table.h_max**2

    pairs = np.abs(table.delta) > group_tol
    sums = table.psum[pairs]
    weights = table.weight[pairs]
    labels, reps = group_values(sums, group_tol)
    coupled = np.zeros(reps.size, dtype=bool)
    np.logical_or.at(coupled, labels, weights > weight_tol)

    card_S = int(reps.size)
    card_J = int(np.count_nonzero(~coupled))
    r = spec.rank
    return NStarReport(
        n_star=card_S - card_J,
        card_S=card_S,
        card_J=card_J,
        distinct_sums=[float(x) for x in reps],
        rank_bound=r * (r + 1) // 2,
        group_tol=group_tol,
    )
