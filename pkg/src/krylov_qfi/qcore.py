"""Dense Hermitian linear algebra for states and observables.

Everything spectral in this package is evaluated from a ``TransitionTable``:
the list of eigenvalue pairs ``(p_k, p_l)`` of a state together with the
squared matrix elements ``|<k|H|l>|^2`` of the generator in the state's
eigenbasis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DecompositionFailure,
    DimensionMismatch,
    DimensionOverflow,
    NotDensityMatrix,
    NotHermitian,
)

__all__ = [
    "MAX_QUBITS",
    "HERMITIAN_TOL",
    "DensityMatrix",
    "Observable",
    "Spectrum",
    "TransitionTable",
    "as_matrix",
    "eigh",
    "collective_z",
    "pauli",
    "build_transition_table",
    "weighted_inner",
    "apply_R",
    "commutator_i",
    "default_rank_tol",
    "check_dimension",
]

#: Largest qubit count accepted by constructors that take ``N``.
MAX_QUBITS = 12

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10


def default_rank_tol(dim):
    return 1e-10 * dim


def check_dimension(num_qubits, max_qubits=None):
    cap = MAX_QUBITS if max_qubits is None else max_qubits
    if num_qubits < 1:
        raise ValueError(f"need at least one qubit, got {num_qubits}")
    if num_qubits > cap:
        raise DimensionOverflow(f"2**{num_qubits} exceeds the cap of 2**{cap}")
    return 2**num_qubits


def as_matrix(obj):
    """Return the underlying complex ndarray of a state, observable or array."""
    if isinstance(obj, (DensityMatrix, Observable)):
        return obj.data
    arr = np.asarray(obj, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {arr.shape}")
    return arr


def _hermiticity_defect(a):
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigendecomposition of a density matrix, eigenvalues sorted descending.

    Eigenvalues below ``rank_tol`` are stored as exact zeros and the
    remaining ones renormalised to unit sum.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rank: int
    rank_tol: float

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    @property
    def nonzero(self):
        return self.eigenvalues[: self.rank]

    @property
    def p_max(self):
        return float(self.eigenvalues[0])

    @property
    def p_min(self):
        return float(self.eigenvalues[self.rank - 1])

    @property
    def full_rank(self):
        return self.rank == self.dim

    def reconstruct(self):
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def eigh(rho, rank_tol=None):
    """Eigendecomposition of a density matrix with rank accounting.

    Eigenvectors are phase-fixed so that the largest-magnitude component of
    each column is real and positive; this makes cached decompositions
    reproducible.
    """
    a = as_matrix(rho)
    d = a.shape[0]
    if _hermiticity_defect(a) > HERMITIAN_TOL:
        raise NotHermitian(f"Hermiticity defect {_hermiticity_defect(a):.3g}")
    if rank_tol is None:
        rank_tol = default_rank_tol(d)
    try:
        w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    except np.linalg.LinAlgError as exc:
        raise DecompositionFailure(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise DecompositionFailure("non-finite eigenvalues")
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order]
    if w[-1] < -PSD_TOL:
        raise NotDensityMatrix(f"negative eigenvalue {w[-1]:.3g}")
    w = np.where(w < rank_tol, 0.0, w)
    total = w.sum()
    if total <= 0:
        raise NotDensityMatrix("no eigenvalue above rank_tol")
    w = w / total

    idx = np.argmax(np.abs(v), axis=0)
    pivots = v[idx, np.arange(d)]
    v = v * (np.abs(pivots) / pivots)

    w.setflags(write=False)
    v.setflags(write=False)
    return Spectrum(w, v, int(np.count_nonzero(w)), float(rank_tol))


class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix.

    Construction validates the invariants (Hermiticity to 1e-12, trace to
    1e-10, eigenvalues >= -1e-10) and caches the default eigendecomposition.
    """

    def __init__(self, data, *, validate=True):
        self.data = _frozen(data)
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got {self.data.shape}")
        if validate:
            defect = _hermiticity_defect(self.data)
            if defect > HERMITIAN_TOL:
                raise NotHermitian(f"Hermiticity defect {defect:.3g}")
            tr = np.trace(self.data)
            if abs(tr - 1) > TRACE_TOL:
                raise NotDensityMatrix(f"trace {tr:.12g} != 1")
            _ = self.spectrum

    @classmethod
    def from_vector(cls, psi):
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self):
        return self.data.shape[0]

    @cached_property
    def spectrum(self):
        return eigh(self.data)

    def purity(self):
        return float(np.real(np.vdot(self.data, self.data)))

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, rank={self.spectrum.rank})"


class Observable:
    """Hermitian operator playing the role of the phase generator."""

    def __init__(self, data):
        self.data = _frozen(data)
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got {self.data.shape}")
        defect = _hermiticity_defect(self.data)
        if defect > HERMITIAN_TOL:
            raise NotHermitian(f"Hermiticity defect {defect:.3g}")

    @property
    def dim(self):
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"Observable(dim={self.dim})"


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(label):
    """Tensor product of Pauli matrices, qubit 0 leftmost (most significant)."""
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, _PAULI[ch])
    return out


def collective_z(num_qubits, max_qubits=None):
    """``H = 1/2 sum_i sigma_z^(i)``; diagonal entry ``(N - 2 popcount(b)) / 2``."""
    d = check_dimension(num_qubits, max_qubits)
    popcount = np.array([bin(b).count("1") for b in range(d)], dtype=float)
    return Observable(np.diag(0.5 * (num_qubits - 2 * popcount)))


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """Ordered eigen-pairs ``(k, l)`` with ``p_k + p_l > pair_tol``.

    ``h`` holds the complex matrix elements ``<k|H|l>``; ``weight = |h|^2``.
    Diagonal pairs ``k == l`` are included (they carry zero population
    difference). ``h_max`` is the largest ``|H_ij|`` in the computational
    basis.
    """

    dim: int
    k: np.ndarray
    l: np.ndarray
    pk: np.ndarray
    pl: np.ndarray
    h: np.ndarray
    weight: np.ndarray
    pair_tol: float
    h_max: float = 0.0

    def __len__(self):
        return self.k.shape[0]

    @property
    def delta(self):
        return self.pk - self.pl

    @property
    def psum(self):
        return self.pk + self.pl

    @property
    def nodes(self):
        """Eigenvalues ``(p_k + p_l) / 2`` of the superoperator on each pair."""
        return 0.5 * (self.pk + self.pl)

    @property
    def mass(self):
        """``|<k| i[rho, H] |l>|^2 = (p_k - p_l)^2 |<k|H|l>|^2``."""
        return self.delta**2 * self.weight


def build_transition_table(spec, H, pair_tol=None):
    Hm = as_matrix(H)
    if Hm.shape[0] != spec.dim:
        raise DimensionMismatch(f"state dim {spec.dim} vs observable dim {Hm.shape[0]}")
    if pair_tol is None:
        pair_tol = spec.rank_tol
    u = spec.eigenvectors
    h_eig = u.conj().T @ Hm @ u
    p = spec.eigenvalues
    keep = (p[:, None] + p[None, :]) > pair_tol
    k, l = np.nonzero(keep)
    h = h_eig[k, l]
    return TransitionTable(
        dim=spec.dim,
        k=k,
        l=l,
        pk=p[k].copy(),
        pl=p[l].copy(),
        h=h,
        weight=np.abs(h) ** 2,
        pair_tol=float(pair_tol),
        h_max=float(np.max(np.abs(Hm))) if Hm.size else 0.0,
    )


def _check_same_dim(*mats):
    d = mats[0].shape[0]
    for m in mats[1:]:
        if m.shape[0] != d:
            raise DimensionMismatch(f"dimensions {d} and {m.shape[0]} differ")


def weighted_inner(X, Y, rho):
    """``<X, Y>_rho = tr[rho (XY + YX) / 2]``."""
    x, y, r = as_matrix(X), as_matrix(Y), as_matrix(rho)
    _check_same_dim(x, y, r)
    # tr(r x y) and tr(r y x) via elementwise products, no d^3 matmul
    rx = r @ x
    ry = r @ y
    val = 0.5 * (np.sum(rx * y.T) + np.sum(ry * x.T))
    return float(val.real)


def apply_R(rho, X):
    """The symmetrised multiplication superoperator ``(rho X + X rho) / 2``."""
    r, x = as_matrix(rho), as_matrix(X)
    _check_same_dim(r, x)
    return 0.5 * (r @ x + x @ r)


def commutator_i(rho, H):
    """``i[rho, H]``, Hermitian whenever both arguments are."""
    r, h = as_matrix(rho), as_matrix(H)
    _check_same_dim(r, h)
    return 1j * (r @ h - h @ r)
