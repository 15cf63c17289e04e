"""Krylov and Taylor lower-bound hierarchies on the QFI.

Both hierarchies reduce to weighted power sums over the transition table
because the superoperator ``R_rho(X) = (rho X + X rho)/2`` acts on the
eigen-pair component ``(k, l)`` as multiplication by ``x = (p_k + p_l)/2``.
With ``m = |<k|i[rho,H]|l>|^2`` the moments are ``T_j = sum m x^j`` and the
QFI is ``sum m / x``.

Two routes to the Krylov bound ``b^T A^{-1} b`` are provided:

* ``krylov_bound`` solves the Hankel system built from a ``MomentVector``
  (the only option for estimated moments);
* ``krylov_bounds`` / ``krylov_chain`` run a Stieltjes (Lanczos) process on
  the discrete measure ``m x`` held in the table, which stays accurate for
  orders far beyond where the Hankel matrix is numerically singular.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import exact
from .errors import DimensionOverflow, OrderExceedsNStar, ZeroQFI
from .qcore import apply_R, as_matrix, commutator_i

__all__ = [
    "MomentVector",
    "BoundValue",
    "KappaReport",
    "moments_spectral",
    "moments_operator",
    "hankel_system",
    "krylov_bound",
    "krylov_bounds",
    "krylov_chain",
    "build_L_n",
    "taylor_bound",
    "taylor_bounds",
    "taylor_bound_tensor_oracle",
    "swap_operator",
    "kappa",
    "convergence_envelope",
    "relative_gap",
    "PD_TOL",
    "TENSOR_ORACLE_MAX_DIM",
]

PD_TOL = 1e-13
GAP_TOL = 1e-12
TENSOR_ORACLE_MAX_DIM = 16


@dataclass(frozen=True, eq=False)
class MomentVector:
    """``T_0 .. T_kmax`` with ``T_j = tr(i[rho,H] R_rho^j(i[rho,H]))``."""

    values: np.ndarray

    @property
    def k_max(self):
        return self.values.shape[0] - 1

    def __getitem__(self, j):
        return self.values[j]

    def __len__(self):
        return self.values.shape[0]


@dataclass
class BoundValue:
    order: int
    value: float
    kind: str
    gap: float | None = None
    flags: tuple = field(default_factory=tuple)


@dataclass
class KappaReport:
    kappa: float
    p_max: float
    p_min: float
    full_rank: bool


def _xsum(terms, axis=None):
    return np.sum(np.asarray(terms, dtype=np.longdouble), axis=axis).astype(float)


def moments_spectral(table, k_max):
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    powers = table.nodes[None, :] ** np.arange(k_max + 1)[:, None]
    return MomentVector(_xsum(powers * table.mass[None, :], axis=1))


def moments_operator(rho, H, k_max):
    """Literal nested evaluation through repeated ``apply_R``."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    r = as_matrix(rho)
    c = commutator_i(r, H)
    x = c
    out = np.empty(k_max + 1)
    for j in range(k_max + 1):
        out[j] = np.real(np.sum(c * x.T))
        x = apply_R(r, x)
    return MomentVector(out)


def hankel_system(moments, n):
    """``A_ij = T_{i+j-1}``, ``b_i = T_{i-1}`` (1-based indices)."""
    T = np.asarray(moments.values if isinstance(moments, MomentVector) else moments)
    if n < 1:
        raise ValueError("order must be >= 1")
    if 2 * n - 1 > T.shape[0] - 1:
        raise ValueError(f"order {n} needs moments up to T_{2 * n - 1}")
    idx = np.arange(n)
    A = T[idx[:, None] + idx[None, :] + 1]
    b = T[:n].copy()
    return A, b


def _with_gap(bv, fq):
    if fq is not None and fq > GAP_TOL:
        bv.gap = abs(bv.value - fq) / fq
    return bv


def krylov_bound(moments, n, fq=None, pd_tol=PD_TOL):
    """``B_n = b^T A^{-1} b`` by Cholesky on the Hankel moment matrix.

    A pivot below ``pd_tol * T_1`` means ``A`` is singular to working
    precision, i.e. ``n`` is beyond the termination order.
    """
    A, b = hankel_system(moments, n)
    if b[0] <= 0 or A[0, 0] <= 0:
        return _with_gap(BoundValue(n, 0.0, "krylov"), fq)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise OrderExceedsNStar(f"moment matrix of order {n} is not positive definite") from exc
    pivots = np.diag(L) ** 2
    if pivots.min() < pd_tol * A[0, 0]:
        raise OrderExceedsNStar(
            f"moment matrix of order {n} is singular (pivot {pivots.min():.3g})"
        )
    y = solve_triangular(L, b, lower=True)
    return _with_gap(BoundValue(n, float(y @ y), "krylov"), fq)


class _Stieltjes:
    """Orthonormal polynomial basis for the measure ``m x`` on the table nodes.

    Vectors are stored pre-multiplied by ``sqrt(m x)`` so the inner product is
    the Euclidean one. The target is ``1/x``, i.e. ``sqrt(m / x)``.
    """

    def __init__(self, table):
        keep = table.mass > 0
        self.rows = np.flatnonzero(keep)
        self.x = table.nodes[keep]
        self.m = table.mass[keep]
        self.sqrt_nu = np.sqrt(self.m * self.x)
        self.target = np.sqrt(self.m / self.x)
        self.basis = []
        self.coef = []
        self.exhausted = self.x.size == 0
        if not self.exhausted:
            norm = np.linalg.norm(self.sqrt_nu)
            self._push(self.sqrt_nu / norm)

    def _push(self, q):
        self.basis.append(q)
        self.coef.append(float(q @ self.target))

    def extend(self, n):
        x_max = self.x.max() if self.x.size else 0.0
        while len(self.basis) < n and not self.exhausted:
            w = self.x * self.basis[-1]
            Q = np.array(self.basis)
            for _ in range(2):
                w = w - Q.T @ (Q @ w)
            beta = np.linalg.norm(w)
            if beta <= 1e-12 * x_max:
                self.exhausted = True
                break
            self._push(w / beta)
        return len(self.basis)

    def values(self):
        return np.cumsum(np.square(self.coef))

    def projection(self, n):
        """Weighted values of the best degree-(n-1) approximation to ``1/x``."""
        Q = np.array(self.basis[:n])
        return np.asarray(self.coef[:n]) @ Q


def krylov_bounds(table, n_max):
    """``B_1 .. B_{n_max}`` from the spectral measure.

    Orders past the point where the Krylov space stops growing repeat the
    final value (the subspace, and hence the bound, no longer changes).
    """
    if n_max < 1:
        return np.zeros(0)
    st = _Stieltjes(table)
    if st.exhausted:
        return np.zeros(n_max)
    st.extend(n_max)
    vals = st.values()
    if vals.size < n_max:
        vals = np.concatenate([vals, np.full(n_max - vals.size, vals[-1])])
    return vals


def krylov_chain(table, spec, group_tol=exact.GROUP_TOL, fq=None):
    """The full chain ``B_1 < ... < B_{n*}``."""
    ns = exact.n_star(table, spec, group_tol).n_star
    if fq is None:
        fq = exact.qfi_exact(table)
    vals = krylov_bounds(table, ns)
    return [_with_gap(BoundValue(i + 1, float(v), "krylov"), fq) for i, v in enumerate(vals)]


def build_L_n(table, spec, n, group_tol=exact.GROUP_TOL):
    """Best approximation to the SLD inside the order-``n`` Krylov space.

    Returned in the computational basis.
    """
    ns = exact.n_star(table, spec, group_tol).n_star
    d = table.dim
    if ns == 0:
        return np.zeros((d, d), dtype=complex)
    if n < 1 or n > ns:
        raise OrderExceedsNStar(f"order {n} outside 1..n*={ns}")
    st = _Stieltjes(table)
    st.extend(n)
    proj = st.projection(min(n, len(st.basis)))
    poly = proj / st.sqrt_nu
    rows = st.rows
    v = 1j * table.delta[rows] * table.h[rows]
    L = np.zeros((d, d), dtype=complex)
    L[table.k[rows], table.l[rows]] = poly * v
    u = spec.eigenvectors
    L = u @ L @ u.conj().T
    return 0.5 * (L + L.conj().T)


def taylor_bounds(table, n_max, fq=None):
    """``B_0 .. B_{n_max}`` of the Taylor hierarchy.

    Per pair the order-``n`` truncation is ``2 m sum_{j<=n} (1 - p_k - p_l)^j``.
    Only odd orders are guaranteed lower bounds; even orders carry the flag
    ``not_guaranteed_lower_bound``.
    """
    r = 1.0 - table.psum
    m = table.mass
    acc = np.zeros_like(r)
    term = np.ones_like(r)
    out = []
    for n in range(n_max + 1):
        acc = acc + term
        term = term * r
        flags = () if n % 2 == 1 else ("not_guaranteed_lower_bound",)
        out.append(_with_gap(BoundValue(n, 2.0 * float(_xsum(m * acc)), "taylor", flags=flags), fq))
    return out


def taylor_bound(table, n, fq=None):
    if n < 0:
        raise ValueError("Taylor order must be >= 0")
    return taylor_bounds(table, n, fq)[-1]


def swap_operator(d):
    S = np.zeros((d * d, d * d))
    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    S[(j * d + i).ravel(), (i * d + j).ravel()] = 1.0
    return S


def taylor_bound_tensor_oracle(rho, H, n):
    """Verbatim doubled-space evaluation of the Taylor bound.

    ``2 tr( sum_{j<=n} (rho x 1 - 1 x rho)^2 (1 x 1 - rho x 1 - 1 x rho)^j S (H x H) )``.
    """
    r = as_matrix(rho)
    h = as_matrix(H)
    d = r.shape[0]
    if d > TENSOR_ORACLE_MAX_DIM:
        raise DimensionOverflow(f"tensor oracle limited to d <= {TENSOR_ORACLE_MAX_DIM}")
    eye = np.eye(d)
    P = np.kron(r, eye)
    Q = np.kron(eye, r)
    D = (P - Q) @ (P - Q)
    G = np.eye(d * d) - P - Q
    SHH = swap_operator(d) @ np.kron(h, h)
    total = np.zeros((d * d, d * d), dtype=complex)
    term = D
    for _ in range(n + 1):
        total += term
        term = term @ G
    return float(2.0 * np.real(np.trace(total @ SHH)))


def kappa(spec):
    """Condition number ``p_max/p_min`` (full rank) or ``2 p_max/p_min``."""
    full = spec.full_rank
    ratio = spec.p_max / spec.p_min
    return KappaReport(ratio if full else 2.0 * ratio, spec.p_max, spec.p_min, full)


def convergence_envelope(kappa_value, n):
    """``4 [(sqrt(k) - 1)/(sqrt(k) + 1)]^(2n)``; values above 1 are returned as-is."""
    if kappa_value < 1:
        raise ValueError("condition number must be >= 1")
    s = np.sqrt(kappa_value)
    return float(4.0 * ((s - 1.0) / (s + 1.0)) ** (2 * n))


def relative_gap(bound, fq, gap_tol=GAP_TOL):
    if fq <= gap_tol:
        raise ZeroQFI(f"QFI {fq:.3g} too small for a relative gap")
    return abs(bound - fq) / fq
