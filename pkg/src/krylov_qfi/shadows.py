"""Randomized-Pauli classical shadows and batch U-statistics.

Conventions
-----------
* Qubit 0 is the leftmost tensor factor (most significant bit).
* A basis combination is a string over ``XYZ``; internally it is the base-3
  integer with digits ``X=0, Y=1, Z=2``, qubit 0 most significant.
* An outcome is a bitstring; internally the integer with qubit 0 as MSB.
* A shadow record is keyed by ``combo * 2**N + outcome``.

Shadows are drawn in fixed-size chunks, each with its own substream
``SeedSequence(seed, spawn_key=(chunk,))``, so the stream does not depend on
how many workers produce it. Shadow ``g`` of the stream goes to batch
``g % B``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import qcore
from .bounds import hankel_system
from .errors import (
    DimensionMismatch,
    EmptyBatch,
    InsufficientBatches,
    SingularEstimate,
)
from .qcore import apply_R, as_matrix

__all__ = [
    "ShadowStream",
    "ShadowCounts",
    "ShadowBatch",
    "EstimateRecord",
    "snapshot_matrix",
    "born_table",
    "sample_stream",
    "sample_shadows",
    "batch_means",
    "plugin_batches",
    "u_stat_Tk",
    "u_stat_W",
    "taylor_coefficients",
    "estimate_moments",
    "estimate_krylov",
    "estimate_krylov_from_batches",
    "estimate_taylor",
    "estimate_taylor_from_batches",
    "solve_moment_system",
    "CHUNK_SIZE",
    "BORN_TABLE_MAX_QUBITS",
]

CHUNK_SIZE = 1 << 16
#: Above this qubit count Born probabilities are computed per basis combination
#: on demand instead of as one precomputed table.
BORN_TABLE_MAX_QUBITS = 8
TRUNCATION_TOL = 1e-10

_BASIS_LETTERS = "XYZ"
_INV_SQRT2 = 1 / math.sqrt(2)
# rotations taking the measured eigenbasis onto the computational basis
_ROTATIONS = np.array(
    [
        [[_INV_SQRT2, _INV_SQRT2], [_INV_SQRT2, -_INV_SQRT2]],
        [[_INV_SQRT2, -1j * _INV_SQRT2], [_INV_SQRT2, 1j * _INV_SQRT2]],
        [[1, 0], [0, 1]],
    ],
    dtype=complex,
)


def _single_qubit_snapshots():
    out = np.empty((6, 2, 2), dtype=complex)
    for b in range(3):
        u = _ROTATIONS[b]
        for bit in range(2):
            s = u.conj().T[:, bit]
            out[2 * b + bit] = 3 * np.outer(s, s.conj()) - np.eye(2)
    return out


_SNAPSHOT_FACTORS = _single_qubit_snapshots()


def _parse_basis(basis_combo):
    if isinstance(basis_combo, str):
        return [_BASIS_LETTERS.index(c) for c in basis_combo.upper()]
    return [(_BASIS_LETTERS.index(c.upper()) if isinstance(c, str) else int(c)) for c in basis_combo]


def _parse_bits(outcome):
    if isinstance(outcome, str):
        return [int(c) for c in outcome]
    return [int(b) for b in outcome]


def snapshot_matrix(basis_combo, outcome):
    """Inverse-channel snapshot ``kron_i (3 |s_i><s_i| - 1)``."""
    bases = _parse_basis(basis_combo)
    bits = _parse_bits(outcome)
    if len(bases) != len(bits):
        raise DimensionMismatch("basis and outcome lengths differ")
    out = np.ones((1, 1), dtype=complex)
    for b, bit in zip(bases, bits):
        out = np.kron(out, _SNAPSHOT_FACTORS[2 * b + bit])
    return out


def _num_qubits(d):
    n = int(round(math.log2(d)))
    if 2**n != d:
        raise DimensionMismatch(f"dimension {d} is not a power of two")
    return n


def born_table(rho):
    """Outcome probabilities for every basis combination, shape ``(3**N, 2**N)``.

    Entry ``[c, o]`` is ``<o| U_c rho U_c^dag |o>``; rows sum to one.
    """
    r = as_matrix(rho)
    N = _num_qubits(r.shape[0])
    R = r.shape[0] // 2
    T = r.reshape(1, 2, R, 2, R)
    for _ in range(N):
        Y = np.einsum("bxa,kaRcS,bxc->kbxRS", _ROTATIONS, T, _ROTATIONS.conj())
        K = Y.shape[0] * 6
        T = Y.reshape(K, R, R)
        if R > 1:
            R //= 2
            T = T.reshape(K, 2, R, 2, R)
    probs = np.real(T.reshape((3, 2) * N))
    # digits are (basis_0, bit_0, basis_1, bit_1, ...); regroup as (bases, bits)
    probs = probs.transpose(list(range(0, 2 * N, 2)) + list(range(1, 2 * N, 2)))
    probs = probs.reshape(3**N, 2**N)
    return np.clip(probs, 0.0, None)


def _born_row(rho, combo, N):
    digits = np.base_repr(combo, 3).zfill(N) if N else ""
    u = np.ones((1, 1), dtype=complex)
    for ch in digits:
        u = np.kron(u, _ROTATIONS[int(ch)])
    r = as_matrix(rho)
    return np.clip(np.real(np.einsum("ij,jk,ik->i", u, r, u.conj())), 0.0, None)


def _draw_chunk(prob_source, N, seed, chunk, size):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
    combos = rng.integers(0, 3**N, size=size)
    u = rng.random(size)
    outcomes = np.empty(size, dtype=np.int64)
    order = np.argsort(combos, kind="stable")
    present, starts = np.unique(combos[order], return_index=True)
    stops = np.append(starts[1:], size)
    d = 2**N
    for c, lo, hi in zip(present, starts, stops):
        idx = order[lo:hi]
        p = prob_source(c)
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
        outcomes[idx] = np.minimum(np.searchsorted(cdf, u[idx], side="right"), d - 1)
    return combos.astype(np.int64), outcomes


@dataclass(frozen=True, eq=False)
class ShadowStream:
    """Per-shadow basis combinations and outcomes, in draw order."""

    num_qubits: int
    seed: int
    combos: np.ndarray
    outcomes: np.ndarray

    def __len__(self):
        return self.combos.shape[0]

    def tally(self, num_batches):
        """Round-robin the stream into ``num_batches`` aggregated batches."""
        M = len(self)
        if not 1 <= num_batches <= M:
            raise InsufficientBatches(f"need 1 <= B <= M, got B={num_batches}, M={M}")
        keys = self.combos * (2**self.num_qubits) + self.outcomes
        batch = np.arange(M) % num_batches
        batches = []
        for b in range(num_batches):
            k, c = np.unique(keys[batch == b], return_counts=True)
            batches.append((k.astype(np.int64), c.astype(np.int64)))
        return ShadowCounts(self.num_qubits, M, num_batches, self.seed, batches)


def sample_stream(rho, M, seed, workers=1, chunk_size=CHUNK_SIZE):
    r = as_matrix(rho)
    N = _num_qubits(r.shape[0])
    qcore.check_dimension(N)
    if M < 1:
        raise ValueError("M must be >= 1")
    if N <= BORN_TABLE_MAX_QUBITS:
        table = born_table(r)

        def prob_source(c):
            return table[c]

    else:
        cache = {}

        def prob_source(c):
            if c not in cache:
                cache[c] = _born_row(r, int(c), N)
            return cache[c]

    n_chunks = -(-M // chunk_size)
    sizes = [min(chunk_size, M - i * chunk_size) for i in range(n_chunks)]
    jobs = [(prob_source, N, seed, i, s) for i, s in enumerate(sizes)]
    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _draw_chunk(*a), jobs))
    else:
        parts = [_draw_chunk(*a) for a in jobs]
    combos = np.concatenate([p[0] for p in parts])
    outcomes = np.concatenate([p[1] for p in parts])
    return ShadowStream(N, int(seed), combos, outcomes)


def sample_shadows(rho, M, num_batches, seed, workers=1):
    """Draw ``M`` randomized-Pauli shadows and split them into batches."""
    if not 1 <= num_batches <= M:
        raise InsufficientBatches(f"need 1 <= B <= M, got B={num_batches}, M={M}")
    return sample_stream(rho, M, seed, workers=workers).tally(num_batches)


@dataclass(eq=False)
class ShadowCounts:
    """Aggregated shadow records.

    ``batches[b]`` is a pair of arrays ``(keys, counts)`` sorted by key.
    """

    num_qubits: int
    total_shadows: int
    num_batches: int
    seed: int
    batches: list = field(default_factory=list)

    def batch_sizes(self):
        return [int(c.sum()) for _, c in self.batches]

    def decode_key(self, key):
        d = 2**self.num_qubits
        combo, outcome = divmod(int(key), d)
        N = self.num_qubits
        basis = "".join(_BASIS_LETTERS[int(ch)] for ch in np.base_repr(combo, 3).zfill(N)[-N:])
        bits = format(outcome, f"0{N}b")
        return basis, bits

    def encode_key(self, basis, bits):
        combo = 0
        for b in _parse_basis(basis):
            combo = 3 * combo + b
        return combo * 2**self.num_qubits + int("".join(str(b) for b in _parse_bits(bits)), 2)

    def count_map(self, b):
        keys, counts = self.batches[b]
        return {self.decode_key(k): int(c) for k, c in zip(keys, counts)}

    def __eq__(self, other):
        if not isinstance(other, ShadowCounts):
            return NotImplemented
        head = (self.num_qubits, self.total_shadows, self.num_batches, self.seed)
        if head != (other.num_qubits, other.total_shadows, other.num_batches, other.seed):
            return False
        return all(
            np.array_equal(k1, k2) and np.array_equal(c1, c2)
            for (k1, c1), (k2, c2) in zip(self.batches, other.batches)
        )

    # -- serialization -------------------------------------------------
    def to_text(self):
        lines = [
            "# shadow-counts v1",
            f"# N={self.num_qubits} M={self.total_shadows} B={self.num_batches} seed={self.seed}",
        ]
        for b, (keys, counts) in enumerate(self.batches):
            lines.append(f"# batch {b} size={int(counts.sum())}")
            for k, c in zip(keys, counts):
                basis, bits = self.decode_key(k)
                lines.append(f"{basis},{bits},{int(c)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# shadow-counts"):
            raise ValueError("not a shadow-counts file")
        head = dict(item.split("=") for item in lines[1].lstrip("# ").split())
        out = cls(int(head["N"]), int(head["M"]), int(head["B"]), int(head["seed"]), [])
        current = None
        for line in lines[2:]:
            if not line.strip():
                continue
            if line.startswith("# batch"):
                if current is not None:
                    out.batches.append(_pack(current))
                current = []
                continue
            basis, bits, count = line.split(",")
            current.append((out.encode_key(basis, bits), int(count)))
        if current is not None:
            out.batches.append(_pack(current))
        if len(out.batches) != out.num_batches:
            raise ValueError("batch count does not match header")
        return out

    def save(self, path):
        path = str(path)
        if path.endswith(".npz"):
            arrays = {"header": np.array([self.num_qubits, self.total_shadows, self.num_batches, self.seed])}
            for b, (k, c) in enumerate(self.batches):
                arrays[f"keys_{b}"] = k
                arrays[f"counts_{b}"] = c
            np.savez_compressed(path, **arrays)
        else:
            with open(path, "w") as fh:
                fh.write(self.to_text())

    @classmethod
    def load(cls, path):
        path = str(path)
        if path.endswith(".npz"):
            with np.load(path) as data:
                N, M, B, seed = (int(v) for v in data["header"])
                batches = [(data[f"keys_{b}"], data[f"counts_{b}"]) for b in range(B)]
            return cls(N, M, B, seed, batches)
        with open(path) as fh:
            return cls.from_text(fh.read())


def _pack(pairs):
    pairs.sort()
    keys = np.array([p[0] for p in pairs], dtype=np.int64)
    counts = np.array([p[1] for p in pairs], dtype=np.int64)
    return keys, counts


@dataclass(frozen=True, eq=False)
class ShadowBatch:
    mean: np.ndarray
    size: int


def _dense_mean(keys, counts, N):
    d = 2**N
    combo, outcome = np.divmod(keys, d)
    dense = np.zeros(6**N)
    idx = np.zeros_like(keys)
    for q in range(N):
        b = (combo // 3 ** (N - 1 - q)) % 3
        bit = (outcome >> (N - 1 - q)) & 1
        idx = idx * 6 + 2 * b + bit
    np.add.at(dense, idx, counts)
    T = dense.reshape((6,) * N).astype(complex)
    for _ in range(N):
        T = np.tensordot(T, _SNAPSHOT_FACTORS, axes=([0], [0]))
    T = T.transpose(list(range(0, 2 * N, 2)) + list(range(1, 2 * N, 2)))
    return T.reshape(d, d)


def _sparse_mean(counts_obj, keys, counts):
    d = 2**counts_obj.num_qubits
    acc = np.zeros((d, d), dtype=complex)
    for k, c in zip(keys, counts):
        acc += c * snapshot_matrix(*counts_obj.decode_key(k))
    return acc


def batch_means(counts):
    """Average snapshot of every batch, assembled from the aggregated counts."""
    out = []
    for keys, cnt in counts.batches:
        size = int(cnt.sum())
        if size == 0:
            raise EmptyBatch("batch without shadows")
        if counts.num_qubits <= BORN_TABLE_MAX_QUBITS:
            total = _dense_mean(keys, cnt, counts.num_qubits)
        else:
            total = _sparse_mean(counts, keys, cnt)
        mean = total / size
        out.append(ShadowBatch(0.5 * (mean + mean.conj().T), size))
    return out


def plugin_batches(rho, num_batches):
    """Batches whose means are exactly ``rho`` (noiseless limit)."""
    r = np.array(as_matrix(rho))
    return [ShadowBatch(r, 0) for _ in range(num_batches)]


def _means(batches):
    return [as_matrix(b.mean if isinstance(b, ShadowBatch) else b) for b in batches]


def u_stat_Tk(batches, H, k):
    """U-statistic for ``T_k`` over ordered tuples of ``k + 2`` distinct batches.

    The sum over all orderings of the inner ``R`` chain is accumulated
    subset-by-subset: ``G(U) = sum_{a in U} R_a(G(U - {a}))`` with
    ``G({a}) = i[rho_a, H]``.
    """
    rhos = _means(batches)
    B = len(rhos)
    m = k + 2
    if k < 0:
        raise ValueError("k must be >= 0")
    if B < m:
        raise InsufficientBatches(f"T_{k} needs {m} batches, got {B}")
    h = as_matrix(H)
    C = [1j * (r @ h - h @ r) for r in rhos]
    G = {(a,): C[a] for a in range(B)}
    for size in range(2, k + 2):
        nxt = {}
        for U in itertools.combinations(range(B), size):
            acc = 0
            for pos, a in enumerate(U):
                acc = acc + apply_R(rhos[a], G[U[:pos] + U[pos + 1 :]])
            nxt[U] = acc
        G = nxt
    total = 0.0
    for i1 in range(B):
        ct = C[i1].T
        for U, g in G.items():
            if i1 not in U:
                total += np.real(np.sum(ct * g))
    return float(total / math.perm(B, m))


def taylor_coefficients(n):
    """Integer coefficients ``c[a, b]`` of ``P^a Q^b`` in
    ``sum_{j<=n} (P - Q)^2 (1 - P - Q)^j`` for commuting ``P, Q``."""
    coef = {}
    power = {(0, 0): 1}
    for _ in range(n + 1):
        for (a, b), c in power.items():
            for (da, db, s) in ((2, 0, 1), (1, 1, -2), (0, 2, 1)):
                key = (a + da, b + db)
                coef[key] = coef.get(key, 0) + s * c
        nxt = {}
        for (a, b), c in power.items():
            for (da, db, s) in ((0, 0, 1), (1, 0, -1), (0, 1, -1)):
                key = (a + da, b + db)
                nxt[key] = nxt.get(key, 0) + s * c
        power = nxt
    return {k: v for k, v in coef.items() if v != 0}


def _ordered_products(rhos, max_size):
    """Sum over orderings of each subset's matrix product, keyed by subset."""
    d = rhos[0].shape[0]
    P = {(): np.eye(d, dtype=complex)}
    level = {(): P[()]}
    B = len(rhos)
    for size in range(1, max_size + 1):
        nxt = {}
        for U in itertools.combinations(range(B), size):
            acc = 0
            for pos, a in enumerate(U):
                acc = acc + rhos[a] @ level[U[:pos] + U[pos + 1 :]]
            nxt[U] = acc
        P.update(nxt)
        level = nxt
    return P


def u_stat_W(batches, H, degrees):
    """U-statistics for ``W_{a,b} = tr(rho^a H rho^b H)``.

    ``degrees`` is an iterable of ``(a, b)``; returns ``{(a, b): estimate}``.
    Each estimate averages ``tr(rho_{i1}..rho_{ia} H rho_{j1}..rho_{jb} H)``
    over ordered tuples of ``a + b`` distinct batches.
    """
    degrees = sorted(set(degrees))
    rhos = _means(batches)
    B = len(rhos)
    top = max((a + b for a, b in degrees), default=0)
    if B < top:
        raise InsufficientBatches(f"degree {top} needs {top} batches, got {B}")
    h = as_matrix(H)
    P = _ordered_products(rhos, max(max((a for a, _ in degrees), default=0), max((b for _, b in degrees), default=0)))
    PH = {U: p @ h for U, p in P.items()}
    by_size = {}
    for U in PH:
        by_size.setdefault(len(U), []).append(U)
    out = {}
    for a, b in degrees:
        total = 0.0
        for U in by_size.get(a, []):
            su = set(U)
            left = PH[U]
            for V in by_size.get(b, []):
                if su.isdisjoint(V):
                    total += np.real(np.sum(left * PH[V].T))
        out[(a, b)] = float(total / math.perm(B, a + b))
    return out


def estimate_moments(batches, H, k_max):
    return np.array([u_stat_Tk(batches, H, k) for k in range(k_max + 1)])


def solve_moment_system(T, n):
    """``b^T A^{-1} b`` from (possibly noisy) moments.

    Cholesky first; if the estimated ``A`` is not positive definite, a
    symmetric eigendecomposition with eigenvalues below
    ``1e-10 * max|lambda|`` discarded. Returns ``(value, strategy)``.
    """
    A, b = hankel_system(np.asarray(T), n)
    try:
        L = np.linalg.cholesky(A)
        y = solve_triangular(L, b, lower=True)
        return float(y @ y), "cholesky"
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(A)
    scale = np.max(np.abs(w)) if w.size else 0.0
    keep = np.abs(w) > TRUNCATION_TOL * scale
    if scale == 0 or not keep.any():
        raise SingularEstimate(f"estimated moment matrix of order {n} is singular")
    c = V.T @ b
    return float(np.sum(c[keep] ** 2 / w[keep])), "eigh_truncated"


@dataclass
class EstimateRecord:
    kind: str
    value: float
    n: int
    M: int
    seed: int
    indices: tuple = ()
    strategy: str = ""
    moments: tuple = ()


def estimate_krylov_from_batches(batches, H, n, M=0, seed=0):
    if len(batches) < 2 * n + 1:
        raise InsufficientBatches(f"order {n} needs {2 * n + 1} batches, got {len(batches)}")
    T = estimate_moments(batches, H, 2 * n - 1)
    value, strategy = solve_moment_system(T, n)
    return EstimateRecord("krylov_bound", value, n, M, seed, (n,), strategy, tuple(float(t) for t in T))


def estimate_krylov(counts, H, n):
    """Batch-shadow estimate of the order-``n`` Krylov bound.

    Uses every batch in ``counts`` (normally ``2n + 1`` of them) to form
    ``T_0 .. T_{2n-1}`` and solves the Hankel system.
    """
    if counts.num_batches < 2 * n + 1:
        raise InsufficientBatches(f"order {n} needs {2 * n + 1} batches, got {counts.num_batches}")
    return estimate_krylov_from_batches(batch_means(counts), H, n, counts.total_shadows, counts.seed)


def estimate_taylor_from_batches(batches, H, n, M=0, seed=0):
    if len(batches) < n + 2:
        raise InsufficientBatches(f"Taylor order {n} needs {n + 2} batches, got {len(batches)}")
    coef = taylor_coefficients(n)
    W = u_stat_W(batches, H, coef.keys())
    value = 2.0 * math.fsum(c * W[key] for key, c in coef.items())
    return EstimateRecord("taylor_bound", value, n, M, seed, (n,), "u_statistic")


def estimate_taylor(counts, H, n):
    """Unbiased estimate of the order-``n`` Taylor bound via ``W_{a,b}`` terms."""
    if counts.num_batches < n + 2:
        raise InsufficientBatches(f"Taylor order {n} needs {n + 2} batches, got {counts.num_batches}")
    return estimate_taylor_from_batches(batch_means(counts), H, n, counts.total_shadows, counts.seed)
