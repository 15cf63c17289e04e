"""Seeded experiment drivers producing tabular results.

Every experiment is a pure function of its ``ExperimentConfig``: random
draws come from ``SeedSequence(config.seed, spawn_key=...)`` substreams keyed
by the trial's position, so results do not depend on ``workers``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    convergence_envelope,
    kappa,
    krylov_bounds,
    relative_gap,
    taylor_bounds,
)
from .ensembles import ENSEMBLE_KINDS, NOISE_KINDS, EnsembleSpec, draw
from .errors import ConfigError, SingularEstimate, ZeroQFI
from .exact import GROUP_TOL, n_star, qfi_exact
from .qcore import MAX_QUBITS, build_transition_table, collective_z
from .shadows import (
    estimate_krylov,
    estimate_krylov_from_batches,
    estimate_taylor,
    plugin_batches,
    sample_stream,
)

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentResult",
    "run_experiment",
    "run_gap_scan",
    "run_compare_taylor",
    "run_shadow_estimate",
    "run_exact_match_scatter",
    "run_detect",
    "write_result",
    "bounds_report",
    "ZERO_QFI_TOL",
]

ZERO_QFI_TOL = 1e-12

EXPERIMENTS = ("gap_scan", "compare_taylor", "shadow_estimate", "exact_match_scatter", "detect")

_DEFAULTS = {
    "gap_scan": dict(N=4, trials=100, orders=[1, 2, 3, 4, 5, 6], ensemble="fullrank_hs"),
    "compare_taylor": dict(N=4, trials=1, orders=[1, 2, 3, 4, 5, 6], ensemble="fullrank_hs"),
    "shadow_estimate": dict(
        N=4, trials=1, orders=[1, 2, 3], taylor_orders=[5],
        M_grid=[10**4, 10**5, 10**6], ensemble="rank_r", rank=2,
    ),
    "exact_match_scatter": dict(
        N=4, trials=100, orders=[3], M_grid=[10**6], ensemble="rank_r", rank=2,
    ),
    "detect": dict(
        N=4, trials=500, orders=[1, 2, 3], ensemble="noise_mixture",
        epsilon_grid=[0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
    ),
}

# fields that do not influence results and are left out of the config hash
_HASH_EXCLUDED = ("workers", "out_path")


@dataclass
class ExperimentConfig:
    experiment: str
    N: int = 4
    trials: int = 100
    orders: list = field(default_factory=lambda: [1, 2, 3])
    taylor_orders: list = field(default_factory=list)
    M_grid: list = field(default_factory=list)
    epsilon_grid: list = field(default_factory=list)
    ensemble: str = "fullrank_hs"
    rank: int | None = None
    noise_kind: str = "random_fullrank"
    repeats: int = 1
    noiseless: bool = False
    seed: int = 0
    workers: int = 1
    out_path: str = "results"

    @classmethod
    def for_experiment(cls, experiment, **overrides):
        """Config with the experiment's desk-scale defaults, then ``overrides``."""
        experiment = experiment.replace("-", "_")
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values = dict(_DEFAULTS[experiment])
        values.update({k: v for k, v in overrides.items() if v is not None})
        values["experiment"] = experiment
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not 1 <= int(self.N) <= MAX_QUBITS:
            raise ConfigError(f"N={self.N} outside 1..{MAX_QUBITS}")
        if self.trials < 1 or self.repeats < 1 or self.workers < 1:
            raise ConfigError("trials, repeats and workers must be >= 1")
        if not self.orders or any(int(n) < 1 for n in self.orders):
            raise ConfigError("orders must be a nonempty list of positive integers")
        if self.ensemble not in ENSEMBLE_KINDS:
            raise ConfigError(f"unknown ensemble {self.ensemble!r}")
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.noise_kind!r}")
        if self.ensemble == "rank_r" and not self.rank:
            raise ConfigError("rank_r ensemble needs rank")
        if self.experiment in ("shadow_estimate", "exact_match_scatter"):
            if not self.M_grid or any(int(m) < 1 for m in self.M_grid):
                raise ConfigError("M_grid must be a nonempty list of positive integers")
        if self.experiment == "detect":
            if not self.epsilon_grid:
                raise ConfigError("epsilon_grid must be nonempty")
            if any(not 0.0 <= float(e) <= 1.0 for e in self.epsilon_grid):
                raise ConfigError("epsilon values must lie in [0, 1]")
        if self.ensemble == "noise_mixture" and not self.epsilon_grid:
            raise ConfigError("noise_mixture ensemble needs epsilon_grid")
        if self.experiment == "detect" and self.ensemble != "noise_mixture":
            raise ConfigError("detect requires the noise_mixture ensemble")

    @property
    def dim(self):
        return 2 ** int(self.N)

    def to_dict(self):
        return asdict(self)

    def canonical_json(self):
        d = {k: v for k, v in self.to_dict().items() if k not in _HASH_EXCLUDED}
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def config_hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def ensemble_spec(self, epsilon=None):
        """Ensemble for one draw; non-sweeping experiments use ``epsilon_grid[0]``."""
        if epsilon is None and self.ensemble == "noise_mixture":
            epsilon = float(self.epsilon_grid[0])
        return EnsembleSpec(
            kind=self.ensemble,
            dim=self.dim,
            r=self.rank if self.ensemble == "rank_r" else None,
            epsilon=epsilon,
            noise_kind=self.noise_kind,
            seed=self.seed,
        )

    def substream(self, *key):
        return np.random.SeedSequence(int(self.seed), spawn_key=tuple(int(k) for k in key))


@dataclass
class ExperimentResult:
    experiment: str
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(row.get(c, "")) for c in self.columns])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _pmap(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _int_seed(ss):
    return int(ss.generate_state(1)[0])


def _analyze(rho, H):
    spec = rho.spectrum
    table = build_transition_table(spec, H)
    return spec, table, qfi_exact(table)


# -- gap scan --------------------------------------------------------------

def run_gap_scan(config):
    """Relative Krylov gaps for ``n = 1..max(orders)`` over random states."""
    H = collective_z(config.N)
    n_max = max(config.orders)
    ens = config.ensemble_spec()
    h = config.config_hash()

    def trial(t):
        rho = draw(ens, config.substream(0, t))
        spec, table, fq = _analyze(rho, H)
        if fq <= ZERO_QFI_TOL:
            return None
        kap = kappa(spec).kappa
        vals = krylov_bounds(table, n_max)
        return [
            dict(n=n, gap=relative_gap(vals[n - 1], fq), kappa=kap,
                 envelope=convergence_envelope(kap, n), fq=fq)
            for n in range(1, n_max + 1)
        ]

    results = _pmap(trial, range(config.trials), config.workers)
    rows = []
    skipped = 0
    per_n = {n: [] for n in range(1, n_max + 1)}
    for t, res in enumerate(results):
        if res is None:
            skipped += 1
            continue
        for r in res:
            per_n[r["n"]].append(r["gap"])
            rows.append(dict(trial=t, is_average=False, seed=config.seed, config_hash=h, **r))
    for n, gaps in per_n.items():
        if gaps:
            rows.append(dict(trial="avg", n=n, gap=float(np.mean(gaps)), is_average=True,
                             seed=config.seed, config_hash=h))
    columns = ["trial", "n", "gap", "kappa", "envelope", "fq", "is_average", "seed", "config_hash"]
    return ExperimentResult("gap_scan", columns, rows, {"skipped_zero_qfi": skipped})


# -- Krylov vs Taylor -------------------------------------------------------

def run_compare_taylor(config):
    """Krylov gap at order n against the Taylor gap at order 2n-1, one state."""
    H = collective_z(config.N)
    orders = sorted(set(int(n) for n in config.orders))
    rho = draw(config.ensemble_spec(), config.substream(0, 0))
    spec, table, fq = _analyze(rho, H)
    if fq <= ZERO_QFI_TOL:
        raise ZeroQFI("drawn state has vanishing QFI")
    kap = kappa(spec).kappa
    kry = krylov_bounds(table, max(orders))
    tay = taylor_bounds(table, 2 * max(orders) - 1)
    h = config.config_hash()
    rows = [
        dict(n=n, krylov_gap=relative_gap(kry[n - 1], fq), taylor_order=2 * n - 1,
             taylor_gap=relative_gap(tay[2 * n - 1].value, fq),
             envelope=convergence_envelope(kap, n), kappa=kap, fq=fq,
             seed=config.seed, config_hash=h)
        for n in orders
    ]
    columns = ["n", "krylov_gap", "taylor_order", "taylor_gap", "envelope", "kappa", "fq",
               "seed", "config_hash"]
    return ExperimentResult("compare_taylor", columns, rows, {"n_star": n_star(table, spec).n_star})


# -- shadow estimation -----------------------------------------------------

def run_shadow_estimate(config):
    """Shadow estimates of Krylov (and Taylor) bounds across the M grid.

    For each ``(M, repeat)`` one shadow stream is drawn; the order-n Krylov
    estimate re-partitions it into ``2n + 1`` batches and the order-n Taylor
    estimate into ``n + 2``.
    """
    H = collective_z(config.N)
    rho = draw(config.ensemble_spec(), config.substream(0, 0))
    spec, table, fq = _analyze(rho, H)
    kry_orders = sorted(set(int(n) for n in config.orders))
    tay_orders = sorted(set(int(n) for n in config.taylor_orders))
    kry_exact = krylov_bounds(table, max(kry_orders))
    tay_exact = taylor_bounds(table, max(tay_orders)) if tay_orders else []
    h = config.config_hash()

    jobs = [(mi, int(M), rep) for mi, M in enumerate(config.M_grid) for rep in range(config.repeats)]

    def job(args):
        mi, M, rep = args
        shadow_seed = _int_seed(config.substream(2, mi, rep))
        stream = sample_stream(rho, M, shadow_seed)
        out = []
        tasks = [("krylov", n, kry_exact[n - 1], 2 * n + 1) for n in kry_orders]
        tasks += [("taylor", n, tay_exact[n].value, n + 2) for n in tay_orders]
        for kind, n, exact_value, B in tasks:
            row = dict(M=M, repeat=rep, estimator=kind, order=n, exact=exact_value, fq=fq,
                       shadow_seed=shadow_seed, seed=config.seed, config_hash=h)
            if B > M:
                row.update(status="insufficient_shadows")
                out.append(row)
                continue
            counts = stream.tally(B)
            try:
                if kind == "krylov":
                    rec = estimate_krylov(counts, H, n)
                else:
                    rec = estimate_taylor(counts, H, n)
            except SingularEstimate:
                row.update(status="singular")
            else:
                row.update(
                    estimate=rec.value, strategy=rec.strategy, status="ok",
                    rel_dev_exact=abs(rec.value - exact_value) / exact_value if exact_value else None,
                    rel_dev_fq=abs(rec.value - fq) / fq if fq else None,
                )
            out.append(row)
        return out

    rows = [r for part in _pmap(job, jobs, config.workers) for r in part]
    columns = ["M", "repeat", "estimator", "order", "estimate", "exact", "fq", "rel_dev_exact",
               "rel_dev_fq", "strategy", "status", "shadow_seed", "seed", "config_hash"]
    return ExperimentResult("shadow_estimate", columns, rows, {"fq": fq})


# -- exact-match scatter ---------------------------------------------------

SCATTER_TOL = 0.10


def run_exact_match_scatter(config):
    """Pairs (estimated Krylov bound, QFI) for many low-rank draws at fixed M."""
    H = collective_z(config.N)
    n = int(config.orders[0])
    M = int(config.M_grid[0])
    ens = config.ensemble_spec()
    h = config.config_hash()

    def trial(t):
        rho = draw(ens, config.substream(0, t))
        _, _, fq = _analyze(rho, H)
        row = dict(trial=t, fq=fq, is_summary=False, seed=config.seed, config_hash=h)
        try:
            if config.noiseless:
                rec = estimate_krylov_from_batches(plugin_batches(rho, 2 * n + 1), H, n)
            else:
                stream = sample_stream(rho, M, _int_seed(config.substream(3, t)))
                rec = estimate_krylov(stream.tally(2 * n + 1), H, n)
        except SingularEstimate:
            row.update(status="singular")
            return row
        rel = abs(rec.value - fq) / fq if fq > ZERO_QFI_TOL else None
        row.update(estimate=rec.value, rel_dev=rel, strategy=rec.strategy, status="ok",
                   within_tol=rel is not None and rel <= SCATTER_TOL)
        return row

    rows = _pmap(trial, range(config.trials), config.workers)
    devs = [r["rel_dev"] for r in rows if r.get("rel_dev") is not None]
    frac = float(np.mean([d <= SCATTER_TOL for d in devs])) if devs else None
    max_dev = float(max(devs)) if devs else None
    rows.append(dict(trial="summary", rel_dev=max_dev, within_tol=frac, is_summary=True,
                     seed=config.seed, config_hash=h))
    columns = ["trial", "fq", "estimate", "rel_dev", "within_tol", "strategy", "status",
               "is_summary", "seed", "config_hash"]
    return ExperimentResult("exact_match_scatter", columns, rows,
                            {"fraction_within_tol": frac, "max_rel_dev": max_dev, "order": n, "M": M})


# -- entanglement detection ------------------------------------------------

def run_detect(config):
    """Detection ratios ``num(B) / num(F_Q)`` with the criterion ``value > N``.

    Krylov bounds of each order ``n`` are compared with Taylor bounds of
    order ``2n - 1``.
    """
    H = collective_z(config.N)
    N = int(config.N)
    orders = sorted(set(int(n) for n in config.orders))
    n_max = max(orders)
    h = config.config_hash()
    jobs = [(ei, float(eps), t) for ei, eps in enumerate(config.epsilon_grid)
            for t in range(config.trials)]

    def trial(args):
        ei, eps, t = args
        rho = draw(config.ensemble_spec(eps), config.substream(1, ei, t))
        _, table, fq = _analyze(rho, H)
        kry = krylov_bounds(table, n_max)
        tay = taylor_bounds(table, 2 * n_max - 1)
        return (
            fq > N,
            [kry[n - 1] > N for n in orders],
            [tay[2 * n - 1].value > N for n in orders],
        )

    results = _pmap(trial, jobs, config.workers)
    rows = []
    for ei, eps in enumerate(config.epsilon_grid):
        chunk = results[ei * config.trials:(ei + 1) * config.trials]
        num_fq = sum(r[0] for r in chunk)
        base = dict(epsilon=float(eps), num_fq=num_fq, seed=config.seed, config_hash=h)
        rows.append(dict(base, bound="qfi", order="", num_detected=num_fq,
                         ratio=1.0 if num_fq else None))
        for j, n in enumerate(orders):
            for kind, idx, order in (("krylov", 1, n), ("taylor", 2, 2 * n - 1)):
                num = sum(r[idx][j] for r in chunk)
                rows.append(dict(base, bound=kind, order=order, num_detected=num,
                                 ratio=num / num_fq if num_fq else None))
    columns = ["epsilon", "bound", "order", "num_detected", "num_fq", "ratio", "seed", "config_hash"]
    return ExperimentResult("detect", columns, rows)


_RUNNERS = {
    "gap_scan": run_gap_scan,
    "compare_taylor": run_compare_taylor,
    "shadow_estimate": run_shadow_estimate,
    "exact_match_scatter": run_exact_match_scatter,
    "detect": run_detect,
}


def run_experiment(config):
    config.validate()
    return _RUNNERS[config.experiment](config)


def _versions():
    import scipy

    return {
        "krylov_qfi": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def write_result(result, config, out_dir, wall_time=None):
    """Write ``<experiment>.csv`` and ``<experiment>.manifest.json``.

    The CSV is fully determined by the config; run-dependent metadata
    (wall time, start time) lives only in the manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{result.experiment}.csv"
    csv_path.write_text(result.to_csv())
    manifest = {
        "experiment": result.experiment,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "versions": _versions(),
        "wall_time": wall_time,
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "summary": result.summary,
        "csv": csv_path.name,
    }
    man_path = out / f"{result.experiment}.manifest.json"
    man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return csv_path, man_path


def bounds_report(rho, H, n_max=6, taylor_max=11, group_tol=GROUP_TOL):
    """Exact QFI, n*, both hierarchies, condition number and envelopes."""
    spec, table, fq = _analyze(rho, H)
    ns = n_star(table, spec, group_tol)
    kry = krylov_bounds(table, n_max) if n_max else np.zeros(0)
    tay = taylor_bounds(table, taylor_max)
    kap = kappa(spec)
    return {
        "F_Q": fq,
        "n_star": ns.n_star,
        "krylov": [float(v) for v in kry],
        "taylor": [b.value for b in tay],
        "kappa": kap.kappa,
        "envelopes": [convergence_envelope(kap.kappa, n) for n in range(1, n_max + 1)],
        "rank": spec.rank,
    }
