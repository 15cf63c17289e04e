"""Command-line entry point ``krylov-qfi``.

Exit codes: 0 success, 2 configuration / input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ensembles import ENSEMBLE_KINDS, NOISE_KINDS, EnsembleSpec, draw
from .errors import ConfigError, KrylovQFIError, NumericalError
from .exact import GROUP_TOL, n_star
from .experiments import ExperimentConfig, bounds_report, run_experiment, write_result
from .matrix_io import load_matrix
from .qcore import DensityMatrix, Observable, build_transition_table, collective_z, pauli
from .shadows import sample_shadows

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_EXPERIMENT_COMMANDS = ("gap-scan", "compare-taylor", "shadow-estimate", "exact-match-scatter", "detect")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def load_config_file(path):
    """Read a YAML or JSON mapping of ``ExperimentConfig`` fields."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
    else:
        import yaml

        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a key-value mapping")
    return data


def _add_state_args(p):
    p.add_argument("--state", help="density matrix file (.npy, .json or text)")
    p.add_argument("--qubits", "-N", type=int, default=4, help="qubit count for drawn states")
    p.add_argument("--ensemble", choices=ENSEMBLE_KINDS, default="fullrank_hs")
    p.add_argument("--rank", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--noise-kind", choices=NOISE_KINDS, default="random_fullrank")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--observable",
        default="collective_z",
        help="'collective_z', a Pauli string such as 'XZ', or a matrix file",
    )


def _add_experiment_args(p):
    p.add_argument("--config", help="YAML or JSON file with experiment settings")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("--qubits", "-N", type=int, dest="N")
    p.add_argument("--trials", type=int)
    p.add_argument("--orders", type=_int_list)
    p.add_argument("--taylor-orders", type=_int_list)
    p.add_argument("--shots", type=_int_list, dest="M_grid", help="comma-separated M grid")
    p.add_argument("--epsilon", type=_float_list, dest="epsilon_grid", help="comma-separated noise grid")
    p.add_argument("--ensemble", choices=ENSEMBLE_KINDS)
    p.add_argument("--rank", type=int)
    p.add_argument("--noise-kind", choices=NOISE_KINDS)
    p.add_argument("--repeats", type=int)
    p.add_argument("--noiseless", action="store_true", default=None,
                   help="use exact batch means instead of sampled shadows")


def build_parser():
    parser = _Parser(prog="krylov-qfi", description="Krylov lower bounds on the quantum Fisher information")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bounds", help="exact QFI and both bound hierarchies for one state")
    _add_state_args(p)
    p.add_argument("--n-max", type=int, default=6)
    p.add_argument("--group-tol", type=float, default=GROUP_TOL)
    p.add_argument("--taylor-max", type=int, default=11)

    p = sub.add_parser("nstar", help="termination order of the Krylov chain")
    _add_state_args(p)
    p.add_argument("--group-tol", type=float, default=GROUP_TOL,
                   help="pair sums closer than this count as one value")

    p = sub.add_parser("sample-shadows", help="simulate randomized Pauli shadows and save counts")
    _add_state_args(p)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--batches", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="counts file (.npz for binary, otherwise text)")

    for name in _EXPERIMENT_COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _add_experiment_args(p)
    return parser


def _observable(spec, N):
    if spec == "collective_z":
        return collective_z(N)
    if spec and set(spec) <= set("IXYZ"):
        if len(spec) != N:
            raise ConfigError(f"Pauli string {spec!r} does not match {N} qubits")
        return Observable(pauli(spec))
    return Observable(load_matrix(spec))


def _state(args):
    if args.state:
        rho = DensityMatrix(load_matrix(args.state))
        d = rho.dim
        N = int(round(np.log2(d)))
        if 2**N != d:
            if args.observable == "collective_z":
                raise ConfigError(f"dimension {d} is not a power of two; pass --observable FILE")
            return rho, Observable(load_matrix(args.observable))
        return rho, _observable(args.observable, N)
    if not 1 <= args.qubits <= 12:
        raise ConfigError(f"--qubits {args.qubits} outside 1..12")
    spec = EnsembleSpec(
        kind=args.ensemble, dim=2**args.qubits, r=args.rank, epsilon=args.epsilon,
        noise_kind=args.noise_kind, seed=args.seed,
    )
    return draw(spec), _observable(args.observable, args.qubits)


def _cmd_bounds(args):
    rho, H = _state(args)
    print(json.dumps(bounds_report(rho, H, args.n_max, args.taylor_max, args.group_tol), indent=2))


def _cmd_nstar(args):
    rho, H = _state(args)
    table = build_transition_table(rho.spectrum, H)
    print(json.dumps(n_star(table, rho.spectrum, args.group_tol).to_dict(), indent=2))


def _cmd_sample_shadows(args):
    rho, _ = _state(args)
    counts = sample_shadows(rho, args.shots, args.batches, args.seed, workers=args.workers)
    counts.save(args.out)
    print(json.dumps({"out": args.out, "M": args.shots, "B": args.batches,
                      "batch_sizes": counts.batch_sizes()}))


def _experiment_config(args):
    experiment = args.command.replace("-", "_")
    values = load_config_file(args.config) if args.config else {}
    named = values.pop("experiment", experiment)
    if str(named).replace("-", "_") != experiment:
        raise ConfigError(f"config is for {named!r}, not {experiment!r}")
    keys = ("seed", "workers", "N", "trials", "orders", "taylor_orders", "M_grid",
            "epsilon_grid", "ensemble", "rank", "noise_kind", "repeats", "noiseless")
    for key in keys:
        value = getattr(args, key)
        if value is not None:
            values[key] = value
    if args.out is not None:
        values["out_path"] = args.out
    try:
        return ExperimentConfig.for_experiment(experiment, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_experiment(args):
    config = _experiment_config(args)
    start = time.perf_counter()
    result = run_experiment(config)
    wall = time.perf_counter() - start
    csv_path, man_path = write_result(result, config, config.out_path, wall_time=wall)
    print(json.dumps({"csv": str(csv_path), "manifest": str(man_path),
                      "config_hash": config.config_hash(), "rows": len(result.rows)}))


_COMMANDS = {
    "bounds": _cmd_bounds,
    "nstar": _cmd_nstar,
    "sample-shadows": _cmd_sample_shadows,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = _COMMANDS.get(args.command, _cmd_experiment)
    try:
        handler(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (KrylovQFIError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
