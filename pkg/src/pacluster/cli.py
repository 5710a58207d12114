"""``pac`` command line: fit, stream, gen, bench.

Exit codes: 0 ok, 1 usage, 2 bad input or file, 3 NaN/inf encountered.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .bench import Scenario, run_benchmark
from .core import NonFiniteError, PacError
from .datagen import (
    MixtureSpec,
    RingSpec,
    canonical_mixture,
    canonical_rings,
    gen_concentric_rings,
    gen_gaussian_mixture,
)
from .io import LabeledOutput, read_dataset, read_frame, parse_dataset, write_dataset, write_labels
from .pipeline import PacConfig, PacResult, pac_fit
from .streaming import state_load, state_save, stream_step

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _add_knobs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda-c", type=float, default=0.05, help="regularization for the parallel step")
    p.add_argument("--epsilon", type=float, default=0.05, help="sets lambda_g from the mean parallel cluster size")
    p.add_argument("--lambda-g", type=float, default=None, help="use this lambda_g instead of the epsilon rule")
    p.add_argument("--threads", type=int, default=16, help="number of data subsets")
    p.add_argument("--workers", type=int, default=None, help="worker pool size (default: min(threads, cpus))")
    p.add_argument("--tol", type=float, default=None, help="absolute energy change to stop at")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="labeled CSV output ('-' for stdout)")
    p.add_argument("--meta", default=None, help="JSON sidecar path (default: <out>.json)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pac", description="Parallel adaptive clustering.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="cluster a CSV dataset")
    p.add_argument("data", help="CSV or whitespace-delimited file ('-' for stdin)")
    _add_knobs(p)
    p.add_argument("--nu", type=float, default=0.1, help="ignored by fit")

    p = sub.add_parser("stream", help="fold one batch into a stream state file")
    p.add_argument("--state", required=True, help="state file; created if missing")
    p.add_argument("--batch", required=True, help="batch file, or '-' for one framed block on stdin")
    _add_knobs(p)
    p.add_argument("--nu", type=float, default=0.1)

    p = sub.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("kind", choices=["mixture", "rings"])
    p.add_argument("--spec", default=None, help="JSON spec (default: the built-in one)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0, help="multiply built-in point counts")
    p.add_argument("--cartesian", action="store_true", help="rings in (x, y) instead of (r, theta)")
    p.add_argument("--out", default="-")

    p = sub.add_parser("bench", help="run a benchmark scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON file or built-in name")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", default="-")
    return ap


def _config(args) -> PacConfig:
    try:
        return _make_config(args)
    except ValueError as exc:
        raise UsageError(f"pac {args.cmd}: error: {exc}") from None


def _make_config(args) -> PacConfig:
    return PacConfig(
        n_threads=args.threads,
        lambda_c=args.lambda_c,
        epsilon=args.epsilon,
        tol=args.tol,
        iter_max=args.max_iter,
        seed=args.seed,
        lambda_g=args.lambda_g,
        nu=args.nu,
        workers=args.workers,
    )


def _check_finite(res: PacResult) -> None:
    energies = [ph.energy for ph in res.phases.values()] + [s.energy for s in res.refinement.trace]
    if not all(math.isfinite(e) for e in energies):
        raise NonFiniteError("energy became NaN or infinite")


def _metadata(res: PacResult, config: PacConfig) -> dict:
    return {
        "version": __version__,
        "config": asdict(config),
        "seed": config.seed,
        "lambda_g": res.lambda_g,
        "omega_guard": res.omega_ok,
        "phases": {name: asdict(ph) for name, ph in res.phases.items()},
        "refinement": [asdict(s) for s in res.refinement.trace],
    }


def _emit(out: str, meta: str | None, X: np.ndarray, res: PacResult, metadata: dict) -> None:
    lo = LabeledOutput.build(X, res.labels, metadata)
    if out == "-":
        write_labels(sys.stdout, lo, meta)
    else:
        write_labels(out, lo, meta)


def _read(src: str) -> np.ndarray:
    return read_dataset(sys.stdin if src == "-" else src)


def cmd_fit(args) -> int:
    config = _config(args)
    X = _read(args.data)
    res = pac_fit(X, config)
    _check_finite(res)
    _emit(args.out, args.meta, X, res, _metadata(res, config))
    return EXIT_OK


def cmd_stream(args) -> int:
    config = _config(args)
    path = Path(args.state)
    state = state_load(path.read_bytes()) if path.exists() else None
    if args.batch == "-":
        block = read_frame(sys.stdin.buffer)
        if block is None:
            raise UsageError("pac stream: error: no batch on stdin")
        B = parse_dataset(block.decode("utf-8"), "<stdin>")
    else:
        B = read_dataset(args.batch)
    state, res = stream_step(state, B, config)
    _check_finite(res)
    meta = _metadata(res, config)
    meta.update({"t": state.t, "k_history": state.k_history, "lambda_history": state.lambda_history})
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(state_save(state))
    tmp.replace(path)
    _emit(args.out, args.meta, state.data, res, meta)
    return EXIT_OK


def cmd_gen(args) -> int:
    spec_d = json.loads(Path(args.spec).read_text()) if args.spec else None
    if args.kind == "mixture":
        spec = MixtureSpec.from_dict(spec_d) if spec_d else canonical_mixture(args.seed, args.scale)
        X, _ = gen_gaussian_mixture(spec, args.seed)
    else:
        spec = RingSpec.from_dict(spec_d) if spec_d else canonical_rings(args.seed, args.scale)
        if args.cartesian:
            spec.polar = False
        X, _ = gen_concentric_rings(spec, args.seed)
    write_dataset(sys.stdout if args.out == "-" else args.out, X)
    return EXIT_OK


def cmd_bench(args) -> int:
    scenario = Scenario.load(args.scenario)
    report = run_benchmark(scenario, trials=args.trials)
    text = report.to_json()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "stream": cmd_stream, "gen": cmd_gen, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteError as exc:
        print(f"pac: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, PacError) as exc:
        print(f"pac: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
