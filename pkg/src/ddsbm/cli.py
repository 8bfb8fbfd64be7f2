"""Command-line experiment runner.

Subcommands::

    ddsbm generate --case 1 --k0 3 --n 50 --replicates 5 --seed 7 --out nets/
    ddsbm fit nets/network_000.txt --keep 10000 --burn 5000 --trace trace.txt
    ddsbm simulate --config exp.cfg --replicates 20 --out results/
    ddsbm ari labels_a.txt labels_b.txt

Settings can come from a flat ``key=value`` file passed with ``--config``;
flags given on the command line take precedence.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ._rng import derive_seed
from .inference import adjusted_rand_index, bias_rmse, mean_ari, posterior_mode_k, posterior_mode_z
from .model import Hyperparams
from .netgen import (
    EdgeListFormatError,
    GroundTruth,
    balanced_assignment,
    generate_sbm,
    make_case,
    read_edgelist,
    write_edgelist,
)
from .sampler import MOVES, ChainConfig, run_chain

EXIT_OK, EXIT_USAGE, EXIT_FORMAT = 0, 1, 2


class UsageError(Exception):
    pass


class InputFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    case_id: int = 1
    k0: int = 3
    n: int = 50
    rho: float = 1.0
    replicates: int = 20
    n_keep: int = 10_000
    n_burn: int = 5_000
    master_seed: int = 1
    delta_n: float | None = None
    k_max: int | None = None
    lam: float = 1.0

    def __post_init__(self):
        if self.case_id not in (1, 2, 3, 4):
            raise ValueError("case must be 1, 2, 3 or 4")
        if self.k0 < 1:
            raise ValueError("k0 must be at least 1")
        if self.n < 2 * self.k0:
            raise ValueError(f"n = {self.n} must be at least 2*k0 = {2 * self.k0}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.n_keep < 1 or self.n_burn < 0:
            raise ValueError("chain lengths must be keep >= 1 and burn >= 0")

    @property
    def hp(self) -> Hyperparams:
        return Hyperparams.default(self.n, self.delta_n, self.k_max, self.lam)

    def truth(self) -> GroundTruth:
        return GroundTruth(balanced_assignment(self.n, self.k0), make_case(self.case_id, self.k0),
                           self.rho)

    def replicate_seed(self, r: int) -> int:
        return derive_seed(self.master_seed, r)


# config-file keys and flag names map onto ExperimentConfig fields
_KEYS = {
    "case": "case_id", "case_id": "case_id", "k0": "k0", "n": "n", "rho": "rho",
    "replicates": "replicates", "keep": "n_keep", "n_keep": "n_keep", "burn": "n_burn",
    "n_burn": "n_burn", "seed": "master_seed", "master_seed": "master_seed",
    "delta": "delta_n", "delta_n": "delta_n", "kmax": "k_max", "k_max": "k_max",
    "lambda": "lam", "lam": "lam",
}
_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    kind = _TYPES[name]
    if "int" in kind:
        return int(raw, 0) if raw.lower().startswith("0x") else int(raw)
    return float(raw)


def parse_config_text(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        try:
            out[_KEYS[key]] = _coerce(_KEYS[key], raw)
        except ValueError:
            raise UsageError(f"config line {lineno}: bad value {raw!r} for {key}") from None
    return out


def _config_from_args(args) -> ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        try:
            values.update(parse_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    for flag, name in (("case", "case_id"), ("k0", "k0"), ("n", "n"), ("rho", "rho"),
                       ("replicates", "replicates"), ("keep", "n_keep"), ("burn", "n_burn"),
                       ("seed", "master_seed"), ("delta", "delta_n"), ("kmax", "k_max"),
                       ("lam", "lam")):
        val = getattr(args, flag, None)
        if val is not None:
            values[name] = val
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _matrix_lines(P: np.ndarray) -> list[str]:
    return [" ".join(_fmt(v) for v in row) for row in P]


def cmd_generate(config: ExperimentConfig, out_dir) -> list[Path]:
    """Write one edge-list file per replicate plus ``manifest.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth = config.truth()
    lines = [
        f"case {config.case_id}", f"k0 {config.k0}", f"n {config.n}", f"rho {config.rho:g}",
        f"master_seed {config.master_seed}",
        "z0 " + " ".join(str(v) for v in truth.z0.one_based()),
        "p0",
        *_matrix_lines(truth.p0),
    ]
    paths = []
    for r in range(config.replicates):
        seed = config.replicate_seed(r)
        A = generate_sbm(truth, config.n, derive_seed(seed, 0))
        path = out / f"network_{r:03d}.txt"
        write_edgelist(A, path)
        paths.append(path)
        lines.append(f"replicate {r} seed {seed} file {path.name}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", newline="\n")
    return paths


def fit_report(A, chain: ChainConfig) -> tuple[dict, object]:
    trace = run_chain(A, chain)
    report = {
        "n": A.n,
        "edges": A.n_edges,
        "seed": chain.seed,
        "n_burn": chain.n_burn,
        "n_keep": chain.n_keep,
        "k_hat": posterior_mode_k(trace),
        "partition": posterior_mode_z(trace).one_based(),
        "acceptance": trace.acceptance_rates(),
    }
    return report, trace


def format_report(report: dict) -> str:
    lines = [f"{key} {report[key]}" for key in ("n", "edges", "seed", "n_burn", "n_keep", "k_hat")]
    lines.append("partition " + " ".join(str(v) for v in report["partition"]))
    lines.extend(f"accept_{m} {_fmt(report['acceptance'][m])}" for m in MOVES)
    return "\n".join(lines) + "\n"


def _run_replicate(job: tuple[ExperimentConfig, int]) -> tuple[int, int, int, float]:
    config, r = job
    seed = config.replicate_seed(r)
    truth = config.truth()
    A = generate_sbm(truth, config.n, derive_seed(seed, 0))
    chain = ChainConfig(n_keep=config.n_keep, n_burn=config.n_burn,
                        seed=derive_seed(seed, 1), hp=config.hp)
    trace = run_chain(A, chain)
    return r, seed, posterior_mode_k(trace), mean_ari(trace, truth.z0)


def simulate(config: ExperimentConfig, workers: int = 1) -> tuple[list[tuple], dict]:
    """Run every replicate; rows come back in replicate order."""
    jobs = [(config, r) for r in range(config.replicates)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_replicate, jobs))
    else:
        rows = [_run_replicate(job) for job in jobs]
    bias, rmse = bias_rmse([row[2] for row in rows], config.k0)
    summary = {
        "case": config.case_id, "k0": config.k0, "n": config.n, "rho": config.rho,
        "replicates": config.replicates, "bias": bias, "rmse": rmse,
        "mean_ari": float(np.mean([row[3] for row in rows])),
    }
    return rows, summary


def results_csv(rows) -> str:
    lines = ["replicate,seed,k_hat,mean_ari"]
    lines.extend(f"{r},{seed},{k},{_fmt(ari)}" for r, seed, k, ari in rows)
    return "\n".join(lines) + "\n"


def summary_csv(summary: dict) -> str:
    s = summary
    return ("case,k0,n,rho,replicates,bias,rmse,mean_ari\n"
            f"{s['case']},{s['k0']},{s['n']},{s['rho']:g},{s['replicates']},"
            f"{_fmt(s['bias'])},{_fmt(s['rmse'])},{_fmt(s['mean_ari'])}\n")


def cmd_simulate(config: ExperimentConfig, out_dir, workers: int = 1) -> tuple[Path, Path]:
    rows, summary = simulate(config, workers)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res, summ = out / "results.csv", out / "summary.csv"
    res.write_text(results_csv(rows), newline="\n")
    summ.write_text(summary_csv(summary), newline="\n")
    return res, summ


def read_labels(path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    try:
        return np.array([int(t) for t in tokens], dtype=np.int64)
    except ValueError:
        raise InputFormatError(f"{path}: labels must be integers") from None


def cmd_ari(path_a, path_b) -> float:
    a, b = read_labels(path_a), read_labels(path_b)
    if a.size != b.size:
        raise InputFormatError(f"label files differ in length ({a.size} vs {b.size})")
    return adjusted_rand_index(a, b)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value settings file")
    p.add_argument("--case", type=int)
    p.add_argument("--k0", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int, help="master seed")


def _add_chain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--keep", type=int, help="retained draws")
    p.add_argument("--burn", type=int, help="burn-in draws")
    p.add_argument("--delta", type=float, help="dominance gap delta_n")
    p.add_argument("--kmax", type=int, help="upper bound on K")
    p.add_argument("--lambda", dest="lam", type=float, help="Poisson rate of the K prior")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ddsbm", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write synthetic SBM networks")
    _add_experiment_flags(g)
    g.add_argument("--out", required=True, help="output directory")

    f = sub.add_parser("fit", help="run one chain on an edge-list file")
    f.add_argument("edgelist")
    f.add_argument("--seed", type=int, default=1)
    _add_chain_flags(f)
    f.add_argument("--out", help="also write the report here")
    f.add_argument("--trace", help="dump draws here (summary JSON goes to <trace>.json)")

    s = sub.add_parser("simulate", help="replicated simulation study")
    _add_experiment_flags(s)
    _add_chain_flags(s)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    a = sub.add_parser("ari", help="adjusted Rand index of two label files")
    a.add_argument("labels_a")
    a.add_argument("labels_b")
    return parser


def _fit(args) -> None:
    A = read_edgelist(args.edgelist)
    if A.n < 2:
        raise EdgeListFormatError("network needs at least two nodes")
    try:
        hp = Hyperparams.default(A.n, args.delta, args.kmax, args.lam if args.lam else 1.0)
        chain = ChainConfig(n_keep=args.keep if args.keep is not None else 10_000,
                            n_burn=args.burn if args.burn is not None else 5_000,
                            seed=args.seed, hp=hp)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report, trace = fit_report(A, chain)
    text = format_report(report)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, newline="\n")
    if args.trace:
        with open(args.trace, "w", newline="\n") as fh:
            trace.dump(fh)
        with open(f"{args.trace}.json", "w", newline="\n") as fh:
            trace.dump_summary(fh, chain)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            config = _config_from_args(args)
            paths = cmd_generate(config, args.out)
            print(f"wrote {len(paths)} networks to {args.out}")
        elif args.command == "fit":
            _fit(args)
        elif args.command == "simulate":
            config = _config_from_args(args)
            res, summ = cmd_simulate(config, args.out, max(1, args.workers))
            sys.stdout.write(summ.read_text())
        elif args.command == "ari":
            print(f"{cmd_ari(args.labels_a, args.labels_b):.6f}")
    except (EdgeListFormatError, InputFormatError) as exc:
        print(f"ddsbm: input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except UsageError as exc:
        print(f"ddsbm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ddsbm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
