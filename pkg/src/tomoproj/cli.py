"""Command-line front end.

    tomoproj identifiability MATRIX.csv PROJECTIONS.csv [--max-order N] [--tol T]
    tomoproj asymptotic --config fig4.cfg
    tomoproj traffic    --config fig5.cfg
    tomoproj delay      --config fig7.cfg [--emit-cdf]

``--config`` also accepts the bundled names ``fig4``, ``fig5`` and ``fig7``.
Each command writes its CSV tables plus ``manifest.json`` into ``--out-dir``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import bundled_config, config_echo, load_config
from .errors import TomographyError
from .identifiability import check_identifiability
from .simulate import (AsymptoticConfig, DelayExperimentConfig, TrafficExperimentConfig,
                       run_asymptotic_study, run_delay_experiment, run_traffic_experiment)
from .topology import read_routing_csv

log = logging.getLogger("tomoproj")

EXIT_USAGE = 2


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str = __version__
    started: str = ""
    finished: str = ""
    wall_time_s: float = 0.0
    outputs: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def write(self, out_dir: Path) -> Path:
        missing = [p for p in self.outputs if not (out_dir / p).exists()]
        if missing:
            raise RuntimeError(f"manifest lists missing outputs: {missing}")
        path = out_dir / "manifest.json"
        with open(path, "w", newline="\n") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _read_matrix(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and not row[0].lstrip().startswith("#"):
                rows.append([float(x) for x in row])
    return np.array(rows, dtype=float)


def _config_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    if p.suffix in ("", ".cfg") and p.parent == Path("."):
        try:
            return bundled_config(p.stem)
        except TomographyError:
            pass
    raise FileNotFoundError(f"config file not found: {name}")


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.threads is not None:
        out["threads"] = args.threads
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_identifiability(args, out_dir: Path, manifest: RunManifest) -> int:
    for p in (args.matrix, args.projections):
        if not Path(p).exists():
            raise FileNotFoundError(f"no such file: {p}")
    A = read_routing_csv(args.matrix)
    B = _read_matrix(args.projections)
    report = check_identifiability(B, A, max_order=args.max_order, rank_tolerance=args.tol)
    path = out_dir / "identifiability.json"
    with open(path, "w", newline="\n") as fh:
        fh.write(report.to_json(indent=2))
        fh.write("\n")
    print(report.to_json(indent=2))
    manifest.config = {"matrix": str(args.matrix), "projections": str(args.projections),
                       "max_order": args.max_order, "tol": args.tol}
    manifest.outputs.append(path.name)
    return 0


def cmd_asymptotic(args, out_dir: Path, manifest: RunManifest) -> int:
    cfg = load_config(_config_path(args.config), AsymptoticConfig, _overrides(args))
    A = cfg.routing()
    theta = cfg.thetas(A.I)
    study = run_asymptotic_study(A, theta, cfg.K_list, cfg.n_replicates, cfg.seed, cfg.threads)
    names, table = study.table()
    path = out_dir / "asymptotic_std.csv"
    write_table(path, ["parameter", "theta", *names],
                [[i + 1, theta[i], *table[i]] for i in range(A.I)])
    manifest.config, manifest.seed = config_echo(cfg), cfg.seed
    manifest.outputs.append(path.name)
    return 0


def cmd_traffic(args, out_dir: Path, manifest: RunManifest) -> int:
    cfg = load_config(_config_path(args.config), TrafficExperimentConfig, _overrides(args))
    res = run_traffic_experiment(cfg)
    med = res.medians
    path = out_dir / "traffic_median_log_error.csv"
    write_table(path, ["od_pair", "mean", *cfg.estimators],
                [[i + 1, res.means[i], *(med[k][i] for k in cfg.estimators)]
                 for i in range(res.means.size)])
    manifest.config, manifest.seed = config_echo(cfg), cfg.seed
    manifest.outputs.append(path.name)
    manifest.failures = dict(res.failures)
    return 0


def cmd_delay(args, out_dir: Path, manifest: RunManifest) -> int:
    cfg = load_config(_config_path(args.config), DelayExperimentConfig, _overrides(args))
    if not args.emit_cdf:
        cfg.cdf_runs = ()
    res = run_delay_experiment(cfg)
    med = res.medians
    u, v = res.params[0]
    path = out_dir / "delay_median_mallows.csv"
    write_table(path, ["link", "u", "v", *cfg.modes],
                [[i + 1, u[i], v[i], *(med[m][i] for m in cfg.modes)] for i in range(u.size)])
    manifest.outputs.append(path.name)
    for r, links in sorted(res.cdf_curves.items()):
        for i, (x, cols) in sorted(links.items()):
            p = out_dir / f"cdf_run{r}_link{i + 1}.csv"
            names = list(cols)
            write_table(p, ["x", *names], np.column_stack([x, *(cols[k] for k in names)]))
            manifest.outputs.append(p.name)
    manifest.config, manifest.seed = config_echo(cfg), cfg.seed
    manifest.failures = dict(res.failures)
    return 0


COMMANDS = {
    "identifiability": cmd_identifiability,
    "asymptotic": cmd_asymptotic,
    "traffic": cmd_traffic,
    "delay": cmd_delay,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tomoproj", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out-dir", default=".", help="directory for CSV and manifest output")

    p = sub.add_parser("identifiability", help="rank test for a routing matrix and projection set")
    p.add_argument("matrix", help="routing matrix CSV (J rows, I columns)")
    p.add_argument("projections", help="projection CSV (one direction of length J per row)")
    p.add_argument("--max-order", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-9)
    common(p)

    for name, helptext in (("asymptotic", "limit standard deviations per estimator"),
                           ("traffic", "Gaussian OD traffic experiment"),
                           ("delay", "M/M/1 link delay experiment")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="config file or bundled name")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None)
        if name == "delay":
            p.add_argument("--emit-cdf", action="store_true",
                           help="write per-link CDF curves for the config's cdf_runs")
        common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_dir = Path(args.out_dir)
    manifest = RunManifest(command=" ".join(["tomoproj", *(argv if argv is not None else sys.argv[1:])]),
                           config={}, seed=None, started=_now())
    t0 = time.perf_counter()
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](args, out_dir, manifest)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TomographyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest.finished = _now()
    manifest.wall_time_s = round(time.perf_counter() - t0, 3)
    manifest.write(out_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
