"""Command line front end.

Subcommands: ``fit``, ``info``, ``sample``, ``evaluate``, ``validate`` and
``generate``. Data goes to stdout or the requested files, diagnostics to
stderr. Exit codes: 0 success, 2 input error, 3 internal invariant
violation. The log level comes from ``--log-level`` or the
``JTCOPULA_LOG_LEVEL`` environment variable.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import generate as gen
from .errors import BadSpec, InputError, InvariantViolation, JtcError
from .infotheory import (
    cluster_informations,
    entropy,
    jtree_weight,
    kl_formula,
    multi_information,
    mutual_information_matrix,
    structure_constant,
)
from .model import check_model, density, fit, load, sample_data_scale, sample_grid, save
from .sdc import build_sdc
from .structure import JunctionTree, chow_liu, t_cherry_exact, t_cherry_k3
from .tabular import SampleMatrix, load_sample, partition_sample, transform, truncate_sample, write_sample

log = logging.getLogger("jtcopula")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3
FULL_ORDER_MAX_N = 12


@dataclass
class FitConfig:
    input: str
    output: str | None = None
    bins: object = 2
    order: str = "2"
    tie_policy: str = "stable-rank"
    truncate: bool = False
    exact_max_n: int = 7
    seed: int = 0
    report: str | None = None
    log_level: str = "WARNING"

    def __post_init__(self):
        if self.order not in ("2", "3", "full"):
            raise BadSpec(f"order must be 2, 3 or full, got {self.order!r}")
        bins = self.bins if isinstance(self.bins, (list, tuple)) else [self.bins]
        if any(int(b) < 1 for b in bins):
            raise BadSpec("bins must be >= 1")


def _csv_ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _prepare(sample: SampleMatrix, bins, tie_policy, do_truncate):
    original = sample.N
    if do_truncate:
        sample = truncate_sample(sample, bins)
        if sample.N != original:
            log.info("truncated sample from %d to %d rows", original, sample.N)
    partitions = partition_sample(sample, bins, tie_policy)
    ts = transform(sample, partitions)
    return sample, partitions, build_sdc(ts), original - sample.N


def learn_structure(table, order: str, exact_max_n: int = 7) -> JunctionTree:
    n = table.d
    if order == "full" or n == 1:
        if n > FULL_ORDER_MAX_N:
            raise BadSpec(f"order=full is limited to n <= {FULL_ORDER_MAX_N}")
        return JunctionTree((table.scope,), ())
    if order == "2":
        return chow_liu(table)
    if n <= 3 or n <= exact_max_n:
        return t_cherry_exact(table, max_n=max(exact_max_n, 3))
    return t_cherry_k3(table)


def fit_report(table, structure) -> dict:
    ci, si = cluster_informations(structure, table)
    return {
        "entropy_bits": entropy(table),
        "structure_constant_bits": structure_constant(table),
        "weight_bits": jtree_weight(structure, table),
        "kl_bits": kl_formula(structure, table),
        "cluster_info_bits": [{"cluster": list(K), "bits": b} for K, b in zip(structure.clusters, ci)],
        "separator_info_bits": [{"separator": list(S), "bits": b} for S, b in zip(structure.separators, si)],
    }


def run_fit(cfg: FitConfig) -> dict:
    start = time.perf_counter()
    sample = load_sample(cfg.input)
    sample, partitions, table, dropped = _prepare(sample, cfg.bins, cfg.tie_policy, cfg.truncate)
    if cfg.order == "full" and table.d > FULL_ORDER_MAX_N:
        raise BadSpec(f"order=full is limited to n <= {FULL_ORDER_MAX_N}")
    structure = learn_structure(table, cfg.order, cfg.exact_max_n)
    options = {"order": cfg.order, "tie_policy": cfg.tie_policy, "truncate": cfg.truncate,
               "exact_max_n": cfg.exact_max_n, "source": os.path.basename(cfg.input)}
    model = fit(table, structure, partitions, sample.column_names, options)
    if cfg.output:
        save(model, cfg.output)
    report = {"n": table.d, "N": table.total, "dropped_rows": dropped, "bins": list(table.bins),
              "order": cfg.order, "structure": structure.to_dict()}
    report.update(fit_report(table, structure))
    report["wall_time_s"] = time.perf_counter() - start
    return report


def _emit(obj, args, text_lines=None):
    if getattr(args, "json", True) or text_lines is None:
        print(json.dumps(obj, indent=1))
    else:
        print("\n".join(text_lines))


def cmd_fit(args):
    bins = args.bins_per_col if args.bins_per_col else args.bins
    cfg = FitConfig(args.input, args.output, bins, args.order, args.tie_policy, args.truncate,
                    args.exact_max_n, args.seed, args.report, args.log_level)
    report = run_fit(cfg)
    text = json.dumps(report, indent=1)
    if cfg.report:
        with open(cfg.report, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_info(args):
    model = load(args.model) if args.model else None
    if args.bins_per_col:
        bins = args.bins_per_col
    elif args.bins is not None:
        bins = args.bins
    elif model is not None:
        bins = list(model.bins)
    else:
        bins = 2
    sample = load_sample(args.input)
    _, _, table, _ = _prepare(sample, bins, args.tie_policy, args.truncate)
    out = {
        "n": table.d,
        "N": table.total,
        "bins": list(table.bins),
        "entropy_bits": entropy(table),
        "multi_information_bits": multi_information(table),
        "structure_constant_bits": structure_constant(table),
        "mi_matrix": mutual_information_matrix(table).tolist(),
        "weight_bits": None,
        "kl_bits": None,
    }
    if model is not None:
        if tuple(model.bins) != table.bins:
            raise BadSpec(f"model bins {list(model.bins)} differ from data bins {list(table.bins)}")
        out["weight_bits"] = jtree_weight(model.structure, table)
        out["kl_bits"] = kl_formula(model.structure, table)
    lines = [f"{k:<24} {v:.6f}" for k, v in out.items() if isinstance(v, float)]
    lines += [f"{k:<24} {v}" for k, v in out.items() if v is None or isinstance(v, int)]
    lines.append("mi_matrix")
    lines += ["  " + " ".join(f"{x:8.5f}" for x in row) for row in out["mi_matrix"]]
    _emit(out, args, lines)
    return EXIT_OK


def cmd_sample(args):
    model = load(args.model)
    if args.data_scale:
        out = sample_data_scale(model, args.count, args.seed)
    else:
        grid = sample_grid(model, args.count, args.seed)
        values = grid.indices if args.indices else grid.grid_values
        out = SampleMatrix(values, model.column_names or ())
    if args.output:
        with open(args.output, "w", newline="") as fh:
            write_sample(out, fh)
    else:
        write_sample(out, sys.stdout)
    return EXIT_OK


def cmd_evaluate(args):
    model = load(args.model)
    rows = []
    for cell in args.cell:
        exact = density(model, cell, exact=True)
        rows.append({"cell": cell, "density": float(exact), "density_exact": str(exact)})
    _emit({"results": rows}, args, [f"{r['cell']}  {r['density']:.12g}  ({r['density_exact']})" for r in rows])
    return EXIT_OK


def cmd_validate(args):
    model = load(args.model)
    report = check_model(model)
    _emit(report.to_dict(), args,
          ["valid" if report.ok else "INVALID"] + [f"  [{v.code}] {v.message}" for v in report.violations])
    return EXIT_OK if report.ok else EXIT_INTERNAL


def cmd_generate(args):
    rng = np.random.default_rng(args.seed)
    if args.family == "independent":
        sample = gen.independent(args.n, args.rows, rng)
    elif args.family == "gaussian-tree":
        if args.edges:
            edges = [tuple(int(v) for v in e.split("-")) for e in args.edges.split(",")]
        else:
            edges = gen.tree_edges(args.n, args.tree, rng)
        sample = gen.gaussian_tree(args.n, args.rows, args.rho, rng, edges)
    else:
        jt = gen.random_uniform_tree(args.n, args.order, rng)
        log.info("factorized law over clusters %s", jt.clusters)
        table = gen.factorized_table(jt, args.bins, rng, args.strength)
        sample = gen.factorized_sample(table, args.rows, rng)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            write_sample(sample, fh)
    else:
        write_sample(sample, sys.stdout)
    return EXIT_OK


def _add_binning(p, default_bins=2):
    p.add_argument("--bins", type=int, default=default_bins, help="bins per variable (all columns)")
    p.add_argument("--bins-per-col", type=_csv_ints, default=None, metavar="M1,M2,...")
    p.add_argument("--tie-policy", choices=("error", "stable-rank"), default="stable-rank")
    p.add_argument("--truncate", action="store_true",
                   help="drop trailing rows so N is a multiple of lcm(bins)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jtcopula", description="Junction-tree copulas from samples.")
    parser.add_argument("--log-level", default=os.environ.get("JTCOPULA_LOG_LEVEL", "WARNING"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="learn a junction-tree copula from a CSV sample")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output")
    _add_binning(p)
    p.add_argument("--order", choices=("2", "3", "full"), default="2")
    p.add_argument("--exact-max-n", type=int, default=7,
                   help="order 3: exhaustive search when n is at most this")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write the fit report here instead of stdout")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("info", help="entropy and information measures of a sample")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-m", "--model")
    _add_binning(p, default_bins=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("sample", help="draw from a fitted model")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-c", "--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data-scale", action="store_true")
    p.add_argument("--indices", action="store_true", help="write bin numbers instead of grid values")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="model mass of grid cells")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--cell", type=_csv_ints, action="append", required=True, metavar="J1,J2,...")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="write a synthetic CSV sample")
    p.add_argument("--family", choices=gen.FAMILIES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--tree", choices=("chain", "star", "random"), default="chain")
    p.add_argument("--edges", help="gaussian-tree edges as parent-child pairs, e.g. 0-1,1-2")
    p.add_argument("--bins", type=int, default=4, help="factorized: bins per variable")
    p.add_argument("--order", type=int, choices=(2, 3), default=2, help="factorized: cluster size")
    p.add_argument("--strength", type=int, default=2,
                   help="factorized: permutations per conditional (smaller is stronger)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=str(args.log_level).upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except JtcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
