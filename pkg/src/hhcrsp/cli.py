"""Command-line harness: generate | solve | oracle | export-mip | report.

Exit codes: 0 success, 1 usage, 2 data error, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from hhcrsp import brkga
from hhcrsp.config import DECODER_ALIASES, VARIANTS, SolverConfig, apply_overrides, load_config
from hhcrsp.decoder import DecoderConfig
from hhcrsp.evaluation import evaluate, parse_solution, serialize_solution, validate
from hhcrsp.instance import (
    GenSpec,
    InstanceError,
    generate_instance,
    parse_key_values,
    read_instance,
    write_instance,
)
from hhcrsp.mip_export import export_mip
from hhcrsp.oracle import OracleTooLarge, best_decoder_reachable, best_routing

EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 1, 2, 3

RUN_COLUMNS = ["instance", "variant", "decoder", "seed", "best", "generations", "seconds"]
AGG_COLUMNS = ["instance", "variant", "decoder", "runs", "best", "avg", "sd", "generations_avg"]
TIMING_COLUMNS = ["instance", "variant", "decoder", "runs", "seconds_avg"]


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def seed_range(text: str) -> list[int]:
    """``a..b`` (inclusive), ``a,b,c`` or a single seed."""
    seeds = []
    for part in text.split(","):
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds")
    return seeds


def _decoder_modes(text: str) -> list[str]:
    if text == "both":
        return ["sd", "fd"]
    out = [t.strip().lower() for t in text.split(",")]
    for t in out:
        if t not in ("sd", "fd"):
            raise argparse.ArgumentTypeError(f"decoder must be sd, fd or both, not {t!r}")
    return out


def _variants(text: str) -> list[str]:
    if text == "all":
        return list(VARIANTS)
    out = [t.strip() for t in text.split(",")]
    for t in out:
        if t not in VARIANTS:
            raise argparse.ArgumentTypeError(f"unknown variant {t!r}")
    return out


def _overrides(items: list[str]) -> dict[str, str]:
    return parse_key_values(items or [])


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    base = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = parse_key_values(fh)
    if args.patients is not None:
        base["num_patients"] = str(args.patients)
    if args.caregivers is not None:
        base["num_caregivers"] = str(args.caregivers)
    base["subset"] = args.subset
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in args.seeds:
        spec = GenSpec.from_mapping({**base, "seed": str(seed)})
        inst = generate_instance(spec)
        path = out / f"{spec.default_name}.hhcrsp"
        write_instance(inst, path)
        print(path)
    return 0


# ---------------------------------------------------------------------------
# solve


def _run_one(job):
    path, fmt, variant, dec, seed, cfg, workers = job
    inst = read_instance(path, fmt)
    b, ipr_cfg = cfg.for_variant(variant)
    b = replace(b, seed=seed)
    dcfg = replace(cfg.decoder, mode=DECODER_ALIASES[dec])
    report = brkga.run(inst, b, dcfg, ipr_cfg, workers=workers)
    payload = report.to_dict()
    payload.update(
        instance_path=str(Path(path).resolve()),
        instance_format=fmt,
        variant=variant,
        decoder=dec,
        best_cost=list(report.best_solution.cost.as_tuple()),
    )
    row = {
        "instance": inst.name,
        "variant": variant,
        "decoder": dec,
        "seed": seed,
        "best": repr(report.best_fitness),
        "generations": report.num_generations,
        "seconds": f"{report.seconds:.3f}",
    }
    return payload, row


def aggregate(rows: list[dict]) -> tuple[list[dict], list[dict]]:
    """Per (instance, variant, decoder): best/avg/sd of run bests and mean generations; timings apart."""
    groups = defaultdict(list)
    for r in rows:
        groups[(r["instance"], r["variant"], r["decoder"])].append(r)
    agg, timing = [], []
    for key in sorted(groups):
        grp = groups[key]
        bests = [float(r["best"]) for r in grp]
        gens = [int(r["generations"]) for r in grp]
        agg.append(
            dict(
                zip(AGG_COLUMNS[:3], key),
                runs=len(grp),
                best=repr(min(bests)),
                avg=repr(statistics.fmean(bests)),
                sd=repr(statistics.stdev(bests) if len(bests) > 1 else 0.0),
                generations_avg=repr(statistics.fmean(gens)),
            )
        )
        timing.append(
            dict(
                zip(TIMING_COLUMNS[:3], key),
                runs=len(grp),
                seconds_avg=f"{statistics.fmean(float(r['seconds']) for r in grp):.3f}",
            )
        )
    return agg, timing


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r[c] for c in columns})


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _solver_config(args) -> SolverConfig:
    cfg = load_config(args.config) if args.config else SolverConfig()
    return apply_overrides(cfg, _overrides(args.set))


def cmd_solve(args) -> int:
    cfg = _solver_config(args)
    fmt = "legacy" if args.legacy else "native"
    for path in args.instances:
        read_instance(path, fmt)  # fail fast on bad data
    out = Path(args.out)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    jobs = [
        (path, fmt, variant, dec, seed, cfg, args.workers if args.jobs == 1 else 1)
        for path in args.instances
        for variant in args.variant
        for dec in args.decoder
        for seed in args.seeds
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    rows = []
    for payload, row in results:
        name = f"{row['instance']}__{row['variant']}__{row['decoder']}__s{row['seed']}.json"
        (out / "reports" / name).write_text(json.dumps(payload, indent=1), encoding="utf-8")
        rows.append(row)
        if not args.quiet:
            print(f"{row['instance']} {row['variant']} {row['decoder']} seed={row['seed']} "
                  f"best={float(row['best']):.4f} gens={row['generations']} t={row['seconds']}s")
    _write_csv(out / "runs.csv", RUN_COLUMNS, rows)
    agg, timing = aggregate(rows)
    _write_csv(out / "aggregate.csv", AGG_COLUMNS, agg)
    _write_csv(out / "timing.csv", TIMING_COLUMNS, timing)
    return 0


# ---------------------------------------------------------------------------
# oracle / export-mip


def cmd_oracle(args) -> int:
    inst = read_instance(args.instance, "legacy" if args.legacy else "native")
    mode = DecoderConfig(mode=DECODER_ALIASES[args.decoder])
    if args.kind == "decoder":
        res = best_decoder_reachable(inst, mode)
    else:
        res = best_routing(inst, mode.weights)
    sys.stdout.write(serialize_solution(res.best_solution))
    print(f"SPACE {res.space_size}")
    return 0


def cmd_export_mip(args) -> int:
    inst = read_instance(args.instance, "legacy" if args.legacy else "native")
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            stats = export_mip(inst, out=fh)
    else:
        stats = export_mip(inst, out=sys.stdout)
    print(
        f"binaries={stats.num_binary_vars} continuous={stats.num_continuous_vars} "
        f"constraints={stats.num_constraints}",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    root = Path(args.dir)
    reports = sorted((root / "reports").glob("*.json"))
    if not reports:
        raise ValueError(f"no reports under {root / 'reports'}")
    rows = []
    instances = {}
    for path in reports:
        payload = json.loads(path.read_text(encoding="utf-8"))
        key = (payload["instance_path"], payload["instance_format"])
        if key not in instances:
            instances[key] = read_instance(*key)
        inst = instances[key]
        sol = parse_solution(payload["best_solution"], inst)
        weights = tuple(payload["config"]["decoder"]["weights"])
        cost = evaluate(sol, inst, weights)
        problems = validate(sol, inst)
        if problems:
            raise InvariantError(f"{path.name}: stored solution is infeasible: {problems[0].message}")
        if list(cost.as_tuple()) != payload["best_cost"] or cost.objective != payload["best_fitness"]:
            raise InvariantError(f"{path.name}: stored cost does not re-evaluate")
        rows.append(
            {
                "instance": payload["instance"],
                "variant": payload["variant"],
                "decoder": payload["decoder"],
                "seed": payload["seed"],
                "best": repr(payload["best_fitness"]),
                "generations": payload["num_generations"],
                "seconds": f"{payload['seconds']:.3f}",
            }
        )
    agg, timing = aggregate(rows)
    if (root / "runs.csv").exists():
        agg_raw, _ = aggregate(_read_csv(root / "runs.csv"))
        if agg_raw != agg:
            raise InvariantError("runs.csv disagrees with stored reports")
    if (root / "aggregate.csv").exists():
        stored = _read_csv(root / "aggregate.csv")
        fresh = [{c: str(r[c]) for c in AGG_COLUMNS} for r in agg]
        if stored != fresh:
            raise InvariantError("aggregate.csv disagrees with recomputed aggregates")
    _write_csv(root / "aggregate.csv", AGG_COLUMNS, agg)
    _write_csv(root / "timing.csv", TIMING_COLUMNS, timing)
    for r in agg:
        print(",".join(str(r[c]) for c in AGG_COLUMNS))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hhcrsp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write benchmark-style instances")
    g.add_argument("subset", help="A..G or custom")
    g.add_argument("seeds", nargs="?", type=seed_range, default=[1], help="seed, list or range a..b")
    g.add_argument("--seed-range", dest="seeds", type=seed_range)
    g.add_argument("--patients", type=int)
    g.add_argument("--caregivers", type=int)
    g.add_argument("--config", help="key=value generator settings")
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run BRKGA variants over seeds")
    s.add_argument("instances", nargs="+")
    s.add_argument("--variant", type=_variants, default=["BRKGA-MP-MI-IPR"], help="comma list or 'all'")
    s.add_argument("--decoder", type=_decoder_modes, default=["fd"], help="sd, fd or both")
    s.add_argument("--seed-range", dest="seeds", type=seed_range, default=list(range(1, 21)))
    s.add_argument("--config", help="key=value solver configuration")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
    s.add_argument("--workers", type=int, default=1, help="decoding processes per run")
    s.add_argument("--jobs", type=int, default=1, help="runs executed concurrently")
    s.add_argument("--legacy", action="store_true", help="read instances in the legacy layout")
    s.add_argument("--out", default="results")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exhaustive search on a tiny instance")
    o.add_argument("instance")
    o.add_argument("--kind", choices=("decoder", "routing"), default="decoder")
    o.add_argument("--decoder", choices=("sd", "fd"), default="fd")
    o.add_argument("--legacy", action="store_true")
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("export-mip", help="write the MIP in LP format")
    e.add_argument("instance")
    e.add_argument("-o", "--output", help="file (default: stdout)")
    e.add_argument("--legacy", action="store_true")
    e.set_defaults(func=cmd_export_mip)

    r = sub.add_parser("report", help="re-validate stored runs and rebuild aggregates")
    r.add_argument("dir")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, OracleTooLarge, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"hhcrsp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantError, AssertionError) as exc:
        print(f"hhcrsp: invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
