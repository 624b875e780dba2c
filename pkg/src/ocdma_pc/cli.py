"""Command-line interface: ``ocdma-pc [global flags] {scenario,dynamic,perturb,tarhuni,replay}``.

Exit status: 0 when every solver run converged, 1 when some did not, 2 on
usage or configuration errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import config_from_dict, load_config
from .errors import ConfigError, OcdmaError
from .harness import (SCENARIO_USERS, SOLVERS, DynamicEvent, RunRecord, compare_tarhuni,
                      emit_outputs, make_options, random_start, robustness_table,
                      run_dynamic_load, run_perturbation, run_scenario, run_solver,
                      scenario_instance)
from .netmodel import load_instance, save_instance
from .problem import oracle

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _globals(p, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="YAML configuration file")
    p.add_argument("--seed", type=int, default=d, help="base seed (trial t uses seed + t)")
    p.add_argument("--solver", choices=["all", *SOLVERS], default=d)
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--trials", type=int, default=d)
    p.add_argument("--max-iters", type=int, default=d, dest="max_iters")
    p.add_argument("-v", "--verbose", action="store_true",
                   default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ocdma-pc", description="Minimum-power OCDMA allocation experiments")
    _globals(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sc = sub.add_parser("scenario", help="Monte-Carlo batch over users x trials x solvers")
    _globals(sc, suppress=True)
    sc.add_argument("--scenario", choices=["A", "B", "Custom"])
    sc.add_argument("--users", type=int, nargs="+")
    sc.add_argument("--qos", choices=["I", "II", "III"])
    sc.add_argument("--instances", help="also save each instance as JSON in this directory")

    dy = sub.add_parser("dynamic", help="solve, grow the network, solve again")
    _globals(dy, suppress=True)
    dy.add_argument("--users", type=int, nargs="+")
    dy.add_argument("--qos", choices=["I", "II", "III"])
    dy.add_argument("--factor", type=float, help="load factor (4 grows 32 users to 128)")
    dy.add_argument("--warm-start", nargs="+", metavar="SOLVER",
                    help="solvers restarted from the previous solution ('all' or 'none')")

    pe = sub.add_parser("perturb", help="runs with the power perturbation injected")
    _globals(pe, suppress=True)
    pe.add_argument("--users", type=int, nargs="+")
    pe.add_argument("--qos", choices=["I", "II", "III"])
    pe.add_argument("--alpha", type=float)
    pe.add_argument("--window", type=int, nargs=2, metavar=("FIRST", "LAST"))
    pe.add_argument("--targets", type=int, nargs="+", help="perturbed users (0-based)")

    ta = sub.add_parser("tarhuni", help="closed-form precision loss versus the solvers")
    _globals(ta, suppress=True)
    ta.add_argument("--users", type=int, nargs="+")
    ta.add_argument("--qos", choices=["I", "II", "III"])

    rp = sub.add_parser("replay", help="run the solvers on a saved instance file")
    _globals(rp, suppress=True)
    rp.add_argument("instance", help="instance JSON (G stored row-major)")
    return ap


def _event(cfg, kind, **kw):
    kw = {k: v for k, v in kw.items() if v is not None}
    base = next((e for e in cfg.events if e.kind == kind), None)
    ev = dataclasses.replace(base, **kw) if base else DynamicEvent(kind, **kw)
    cfg.events = [e for e in cfg.events if e.kind != kind] + [ev]


def resolve_config(args):
    """Config file first, then command-line overrides."""
    cfg = load_config(args.config) if args.config else config_from_dict({})
    d = dataclasses.asdict(cfg)
    d.pop("system"), d.pop("events"), d.pop("solver_options")
    over = {"base_seed": args.seed, "solver": args.solver, "output_dir": args.out,
            "trials": args.trials, "max_iters": args.max_iters,
            "scenario": getattr(args, "scenario", None), "users": getattr(args, "users", None),
            "qos_class": getattr(args, "qos", None)}
    for k, v in over.items():
        if v is not None:
            d[k] = v
    if getattr(args, "scenario", None) in SCENARIO_USERS and getattr(args, "users", None) is None:
        d["users"] = SCENARIO_USERS[args.scenario]
    ws = getattr(args, "warm_start", None)
    if ws is not None:
        d["warm_start"] = True if ws == ["all"] else False if ws == ["none"] else ws
    try:
        cfg = dataclasses.replace(cfg, **d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.command == "dynamic" and getattr(args, "factor", None) is not None:
        _event(cfg, "LoadIncrease", load_factor=args.factor)
    if args.command == "perturb":
        _event(cfg, "Perturbation", perturb_alpha=args.alpha,
               perturb_window=tuple(args.window) if args.window else None,
               perturb_targets=args.targets)
    return cfg


def _summarise(records, stream):
    for r in records:
        rep = r.report
        print(f"{r.name}: {rep.status.value} after {rep.iterations} iterations, "
              f"F={rep.feasibility:.3e}, NMSE={rep.nmse_terminal:.3e}", file=stream)
    for (K, s), R in robustness_table(records).items():
        print(f"robustness K={K} {s}: {R:.1f}%", file=stream)


def _replay(cfg, path):
    inst = load_instance(path)
    p_star, _ = oracle(inst)
    p0 = random_start(inst, cfg.base_seed)
    qos = inst.qos_labels[0] if inst.qos_labels and len(set(inst.qos_labels)) == 1 else "mixed"
    out = []
    for s in cfg.solvers:
        trace, rep = run_solver(s, inst, p0, make_options(cfg, s), p_star)
        out.append(RunRecord("replay", inst.K, qos, s, cfg.base_seed, trace, rep))
    return out


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "scenario":
            records = run_scenario(cfg)
            if args.instances:
                Path(args.instances).mkdir(parents=True, exist_ok=True)
                for K in cfg.users:
                    for t in range(cfg.trials):
                        seed = cfg.base_seed + t
                        save_instance(scenario_instance(cfg, K, seed), Path(args.instances)
                                      / f"{cfg.scenario}_{K}_{cfg.qos_class}_{seed}.instance.json")
        elif args.command == "dynamic":
            records = run_dynamic_load(cfg)
        elif args.command == "perturb":
            records = run_perturbation(cfg)
        elif args.command == "replay":
            records = _replay(cfg, args.instance)
        else:
            rows = compare_tarhuni(cfg)
            out = Path(cfg.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            name = f"tarhuni_{cfg.scenario}_{cfg.qos_class}_{cfg.base_seed}.json"
            (out / name).write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
            for r in rows:
                print(json.dumps(r, sort_keys=True))
            ok = all(r[f"{s}_status"] == "Converged" for r in rows for s in cfg.solvers)
            return EXIT_OK if ok else EXIT_FAILED
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"ocdma-pc: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OcdmaError as exc:
        print(f"ocdma-pc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    emit_outputs(records, cfg.output_dir)
    _summarise(records, sys.stdout)
    return EXIT_OK if all(r.report.converged for r in records) else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
