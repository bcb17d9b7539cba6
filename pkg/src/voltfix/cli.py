"""``voltfix`` command line.

Exit codes: 0 success, 1 property or hypothesis violation, 2 the solver did
not converge, 3 bad input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import comparison as cmp
from . import mnc
from .config import SCHEMA, ConfigError, load_config
from .expr import EvalError, ExprError
from .grid import grid_function_csv
from .problem import check_hypotheses, describe, find_r0
from .solver import SolverConfig, contraction_probe, solve

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_NOT_CONVERGED = 2
EXIT_INPUT = 3


def _flag(key):
    return "--" + key.replace("_", "-")


def _witness(rep):
    return ", ".join(f"{cmp._fmt(a)}={cmp._fmt(b)}" for a, b in rep.witness)


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def cmd_check(cfg, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    p = cfg.problem()
    if p.a is None or p.b is None:
        raise ConfigError("check needs the kernel bound factors a and b")
    rep = check_hypotheses(
        p,
        samples=cfg["samples"],
        seed=cfg["sample_seed"],
        r_max=cfg["r_max"],
        r_resolution=cfg["r_resolution"],
        decay_threshold=cfg["decay_threshold"],
        n_max=cfg["n_max"],
        decay_tol=cfg["decay_tol"],
    )
    out.write(f"problem = {describe(p)}\n")
    text = rep.to_text()
    ok = rep.passed
    pairs = cfg["probe_pairs"]
    if pairs > 0:
        radius = rep.r0 if rep.r0 is not None else 1.0
        probe = contraction_probe(p, pairs, radius, cfg["sample_seed"], cfg["grid_n"], cfg["rule"])
        head, _, tail = text.partition("[WARNINGS]\n")
        line = f"probe {probe.to_line()}" + (f" note={probe.note}" if probe.note else "")
        if not probe.passed:
            ok = False
            warn = f"WARNING h2 {probe.name}: the pointwise contraction inequality is violated; witness {_witness(probe)}"
            tail = warn + "\n" if tail.strip() == "none" else tail + warn + "\n"
        text = head + line + "\n[WARNINGS]\n" + tail
    out.write(text)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_solve(cfg, out_path, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    p = cfg.problem()
    scfg = SolverConfig(
        mode=cfg["mode"],
        tol=cfg["tol"],
        max_iter=cfg["max_iter"],
        initial=cfg["initial"],
        grid_n=cfg["grid_n"],
        rule=cfg["rule"],
    )
    res = solve(p, scfg)
    _write(out_path, grid_function_csv(res.solution))
    out.write(res.report())
    if not res.converged:
        err.write(f"not converged: {res.message}\n")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_mnc(cfg, out_path, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    p = cfg.problem()
    grid = p.grid(cfg["grid_n"])
    r0 = find_r0(p) if p.a is not None and p.b is not None else None
    radius = r0 if r0 is not None else 1.0
    seed = cfg["seed"]
    X0 = mnc.random_ensemble(p, grid, cfg["ensemble_size"], seed, radius)
    hull = max(cfg["hull_count"], len(X0))
    probe = mnc.check_inequality_2_1(p, X0, hull, seed, tail_fraction=cfg["tail_fraction"], rule=cfg["rule"])
    if not probe.passed:
        err.write(f"inequality probe: {probe.to_line()}\n")
    estimates = [mnc.estimate_mu(X0, tail_fraction=cfg["tail_fraction"])]
    failure = None
    try:
        estimates = mnc.darbo_iterate(p, X0, cfg["steps"], hull, seed, cfg["tail_fraction"], cfg["rule"])
    except (EvalError, ValueError) as exc:
        failure = exc
    _write(out_path, mnc.estimates_csv(estimates))
    ok = failure is None and mnc.is_nonincreasing(estimates)
    out.write(f"radius={radius:.17g}\n")
    out.write(f"initial_mu_hat={estimates[0].mu_hat:.17g}\n")
    out.write(f"final_mu_hat={estimates[-1].mu_hat:.17g}\n")
    out.write(f"nonincreasing={str(ok).lower()}\n")
    if failure is not None:
        err.write(f"set iteration failed: {failure}\n")
    elif not ok:
        err.write("mu_hat increased during the set iteration\n")
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_compare(cfg, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    triple = cfg.triple()
    reports = cmp.comparison_suite(triple, cfg["n_max"], cfg["decay_tol"])
    out.write(f"case = {triple.tag}\n")
    for rep in reports:
        out.write(rep.to_line() + (f" note={rep.note}" if rep.note else "") + "\n")
    failed = [r for r in reports if not r.passed]
    for rep in failed:
        err.write(f"WARNING {rep.name}: witness {_witness(rep)}\n")
    return EXIT_VIOLATION if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voltfix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check": "check the hypotheses of the existence result",
        "solve": "solve the integral equation on a grid",
        "mnc": "run the sampled set iteration and track the measure estimate",
        "compare": "audit the comparison functions",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config", help="configuration file")
        if name in ("solve", "mnc"):
            sp.add_argument("--out", required=True, help="CSV output path")
        group = sp.add_argument_group("overrides", "each flag replaces the config key of the same name")
        for key, spec in SCHEMA.items():
            group.add_argument(_flag(key), dest=f"set_{key}", metavar=spec.kind.upper(), help=f"[{spec.section}] {spec.doc}")
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = load_config(args.config)
        for key in SCHEMA:
            value = getattr(args, f"set_{key}")
            if value is not None:
                cfg.set(key, value)
        if args.command == "check":
            return cmd_check(cfg, out, err)
        if args.command == "solve":
            return cmd_solve(cfg, args.out, out, err)
        if args.command == "mnc":
            return cmd_mnc(cfg, args.out, out, err)
        return cmd_compare(cfg, out, err)
    except (ConfigError, ExprError, ValueError, OSError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
