"""Command line: ``rgconsensus check | mcai | run``.

Exit codes: 0 ok, 1 validation failure, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import config as cfgmod
from .errors import AssumptionFailure, ConfigError, RgError
from .export import write_json, write_plots, write_trace_csv
from .mcai import compute_mcai
from .network import check_uniform_connectivity, intervals_intersection
from .regulator import check_assumptions, solve_regulator
from .simulator import metrics, run

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("rgconsensus")


def _load(args) -> dict:
    if args.config:
        cfg = cfgmod.load_config(args.config)
    else:
        cfg = cfgmod.builtin_config(args.scenario)
    return cfgmod.with_overrides(cfg, seed=args.seed, horizon=args.horizon)


def _out_dir(args, cfg) -> Path:
    out = Path(args.out or cfg.get("out") or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _agent_name(cfg, i):
    return cfg["agents"][i].get("name", f"agent{i + 1}")


def cmd_check(args) -> int:
    cfg = _load(args)
    ref = cfgmod.reference_model(cfg)
    eps, delta, max_h = cfgmod.mcai_params(cfg)
    ok = True
    keys = None
    rows, intervals = [], []
    for i, a in enumerate(cfg["agents"]):
        agent = cfgmod.agent_model(a, _agent_name(cfg, i))
        rep = check_assumptions(agent, ref)
        keys = keys or list(rep.results)
        ok &= rep.ok
        rows.append((_agent_name(cfg, i), rep))
        if rep.ok:
            try:
                intervals.append(compute_mcai(solve_regulator(agent, ref), eps, delta, max_h).w2_bounds)
            except RgError as exc:
                print(f"{_agent_name(cfg, i)}: invariant set unavailable: {exc}")
                ok = False
    width = max(len(n) for n, _ in rows + [("agent", None)])
    cols = [max(len(k), 4) for k in keys]
    print("agent".ljust(width) + "  " + "  ".join(k.ljust(c) for k, c in zip(keys, cols)))
    for name, rep in rows:
        cells = ["pass" if rep.results[k] else "FAIL" for k in keys]
        print(name.ljust(width) + "  " + "  ".join(v.ljust(c) for v, c in zip(cells, cols)))
        for k in rep.failed():
            if rep.details.get(k):
                print(f"  {name} {k}: {rep.details[k]}")
    try:
        sched = cfgmod.schedule(cfg)
        conn = check_uniform_connectivity(sched)
        print(f"A1 uniform connectivity (window {sched.window}): {'pass' if conn.ok else 'FAIL'}")
        if not conn.ok:
            start, edges, ncomp = conn.witness()
            print(f"  window starting at {start}: {ncomp} components, union edges {edges}")
        ok &= conn.ok
    except (ValueError, RgError) as exc:
        print(f"A1 uniform connectivity: FAIL ({exc})")
        ok = False
    if len(intervals) == len(cfg["agents"]):
        lo, hi = intervals_intersection(intervals)
        a10 = lo < hi
        print(f"A10 rate intervals intersect: {'pass' if a10 else 'FAIL'} [{lo:.6g}, {hi:.6g}]")
        ok &= a10
    else:
        print("A10 rate intervals intersect: not evaluated")
        ok = False
    print("all assumptions hold" if ok else "some assumptions fail")
    return EXIT_OK if ok else EXIT_INVALID


def cmd_mcai(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    ref = cfgmod.reference_model(cfg)
    eps, delta, max_h = cfgmod.mcai_params(cfg)
    print(f"{'agent':<10}{'t*':>5}{'rows':>6}{'w2 min':>14}{'w2 max':>14}{'W_eps min':>14}{'W_eps max':>14}")
    summary = []
    for i, a in enumerate(cfg["agents"]):
        name = _agent_name(cfg, i)
        t0 = time.perf_counter()
        m = compute_mcai(solve_regulator(cfgmod.agent_model(a, name), ref), eps, delta, max_h)
        elapsed = time.perf_counter() - t0
        (out / f"{name}.mcai.json").write_text(m.dumps() + "\n")
        lo, hi = m.w2_bounds_raw
        elo, ehi = m.w2_bounds
        print(f"{name:<10}{m.t_star:>5}{m.n_rows:>6}{lo:>14.6g}{hi:>14.6g}{elo:>14.6g}{ehi:>14.6g}")
        summary.append({"agent": name, "t_star": m.t_star, "rows": m.n_rows, "w2_bounds_raw": [lo, hi],
                        "w2_bounds": [elo, ehi], "seconds": round(elapsed, 4)})
    write_json({"eps": eps, "delta": delta, "agents": summary}, out / "mcai_summary.json")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    scn = cfgmod.build_scenario(cfg)
    trace = run(scn)
    rep = metrics(trace, scn)
    names = [_agent_name(cfg, i) for i in range(len(scn.agents))]
    for name, at in zip(names, trace.agents):
        write_trace_csv(at, out / f"{name}.csv")
    if not args.no_plots:
        U = scn.agents[0].agent.U
        write_plots(trace, names, U.coordinate_bounds(0), out)
    report = rep.to_dict()
    report["diagnostics"] = trace.diagnostics
    report["scenario"] = scn.name
    report["seed"] = scn.seed
    report["horizon"] = scn.horizon
    write_json(report, out / "metrics.json")
    print(f"wrote {len(names)} traces to {out}")
    for k, v in rep.passes.items():
        print(f"  {k:<22}{'pass' if v else 'FAIL'}")
    for d in trace.diagnostics:
        print(f"  note: {d}")
    return EXIT_OK if rep.ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="YAML or JSON run configuration")
    src.add_argument("--scenario", choices=cfgmod.BUILTIN, default="paper-s1",
                     help="built-in four-agent scenario (default paper-s1)")
    common.add_argument("--out", metavar="DIR", help="output directory (default: config 'out' or ./out)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--horizon", type=int, help="override the number of steps")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rgconsensus", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="evaluate the standing assumptions").set_defaults(func=cmd_check)
    sub.add_parser("mcai", parents=[common], help="compute and save the invariant sets").set_defaults(func=cmd_mcai)
    r = sub.add_parser("run", parents=[common], help="simulate and write traces, plots, metrics")
    r.add_argument("--no-plots", action="store_true", help="write CSV and metrics only")
    r.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AssumptionFailure as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RgError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
