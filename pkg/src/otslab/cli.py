"""``otslab`` command line: simulate, fairness, verify, reproduce.

Exit codes: 0 success, 1 invalid input, 2 runtime or guard failure,
3 audit violations.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from pydantic import ValidationError

from . import analysis, io, presets
from .config import ExperimentConfig, load_config
from .fairness import WordPrefix, fairness_report
from .words import GuardExhausted

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME, EXIT_AUDIT = 0, 1, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _overshoot(bj: float, bi: float, w: float) -> float:
    # deliberately wrong update: jumps past the source opinion
    return bi + (bi - bj) * w


def _run(cfg: ExperimentConfig, seed: int | None = None, steps: int | None = None, faulty: bool = False):
    graph = cfg.build_graph()
    scheduler = cfg.build_scheduler(graph, seed)
    return analysis.execute(
        graph,
        cfg.initial,
        cfg.build_influence(),
        scheduler,
        steps if steps is not None else cfg.steps,
        step_rule=_overshoot if faulty else None,
        check_invariants=not faulty,
    )


def _summary(cfg: ExperimentConfig, trace) -> dict:
    rep = analysis.convergence(trace, cfg.tolerance)
    return {"steps": trace.steps, "final": list(trace.final), **rep.to_dict()}


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _parse_seeds(text: str) -> list[int]:
    try:
        lo, hi = text.split("..")
        a, b = int(lo), int(hi)
    except ValueError:
        raise InputError(f"--seeds expects a..b, got {text!r}") from None
    if b < a:
        raise InputError("--seeds range is empty")
    return list(range(a, b + 1))


def _batch_job(args):
    cfg_json, seed, csv_path = args
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    trace = _run(cfg, seed=seed)
    if csv_path:
        io.write_trace_csv(trace, csv_path)
    return {"seed": seed, **_summary(cfg, trace)}


def cmd_simulate(ns) -> int:
    cfg = load_config(ns.config)
    out = ns.output or cfg.outputs.csv
    svg = ns.svg or cfg.outputs.svg
    if ns.seeds:
        seeds = _parse_seeds(ns.seeds)
        stem = Path(out) if out else None
        jobs = [
            (cfg.model_dump_json(by_alias=True), s,
             str(stem.with_name(f"{stem.stem}_seed{s}{stem.suffix or '.csv'}")) if stem else None)
            for s in seeds
        ]
        with ProcessPoolExecutor(max_workers=min(len(jobs), ns.workers)) as pool:
            results = list(pool.map(_batch_job, jobs))
        _emit({"runs": results, "consensus_count": sum(r["consensus"] for r in results)}, None)
        return EXIT_OK
    trace = _run(cfg)
    if out:
        io.write_trace_csv(trace, out)
    if svg:
        io.write_svg(trace, svg, title=Path(ns.config).stem)
    _emit(_summary(cfg, trace), None)
    return EXIT_OK


def cmd_fairness(ns) -> int:
    if bool(ns.trace) == bool(ns.horizon):
        raise InputError("use either --trace FILE or -c CONFIG --horizon N")
    tag = None
    if ns.trace:
        table = io.read_trace_csv(ns.trace)
        if ns.config:
            alphabet = load_config(ns.config).build_graph().labels
        elif ns.alphabet:
            alphabet = tuple(ns.alphabet.split(","))
        else:
            alphabet = tuple(sorted(set(table.actions)))
        try:
            prefix = WordPrefix(table.actions, alphabet)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    else:
        if not ns.config:
            raise InputError("--horizon needs -c CONFIG")
        cfg = load_config(ns.config)
        trace = _run(cfg, steps=ns.horizon)
        prefix, tag = trace.word, trace.tag
    k = ns.k if ns.k is not None else len(prefix.alphabet)
    report = fairness_report(prefix, m=ns.m, k=k, G=ns.G, tag=tag)
    data = report.to_dict()
    if not ns.positions:
        data.pop("multiwindow_positions")
        data["first_multiwindow_positions"] = report.multiwindow_positions[:20]
    _emit(data, ns.output)
    return EXIT_OK


def cmd_verify(ns) -> int:
    cfg = load_config(ns.config)
    trace = _run(cfg, steps=ns.steps, faulty=ns.fault_injection)
    audit = analysis.audit_bounds(trace, budget=ns.budget, beta=ns.beta,
                                  seed=cfg.effective_seed(), max_agents=ns.max_agents)
    data = {"steps": trace.steps, "generator": trace.generator, "audit": audit.to_dict(),
            "convergence": analysis.convergence(trace, cfg.tolerance).to_dict()}
    if trace.generator == "cons12":
        counts = analysis.c_block_growth(trace)
        upto = max(len(counts) - 10, 0)
        data["c_blocks"] = {
            "count": len(counts),
            "first": counts[:20],
            "no_growth_within_10": analysis.growth_witnessed(counts, upto, 10),
        }
    _emit(data, ns.output)
    for name, r in audit.results.items():
        status = "ok" if r.violations == 0 else f"{r.violations} violations"
        print(f"{name:18s} {r.checked:9d} checked  {status}", file=sys.stderr)
    return EXIT_OK if audit.ok else EXIT_AUDIT


def cmd_reproduce(ns) -> int:
    try:
        cfg = presets.preset(ns.figure_id)
    except KeyError as exc:
        raise InputError(exc.args[0]) from None
    outdir = Path(ns.output)
    outdir.mkdir(parents=True, exist_ok=True)
    trace = _run(cfg)
    fid = ns.figure_id
    io.write_trace_csv(trace, outdir / f"{fid}.csv")
    io.write_svg(trace, outdir / f"{fid}.svg", title=f"{fid}: {presets.TITLES[fid]}")
    (outdir / f"{fid}.json").write_text(cfg.model_dump_json(by_alias=True, indent=2) + "\n", encoding="utf-8")
    _emit({"figure": fid, **_summary(cfg, trace)}, None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="otslab", description="Opinion transition systems: runs, fairness and bound audits.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a config and write the trace CSV")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("-o", "--output", help="trace CSV path")
    s.add_argument("--svg", help="also write an SVG plot")
    s.add_argument("--seeds", help="batch mode over seeds a..b (inclusive)")
    s.add_argument("--workers", type=int, default=4)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fairness", help="fairness diagnostics of a word prefix")
    f.add_argument("--trace")
    f.add_argument("-c", "--config")
    f.add_argument("--horizon", type=int)
    f.add_argument("--alphabet", help="comma-separated edge labels (for --trace without a config)")
    f.add_argument("-m", type=int, default=1)
    f.add_argument("-k", type=int)
    f.add_argument("-G", type=int)
    f.add_argument("--positions", action="store_true", help="list every multi-window start")
    f.add_argument("-o", "--output")
    f.set_defaults(func=cmd_fairness)

    v = sub.add_parser("verify", help="run the bound auditors on a config")
    v.add_argument("-c", "--config", required=True)
    v.add_argument("--steps", type=int)
    v.add_argument("--beta", type=int)
    v.add_argument("--budget", type=int, default=10_000)
    v.add_argument("--max-agents", type=int, default=12, help="skip path-delay checks above this size")
    v.add_argument("-o", "--output")
    v.add_argument("--fault-injection", action="store_true", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("reproduce", help="run a reference preset")
    r.add_argument("figure_id", help=", ".join(presets.PRESETS))
    r.add_argument("-o", "--output", default=".")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except (InputError, ValidationError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GuardExhausted, analysis.InvariantViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
