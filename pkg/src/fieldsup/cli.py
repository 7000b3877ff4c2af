"""Command-line surface: synthesis, simulation, trace verification and DOT
export.

Exit codes: 0 success, 1 domain failure (synthesis impossible, illegal
trace, model violation during a run), 2 malformed input (parse errors).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from .automata import Fsa, ParseError, format_automaton, parse_automaton, to_dot
from .hybrid import discrete_projection
from .models import build_plants
from .runtime import (
    ModelViolation,
    read_events,
    run_closed_loop,
    verify_trace,
)
from .scenarios import (
    CASES,
    ScenarioConfig,
    build_scenario,
    preset,
    read_config,
    summarize,
    write_config,
)
from .synthesis import ConflictError, SynthesisFailure, modular_synthesis


def _load_automaton(path: str) -> Fsa:
    text = Path(path).read_text(encoding="utf-8")
    return parse_automaton(text, name=Path(path).stem)


def _bundled_skeletons() -> dict[str, Fsa]:
    lib = build_plants()
    out = {"G_A": discrete_projection(lib.uav),
           "G_B": discrete_projection(lib.ugv_template)}
    for k, g in enumerate(lib.ugvs, start=1):
        out[f"G_B{k}"] = discrete_projection(g)
    out.update(lib.specs)
    return out


def cmd_synth(args) -> int:
    try:
        if args.plant:
            subplants = [_load_automaton(p) for p in args.plant]
            specs = []
            for spec_arg in args.spec or []:
                path, _, idx = spec_arg.rpartition(":")
                if not path:
                    raise ValueError(f"--spec wants FILE:SUBPLANT_INDEX, got {spec_arg!r}")
                specs.append((_load_automaton(path), int(idx)))
        else:
            # Bundled team: the UAV plant, two UGV instances, six specs.
            from .scenarios import synthesize_supervisors

            lib = build_plants()
            result = synthesize_supervisors(lib)
            return _emit_synth(result, args)
    except (ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        result = modular_synthesis(subplants, specs)
    except SynthesisFailure as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return 1
    except ConflictError as exc:
        print(f"nonconflict check failed: {exc}", file=sys.stderr)
        return 1
    return _emit_synth(result, args)


def _emit_synth(result, args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    names = []
    for i, sup in enumerate(result.supervisors):
        base = result.verdicts[i].spec_name.replace("/", "_") or f"S{i}"
        name = f"S_{base}.aut"
        (outdir / name).write_text(format_automaton(sup), encoding="utf-8")
        names.append(name)
    report = {
        "supervisors": names,
        "verdicts": [v.as_dict() for v in result.verdicts],
    }
    (outdir / "report.json").write_text(json.dumps(report, indent=2) + "\n",
                                        encoding="utf-8")
    print(json.dumps(report, indent=2))
    return 0


def _scenario_config(args) -> ScenarioConfig:
    if args.config:
        cfg = read_config(Path(args.config).read_text(encoding="utf-8"))
    else:
        cfg = preset(args.scenario)
    overrides = {}
    valid = {f.name for f in fields(ScenarioConfig)}
    for item in args.set or []:
        key, _, val = item.partition("=")
        key = key.strip()
        if key not in valid:
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(cfg, key)
        overrides[key] = type(current)(val.strip()) if not isinstance(current, str) \
            else val.strip()
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.seed is not None:
        overrides["seed"] = args.seed
    return replace(cfg, **overrides) if overrides else cfg


def cmd_simulate(args) -> int:
    try:
        cfg = _scenario_config(args)
        scenario = build_scenario(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rt = scenario.fresh_runtime()
    w = scenario.world
    failure = None
    try:
        rt, w, trace = run_closed_loop(scenario.loop, rt, w, cfg.duration)
    except ModelViolation as exc:
        failure = str(exc)
        trace = getattr(exc, "partial_trace", None)
    if trace is not None:
        trace.write_csv(outdir / "trace.csv")
        trace.write_events(outdir / "events.jsonl")
    (outdir / "config.txt").write_text(write_config(cfg), encoding="utf-8")
    if failure is not None:
        (outdir / "failure.json").write_text(
            json.dumps({"error": failure}) + "\n", encoding="utf-8")
        print(f"model violation: {failure}", file=sys.stderr)
        return 1
    summary = summarize(trace, cfg, n_robots=1 + cfg.n_ugvs)
    text = json.dumps(summary, indent=2) + "\n"
    (outdir / "summary.json").write_text(text, encoding="utf-8")
    if args.format == "json":
        print(text, end="")
    else:
        for key in ("scenario", "min_pairwise_distance_m"):
            print(f"{key},{summary[key]}")
        for ev, n in summary["event_counts"].items():
            print(f"count_{ev},{n}")
    return 0


def cmd_verify(args) -> int:
    try:
        events = read_events(args.trace)
        cfg = _scenario_config(args)
        scenario = build_scenario(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    verdict = verify_trace(events, scenario.loop)
    if verdict.legal:
        print("legal")
        return 0
    print(f"illegal: {verdict.reason} (event #{verdict.index})")
    return 1


def cmd_export_dot(args) -> int:
    try:
        bundled = _bundled_skeletons()
        if args.automaton in bundled:
            fsa = bundled[args.automaton]
        else:
            fsa = _load_automaton(args.automaton)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = to_dot(fsa)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fieldsup",
        description="Supervisory-control workbench for a heterogeneous robot team",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize modular supervisors")
    p.add_argument("--plant", action="append",
                   help="plant automaton file (repeatable); bundled team if omitted")
    p.add_argument("--spec", action="append", metavar="FILE:IDX",
                   help="specification file with its subplant index")
    p.add_argument("--out", default="synth-out", help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="run a closed-loop scenario")
    p.add_argument("scenario", nargs="?", default="case1",
                   help=f"bundled scenario name ({', '.join(CASES)})")
    p.add_argument("--config", help="scenario config file (overrides the name)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--duration", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="sim-out", help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check a recorded event trace for legality")
    p.add_argument("trace", help="events JSONL file")
    p.add_argument("--scenario", default="case1")
    p.add_argument("--config", help="scenario config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--duration", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-dot", help="render an automaton as Graphviz text")
    p.add_argument("automaton",
                   help="automaton file, or a bundled name (G_A, G_B, H_A1, ...)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_dot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
