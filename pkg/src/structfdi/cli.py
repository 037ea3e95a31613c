"""Command-line entry point: parse, analyze, sweep, place sensors, simulate, export.

Exit codes are part of the contract: 0 success, 2 parse/validation failure,
3 infeasible placement target, 4 numeric abort during simulation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .diagnosis import detectable_faults, diagnosis_report, isolability_matrix, report_json
from .graphcore import dm_decompose, dot_export, from_model, incidence_csv
from .hydrosim import ScenarioError, SimulationError, load_scenario, simulate
from .regions import sweep_regions
from .sensorplace import load_catalog, load_target, minimal_sensor_sets
from .structmodel import (
    ModelError,
    ModelFormatError,
    condense_gates,
    expand_differential,
    load_model,
    serialize_model,
    validate,
)

OK, E_VALIDATION, E_INFEASIBLE, E_NUMERIC = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="structfdi",
                                description="structural fault diagnosis toolkit")
    p.add_argument("--no-version-header", action="store_true",
                   help="omit the version line from text reports")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="DM decomposition, detectability, isolability")
    a.add_argument("model", type=Path)
    a.add_argument("--format", choices=("text", "csv", "json"), default="text")
    a.add_argument("--dot", type=Path, help="write DM-coloured graph to this DOT file")
    a.add_argument("--csv", type=Path, help="write the isolability matrix as CSV")
    a.add_argument("--json", type=Path, help="write the full JSON report")
    a.add_argument("--fine-blocks", action="store_true",
                   help="group the just part into fine blocks in the DOT output")

    r = sub.add_parser("regions", help="per-region diagnosis sweep and invariance check")
    r.add_argument("model", type=Path)
    r.add_argument("--format", choices=("text", "json"), default="text")
    r.add_argument("--dump-all", type=Path, metavar="DIR",
                   help="write one isolability-matrix CSV per region into DIR")

    s = sub.add_parser("sensors", help="minimal sensor sets for a placement target")
    s.add_argument("model", type=Path)
    s.add_argument("--catalog", type=Path, required=True)
    s.add_argument("--target", type=Path, required=True)
    s.add_argument("--no-sensor-faults", action="store_true",
                   help="treat candidate sensors as fault-free (what-if studies)")
    s.add_argument("--max-subset-size", type=int, default=None, metavar="N")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--json", type=Path, help="write the placement result as JSON")

    m = sub.add_parser("simulate", help="integrate a scenario and write the trajectory CSV")
    m.add_argument("scenario", type=Path)
    m.add_argument("--out", type=Path, default=None,
                   help="trajectory CSV path (default: <scenario>_trajectory.csv)")
    m.add_argument("--step", type=float, default=None, metavar="H",
                   help="override the integration step")

    e = sub.add_parser("export", help="raw model exports without analysis")
    e.add_argument("model", type=Path)
    e.add_argument("--incidence", type=Path, help="write the 0/1 incidence matrix CSV")
    e.add_argument("--dot", type=Path, help="write the bipartite graph as DOT")
    e.add_argument("--model-out", type=Path, help="re-serialize the model canonically")
    e.add_argument("--condensed", action="store_true",
                   help="export the gate-condensed structure instead of the raw one")
    return p


def _header(args) -> str:
    return "" if args.no_version_header else f"# structfdi {__version__}\n"


def _load_checked(path: Path):
    model = load_model(path)
    report = validate(model)
    if not report.ok:
        raise ModelError(f"model {path} failed validation:\n{report}")
    return model


def cmd_analyze(args) -> int:
    model = _load_checked(args.model)
    analysed = condense_gates(expand_differential(model))
    graph = from_model(analysed)
    dm = dm_decompose(graph)
    verdicts = detectable_faults(model)
    matrix = isolability_matrix(model)

    if args.dot:
        args.dot.write_text(dot_export(graph, dm, fine_blocks=args.fine_blocks), encoding="utf-8")
    if args.csv:
        args.csv.write_text(matrix.to_csv(), encoding="utf-8")
    if args.json:
        args.json.write_text(report_json(model), encoding="utf-8")

    if args.format == "json":
        print(report_json(model), end="")
        return OK
    if args.format == "csv":
        print(matrix.to_csv(), end="")
        return OK

    out = [_header(args) + f"model: {model.name} ({args.model})"]
    if model.has_gates():
        out.append(f"gated document condensed: {len(model.constraints)} -> "
                   f"{len(analysed.constraints)} constraints")
    out.append(f"constraints: {len(analysed.constraints)}  unknowns: {len(graph.right)}  "
               f"faults: {len(model.fault_ids())}")
    out.append(f"DM parts: under={len(dm.under_constraints)} "
               f"just={len(dm.just_pairs)} over={len(dm.over_constraints)} (constraints)")
    undet = [v.fault for v in verdicts if not v.detectable]
    out.append(f"undetectable faults: {', '.join(undet) if undet else 'none'}")
    blocks = [b for b in matrix.blocks() if len(b) > 1]
    if blocks:
        out.append("group-wise isolable blocks: " + "; ".join("{" + ", ".join(b) + "}" for b in blocks))
    singles = [b[0] for b in matrix.blocks() if len(b) == 1]
    out.append(f"fully isolable faults: {len(singles)}")
    out.append("")
    out.append(matrix.to_text())
    print("\n".join(out))
    return OK


def pattern_hash(matrix) -> str:
    key = ",".join("1" if v else "0" for v in matrix.pattern_key())
    key = ";".join(sorted(matrix.faults)) + "|" + key
    return hashlib.sha256(key.encode()).hexdigest()[:12]


def cmd_regions(args) -> int:
    model = _load_checked(args.model)
    sweep = sweep_regions(model)
    if args.dump_all:
        args.dump_all.mkdir(parents=True, exist_ok=True)
        for idx, matrix in enumerate(sweep.matrices):
            tag = sweep.region_tag(idx).replace(",", "_") or "whole"
            (args.dump_all / f"region_{idx:03d}_{tag}.csv").write_text(
                matrix.to_csv(), encoding="utf-8")

    n = len(sweep.matrices)
    identical = sum(1 for _, d in sweep.diffs if d.empty) + 1
    if args.format == "json":
        payload = {
            "model": model.name,
            "regions": [{"assignment": sweep.assignments[i],
                         "pattern_hash": pattern_hash(sweep.matrices[i])}
                        for i in range(n)],
            "invariant": sweep.invariant,
            "identical": identical,
            "whole_model_superset": sweep.whole_model_superset,
        }
        print(json.dumps(payload, indent=2))
        return OK

    lines = [_header(args) + f"model: {model.name} ({args.model})"]
    lines.append(f"regions: {n}")
    for i in range(n):
        tag = sweep.region_tag(i) or "(no switches)"
        lines.append(f"  {i:3d}  {tag:<40} {pattern_hash(sweep.matrices[i])}")
    if sweep.invariant:
        lines.append(f"INVARIANT: yes ({identical}/{n} identical)")
    else:
        first = next((pair, d) for pair, d in sweep.diffs if not d.empty)
        (ra, rb), diff = first
        lines.append(f"INVARIANT: no (regions {ra} and {rb} differ in {len(diff)} cells; "
                     f"first: {diff.entries[0][0]} vs {diff.entries[0][1]})")
    lines.append(f"whole-model detectability superset of regions: "
                 f"{'yes' if sweep.whole_model_superset else 'no'}")
    print("\n".join(lines))
    return OK


def cmd_sensors(args) -> int:
    model = _load_checked(args.model)
    catalog = load_catalog(args.catalog.read_text(encoding="utf-8"), model)
    target = load_target(args.target.read_text(encoding="utf-8"), model)
    result = minimal_sensor_sets(model, catalog, target,
                                 sensor_faults=not args.no_sensor_faults,
                                 max_subset_size=args.max_subset_size)
    payload = {
        "model": model.name,
        "feasible": result.feasible,
        "exhaustive": result.exhaustive,
        "warning": result.warning,
        "unmet": list(result.unmet),
        "minimal_sets": [{"sensors": list(names), "cost": cost}
                         for names, cost in result.chosen],
    }
    if args.json:
        args.json.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        lines = [_header(args) + f"model: {model.name} ({args.model})"]
        if not result.feasible:
            lines.append("INFEASIBLE even with the full catalog; unmet requirements:")
            lines.extend(f"  - {u}" for u in result.unmet)
        else:
            lines.append(f"minimal sensor sets ({len(result.chosen)}):")
            for names, cost in result.chosen:
                lines.append(f"  cost {cost:g}: {{{', '.join(names)}}}")
            if result.warning:
                lines.append(f"warning: {result.warning}")
        print("\n".join(lines))
    return OK if result.feasible else E_INFEASIBLE


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.step is not None:
        from dataclasses import replace

        scenario = replace(scenario, step=args.step)
    traj = simulate(scenario)
    out = args.out or args.scenario.with_name(args.scenario.stem + "_trajectory.csv")
    out.write_text(traj.to_csv(), encoding="utf-8")
    summary = traj.summary()
    print(_header(args) + f"scenario: {scenario.name} ({args.scenario})")
    print(f"steps: {summary['steps']}  wrote: {out}")
    print(f"pressure range: [{summary['pressure_min']:.6g}, {summary['pressure_max']:.6g}] Pa")
    final = summary["final_state"]
    print("final state: " + "  ".join(f"{k}={v:.6g}" for k, v in final.items()))
    print("region occupancy: " + "  ".join(f"{code}:{cnt}" for code, cnt
                                           in sorted(summary["region_occupancy"].items())))
    return OK


def cmd_export(args) -> int:
    model = _load_checked(args.model)
    chosen = condense_gates(expand_differential(model)) if args.condensed else model
    graph = from_model(chosen)
    wrote = False
    if args.incidence:
        args.incidence.write_text(incidence_csv(graph), encoding="utf-8")
        wrote = True
    if args.dot:
        args.dot.write_text(dot_export(graph), encoding="utf-8")
        wrote = True
    if args.model_out:
        args.model_out.write_text(serialize_model(chosen), encoding="utf-8")
        wrote = True
    if not wrote:
        print(serialize_model(chosen), end="")
    return OK


_COMMANDS = {
    "analyze": cmd_analyze,
    "regions": cmd_regions,
    "sensors": cmd_sensors,
    "simulate": cmd_simulate,
    "export": cmd_export,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ModelFormatError, ModelError, ScenarioError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return E_VALIDATION
    except SimulationError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return E_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
