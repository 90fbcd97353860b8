"""Command-line front end.

Subcommands: ``validate``, ``score``, ``aggregate``, ``rank``,
``roofline``, ``simulate``, ``report``.  Common flags ``--store``,
``--lenient`` and ``--format {md,json,csv}`` are accepted by every data
subcommand.  Exit codes: 0 success, 1 internal error, 2 rule violations
present, 3 schema errors.

Each invocation is an independent process over the file store; there is
no daemon state.
"""

import argparse
import csv
import fnmatch
import io
import json
import sys
from pathlib import Path

from . import report as report_mod
from . import rules, simulator
from .core import (
    NineLayerDeclaration,
    PrecisionMode,
    RunRecord,
    loads,
)
from .errors import (
    EXIT_INTERNAL,
    EXIT_OK,
    EXIT_SCHEMA,
    EXIT_VIOLATIONS,
    BenchError,
    SchemaError,
)
from .metrics import score_run
from .roofline import (
    Ceiling,
    RooflineMode,
    RooflinePoint,
    build_model,
    export_plot,
)
from .store import ResultsStore, ingest

__all__ = ["main"]


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--store", help="results store directory")
    parser.add_argument("--lenient", action="store_true",
                        help="accept unknown JSON fields")
    parser.add_argument("--format", choices=("md", "json", "csv"),
                        default="md", help="output format")


def _load_runs(args) -> tuple[list[RunRecord], list]:
    """Collect runs from --store and/or positional paths."""
    records: list[RunRecord] = []
    diagnostics: list = []
    if args.store:
        result = ResultsStore(args.store).load_all(
            workload=getattr(args, "workload", None), lenient=args.lenient)
        records.extend(result.records)
        diagnostics.extend(result.diagnostics)
    for path in getattr(args, "runs", None) or []:
        result = ingest(path, lenient=args.lenient)
        records.extend(result.records)
        diagnostics.extend(result.diagnostics)
    select = getattr(args, "select", None)
    if select:
        records = [r for r in records if fnmatch.fnmatch(r.run_id, select)]
    return records, diagnostics


def _report_diagnostics(diagnostics) -> None:
    for d in diagnostics:
        print(f"schema: {d.path}: {d.error}", file=sys.stderr)


def _emit_table(fmt: str, headers, rows, json_doc) -> None:
    if fmt == "json":
        print(json.dumps(json_doc, indent=2))
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(rows)
        print(buf.getvalue(), end="")
    else:
        widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows
                  else len(str(h)) for i, h in enumerate(headers)]
        print("  ".join(str(h).ljust(w) for h, w in zip(headers, widths)))
        for row in rows:
            print("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))


def _read_declaration(path: str, lenient: bool) -> NineLayerDeclaration:
    return loads(Path(path).read_text(encoding="utf-8"), "declaration",
                 lenient=lenient, path=path)


def _cmd_validate(args) -> int:
    records, diagnostics = _load_runs(args)
    _report_diagnostics(diagnostics)
    reference = _read_declaration(args.reference, args.lenient)
    any_error = False
    out = []
    for run in records:
        violations = rules.validate_declaration(run, reference)
        errors = [v for v in violations if v.severity is rules.Severity.ERROR]
        any_error |= bool(errors)
        out.append({"run_id": run.run_id,
                    "violations": [v.to_dict() for v in violations]})
        status = "clean" if not violations else f"{len(violations)} violation(s)"
        print(f"{run.run_id}: {status}")
        for v in violations:
            print(f"  layer {v.layer} [{v.severity.value}] {v.key}: {v.message}")
    if args.format == "json":
        print(json.dumps(out, indent=2))
    if diagnostics:
        return EXIT_SCHEMA
    return EXIT_VIOLATIONS if any_error else EXIT_OK


def _cmd_score(args) -> int:
    records, diagnostics = _load_runs(args)
    _report_diagnostics(diagnostics)
    rows, doc = [], []
    for run in sorted(records, key=lambda r: r.run_id):
        s = score_run(run)
        rows.append([run.run_id, f"{s.flops:.6g}", f"{s.vflops:.6g}",
                     "" if s.vflops_per_watt is None else f"{s.vflops_per_watt:.6g}",
                     f"{s.time_to_quality:.6g}", f"{s.penalty:.6g}"])
        doc.append({"run_id": run.run_id, "flops": s.flops, "vflops": s.vflops,
                    "vflops_per_watt": s.vflops_per_watt,
                    "time_to_quality": s.time_to_quality, "penalty": s.penalty})
    _emit_table(args.format,
                ["run_id", "flops", "vflops", "vflops_per_watt",
                 "time_to_quality", "penalty"], rows, doc)
    return EXIT_SCHEMA if diagnostics else EXIT_OK


def _workload_of(records: list[RunRecord]):
    names = sorted({r.workload.name for r in records})
    if len(names) != 1:
        raise SchemaError(
            "runs span workloads " + ", ".join(names)
            + "; narrow with --workload or --select")
    return records[0].workload


def _cmd_aggregate(args) -> int:
    records, diagnostics = _load_runs(args)
    _report_diagnostics(diagnostics)
    if diagnostics:
        return EXIT_SCHEMA
    if not records:
        raise SchemaError("no runs to aggregate")
    workload = _workload_of(records)
    agg = rules.aggregate_runs(records, workload)
    doc = {
        "workload": workload.name,
        "runs": len(records),
        "retained": [r.run_id for r in agg.retained_runs],
        "dropped": [r.run_id for r in agg.dropped],
        "mean_scores": dict(agg.mean_scores),
        "variation_epochs_to_quality": agg.variation,
        "variation_wall_time": agg.wall_time_variation,
    }
    if args.format == "json":
        print(json.dumps(doc, indent=2))
    else:
        print(f"workload: {workload.name} ({len(records)} trials, "
              f"dropped {', '.join(doc['dropped']) or 'none'})")
        for k, v in agg.mean_scores.items():
            print(f"  mean {k}: {v:.6g}")
        print(f"  variation (epochs-to-quality): {agg.variation:.6g}")
        print(f"  variation (wall time): {agg.wall_time_variation:.6g}")
    return EXIT_OK


def _cmd_rank(args) -> int:
    records, diagnostics = _load_runs(args)
    _report_diagnostics(diagnostics)
    if diagnostics:
        return EXIT_SCHEMA
    if not records:
        raise SchemaError("no runs to rank")
    violations = None
    if args.reference:
        reference = _read_declaration(args.reference, args.lenient)
        violations = {r.run_id: rules.validate_declaration(r, reference)
                      for r in records}
    rows = report_mod.rank(records, violations=violations)
    table = [[r.rank, r.run_id, r.label, r.scale, r.precision,
              f"{r.flops:.6g}", f"{r.vflops:.6g}",
              "" if r.vflops_per_watt is None else f"{r.vflops_per_watt:.6g}",
              f"{r.time_to_quality:.6g}", r.rule_status] for r in rows]
    _emit_table(args.format,
                ["rank", "run_id", "system", "scale", "precision", "flops",
                 "vflops", "vflops_per_watt", "time_to_quality", "rule_status"],
                table, [r.to_dict() for r in rows])
    any_error = any(not r.eligible for r in rows)
    return EXIT_VIOLATIONS if any_error else EXIT_OK


def _cmd_roofline(args) -> int:
    system = loads(Path(args.system).read_text(encoding="utf-8"), "system",
                   lenient=args.lenient, path=args.system)
    ceilings = ()
    if args.ceilings:
        raw = json.loads(Path(args.ceilings).read_text(encoding="utf-8"))
        try:
            ceilings = tuple(Ceiling(**c) for c in raw)
        except TypeError as exc:
            raise SchemaError(f"ceilings file: {exc}") from None
    model = build_model(system, RooflineMode(args.mode), ceilings,
                        precision=PrecisionMode(args.precision))
    points = []
    if args.points:
        raw = json.loads(Path(args.points).read_text(encoding="utf-8"))
        for entry in raw:
            try:
                points.append(RooflinePoint.from_traffic(
                    label=entry["label"], flops_total=entry["flops_total"],
                    comm_traffic=entry["comm_traffic"],
                    attained=entry.get("attained")))
            except KeyError as exc:
                raise SchemaError(
                    f"point entries need label/flops_total/comm_traffic "
                    f"(missing {exc})") from None
    artifact = export_plot(model, points)
    if args.out_csv:
        Path(args.out_csv).write_text(artifact.csv, encoding="utf-8")
    if args.out_svg:
        Path(args.out_svg).write_text(artifact.svg, encoding="utf-8")
    print(f"mode: {model.mode.value}  peak {model.peak_flops:.6g} FLOPS, "
          f"band {model.peak_band:.6g} B/s, ridge {model.ridge:.6g}")
    if not args.out_csv and not args.out_svg:
        print(artifact.csv, end="")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    results = simulator.run_scenario(args.scenario, out_dir=args.out)
    _emit_table(args.format,
                ["scale", "throughput_flops", "efficiency"],
                [[r.run.scale, f"{r.throughput_flops:.6g}",
                  f"{r.efficiency:.6g}"] for r in results],
                [{"scale": r.run.scale, "run_id": r.run.run_id,
                  "throughput_flops": r.throughput_flops,
                  "efficiency": r.efficiency,
                  "phase_timeline": r.timeline.to_dict()} for r in results])
    return EXIT_OK


def _cmd_report(args) -> int:
    records, diagnostics = _load_runs(args)
    _report_diagnostics(diagnostics)
    if diagnostics:
        return EXIT_SCHEMA
    if not records:
        raise SchemaError("no runs to report")
    workload = _workload_of(records)
    reference = _read_declaration(args.reference, args.lenient)
    violations = []
    for run in records:
        violations.extend(rules.validate_declaration(run, reference))
    agg = rules.aggregate_runs(records, workload)
    scores = {r.run_id: score_run(r) for r in records}
    doc = report_mod.emit_report(
        aggregate=agg, violations=violations, scores=scores,
        system=records[0].system, declaration=records[0].declaration,
        workload=workload)
    text = doc.json() if args.format == "json" else doc.markdown
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        twin = Path(args.out).with_suffix(
            ".json" if args.format != "json" else ".md")
        twin.write_text(doc.json() if args.format != "json" else doc.markdown,
                        encoding="utf-8")
        print(f"wrote {args.out} and {twin}")
    else:
        print(text)
    if any(v.severity is rules.Severity.ERROR for v in violations):
        return EXIT_VIOLATIONS
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpcbench",
        description="Benchmarking analytics for HPC AI systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="audit run declarations against a "
                                        "reference at each run's level")
    _common_flags(p)
    p.add_argument("runs", nargs="*", help="run JSON files or directories")
    p.add_argument("--reference", required=True,
                   help="reference declaration JSON")
    p.add_argument("--select", help="run_id glob filter")
    p.add_argument("--workload", help="restrict to one workload subtree")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("score", help="compute FLOPS/VFLOPS scores per run")
    _common_flags(p)
    p.add_argument("runs", nargs="*")
    p.add_argument("--select")
    p.add_argument("--workload")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("aggregate", help="drop-extremes aggregate of trials")
    _common_flags(p)
    p.add_argument("runs", nargs="*")
    p.add_argument("--select")
    p.add_argument("--workload")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("rank", help="rank runs by VFLOPS")
    _common_flags(p)
    p.add_argument("runs", nargs="*")
    p.add_argument("--select")
    p.add_argument("--workload")
    p.add_argument("--reference", help="optional declaration for rule status")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("roofline", help="build a roofline and export CSV/SVG")
    _common_flags(p)
    p.add_argument("--system", required=True, help="system config JSON")
    p.add_argument("--mode", choices=("single_node", "distributed"),
                   default="distributed")
    p.add_argument("--precision", default="fp32")
    p.add_argument("--ceilings", help="JSON list of measured ceilings")
    p.add_argument("--points", help="JSON list of points to place")
    p.add_argument("--out-csv")
    p.add_argument("--out-svg")
    p.set_defaults(func=_cmd_roofline)

    p = sub.add_parser("simulate", help="run a training scenario sweep")
    _common_flags(p)
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--out", help="directory for run records and sweep.csv")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="emit the full benchmark report")
    _common_flags(p)
    p.add_argument("runs", nargs="*")
    p.add_argument("--select")
    p.add_argument("--workload")
    p.add_argument("--reference", required=True)
    p.add_argument("--out", help="output file (json twin written alongside)")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
