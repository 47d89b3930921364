"""Command line front end.

Subcommands: solve (float iteration), oracle (integer-quantized iteration),
simulate (build and execute the membrane system), build (emit the generated
system as .psys), compare (percent-error statistics between two tables),
trace (engine run with the observer dump).

Exit status: 0 success, 1 non-convergence, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from psrelief import builder, dsl, io as pio, relief, stats, trace as ptrace
from psrelief.engine import run


@dataclass
class RunManifest:
    command: str
    instance_path: str | None
    variant: str | None
    p: int | None
    tol: float
    max_iter: int
    seed: int
    timestamp: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _manifest(args, command: str, variant: str | None = None) -> RunManifest:
    return RunManifest(
        command=command,
        instance_path=getattr(args, "instance", None),
        variant=variant,
        p=getattr(args, "p", None),
        tol=getattr(args, "tol", 0.0),
        max_iter=getattr(args, "max_iter", 0),
        seed=getattr(args, "seed", 0),
        timestamp=args.timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def _emit(args, payload_json: dict, matrix: np.ndarray | None, manifest: RunManifest,
          instance: relief.ReliefInstance | None = None) -> None:
    if args.format == "json":
        doc = {"manifest": json.loads(manifest.to_json()), "result": payload_json}
        if instance is not None:
            doc["instance"] = instance.to_dict()
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    else:
        if matrix is None:
            lines = [f"# manifest: {manifest.to_json()}", "metric,value"]
            lines += [f"{k},{v!r}" for k, v in sorted(payload_json.items())
                      if isinstance(v, (int, float, bool))]
            text = "\n".join(lines) + "\n"
        else:
            comments = [f"manifest: {manifest.to_json()}"]
            comments += [f"{k}: {v}" for k, v in sorted(payload_json.items())
                         if not isinstance(v, (list, dict))]
            text = pio.format_matrix_csv(matrix, comments)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _report_payload(report: relief.EquilibriumReport) -> dict:
    return {
        "q": report.q_star.tolist(),
        "lam": report.lam.tolist(),
        "lam1": report.lam1.tolist(),
        "lam2": report.lam2.tolist(),
        "iterations": report.iterations,
        "converged": report.converged,
        "variant": report.variant,
        "max_feasibility_residual": float(
            max(float(np.max(v)) if v.size else 0.0 for v in report.feasibility_residuals.values())
        ),
    }


def cmd_solve(args) -> int:
    inst = pio.load_instance(args.instance)
    report = relief.solve(inst, variant=args.variant, tol=args.tol, max_iter=args.max_iter)
    manifest = _manifest(args, "solve", args.variant)
    _emit(args, _report_payload(report), report.q_star, manifest, instance=inst)
    return 0 if report.converged else 1


def cmd_oracle(args) -> int:
    inst = pio.load_instance(args.instance)
    report = relief.solve(inst, variant=relief.QUANTIZED, tol=args.tol,
                          max_iter=args.max_iter, p=args.p)
    manifest = _manifest(args, "oracle", relief.QUANTIZED)
    _emit(args, _report_payload(report), report.q_star, manifest, instance=inst)
    return 0 if report.converged else 1


def cmd_simulate(args) -> int:
    inst = pio.load_instance(args.instance)
    gen = builder.build(builder.BuildParams(instance=inst, p=args.p))
    result = ptrace.run_generated(gen, max_iterations=args.max_iter, seed=args.seed)
    if not result.halted:
        sys.stderr.write(
            f"simulation did not halt within {args.max_iter} iterations\n")
        return 1
    q = builder.decode_output(result.report.final, gen)
    payload = {
        "q": q.tolist(),
        "iterations": len(result.q_trajectory) - 1,
        "engine_steps": result.report.steps,
        "converged": True,
        "variant": "psystem",
    }
    manifest = _manifest(args, "simulate", "psystem")
    _emit(args, payload, q, manifest, instance=inst)
    return 0


def cmd_build(args) -> int:
    inst = pio.load_instance(args.instance)
    gen = builder.build(builder.BuildParams(instance=inst, p=args.p))
    text = dsl.serialize(gen.definition)
    Path(args.emit).write_text(text, encoding="utf-8")
    families = sum(len(v) for v in gen.rule_index.values())
    sys.stdout.write(
        f"wrote {args.emit}: {len(gen.definition.parent)} membranes, "
        f"{families} rules, {len(gen.definition.priorities)} priority pairs\n")
    return 0


def cmd_compare(args) -> int:
    candidate = pio.load_matrix_csv(args.candidate)
    reference = pio.load_matrix_csv(args.reference)
    try:
        result = stats.compare(candidate, reference)
    except ValueError as exc:
        raise pio.InputError(str(exc)) from exc
    payload = {
        "average": result.average,
        "median": result.median,
        "max": result.max,
        "cells": result.scored_cells,
        "excluded_zero_reference": [list(c) for c in result.excluded_zero_reference],
        "per_cell": [[None if np.isnan(v) else v for v in row] for row in result.per_cell],
    }
    manifest = _manifest(args, "compare")
    matrix = result.per_cell if args.format == "csv" else None
    _emit(args, payload, matrix, manifest)
    return 0


def cmd_trace(args) -> int:
    if args.psys:
        text = Path(args.psys).read_text(encoding="utf-8")
        parsed = dsl.parse(dsl.SourceDocument(text=text, origin=args.psys))
        if not parsed.ok:
            for diag in parsed.diagnostics:
                sys.stderr.write(f"{args.psys}:{diag}\n")
            return 2
        definition = parsed.definition
    else:
        if not args.instance or args.p is None:
            sys.stderr.write("trace needs --psys FILE or --instance FILE with --p\n")
            return 2
        inst = pio.load_instance(args.instance)
        definition = builder.build(builder.BuildParams(instance=inst, p=args.p)).definition
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = ptrace.TraceWriter(definition, out)
        report = run(definition, policy=args.policy, seed=args.seed,
                     max_steps=args.max_steps, observer=writer)
    finally:
        if args.out:
            out.close()
    return 0 if report.halted else 1


def _add_common(p: argparse.ArgumentParser, instance_required: bool = True) -> None:
    p.add_argument("--instance", required=instance_required, help="instance JSON file")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=100_000, dest="max_iter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--timestamp", default=None,
                   help="manifest timestamp override (for reproducible exports)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psrelief", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="floating point projected iteration")
    _add_common(p)
    p.add_argument("--variant", choices=[relief.FULL, relief.SIMPLIFIED],
                   default=relief.SIMPLIFIED)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("oracle", help="integer-quantized iteration")
    _add_common(p)
    p.add_argument("--p", type=int, required=True, help="precision exponent (scale 10^p)")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("simulate", help="build and run the membrane system")
    _add_common(p)
    p.add_argument("--p", type=int, required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("build", help="emit the generated system as .psys")
    _add_common(p)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--emit", required=True, help="output .psys path")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("compare", help="percent-error statistics of two tables")
    _add_common(p, instance_required=False)
    p.add_argument("--candidate", required=True)
    p.add_argument("--reference", required=True)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("trace", help="engine run with observer dump")
    _add_common(p, instance_required=False)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--psys", help="trace a .psys system instead of a built instance")
    p.add_argument("--max-steps", type=int, default=10_000, dest="max_steps")
    p.add_argument("--policy", choices=["deterministic", "seeded-random"],
                   default="deterministic")
    p.set_defaults(fn=cmd_trace)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except pio.InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (builder.BuildError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
