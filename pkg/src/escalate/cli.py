"""Command-line interface.

Subcommands: ``validate``, ``interp-table``, ``run``, ``longrun``,
``sensitivity``, ``compare``. Tabular output is CSV on stdout; ``--out
json`` emits one JSON document with the same fields. Exit codes: 0 success,
1 validation failure, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from .engine import timeline_header, timeline_rows
from .errors import EscalateError, InvalidModelError, ModelFormatError
from .model import parse_model, validate_model
from .scenarios import (
    SweepSpec,
    checkpoint_rows,
    load_scenario,
    longrun_report,
    prior_sensitivity,
    run_scenario,
    structure_robustness,
    zeta_sensitivity,
)
from .tasks import table_rows


def _load_model(path: str):
    return parse_model(Path(path).read_text())


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)  # 'inf', '-inf', 'nan'
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def _emit(header, rows, out: str, extra: dict | None = None):
    if out == "json":
        doc = {"columns": header, "rows": _jsonable([list(r) for r in rows])}
        if extra:
            doc.update(_jsonable(extra))
        print(json.dumps(doc, indent=2))
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_validate(args) -> int:
    report = validate_model(_load_model(args.model))
    header = ["severity", "code", "message", "path"]
    rows = [[f.severity, f.code, f.message, f.path] for f in report.findings]
    _emit(header, rows, args.out, extra={"ok": report.ok})
    return 0 if report.ok else 1


def cmd_interp_table(args) -> int:
    spec = _load_model(args.model)
    report = validate_model(spec)
    if not report.ok:
        raise InvalidModelError(report)
    header, rows = table_rows(spec)
    _emit(header, rows, args.out)
    return 0


def cmd_run(args) -> int:
    spec = _load_model(args.model)
    scenario = load_scenario(args.scenario)
    timeline = run_scenario(spec, scenario)
    _emit(timeline_header(spec), timeline_rows(timeline, spec), args.out)
    return 0


def _parse_sweep_range(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected lo:hi:steps, got {text!r}")
    return float(parts[0]), float(parts[1]), int(parts[2])


def cmd_longrun(args) -> int:
    spec = _load_model(args.model)
    sweep = _parse_sweep_range(args.neutral_rate_sweep) if args.neutral_rate_sweep else None
    report = longrun_report(
        spec,
        horizon=args.horizon,
        mobilised_absorbing=args.mobilised_absorbing or sweep is not None,
        absorb_state=args.absorb_state,
        neutral_rate_sweep=sweep,
    )
    meta = {
        "variant": report.variant,
        "steps": report.steps,
        "converged": report.converged,
        "terminal": dict(zip(report.states, report.terminal)),
    }
    if sweep is not None:
        header = ["neutral_rate", f"terminal_{report.states[0]}", "terminal_absorbed"]
        rows = [list(row) for row in report.sweep]
    else:
        header = ["step", *[f"p_{s}" for s in report.states]]
        rows = [
            [i * report.sample_every if i * report.sample_every <= report.steps else report.steps]
            + list(point)
            for i, point in enumerate(report.trajectory)
        ]
    _emit(header, rows, args.out, extra=meta)
    return 0


def cmd_sensitivity(args) -> int:
    spec = _load_model(args.model)
    scenario = load_scenario(args.scenario)
    values = tuple(float(v) for v in args.values.split(",")) if args.values else ()
    if args.target.startswith("prior"):
        results = prior_sensitivity(
            spec, scenario, SweepSpec(target=args.target, settings=values, rule=args.rule)
        )
    elif args.target.startswith("zeta"):
        _, _, state = args.target.partition(":")
        results = zeta_sensitivity(spec, scenario, values, state_id=state or None)
    else:
        raise ValueError(f"unknown sweep target {args.target!r}")
    header = ["setting", "t", *[f"p_{s}" for s in spec.state_ids], "score"]
    rows = []
    for result in results:
        for row in checkpoint_rows(result.timeline, result.spec, every=args.every):
            rows.append([result.setting, *row])
    _emit(header, rows, args.out)
    return 0


def _parse_state_map(text: str | None) -> dict | None:
    if not text:
        return None
    out = {}
    for pair in text.split(","):
        src, _, dst = pair.partition("=")
        if not src or not dst:
            raise ValueError(f"expected base=variant pairs, got {pair!r}")
        out[src.strip()] = dst.strip()
    return out


def cmd_compare(args) -> int:
    base = _load_model(args.base)
    variant = _load_model(args.variant)
    scenario = load_scenario(args.scenario)
    mapping = _parse_state_map(args.map)
    diff = structure_robustness(base, [variant], scenario, mappings=[mapping])[0]
    header = ["t", *[f"d_{s}" for s in diff.states]]
    rows = [
        [t, *[diff.diffs[s][i] for s in diff.states]]
        for i, t in enumerate(diff.t)
    ]
    _emit(header, rows, args.out, extra={"max_abs_diff": diff.max_abs()})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="escalate", description="Escalation-inference engine tools"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", choices=("csv", "json"), default="csv")

    p = sub.add_parser("validate", help="check a model document's invariants")
    p.add_argument("model")
    common(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("interp-table", help="emit every position's task-configuration table")
    p.add_argument("model")
    common(p)
    p.set_defaults(fn=cmd_interp_table)

    p = sub.add_parser("run", help="run an observation scenario")
    p.add_argument("model")
    p.add_argument("scenario")
    common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("longrun", help="evolve the priors to convergence")
    p.add_argument("model")
    p.add_argument("--horizon", type=int, default=10**6)
    p.add_argument("--mobilised-absorbing", action="store_true")
    p.add_argument("--absorb-state", default=None)
    p.add_argument("--neutral-rate-sweep", default=None, metavar="LO:HI:STEPS")
    common(p)
    p.set_defaults(fn=cmd_longrun)

    p = sub.add_parser("sensitivity", help="sweep priors or holding parameters")
    p.add_argument("model")
    p.add_argument("scenario")
    p.add_argument("--target", required=True, help="prior:<state> | prior:equal | zeta[:<state>]")
    p.add_argument("--values", default="", help="comma-separated settings")
    p.add_argument("--rule", choices=("shift", "set"), default="shift")
    p.add_argument("--every", type=int, default=5, help="checkpoint spacing")
    common(p)
    p.set_defaults(fn=cmd_sensitivity)

    p = sub.add_parser("compare", help="difference matched states across two structures")
    p.add_argument("base")
    p.add_argument("variant")
    p.add_argument("scenario")
    p.add_argument("--map", default=None, help="base=variant state pairs, comma separated")
    common(p)
    p.set_defaults(fn=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InvalidModelError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EscalateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
