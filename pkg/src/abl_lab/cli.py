"""``abl-lab`` command line.

Exit codes: 0 success, 2 bad arguments or scenario, 3 post-selection
unreachable (zero ABL denominator).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .abl import ZeroDenominator, abl_distribution, abl_sequence_distribution, born_distribution
from .analysis import (
    build_world_sets,
    context_discrepancy,
    cotenability,
    discrepancy_scan,
    three_box,
)
from .config import ConfigError, ScenarioConfig, digest, load
from .simulate import frequency_vs_abl, run_trials

EXIT_CONFIG = 2
EXIT_UNREACHABLE = 3
SEED_ENV = "ABL_LAB_SEED"


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config_digest: str | None
    seed: int | None
    version: str = __version__
    outputs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "version": self.version,
            "outputs": self.outputs,
        }


def _f(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return f"{x:.6f}"


def _table(headers: list[str], rows: list[list]) -> str:
    cells = [[str(h) for h in headers]] + [[_f(c) if isinstance(c, float) or c is None else str(c) for c in r]
                                           for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _resolve_seed(args, cfg: ScenarioConfig | None) -> int:
    if args.seed is not None:
        return args.seed
    if cfg is not None and cfg.seed is not None:
        return cfg.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            seed = int(env, 0)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
        if not 0 <= seed < 2**64:
            raise UsageError(f"{SEED_ENV}={env!r} is not an unsigned 64-bit integer")
        return seed
    return 0


def _config(args) -> ScenarioConfig:
    if not args.config:
        raise UsageError("this command needs --config PATH")
    return load(args.config)


def _emit(args, manifest: RunManifest, payload: dict, text: str, suffix: str = ".json") -> None:
    """Print the table (or JSON with --json); with --out also write JSON and a manifest file."""
    if args.out:
        out = Path(args.out)
        manifest.outputs = [str(out), str(out.with_suffix(".manifest.json"))]
        out.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        out.with_suffix(".manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    if args.json:
        print(json.dumps({**payload, "manifest": manifest.to_dict()}, indent=2, ensure_ascii=False))
    else:
        print(text)


def cmd_abl(args) -> int:
    cfg = _config(args)
    payload, blocks = {"scenario": cfg.name, "observables": {}}, []
    for name, q in cfg.observables.items():
        dist = abl_distribution(cfg.ctx, q)
        fwd = born_distribution(cfg.ctx.pre, q)
        payload["observables"][name] = {"abl": dist.as_dict(), "born": fwd.as_dict()}
        rows = [[o.label, o.eigenvalue, dist[o.label], fwd[o.label]] for o in q.outcomes]
        blocks.append(f"{name}\n" + _table(["outcome", "eigenvalue", "P_ABL(q|a,b)", "P_Born(q|a)"], rows))
    _emit(args, RunManifest("abl", cfg.digest, None), payload, "\n\n".join(blocks))
    return 0


def cmd_sequence(args) -> int:
    cfg = _config(args)
    dist = abl_sequence_distribution(cfg.ctx, cfg.sequence)
    names = [o.name for o in cfg.sequence]
    payload = {"scenario": cfg.name, "sequence": names,
               "distribution": {"→".join(k): p for k, p in dist.items()}}
    rows = [["→".join(k) or "()", p] for k, p in dist.items()]
    text = "sequence: " + (" -> ".join(names) or "(empty)") + "\n" + _table(["outcomes", "P_ABL"], rows)
    _emit(args, RunManifest("sequence", cfg.digest, None), payload, text)
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    trials = args.trials if args.trials is not None else cfg.trials
    if trials is None:
        raise UsageError("no trial count: set 'trials' in the scenario or pass --trials")
    if trials < 1:
        raise UsageError(f"trial count must be >= 1, got {trials}")
    seed = _resolve_seed(args, cfg)
    report = run_trials(cfg.ctx, cfg.sequence, cfg.final, trials, seed)
    rows = frequency_vs_abl(report, cfg.ctx, cfg.sequence)
    comparison = [
        {"outcomes": list(r.outcomes), "count": r.count, "subensemble": r.subensemble,
         "frequency": None if math.isnan(r.frequency) else r.frequency,
         "abl": None if math.isnan(r.abl) else r.abl,
         "stderr": None if math.isnan(r.stderr) else r.stderr,
         "z": None if math.isnan(r.z) or math.isinf(r.z) else r.z, "flag": r.flag}
        for r in rows
    ]
    manifest = RunManifest("simulate", cfg.digest, seed)
    if args.out:
        out = Path(args.out)
        manifest.outputs = [str(out), str(out.with_suffix(".manifest.json"))]
        out.write_text(report.to_json() + "\n", encoding="utf-8")
        out.with_suffix(".manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    if args.json:
        print(json.dumps({"report": report.to_dict(), "post_label": report.post_label,
                          "comparison": comparison, "manifest": manifest.to_dict()},
                         indent=2, ensure_ascii=False))
    else:
        if not args.out:
            print(report.to_json())
        print(f"post-selected on {cfg.final.name}={report.post_label}: "
              f"{report.subensemble_counts[report.post_label]} of {report.trials} trials")
        print(_table(["outcomes", "count", "frequency", "P_ABL", "stderr", "z", "flag"],
                     [["→".join(r.outcomes) or "()", r.count, r.frequency, r.abl, r.stderr,
                       r.z if math.isfinite(r.z) else None if math.isnan(r.z) else "inf", r.flag]
                      for r in rows]))
    if any(abs(r.z) > 4 for r in rows if not math.isnan(r.z)):
        print("WARN: some |z| > 4", file=sys.stderr if args.json else sys.stdout)
    return 0


SCAN_HEADER = ["theta_b", "theta_c", "counterfactual_total", "qm_prediction", "discrepancy", "special_case"]


def scan_csv(result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(SCAN_HEADER)
    if result.full_sphere:
        header[2:2] = ["phi_b", "phi_c"]
    w.writerow(header)
    for cell in result:
        r = cell.result
        row = [f"{cell.b.theta:.12g}", f"{cell.c.theta:.12g}"]
        if result.full_sphere:
            row += [f"{cell.b.phi:.12g}", f"{cell.c.phi:.12g}"]
        row += [f"{r.counterfactual_total:.15g}", f"{r.qm_prediction:.15g}", f"{r.discrepancy:.15g}",
                "true" if r.special_case else "false"]
        w.writerow(row)
    return buf.getvalue()


def cmd_scan(args) -> int:
    if not 2 <= args.steps <= 64:
        raise UsageError(f"--steps must be in [2, 64], got {args.steps}")
    if args.full_sphere and args.steps > 16:
        raise UsageError("--full-sphere is limited to --steps 16")
    result = discrepancy_scan(args.steps, full_sphere=args.full_sphere)
    text = scan_csv(result)
    best = result.argmax
    n_special = sum(c.result.special_case for c in result)
    summary = (f"# cells={len(result)} special={n_special} max|discrepancy|={result.max_abs_discrepancy:.15g} "
               f"at theta_b={best.b.theta:.12g} theta_c={best.c.theta:.12g}")
    manifest = RunManifest("scan", digest({"steps": args.steps, "full_sphere": args.full_sphere}), None)
    if args.out:
        out = Path(args.out)
        manifest.outputs = [str(out), str(out.with_suffix(".manifest.json"))]
        out.write_text(text, encoding="utf-8")
        out.with_suffix(".manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)
    return 0


def cmd_worlds(args) -> int:
    cfg = _config(args)
    sets = build_world_sets(cfg.ctx, list(cfg.observables.values()))
    blocks = []
    for ws in sets:
        rows = [[w.outcome, w.forward_weight, w.post_conditional, w.joint, w.abl_conditional,
                 w.fixed_outcome_conditional, "yes" if w.disagrees else "no"] for w in ws.worlds]
        title = f"worlds for {ws.observable.name}" + ("" if ws.defined else "  (ABL undefined: post-selection unreachable)")
        blocks.append(title + "\n" + _table(
            ["world", "P(q|a)", "P(b|q)", "P(q,b|a)", "P_ABL(q|a,b)", "unity", "differs"], rows))
    payload = {"scenario": cfg.name, "world_sets": [ws.to_dict() for ws in sets]}
    _emit(args, RunManifest("worlds", cfg.digest, None), payload, "\n\n".join(blocks))
    return 0


def cmd_cotenable(args) -> int:
    cfg = _config(args)
    payload, lines = {"scenario": cfg.name, "verdicts": {}}, []
    for name, q in cfg.observables.items():
        v = cotenability(cfg.ctx, q)
        entry = v.to_dict()
        checks = {}
        for label in q.labels:
            try:
                checks[label] = context_discrepancy(cfg.ctx, q, label).to_dict()
            except ZeroDenominator:
                checks[label] = None
        entry["discrepancies"] = checks
        payload["verdicts"][name] = entry
        verdict = "holds" if v.holds else f"fails (witness: {v.witness})"
        lines.append(f"{name}: cotenability {verdict}")
        for label, d in checks.items():
            if d is not None:
                lines.append(f"  {label}: counterfactual total {_f(d['counterfactual_total'])}"
                             f"  QM {_f(d['qm_prediction'])}  difference {_f(d['discrepancy'])}")
    _emit(args, RunManifest("cotenable", cfg.digest, None), payload, "\n".join(lines))
    return 0


def cmd_threebox(args) -> int:
    report = three_box()
    rows = []
    for b in report.boxes:
        rows.append([f"box{b.box}", b.abl["yes"], b.forward["yes"],
                     "holds" if b.cotenability.holds else f"fails ({b.cotenability.witness})"])
    text = "pre (1,1,1)/sqrt3, post (1,1,-1)/sqrt3\n" + _table(
        ["observable", "P_ABL(yes)", "P_Born(yes)", "cotenability"], rows)
    _emit(args, RunManifest("threebox", None, None), report.to_dict(), text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario JSON file or bundled scenario name")
    common.add_argument("--seed", type=int, help=f"override the seed (config, then ${SEED_ENV} otherwise)")
    common.add_argument("--out", metavar="PATH", help="write machine-readable output and a manifest here")
    common.add_argument("--json", action="store_true", help="print JSON instead of tables")

    parser = argparse.ArgumentParser(prog="abl-lab", description="ABL probabilities for pre- and post-selected ensembles.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("abl", parents=[common], help="ABL and Born probabilities per observable").set_defaults(
        func=cmd_abl)
    sub.add_parser("sequence", parents=[common], help="ABL distribution over a measurement sequence").set_defaults(
        func=cmd_sequence)
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo run compared with ABL values")
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("scan", parents=[common], help="counterfactual discrepancy over spin directions (CSV)")
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--full-sphere", action="store_true", help="also sweep azimuths (steps <= 16)")
    p.set_defaults(func=cmd_scan)
    sub.add_parser("worlds", parents=[common], help="possible-world tables per observable").set_defaults(
        func=cmd_worlds)
    sub.add_parser("cotenable", parents=[common], help="cotenability verdict per observable").set_defaults(
        func=cmd_cotenable)
    sub.add_parser("threebox", parents=[common], help="the three-box scenario").set_defaults(func=cmd_threebox)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ZeroDenominator as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNREACHABLE


if __name__ == "__main__":
    sys.exit(main())
