"""Command-line driver: ``exante-match <command> [scenario] [options]``.

Exit status: 0 success, 1 a check reported failure, 2 invalid input,
3 the clearing iteration did not converge, 4 an unbroken tie in a decision.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Any

import numpy as np

from exante_match import golden
from exante_match.clearing import (
    ClearingConfig,
    NonConvergence,
    greatest_market_clearing,
    least_market_clearing,
    rural_hospital_check,
    verify_market_clearing,
)
from exante_match.decisions import NaiveRule, check_gross_substitutes, check_obedience, lift_naive
from exante_match.demand import demand
from exante_match.information import belief_distribution, check_bayes_plausible, profile_more_informative
from exante_match.model import MatchingError, TieError
from exante_match.oracle import SimulationConfig, simulate
from exante_match.scenario import Scenario, ScenarioError, load_scenario
from exante_match.welfare import pareto_compare, welfare_monotonicity_check, welfare_report

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_TIE = 0, 1, 2, 3, 4

PROGRAM_COLUMNS = ["program", "demand", "capacity", "cutoff"]


class Output:
    """Collects tables and key/value lines, then renders them in one format."""

    def __init__(self, fmt: str):
        self.fmt = fmt
        self.meta: dict[str, Any] = {}
        self.tables: list[tuple[str, list[str], list[list[Any]]]] = []

    def note(self, key: str, value: Any) -> None:
        self.meta[key] = value

    def table(self, name: str, columns: list[str], rows: list[list[Any]]) -> None:
        self.tables.append((name, columns, rows))

    def render(self) -> str:
        if self.fmt == "json":
            doc = {k: _jsonable(v) for k, v in self.meta.items()}
            for name, cols, rows in self.tables:
                doc[name] = [dict(zip(cols, map(_jsonable, row))) for row in rows]
            return json.dumps(doc, indent=2)
        if self.fmt == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            for j, (_, cols, rows) in enumerate(self.tables):
                if j:
                    buf.write("\n")
                writer.writerow(cols)
                writer.writerows([[_full(x) for x in row] for row in rows])
            return buf.getvalue().rstrip("\n")
        lines = [f"{k}: {_short(v)}" for k, v in self.meta.items()]
        for name, cols, rows in self.tables:
            cells = [cols] + [[_short(x) for x in row] for row in rows]
            widths = [max(len(r[c]) for r in cells) for c in range(len(cols))]
            numeric = [bool(rows) and all(isinstance(row[c], (int, float, np.number)) for row in rows)
                       for c in range(len(cols))]
            lines.append("")
            lines.append(f"[{name}]")
            for r in cells:
                lines.append("  ".join(s.rjust(w) if num else s.ljust(w)
                                       for s, w, num in zip(r, widths, numeric)).rstrip())
        return "\n".join(lines).lstrip("\n")


def _short(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "(" + ", ".join(_short(v) for v in x) + ")"
    if isinstance(x, (bool, np.bool_)):
        return "yes" if x else "no"
    return str(x)


def _full(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _parse_cutoff(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ScenarioError(f"--cutoff: expected comma-separated numbers, got {text!r}") from None


class Context:
    def __init__(self, args, scenario: Scenario):
        self.args = args
        self.scenario = scenario
        self.inst = scenario.instance
        cfg = scenario.config
        self.coupling = args.coupling or cfg.get("coupling", "independent")
        self.tol = args.tol if args.tol is not None else float(cfg.get("tol", 1e-6))
        self.tie_break = args.tie_break or cfg.get("tie_break", "error")
        self.clearing = ClearingConfig(
            clearing_tol=self.tol,
            max_sweeps=int(cfg.get("max_sweeps", 10_000)),
            scheme=cfg.get("scheme", "simultaneous"),
            coupling=self.coupling,
        )

    def signal_name(self, name: str | None) -> str:
        if name:
            return name
        names = list(self.scenario.signals)
        return "full" if "full" in names else names[0]

    def profile(self, name: str | None):
        name = self.signal_name(name)
        signals = self.scenario.signal(name)
        return name, signals, NaiveRule(self.inst, signals, tie_break=self.tie_break)

    def cutoff(self, signals, rule, required: bool) -> tuple[np.ndarray, str]:
        text = self.args.cutoff
        if text is None and "cutoff" in self.scenario.config:
            return np.asarray(self.scenario.config["cutoff"], dtype=float), "scenario config"
        if text is not None:
            return _parse_cutoff(text), "--cutoff"
        if required:
            raise ScenarioError("--cutoff is required for this command")
        return greatest_market_clearing(self.inst, signals, rule, self.clearing).cutoff, "greatest clearing"

    def program_rows(self, d, b) -> list[list[Any]]:
        return [[p, float(d[j]), float(self.inst.capacities[j]), float(b[j])]
                for j, p in enumerate(self.inst.programs)]


def cmd_solve(ctx: Context, out: Output) -> int:
    name, signals, rule = ctx.profile(ctx.args.signal)
    hi = greatest_market_clearing(ctx.inst, signals, rule, ctx.clearing)
    lo = least_market_clearing(ctx.inst, signals, rule, ctx.clearing)
    out.note("signal", name)
    out.note("coupling", ctx.coupling)
    out.note("greatest cutoff", hi.cutoff)
    out.note("greatest sweeps", hi.sweeps)
    out.note("least cutoff", lo.cutoff)
    out.note("least sweeps", lo.sweeps)
    rows = [["greatest"] + r for r in ctx.program_rows(hi.demand, hi.cutoff)]
    rows += [["least"] + r for r in ctx.program_rows(lo.demand, lo.cutoff)]
    out.table("programs", ["point"] + PROGRAM_COLUMNS, rows)
    out.table("trace", ["sweep"] + list(ctx.inst.programs),
              [[j] + [float(x) for x in b] for j, b in enumerate(hi.trajectory)])
    return EXIT_OK


def cmd_demand(ctx: Context, out: Output) -> int:
    name, signals, rule = ctx.profile(ctx.args.signal)
    b, _ = ctx.cutoff(signals, rule, required=True)
    d = demand(ctx.inst, signals, rule, b, ctx.coupling)
    out.note("signal", name)
    out.note("unmatched", d.unmatched)
    out.table("programs", PROGRAM_COLUMNS, ctx.program_rows(d.values, b))
    return EXIT_OK


def _student_rows(inst, report) -> list[list[Any]]:
    return [[s] + [float(x) for x in report.rank_distributions[k]] + [float(report.utilities[k])]
            for k, s in enumerate(inst.students)]


def _student_columns(inst) -> list[str]:
    return ["student"] + [f"rank-{j + 1}" for j in range(inst.n)] + ["unmatched", "EU"]


def cmd_welfare(ctx: Context, out: Output) -> int:
    name, signals, rule = ctx.profile(ctx.args.signal)
    b, source = ctx.cutoff(signals, rule, required=False)
    report = welfare_report(ctx.inst, signals, rule, b, ctx.coupling)
    out.note("signal", name)
    out.note("cutoff", b)
    out.note("cutoff source", source)
    out.table("students", _student_columns(ctx.inst), _student_rows(ctx.inst, report))
    if report.program_utilities is not None:
        out.table("program welfare", ["program", "utility"],
                  [[p, float(u)] for p, u in zip(ctx.inst.programs, report.program_utilities)])
    return EXIT_OK


_VERDICT_TEXT = {
    "left-dominates": "right Pareto dominated by left",
    "right-dominates": "left Pareto dominated by right",
    "equivalent": "left and right give every student the same utility",
    "incomparable": "neither Pareto dominates the other",
}


def cmd_compare(ctx: Context, out: Output) -> int:
    if not ctx.args.left or not ctx.args.right:
        raise ScenarioError("compare needs --left and --right signal names")
    left, right = ctx.scenario.signal(ctx.args.left), ctx.scenario.signal(ctx.args.right)
    fwd = profile_more_informative(left, right)
    back = profile_more_informative(right, left)
    verdict = pareto_compare(ctx.inst, left, right, ctx.tie_break, ctx.clearing)
    yn = {True: "yes", False: "no"}
    out.note("summary", f"left more informative: {yn[fwd]}; {_VERDICT_TEXT[verdict.verdict]}")
    out.note("left", ctx.args.left)
    out.note("right", ctx.args.right)
    out.note("right more informative", yn[back])
    out.note("verdict", verdict.verdict)
    out.note("left cutoff", verdict.left_cutoff)
    out.note("right cutoff", verdict.right_cutoff)
    out.table("students", ["student", "EU left", "EU right", "difference"],
              [[s, float(a), float(b), float(d)] for s, a, b, d in
               zip(ctx.inst.students, verdict.left_utilities, verdict.right_utilities, verdict.deltas)])
    return EXIT_OK


def cmd_simulate(ctx: Context, out: Output) -> int:
    name, signals, rule = ctx.profile(ctx.args.signal)
    b, source = ctx.cutoff(signals, rule, required=False)
    seed = ctx.args.seed if ctx.args.seed is not None else int(ctx.scenario.config.get("seed", 0))
    draws = ctx.args.draws if ctx.args.draws is not None else int(ctx.scenario.config.get("draws", 100_000))
    rep = simulate(ctx.inst, signals, rule, b, SimulationConfig(draws=draws, seed=seed, coupling=ctx.coupling))
    out.note("signal", name)
    out.note("cutoff", b)
    out.note("cutoff source", source)
    out.note("draws", rep.draws)
    out.note("seed", seed)
    out.note("mean unmatched", rep.unmatched)
    out.table("programs", PROGRAM_COLUMNS + ["std error", "over capacity"],
              [r + [float(se), float(f)] for r, se, f in
               zip(ctx.program_rows(rep.demand, b), rep.demand_se, rep.overflow_frequency)])
    out.table("students", ["student", "EU", "std error"],
              [[s, float(u), float(se)] for s, u, se in zip(ctx.inst.students, rep.utilities, rep.utilities_se)])
    return EXIT_OK


def cmd_verify(ctx: Context, out: Output) -> int:
    inst = ctx.inst
    rows = []
    names = [ctx.args.signal] if ctx.args.signal else list(ctx.scenario.signals)
    for name in names:
        _, signals, rule = ctx.profile(name)
        hi = greatest_market_clearing(inst, signals, rule, ctx.clearing)
        lo = least_market_clearing(inst, signals, rule, ctx.clearing)
        lifted = lift_naive(rule)
        checks = [
            ("greatest cutoff clears", verify_market_clearing(inst, signals, rule, hi.cutoff, ctx.tol, ctx.coupling).ok),
            ("least cutoff clears", verify_market_clearing(inst, signals, rule, lo.cutoff, ctx.tol, ctx.coupling).ok),
            ("obedience", check_obedience(inst, signals, lifted).ok),
            ("gross substitutes", check_gross_substitutes(inst, signals, lifted).ok),
            ("student welfare monotone", welfare_monotonicity_check(
                inst, signals, rule, hi.cutoff, lo.cutoff, coupling=ctx.coupling, clearing_tol=ctx.tol).ok),
            ("rural hospital", rural_hospital_check(
                inst, signals, rule, hi.cutoff, lo.cutoff, tol=max(ctx.tol, 1e-9), coupling=ctx.coupling,
                clearing_tol=ctx.tol).ok),
            ("Bayes plausible", all(check_bayes_plausible(belief_distribution(inst.prior, s), inst.prior)
                                    for s in signals)),
        ]
        rows += [[name, check, "pass" if ok else "FAIL"] for check, ok in checks]
    out.table("checks", ["signal", "check", "result"], rows)
    return EXIT_OK if all(r[2] == "pass" for r in rows) else EXIT_CHECK_FAILED


def cmd_paper(args, out: Output) -> int:
    results = golden.run_all()
    out.table("golden checks", ["check", "result", "detail"],
              [[r.name, "pass" if r.passed else "FAIL", r.detail] for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


COMMANDS = {
    "solve": (cmd_solve, "greatest and least clearing cutoffs with demand and the iteration trace"),
    "demand": (cmd_demand, "demand at the cutoff given by --cutoff"),
    "welfare": (cmd_welfare, "rank distributions and expected utilities (default: greatest clearing cutoff)"),
    "compare": (cmd_compare, "Blackwell order and Pareto verdict between --left and --right"),
    "simulate": (cmd_simulate, "Monte Carlo estimate of demand and utilities"),
    "verify": (cmd_verify, "sweep of invariant checks for each signal"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exante-match", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--signal", help="signal name from the scenario")
        p.add_argument("--cutoff", help="ex-ante cutoff as comma-separated numbers, one per program")
        p.add_argument("--coupling", choices=["independent", "continuum"])
        p.add_argument("--tol", type=float, help="market-clearing tolerance (default 1e-6)")
        p.add_argument("--seed", type=int, help="simulation seed")
        p.add_argument("--draws", type=int, help="number of simulation draws")
        p.add_argument("--tie-break", choices=["error", "index"], dest="tie_break")
        p.add_argument("--format", choices=["table", "csv", "json"], default="table")
        if name == "compare":
            p.add_argument("--left", help="signal name on the left")
            p.add_argument("--right", help="signal name on the right")
    p = sub.add_parser("paper", help="golden checks on the built-in example markets")
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Output(args.format)
    try:
        if args.command == "paper":
            code = cmd_paper(args, out)
        else:
            ctx = Context(args, load_scenario(args.scenario))
            if ctx.inst.completions:
                out.note("completed rankings", "; ".join(ctx.inst.completions))
            code = COMMANDS[args.command][0](ctx, out)
    except TieError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TIE
    except NonConvergence as exc:
        last = ", ".join(f"{x:.10g}" for x in exc.result.cutoff)
        print(f"error: {exc}; last iterate ({last})", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ScenarioError, MatchingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(out.render())
    return code


if __name__ == "__main__":
    sys.exit(main())
