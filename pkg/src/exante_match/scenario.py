"""Scenario files: a versioned JSON document describing a market and its signals.

See ``docs/scenario-format.md`` for the full layout. Loading checks every field
and reports problems by their location in the document, for example
``rankings.s2.w1[0]: unknown program 'p9'``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from exante_match.information import Signal, full_disclosure, null_signal, partition_signal
from exante_match.model import MarketInstance, MatchingError, make_instance, validate_instance

SCHEMA = "exante-match/1"
SIGNAL_KINDS = ("full", "null", "partition", "explicit")


class ScenarioError(MatchingError, ValueError):
    """Malformed document or a field that does not make sense."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = tuple(problems)
        super().__init__("; ".join(self.problems))


class ScenarioValidationError(ScenarioError):
    """The document parsed, but the resulting market fails validation."""


@dataclass(frozen=True, eq=False)
class Scenario:
    instance: MarketInstance
    signals: dict[str, tuple[Signal, ...]]
    config: dict[str, Any] = field(default_factory=dict)

    def signal(self, name: str) -> tuple[Signal, ...]:
        try:
            return self.signals[name]
        except KeyError:
            known = ", ".join(sorted(self.signals)) or "none"
            raise ScenarioError(f"signals: no signal named {name!r} (known: {known})") from None


class _Reader:
    """Collects field-level problems instead of stopping at the first one."""

    def __init__(self):
        self.problems: list[str] = []

    def fail(self, where: str, msg: str) -> None:
        self.problems.append(f"{where}: {msg}")

    def names(self, doc, key) -> list[str]:
        val = doc.get(key)
        if not isinstance(val, list) or not val or not all(isinstance(x, str) for x in val):
            self.fail(key, "expected a non-empty list of names")
            return []
        if len(set(val)) != len(val):
            self.fail(key, "names must be distinct")
        return val

    def per_label(self, doc, key, labels, *, required=True, default=None) -> list | None:
        """Accept either a list aligned with ``labels`` or a mapping keyed by label."""
        val = doc.get(key, default)
        if val is None:
            if required:
                self.fail(key, "missing")
            return None
        if isinstance(val, dict):
            extra = set(val) - set(labels)
            for name in sorted(extra):
                self.fail(f"{key}.{name}", "unknown name")
            missing = [x for x in labels if x not in val]
            for name in missing:
                self.fail(f"{key}.{name}", "missing")
            if extra or missing:
                return None
            return [val[x] for x in labels]
        if isinstance(val, list):
            if len(val) != len(labels):
                self.fail(key, f"expected {len(labels)} entries, got {len(val)}")
                return None
            return list(val)
        self.fail(key, "expected a list or an object")
        return None

    def number(self, where, val) -> float | None:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail(where, f"expected a number, got {val!r}")
            return None
        return float(val)


def _read_signal(r: _Reader, where: str, desc, states: list[str]) -> Signal | None:
    if not isinstance(desc, dict) or desc.get("kind") not in SIGNAL_KINDS:
        r.fail(f"{where}.kind", f"expected one of {', '.join(SIGNAL_KINDS)}")
        return None
    kind = desc["kind"]
    S = len(states)
    labels = desc.get("labels")
    try:
        if kind == "full":
            return full_disclosure(S, labels or states)
        if kind == "null":
            return null_signal(S)
        if kind == "partition":
            cells = desc.get("cells")
            if not isinstance(cells, list):
                r.fail(f"{where}.cells", "expected a list of state lists")
                return None
            idx = []
            for c, cell in enumerate(cells):
                row = []
                for j, w in enumerate(cell):
                    if w not in states:
                        r.fail(f"{where}.cells[{c}][{j}]", f"unknown state {w!r}")
                    else:
                        row.append(states.index(w))
                idx.append(row)
            if r.problems:
                return None
            return partition_signal(idx, S, labels or ["|".join(cell) for cell in cells])
        rows = r.per_label(desc, "likelihood", states)
        if rows is None:
            r.problems[-1] = f"{where}.{r.problems[-1]}"
            return None
        return Signal(np.array(rows, dtype=float), tuple(labels or ()))
    except (ValueError, TypeError) as exc:
        r.fail(where, str(exc))
        return None


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("document: expected a JSON object")
    r = _Reader()
    schema = doc.get("schema")
    if schema != SCHEMA:
        raise ScenarioError(f"schema: expected {SCHEMA!r}, got {schema!r}")
    students = r.names(doc, "students")
    programs = r.names(doc, "programs")
    states = r.names(doc, "states")
    if r.problems:
        raise ScenarioError(r.problems)

    capacities = r.per_label(doc, "capacities", programs)
    prior = r.per_label(doc, "prior", states)
    for key, vals, labels in (("capacities", capacities, programs), ("prior", prior, states)):
        for name, v in zip(labels, vals or []):
            r.number(f"{key}.{name}", v)

    priorities = r.per_label(doc, "priorities", programs)
    for p, order in zip(programs, priorities or []):
        if not isinstance(order, list):
            r.fail(f"priorities.{p}", "expected a list of students")
            continue
        for j, s in enumerate(order):
            if s not in students:
                r.fail(f"priorities.{p}[{j}]", f"unknown student {s!r}")

    rankings = doc.get("rankings")
    matrix = doc.get("utility_matrix")
    if (rankings is None) == (matrix is None):
        r.fail("rankings", "give exactly one of 'rankings' or 'utility_matrix'")
    ranking_map = None
    if rankings is not None:
        per_student = r.per_label(doc, "rankings", students)
        ranking_map = {}
        for s, by_state in zip(students, per_student or []):
            if isinstance(by_state, dict):
                by_state = r.per_label({f"rankings.{s}": by_state}, f"rankings.{s}", states)
            if not isinstance(by_state, list) or len(by_state) != len(states):
                r.fail(f"rankings.{s}", f"expected one ranking per state ({len(states)})")
                continue
            for w, order in zip(states, by_state):
                if not isinstance(order, list):
                    r.fail(f"rankings.{s}.{w}", "expected a list of programs")
                    continue
                for j, p in enumerate(order):
                    if p not in programs:
                        r.fail(f"rankings.{s}.{w}[{j}]", f"unknown program {p!r}")
            ranking_map[s] = by_state
    values = None
    if matrix is not None:
        per_student = r.per_label(doc, "utility_matrix", students)
        values = np.zeros((len(students), len(programs), len(states)))
        for k, (s, rows) in enumerate(zip(students, per_student or [])):
            sub = r.per_label({f"utility_matrix.{s}": rows}, f"utility_matrix.{s}", programs)
            for p, (pname, per_state) in enumerate(zip(programs, sub or [])):
                where = f"utility_matrix.{s}.{pname}"
                vals = r.per_label({where: per_state}, where, states)
                for w, v in enumerate(vals or []):
                    x = r.number(f"{where}.{states[w]}", v)
                    if x is not None:
                        values[k, p, w] = x

    rank_values = doc.get("rank_values")
    if rank_values is not None:
        if not isinstance(rank_values, list) or len(rank_values) != len(programs):
            r.fail("rank_values", f"expected {len(programs)} numbers")
        else:
            for j, v in enumerate(rank_values):
                r.number(f"rank_values[{j}]", v)
    program_utilities = None
    if doc.get("program_utilities") is not None:
        rows = r.per_label(doc, "program_utilities", programs)
        program_utilities = []
        for p, row in zip(programs, rows or []):
            vals = r.per_label({f"program_utilities.{p}": row}, f"program_utilities.{p}", students)
            program_utilities.append([r.number(f"program_utilities.{p}.{s}", v) for s, v in zip(students, vals or [])])
    unmatched = r.number("unmatched_utility", doc.get("unmatched_utility", 0.0))

    raw_signals = doc.get("signals")
    signals: dict[str, tuple[Signal, ...]] = {}
    if not isinstance(raw_signals, dict) or not raw_signals:
        r.fail("signals", "expected an object mapping names to signal descriptions")
    else:
        for name, desc in raw_signals.items():
            where = f"signals.{name}"
            if isinstance(desc, dict) and "per_student" in desc:
                descs = r.per_label(desc, "per_student", students)
                profile = [_read_signal(r, f"{where}.per_student.{s}", sp, states)
                           for s, sp in zip(students, descs or [])]
            else:
                sig = _read_signal(r, where, desc, states)
                profile = [sig] * len(students)
            if profile and all(x is not None for x in profile):
                signals[name] = tuple(profile)

    config = doc.get("config", {})
    if not isinstance(config, dict):
        r.fail("config", "expected an object")
        config = {}
    if r.problems:
        raise ScenarioError(r.problems)

    try:
        inst = make_instance(
            students, programs, capacities, dict(zip(programs, priorities)), states, prior,
            rankings=ranking_map, rank_values=rank_values, utility_matrix=values,
            program_utilities=program_utilities, unmatched_utility=unmatched,
        )
    except (ValueError, MatchingError) as exc:
        raise ScenarioValidationError(str(exc)) from exc
    report = validate_instance(inst)
    if not report.ok:
        raise ScenarioValidationError(report.problems)
    return Scenario(inst, signals, dict(config))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(doc)


def _signal_to_dict(sig: Signal, states: tuple[str, ...]) -> dict:
    return {
        "kind": "explicit",
        "labels": list(sig.labels),
        "likelihood": {w: [float(x) for x in row] for w, row in zip(states, sig.likelihood)},
    }


def scenario_to_dict(scenario: Scenario) -> dict:
    """Emit a document that reloads to an identical instance.

    Rankings are written in completed form, and signals as explicit likelihoods.
    """
    inst = scenario.instance
    doc: dict[str, Any] = {
        "schema": SCHEMA,
        "students": list(inst.students),
        "programs": list(inst.programs),
        "states": list(inst.states),
        "capacities": {p: float(c) for p, c in zip(inst.programs, inst.capacities)},
        "prior": {w: float(x) for w, x in zip(inst.states, inst.prior)},
        "priorities": {p: [inst.students[k] for k in order]
                       for p, order in zip(inst.programs, inst.priorities)},
    }
    um = inst.utilities
    if um.rank_based:
        doc["rankings"] = {
            s: {w: [inst.programs[p] for p in um.rankings[k][j]] for j, w in enumerate(inst.states)}
            for k, s in enumerate(inst.students)
        }
        doc["rank_values"] = [float(x) for x in um.rank_values]
    else:
        doc["utility_matrix"] = {
            s: {p: {w: float(um.values[k, q, j]) for j, w in enumerate(inst.states)}
                for q, p in enumerate(inst.programs)}
            for k, s in enumerate(inst.students)
        }
    if inst.program_utilities is not None:
        doc["program_utilities"] = {
            p: {s: float(inst.program_utilities[q, k]) for k, s in enumerate(inst.students)}
            for q, p in enumerate(inst.programs)
        }
    doc["unmatched_utility"] = float(inst.unmatched_utility)
    signals = {}
    for name, profile in scenario.signals.items():
        if all(sig is profile[0] or sig.equals(profile[0], 0.0) for sig in profile):
            signals[name] = _signal_to_dict(profile[0], inst.states)
        else:
            signals[name] = {"per_student": {s: _signal_to_dict(sig, inst.states)
                                             for s, sig in zip(inst.students, profile)}}
    doc["signals"] = signals
    doc["config"] = dict(scenario.config)
    return doc


def dump_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def same_instance(a: MarketInstance, b: MarketInstance) -> bool:
    """Structural equality; the record of completed rankings is provenance and is ignored."""
    def arr_eq(x, y):
        if x is None or y is None:
            return x is None and y is None
        return x.shape == y.shape and bool(np.array_equal(x, y))

    ua, ub = a.utilities, b.utilities
    return (
        a.students == b.students and a.programs == b.programs and a.states == b.states
        and a.priorities == b.priorities and arr_eq(a.capacities, b.capacities)
        and arr_eq(a.prior, b.prior) and arr_eq(ua.values, ub.values)
        and ua.rankings == ub.rankings
        and arr_eq(None if ua.rank_values is None else np.asarray(ua.rank_values),
                   None if ub.rank_values is None else np.asarray(ub.rank_values))
        and arr_eq(a.program_utilities, b.program_utilities)
        and a.unmatched_utility == b.unmatched_utility
    )
