"""Golden checks for the three built-in example markets, used by ``exante-match paper``."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from exante_match.clearing import greatest_market_clearing, no_deterministic_clearing_witness
from exante_match.decisions import NaiveRule
from exante_match.demand import matching_distribution
from exante_match.information import is_more_informative
from exante_match.oracle import enumerate_outcomes
from exante_match.scenario import Scenario, scenario_from_dict
from exante_match.welfare import pareto_compare, rank_distributions


@dataclass(frozen=True)
class GoldenResult:
    name: str
    passed: bool
    detail: str


def builtin_scenario(name: str) -> Scenario:
    text = resources.files("exante_match").joinpath("data", f"{name}.json").read_text()
    return scenario_from_dict(json.loads(text))


def _close(a, b, tol) -> bool:
    return bool(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))) <= tol)


def _fmt(v) -> str:
    return "(" + ", ".join(f"{x:.6g}" for x in np.asarray(v).ravel()) + ")"


def ex_a_checks() -> list[GoldenResult]:
    sc = builtin_scenario("ex_a")
    inst = sc.instance
    out = []
    expected = {
        "partition": ((4, 4, 4, 4), [[0.7, 0.3, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]]),
        "full": ((2, 4, 1.7, 1), [[0.7, 0, 0.3, 0], [1, 0, 0, 0], [0.7, 0.3, 0, 0], [1, 0, 0, 0]]),
    }
    for name, (cutoff, ranks) in expected.items():
        signals = sc.signal(name)
        rule = NaiveRule(inst, signals)
        res = greatest_market_clearing(inst, signals, rule)
        out.append(GoldenResult(f"EX-A {name}: greatest cutoff", _close(res.cutoff, cutoff, 1e-6),
                                f"got {_fmt(res.cutoff)}, want {_fmt(cutoff)}"))
        dist = rank_distributions(inst, signals, rule, res.cutoff)[:, :inst.n]
        out.append(GoldenResult(f"EX-A {name}: rank distributions", _close(dist, ranks, 1e-9),
                                "rows " + "; ".join(_fmt(r) for r in dist)))
    verdict = pareto_compare(inst, sc.signal("full"), sc.signal("partition"))
    out.append(GoldenResult("EX-A: full disclosure Pareto dominated by partition",
                            verdict.verdict == "right-dominates", f"verdict {verdict.verdict}"))
    fine, coarse = sc.signal("full")[0], sc.signal("partition")[0]
    fwd, back = is_more_informative(fine, coarse), is_more_informative(coarse, fine)
    out.append(GoldenResult("EX-A: full more informative than partition, not conversely",
                            fwd.informative and not back.informative,
                            f"forward {fwd.informative} (residual {fwd.residual:.1e}), reverse {back.informative}"))
    return out


def ex_b_checks() -> list[GoldenResult]:
    out = []
    for prior in ((0.5, 0.5), (0.3, 0.7), (0.8, 0.2)):
        sc = builtin_scenario("ex_b")
        inst = sc.instance.replace(prior=np.array(prior))
        signals = sc.signal("full")
        rule = NaiveRule(inst, signals)
        scan = no_deterministic_clearing_witness(inst, signals, rule)
        none_clear = all(c not in scan.clearing for c in itertools.product((1, 2), repeat=2))
        out.append(GoldenResult(f"EX-B prior {prior}: no integer cutoff clears", none_clear and scan.none_clear,
                                f"clearing integer cutoffs {scan.clearing}"))
        res = greatest_market_clearing(inst, signals, rule)
        want = (1 + prior[1], 2)
        out.append(GoldenResult(f"EX-B prior {prior}: cutoff (1 + psi(w2), 2)",
                                _close(res.cutoff, want, 1e-9), f"got {_fmt(res.cutoff)}, want {_fmt(want)}"))
    return out


def ex_c_checks() -> list[GoldenResult]:
    sc = builtin_scenario("ex_c")
    inst = sc.instance
    signals = sc.signal("full")
    rule = NaiveRule(inst, signals)
    w1 = 0.25
    b = w1 * np.array([1.0, 2.0]) + (1 - w1) * np.array([2.0, 2.0])
    psi1, psi2 = inst.prior
    w2 = 1 - w1
    matrix = np.array([
        [w1 * psi1 + w2 * psi1, w1 * psi2 + w2 * psi2],
        [w2 * psi1 + w2 * psi2, w1 * psi1 + w1 * psi2],
    ])
    dist = matching_distribution(inst, signals, rule, b)
    exact = enumerate_outcomes(inst, signals, rule, b)
    got = dist.marginals[:, :inst.n]
    ok = _close(got, matrix, 1e-12) and _close(exact.marginals()[:, :inst.n], matrix, 1e-12)
    terms = {(0, 1): w1 * psi1, (1, 1): w1 * psi2, (0, 0): w2 * psi1, (1, 0): w2 * psi2}
    support = exact.by_matching()
    ok_terms = set(support) == set(terms) and all(abs(support[m] - w) <= 1e-12 for m, w in terms.items())
    return [
        GoldenResult("EX-C: match probability matrix", ok, "rows " + "; ".join(_fmt(r) for r in got)),
        GoldenResult("EX-C: four deterministic matchings with their weights", ok_terms,
                     ", ".join(f"{m}: {w:.6g}" for m, w in sorted(support.items()))),
    ]


def run_all() -> list[GoldenResult]:
    return ex_a_checks() + ex_b_checks() + ex_c_checks()
