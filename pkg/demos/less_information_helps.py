"""Four students, four programs, three states.

Students who learn the state exactly end up worse off than students who only
learn whether the state is w1. Run with ``python3 demos/less_information_helps.py``.
"""

from exante_match import (
    NaiveRule,

    greatest_market_clearing,
    is_more_informative,
    pareto_compare,
    rank_distributions,
)
from exante_match.fixtures import ex_a

inst, signals = ex_a()
print("full disclosure is a refinement of the coarse signal:",
      bool(is_more_informative(signals["full"][0], signals["partition"][0])))

for name in ("partition", "full"):
    profile = signals[name]
    rule = NaiveRule(inst, profile)
    b = greatest_market_clearing(inst, profile, rule).cutoff
    print(f"\n{name}: greatest clearing cutoff {b.round(6).tolist()}")
    dist = rank_distributions(inst, profile, rule, b)
    for student, row in zip(inst.students, dist):
        print(f"  {student} gets choice 1..4 with probabilities {row[:4].round(6).tolist()}")

verdict = pareto_compare(inst, signals["full"], signals["partition"])
print("\nexpected utilities, full:", verdict.left_utilities.round(6).tolist())
print("expected utilities, coarse:", verdict.right_utilities.round(6).tolist())
print("verdict:", verdict.verdict)
