"""Two students, two programs with one seat each, two equally likely states.

No integer cutoff clears this market in expectation, but a fractional one
does. The script scans the integer cutoffs, solves for the clearing cutoff and
then watches enrollment fluctuate around capacity in simulated draws.
"""

from exante_match import (
    NaiveRule,
    SimulationConfig,

    greatest_market_clearing,
    no_deterministic_clearing_witness,
    simulate,
)
from exante_match.fixtures import ex_b

inst, signals = ex_b()
profile = signals["full"]
rule = NaiveRule(inst, profile)

scan = no_deterministic_clearing_witness(inst, profile, rule)
for cutoff, demand, clears in scan.checked:
    print(f"cutoff {cutoff}: expected demand {[round(float(x), 6) for x in demand]}, clears: {clears}")

b = greatest_market_clearing(inst, profile, rule).cutoff
print("\nclearing cutoff:", b.round(6).tolist())

report = simulate(inst, profile, rule, b, SimulationConfig(draws=200_000, seed=7))
print("simulated mean enrollment:", report.demand.round(4).tolist())
print("share of draws with a program over capacity:", report.overflow_frequency.round(4).tolist())
